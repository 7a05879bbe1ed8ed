//! C ABI over `nlsnf`.
//!
//! Every entry point returns an [`NlsnfStatus`]; results go through out
//! pointers. Objects are opaque handles created by `*_new` functions and
//! released with the matching `*_free`. On failure a message for the calling
//! thread can be fetched with [`nlsnf_last_error`]. Panics never cross the
//! boundary; they surface as `NLSNF_STATUS_PANIC`.
//!
//! States are passed as split real/imaginary arrays of length 2M+1, ordered
//! from mode -M to mode M.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::os::raw::c_int;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use num_complex::Complex64;

use nlsnf::ball::BallSampler;
use nlsnf::measure::{resonant_fraction, MeasureError, Threshold};
use nlsnf::poly::{build_hamiltonian, Poly, PolyError};
use nlsnf::resonant_nf::{resonant_normalize, NfError, NfOptions};
use nlsnf::simulator::{Propagator, Scheme, SimError};
use nlsnf::timeplan::lambert_w_m1;
use nlsnf::{FourierState, KernelSpec, NonResonanceParams, NormParams, WeightFunction};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlsnfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// smallness or domain condition of a normal form violated
    Smallness = 3,
    Numeric = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Kernel selector: `kind` 0 is the power law |k|^-p, 1 is exp(-|k|^beta).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlsnfKernel {
    pub kind: c_int,
    pub p: u32,
    pub beta: f64,
}

/// Opaque split-step propagator.
pub struct NlsnfPropagator {
    inner: Propagator,
    modes: usize,
}

/// Opaque resonant normal form H0 + Z.
pub struct NlsnfNormalForm {
    poly: Poly,
    dump: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn fail(status: NlsnfStatus, msg: impl Into<String>) -> NlsnfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> NlsnfStatus) -> NlsnfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == NlsnfStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(NlsnfStatus::Panic, "internal panic"),
    }
}

fn kernel(k: &NlsnfKernel) -> Result<KernelSpec, NlsnfStatus> {
    let spec = match k.kind {
        0 => KernelSpec::PowerLaw { p: k.p },
        1 => KernelSpec::Exponential { beta: k.beta },
        other => return Err(fail(NlsnfStatus::InvalidArgument, format!("unknown kernel kind {other}"))),
    };
    spec.validate().map_err(|e| fail(NlsnfStatus::InvalidArgument, e.to_string()))?;
    Ok(spec)
}

fn nf_status(e: NfError) -> NlsnfStatus {
    let code = match e {
        NfError::SmallnessViolated { .. } => NlsnfStatus::Smallness,
        NfError::Poly(PolyError::Scale { .. }) => NlsnfStatus::InvalidArgument,
        _ => NlsnfStatus::Numeric,
    };
    fail(code, e.to_string())
}

/// # Safety
/// `re` and `im` must each point to `len` readable doubles.
unsafe fn read_state(modes: usize, re: *const f64, im: *const f64, len: usize) -> Result<FourierState, NlsnfStatus> {
    if re.is_null() || im.is_null() {
        return Err(fail(NlsnfStatus::NullPointer, "state pointer is null"));
    }
    if len != 2 * modes + 1 {
        return Err(fail(NlsnfStatus::InvalidArgument, format!("state length {len} != 2M+1 = {}", 2 * modes + 1)));
    }
    let (re, im) = (slice::from_raw_parts(re, len), slice::from_raw_parts(im, len));
    Ok(FourierState::from_vec(modes, re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()))
}

/// # Safety
/// `re` and `im` must each point to `u.len()` writable doubles.
unsafe fn write_state(u: &FourierState, re: *mut f64, im: *mut f64) {
    let (re, im) = (slice::from_raw_parts_mut(re, u.len()), slice::from_raw_parts_mut(im, u.len()));
    for (k, z) in u.as_slice().iter().enumerate() {
        re[k] = z.re;
        im[k] = z.im;
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated).
/// `*needed` receives the full length including the terminator.
///
/// # Safety
/// `buf` must point to `cap` writable bytes or be null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_last_error(buf: *mut c_char, cap: usize, needed: *mut usize) -> NlsnfStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let bytes = msg.as_bytes_with_nul();
    if !needed.is_null() {
        *needed = bytes.len();
    }
    if cap < bytes.len() {
        return NlsnfStatus::BufferTooSmall;
    }
    if buf.is_null() {
        return NlsnfStatus::NullPointer;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
    NlsnfStatus::Ok
}

/// Lower real branch of the Lambert W function, y in [-1/e, 0).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_lambert_w_m1(y: f64, out: *mut f64) -> NlsnfStatus {
    guard(|| {
        if out.is_null() {
            return fail(NlsnfStatus::NullPointer, "out is null");
        }
        match lambert_w_m1(y) {
            Ok(w) => {
                *out = w;
                NlsnfStatus::Ok
            }
            Err(e) => fail(NlsnfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Creates a propagator for modes |j| <= `modes`.
///
/// # Safety
/// `k` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_propagator_new(
    k: *const NlsnfKernel,
    modes: usize,
    out: *mut *mut NlsnfPropagator,
) -> NlsnfStatus {
    guard(|| {
        if k.is_null() || out.is_null() {
            return fail(NlsnfStatus::NullPointer, "argument is null");
        }
        let spec = match kernel(&*k) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match Propagator::new(&spec, modes) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(NlsnfPropagator { inner: p, modes }));
                NlsnfStatus::Ok
            }
            Err(e @ SimError::StepUnstable { .. }) => fail(NlsnfStatus::Numeric, e.to_string()),
            Err(e) => fail(NlsnfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `p` must come from `nlsnf_propagator_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_propagator_free(p: *mut NlsnfPropagator) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Advances the state in place by `steps` steps of size `dt`.
/// `strang` selects Strang splitting (nonzero) or Lie splitting (zero).
///
/// # Safety
/// `p` must be a live handle; `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_propagator_step(
    p: *mut NlsnfPropagator,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    dt: f64,
    steps: u64,
    strang: c_int,
) -> NlsnfStatus {
    guard(|| {
        if p.is_null() {
            return fail(NlsnfStatus::NullPointer, "propagator is null");
        }
        if !dt.is_finite() {
            return fail(NlsnfStatus::InvalidArgument, "dt must be finite");
        }
        let p = &mut *p;
        let mut u = match read_state(p.modes, re, im, len) {
            Ok(u) => u,
            Err(s) => return s,
        };
        let scheme = if strang != 0 { Scheme::Strang } else { Scheme::Lie };
        for _ in 0..steps {
            u = p.inner.step(&u, dt, scheme);
        }
        if !u.is_finite() {
            return fail(NlsnfStatus::Numeric, "state became non-finite");
        }
        write_state(&u, re, im);
        NlsnfStatus::Ok
    })
}

/// Energy of the truncated Hamiltonian at the given state.
///
/// # Safety
/// `p` must be a live handle; `re`, `im` hold `len` doubles; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_propagator_hamiltonian(
    p: *mut NlsnfPropagator,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut f64,
) -> NlsnfStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            return fail(NlsnfStatus::NullPointer, "argument is null");
        }
        let p = &mut *p;
        match read_state(p.modes, re, im, len) {
            Ok(u) => {
                *out = p.inner.hamiltonian(&u);
                NlsnfStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Resonant Birkhoff normal form of the truncated Hamiltonian up to degree 2d,
/// with the Gevrey weight of exponent `gevrey_g` and constant `gevrey_c_f`.
///
/// # Safety
/// `k` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_normal_form_new(
    k: *const NlsnfKernel,
    modes: usize,
    degree: usize,
    s: f64,
    s0: f64,
    r: f64,
    gevrey_g: f64,
    gevrey_c_f: f64,
    out: *mut *mut NlsnfNormalForm,
) -> NlsnfStatus {
    guard(|| {
        if k.is_null() || out.is_null() {
            return fail(NlsnfStatus::NullPointer, "argument is null");
        }
        let spec = match kernel(&*k) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let f = match WeightFunction::gevrey(gevrey_g, gevrey_c_f) {
            Ok(f) => f,
            Err(e) => return fail(NlsnfStatus::InvalidArgument, e.to_string()),
        };
        if degree < 2 {
            return fail(NlsnfStatus::InvalidArgument, "degree must be at least 2");
        }
        let h = match build_hamiltonian(&spec, modes) {
            Ok(h) => h,
            Err(e) => return fail(NlsnfStatus::InvalidArgument, e.to_string()),
        };
        let p = NormParams { s, s0, r };
        match resonant_normalize(&h, degree, &p, &f, spec.c_k(), &NfOptions::default()) {
            Ok(nf) => {
                let poly = nf.normal_form();
                let dump = CString::new(poly.dump()).unwrap_or_default();
                *out = Box::into_raw(Box::new(NlsnfNormalForm { poly, dump }));
                NlsnfStatus::Ok
            }
            Err(e) => nf_status(e),
        }
    })
}

/// # Safety
/// `nf` must come from `nlsnf_normal_form_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_normal_form_free(nf: *mut NlsnfNormalForm) {
    if !nf.is_null() {
        drop(Box::from_raw(nf));
    }
}

/// Number of monomials of H0 + Z.
///
/// # Safety
/// `nf` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_normal_form_terms(nf: *const NlsnfNormalForm, out: *mut usize) -> NlsnfStatus {
    guard(|| {
        if nf.is_null() || out.is_null() {
            return fail(NlsnfStatus::NullPointer, "argument is null");
        }
        *out = (*nf).poly.len();
        NlsnfStatus::Ok
    })
}

/// Evaluates H0 + Z at a state of 2M+1 modes; the value is real for real
/// Hamiltonians, the imaginary part is returned for diagnostics.
///
/// # Safety
/// `nf` must be a live handle; `re`, `im` hold `len` doubles; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_normal_form_eval(
    nf: *const NlsnfNormalForm,
    modes: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> NlsnfStatus {
    guard(|| {
        if nf.is_null() || out_re.is_null() || out_im.is_null() {
            return fail(NlsnfStatus::NullPointer, "argument is null");
        }
        match read_state(modes, re, im, len) {
            Ok(u) => {
                let v = (*nf).poly.eval(&u);
                *out_re = v.re;
                *out_im = v.im;
                NlsnfStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Text dump of H0 + Z, one monomial per line. With a too small buffer the
/// call returns `NLSNF_STATUS_BUFFER_TOO_SMALL` and sets `*needed`.
///
/// # Safety
/// `nf` must be a live handle; `buf` holds `cap` bytes or is null with cap 0.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_normal_form_dump(
    nf: *const NlsnfNormalForm,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> NlsnfStatus {
    guard(|| {
        if nf.is_null() {
            return fail(NlsnfStatus::NullPointer, "normal form is null");
        }
        let bytes = (*nf).dump.as_bytes_with_nul();
        if !needed.is_null() {
            *needed = bytes.len();
        }
        if cap < bytes.len() {
            return fail(NlsnfStatus::BufferTooSmall, format!("need {} bytes", bytes.len()));
        }
        if buf.is_null() {
            return fail(NlsnfStatus::NullPointer, "buffer is null");
        }
        ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        NlsnfStatus::Ok
    })
}

/// Monte Carlo fraction of the unit ball (s = 0.5, Gevrey weight g = 0.5, c_f = 0.9) where
/// some frequency of length 2d falls below 3 gamma.
///
/// # Safety
/// `k` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nlsnf_resonant_fraction(
    k: *const NlsnfKernel,
    modes: usize,
    d: usize,
    gamma: f64,
    samples: usize,
    seed: u64,
    out: *mut f64,
) -> NlsnfStatus {
    guard(|| {
        if k.is_null() || out.is_null() {
            return fail(NlsnfStatus::NullPointer, "argument is null");
        }
        let spec = match kernel(&*k) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let f = WeightFunction::gevrey(0.5, 0.9).expect("fixed weight");
        let b = BallSampler { m: modes, s: 0.5, f, r: 1.0, seed };
        let nr = NonResonanceParams { gamma, m: modes, d };
        match resonant_fraction(&spec, &nr, &b, samples, Threshold::Unit) {
            Ok(est) => {
                *out = est.fraction;
                NlsnfStatus::Ok
            }
            Err(e @ (MeasureError::Invalid(_) | MeasureError::TooFewSamples { .. })) => {
                fail(NlsnfStatus::InvalidArgument, e.to_string())
            }
            Err(e) => fail(NlsnfStatus::Numeric, e.to_string()),
        }
    })
}
