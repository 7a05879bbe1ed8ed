//! Resonant Birkhoff normal form: at step k the degree 2k+2 layer is split by
//! the energy indicator, the nonresonant part is removed by a Lie transform,
//! and bracket terms beyond the degree cutoff 2d go to a remainder bucket.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{NormParams, WeightFunction};
use crate::ode::{integrate, OdeFailure, OdeOptions};
use crate::poly::{certified_norm, majorant_norm, PolyError, Poly};
use crate::state::FourierState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NfError {
    #[error("smallness violated at step {step}: {what} = {value:e} exceeds {bound:e}")]
    SmallnessViolated { step: usize, what: String, value: f64, bound: f64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("flow integration failed: {0}")]
    Flow(String),
}

/// Proof constants (used only in the bound ledger) and bookkeeping switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct NfOptions {
    pub c1: f64,
    pub c2: f64,
    /// Keep the explicit remainder polynomial. Without it, brackets landing
    /// entirely above the cutoff are never formed.
    pub keep_remainder: bool,
}

impl Default for NfOptions {
    fn default() -> Self {
        NfOptions { c1: 10.0, c2: 10.0, keep_remainder: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub radius: f64,
    pub degree: u32,
    /// certified norm of the layer being normalized, and its proof bound
    pub p_norm: f64,
    pub p_bound: f64,
    /// certified norm of the new resonant layer, and its proof bound
    pub z_norm: f64,
    pub z_bound: f64,
    pub s_norm: f64,
    pub s_majorant: f64,
    pub generator_terms: usize,
    pub resonant_terms: usize,
    pub total_terms: usize,
    pub remainder_terms: usize,
    pub max_abs_coeff: f64,
    /// largest nonresonant coefficient left by rounding in the normalized layer, then dropped
    pub cancel_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderLedger {
    /// None when the remainder was not tracked
    pub norm: Option<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct NormalFormResult {
    pub h0: Poly,
    /// resonant part of degree >= 4
    pub z: Poly,
    /// bracket terms of degree above the cutoff
    pub remainder: Poly,
    pub generators: Vec<Poly>,
    pub step_log: Vec<StepLog>,
    pub remainder_ledger: RemainderLedger,
    pub cut: u32,
}

/// Splits P into S = sum P_J / (i E(J)) u_J over nonresonant J and the resonant part.
/// With this S, {H0, S} = P_nonres.
pub fn homological_split(p: &Poly) -> (Poly, Poly) {
    let mut s = Poly::new();
    let mut dz = Poly::new();
    for (k, c) in p.sorted_terms() {
        let e = k.energy();
        if e == 0 {
            dz.add_term(k, c);
        } else {
            s.add_term(k, c / Complex64::new(0.0, e as f64));
        }
    }
    (s, dz)
}

/// H + {S,H} + {S,{S,H}}/2! + ... truncated at `degree_cut`; the first bracket
/// term landing above the cutoff goes to the remainder.
pub fn lie_transform(h: &Poly, s: &Poly, degree_cut: u32) -> Result<(Poly, Poly), PolyError> {
    lie_transform_with(h, s, degree_cut, true)
}

/// As `lie_transform`; with `keep_remainder = false` the remainder comes back
/// empty and brackets that cannot land within the cutoff are skipped.
pub fn lie_transform_with(h: &Poly, s: &Poly, degree_cut: u32, keep_remainder: bool) -> Result<(Poly, Poly), PolyError> {
    let mut acc = h.filter(|k| k.degree() <= degree_cut);
    let mut rem = h.filter(|k| k.degree() > degree_cut);
    if s.is_empty() {
        return Ok((acc, rem));
    }
    if !keep_remainder {
        rem = Poly::new();
    }
    let s_min = s.degree_range().map(|r| r.0).unwrap_or(2);
    let mut term = acc.clone();
    let mut n = 1.0;
    while !term.is_empty() {
        if !keep_remainder {
            term = term.filter(|k| k.degree() + s_min - 2 <= degree_cut);
        }
        let split = s.bracket_cut(&term, degree_cut)?;
        let inv = Complex64::new(1.0 / n, 0.0);
        rem.add_scaled(&split.overflow, &inv);
        term = split.kept.scaled(&inv);
        acc.add_assign(&term);
        n += 1.0;
    }
    Ok((acc, rem))
}

fn step_radius(r: f64, d: usize, k: usize) -> f64 {
    r - (k as f64 - 1.0) * r / (2.0 * d as f64 - 2.0)
}

/// Runs steps k = 1..d-1 on H = H0 + P with degree cutoff 2d.
pub fn resonant_normalize(
    h: &Poly,
    d: usize,
    p: &NormParams,
    f: &WeightFunction,
    c_k: f64,
    consts: &NfOptions,
) -> Result<NormalFormResult, NfError> {
    if !(p.s > p.s0) {
        return Err(PolyError::Scale { s: p.s, s0: p.s0 }.into());
    }
    let r = p.r;
    let dd = d as f64;
    let gate = 3.0 * c_k * r * r * dd.powi(3);
    if gate >= 1.0 {
        return Err(NfError::SmallnessViolated { step: 0, what: "3 C_K r^2 d^3".into(), value: gate, bound: 1.0 });
    }
    let cut = 2 * d as u32;
    let h0 = h.layer(2);
    let mut cur = h.clone();
    let mut remainder = Poly::new();
    let mut generators = Vec::new();
    let mut log = Vec::new();
    for k in 1..d {
        let deg = 2 * k as u32 + 2;
        let rk = step_radius(r, d, k);
        let layer = cur.layer(deg);
        let (s, dz) = homological_split(&layer);
        let p_norm = certified_norm(&layer, rk);
        let p_bound = c_k * consts.c1.powi(k as i32) * r.powi(2 * k as i32) * dd.powi(3 * k as i32 - 3);
        let z_norm = certified_norm(&dz, rk);
        let z_bound = 2.0 * c_k * consts.c1 * r * r;
        let (next, rem) = lie_transform_with(&cur, &s, cut, consts.keep_remainder)?;
        remainder.add_assign(&rem);
        let cancel_residual = next
            .layer(deg)
            .filter(|k| k.energy() != 0)
            .max_abs_coeff();
        cur = next.filter(|k| k.degree() != deg || k.energy() == 0);
        let entry = StepLog {
            step: k,
            radius: rk,
            degree: deg,
            p_norm,
            p_bound,
            z_norm,
            z_bound,
            s_norm: certified_norm(&s, rk),
            s_majorant: majorant_norm(&s, p.s, f, rk),
            generator_terms: s.len(),
            resonant_terms: dz.len(),
            total_terms: cur.len(),
            remainder_terms: remainder.len(),
            max_abs_coeff: cur.max_abs_coeff(),
            cancel_residual,
        };
        generators.push(s);
        log.push(entry);
        if p_norm > p_bound {
            return Err(NfError::SmallnessViolated { step: k, what: "|P_k|".into(), value: p_norm, bound: p_bound });
        }
        if z_norm > z_bound {
            return Err(NfError::SmallnessViolated { step: k, what: "|Z_k|".into(), value: z_norm, bound: z_bound });
        }
    }
    let rem_norm = consts.keep_remainder.then(|| certified_norm(&remainder, r));
    let rem_bound =
        6.0 * c_k.powi(d as i32) * consts.c1.powi(2 * d as i32) * r.powi(2 * d as i32 - 2) * dd.powi(7 * d as i32 + 1);
    if let Some(v) = rem_norm {
        if v > rem_bound {
            return Err(NfError::SmallnessViolated { step: d, what: "|R_d|".into(), value: v, bound: rem_bound });
        }
    }
    let z = cur.filter(|k| k.degree() > 2);
    Ok(NormalFormResult {
        h0,
        z,
        remainder,
        generators,
        step_log: log,
        remainder_ledger: RemainderLedger { norm: rem_norm, bound: rem_bound },
        cut,
    })
}

/// Time-t flow of the Hamiltonian field of a real polynomial on physical states.
pub fn poly_flow(s: &Poly, u: &FourierState, t: f64, opts: &OdeOptions) -> Result<FourierState, NfError> {
    let comp = s.compile();
    let m = u.modes();
    let field = |_t: f64, y: &[Complex64]| -> Result<Vec<Complex64>, ()> {
        let st = FourierState::from_vec(m, y.to_vec());
        Ok(comp.vector_field(&st).into_vec())
    };
    integrate(field, u.as_slice(), 0.0, t, opts)
        .map(|y| FourierState::from_vec(m, y))
        .map_err(|e: OdeFailure<()>| NfError::Flow(format!("{e:?}")))
}

impl NormalFormResult {
    /// Transformed Hamiltonian within the cutoff.
    pub fn normal_form(&self) -> Poly {
        self.h0.plus(&self.z)
    }

    /// Psi^{-1} = Psi_1^{-1} o ... o Psi_{d-1}^{-1}; then H(psi_inverse(u)) matches the normal form.
    pub fn psi_inverse(&self, u: &FourierState, opts: &OdeOptions) -> Result<FourierState, NfError> {
        let mut v = u.clone();
        for s in self.generators.iter().rev() {
            v = poly_flow(s, &v, -1.0, opts)?;
        }
        Ok(v)
    }

    pub fn psi(&self, u: &FourierState, opts: &OdeOptions) -> Result<FourierState, NfError> {
        let mut v = u.clone();
        for s in &self.generators {
            v = poly_flow(s, &v, 1.0, opts)?;
        }
        Ok(v)
    }

    pub fn step_log_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "steps": self.step_log,
            "remainder": self.remainder_ledger,
            "cut": self.cut,
        }))
        .unwrap_or_default()
    }
}
