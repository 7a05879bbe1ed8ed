use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use nlsnf_ffi::*;

const POWER2: NlsnfKernel = NlsnfKernel { kind: 0, p: 2, beta: 0.0 };

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    let mut needed = 0;
    unsafe {
        assert_eq!(nlsnf_last_error(buf.as_mut_ptr(), buf.len(), &mut needed), NlsnfStatus::Ok);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn lambert_and_domain_errors() {
    let mut w = 0.0;
    unsafe {
        assert_eq!(nlsnf_lambert_w_m1(-0.1, &mut w), NlsnfStatus::Ok);
        assert!((w * w.exp() + 0.1).abs() < 1e-15);
        assert_eq!(nlsnf_lambert_w_m1(0.5, &mut w), NlsnfStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(nlsnf_lambert_w_m1(-0.1, ptr::null_mut()), NlsnfStatus::NullPointer);
    }
}

#[test]
fn propagator_conserves_mass_and_rejects_bad_input() {
    let m = 4;
    let mut re: Vec<f64> = (0..2 * m + 1).map(|k| 0.05 * (k as f64 + 1.0).sin()).collect();
    let mut im: Vec<f64> = (0..2 * m + 1).map(|k| 0.05 * (k as f64 * 0.7).cos()).collect();
    let mass = |re: &[f64], im: &[f64]| re.iter().zip(im).map(|(a, b)| a * a + b * b).sum::<f64>();
    let m0 = mass(&re, &im);
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(nlsnf_propagator_new(&POWER2, m, &mut p), NlsnfStatus::Ok);
        let mut h0 = 0.0;
        assert_eq!(nlsnf_propagator_hamiltonian(p, re.as_ptr(), im.as_ptr(), re.len(), &mut h0), NlsnfStatus::Ok);
        assert_eq!(nlsnf_propagator_step(p, re.as_mut_ptr(), im.as_mut_ptr(), re.len(), 0.01, 500, 1), NlsnfStatus::Ok);
        let mut h1 = 0.0;
        assert_eq!(nlsnf_propagator_hamiltonian(p, re.as_ptr(), im.as_ptr(), re.len(), &mut h1), NlsnfStatus::Ok);
        assert!((mass(&re, &im) - m0).abs() < 1e-14);
        // splitting error is O(dt^2)
        assert!((h1 - h0).abs() < 1e-4 * h0.abs(), "{h0} {h1}");
        let st = nlsnf_propagator_step(p, re.as_mut_ptr(), im.as_mut_ptr(), 3, 0.01, 1, 1);
        assert_eq!(st, NlsnfStatus::InvalidArgument);
        assert!(last_error().contains("2M+1"));
        nlsnf_propagator_free(p);
        let bad = NlsnfKernel { kind: 7, p: 1, beta: 0.0 };
        assert_eq!(nlsnf_propagator_new(&bad, m, &mut p), NlsnfStatus::InvalidArgument);
    }
}

#[test]
fn normal_form_handle_round_trip() {
    let mut nf = ptr::null_mut();
    unsafe {
        let st = nlsnf_normal_form_new(&POWER2, 3, 4, 0.2, 0.1, 0.05, 0.5, 0.9, &mut nf);
        assert_eq!(st, NlsnfStatus::Ok, "{}", last_error());
        let mut n = 0;
        assert_eq!(nlsnf_normal_form_terms(nf, &mut n), NlsnfStatus::Ok);
        assert!(n > 0);
        let mut needed = 0;
        assert_eq!(nlsnf_normal_form_dump(nf, ptr::null_mut(), 0, &mut needed), NlsnfStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(nlsnf_normal_form_dump(nf, buf.as_mut_ptr(), needed, &mut needed), NlsnfStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len() + 1, needed);
        let re = [0.01; 7];
        let im = [0.0; 7];
        let (mut vr, mut vi) = (0.0, 0.0);
        assert_eq!(nlsnf_normal_form_eval(nf, 3, re.as_ptr(), im.as_ptr(), 7, &mut vr, &mut vi), NlsnfStatus::Ok);
        assert!(vr > 0.0 && vi.abs() < 1e-15);
        nlsnf_normal_form_free(nf);
        let st = nlsnf_normal_form_new(&POWER2, 3, 4, 0.2, 0.1, 0.5, 0.5, 0.9, &mut nf);
        assert_eq!(st, NlsnfStatus::Smallness);
    }
}

#[test]
fn resonant_fraction_is_deterministic() {
    let (mut a, mut b) = (0.0, 0.0);
    let k = NlsnfKernel { kind: 1, p: 0, beta: 1.0 };
    unsafe {
        assert_eq!(nlsnf_resonant_fraction(&k, 3, 2, 1e-5, 500, 4, &mut a), NlsnfStatus::Ok);
        assert_eq!(nlsnf_resonant_fraction(&k, 3, 2, 1e-5, 500, 4, &mut b), NlsnfStatus::Ok);
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
        assert_eq!(nlsnf_resonant_fraction(&k, 3, 2, 1e-5, 5, 4, &mut a), NlsnfStatus::InvalidArgument);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nlsnf.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["nlsnf_propagator_new", "nlsnf_normal_form_dump", "NLSNF_STATUS_SMALLNESS", "typedef struct NlsnfPropagator"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"]).arg(&header).output()
    else {
        eprintln!("no C compiler available; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
