//! Certified and sampled bounds for |P|_{r,s} = sup_{N_s(u) <= r} N_s(X_P(u)) / r.

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;

use super::key::{conj_var, var_mode, var_sign, Key};
use super::{PolyError, Poly};
use crate::ball::{sample_ball_with, sample_sphere_with};
use crate::lattice::{weighted_norm_with, NormKind, NormParams, WeightFunction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    /// sum over layers of C_{P,d} r^{d-2}, C_{P,d} the largest coefficient modulus
    pub certified: f64,
    /// multinomial majorant of N_s(X_P) on the ball, rigorous for every weight
    pub majorant: f64,
    /// max of N_s(X_P(u)) / r over sampled u in the ball
    pub sampled: f64,
    pub layers: Vec<(u32, f64)>,
}

fn check_scale(p: &NormParams) -> Result<(), PolyError> {
    if !(p.s > p.s0) {
        return Err(PolyError::Scale { s: p.s, s0: p.s0 });
    }
    Ok(())
}

/// sum_d C_{P,d} r^{d-2}.
pub fn certified_norm(poly: &Poly, r: f64) -> f64 {
    poly.layers()
        .iter()
        .map(|(d, l)| l.max_abs_coeff() * r.powi(*d as i32 - 2))
        .sum()
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Bound by max_alpha b_alpha / multinomial(alpha) r^{d-2} per layer, where
/// sum_alpha b_alpha y^alpha majorizes N_s(X_P) in the weighted moduli y.
pub fn majorant_norm(poly: &Poly, s: f64, f: &WeightFunction, r: f64) -> f64 {
    let mut per_layer: FxHashMap<u32, FxHashMap<Key, f64>> = FxHashMap::default();
    for (k, c) in poly.sorted_terms() {
        let d = k.degree();
        for (w, aw) in k.vars() {
            if var_sign(w) != -1 {
                continue;
            }
            let rest = k.dec(w);
            // fold (j,-) onto (j,+): y depends on |u_j| only
            let mut folded = Key::ONE;
            let mut fsum = 0.0;
            for (v, e) in rest.vars() {
                let vp = if var_sign(v) == -1 { conj_var(v) } else { v };
                folded = folded.bump(vp, e).unwrap_or(folded);
                fsum += e as f64 * f.at_mode(var_mode(v));
            }
            let b = c.norm() * aw as f64 * (s * (f.at_mode(var_mode(w)) - fsum)).exp();
            *per_layer.entry(d).or_default().entry(folded).or_insert(0.0) += b;
        }
    }
    let mut total = 0.0;
    for (d, layer) in per_layer {
        let n = d - 1;
        let best = layer
            .iter()
            .map(|(alpha, b)| {
                let ln_multi = ln_factorial(n) - alpha.vars().map(|(_, e)| ln_factorial(e as u32)).sum::<f64>();
                b * (-ln_multi).exp()
            })
            .fold(0.0, f64::max);
        total += best * r.powi(d as i32 - 2);
    }
    total
}

/// max over samples of N_s(X_P(u)) / r, half inside the ball and half on its boundary.
pub fn sampled_norm<G: Rng + ?Sized>(
    poly: &Poly,
    s: f64,
    f: &WeightFunction,
    r: f64,
    m: usize,
    samples: usize,
    rng: &mut G,
) -> f64 {
    let w: Vec<f64> = (-(m as i64)..=m as i64).map(|j| (s * f.at_mode(j)).exp()).collect();
    let comp = poly.compile();
    let mut best: f64 = 0.0;
    for i in 0..samples {
        let u = if i % 2 == 0 { sample_sphere_with(m, &w, r, rng) } else { sample_ball_with(m, &w, r, rng) };
        let x = comp.vector_field(&u);
        best = best.max(weighted_norm_with(&x, s, f, NormKind::L1) / r);
    }
    best
}

/// Certified, majorant and sampled norms; the sampled value uses 1000 states.
pub fn norm_bound<G: Rng + ?Sized>(
    poly: &Poly,
    p: &NormParams,
    f: &WeightFunction,
    rng: &mut G,
) -> Result<NormReport, PolyError> {
    check_scale(p)?;
    let m = poly.iter().map(|(k, _)| k.max_mode()).max().unwrap_or(0) as usize;
    let layers: Vec<(u32, f64)> = poly.layers().iter().map(|(d, l)| (*d, l.max_abs_coeff())).collect();
    Ok(NormReport {
        certified: certified_norm(poly, p.r),
        majorant: majorant_norm(poly, p.s, f, p.r),
        sampled: sampled_norm(poly, p.s, f, p.r, m, 1000, rng),
        layers,
    })
}

/// sum_d C_{P,d} (2r)^{d-2} e^{-(s - s0) f(N)} for P vanishing to order >= 3 above N.
pub fn truncation_tail_bound(poly: &Poly, p: &NormParams, f: &WeightFunction, n: u32) -> Result<f64, PolyError> {
    check_scale(p)?;
    let order = poly.high_vanishing_order(n);
    if order < 3 {
        return Err(PolyError::Precondition(format!(
            "high-mode vanishing order {order} above N = {n} is below 3"
        )));
    }
    let decay = (-(p.s - p.s0) * f.at_mode(n as i64)).exp();
    Ok(certified_norm(poly, 2.0 * p.r) * decay)
}

/// delta = rho / (8 e (r + rho)).
pub fn lie_delta(r: f64, rho: f64) -> f64 {
    rho / (8.0 * std::f64::consts::E * (r + rho))
}
