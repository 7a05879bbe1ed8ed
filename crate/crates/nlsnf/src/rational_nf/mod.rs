//! Rational (integrable) normal form of the mode-truncated Hamiltonian.
//!
//! H^M = H0 + K2 + Z splits into the action quartic K2 and the rest. Each step
//! removes the non-action part of one order with S = Z / (i omega), where
//! omega_J = c_J . (A I) is the K2-frequency of the numerator, so that
//! {K2, S} = Z exactly. Brackets are computed in closed form on rational terms.

mod algebra;
mod compiled;
pub mod lemmas;

pub use algebra::{key_charge, order_of, Algebra, Denoms, FreqModel, RationalHamiltonian, MAX_DEN};
pub use compiled::{bracket_field_exact, CompiledRational};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::kernel::{smallest_combination, KernelError, KernelSpec, NonResonanceParams, DEFAULT_ENUM_BUDGET};
use crate::lattice::{weighted_norm, weighted_norm_with, NormKind, NormParams, WeightFunction};
use crate::ode::{integrate, OdeFailure, OdeOptions};
use crate::poly::Poly;
use crate::state::FourierState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RationalError {
    #[error("mode {0} outside the truncation")]
    ModeOutOfRange(i64),
    #[error("not an action quartic: {0}")]
    NotActionQuartic(String),
    #[error("frequency vanishes identically")]
    ZeroFrequency,
    #[error("exponent overflow in rational bracket")]
    ExponentOverflow,
    #[error("more than {MAX_DEN} denominators in one term")]
    TooManyDenominators,
    #[error("denominator length {len} exceeds budget {budget}")]
    HBudgetExceeded { len: u32, budget: u32 },
    #[error("smallness violated at step {step}: {what} = {value:e} exceeds {bound:e}")]
    SmallnessViolated { step: usize, what: String, value: f64, bound: f64 },
    #[error("non-resonant domain violated: |omega| = {value:e} <= {bound:e}")]
    NonResonantDomainViolation { value: f64, bound: f64 },
    #[error("trajectory left the non-resonant domain at t = {t}")]
    DomainExit { t: f64 },
    #[error("flow integration failed: {0}")]
    Flow(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RationalOptions {
    /// largest admissible denominator length; 0 means 4d
    pub h_budget: u32,
}

impl Default for RationalOptions {
    fn default() -> Self {
        RationalOptions { h_budget: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalStepLog {
    pub step: usize,
    pub radius: f64,
    pub gamma: f64,
    pub rho: f64,
    pub gamma_prime: f64,
    /// order normalized at this step
    pub order: i32,
    pub s_norm: f64,
    pub s_bound: f64,
    pub generator_terms: usize,
    pub action_terms: usize,
    pub total_terms: usize,
    pub dropped_pairs: usize,
    pub denominators: usize,
    pub max_denominator_len: u32,
    pub max_denominators_per_term: usize,
}

#[derive(Debug, Clone)]
pub struct RationalResult {
    pub alg: Algebra,
    pub h0: Poly,
    pub k2: Poly,
    /// action-type normal form of orders 2..=d, K2 included
    pub k: RationalHamiltonian,
    pub generators: Vec<RationalHamiltonian>,
    pub step_log: Vec<RationalStepLog>,
    pub d: usize,
    pub h_budget: u32,
}

/// Splits into S = sum Z_J u_J D / (i omega_J) and the action part; {K2, S} = Z - action part.
pub fn rational_homological_split(
    alg: &mut Algebra,
    z: &RationalHamiltonian,
    h_budget: u32,
) -> Result<(RationalHamiltonian, RationalHamiltonian), RationalError> {
    let mut s = RationalHamiltonian::new();
    let mut dk = RationalHamiltonian::new();
    let m = alg.modes();
    for (k, d, c) in z.sorted_terms() {
        let ch = key_charge(&k, m)?;
        if ch.iter().all(|&x| x == 0) {
            dk.add_term(k, d, c);
            continue;
        }
        let len: u32 = ch.iter().map(|x| x.unsigned_abs()).sum();
        if len > h_budget {
            return Err(RationalError::HBudgetExceeded { len, budget: h_budget });
        }
        let (id, sign) = alg.intern(&ch)?;
        let nd = d.with(id).ok_or(RationalError::TooManyDenominators)?;
        s.add_term(k, nd, c / Complex64::new(0.0, sign));
    }
    Ok((s, dk))
}

/// Polynomial convenience form with the kernel frequency matrix.
pub fn rational_homological_split_poly(
    z: &Poly,
    spec: &KernelSpec,
    m: usize,
) -> Result<(Algebra, RationalHamiltonian, Poly), RationalError> {
    let mut alg = Algebra::new(FreqModel::from_kernel(spec, m));
    let (s, dk) = rational_homological_split(&mut alg, &RationalHamiltonian::from_poly(z), u32::MAX)?;
    Ok((alg, s, dk.polynomial_part()))
}

/// sum |c| gamma^{-m} r^{2q-2} (n + |A|_max sum_a #h_a / gamma), a bound on
/// sup N(X_Q)/r over the non-resonant ball of radius r.
pub fn certified_rational_norm(q: &RationalHamiltonian, alg: &Algebra, r: f64, gamma: f64) -> f64 {
    let amax = alg.model.max_abs();
    q.sorted_terms()
        .iter()
        .map(|(k, d, c)| {
            let n = k.degree() as f64;
            let hsum: f64 = d.ids().iter().map(|&id| alg.weight(id) as f64).sum();
            let qo = order_of(k, d);
            c.norm() * gamma.powi(-(d.len() as i32)) * r.powi(2 * qo - 2) * (n + amax * hsum / gamma)
        })
        .sum()
}

/// gamma' = (1/(1+rho))^2 gamma - 2 h C_K rho / (1 - rho).
pub fn gamma_prime(gamma: f64, rho: f64, h: u32, c_k: f64) -> f64 {
    gamma / ((1.0 + rho) * (1.0 + rho)) - 2.0 * h as f64 * c_k * rho / (1.0 - rho)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Adds sum_{n>=1} weight(n) ad_S^n x to `acc`; returns the skipped-term count.
fn lie_chain(
    alg: &Algebra,
    s: &RationalHamiltonian,
    x: &RationalHamiltonian,
    max_order: i32,
    weight: impl Fn(u32) -> f64,
    acc: &mut RationalHamiltonian,
) -> Result<usize, RationalError> {
    let (mut term, mut dropped) = s.bracket(alg, x, max_order)?;
    let mut n = 1;
    while !term.is_empty() {
        acc.add_scaled(&term, Complex64::new(weight(n), 0.0));
        let (next, dr) = s.bracket(alg, &term, max_order)?;
        dropped += dr;
        term = next;
        n += 1;
    }
    Ok(dropped)
}

/// Runs steps k = 2..d-1 on H^M = H0 + K2 + Z, normalizing order k+1 at step k
/// and truncating at order d.
pub fn integrable_normalize(
    hm: &Poly,
    d: usize,
    p: &NormParams,
    nr: &NonResonanceParams,
    _f: &WeightFunction,
    opts: &RationalOptions,
) -> Result<RationalResult, RationalError> {
    let dd = d as f64;
    let r = p.r;
    let gate = r * r * dd.powi(3) / nr.gamma;
    if gate >= 1.0 {
        return Err(RationalError::SmallnessViolated { step: 0, what: "r^2 d^3 / gamma".into(), value: gate, bound: 1.0 });
    }
    let h_budget = if opts.h_budget == 0 { 4 * d as u32 } else { opts.h_budget };
    let m = nr.m;
    let h0 = hm.layer(2);
    let quartic = hm.layer(4);
    let k2 = quartic.filter(|k| k.is_action_type());
    if k2.len() != quartic.len() {
        return Err(RationalError::NotActionQuartic("quartic layer has non-action terms".into()));
    }
    let model = FreqModel::from_action_quartic(&k2, m)?;
    let c_k = model.max_abs() / 2.0;
    let mut alg = Algebra::new(model);
    let max_order = d as i32;
    // everything except H0 and K2, cut at order d
    let mut rest = RationalHamiltonian::from_poly(&hm.filter(|k| k.degree() > 4 && k.degree() <= 2 * d as u32));
    let mut generators = Vec::new();
    let mut log = Vec::new();
    for k in 2..d {
        let order = k as i32 + 1;
        let mut z_na = rest.take(|key, den| order_of(key, den) == order);
        let action = z_na.take(|key, _| key.is_action_type());
        rest.add_scaled(&action, Complex64::new(1.0, 0.0));
        let (s, _) = rational_homological_split(&mut alg, &z_na, h_budget)?;
        let rk = 2.0 * r - (k as f64 - 2.0) * r / (dd - 2.0);
        let gk = nr.gamma + (k as f64 - 2.0) * nr.gamma / (dd - 2.0);
        let rho = 1.0 / (2.0 * dd - k as f64 - 3.0);
        let s_norm = certified_rational_norm(&s, &alg, rk, gk);
        let s_bound = 1.0 / (2.0 * dd);
        // e^{ad_S}(rest + Z_na) with {S, K2} = -Z_na substituted:
        // rest + sum_n ad_S^n rest / n! + sum_n n/(n+1)! ad_S^n Z_na
        let mut acc = RationalHamiltonian::new();
        let mut dropped = lie_chain(&alg, &s, &rest, max_order, |n| 1.0 / factorial(n), &mut acc)?;
        dropped += lie_chain(&alg, &s, &z_na, max_order, |n| n as f64 / factorial(n + 1), &mut acc)?;
        drop(z_na);
        rest.add_scaled(&acc, Complex64::new(1.0, 0.0));
        drop(acc);
        let max_len = (0..alg.num_denominators() as u32).map(|id| alg.weight(id)).max().unwrap_or(0);
        log.push(RationalStepLog {
            step: k,
            radius: rk,
            gamma: gk,
            rho,
            gamma_prime: gamma_prime(gk, rho, max_len, c_k),
            order,
            s_norm,
            s_bound,
            generator_terms: s.len(),
            action_terms: rest.iter().filter(|(key, _, _)| key.is_action_type()).count(),
            total_terms: rest.len(),
            dropped_pairs: dropped,
            denominators: alg.num_denominators(),
            max_denominator_len: max_len,
            max_denominators_per_term: rest.max_denominators(),
        });
        generators.push(s);
        if s_norm > s_bound {
            return Err(RationalError::SmallnessViolated { step: k, what: "|S_k|".into(), value: s_norm, bound: s_bound });
        }
    }
    let leftover = rest.iter().filter(|(key, _, _)| !key.is_action_type()).count();
    if leftover > 0 {
        return Err(RationalError::SmallnessViolated {
            step: d,
            what: "non-action terms left at order <= d".into(),
            value: leftover as f64,
            bound: 0.0,
        });
    }
    let mut kfin = rest;
    kfin.add_scaled(&RationalHamiltonian::from_poly(&k2), Complex64::new(1.0, 0.0));
    Ok(RationalResult { alg, h0, k2, k: kfin, generators, step_log: log, d, h_budget })
}

/// min over combinations of length <= 2d and over the stored denominators of
/// |omega_h(u)|, minus gamma N_s(u)^2.
pub fn domain_margin(
    alg: &Algebra,
    u: &FourierState,
    nr: &NonResonanceParams,
    p: &NormParams,
    f: &WeightFunction,
) -> Result<f64, RationalError> {
    let sf = alg.model.site_freqs(u);
    let best = smallest_combination(&sf, &alg.model.columns(), 2 * nr.d, DEFAULT_ENUM_BUDGET)?;
    let table = alg.omegas(u).iter().fold(f64::INFINITY, |m, w| m.min(w.abs()));
    let n = weighted_norm(u, p, f);
    Ok(best.value.min(table) - nr.gamma * n * n)
}

impl RationalHamiltonian {
    /// Vector field with the non-resonance check on the denominators used.
    pub fn checked_vector_field(
        &self,
        alg: &Algebra,
        u: &FourierState,
        gamma: f64,
        s: f64,
        f: &WeightFunction,
    ) -> Result<FourierState, RationalError> {
        let n = weighted_norm_with(u, s, f, NormKind::L1);
        let bound = gamma * n * n;
        let low = self.min_denominator(alg, u);
        if low <= bound {
            return Err(RationalError::NonResonantDomainViolation { value: low, bound });
        }
        Ok(self.vector_field(alg, u))
    }
}

#[derive(Debug, Clone)]
pub struct FlowReport {
    pub state: FourierState,
    /// N_s(Psi(u) - u) / N_s(u)
    pub displacement: f64,
    /// smallest |omega| - gamma' N_s^2 seen by the field
    pub min_margin: f64,
}

/// Time-t flow of X_S; every field evaluation checks |omega_h| > gamma' N_s^2.
pub fn flow_map(
    alg: &Algebra,
    s_ham: &RationalHamiltonian,
    u: &FourierState,
    t: f64,
    gamma_prime: f64,
    s: f64,
    f: &WeightFunction,
    opts: &OdeOptions,
) -> Result<FlowReport, RationalError> {
    let m = u.modes();
    let mut min_margin = f64::INFINITY;
    let comp = s_ham.compile(alg);
    let field = |tt: f64, y: &[Complex64]| -> Result<Vec<Complex64>, f64> {
        let st = FourierState::from_vec(m, y.to_vec());
        let n = weighted_norm_with(&st, s, f, NormKind::L1);
        let low = comp.min_denominator(alg, &st);
        let margin = low - gamma_prime * n * n;
        min_margin = min_margin.min(margin);
        if margin <= 0.0 {
            return Err(tt);
        }
        Ok(comp.vector_field(alg, &st).into_vec())
    };
    let y = integrate(field, u.as_slice(), 0.0, t, opts).map_err(|e| match e {
        OdeFailure::Field(tt) => RationalError::DomainExit { t: tt },
        other => RationalError::Flow(format!("{other:?}")),
    })?;
    let out = FourierState::from_vec(m, y);
    let nu = weighted_norm_with(u, s, f, NormKind::L1);
    let displacement = weighted_norm_with(&out.sub(u), s, f, NormKind::L1) / nu;
    Ok(FlowReport { state: out, displacement, min_margin })
}

impl RationalResult {
    pub fn max_order(&self) -> i32 {
        self.d as i32
    }

    /// H0 + K at u.
    pub fn normal_form_value(&self, u: &FourierState) -> f64 {
        self.h0.eval(u).re + self.k.eval(&self.alg, u).re
    }

    /// Psi^{-1} = Psi_2^{-1} o ... o Psi_{d-1}^{-1}, so H^M(psi_inverse(u)) = H0 + K + O(order d+1).
    pub fn psi_inverse(&self, u: &FourierState, gamma_prime: f64, s: f64, f: &WeightFunction, opts: &OdeOptions) -> Result<FourierState, RationalError> {
        let mut v = u.clone();
        for g in self.generators.iter().rev() {
            v = flow_map(&self.alg, g, &v, -1.0, gamma_prime, s, f, opts)?.state;
        }
        Ok(v)
    }

    pub fn psi(&self, u: &FourierState, gamma_prime: f64, s: f64, f: &WeightFunction, opts: &OdeOptions) -> Result<FourierState, RationalError> {
        let mut v = u.clone();
        for g in &self.generators {
            v = flow_map(&self.alg, g, &v, 1.0, gamma_prime, s, f, opts)?.state;
        }
        Ok(v)
    }

    /// Non-action part removed by generator `i`, so that {K2, S} equals it;
    /// rebuilt by multiplying back the numerator frequency.
    pub fn removed(&self, i: usize) -> RationalHamiltonian {
        let m = self.alg.modes();
        let mut out = RationalHamiltonian::new();
        for (k, d, c) in self.generators[i].iter() {
            let (id, sign) = key_charge(k, m)
                .ok()
                .and_then(|ch| self.alg.lookup(&ch))
                .expect("generator numerator has a stored frequency");
            out.add_term(*k, d.without(id).expect("numerator frequency among denominators"), c * Complex64::new(0.0, sign));
        }
        out
    }

    pub fn step_log_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "steps": self.step_log,
            "d": self.d,
            "h_budget": self.h_budget,
            "denominators": self.alg.num_denominators(),
        }))
        .unwrap_or_default()
    }
}

/// Directional derivative DX(u)[w] by the 4-point central difference.
pub fn directional_derivative(x: &dyn Fn(&FourierState) -> FourierState, u: &FourierState, w: &FourierState) -> FourierState {
    let scale = u.max_abs().max(f64::MIN_POSITIVE) / w.max_abs().max(f64::MIN_POSITIVE);
    let h = 1e-3 * scale;
    let at = |e: f64| x(&u.add(&w.scale(Complex64::new(e, 0.0))));
    let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
    let mut out = p1.sub(&m1).scale(Complex64::new(8.0, 0.0));
    out = out.sub(&p2.sub(&m2));
    out.scale(Complex64::new(1.0 / (12.0 * h), 0.0))
}

/// X_{{F,G}}(u) = DX_F(u)[X_G(u)] - DX_G(u)[X_F(u)].
pub fn bracket_field(
    xf: &dyn Fn(&FourierState) -> FourierState,
    xg: &dyn Fn(&FourierState) -> FourierState,
    u: &FourierState,
) -> FourierState {
    let a = directional_derivative(xf, u, &xg(u));
    let b = directional_derivative(xg, u, &xf(u));
    a.sub(&b)
}

/// Field of the action |u_j|^2.
pub fn action_field(j: i64, u: &FourierState) -> FourierState {
    let mut out = FourierState::zeros(u.modes());
    out.set(j, Complex64::new(0.0, -1.0) * u.get(j));
    out
}

/// Monomial count of each order.
pub fn order_histogram(h: &RationalHamiltonian) -> Vec<(i32, usize)> {
    let mut v: std::collections::BTreeMap<i32, usize> = Default::default();
    for (k, d, _) in h.sorted_terms() {
        *v.entry(order_of(&k, &d)).or_default() += 1;
    }
    v.into_iter().collect()
}

#[cfg(test)]
mod tests;
