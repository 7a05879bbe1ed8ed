//! Monte Carlo estimates of the near-resonant set inside the weighted l1 ball,
//! the frequency-gradient lemmas behind them, and exact volume identities.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::ball::BallSampler;
use crate::kernel::{frequency_action_gradient, smallest_frequency, KernelError, KernelSpec, NonResonanceParams};
use crate::lattice::{weighted_norm_with, Index, MultiIndex, NormKind};
use crate::state::FourierState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("at least {min} samples are required, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("enumeration exceeded its budget of {budget} charge vectors")]
    EnumerationOverflow { budget: u64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub const MIN_SAMPLES: usize = 100;

/// Which resonance test defines the excluded set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    /// |omega_J(u)| <= 3 gamma (the measure-section form, meant for the unit ball)
    #[default]
    Unit,
    /// |omega_J(u)| <= 3 gamma N_s(u)^2 (the non-resonant-domain form)
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionEstimate {
    pub gamma: f64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// binomial standard error sqrt(p (1 - p) / n)
    pub sigma: f64,
    pub resonant: usize,
    pub n_samples: usize,
    pub seed: u64,
}

/// Wilson score interval for k successes out of n at normal quantile z.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let mid = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    let lo = if k == 0 { 0.0 } else { (mid - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (mid + half).min(1.0) };
    (lo, hi)
}

const Z95: f64 = 1.959963984540054;

/// Per-sample smallest divisor and norm, so that sweeps over gamma reuse one
/// sample set (and are monotone by construction).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivisorSample {
    pub smallest: f64,
    pub norm: f64,
}

pub fn sample_divisors(
    spec: &KernelSpec,
    nr: &NonResonanceParams,
    b: &BallSampler,
    n_samples: usize,
) -> Result<Vec<DivisorSample>, MeasureError> {
    if n_samples < MIN_SAMPLES {
        return Err(MeasureError::TooFewSamples { min: MIN_SAMPLES, got: n_samples });
    }
    spec.validate()?;
    if nr.m != b.m {
        return Err(MeasureError::Invalid(format!("cutoff mismatch: sampler M = {}, margin M = {}", b.m, nr.m)));
    }
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = b.stream(i as u64);
            let u = b.sample(&mut rng);
            let best = smallest_frequency(spec, &u, nr.m, 2 * nr.d, crate::kernel::DEFAULT_ENUM_BUDGET)?;
            Ok(DivisorSample { smallest: best.value, norm: weighted_norm_with(&u, b.s, &b.f, NormKind::L1) })
        })
        .collect()
}

fn is_resonant(x: &DivisorSample, gamma: f64, threshold: Threshold) -> bool {
    let bound = match threshold {
        Threshold::Unit => 3.0 * gamma,
        Threshold::Scaled => 3.0 * gamma * x.norm * x.norm,
    };
    x.smallest <= bound
}

pub fn fraction_of(samples: &[DivisorSample], gamma: f64, threshold: Threshold, seed: u64) -> FractionEstimate {
    let n = samples.len();
    let k = samples.iter().filter(|x| is_resonant(x, gamma, threshold)).count();
    let p = if n > 0 { k as f64 / n as f64 } else { 0.0 };
    let (lo, hi) = wilson_interval(k, n, Z95);
    FractionEstimate {
        gamma,
        fraction: p,
        ci_low: lo,
        ci_high: hi,
        sigma: if n > 0 { (p * (1.0 - p) / n as f64).sqrt() } else { 0.0 },
        resonant: k,
        n_samples: n,
        seed,
    }
}

/// Fraction of the ball where some non-action J of length <= 2d has a small
/// frequency, with a 95% Wilson interval.
pub fn resonant_fraction(
    spec: &KernelSpec,
    nr: &NonResonanceParams,
    b: &BallSampler,
    n_samples: usize,
    threshold: Threshold,
) -> Result<FractionEstimate, MeasureError> {
    let samples = sample_divisors(spec, nr, b, n_samples)?;
    Ok(fraction_of(&samples, nr.gamma, threshold, b.seed))
}

pub fn fraction_sweep(
    spec: &KernelSpec,
    nr: &NonResonanceParams,
    b: &BallSampler,
    n_samples: usize,
    gammas: &[f64],
    threshold: Threshold,
) -> Result<Vec<FractionEstimate>, MeasureError> {
    let samples = sample_divisors(spec, nr, b, n_samples)?;
    Ok(gammas.iter().map(|&g| fraction_of(&samples, g, threshold, b.seed)).collect())
}

pub fn write_fraction_csv<W: Write>(rows: &[FractionEstimate], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["gamma", "fraction", "ci_low", "ci_high", "n_samples", "seed"])?;
    for r in rows {
        wr.write_record(&[
            format!("{:e}", r.gamma),
            format!("{}", r.fraction),
            format!("{}", r.ci_low),
            format!("{}", r.ci_high),
            r.n_samples.to_string(),
            r.seed.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankTest {
    /// number of pairs with x < y, ties counted one half
    pub u: f64,
    pub z: f64,
    /// one-sided p-value for "x is stochastically smaller than y"
    pub p_value: f64,
}

/// One-sided Mann-Whitney test, normal approximation with tie and
/// continuity corrections.
pub fn mann_whitney_less(x: &[f64], y: &[f64]) -> RankTest {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return RankTest { u: 0.0, z: 0.0, p_value: 1.0 };
    }
    let mut u = 0.0;
    for a in x {
        for b in y {
            if a < b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    let mut all: Vec<f64> = x.iter().chain(y).copied().collect();
    all.sort_by(|a, b| a.total_cmp(b));
    let mut ties = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1] == all[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mean = a * b / 2.0;
    let var = a * b / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if !(var > 0.0) {
        return RankTest { u, z: 0.0, p_value: 1.0 };
    }
    let z = (u - mean - 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    RankTest { u, z, p_value: normal.sf(z) }
}

/// Witness search for the gradient lemmas: for every non-action charge
/// vector of total length <= 2d (and of even length, so it is the charge of
/// some J in J^{2d,M}), find j* maximizing |d omega_J / d|u_{j*}|^2|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub pass: bool,
    pub checked: u64,
    /// charge vectors whose gradient vanishes identically
    pub skipped: u64,
    /// min over J of best gradient / required bound
    pub worst_ratio: f64,
    pub worst: Option<Vec<Index>>,
    /// witnesses lying outside |j| <= M
    pub outside_cutoff: u64,
}

pub const DERIVATIVE_BUDGET: u64 = 50_000_000;

/// e-2 over e-1.
pub fn c_e() -> f64 {
    let e = std::f64::consts::E;
    (e - 2.0) / (e - 1.0)
}

/// Power law: some |j*| <= (p+1) d has |grad| >= 2 / ((4pd)^{2dp} prod <j_l>^p).
/// Exponential: some unpaired index j* of J has |grad| >= 2 C_e.
/// The factor 2 is the frequency normalization omega = 2 sum sigma K |u|^2.
pub fn derivative_lower_bound_check(spec: &KernelSpec, d: usize, m: usize) -> Result<DerivativeReport, MeasureError> {
    spec.validate()?;
    if d == 0 {
        return Err(MeasureError::Invalid("d must be positive".into()));
    }
    let n = 2 * m + 1;
    let mut report = DerivativeReport {
        pass: true,
        checked: 0,
        skipped: 0,
        worst_ratio: f64::INFINITY,
        worst: None,
        outside_cutoff: 0,
    };
    let mut c = vec![0i32; n];
    let mut visited = 0u64;
    let mut overflow = false;
    charges(&mut c, 0, 2 * d as i32, &mut visited, &mut overflow, &mut |c| {
        let total: i32 = c.iter().map(|x| x.abs()).sum();
        if total == 0 || total % 2 != 0 {
            return;
        }
        let entries: Vec<Index> = c
            .iter()
            .enumerate()
            .flat_map(|(i, &q)| {
                let j = i as i32 - m as i32;
                let idx = if q > 0 { Index::plus(j) } else { Index::minus(j) };
                std::iter::repeat_n(idx, q.unsigned_abs() as usize)
            })
            .collect();
        let jm = MultiIndex::new(entries.clone()).unwrap();
        let (candidates, bound): (Vec<i64>, f64) = match *spec {
            KernelSpec::PowerLaw { p } => {
                let lim = ((p as usize + 1) * d) as i64;
                let prod: f64 = entries.iter().map(|e| (e.abs().max(1) as f64).powi(p as i32)).product();
                let base = (4.0 * p as f64 * d as f64).powi((2 * d * p as usize) as i32);
                ((-lim..=lim).collect(), 2.0 / (base * prod))
            }
            KernelSpec::Exponential { .. } => (
                c.iter()
                    .enumerate()
                    .filter(|(_, q)| **q != 0)
                    .map(|(i, _)| i as i64 - m as i64)
                    .collect(),
                2.0 * c_e(),
            ),
        };
        let span = 2 * m as i64 + ((spec_reach(spec, d)) as i64);
        let identically_zero = (-span..=span).all(|j| frequency_action_gradient(spec, &jm, j).abs() <= 1e-300);
        if identically_zero {
            report.skipped += 1;
            return;
        }
        report.checked += 1;
        let (best_j, best) = candidates
            .iter()
            .map(|&j| (j, frequency_action_gradient(spec, &jm, j).abs()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if best_j.unsigned_abs() as usize > m {
            report.outside_cutoff += 1;
        }
        let ratio = best / bound;
        if ratio < report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst = Some(entries);
        }
        if ratio < 1.0 {
            report.pass = false;
        }
    });
    if overflow {
        return Err(MeasureError::EnumerationOverflow { budget: DERIVATIVE_BUDGET });
    }
    Ok(report)
}

fn spec_reach(spec: &KernelSpec, d: usize) -> usize {
    match *spec {
        KernelSpec::PowerLaw { p } => (p as usize + 1) * d,
        KernelSpec::Exponential { .. } => 0,
    }
}

fn charges(c: &mut [i32], pos: usize, left: i32, visited: &mut u64, overflow: &mut bool, visit: &mut dyn FnMut(&[i32])) {
    if *overflow {
        return;
    }
    if pos == c.len() {
        *visited += 1;
        if *visited > DERIVATIVE_BUDGET {
            *overflow = true;
            return;
        }
        visit(c);
        return;
    }
    for q in -left..=left {
        c[pos] = q;
        charges(c, pos + 1, left - q.abs(), visited, overflow, visit);
    }
    c[pos] = 0;
}

/// Exact and sampled fibering of the ball over one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    /// complex dimension of the ball
    pub n: usize,
    /// real dimension of the slice {u_{j*} = 0}
    pub slice_dim: usize,
    /// meas(B) / meas(slice) = (2 pi / w*^2) / ((K+1)(K+2)) at radius 1
    pub exact_ratio: f64,
    /// the same from integral_0^1 y (1-y)^K dy evaluated by quadrature
    pub quadrature_ratio: f64,
    /// pi e^{-s f(j*)} / (4M (4M+1)): the printed closed form
    pub printed_ratio: f64,
    /// MC estimate of P(w* |u_{j*}| <= eps r) and its exact value
    pub eps: f64,
    pub mc_probability: f64,
    pub exact_probability: f64,
    pub mc_sigma: f64,
    /// MC estimate of the ratio through pi (eps r / w*)^2 / P, corrected by
    /// the exact finite-eps factor
    pub mc_ratio: f64,
    pub notes: Vec<String>,
}

/// integral_0^1 y (1-y)^k dy by composite Simpson on 2^12 panels.
pub fn beta_moment_quadrature(k: usize) -> f64 {
    let n = 1 << 12;
    let h = 1.0 / n as f64;
    let g = |y: f64| y * (1.0 - y).powi(k as i32);
    let mut s = g(0.0) + g(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    s * h / 3.0
}

pub fn volume_identity_check(b: &BallSampler, jstar: i64, n_samples: usize, eps: f64) -> Result<VolumeReport, MeasureError> {
    if jstar.unsigned_abs() as usize > b.m {
        return Err(MeasureError::Invalid(format!("j* = {jstar} outside |j| <= {}", b.m)));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MeasureError::Invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if n_samples < MIN_SAMPLES {
        return Err(MeasureError::TooFewSamples { min: MIN_SAMPLES, got: n_samples });
    }
    let n = 2 * b.m + 1;
    let k = 2 * (n - 1);
    let w = (b.s * b.f.at_mode(jstar)).exp();
    let scale = 2.0 * std::f64::consts::PI / (w * w);
    let exact_ratio = scale / ((k + 1) * (k + 2)) as f64;
    let quadrature_ratio = scale * beta_moment_quadrature(k);
    let mf = b.m as f64;
    let printed_ratio = std::f64::consts::PI / w / (4.0 * mf * (4.0 * mf + 1.0));
    // w* |u_{j*}| / r is Beta(2, 2n-1) under the uniform law
    let exact_probability = beta_reg(2.0, (2 * n - 1) as f64, eps);
    let hits: usize = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = b.stream(i as u64);
            let u: FourierState = b.sample(&mut rng);
            usize::from(w * u.get(jstar).norm() <= eps * b.r)
        })
        .sum();
    let p = hits as f64 / n_samples as f64;
    // small-eps law P ~ (K+1)(K+2) eps^2 / 2; the exact Beta CDF corrects it
    let small_eps = ((k + 1) * (k + 2)) as f64 * eps * eps / 2.0;
    let mc_ratio = if p > 0.0 {
        std::f64::consts::PI * eps * eps / (w * w) / p * (exact_probability / small_eps)
    } else {
        f64::INFINITY
    };
    let notes = vec![
        format!("real slice dimension is 2(2M+1)-2 = {k}; the printed form uses the exponent 4M and the product 4M(4M+1)"),
        "the area element of one complex coordinate contributes 2 pi y dy / w^2, so the weight enters squared".into(),
    ];
    Ok(VolumeReport {
        n,
        slice_dim: k,
        exact_ratio,
        quadrature_ratio,
        printed_ratio,
        eps,
        mc_probability: p,
        exact_probability,
        mc_sigma: (p * (1.0 - p) / n_samples as f64).sqrt(),
        mc_ratio,
        notes,
    })
}

/// Lipschitz bound for the frequencies:
/// |omega_J(u) - omega_J(u')| <= 2 #J C_K (N(u) + N(u')) N(u - u').
/// The printed form with |N(u) - N(u')| in place of N(u - u') is also
/// evaluated; it fails on pairs with equal norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    /// min over pairs of bound - |difference|, relative to the bound
    pub min_slack: f64,
    pub printed_violations: usize,
}

pub fn lipschitz_frequency_check(
    spec: &KernelSpec,
    jm: &MultiIndex,
    b: &BallSampler,
    pairs: usize,
) -> Result<LipschitzReport, MeasureError> {
    let ck = spec.c_k();
    let len = jm.len() as f64;
    let mut rng = b.rng();
    let mut min_slack = f64::INFINITY;
    let mut printed = 0;
    for _ in 0..pairs {
        let u = b.sample(&mut rng);
        let v = b.sample(&mut rng);
        let du = crate::kernel::frequency(spec, jm, &u, b.m)? - crate::kernel::frequency(spec, jm, &v, b.m)?;
        let nu = weighted_norm_with(&u, b.s, &b.f, NormKind::L1);
        let nv = weighted_norm_with(&v, b.s, &b.f, NormKind::L1);
        let nd = weighted_norm_with(&u.sub(&v), b.s, &b.f, NormKind::L1);
        let bound = 2.0 * len * ck * (nu + nv) * nd;
        min_slack = min_slack.min((bound - du.abs()) / bound);
        if du.abs() > 2.0 * len * ck * nu.max(nv) * (nu - nv).abs() {
            printed += 1;
        }
    }
    Ok(LipschitzReport { pairs, min_slack, printed_violations: printed })
}

/// Histogram of non-resonance margins on sampled states, for plots.
pub fn margin_histogram(samples: &[DivisorSample], gamma: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let margins: Vec<f64> = samples
        .iter()
        .filter(|x| x.smallest.is_finite())
        .map(|x| x.smallest - gamma * x.norm * x.norm)
        .collect();
    if margins.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for x in margins {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}
