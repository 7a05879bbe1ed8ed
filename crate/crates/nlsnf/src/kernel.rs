//! Non-local kernels, the action-dependent frequencies they induce, and
//! non-resonance margins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{weighted_norm, MultiIndex, NormParams, WeightFunction};
use crate::state::FourierState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("mode {j} lies outside the cutoff |j| <= {m}")]
    ModeOutOfRange { j: i64, m: usize },
    #[error("reduced resonance enumeration exceeded its budget of {budget} combinations")]
    EnumerationOverflow { budget: u64 },
    #[error("invalid kernel: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum KernelSpec {
    /// K_k = |k|^-p, K_0 = 0
    #[serde(rename = "power")]
    PowerLaw { p: u32 },
    /// K_k = exp(-|k|^beta)
    #[serde(rename = "exp")]
    Exponential { beta: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelSpec::PowerLaw { p } if p == 0 => Err(KernelError::Invalid("power p must be >= 1".into())),
            KernelSpec::Exponential { beta } if !(beta >= 1.0) => {
                Err(KernelError::Invalid(format!("exponent beta = {beta} must be >= 1")))
            }
            _ => Ok(()),
        }
    }

    pub fn coeff(&self, k: i64) -> f64 {
        kernel_coeff(self, k)
    }

    /// C_K = sup_k K_k.
    pub fn c_k(&self) -> f64 {
        1.0
    }

    /// Coefficients K_0..=K_n.
    pub fn table(&self, n: usize) -> Vec<f64> {
        (0..=n as i64).map(|k| self.coeff(k)).collect()
    }
}

pub fn kernel_coeff(spec: &KernelSpec, k: i64) -> f64 {
    let a = k.unsigned_abs() as f64;
    match *spec {
        KernelSpec::PowerLaw { p } => {
            if k == 0 {
                0.0
            } else {
                a.powi(-(p as i32))
            }
        }
        KernelSpec::Exponential { beta } => (-a.powf(beta)).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonResonanceParams {
    pub gamma: f64,
    pub m: usize,
    pub d: usize,
}

/// Per-site base frequencies Omega_j(u) = 2 sum_k K_{|k-j|} |u_k|^2 for |j| <= M.
pub fn base_frequencies(spec: &KernelSpec, u: &FourierState, m: usize) -> Vec<f64> {
    let act = u.actions();
    let mu = u.modes() as i64;
    let kt = spec.table(m + u.modes());
    (-(m as i64)..=m as i64)
        .map(|j| {
            2.0 * act
                .iter()
                .enumerate()
                .map(|(i, a)| kt[(i as i64 - mu - j).unsigned_abs() as usize] * a)
                .sum::<f64>()
        })
        .collect()
}

fn check_modes(jm: &MultiIndex, m: usize) -> Result<(), KernelError> {
    for e in jm.entries() {
        if e.abs() as usize > m {
            return Err(KernelError::ModeOutOfRange { j: e.j as i64, m });
        }
    }
    Ok(())
}

/// omega_J(u) = 2 sum_a sigma_a sum_{|k|<=M} K_{|k-j_a|} |u_k|^2.
pub fn frequency(spec: &KernelSpec, jm: &MultiIndex, u: &FourierState, m: usize) -> Result<f64, KernelError> {
    check_modes(jm, m)?;
    let mut w = 0.0;
    for e in jm.entries() {
        let mut s = 0.0;
        for (k, z) in u.iter_modes() {
            if k.unsigned_abs() as usize <= m {
                s += spec.coeff(k - e.j as i64) * z.norm_sqr();
            }
        }
        w += e.sigma.value() as f64 * s;
    }
    Ok(2.0 * w)
}

/// d omega_J / d|u_{j*}|^2 = 2 sum_a sigma_a K_{|j* - j_a|}.
pub fn frequency_action_gradient(spec: &KernelSpec, jm: &MultiIndex, jstar: i64) -> f64 {
    2.0 * jm
        .entries()
        .iter()
        .map(|e| e.sigma.value() as f64 * spec.coeff(jstar - e.j as i64))
        .sum::<f64>()
}

/// Signed site-charge vector c_j = #(j,+) - #(j,-), indexed j + m.
pub fn charge_vector(jm: &MultiIndex, m: usize) -> Result<Vec<i32>, KernelError> {
    check_modes(jm, m)?;
    let mut c = vec![0i32; 2 * m + 1];
    for e in jm.entries() {
        c[(e.j as i64 + m as i64) as usize] += e.sigma.value() as i32;
    }
    Ok(c)
}

pub const DEFAULT_ENUM_BUDGET: u64 = 10_000_000;

/// Result of the reduced small-divisor search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallestFrequency {
    pub value: f64,
    /// minimizing charge vector, indexed j + m
    pub charge: Vec<i32>,
    pub visited: u64,
}

/// min |sum_j c_j Omega_j| over charge vectors with even l1 norm in [2, len_max],
/// first nonzero entry positive, and A c != 0 (frequency not identically zero).
pub fn smallest_frequency(
    spec: &KernelSpec,
    u: &FourierState,
    m: usize,
    len_max: usize,
    budget: u64,
) -> Result<SmallestFrequency, KernelError> {
    let omega = base_frequencies(spec, u, m);
    let n = 2 * m + 1;
    let kt = spec.table(2 * m);
    // columns of A: A_{jk} = 2 K_{|j-k|}
    let cols: Vec<Vec<f64>> = (0..n).map(|k| (0..n).map(|j| 2.0 * kt[j.abs_diff(k)]).collect()).collect();
    smallest_combination(&omega, &cols, len_max, budget)
}

/// Reduced small-divisor search for site frequencies `omega` = A I with the
/// columns of A given; combinations with A c = 0 are skipped.
pub fn smallest_combination(
    omega: &[f64],
    cols: &[Vec<f64>],
    len_max: usize,
    budget: u64,
) -> Result<SmallestFrequency, KernelError> {
    let n = omega.len();
    struct Walk<'a> {
        omega: &'a [f64],
        cols: &'a [Vec<f64>],
        n: usize,
        budget: u64,
        visited: u64,
        best: f64,
        best_c: Vec<i32>,
        c: Vec<i32>,
        ac: Vec<f64>,
        overflow: bool,
    }
    impl Walk<'_> {
        fn rec(&mut self, site: usize, left: usize, used: usize, sum: f64, seen_nonzero: bool) {
            if self.overflow {
                return;
            }
            if site == self.n {
                if used >= 2 && used % 2 == 0 {
                    self.visited += 1;
                    if self.visited > self.budget {
                        self.overflow = true;
                        return;
                    }
                    let scale: f64 = self.ac.iter().map(|x| x.abs()).fold(0.0, f64::max);
                    if scale <= 1e-13 * used as f64 {
                        return;
                    }
                    let v = sum.abs();
                    if v < self.best {
                        self.best = v;
                        self.best_c = self.c.clone();
                    }
                }
                return;
            }
            let lim = left as i32;
            let lo = if seen_nonzero { -lim } else { 0 };
            for v in lo..=lim {
                let a = v.unsigned_abs() as usize;
                self.c[site] = v;
                if v != 0 {
                    for (acj, cj) in self.ac.iter_mut().zip(&self.cols[site]) {
                        *acj += v as f64 * cj;
                    }
                }
                let s = sum + v as f64 * self.omega[site];
                self.rec(site + 1, left - a, used + a, s, seen_nonzero || v != 0);
                if v != 0 {
                    for (acj, cj) in self.ac.iter_mut().zip(&self.cols[site]) {
                        *acj -= v as f64 * cj;
                    }
                }
            }
            self.c[site] = 0;
        }
    }
    let mut w = Walk {
        omega,
        cols,
        n,
        budget,
        visited: 0,
        best: f64::INFINITY,
        best_c: vec![0; n],
        c: vec![0; n],
        ac: vec![0.0; n],
        overflow: false,
    };
    w.rec(0, len_max, 0, 0.0, false);
    if w.overflow {
        return Err(KernelError::EnumerationOverflow { budget });
    }
    Ok(SmallestFrequency { value: w.best, charge: w.best_c, visited: w.visited })
}

/// min over non-action J in J^{2d,M} of |omega_J(u)| - gamma N_s(u)^2.
pub fn nonresonance_margin(
    spec: &KernelSpec,
    u: &FourierState,
    nr: &NonResonanceParams,
    p: &NormParams,
    f: &WeightFunction,
) -> Result<f64, KernelError> {
    nonresonance_margin_budget(spec, u, nr, p, f, DEFAULT_ENUM_BUDGET)
}

pub fn nonresonance_margin_budget(
    spec: &KernelSpec,
    u: &FourierState,
    nr: &NonResonanceParams,
    p: &NormParams,
    f: &WeightFunction,
    budget: u64,
) -> Result<f64, KernelError> {
    if u.modes() > nr.m {
        for (k, z) in u.iter_modes() {
            if k.unsigned_abs() as usize > nr.m && z.norm_sqr() > 0.0 {
                return Err(KernelError::ModeOutOfRange { j: k, m: nr.m });
            }
        }
    }
    let best = smallest_frequency(spec, u, nr.m, 2 * nr.d, budget)?;
    let n = weighted_norm(u, p, f);
    if best.value.is_infinite() {
        // no admissible combination at all
        return Ok(f64::INFINITY);
    }
    Ok(best.value - nr.gamma * n * n)
}

/// Direct enumeration of all length-`len` multisets over signed sites |j| <= m.
/// Oracle for `smallest_frequency`; only usable for tiny instances.
pub fn smallest_frequency_brute(spec: &KernelSpec, u: &FourierState, m: usize, len: usize) -> f64 {
    use crate::lattice::{each_multiset, Index};
    let sites: Vec<Index> = (-(m as i32)..=m as i32)
        .flat_map(|j| [Index::plus(j), Index::minus(j)])
        .collect();
    let mut best = f64::INFINITY;
    let mut cur = Vec::new();
    each_multiset(sites.len(), len, &mut cur, &mut |idx| {
        let jm = MultiIndex::new(idx.iter().map(|&k| sites[k]).collect()).unwrap();
        let identically_zero = (-(2 * m as i64)..=2 * m as i64)
            .all(|js| frequency_action_gradient(spec, &jm, js).abs() <= 1e-13);
        if identically_zero {
            return;
        }
        let w = frequency(spec, &jm, u, m).unwrap().abs();
        if w < best {
            best = w;
        }
    });
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn mi(p: &[(i32, i64)]) -> MultiIndex {
        MultiIndex::from_pairs(p).unwrap()
    }

    #[test]
    fn coeff_examples() {
        let p2 = KernelSpec::PowerLaw { p: 2 };
        assert!((kernel_coeff(&p2, 3) - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(kernel_coeff(&KernelSpec::PowerLaw { p: 5 }, 0), 0.0);
        let e = KernelSpec::Exponential { beta: 1.0 };
        assert!((kernel_coeff(&e, 2) - (-2f64).exp()).abs() < 1e-16);
        assert_eq!(kernel_coeff(&e, -2), kernel_coeff(&e, 2));
    }

    #[test]
    fn frequency_examples() {
        let p2 = KernelSpec::PowerLaw { p: 2 };
        let a: f64 = 0.37;
        let u = FourierState::single_mode(3, 0, Complex64::new(a.sqrt(), 0.0));
        let w = frequency(&p2, &mi(&[(1, 1), (2, 1), (3, -1), (0, -1)]), &u, 3).unwrap();
        assert!((w - 2.0 * a * (1.0 + 0.25 - 1.0 / 9.0)).abs() < 1e-14);
        assert_eq!(frequency(&p2, &mi(&[(2, 1), (2, -1)]), &u, 3).unwrap(), 0.0);
        assert!(frequency(&p2, &mi(&[(4, 1), (4, -1)]), &u, 3).is_err());
        let g = frequency_action_gradient(&p2, &mi(&[(1, 1), (2, 1), (3, -1), (0, -1)]), 0);
        assert!((g - 2.0 * (1.0 + 0.25 - 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn margin_at_zero_is_zero() {
        let spec = KernelSpec::PowerLaw { p: 1 };
        let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
        let p = NormParams { s: 0.5, s0: 0.1, r: 0.1 };
        let nr = NonResonanceParams { gamma: 1e-3, m: 2, d: 2 };
        let m = nonresonance_margin(&spec, &FourierState::zeros(2), &nr, &p, &f).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn reduced_matches_brute_force() {
        let spec = KernelSpec::Exponential { beta: 1.0 };
        let u = FourierState::from_vec(
            2,
            vec![
                Complex64::new(0.1, 0.2),
                Complex64::new(-0.3, 0.05),
                Complex64::new(0.2, 0.0),
                Complex64::new(0.0, 0.15),
                Complex64::new(0.07, -0.11),
            ],
        );
        for len in [2, 4] {
            let red = smallest_frequency(&spec, &u, 2, len, DEFAULT_ENUM_BUDGET).unwrap().value;
            let brute = (1..=len / 2)
                .map(|h| smallest_frequency_brute(&spec, &u, 2, 2 * h))
                .fold(f64::INFINITY, f64::min);
            assert!((red - brute).abs() < 1e-14, "{red} vs {brute}");
        }
    }

    #[test]
    fn budget_overflow_is_reported() {
        let spec = KernelSpec::PowerLaw { p: 1 };
        let u = FourierState::single_mode(4, 1, Complex64::new(0.1, 0.0));
        assert!(matches!(
            smallest_frequency(&spec, &u, 4, 6, 10),
            Err(KernelError::EnumerationOverflow { .. })
        ));
    }
}
