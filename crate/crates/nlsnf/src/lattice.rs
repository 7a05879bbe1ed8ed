//! Index lattice, multi-indices, admissible weights and weighted norms.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::FourierState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("weight argument {x} lies below the cutoff c = {c}")]
    Domain { x: f64, c: f64 },
    #[error("multi-index needs at least two entries, got {0}")]
    TooShort(usize),
    #[error("invalid weight parameters: {0}")]
    InvalidWeight(String),
    #[error("s0 search did not converge: {0}")]
    NoConvergence(String),
}

/// Sign of a lattice site. `Plus` sorts before `Minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn from_i64(s: i64) -> Option<Sign> {
        match s {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

/// A site J = (j, sigma) of the lattice Z x {+1, -1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Index {
    pub j: i32,
    pub sigma: Sign,
}

impl Index {
    pub fn new(j: i32, sigma: Sign) -> Self {
        Index { j, sigma }
    }

    pub fn plus(j: i32) -> Self {
        Index { j, sigma: Sign::Plus }
    }

    pub fn minus(j: i32) -> Self {
        Index { j, sigma: Sign::Minus }
    }

    pub fn conjugate(self) -> Self {
        Index { j: self.j, sigma: self.sigma.flip() }
    }

    pub fn abs(self) -> u32 {
        self.j.unsigned_abs()
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sigma {
            Sign::Plus => write!(f, "+{}", self.j),
            Sign::Minus => write!(f, "-{}", self.j),
        }
    }
}

/// Multi-index in canonical (sorted) form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    entries: Vec<Index>,
}

impl MultiIndex {
    pub fn new(mut entries: Vec<Index>) -> Result<Self, LatticeError> {
        if entries.len() < 2 {
            return Err(LatticeError::TooShort(entries.len()));
        }
        entries.sort();
        Ok(MultiIndex { entries })
    }

    /// Build from `(j, sigma)` pairs with sigma in {+1, -1}.
    pub fn from_pairs(pairs: &[(i32, i64)]) -> Result<Self, LatticeError> {
        let entries = pairs
            .iter()
            .map(|&(j, s)| {
                Sign::from_i64(s)
                    .map(|sigma| Index { j, sigma })
                    .ok_or_else(|| LatticeError::InvalidWeight(format!("sign {s} is not +-1")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        MultiIndex::new(entries)
    }

    pub fn entries(&self) -> &[Index] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn conjugate(&self) -> MultiIndex {
        let mut entries: Vec<Index> = self.entries.iter().map(|e| e.conjugate()).collect();
        entries.sort();
        MultiIndex { entries }
    }

    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        entries.sort();
        MultiIndex { entries }
    }

    pub fn max_mode(&self) -> u32 {
        self.entries.iter().map(|e| e.abs()).max().unwrap_or(0)
    }

    pub fn momentum(&self) -> i64 {
        momentum(self)
    }

    pub fn energy(&self) -> i64 {
        energy(self)
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Degree first, then lexicographic on the sorted entries.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.entries
            .len()
            .cmp(&other.entries.len())
            .then_with(|| self.entries.cmp(&other.entries))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

pub fn momentum(jm: &MultiIndex) -> i64 {
    jm.entries.iter().map(|e| e.sigma.value() * e.j as i64).sum()
}

pub fn energy(jm: &MultiIndex) -> i64 {
    jm.entries
        .iter()
        .map(|e| e.sigma.value() * (e.j as i64) * (e.j as i64))
        .sum()
}

pub fn is_resonant(jm: &MultiIndex) -> bool {
    energy(jm) == 0
}

/// True when the entries pair up exactly into (j,+),(j,-) couples.
pub fn is_action_type(jm: &MultiIndex) -> bool {
    let e = jm.entries();
    if e.len() % 2 != 0 {
        return false;
    }
    // canonical order puts (j,+) right before (j,-)
    let mut plus: Vec<i32> = Vec::new();
    let mut minus: Vec<i32> = Vec::new();
    for x in e {
        match x.sigma {
            Sign::Plus => plus.push(x.j),
            Sign::Minus => minus.push(x.j),
        }
    }
    plus == minus
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightKind {
    Gevrey { g: f64 },
    LogUltra { theta: f64 },
}

/// Admissible weight f with cutoff c and constant C_f.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub kind: WeightKind,
    pub c: f64,
    pub c_f: f64,
}

impl WeightFunction {
    pub fn new(kind: WeightKind, c: f64, c_f: f64) -> Result<Self, LatticeError> {
        match kind {
            WeightKind::Gevrey { g } if !(g > 0.0 && g < 1.0) => {
                return Err(LatticeError::InvalidWeight(format!("gevrey exponent {g} not in (0,1)")))
            }
            WeightKind::LogUltra { theta } if !(theta > 1.0) => {
                return Err(LatticeError::InvalidWeight(format!("theta {theta} must exceed 1")))
            }
            _ => {}
        }
        if !(c >= 1.0) {
            return Err(LatticeError::InvalidWeight(format!("cutoff c = {c} must be >= 1")));
        }
        if !(c_f > 0.0 && c_f < 1.0) && c_f != 0.0 {
            return Err(LatticeError::InvalidWeight(format!("C_f = {c_f} not in (0,1)")));
        }
        Ok(WeightFunction { kind, c, c_f })
    }

    pub fn gevrey(g: f64, c_f: f64) -> Result<Self, LatticeError> {
        WeightFunction::new(WeightKind::Gevrey { g }, 1.0, c_f)
    }

    pub fn log_ultra(theta: f64, c_f: f64) -> Result<Self, LatticeError> {
        WeightFunction::new(WeightKind::LogUltra { theta }, 1.0, c_f)
    }

    fn raw(&self, x: f64) -> f64 {
        match self.kind {
            WeightKind::Gevrey { g } => x.powf(g),
            WeightKind::LogUltra { theta } => x.ln().powf(theta),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, LatticeError> {
        weight_eval(self, x)
    }

    /// f(<j>) with <j> = max(|j|, c).
    pub fn at_mode(&self, j: i64) -> f64 {
        self.raw((j.unsigned_abs() as f64).max(self.c))
    }

    /// f(|j|) clamped at the cutoff, the cheap form used in hot loops.
    pub fn at_abs(&self, j: i64) -> f64 {
        self.at_mode(j)
    }
}

pub fn weight_eval(f: &WeightFunction, x: f64) -> Result<f64, LatticeError> {
    if !(x >= f.c) {
        return Err(LatticeError::Domain { x, c: f.c });
    }
    Ok(f.raw(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormParams {
    pub s: f64,
    pub s0: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    L1,
    L2,
}

/// N_s(u): weighted l1 modulus sum by default, weighted l2 behind `kind`.
pub fn weighted_norm_with(u: &FourierState, s: f64, f: &WeightFunction, kind: NormKind) -> f64 {
    match kind {
        NormKind::L1 => u
            .iter_modes()
            .map(|(j, z)| (s * f.at_mode(j)).exp() * z.norm())
            .sum(),
        NormKind::L2 => u
            .iter_modes()
            .map(|(j, z)| (2.0 * s * f.at_mode(j)).exp() * z.norm_sqr())
            .sum::<f64>()
            .sqrt(),
    }
}

pub fn weighted_norm(u: &FourierState, p: &NormParams, f: &WeightFunction) -> f64 {
    weighted_norm_with(u, p.s, f, NormKind::L1)
}

/// Upper bound on sum_{J in Z x {+-1}} exp(-a f(<j>)), a > 0.
///
/// Direct summation up to 2^k_cut, then dyadic blocks
/// B_k = 2^k exp(-a f(2^k)) whose ratio is eventually decreasing, so the tail
/// is dominated by a geometric series.
pub fn lattice_sum_upper(f: &WeightFunction, a: f64, k_max: u32) -> Result<f64, LatticeError> {
    if !(a > 0.0) {
        return Err(LatticeError::NoConvergence(format!("decay rate {a} is not positive")));
    }
    let term = |j: u64| (-a * f.at_mode(j as i64)).exp();
    let block = |k: u32| {
        let n = 2f64.powi(k as i32);
        (n.ln() - a * f.at_mode(1i64 << k)).exp()
    };
    let ratio = |k: u32| block(k + 1) / block(k);
    // first dyadic level where the block ratio has dropped below 1/2 and
    // keeps decreasing from there on
    let mut k_cut = None;
    for k in 2..k_max {
        let (q0, q1) = (ratio(k), ratio(k + 1));
        if q0 < 0.5 && q1 <= q0 && 1i64.checked_shl(k + 1).is_some() {
            k_cut = Some(k);
            break;
        }
    }
    let k_cut = k_cut.ok_or_else(|| {
        LatticeError::NoConvergence(format!(
            "dyadic tail ratio never fell below 1/2 up to 2^{k_max} (a = {a})"
        ))
    })?;
    let n_cut = 1u64 << k_cut;
    let mut direct = term(0);
    for j in 1..n_cut {
        direct += 2.0 * term(j);
    }
    let q = ratio(k_cut);
    let tail = 2.0 * block(k_cut) / (1.0 - q);
    Ok(2.0 * (direct + tail))
}

/// Smallest s0 (to resolution `tol`) with sum_J exp((2C_f-2) s0 f(<j>)) < 1/3.
pub fn compute_s0(f: &WeightFunction, tol: f64) -> Result<f64, LatticeError> {
    if !(f.c_f < 1.0) {
        return Err(LatticeError::NoConvergence("C_f must be < 1".into()));
    }
    let rate = 2.0 - 2.0 * f.c_f;
    let ok = |s0: f64| -> Result<bool, LatticeError> {
        Ok(lattice_sum_upper(f, rate * s0, 60)? < 1.0 / 3.0)
    };
    let mut hi = 1.0;
    let mut grow = 0;
    loop {
        match ok(hi) {
            Ok(true) => break,
            Ok(false) | Err(LatticeError::NoConvergence(_)) => {
                hi *= 2.0;
                grow += 1;
                if grow > 60 {
                    return Err(LatticeError::NoConvergence("no admissible s0 below 2^60".into()));
                }
            }
            Err(e) => return Err(e),
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match ok(mid) {
            Ok(true) => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightConditionReport {
    pub pass: bool,
    /// min over tuples of f(x_max) + C_f sum_{l != m} f(x_l) - f(sum x_l)
    pub worst_slack: f64,
    pub worst_tuple: Vec<u64>,
    pub tuples_checked: u64,
}

/// Exhaustive check of f(sum x) <= f(x_max) + C_f sum_{l != m} f(x_l) on integer
/// tuples of length 2..=dmax with entries in [c, xmax].
pub fn check_weight_condition(f: &WeightFunction, dmax: usize, xmax: u64) -> WeightConditionReport {
    let lo = f.c.ceil() as u64;
    let mut report = WeightConditionReport {
        pass: true,
        worst_slack: f64::INFINITY,
        worst_tuple: Vec::new(),
        tuples_checked: 0,
    };
    if xmax < lo || dmax < 2 {
        return report;
    }
    let fx = |x: u64| f.raw(x as f64);
    // nondecreasing tuples suffice: the inequality is symmetric once the
    // maximum is singled out
    let mut tuple: Vec<u64> = Vec::with_capacity(dmax);
    fn rec(
        tuple: &mut Vec<u64>,
        start: u64,
        xmax: u64,
        dmax: usize,
        f: &dyn Fn(u64) -> f64,
        c_f: f64,
        report: &mut WeightConditionReport,
    ) {
        if tuple.len() >= 2 {
            let sum: u64 = tuple.iter().sum();
            let max = *tuple.last().unwrap();
            let rest: f64 = tuple[..tuple.len() - 1].iter().map(|&x| f(x)).sum();
            let slack = f(max) + c_f * rest - f(sum);
            report.tuples_checked += 1;
            if slack < report.worst_slack {
                report.worst_slack = slack;
                report.worst_tuple = tuple.clone();
            }
        }
        if tuple.len() == dmax {
            return;
        }
        for x in start..=xmax {
            tuple.push(x);
            rec(tuple, x, xmax, dmax, f, c_f, report);
            tuple.pop();
        }
    }
    rec(&mut tuple, lo, xmax, dmax, &fx, f.c_f, &mut report);
    // relative tolerance for rounding in f
    report.pass = report.worst_slack >= -1e-12;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThirdIndexReport {
    pub pass: bool,
    pub cases_checked: u64,
    pub counterexample: Option<(usize, u32, Vec<Index>)>,
}

/// Solve sigma1 j1 + sigma2 j2 = -mom, sigma1 j1^2 + sigma2 j2^2 = -en over
/// all sign pairs; returns every integer solution (J1, J2).
pub fn complete_pair(mom: i64, en: i64) -> Vec<(Index, Index)> {
    let mut out = Vec::new();
    let a = -mom;
    let b = -en;
    for (s1, s2) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
        if s1 == s2 {
            // j1 + j2 = a s1, j1^2 + j2^2 = b s1
            let sa = a * s1;
            let sb = b * s1;
            if sb < 0 {
                continue;
            }
            // (j1 - j2)^2 = 2 sb - sa^2
            let disc = 2 * sb - sa * sa;
            if disc < 0 {
                continue;
            }
            let t = isqrt(disc);
            if t * t != disc {
                continue;
            }
            for diff in [t, -t] {
                if (sa + diff) % 2 != 0 {
                    continue;
                }
                let j1 = (sa + diff) / 2;
                let j2 = sa - j1;
                out.push((
                    Index::new(j1 as i32, Sign::from_i64(s1).unwrap()),
                    Index::new(j2 as i32, Sign::from_i64(s2).unwrap()),
                ));
            }
        } else {
            // j1 - j2 = a s1, j1^2 - j2^2 = b s1
            let da = a * s1;
            let db = b * s1;
            if da == 0 {
                // j1 = j2 with opposite signs: J2 is the conjugate of J1, a
                // one-parameter family that the lemma excludes
                continue;
            }
            if db % da != 0 {
                continue;
            }
            let sum = db / da;
            if (sum + da) % 2 != 0 {
                continue;
            }
            let j1 = (sum + da) / 2;
            let j2 = sum - j1;
            out.push((
                Index::new(j1 as i32, Sign::from_i64(s1).unwrap()),
                Index::new(j2 as i32, Sign::from_i64(s2).unwrap()),
            ));
        }
    }
    out.sort();
    out.dedup();
    out
}

fn isqrt(n: i64) -> i64 {
    if n < 0 {
        return -1;
    }
    let mut x = (n as f64).sqrt() as i64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Third-largest-index bound: every momentum-conserving resonant J of length d
/// with |J1| >= M and J1 != conj(J2) (sorted by modulus) has |J3| >= sqrt(M/(d-2)).
///
/// Any counterexample has its d-2 smallest entries inside |j| <= sqrt(M/(d-2)),
/// and those entries fix (J1, J2) up to finitely many choices, so enumerating
/// the tails is exhaustive.
pub fn third_index_check(m_max: u32, d_max: usize) -> ThirdIndexReport {
    let mut report = ThirdIndexReport { pass: true, cases_checked: 0, counterexample: None };
    for d in 3..=d_max {
        for m in 1..=m_max {
            let bound = (m as f64 / (d - 2) as f64).sqrt();
            let t = bound.ceil() as i32;
            let sites: Vec<Index> = (-t..=t)
                .flat_map(|j| [Index::plus(j), Index::minus(j)])
                .collect();
            let mut tail: Vec<usize> = Vec::new();
            let mut stack_ok = true;
            each_multiset(sites.len(), d - 2, &mut tail, &mut |idx| {
                if !stack_ok {
                    return;
                }
                let entries: Vec<Index> = idx.iter().map(|&k| sites[k]).collect();
                let mom: i64 = entries.iter().map(|e| e.sigma.value() * e.j as i64).sum();
                let en: i64 = entries
                    .iter()
                    .map(|e| e.sigma.value() * (e.j as i64).pow(2))
                    .sum();
                for (j1, j2) in complete_pair(mom, en) {
                    let mut all = entries.clone();
                    all.push(j1);
                    all.push(j2);
                    all.sort_by(|x, y| y.abs().cmp(&x.abs()).then(x.cmp(y)));
                    report.cases_checked += 1;
                    // hypotheses refer to the modulus-sorted order; among
                    // equal moduli pick the labelling least favourable to the
                    // exclusion J1 != conj(J2)
                    if all[0].abs() < m {
                        continue;
                    }
                    let top = all[0].abs();
                    let second = all[1].abs();
                    let excluded = all[1] == all[0].conjugate()
                        && !all[2..]
                            .iter()
                            .any(|e| e.abs() == second && *e != all[0].conjugate())
                        && all.iter().filter(|e| e.abs() == top).count() <= 2;
                    if excluded {
                        continue;
                    }
                    if (all[2].abs() as f64) < bound - 1e-12 {
                        report.pass = false;
                        report.counterexample = Some((d, m, all));
                        stack_ok = false;
                        return;
                    }
                }
            });
            if !report.pass {
                return report;
            }
        }
    }
    report
}

/// Visit every nondecreasing index sequence of length `len` over `0..n`.
pub fn each_multiset(n: usize, len: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if cur.len() == len {
        visit(cur);
        return;
    }
    let start = cur.last().copied().unwrap_or(0);
    for k in start..n {
        cur.push(k);
        each_multiset(n, len, cur, visit);
        cur.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(p: &[(i32, i64)]) -> MultiIndex {
        MultiIndex::from_pairs(p).unwrap()
    }

    #[test]
    fn momentum_examples() {
        assert_eq!(momentum(&mi(&[(1, 1), (2, 1), (3, -1), (0, -1)])), 0);
        assert_eq!(momentum(&mi(&[(7, 1), (7, -1)])), 0);
        assert_eq!(momentum(&mi(&[(5, 1), (1, -1)])), 4);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy(&mi(&[(1, 1), (2, 1), (3, -1), (0, -1)])), -4);
        assert_eq!(energy(&mi(&[(4, 1), (4, -1)])), 0);
        assert_eq!(energy(&mi(&[(1, 1), (-1, 1), (0, -1), (0, -1)])), 2);
    }

    #[test]
    fn resonance_and_action_examples() {
        assert!(is_resonant(&mi(&[(3, 1), (5, 1), (3, -1), (5, -1)])));
        assert!(!is_resonant(&mi(&[(1, 1), (-1, 1), (0, -1), (0, -1)])));
        assert!(is_resonant(&mi(&[(0, 1), (0, -1)])));
        assert!(is_action_type(&mi(&[(3, 1), (5, 1), (3, -1), (5, -1)])));
        assert!(!is_action_type(&mi(&[(1, 1), (-1, 1), (0, -1), (0, -1)])));
        assert!(is_action_type(&mi(&[(2, 1), (2, -1)])));
    }

    #[test]
    fn canonical_order_puts_plus_first() {
        let m = mi(&[(2, -1), (2, 1), (-1, 1)]);
        assert_eq!(m.entries(), &[Index::plus(-1), Index::plus(2), Index::minus(2)]);
        assert!(MultiIndex::new(vec![Index::plus(1)]).is_err());
    }

    #[test]
    fn weight_examples() {
        let g = WeightFunction::gevrey(0.5, 0.9).unwrap();
        assert!((weight_eval(&g, 4.0).unwrap() - 2.0).abs() < 1e-15);
        let l = WeightFunction::log_ultra(2.0, 0.9).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!((weight_eval(&l, e2).unwrap() - 4.0).abs() < 1e-12);
        assert!(weight_eval(&g, 0.5).is_err());
        for w in [g, l] {
            assert!(w.eval(w.c).unwrap() <= w.eval(w.c + 1.0).unwrap());
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
        let mut u = FourierState::zeros(3);
        assert_eq!(weighted_norm_with(&u, 0.7, &f, NormKind::L1), 0.0);
        u.set(2, num_complex::Complex64::new(0.3, -0.4));
        let single = 0.5 * (0.7 * 2f64.sqrt()).exp();
        assert!((weighted_norm_with(&u, 0.7, &f, NormKind::L1) - single).abs() < 1e-14);
        let mut v = FourierState::zeros(3);
        v.set(-1, num_complex::Complex64::new(0.0, 2.0));
        let both = u.add(&v);
        let sum = weighted_norm_with(&u, 0.7, &f, NormKind::L1) + weighted_norm_with(&v, 0.7, &f, NormKind::L1);
        assert!((weighted_norm_with(&both, 0.7, &f, NormKind::L1) - sum).abs() < 1e-13);
        let l2 = weighted_norm_with(&u, 0.7, &f, NormKind::L2);
        assert!((l2 - single).abs() < 1e-14);
    }

    #[test]
    fn s0_examples() {
        let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
        let s0 = compute_s0(&f, 1e-6).unwrap();
        assert!(s0 > 0.0 && s0.is_finite());
        let rate = 2.0 - 2.0 * f.c_f;
        assert!(lattice_sum_upper(&f, rate * 2.0 * s0, 60).unwrap() < 1.0 / 3.0);
        let f2 = WeightFunction::gevrey(0.5, 0.95).unwrap();
        assert!(compute_s0(&f2, 1e-6).unwrap() >= s0);
    }

    #[test]
    fn weight_condition_examples() {
        let f = WeightFunction::gevrey(0.5, 0.99).unwrap();
        assert!(check_weight_condition(&f, 3, 50).pass);
        let f0 = WeightFunction { kind: WeightKind::Gevrey { g: 0.5 }, c: 1.0, c_f: 0.0 };
        let r = check_weight_condition(&f0, 2, 2);
        assert!(!r.pass);
        // (x, c, ..., c) with x huge: f(x) dominates
        let slack = f.raw(1e6) + f.c_f * 2.0 * f.raw(1.0) - f.raw(1e6 + 2.0);
        assert!(slack >= 0.0);
    }

    #[test]
    fn complete_pair_recovers_known_solutions() {
        // tail (1,+),(2,-): mom = -1, en = -3
        let sols = complete_pair(-1, -3);
        for (a, b) in &sols {
            let m = a.sigma.value() * a.j as i64 + b.sigma.value() * b.j as i64;
            let e = a.sigma.value() * (a.j as i64).pow(2) + b.sigma.value() * (b.j as i64).pow(2);
            assert_eq!((m, e), (1, 3));
        }
        assert!(sols.contains(&(Index::plus(2), Index::minus(1))));
    }
}
