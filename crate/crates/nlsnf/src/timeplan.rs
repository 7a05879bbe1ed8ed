//! Lambert W on the lower branch and the parameter balances that turn the
//! smallness conditions into (r, gamma, kappa, M) and a stability time.
//! Everything that can overflow is kept as a logarithm.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeplanError {
    #[error("W_-1 is defined on [-1/e, 0), got {0}")]
    Domain(f64),
    #[error("Lambert argument {arg} is outside [-1/e, 0) (regime constant {constant})")]
    BranchDomain { arg: f64, constant: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

const INV_E: f64 = 0.36787944117144233;

/// Lower real branch of the Lambert function: x <= -1 with x e^x = y.
pub fn lambert_w_m1(y: f64) -> Result<f64, TimeplanError> {
    if !(y >= -INV_E && y < 0.0) {
        return Err(TimeplanError::Domain(y));
    }
    if y == -INV_E {
        return Ok(-1.0);
    }
    if y < -0.25 {
        // branch-point series in p = -sqrt(2 (1 + e y)), then Halley on x e^x - y
        let p = -(2.0 * (1.0 + std::f64::consts::E * y)).max(0.0).sqrt();
        let mut w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
        for _ in 0..50 {
            let ew = w.exp();
            let f = w * ew - y;
            if f == 0.0 || w == -1.0 {
                break;
            }
            let fp = ew * (w + 1.0);
            let step = f / (fp - (w + 2.0) * f / (2.0 * w + 2.0));
            let next = (w - step).min(-1.0);
            if (next - w).abs() <= 4.0 * f64::EPSILON * w.abs() {
                w = next;
                break;
            }
            w = next;
        }
        return Ok(w);
    }
    // Newton on g(w) = w + ln(-w) - ln(-y), seeded by ln(-y) - ln(-ln(-y))
    let l = (-y).ln();
    let mut w = l - (-l).ln();
    if w > -1.0 {
        w = -1.5;
    }
    for _ in 0..100 {
        let g = w + (-w).ln() - l;
        let step = g / (1.0 + 1.0 / w);
        let next = (w - step).min(-1.0 - 1e-300);
        if (next - w).abs() <= 2.0 * f64::EPSILON * w.abs() {
            w = next;
            break;
        }
        w = next;
    }
    Ok(polish(w, y))
}

/// The log-form Newton converges to within a few ulps; pick the neighbor whose
/// round trip w e^w lands closest to y.
fn polish(w: f64, y: f64) -> f64 {
    let resid = |x: f64| (x * x.exp() - y).abs();
    let mut best = (resid(w), w);
    let mut x = w;
    let mut z = w;
    for _ in 0..8 {
        x = x.next_up();
        z = z.next_down();
        for c in [x, z] {
            if c <= -1.0 && resid(c) < best.0 {
                best = (resid(c), c);
            }
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Gevrey weight x^g, power-law kernel
    GevreyPower,
    /// Gevrey weight x^g, exponential kernel
    GevreyExp,
    /// log-ultra weight (ln x)^theta, power-law kernel
    UltraPower,
    /// log-ultra weight (ln x)^theta, exponential kernel
    UltraExp,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::GevreyPower, Regime::GevreyExp, Regime::UltraPower, Regime::UltraExp];

    fn is_gevrey(self) -> bool {
        matches!(self, Regime::GevreyPower | Regime::GevreyExp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeInputs {
    pub regime: Regime,
    pub d: u32,
    pub iota: f64,
    pub a: f64,
    pub s: f64,
    /// g for Gevrey weights, theta for log-ultra weights
    pub weight: f64,
    /// power p; the exponential regimes use it only through (p+1) d
    pub p: u32,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "one")]
    pub c_k: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeParams {
    pub inputs: RegimeInputs,
    pub ln_r: f64,
    pub ln_gamma: f64,
    pub ln_kappa: f64,
    /// ln M; M itself overflows for the log-ultra regimes
    pub ln_m: f64,
    /// M rounded up, when it fits
    pub m: Option<u64>,
    pub c_m: f64,
    /// ln of C_m r^{1/5} / gamma
    pub ln_frak_r: f64,
    /// C_{a,p} (GevreyPower) or C_{s,p,g,a} (GevreyExp); 0 for the ultra regimes
    pub constant: f64,
    /// stability-time constant as printed
    pub time_constant: f64,
    /// relative residual of the equation M was solved from
    pub plugback_residual: f64,
    /// relative residual of the full balance r^d d^d = e^{-+ (...)}, which
    /// keeps the terms the closed form drops
    pub balance_residual: f64,
    /// ln M solving the full balance numerically, when a root exists
    pub exact_ln_m: Option<f64>,
    pub warnings: Vec<String>,
}

impl RegimeParams {
    pub fn r(&self) -> f64 {
        self.ln_r.exp()
    }

    pub fn gamma(&self) -> f64 {
        self.ln_gamma.exp()
    }

    pub fn kappa(&self) -> f64 {
        self.ln_kappa.exp()
    }
}

/// C_m = 4 max{C_K C2^2, C_K C2, C_K C1}.
pub fn c_m(c1: f64, c2: f64, c_k: f64) -> f64 {
    4.0 * (c_k * c2 * c2).max(c_k * c2).max(c_k * c1)
}

fn validate(inp: &RegimeInputs) -> Result<(), TimeplanError> {
    let bad = |m: String| Err(TimeplanError::Invalid(m));
    if inp.d < 1 {
        return bad("d must be at least 1".into());
    }
    if !(inp.iota > 0.0) {
        return bad(format!("iota must be positive, got {}", inp.iota));
    }
    if !(inp.a > 0.0) {
        return bad(format!("a must be positive, got {}", inp.a));
    }
    if !(inp.s > 0.0) {
        return bad(format!("s must be positive, got {}", inp.s));
    }
    if inp.p < 1 {
        return bad("p must be at least 1".into());
    }
    match inp.regime {
        Regime::GevreyPower | Regime::GevreyExp if !(inp.weight > 0.0 && inp.weight < 1.0) => {
            bad(format!("Gevrey exponent g must lie in (0, 1), got {}", inp.weight))
        }
        Regime::UltraPower | Regime::UltraExp if !(inp.weight > 1.0) => {
            bad(format!("log-ultra exponent theta must exceed 1, got {}", inp.weight))
        }
        _ => Ok(()),
    }
}

/// Regime constants as printed: (C, stability-time constant).
fn constants(inp: &RegimeInputs) -> (f64, f64) {
    let (i, a, p, w) = (inp.iota, inp.a, inp.p as f64, inp.weight);
    match inp.regime {
        Regime::GevreyPower => {
            let c = ((1.0 - i) / 5.0 + a * i) * 4.0 * (p + 1.0);
            (c, c / (2.0 * i * i * (p + 1.0).powi(2) * w * (2.0 + w)))
        }
        Regime::GevreyExp => {
            let c = 3.0 - 3.0 * i + 3.0 * a * i;
            (c, c / w * (w / (6.0 * i)).powi(2))
        }
        Regime::UltraPower => (0.0, 1.0 / (2.0 * i * (p + 1.0)).powf(2.0 * w / (w + 1.0))),
        Regime::UltraExp => (0.0, (1.0 / (3.0 * i)).powf(2.0 * w / (w + 1.0))),
    }
}

/// ln r, ln gamma, ln kappa at given d and ln M (M need not be the balanced value).
pub fn radii(inp: &RegimeInputs, ln_m: f64) -> (f64, f64, f64) {
    let (d, i, a, p, s, w) = (inp.d as f64, inp.iota, inp.a, inp.p as f64, inp.s, inp.weight);
    match inp.regime {
        Regime::GevreyPower | Regime::UltraPower => {
            let x = 2.0 * d * (p + 1.0) * ((4.0 * p * d).ln() + ln_m);
            let ln_r = -i * x;
            (ln_r, a * ln_r - x, a * ln_r)
        }
        Regime::GevreyExp => {
            let x = s * ((p + 1.0) * d).powf(w) + 3.0 * d * ln_m;
            let ln_r = -i * x;
            (ln_r, a * ln_r - x, a * ln_r)
        }
        Regime::UltraExp => {
            let x = ((p + 1.0) * d).ln().powf(w) + 3.0 * d * ln_m;
            let ln_r = -i * x;
            (ln_r, a * ln_r - x, a * ln_r)
        }
    }
}

fn ln_frak_r(inp: &RegimeInputs, ln_m: f64) -> f64 {
    let (ln_r, ln_g, _) = radii(inp, ln_m);
    c_m(inp.c1, inp.c2, inp.c_k).ln() + ln_r / 5.0 - ln_g
}

/// d ln frak_r + d ln d + e(M, d) where the balance reads frak_r^d d^d = e^{-e}
/// (Gevrey: e = (M/d)^{g/2}; log-ultra: e = (ln(M/d))^theta, taken with the
/// sign of the decaying balance).
fn balance(inp: &RegimeInputs, ln_m: f64) -> (f64, f64) {
    let d = inp.d as f64;
    let e = if inp.regime.is_gevrey() {
        ((ln_m - d.ln()) * inp.weight / 2.0).exp()
    } else {
        (ln_m - d.ln()).max(0.0).powf(inp.weight)
    };
    (d * ln_frak_r(inp, ln_m) + d * d.ln() + e, e)
}

fn exact_balance_root(inp: &RegimeInputs) -> Option<f64> {
    let d = inp.d as f64;
    let f = |x: f64| balance(inp, x).0;
    let mut lo = d.ln();
    let mut hi = lo + 1.0;
    if f(lo) > 0.0 {
        return None;
    }
    while f(hi) <= 0.0 {
        hi = lo + 2.0 * (hi - lo);
        if hi > 1e12 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Fill every derived quantity of a regime from its inputs.
pub fn select_params(inp: &RegimeInputs) -> Result<RegimeParams, TimeplanError> {
    validate(inp)?;
    let (d, i, a, w) = (inp.d as f64, inp.iota, inp.a, inp.weight);
    let (constant, time_constant) = constants(inp);
    let mut warnings = Vec::new();
    let window = match inp.regime {
        Regime::GevreyPower | Regime::UltraPower => (1.0 - 1.0 / i) / 5.0,
        Regime::GevreyExp | Regime::UltraExp => 1.0 - 1.0 / i,
    };
    if !(a < window) {
        warnings.push(format!("a = {a} lies outside the admissibility window a < {window:.6}"));
    }
    if inp.regime.is_gevrey() && constant <= 0.0 {
        warnings.push(format!("regime constant {constant} is non-positive"));
    }
    let (ln_m, plugback) = match inp.regime {
        Regime::GevreyPower => {
            // C d^{2+g} ln(dM) = (dM)^{g/2}
            let arg = -w / (2.0 * constant * d.powf(2.0 + w));
            if !(arg >= -INV_E && arg < 0.0) {
                return Err(TimeplanError::BranchDomain { arg, constant });
            }
            let wm = lambert_w_m1(arg)?;
            let ln_m = -2.0 / w * wm - d.ln();
            let ln_dm = ln_m + d.ln();
            let lhs = (constant * d.powf(2.0 + w) * ln_dm).ln();
            let rhs = w / 2.0 * ln_dm;
            (ln_m, ((lhs - rhs) / rhs).abs())
        }
        Regime::GevreyExp => {
            // (C/2) d^{2+g/2} ln M = M^{g/2}
            let arg = -w / (constant * d.powf(2.0 + w / 2.0));
            if !(arg >= -INV_E && arg < 0.0) {
                return Err(TimeplanError::BranchDomain { arg, constant });
            }
            let wm = lambert_w_m1(arg)?;
            let ln_m = -2.0 / w * wm;
            let lhs = (0.5 * constant * d.powf(2.0 + w / 2.0) * ln_m).ln();
            let rhs = w / 2.0 * ln_m;
            (ln_m, ((lhs - rhs) / rhs).abs())
        }
        Regime::UltraPower | Regime::UltraExp => {
            // M = d e^{d^{2/(theta-1)}}; the simplified balance is
            // d^2 ln(dM) = (ln(M/d))^theta (power) or d^2 ln M = (ln(M/d))^theta (exp)
            let t = d.powf(2.0 / (w - 1.0));
            let ln_m = d.ln() + t;
            let lhs = match inp.regime {
                Regime::UltraPower => d * d * (ln_m + d.ln()),
                _ => d * d * ln_m,
            };
            let rhs = t.powf(w);
            (ln_m, ((lhs - rhs) / rhs).abs())
        }
    };
    let (ln_r, ln_gamma, ln_kappa) = radii(inp, ln_m);
    let (bal, e) = balance(inp, ln_m);
    let m = if ln_m < 43.0 { Some(ln_m.exp().ceil() as u64) } else { None };
    Ok(RegimeParams {
        inputs: *inp,
        ln_r,
        ln_gamma,
        ln_kappa,
        ln_m,
        m,
        c_m: c_m(inp.c1, inp.c2, inp.c_k),
        ln_frak_r: ln_frak_r(inp, ln_m),
        constant,
        time_constant,
        plugback_residual: plugback,
        balance_residual: (bal / e).abs(),
        exact_ln_m: exact_balance_root(inp),
        warnings,
    })
}

/// ln T_r = C |ln r|^2 / ln|ln r| (Gevrey) or C |ln r|^{2 theta/(theta+1)} (log-ultra).
pub fn stability_time(rp: &RegimeParams) -> f64 {
    let l = rp.ln_r.abs();
    let c = rp.time_constant;
    if rp.inputs.regime.is_gevrey() {
        c * l * l / l.ln()
    } else {
        let th = rp.inputs.weight;
        c * l.powf(2.0 * th / (th + 1.0))
    }
}

/// The ratio whose limit as d grows is the stability-time constant:
/// (M/d)^{g/2} ln|ln r| / |ln r|^2 or (ln(M/d))^theta / |ln r|^{2 theta/(theta+1)}.
pub fn regime_ratio(rp: &RegimeParams) -> f64 {
    let d = rp.inputs.d as f64;
    let l = rp.ln_r.abs();
    let w = rp.inputs.weight;
    if rp.inputs.regime.is_gevrey() {
        ((rp.ln_m - d.ln()) * w / 2.0).exp() * l.ln() / (l * l)
    } else {
        (rp.ln_m - d.ln()).powf(w) / l.powf(2.0 * w / (w + 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticRow {
    pub d: u32,
    pub ln_r: f64,
    pub ln_gamma: f64,
    pub ln_kappa: f64,
    pub ln_m: f64,
    pub log_t: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    /// the printed constant
    pub target: f64,
    /// the limit of the ratio computed from the closed forms: for the Gevrey
    /// regimes ln|ln r| ~ ln d and -W ~ (2 + g) ln d (resp. (2 + g/2) ln d)
    /// give C g / (8 iota^2 (p+1)^2 (2+g)) and C g / (36 iota^2 (2+g/2));
    /// the log-ultra limits agree with the printed ones
    pub derived_target: f64,
    pub rows: Vec<AsymptoticRow>,
    /// |ratio - target| / target at the last grid point
    pub final_gap: f64,
    /// successive differences shrink on the second half of the grid
    pub cauchy_tail: bool,
}

pub fn asymptotic_constant(base: &RegimeInputs, d_grid: &[u32]) -> Result<AsymptoticReport, TimeplanError> {
    if d_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TimeplanError::Invalid("d grid must be increasing".into()));
    }
    let mut rows = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let rp = select_params(&RegimeInputs { d, ..*base })?;
        rows.push(AsymptoticRow {
            d,
            ln_r: rp.ln_r,
            ln_gamma: rp.ln_gamma,
            ln_kappa: rp.ln_kappa,
            ln_m: rp.ln_m,
            log_t: stability_time(&rp),
            ratio: regime_ratio(&rp),
        });
    }
    let (c, target) = constants(base);
    let (i, p, w) = (base.iota, base.p as f64, base.weight);
    let derived_target = match base.regime {
        Regime::GevreyPower => c * w / (8.0 * i * i * (p + 1.0).powi(2) * (2.0 + w)),
        Regime::GevreyExp => c * w / (36.0 * i * i * (2.0 + w / 2.0)),
        _ => target,
    };
    let final_gap = rows.last().map(|r| ((r.ratio - target) / target).abs()).unwrap_or(f64::NAN);
    let diffs: Vec<f64> = rows.windows(2).map(|w| (w[1].ratio - w[0].ratio).abs()).collect();
    let tail = &diffs[diffs.len() / 2..];
    let cauchy_tail = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    Ok(AsymptoticReport { regime: base.regime, target, derived_target, rows, final_gap, cauchy_tail })
}

/// Scientific notation for e^ln without leaving log space, so values far
/// outside the f64 range still print (e.g. `3.2e-1234`).
pub fn format_from_ln(ln: f64) -> String {
    if ln == f64::NEG_INFINITY {
        return "0".into();
    }
    if !ln.is_finite() {
        return format!("{}", ln.exp());
    }
    let l10 = ln / std::f64::consts::LN_10;
    let mut e = l10.floor();
    let mut m = 10f64.powf(l10 - e);
    if m >= 9.999_999_999_999_5 {
        m /= 10.0;
        e += 1.0;
    }
    format!("{m:.12}e{}", e as i64)
}

pub fn write_sweep_csv<W: Write>(rep: &AsymptoticReport, w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["d", "r", "gamma", "kappa", "M", "logT", "ratio"])?;
    for row in &rep.rows {
        wr.write_record(&[
            row.d.to_string(),
            format_from_ln(row.ln_r),
            format_from_ln(row.ln_gamma),
            format_from_ln(row.ln_kappa),
            format_from_ln(row.ln_m),
            format!("{:e}", row.log_t),
            format!("{:e}", row.ratio),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_formatting() {
        assert_eq!(format_from_ln(0.0), "1.000000000000e0");
        assert_eq!(format_from_ln(-2.0 * std::f64::consts::LN_10), "1.000000000000e-2");
        assert!(format_from_ln(-5000.0).ends_with("e-2172"));
        let v: f64 = format_from_ln(123.4f64.ln()).parse().unwrap();
        assert!((v - 123.4).abs() < 1e-9);
    }

    fn bisect_w(y: f64) -> f64 {
        let (mut lo, mut hi) = (-800.0f64, -1.0f64);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambert_branch_point_and_domain() {
        assert_eq!(lambert_w_m1(-INV_E).unwrap(), -1.0);
        assert!(lambert_w_m1(0.0).is_err());
        assert!(lambert_w_m1(-0.4).is_err());
        assert!(lambert_w_m1(f64::NAN).is_err());
    }

    #[test]
    fn lambert_matches_bisection() {
        for y in [-0.1, -0.3, -0.36, -1e-3, -1e-10, -1e-200] {
            let w = lambert_w_m1(y).unwrap();
            assert!((w * w.exp() - y).abs() <= 1e-13 * y.abs(), "y={y}");
            assert!((w - bisect_w(y)).abs() < 1e-9 * w.abs(), "y={y}");
        }
    }

    #[test]
    fn lambert_log_ratio_increases_to_one() {
        let ratios: Vec<f64> = (4..200).map(|k| {
            let y = -(2f64).powi(-k);
            y.abs().ln() * -1.0 / -lambert_w_m1(y).unwrap()
        }).collect();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]));
        assert!(ratios.iter().all(|&r| r < 1.0));
    }

    fn ultra_power(d: u32) -> RegimeInputs {
        RegimeInputs { regime: Regime::UltraPower, d, iota: 2.0, a: 0.05, s: 0.5, weight: 3.0, p: 1, c1: 1.0, c2: 1.0, c_k: 1.0 }
    }

    #[test]
    fn ultra_power_sets_m_in_closed_form() {
        let rp = select_params(&ultra_power(4)).unwrap();
        let want = 4.0 * (4f64.powf(1.0)).exp();
        assert!((rp.ln_m.exp() - want).abs() < 1e-10 * want);
        assert!(rp.warnings.is_empty());
    }

    #[test]
    fn gevrey_power_plugs_back() {
        let inp = RegimeInputs { regime: Regime::GevreyPower, d: 5, iota: 2.0, a: 0.2, s: 0.5, weight: 0.5, p: 1, c1: 1.0, c2: 1.0, c_k: 1.0 };
        let rp = select_params(&inp).unwrap();
        assert!(rp.plugback_residual < 1e-10, "{}", rp.plugback_residual);
        // a = 0.2 is outside (1 - 1/iota)/5 = 0.1
        assert!(!rp.warnings.is_empty());
        let inside = RegimeInputs { a: 0.05, ..inp };
        assert!(matches!(select_params(&inside), Err(TimeplanError::BranchDomain { .. })));
    }

    #[test]
    fn stability_time_grows_as_r_shrinks() {
        let mut prev: Option<(f64, f64)> = None;
        for d in [2, 3, 5, 8, 13] {
            let rp = select_params(&ultra_power(d)).unwrap();
            let t = stability_time(&rp);
            if let Some((r0, t0)) = prev {
                assert!(rp.ln_r < r0 && t > t0);
            }
            prev = Some((rp.ln_r, t));
        }
    }
}
