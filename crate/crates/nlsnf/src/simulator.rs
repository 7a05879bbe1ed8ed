//! Split-step integration of the mode-truncated system
//! i du_j/dt = j^2 u_j + 2 P_M (V u)_j,  V = K * |u|^2,
//! which is the Hamiltonian field of H = sum k^2 |u_k|^2 + sum K_{k1-k3} u u conj(u) conj(u).
//!
//! The linear substep is exact. The nonlinear substep is the implicit midpoint
//! rule; with the midpoint potential frozen it is the Cayley transform of a
//! skew-Hermitian matrix, hence unitary, and the potential is iterated to a
//! fixed point.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ball::BallSampler;
use crate::kernel::{nonresonance_margin, KernelError, KernelSpec, NonResonanceParams};
use crate::lattice::{weighted_norm, NormParams, WeightFunction};
use crate::state::FourierState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite amplitude at step {step}")]
    StepUnstable { step: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Strang,
    Lie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub m_sim: usize,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub observer_stride: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.m_sim < 1 {
            return Err(SimError::Config("m_sim must be at least 1".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(SimError::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.observer_stride == 0 {
            return Err(SimError::Config("observer_stride must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Grid size for alias-free cubic products of modes |j| <= m.
pub fn grid_size(m: usize) -> usize {
    (4 * m + 1).next_power_of_two()
}

/// Integrator state: FFT plans, kernel table and scratch.
pub struct Propagator {
    m: usize,
    n: usize,
    kernel: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    /// fixed-point iterations used by the last nonlinear substep
    pub last_iterations: usize,
    /// linear phase factors for the last substep length used
    phases: (f64, Vec<Complex64>),
}

const MAX_FIXED_POINT: usize = 100;

impl Propagator {
    pub fn new(spec: &KernelSpec, m: usize) -> Result<Self, SimError> {
        spec.validate()?;
        let n = grid_size(m);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ok(Propagator {
            m,
            n,
            kernel: spec.table(2 * m + 1),
            fwd,
            inv,
            buf: vec![ZERO; n],
            scratch: vec![ZERO; len],
            last_iterations: 0,
            phases: (f64::NAN, Vec::new()),
        })
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// u(x) on the grid x_l = 2 pi l / n.
    fn to_grid(&mut self, u: &FourierState) {
        self.buf.iter_mut().for_each(|z| *z = ZERO);
        for (k, a) in u.iter_modes() {
            let s = self.slot(k);
            self.buf[s] = a;
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    fn kernel_coeff(&self, k: i64) -> f64 {
        self.kernel[k.unsigned_abs() as usize]
    }

    /// Fourier coefficients V_n = K_n rho_n, |n| <= 2m, of V = K * |u|^2.
    pub fn potential_coeffs(&mut self, u: &FourierState) -> Vec<Complex64> {
        self.to_grid(u);
        for z in self.buf.iter_mut() {
            *z = Complex64::new(z.norm_sqr(), 0.0);
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        let mm = 2 * self.m as i64;
        (-mm..=mm).map(|k| self.buf[self.slot(k)] * scale * self.kernel_coeff(k)).collect()
    }

    /// V on the grid.
    pub fn potential_grid(&mut self, u: &FourierState) -> Vec<f64> {
        let coeffs = self.potential_coeffs(u);
        let mm = 2 * self.m as i64;
        self.buf.iter_mut().for_each(|z| *z = ZERO);
        for (i, k) in (-mm..=mm).enumerate() {
            let s = self.slot(k);
            self.buf[s] = coeffs[i];
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        self.buf.iter().map(|z| z.re).collect()
    }

    /// -2i P_M (V u): the quartic part of the Hamiltonian field, through the grid.
    pub fn nonlinear_rhs(&mut self, u: &FourierState) -> FourierState {
        let v = self.potential_grid(u);
        self.to_grid(u);
        for (z, vx) in self.buf.iter_mut().zip(&v) {
            *z *= *vx;
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        let mut out = FourierState::zeros(self.m);
        for k in -(self.m as i64)..=self.m as i64 {
            out.set(k, Complex64::new(0.0, -2.0 * scale) * self.buf[self.slot(k)]);
        }
        out
    }

    /// u_k <- e^{-i k^2 t} u_k.
    pub fn linear_step(&mut self, u: &mut FourierState, t: f64) {
        let m = self.m as i64;
        if self.phases.0 != t {
            self.phases = (t, (-m..=m).map(|k| phase_minus_one(-((k * k) as f64) * t)).collect());
        }
        for (k, z) in (-m..=m).zip(&self.phases.1) {
            u.set(k, rotate(u.get(k), *z));
        }
    }

    /// Cayley step (I - tL/2)^{-1} (I + tL/2) u with L = -2i [V_{j-k}], written as
    /// u + d with (I - tL/2) d = tL u so that rounding enters only through the small increment.
    fn cayley(&self, v: &[Complex64], u: &FourierState, t: f64) -> FourierState {
        let dim = 2 * self.m + 1;
        let mm = 2 * self.m as i64;
        let half = Complex64::new(0.0, -t);
        let mut l = DMatrix::<Complex64>::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                l[(r, c)] = half * v[(r as i64 - c as i64 + mm) as usize];
            }
        }
        let a = DMatrix::<Complex64>::identity(dim, dim) - &l;
        let x = DVector::from_column_slice(u.as_slice());
        let rhs = (&l * &x) * Complex64::new(2.0, 0.0);
        let lu = a.clone().lu();
        let mut d = lu.solve(&rhs).unwrap_or_else(|| rhs.clone());
        if let Some(c) = lu.solve(&(&rhs - &a * &d)) {
            d += c;
        }
        FourierState::from_vec(self.m, x.iter().zip(d.iter()).map(|(p, q)| p + q).collect())
    }

    /// Implicit midpoint for the quartic flow over time t.
    pub fn nonlinear_step(&mut self, u: &FourierState, t: f64) -> FourierState {
        if t == 0.0 {
            self.last_iterations = 0;
            return u.clone();
        }
        let mut next = u.clone();
        let mut prev_change = f64::INFINITY;
        for it in 1..=MAX_FIXED_POINT {
            let mid = u.add(&next).scale(Complex64::new(0.5, 0.0));
            let mut v = self.potential_coeffs(&mid);
            // exact Hermitian symmetry keeps the Cayley factor unitary in floating point
            let n = v.len();
            for i in 0..=n / 2 {
                let h = 0.5 * (v[i] + v[n - 1 - i].conj());
                v[i] = h;
                v[n - 1 - i] = h.conj();
            }
            let cand = self.cayley(&v, u, t);
            let change = cand.sub(&next).max_abs();
            next = cand;
            self.last_iterations = it;
            if change == 0.0 || change >= prev_change || change <= 1e-17 * next.max_abs() {
                break;
            }
            prev_change = change;
        }
        next
    }

    pub fn step(&mut self, u: &FourierState, dt: f64, scheme: Scheme) -> FourierState {
        match scheme {
            Scheme::Strang => {
                let mut w = self.nonlinear_step(u, 0.5 * dt);
                self.linear_step(&mut w, dt);
                self.nonlinear_step(&w, 0.5 * dt)
            }
            Scheme::Lie => {
                let mut w = u.clone();
                self.linear_step(&mut w, dt);
                self.nonlinear_step(&w, dt)
            }
        }
    }

    /// H = sum k^2 |u_k|^2 + sum_n K_n |rho_n|^2.
    pub fn hamiltonian(&mut self, u: &FourierState) -> f64 {
        let quad: f64 = u.iter_modes().map(|(k, a)| (k * k) as f64 * a.norm_sqr()).sum();
        let coeffs = self.potential_coeffs(u);
        let mm = 2 * self.m as i64;
        let quart: f64 = (-mm..=mm)
            .zip(&coeffs)
            .filter(|(k, _)| self.kernel_coeff(*k) != 0.0)
            .map(|(k, v)| v.norm_sqr() / self.kernel_coeff(k))
            .sum();
        quad + quart
    }
}

/// a e^{i theta} evaluated as a + a (e^{i theta} - 1), with `zm1` = e^{i theta} - 1.
/// For the small per-step angles of low modes the plain product rounds with a
/// consistent radial bias, which shows up as linear mass drift over long runs.
fn rotate(a: Complex64, zm1: Complex64) -> Complex64 {
    let dot = |x: f64, y: f64, v: f64, w: f64| {
        let (p, q) = (x * y, v * w);
        (p + q) + (x.mul_add(y, -p) + v.mul_add(w, -q))
    };
    let d = Complex64::new(dot(a.re, zm1.re, -a.im, zm1.im), dot(a.re, zm1.im, a.im, zm1.re));
    Complex64::new(a.re + d.re, a.im + d.im)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// e^{i theta} - 1 without cancellation, nudged so that |1 + z|^2 - 1 = 2x + x^2 + y^2
/// is as close to zero as doubles allow. The real part moves by up to 64 of its own
/// (tiny) ulps; the imaginary part, which carries the angle, by at most 2.
fn phase_minus_one(theta: f64) -> Complex64 {
    let h = (0.5 * theta).sin();
    let (x0, y0) = (-2.0 * h * h, theta.sin());
    let defect = |x: f64, y: f64| {
        let (x2, y2) = (x * x, y * y);
        let (s, e) = two_sum(2.0 * x, y2);
        s + (x2 + (e + x.mul_add(x, -x2) + y.mul_add(y, -y2)))
    };
    let mut best = (defect(x0, y0).abs(), Complex64::new(x0, y0));
    for y in [y0, y0.next_up(), y0.next_down(), y0.next_up().next_up(), y0.next_down().next_down()] {
        let (mut up, mut down) = (x0, x0);
        for _ in 0..64 {
            up = up.next_up();
            down = down.next_down();
            for x in [x0, up, down] {
                let d = defect(x, y).abs();
                if d < best.0 {
                    best = (d, Complex64::new(x, y));
                }
            }
        }
    }
    best.1
}

/// V = K * |u|^2 on the grid of size `grid_size(u.modes())`.
pub fn nonlinear_potential(u: &FourierState, spec: &KernelSpec) -> Result<Vec<f64>, SimError> {
    Ok(Propagator::new(spec, u.modes())?.potential_grid(u))
}

/// V_n = K_n sum_k u_{k+n} conj(u_k) for |n| <= 2M by direct summation.
pub fn potential_coeffs_direct(u: &FourierState, spec: &KernelSpec) -> Vec<Complex64> {
    let m = u.modes() as i64;
    (-2 * m..=2 * m)
        .map(|n| {
            let rho: Complex64 = (-m..=m).map(|k| u.get(k + n) * u.get(k).conj()).sum();
            rho * spec.coeff(n)
        })
        .collect()
}

/// -i dH4/d conj(u_j) from the quadruple sum over k1 + k2 = k3 + k4.
pub fn nonlinear_rhs_direct(u: &FourierState, spec: &KernelSpec) -> FourierState {
    let m = u.modes() as i64;
    let mut out = FourierState::zeros(u.modes());
    for j in -m..=m {
        let mut acc = ZERO;
        // terms with k3 = j and with k4 = j
        for k1 in -m..=m {
            for k2 in -m..=m {
                let k4 = k1 + k2 - j;
                if k4.abs() > m {
                    continue;
                }
                let p = u.get(k1) * u.get(k2) * u.get(k4).conj();
                acc += p * (spec.coeff(k1 - j) + spec.coeff(k1 - k4));
            }
        }
        out.set(j, Complex64::new(0.0, -1.0) * acc);
    }
    out
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrajectoryReport {
    pub times: Vec<f64>,
    pub l2_drift: Vec<f64>,
    pub h_drift: Vec<f64>,
    pub d_stat: Vec<f64>,
    pub norm_s: Vec<f64>,
    pub exit_flag: bool,
    pub exit_time: Option<f64>,
    /// max over observations of N_s(u(t)) / N_s(u(0))
    pub max_norm_ratio: f64,
    pub final_state: Vec<Complex64>,
}

impl TrajectoryReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "L2", "H", "D_stat", "norm_s"])?;
        for i in 0..self.times.len() {
            wr.write_record(&[
                format!("{:.17e}", self.times[i]),
                format!("{:.17e}", self.l2_drift[i]),
                format!("{:.17e}", self.h_drift[i]),
                format!("{:.17e}", self.d_stat[i]),
                format!("{:.17e}", self.norm_s[i]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// D(t) = sum_J e^{s f(J)} | |u_J(t)|^2 - |u_J(0)|^2 |^{1/2}.
pub fn bootstrap_statistic(u: &FourierState, u0: &FourierState, s: f64, f: &WeightFunction) -> f64 {
    u.iter_modes()
        .map(|(j, a)| (s * f.at_mode(j)).exp() * (a.norm_sqr() - u0.get(j).norm_sqr()).abs().sqrt())
        .sum()
}

pub fn evolve(
    u0: &FourierState,
    cfg: &SimConfig,
    spec: &KernelSpec,
    p: &NormParams,
    f: &WeightFunction,
) -> Result<TrajectoryReport, SimError> {
    cfg.validate()?;
    let u0 = u0.resized(cfg.m_sim);
    let mut prop = Propagator::new(spec, cfg.m_sim)?;
    let l2_0 = u0.mass();
    let h_0 = prop.hamiltonian(&u0);
    let n0 = weighted_norm(&u0, p, f);
    let threshold = n0.powf(1.5);
    let mut rep = TrajectoryReport { max_norm_ratio: 1.0, ..Default::default() };
    let mut u = u0.clone();
    let steps = cfg.steps();
    let observe = |rep: &mut TrajectoryReport, prop: &mut Propagator, u: &FourierState, step: u64| {
        let t = step as f64 * cfg.dt;
        let d = bootstrap_statistic(u, &u0, p.s, f);
        let ns = weighted_norm(u, p, f);
        rep.times.push(t);
        rep.l2_drift.push(u.mass() - l2_0);
        rep.h_drift.push(prop.hamiltonian(u) - h_0);
        rep.d_stat.push(d);
        rep.norm_s.push(ns);
        if n0 > 0.0 {
            rep.max_norm_ratio = rep.max_norm_ratio.max(ns / n0);
        }
        if !rep.exit_flag && d > threshold {
            rep.exit_flag = true;
            rep.exit_time = Some(t);
        }
    };
    observe(&mut rep, &mut prop, &u, 0);
    for step in 1..=steps {
        u = prop.step(&u, cfg.dt, cfg.scheme);
        if !u.is_finite() {
            return Err(SimError::StepUnstable { step });
        }
        if step % cfg.observer_stride == 0 || step == steps {
            observe(&mut rep, &mut prop, &u, step);
        }
    }
    rep.final_state = u.into_vec();
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberResult {
    pub index: usize,
    pub margin: f64,
    pub gated: bool,
    pub norm0: f64,
    pub max_norm_ratio: f64,
    pub max_d_ratio: f64,
    pub exit_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub count: usize,
    pub exits: usize,
    pub max_norm_ratio: f64,
    pub max_d_ratio: f64,
    pub exit_times: Vec<f64>,
    pub norm_ratios: Vec<f64>,
}

impl GroupSummary {
    fn of(members: &[&MemberResult]) -> Self {
        GroupSummary {
            count: members.len(),
            exits: members.iter().filter(|m| m.exit_time.is_some()).count(),
            max_norm_ratio: members.iter().map(|m| m.max_norm_ratio).fold(0.0, f64::max),
            max_d_ratio: members.iter().map(|m| m.max_d_ratio).fold(0.0, f64::max),
            exit_times: members.iter().filter_map(|m| m.exit_time).collect(),
            norm_ratios: members.iter().map(|m| m.max_norm_ratio).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub banner: String,
    pub radius: f64,
    pub threshold_gamma: f64,
    pub steps: u64,
    pub members: Vec<MemberResult>,
    pub gated: GroupSummary,
    pub ungated: GroupSummary,
}

pub const EXPERIMENT_BANNER: &str = "horizons are desk-scale; the stability times of the theory are far beyond reach, \
so only the bootstrap statistic on the simulated horizon is reported";

/// Samples `count` states of the ball, gates them by the non-resonance margin
/// at threshold 3 gamma and evolves each one.
pub fn run_stability_experiment(
    sampler: &BallSampler,
    count: usize,
    cfg: &SimConfig,
    spec: &KernelSpec,
    p: &NormParams,
    nr: &NonResonanceParams,
) -> Result<ExperimentSummary, SimError> {
    cfg.validate()?;
    let gate = NonResonanceParams { gamma: 3.0 * nr.gamma, ..*nr };
    let results: Vec<Result<MemberResult, SimError>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampler.stream(i as u64);
            let u0 = sampler.sample(&mut rng);
            let margin = nonresonance_margin(spec, &u0, &gate, p, &sampler.f)?;
            let rep = evolve(&u0, cfg, spec, p, &sampler.f)?;
            let norm0 = weighted_norm(&u0, p, &sampler.f);
            let lim = norm0.powf(1.5);
            let max_d = rep.d_stat.iter().fold(0.0, |a: f64, &b| a.max(b));
            Ok(MemberResult {
                index: i,
                margin,
                gated: margin > 0.0,
                norm0,
                max_norm_ratio: rep.max_norm_ratio,
                max_d_ratio: if lim > 0.0 { max_d / lim } else { 0.0 },
                exit_time: rep.exit_time,
            })
        })
        .collect();
    let members = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let gated: Vec<&MemberResult> = members.iter().filter(|m| m.gated).collect();
    let ungated: Vec<&MemberResult> = members.iter().filter(|m| !m.gated).collect();
    Ok(ExperimentSummary {
        banner: EXPERIMENT_BANNER.into(),
        radius: sampler.r,
        threshold_gamma: gate.gamma,
        steps: cfg.steps(),
        gated: GroupSummary::of(&gated),
        ungated: GroupSummary::of(&ungated),
        members,
    })
}

/// Random state with independent Gaussian coefficients, for tests and demos.
pub fn random_state<G: Rng + ?Sized>(m: usize, scale: f64, rng: &mut G) -> FourierState {
    use rand_distr::{Distribution, StandardNormal};
    let amps = (0..2 * m + 1)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * scale
        })
        .collect();
    FourierState::from_vec(m, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::build_hamiltonian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fft_potential_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 1..=8 {
            for spec in [KernelSpec::PowerLaw { p: 1 }, KernelSpec::Exponential { beta: 1.5 }] {
                let u = random_state(m, 0.3, &mut rng);
                let mut prop = Propagator::new(&spec, m).unwrap();
                let a = prop.potential_coeffs(&u);
                let b = potential_coeffs_direct(&u, &spec);
                let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                assert!(err < 1e-13, "m={m} {err}");
            }
        }
    }

    #[test]
    fn rhs_is_the_hamiltonian_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in [1, 3, 5] {
            let spec = KernelSpec::Exponential { beta: 1.2 };
            let u = random_state(m, 0.4, &mut rng);
            let h4 = build_hamiltonian(&spec, m).unwrap().layer(4);
            let want = h4.vector_field(&u);
            let fft = Propagator::new(&spec, m).unwrap().nonlinear_rhs(&u);
            let direct = nonlinear_rhs_direct(&u, &spec);
            assert!(fft.sub(&want).max_abs() < 1e-13);
            assert!(direct.sub(&want).max_abs() < 1e-13);
            let mut prop = Propagator::new(&spec, m).unwrap();
            let h = build_hamiltonian(&spec, m).unwrap().eval(&u).re;
            assert!((prop.hamiltonian(&u) - h).abs() < 1e-12 * h.abs().max(1.0));
        }
    }

    #[test]
    fn plane_wave_potentials() {
        let u = FourierState::single_mode(3, 2, Complex64::new(0.6, 0.0));
        let v = nonlinear_potential(&u, &KernelSpec::PowerLaw { p: 2 }).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-16));
        let spec = KernelSpec::Exponential { beta: 1.0 };
        let v = nonlinear_potential(&u, &spec).unwrap();
        assert!(v.iter().all(|x| (x - 0.36 * spec.coeff(0)).abs() < 1e-15));
    }

    #[test]
    fn dt_zero_is_identity_and_reversible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = KernelSpec::Exponential { beta: 1.2 };
        let u = random_state(4, 0.2, &mut rng);
        let mut prop = Propagator::new(&spec, 4).unwrap();
        assert_eq!(prop.step(&u, 0.0, Scheme::Strang), u);
        let fwd = prop.step(&u, 0.01, Scheme::Strang);
        let back = prop.step(&fwd, -0.01, Scheme::Strang);
        assert!(back.sub(&u).max_abs() < 1e-12);
        assert!((fwd.mass() - u.mass()).abs() < 1e-14 * u.mass());
    }

    #[test]
    fn strang_is_second_order_and_lie_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = KernelSpec::PowerLaw { p: 1 };
        let u0 = random_state(3, 0.3, &mut rng);
        let run = |scheme: Scheme, dt: f64| {
            let mut prop = Propagator::new(&spec, 3).unwrap();
            let mut u = u0.clone();
            for _ in 0..(0.5 / dt).round() as usize {
                u = prop.step(&u, dt, scheme);
            }
            u
        };
        let reference = run(Scheme::Strang, 1e-4);
        for (scheme, order) in [(Scheme::Strang, 2.0), (Scheme::Lie, 1.0)] {
            let e1 = run(scheme, 0.01).sub(&reference).max_abs();
            let e2 = run(scheme, 0.005).sub(&reference).max_abs();
            let rate = (e1 / e2).log2();
            assert!((rate - order).abs() < 0.3, "{scheme:?} rate {rate}");
        }
    }

    #[test]
    fn long_run_conserves_mass_to_roundoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = KernelSpec::Exponential { beta: 1.2 };
        let u0 = random_state(4, 0.2, &mut rng);
        let cfg = SimConfig { m_sim: 4, dt: 0.01, t_end: 20.0, scheme: Scheme::Strang, observer_stride: 100 };
        let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
        let p = NormParams { s: 0.2, s0: 0.1, r: 1.0 };
        let rep = evolve(&u0, &cfg, &spec, &p, &f).unwrap();
        let l2 = rep.l2_drift.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        let h = rep.h_drift.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        assert!(l2 < 1e-12 * u0.mass(), "{l2}");
        assert!(h < 1e-3, "{h}");
    }

    #[test]
    fn zero_data_has_no_exit() {
        let cfg = SimConfig { m_sim: 3, dt: 0.01, t_end: 1.0, scheme: Scheme::Strang, observer_stride: 10 };
        let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
        let p = NormParams { s: 0.2, s0: 0.1, r: 0.1 };
        let rep = evolve(&FourierState::zeros(3), &cfg, &KernelSpec::PowerLaw { p: 1 }, &p, &f).unwrap();
        assert!(!rep.exit_flag);
        assert!(rep.d_stat.iter().all(|&d| d == 0.0));
        assert_eq!(rep.times.len(), 11);
    }

    #[test]
    fn config_rejects_bad_values() {
        let cfg = SimConfig { m_sim: 3, dt: 0.0, t_end: 1.0, scheme: Scheme::Strang, observer_stride: 10 };
        assert!(cfg.validate().is_err());
        assert!(SimConfig { dt: 0.1, m_sim: 0, ..cfg }.validate().is_err());
    }
}
