//! Sampled versions of the Cauchy and Lie-bracket estimates for rational
//! Hamiltonians. Suprema are replaced by maxima over random states, so the
//! checks are statistical and carry a slack factor.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::{Algebra, CompiledRational};
use crate::ball::{sample_ball_with, sample_sphere_with};
use crate::lattice::{weighted_norm_with, NormKind, WeightFunction};
use crate::state::FourierState;

fn weights(m: usize, s: f64, f: &WeightFunction) -> Vec<f64> {
    (-(m as i64)..=m as i64).map(|j| (s * f.at_mode(j)).exp()).collect()
}

fn norm(u: &FourierState, s: f64, f: &WeightFunction) -> f64 {
    weighted_norm_with(u, s, f, NormKind::L1)
}

const ANGLES: usize = 64;

/// sup over N_s(h) = 1 of N_s(DX(u) h). The unit ball of the weighted l1 norm
/// has extreme points e^{i theta} e_j / w_j; theta is sampled on a fine grid.
pub fn jacobian_norm(q: &CompiledRational, alg: &Algebra, u: &FourierState, s: f64, f: &WeightFunction) -> f64 {
    let m = u.modes();
    let w = weights(m, s, f);
    let mut best: f64 = 0.0;
    for (k, j) in (-(m as i64)..=m as i64).enumerate() {
        let dir = |z: Complex64| {
            let mut h = FourierState::zeros(m);
            h.set(j, z / w[k]);
            q.jvp(alg, u, &h).1
        };
        let a = dir(Complex64::new(1.0, 0.0));
        let b = dir(Complex64::new(0.0, 1.0));
        for i in 0..ANGLES {
            let t = std::f64::consts::PI * i as f64 / ANGLES as f64;
            let v = a.scale(Complex64::new(t.cos(), 0.0)).add(&b.scale(Complex64::new(t.sin(), 0.0)));
            best = best.max(norm(&v, s, f));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CauchyReport {
    pub jacobian: f64,
    /// max of N_s(X_Q(u')) / (rho N_s(u)) over sampled u' with N_s(u' - u) = rho N_s(u)
    pub bound: f64,
}

pub fn cauchy_check<G: Rng + ?Sized>(
    q: &CompiledRational,
    alg: &Algebra,
    u: &FourierState,
    rho: f64,
    s: f64,
    f: &WeightFunction,
    samples: usize,
    rng: &mut G,
) -> CauchyReport {
    let m = u.modes();
    let w = weights(m, s, f);
    let nu = norm(u, s, f);
    let mut sup: f64 = 0.0;
    for _ in 0..samples {
        let v = u.add(&sample_sphere_with(m, &w, rho * nu, rng));
        sup = sup.max(norm(&q.vector_field(alg, &v), s, f));
    }
    CauchyReport { jacobian: jacobian_norm(q, alg, u, s, f), bound: sup / (rho * nu) }
}

/// Sampled |Q|_{[r,s,gamma]} = max N_s(X_Q(u)) / N_s(u) over states of the
/// ball with every denominator of Q above gamma N_s(u)^2; also returns the
/// number of admissible states seen.
pub fn sampled_rational_norm<G: Rng + ?Sized>(
    q: &CompiledRational,
    alg: &Algebra,
    r: f64,
    gamma: f64,
    s: f64,
    f: &WeightFunction,
    samples: usize,
    rng: &mut G,
) -> (f64, usize) {
    let m = alg.modes();
    let w = weights(m, s, f);
    let mut best: f64 = 0.0;
    let mut admitted = 0;
    for _ in 0..samples {
        let u = sample_ball_with(m, &w, r, rng);
        let nu = norm(&u, s, f);
        if q.min_denominator(alg, &u) <= gamma * nu * nu {
            continue;
        }
        admitted += 1;
        best = best.max(norm(&q.vector_field(alg, &u), s, f) / nu);
    }
    (best, admitted)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LieReport {
    /// sampled |{Q1,Q2}|_{[r,s,gamma]}
    pub bracket: f64,
    /// (2 + 2 rho) / rho |Q1| |Q2| with sampled norms at radius r (1 + rho) and gamma'
    pub bound: f64,
    pub admitted: usize,
}

/// `bracket` is the compiled {Q1, Q2}.
pub fn lie_bracket_check<G: Rng + ?Sized>(
    q1: &CompiledRational,
    q2: &CompiledRational,
    bracket: &CompiledRational,
    alg: &Algebra,
    r: f64,
    rho: f64,
    gamma: f64,
    gamma_prime: f64,
    s: f64,
    f: &WeightFunction,
    samples: usize,
    rng: &mut G,
) -> LieReport {
    let (b, admitted) = sampled_rational_norm(bracket, alg, r, gamma, s, f, samples, rng);
    let (n1, _) = sampled_rational_norm(q1, alg, r * (1.0 + rho), gamma_prime, s, f, samples, rng);
    let (n2, _) = sampled_rational_norm(q2, alg, r * (1.0 + rho), gamma_prime, s, f, samples, rng);
    LieReport { bracket: b, bound: (2.0 + 2.0 * rho) / rho * n1 * n2, admitted }
}
