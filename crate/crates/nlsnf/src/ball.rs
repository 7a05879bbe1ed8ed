//! Uniform sampling of the weighted l1 ball {sum_j e^{s f(<j>)} |u_j| <= r}.
//!
//! With t_j = e^{s f} |u_j| / r the ball is the simplex sum t_j <= 1 carrying
//! the area density prod t_j, so (t_1, ..., t_n, slack) is Dirichlet(2, ..., 2, 1).
//! Phases are independent and uniform.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::lattice::WeightFunction;
use crate::state::FourierState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSampler {
    pub m: usize,
    pub s: f64,
    pub f: WeightFunction,
    pub r: f64,
    pub seed: u64,
}

impl BallSampler {
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Independent stream for ensemble member `k`.
    pub fn stream(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng
    }

    pub fn weights(&self) -> Vec<f64> {
        (-(self.m as i64)..=self.m as i64).map(|j| (self.s * self.f.at_mode(j)).exp()).collect()
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> FourierState {
        sample_ball_with(self.m, &self.weights(), self.r, rng)
    }

    /// Uniform sample on the boundary sphere N_s(u) = r.
    pub fn sample_sphere<G: Rng + ?Sized>(&self, rng: &mut G) -> FourierState {
        sample_sphere_with(self.m, &self.weights(), self.r, rng)
    }
}

pub fn sample_ball(b: &BallSampler) -> FourierState {
    b.sample(&mut b.rng())
}

fn simplex_draw<G: Rng + ?Sized>(n: usize, with_slack: bool, rng: &mut G) -> Vec<f64> {
    let g2 = Gamma::new(2.0, 1.0).unwrap();
    let mut t: Vec<f64> = (0..n).map(|_| g2.sample(rng)).collect();
    let slack = if with_slack { -(1.0 - rng.random::<f64>()).ln() } else { 0.0 };
    let total: f64 = t.iter().sum::<f64>() + slack;
    for x in t.iter_mut() {
        *x /= total;
    }
    t
}

fn assemble<G: Rng + ?Sized>(m: usize, w: &[f64], r: f64, t: &[f64], rng: &mut G) -> FourierState {
    let phase = Uniform::new(0.0, std::f64::consts::TAU).unwrap();
    let amps = t
        .iter()
        .zip(w)
        .map(|(&ti, &wi)| Complex64::from_polar(r * ti / wi, phase.sample(rng)))
        .collect();
    FourierState::from_vec(m, amps)
}

pub fn sample_ball_with<G: Rng + ?Sized>(m: usize, w: &[f64], r: f64, rng: &mut G) -> FourierState {
    let t = simplex_draw(w.len(), true, rng);
    assemble(m, w, r, &t, rng)
}

pub fn sample_sphere_with<G: Rng + ?Sized>(m: usize, w: &[f64], r: f64, rng: &mut G) -> FourierState {
    let t = simplex_draw(w.len(), false, rng);
    assemble(m, w, r, &t, rng)
}
