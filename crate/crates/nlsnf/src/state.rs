//! Dense Fourier amplitudes on modes -M..=M.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierState {
    m: usize,
    amps: Vec<Complex64>,
}

impl FourierState {
    pub fn zeros(m: usize) -> Self {
        FourierState { m, amps: vec![Complex64::new(0.0, 0.0); 2 * m + 1] }
    }

    /// `amps[k]` is the amplitude of mode `k - m`.
    pub fn from_vec(m: usize, amps: Vec<Complex64>) -> Self {
        assert_eq!(amps.len(), 2 * m + 1, "expected {} amplitudes", 2 * m + 1);
        FourierState { m, amps }
    }

    pub fn single_mode(m: usize, j: i64, a: Complex64) -> Self {
        let mut u = FourierState::zeros(m);
        u.set(j, a);
        u
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.amps
    }

    /// Amplitude of mode j, zero outside the support.
    pub fn get(&self, j: i64) -> Complex64 {
        if j.unsigned_abs() as usize > self.m {
            Complex64::new(0.0, 0.0)
        } else {
            self.amps[(j + self.m as i64) as usize]
        }
    }

    pub fn set(&mut self, j: i64, a: Complex64) {
        assert!(j.unsigned_abs() as usize <= self.m, "mode {j} outside |j| <= {}", self.m);
        self.amps[(j + self.m as i64) as usize] = a;
    }

    pub fn iter_modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let m = self.m as i64;
        self.amps.iter().enumerate().map(move |(k, &z)| (k as i64 - m, z))
    }

    pub fn actions(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn mass(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn add(&self, other: &FourierState) -> FourierState {
        let m = self.m.max(other.m);
        let mut out = FourierState::zeros(m);
        for j in -(m as i64)..=m as i64 {
            out.set(j, self.get(j) + other.get(j));
        }
        out
    }

    pub fn axpy(&mut self, a: Complex64, x: &FourierState) {
        assert_eq!(self.m, x.m);
        for (y, xi) in self.amps.iter_mut().zip(&x.amps) {
            *y += a * xi;
        }
    }

    pub fn scale(&self, a: Complex64) -> FourierState {
        FourierState { m: self.m, amps: self.amps.iter().map(|z| z * a).collect() }
    }

    pub fn sub(&self, other: &FourierState) -> FourierState {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Plain l2 norm of the amplitude vector.
    pub fn l2(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.amps.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Same amplitudes on a wider (or narrower, dropping modes) support.
    pub fn resized(&self, m: usize) -> FourierState {
        let mut out = FourierState::zeros(m);
        for j in -(m as i64)..=m as i64 {
            out.amps[(j + m as i64) as usize] = self.get(j);
        }
        out
    }

    /// u_j -> e^{i theta_j} u_j
    pub fn rotate(&self, theta: &[f64]) -> FourierState {
        let amps = self
            .amps
            .iter()
            .zip(theta)
            .map(|(z, &t)| z * Complex64::from_polar(1.0, t))
            .collect();
        FourierState { m: self.m, amps }
    }
}
