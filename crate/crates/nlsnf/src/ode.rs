//! Adaptive Dormand-Prince 5(4) for complex-valued systems.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-15, h0: 1e-2, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeFailure<E> {
    Field(E),
    StepLimit { t: f64 },
    StepTooSmall { t: f64 },
    NonFinite { t: f64 },
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates y' = f(t, y) from t0 to t1 (either direction).
pub fn integrate<E, F>(
    mut f: F,
    y0: &[Complex64],
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<Vec<Complex64>, OdeFailure<E>>
where
    F: FnMut(f64, &[Complex64]) -> Result<Vec<Complex64>, E>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut h = opts.h0.min(span);
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    k[0] = f(t, &y).map_err(OdeFailure::Field)?;
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..opts.max_steps {
        let left = (t1 - t).abs();
        if left <= 1e-15 * span.max(1.0) {
            return Ok(y);
        }
        if h >= left {
            h = left;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        acc += kj[i] * A[s][j];
                    }
                }
                tmp[i] = y[i] + acc * (dir * h);
            }
            k[s] = f(t + dir * h * C[s], &tmp).map_err(OdeFailure::Field)?;
        }
        // tmp now holds the 5th-order solution (FSAL stage)
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                e += k[s][i] * (B5[s] - B4[s]);
            }
            let e = (e * h).norm();
            let sc = opts.atol + opts.rtol * y[i].norm().max(tmp[i].norm());
            err = err.max(e / sc);
        }
        if !err.is_finite() {
            return Err(OdeFailure::NonFinite { t });
        }
        if err <= 1.0 {
            t += dir * h;
            y.copy_from_slice(&tmp);
            if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(OdeFailure::NonFinite { t });
            }
            k.swap(0, 6);
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < 1e-14 * span {
            return Err(OdeFailure::StepTooSmall { t });
        }
    }
    Err(OdeFailure::StepLimit { t })
}
