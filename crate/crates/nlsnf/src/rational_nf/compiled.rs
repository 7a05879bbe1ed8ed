//! Flat form of a rational Hamiltonian for repeated evaluation, with an exact
//! forward-mode directional derivative of the vector field.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::algebra::{Algebra, RationalHamiltonian};
use crate::poly::key::{var_mode, var_sign};
use crate::poly::{MAX_MODE, NUM_VARS};
use crate::state::FourierState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Value and derivative along one direction.
#[derive(Clone, Copy, Debug, Default)]
struct Jet {
    v: Complex64,
    d: Complex64,
}

impl Jet {
    const ONE: Jet = Jet { v: Complex64::new(1.0, 0.0), d: ZERO };

    fn powu(self, e: u32) -> Jet {
        if e == 0 {
            return Jet::ONE;
        }
        let p = self.v.powu(e - 1);
        Jet { v: p * self.v, d: p * self.d * e as f64 }
    }

    fn scale(self, c: Complex64) -> Jet {
        Jet { v: self.v * c, d: self.d * c }
    }

    /// self / r for a real jet r.
    fn over(self, r: (f64, f64)) -> Jet {
        let v = self.v / r.0;
        Jet { v, d: (self.d - v * r.1) / r.0 }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet { v: self.v * o.v, d: self.v * o.d + self.d * o.v }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledRational {
    coeffs: Vec<Complex64>,
    var_start: Vec<u32>,
    vars: Vec<(u8, u8)>,
    den_start: Vec<u32>,
    dens: Vec<u32>,
    used: Vec<bool>,
    sites: usize,
}

impl CompiledRational {
    pub fn new(q: &RationalHamiltonian, alg: &Algebra) -> Self {
        let terms = q.sorted_terms();
        let mut out = CompiledRational {
            coeffs: Vec::with_capacity(terms.len()),
            var_start: vec![0],
            vars: Vec::new(),
            den_start: vec![0],
            dens: Vec::new(),
            used: vec![false; alg.num_denominators()],
            sites: alg.model.n(),
        };
        for (k, d, c) in terms {
            out.coeffs.push(c);
            out.vars.extend(k.vars().map(|(v, e)| (v as u8, e)));
            out.var_start.push(out.vars.len() as u32);
            for &id in d.ids() {
                out.used[id as usize] = true;
            }
            out.dens.extend_from_slice(d.ids());
            out.den_start.push(out.dens.len() as u32);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Smallest |omega_h(u)| over the denominators that occur.
    pub fn min_denominator(&self, alg: &Algebra, u: &FourierState) -> f64 {
        alg.omegas(u)
            .iter()
            .zip(&self.used)
            .filter(|(_, u)| **u)
            .fold(f64::INFINITY, |m, (w, _)| m.min(w.abs()))
    }

    pub fn eval(&self, alg: &Algebra, u: &FourierState) -> Complex64 {
        let om = alg.omegas(u);
        let x = crate::poly::ext_vars(u);
        let mut s = ZERO;
        for t in 0..self.coeffs.len() {
            let mut v = self.coeffs[t];
            for &(var, e) in &self.vars[self.var_start[t] as usize..self.var_start[t + 1] as usize] {
                v *= x[var as usize].powu(e as u32);
            }
            for &id in &self.dens[self.den_start[t] as usize..self.den_start[t + 1] as usize] {
                v /= om[id as usize];
            }
            s += v;
        }
        s
    }

    pub fn vector_field(&self, alg: &Algebra, u: &FourierState) -> FourierState {
        self.field_jet(alg, u, None).0
    }

    /// X(u) and the exact directional derivative DX(u)[w].
    pub fn jvp(&self, alg: &Algebra, u: &FourierState, w: &FourierState) -> (FourierState, FourierState) {
        self.field_jet(alg, u, Some(w))
    }

    fn field_jet(&self, alg: &Algebra, u: &FourierState, w: Option<&FourierState>) -> (FourierState, FourierState) {
        let m = u.modes() as i64;
        let mm = alg.modes() as i64;
        let xv = crate::poly::ext_vars(u);
        let xd = match w {
            Some(w) => crate::poly::ext_vars(w),
            None => vec![ZERO; NUM_VARS],
        };
        let x: Vec<Jet> = xv.iter().zip(&xd).map(|(&v, &d)| Jet { v, d }).collect();
        // omega and its derivative along w
        let n = self.sites;
        let mut act = vec![0.0; n];
        let mut dact = vec![0.0; n];
        for j in -mm..=mm {
            let a = u.get(j);
            act[(j + mm) as usize] = a.norm_sqr();
            if let Some(w) = w {
                dact[(j + mm) as usize] = 2.0 * (a.conj() * w.get(j)).re;
            }
        }
        let om: Vec<(f64, f64)> = (0..alg.num_denominators() as u32)
            .map(|id| {
                let b = alg.bvec(id);
                // omega_h = <c_h, A I> = <A c_h, I> as A is symmetric
                let v = b.iter().zip(&act).map(|(b, a)| b * a).sum();
                let d = b.iter().zip(&dact).map(|(b, a)| b * a).sum();
                (v, d)
            })
            .collect();
        let mut g = vec![Jet::default(); NUM_VARS];
        let mut dsite = vec![Jet::default(); n];
        let mut pw = [Jet::default(); 64];
        let mut suffix = [Jet::default(); 65];
        for t in 0..self.coeffs.len() {
            let vars = &self.vars[self.var_start[t] as usize..self.var_start[t + 1] as usize];
            let dens = &self.dens[self.den_start[t] as usize..self.den_start[t + 1] as usize];
            let mut cd = Jet { v: self.coeffs[t], d: ZERO };
            for &id in dens {
                cd = cd.over(om[id as usize]);
            }
            let nv = vars.len();
            for (i, &(v, e)) in vars.iter().enumerate() {
                pw[i] = x[v as usize].powu(e as u32);
            }
            suffix[nv] = Jet::ONE;
            for i in (0..nv).rev() {
                suffix[i] = suffix[i + 1] * pw[i];
            }
            let mut prefix = cd;
            for (i, &(v, e)) in vars.iter().enumerate() {
                let v = v as usize;
                if var_sign(v) == -1 {
                    let dx = x[v].powu(e as u32 - 1).scale(Complex64::new(e as f64, 0.0));
                    g[v] = g[v] + prefix * dx * suffix[i + 1];
                }
                prefix = prefix * pw[i];
            }
            if !dens.is_empty() {
                let uval = cd * suffix[0];
                for &id in dens {
                    let wj = uval.over(om[id as usize]);
                    for (s, b) in dsite.iter_mut().zip(alg.bvec(id)) {
                        *s = *s - wj.scale(Complex64::new(*b, 0.0));
                    }
                }
            }
        }
        let mut out = FourierState::zeros(u.modes());
        let mut dout = FourierState::zeros(u.modes());
        let mi = Complex64::new(0.0, -1.0);
        for j in -m..=m {
            let vminus = 2 * (j + MAX_MODE as i64) as usize + 1;
            debug_assert_eq!(var_mode(vminus), j);
            let mut dq = g[vminus];
            if j.abs() <= mm {
                let uj = Jet { v: u.get(j), d: w.map(|w| w.get(j)).unwrap_or(ZERO) };
                dq = dq + dsite[(j + mm) as usize] * uj;
            }
            out.set(j, mi * dq.v);
            dout.set(j, mi * dq.d);
        }
        (out, dout)
    }
}

/// X_{{F,G}}(u) = DX_F(u)[X_G(u)] - DX_G(u)[X_F(u)], exactly.
pub fn bracket_field_exact(f: &CompiledRational, g: &CompiledRational, alg: &Algebra, u: &FourierState) -> FourierState {
    let xf = f.vector_field(alg, u);
    let xg = g.vector_field(alg, u);
    let (_, a) = f.jvp(alg, u, &xg);
    let (_, b) = g.jvp(alg, u, &xf);
    a.sub(&b)
}
