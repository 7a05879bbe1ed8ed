//! Polynomial Hamiltonians in the variables u_{(j, sigma)}: Poisson brackets,
//! vector fields, evaluation, norms and mode truncation.
//!
//! Coefficients are generic over the real field `R` so that the same algebra
//! runs in double precision and over exact rationals.

mod hamiltonian;
pub mod key;
mod norms;

use std::collections::BTreeMap;
use std::fmt::{Debug, Write as _};
use std::ops::Neg;

use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::lattice::{Index, MultiIndex};
use crate::state::FourierState;

pub use hamiltonian::{build_hamiltonian, h0, k2, quartic_quadruple_sum, QUARTIC_SCALE};
pub use key::{Key, MAX_MODE, NUM_VARS};
pub use norms::{
    certified_norm, lie_delta, majorant_norm, norm_bound, sampled_norm, truncation_tail_bound, NormReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("mode {0} exceeds the supported range |j| <= {MAX_MODE}")]
    ModeOutOfRange(i32),
    #[error("exponent overflow in monomial product (degree too large)")]
    ExponentOverflow,
    #[error("weight scale s = {s} must exceed s0 = {s0}")]
    Scale { s: f64, s0: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Real field for coefficients.
pub trait Scalar: Clone + Send + Sync + Debug + PartialEq + Num + Neg<Output = Self> + 'static {
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        <BigRational as FromPrimitive>::from_i64(v).unwrap()
    }
    fn to_f64(&self) -> f64 {
        <BigRational as ToPrimitive>::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[inline]
fn times_neg_i<R: Scalar>(c: Complex<R>) -> Complex<R> {
    Complex::new(c.im, -c.re)
}

#[inline]
fn times_i<R: Scalar>(c: Complex<R>) -> Complex<R> {
    Complex::new(-c.im, c.re)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GPoly<R: Scalar> {
    terms: FxHashMap<Key, Complex<R>>,
}

pub type Poly = GPoly<f64>;
pub type ExactPoly = GPoly<BigRational>;

impl<R: Scalar> Default for GPoly<R> {
    fn default() -> Self {
        GPoly { terms: FxHashMap::default() }
    }
}

/// Result of a bracket with a degree cutoff.
#[derive(Clone, Debug)]
pub struct Split<R: Scalar> {
    pub kept: GPoly<R>,
    pub overflow: GPoly<R>,
}

const CHUNK: usize = 64;

impl<R: Scalar> GPoly<R> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, key: Key, c: Complex<R>) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(key) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                let v = e.get().clone() + c;
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn add_monomial(&mut self, jm: &MultiIndex, c: Complex<R>) -> Result<(), PolyError> {
        let key = key_of(jm.entries())?;
        self.add_term(key, c);
        Ok(())
    }

    pub fn monomial(jm: &MultiIndex, c: Complex<R>) -> Result<Self, PolyError> {
        let mut p = Self::new();
        p.add_monomial(jm, c)?;
        Ok(p)
    }

    pub fn get(&self, key: &Key) -> Complex<R> {
        self.terms.get(key).cloned().unwrap_or_else(Complex::zero)
    }

    pub fn coeff(&self, jm: &MultiIndex) -> Complex<R> {
        match key_of(jm.entries()) {
            Ok(k) => self.get(&k),
            Err(_) => Complex::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Complex<R>)> {
        self.terms.iter()
    }

    /// Terms sorted by raw key; the order used for deterministic reductions.
    pub fn sorted_terms(&self) -> Vec<(Key, Complex<R>)> {
        let mut v: Vec<(Key, Complex<R>)> = self.terms.iter().map(|(k, c)| (*k, c.clone())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Terms in canonical order: degree, then entries lexicographically.
    pub fn canonical_terms(&self) -> Vec<(MultiIndex, Complex<R>)> {
        let mut v: Vec<((u32, Vec<Index>), Complex<R>)> =
            self.terms.iter().map(|(k, c)| (k.order_key(), c.clone())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.into_iter()
            .filter_map(|((_, ix), c)| MultiIndex::new(ix).ok().map(|m| (m, c)))
            .collect()
    }

    pub fn add_assign(&mut self, other: &GPoly<R>) {
        for (k, c) in other.sorted_terms() {
            self.add_term(k, c);
        }
    }

    pub fn add_scaled(&mut self, other: &GPoly<R>, s: &Complex<R>) {
        for (k, c) in other.sorted_terms() {
            self.add_term(k, c * s.clone());
        }
    }

    pub fn plus(&self, other: &GPoly<R>) -> GPoly<R> {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn minus(&self, other: &GPoly<R>) -> GPoly<R> {
        let mut out = self.clone();
        out.add_scaled(other, &Complex::new(-R::one(), R::zero()));
        out
    }

    pub fn scaled(&self, s: &Complex<R>) -> GPoly<R> {
        let mut out = GPoly::new();
        out.add_scaled(self, s);
        out
    }

    pub fn filter(&self, mut keep: impl FnMut(&Key) -> bool) -> GPoly<R> {
        GPoly { terms: self.terms.iter().filter(|(k, _)| keep(k)).map(|(k, c)| (*k, c.clone())).collect() }
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(&Key, &Complex<R>) -> Complex<R>) -> GPoly<R> {
        let mut out = GPoly::new();
        for (k, c) in self.sorted_terms() {
            let v = f(&k, &c);
            out.add_term(k, v);
        }
        out
    }

    pub fn degree_range(&self) -> Option<(u32, u32)> {
        let mut it = self.terms.keys().map(|k| k.degree());
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    /// Homogeneous layer of the given degree.
    pub fn layer(&self, deg: u32) -> GPoly<R> {
        self.filter(|k| k.degree() == deg)
    }

    pub fn layers(&self) -> BTreeMap<u32, GPoly<R>> {
        let mut out: BTreeMap<u32, GPoly<R>> = BTreeMap::new();
        for (k, c) in self.terms.iter() {
            out.entry(k.degree()).or_default().terms.insert(*k, c.clone());
        }
        out
    }

    /// Drops every term containing an entry with |j| > m.
    pub fn truncate_modes(&self, m: u32) -> GPoly<R> {
        self.filter(|k| k.max_mode() <= m)
    }

    /// Minimum over terms of the number of entries with |j| > n;
    /// `u32::MAX` for the zero polynomial.
    pub fn high_vanishing_order(&self, n: u32) -> u32 {
        self.terms.keys().map(|k| k.high_count(n)).min().unwrap_or(u32::MAX)
    }

    pub fn is_momentum_conserving(&self) -> bool {
        self.terms.keys().all(|k| k.momentum() == 0)
    }

    /// coefficient(conj J) == conj(coefficient(J)) for every term.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(k, c)| self.get(&k.conjugate()) == c.conj())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.re.to_f64().hypot(c.im.to_f64()))
            .fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> Poly {
        let mut out = Poly::new();
        for (k, c) in self.sorted_terms() {
            out.add_term(k, Complex64::new(c.re.to_f64(), c.im.to_f64()));
        }
        out
    }

    /// {self, u_J} coefficient-wise: i E(J) c_J, valid because H0 is diagonal.
    pub fn h0_bracket(&self) -> GPoly<R> {
        self.map_coeffs(|k, c| times_i(c.clone()) * Complex::new(R::from_i64(k.energy()), R::zero()))
    }

    /// Poisson bracket {self, other} with no degree cutoff.
    pub fn bracket(&self, other: &GPoly<R>) -> Result<GPoly<R>, PolyError> {
        Ok(self.bracket_cut(other, u32::MAX)?.kept)
    }

    /// Poisson bracket; result terms above `cut` go to `overflow`.
    ///
    /// {P,Q} = -i sum_{(j,sigma)} sigma dP/du_{(j,sigma)} dQ/du_{(j,-sigma)}.
    pub fn bracket_cut(&self, other: &GPoly<R>, cut: u32) -> Result<Split<R>, PolyError> {
        let p = self.sorted_terms();
        let q = other.sorted_terms();
        let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); NUM_VARS];
        for (i, (k, _)) in q.iter().enumerate() {
            for (v, _) in k.vars() {
                by_var[v].push(i);
            }
        }
        let partial: Vec<Result<FxHashMap<Key, Complex<R>>, PolyError>> = p
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc: FxHashMap<Key, Complex<R>> = FxHashMap::default();
                for (ka, ca) in chunk {
                    for (v, av) in ka.vars() {
                        let w = key::conj_var(v);
                        if by_var[w].is_empty() {
                            continue;
                        }
                        let ka1 = ka.dec(v);
                        let base = times_neg_i(ca.clone())
                            * Complex::new(R::from_i64(key::var_sign(v) * av as i64), R::zero());
                        for &qi in &by_var[w] {
                            let (kb, cb) = &q[qi];
                            let bw = kb.exp(w) as i64;
                            let nk = ka1.checked_add(&kb.dec(w)).ok_or(PolyError::ExponentOverflow)?;
                            let c = base.clone() * cb.clone() * Complex::new(R::from_i64(bw), R::zero());
                            let e = acc.entry(nk).or_insert_with(Complex::zero);
                            *e = std::mem::replace(e, Complex::zero()) + c;
                        }
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut kept = GPoly::new();
        let mut overflow = GPoly::new();
        for part in partial {
            let part = part?;
            let mut entries: Vec<(Key, Complex<R>)> = part.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            for (k, c) in entries {
                if k.degree() > cut {
                    overflow.add_term(k, c);
                } else {
                    kept.add_term(k, c);
                }
            }
        }
        Ok(Split { kept, overflow })
    }

    /// Canonical text dump: `sigma j ... : re im` per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (jm, c) in self.canonical_terms() {
            for (i, e) in jm.entries().iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{e}");
            }
            let _ = writeln!(s, " : {:.17e} {:.17e}", c.re.to_f64(), c.im.to_f64());
        }
        s
    }
}

impl Poly {
    /// Exact rational copy of the double-precision coefficients.
    pub fn to_exact(&self) -> ExactPoly {
        let mut out = ExactPoly::new();
        for (k, c) in self.sorted_terms() {
            let re = BigRational::from_float(c.re).expect("finite coefficient");
            let im = BigRational::from_float(c.im).expect("finite coefficient");
            out.add_term(k, Complex::new(re, im));
        }
        out
    }

    /// Drops coefficients with modulus below `tol`.
    pub fn prune(&self, tol: f64) -> Poly {
        GPoly { terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(k, c)| (*k, *c)).collect() }
    }

    pub fn compile(&self) -> Compiled {
        Compiled::new(self)
    }

    /// Value at a physical state.
    pub fn eval(&self, u: &FourierState) -> Complex64 {
        self.compile().eval(&ext_vars(u))
    }

    /// Hamiltonian field at a physical state: X_j = -i dP/du_{(j,-)}.
    pub fn vector_field(&self, u: &FourierState) -> FourierState {
        self.compile().vector_field(u)
    }
}

pub fn key_of(ix: &[Index]) -> Result<Key, PolyError> {
    for i in ix {
        if i.j.abs() > MAX_MODE {
            return Err(PolyError::ModeOutOfRange(i.j));
        }
    }
    Key::from_indices(ix).ok_or(PolyError::ExponentOverflow)
}

/// Variable values x_{(j,+)} = u_j, x_{(j,-)} = conj(u_j).
pub fn ext_vars(u: &FourierState) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); NUM_VARS];
    for (j, z) in u.iter_modes() {
        if j.unsigned_abs() as i32 <= MAX_MODE {
            let v = 2 * (j + MAX_MODE as i64) as usize;
            x[v] = z;
            x[v + 1] = z.conj();
        }
    }
    x
}

/// Flat term list for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct Compiled {
    coeffs: Vec<Complex64>,
    starts: Vec<usize>,
    vars: Vec<(u16, u8)>,
}

impl Compiled {
    pub fn new(p: &Poly) -> Self {
        let mut coeffs = Vec::with_capacity(p.len());
        let mut starts = vec![0];
        let mut vars = Vec::new();
        for (k, c) in p.sorted_terms() {
            coeffs.push(c);
            vars.extend(k.vars().map(|(v, e)| (v as u16, e)));
            starts.push(vars.len());
        }
        Compiled { coeffs, starts, vars }
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (t, c) in self.coeffs.iter().enumerate() {
            let mut m = *c;
            for &(v, e) in &self.vars[self.starts[t]..self.starts[t + 1]] {
                m *= x[v as usize].powu(e as u32);
            }
            s += m;
        }
        s
    }

    /// All partial derivatives dP/dx_v.
    pub fn gradient(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(0.0, 0.0); NUM_VARS];
        let mut pw: Vec<Complex64> = Vec::with_capacity(16);
        let mut suffix: Vec<Complex64> = Vec::with_capacity(17);
        for (t, c) in self.coeffs.iter().enumerate() {
            let vs = &self.vars[self.starts[t]..self.starts[t + 1]];
            pw.clear();
            pw.extend(vs.iter().map(|&(v, e)| x[v as usize].powu(e as u32)));
            suffix.clear();
            suffix.resize(vs.len() + 1, Complex64::new(1.0, 0.0));
            for i in (0..vs.len()).rev() {
                suffix[i] = suffix[i + 1] * pw[i];
            }
            let mut prefix = *c;
            for (i, &(v, e)) in vs.iter().enumerate() {
                let d = x[v as usize].powu(e as u32 - 1) * e as f64;
                g[v as usize] += prefix * d * suffix[i + 1];
                prefix *= pw[i];
            }
        }
        g
    }

    /// Extended field (X)_{(j,sigma)} = -sigma i dP/dx_{(j,-sigma)}.
    pub fn vector_field_ext(&self, x: &[Complex64]) -> Vec<Complex64> {
        let g = self.gradient(x);
        (0..NUM_VARS)
            .map(|v| {
                let s = key::var_sign(v) as f64;
                Complex64::new(0.0, -s) * g[key::conj_var(v)]
            })
            .collect()
    }

    pub fn vector_field(&self, u: &FourierState) -> FourierState {
        let g = self.gradient(&ext_vars(u));
        let m = u.modes();
        let mut out = FourierState::zeros(m);
        for j in -(m as i64)..=m as i64 {
            if j.unsigned_abs() as i32 <= MAX_MODE {
                let v = 2 * (j + MAX_MODE as i64) as usize + 1;
                out.set(j, Complex64::new(0.0, -1.0) * g[v]);
            }
        }
        out
    }
}
