//! Rational terms c u_J prod_a 1/omega_{h_a}(u) whose denominators are linear
//! in the actions, and their exact Poisson algebra.
//!
//! A denominator is stored by its charge vector c_j = #(j,+) - #(j,-), sign
//! normalized so the first nonzero entry is positive; omega_h = c . (A I).
//! Since functions of the actions commute,
//!
//!   {u_J, 1/omega_g} = i <c_J, A c_g> u_J / omega_g^2,
//!
//! and the bracket of two rational terms follows from Leibniz.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::compiled::CompiledRational;
use super::RationalError;
use crate::kernel::KernelSpec;
use crate::lattice::{Index, MultiIndex};
use crate::poly::key::{conj_var, var_mode, var_sign};
use crate::poly::{Key, Poly, NUM_VARS};
use crate::state::FourierState;

pub const MAX_DEN: usize = 8;

/// Sorted multiset of denominator ids.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Denoms {
    ids: [u32; MAX_DEN],
    len: u8,
}

impl Denoms {
    pub const EMPTY: Denoms = Denoms { ids: [0; MAX_DEN], len: 0 };

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids[..self.len as usize]
    }

    pub fn with(&self, id: u32) -> Option<Denoms> {
        if self.len() == MAX_DEN {
            return None;
        }
        let mut out = *self;
        let mut pos = self.len();
        while pos > 0 && out.ids[pos - 1] > id {
            out.ids[pos] = out.ids[pos - 1];
            pos -= 1;
        }
        out.ids[pos] = id;
        out.len += 1;
        Some(out)
    }

    pub fn without(&self, id: u32) -> Option<Denoms> {
        let pos = self.ids().iter().position(|&x| x == id)?;
        let mut out = *self;
        out.ids.copy_within(pos + 1..self.len(), pos);
        out.len -= 1;
        out.ids[out.len as usize] = 0;
        Some(out)
    }

    pub fn merge(&self, other: &Denoms) -> Option<Denoms> {
        let mut out = *self;
        for &id in other.ids() {
            out = out.with(id)?;
        }
        Some(out)
    }

    /// Distinct ids with multiplicities.
    pub fn grouped(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::new();
        for &id in self.ids() {
            match out.last_mut() {
                Some((last, mult)) if *last == id => *mult += 1,
                _ => out.push((id, 1)),
            }
        }
        out
    }
}

/// Site frequencies Omega = A I of an action quartic.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqModel {
    m: usize,
    a: Vec<f64>,
}

impl FreqModel {
    pub fn n(&self) -> usize {
        2 * self.m + 1
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    /// A_{jk} = 2 K_{|j-k|}, the matrix of sum_{k1,k2} K_{|k1-k2|} I_{k1} I_{k2}.
    pub fn from_kernel(spec: &KernelSpec, m: usize) -> Self {
        let n = 2 * m + 1;
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                a[j * n + k] = 2.0 * spec.coeff(j as i64 - k as i64);
            }
        }
        FreqModel { m, a }
    }

    /// Matrix of an action-type quartic sum c_ab I_a I_b: A_ab = c_ab off the
    /// diagonal and 2 c_aa on it.
    pub fn from_action_quartic(q: &Poly, m: usize) -> Result<Self, RationalError> {
        let n = 2 * m + 1;
        let mut a = vec![0.0; n * n];
        for (k, c) in q.sorted_terms() {
            if k.degree() != 4 || !k.is_action_type() {
                return Err(RationalError::NotActionQuartic(format!("{k:?}")));
            }
            if c.im.abs() > 1e-12 * c.norm().max(1.0) {
                return Err(RationalError::NotActionQuartic(format!("complex coefficient at {k:?}")));
            }
            let sites: Vec<usize> = k
                .vars()
                .filter(|(v, _)| var_sign(*v) == 1)
                .flat_map(|(v, e)| std::iter::repeat_n(v, e as usize))
                .map(|v| {
                    let j = var_mode(v);
                    if j.unsigned_abs() as usize > m {
                        Err(RationalError::ModeOutOfRange(j))
                    } else {
                        Ok((j + m as i64) as usize)
                    }
                })
                .collect::<Result<_, _>>()?;
            let (x, y) = (sites[0], sites[1]);
            if x == y {
                a[x * n + x] += 2.0 * c.re;
            } else {
                a[x * n + y] += c.re;
                a[y * n + x] += c.re;
            }
        }
        Ok(FreqModel { m, a })
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.a[j * self.n() + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|j| (0..n).map(|k| self.a[j * n + k] * c[k]).sum()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n).map(|k| (0..n).map(|j| self.a[j * n + k]).collect()).collect()
    }

    /// (A I)_j for |j| <= m.
    pub fn site_freqs(&self, u: &FourierState) -> Vec<f64> {
        let act: Vec<f64> = (-(self.m as i64)..=self.m as i64).map(|j| u.get(j).norm_sqr()).collect();
        self.apply(&act)
    }
}

/// Charge vector of a monomial restricted to |j| <= m.
pub fn key_charge(k: &Key, m: usize) -> Result<Vec<i32>, RationalError> {
    let mut c = vec![0i32; 2 * m + 1];
    for (v, e) in k.vars() {
        let j = var_mode(v);
        if j.unsigned_abs() as usize > m {
            return Err(RationalError::ModeOutOfRange(j));
        }
        c[(j + m as i64) as usize] += var_sign(v) as i32 * e as i32;
    }
    Ok(c)
}

/// Frequency model plus the table of interned denominators.
#[derive(Clone, Debug)]
pub struct Algebra {
    pub model: FreqModel,
    charges: Vec<Vec<i32>>,
    bvecs: Vec<Vec<f64>>,
    index: FxHashMap<Vec<i32>, u32>,
}

impl Algebra {
    pub fn new(model: FreqModel) -> Self {
        Algebra { model, charges: Vec::new(), bvecs: Vec::new(), index: FxHashMap::default() }
    }

    pub fn modes(&self) -> usize {
        self.model.m
    }

    pub fn num_denominators(&self) -> usize {
        self.charges.len()
    }

    pub fn charge(&self, id: u32) -> &[i32] {
        &self.charges[id as usize]
    }

    /// A c_h for a stored denominator.
    pub fn bvec(&self, id: u32) -> &[f64] {
        &self.bvecs[id as usize]
    }

    /// l1 length of the charge vector.
    pub fn weight(&self, id: u32) -> u32 {
        self.charges[id as usize].iter().map(|x| x.unsigned_abs()).sum()
    }

    /// Id and normalization sign of an already stored charge.
    pub fn lookup(&self, c: &[i32]) -> Option<(u32, f64)> {
        let first = *c.iter().find(|&&x| x != 0)?;
        let sign = if first > 0 { 1.0 } else { -1.0 };
        let norm: Vec<i32> = c.iter().map(|&x| if first > 0 { x } else { -x }).collect();
        self.index.get(&norm).map(|&id| (id, sign))
    }

    /// Interns the charge; returns the id and the sign absorbed by normalization.
    pub fn intern(&mut self, c: &[i32]) -> Result<(u32, f64), RationalError> {
        let first = c.iter().find(|&&x| x != 0).copied().ok_or(RationalError::ZeroFrequency)?;
        let sign = if first > 0 { 1.0 } else { -1.0 };
        let norm: Vec<i32> = c.iter().map(|&x| if first > 0 { x } else { -x }).collect();
        if let Some(&id) = self.index.get(&norm) {
            return Ok((id, sign));
        }
        let b = self.model.apply(&norm.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale <= 1e-13 * norm.iter().map(|x| x.unsigned_abs()).sum::<u32>() as f64 {
            return Err(RationalError::ZeroFrequency);
        }
        let id = self.charges.len() as u32;
        self.charges.push(norm.clone());
        self.bvecs.push(b);
        self.index.insert(norm, id);
        Ok((id, sign))
    }

    /// omega_h(u) for every stored denominator.
    pub fn omegas(&self, u: &FourierState) -> Vec<f64> {
        let sf = self.model.site_freqs(u);
        self.charges
            .iter()
            .map(|c| c.iter().zip(&sf).map(|(&ci, w)| ci as f64 * w).sum())
            .collect()
    }

    /// Denominator as a minimal multi-index.
    pub fn denom_multi_index(&self, id: u32) -> Option<MultiIndex> {
        let m = self.model.m as i32;
        let mut e = Vec::new();
        for (k, &c) in self.charges[id as usize].iter().enumerate() {
            let j = k as i32 - m;
            for _ in 0..c.unsigned_abs() {
                e.push(if c > 0 { Index::plus(j) } else { Index::minus(j) });
            }
        }
        MultiIndex::new(e).ok()
    }
}

/// Sum of rational terms keyed by (numerator, denominators).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RationalHamiltonian {
    terms: FxHashMap<(Key, Denoms), Complex64>,
}

/// Order q = #numerator / 2 - #denominators.
pub fn order_of(k: &Key, d: &Denoms) -> i32 {
    k.degree() as i32 / 2 - d.len() as i32
}

const CHUNK: usize = 32;

impl RationalHamiltonian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_poly(p: &Poly) -> Self {
        let mut out = Self::new();
        for (k, c) in p.sorted_terms() {
            out.add_term(k, Denoms::EMPTY, c);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, k: Key, d: Denoms, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let e = self.terms.entry((k, d)).or_insert(Complex64::new(0.0, 0.0));
        *e += c;
        if *e == Complex64::new(0.0, 0.0) {
            self.terms.remove(&(k, d));
        }
    }

    pub fn get(&self, k: &Key, d: &Denoms) -> Complex64 {
        self.terms.get(&(*k, *d)).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn sorted_terms(&self) -> Vec<(Key, Denoms, Complex64)> {
        let mut v: Vec<(Key, Denoms, Complex64)> = self.terms.iter().map(|((k, d), c)| (*k, *d, *c)).collect();
        v.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &Denoms, &Complex64)> {
        self.terms.iter().map(|((k, d), c)| (k, d, c))
    }

    pub fn add_scaled(&mut self, other: &RationalHamiltonian, s: Complex64) {
        for ((k, d), c) in &other.terms {
            self.add_term(*k, *d, c * s);
        }
    }

    pub fn scale_in_place(&mut self, s: Complex64) {
        for c in self.terms.values_mut() {
            *c *= s;
        }
        self.terms.retain(|_, c| *c != Complex64::new(0.0, 0.0));
    }

    /// Removes and returns the terms selected by `pick`.
    pub fn take(&mut self, mut pick: impl FnMut(&Key, &Denoms) -> bool) -> RationalHamiltonian {
        let keys: Vec<(Key, Denoms)> = self.terms.keys().filter(|(k, d)| pick(k, d)).copied().collect();
        let mut out = RationalHamiltonian::new();
        for kd in keys {
            if let Some(c) = self.terms.remove(&kd) {
                out.terms.insert(kd, c);
            }
        }
        out
    }

    pub fn min_order(&self) -> Option<i32> {
        self.terms.keys().map(|(k, d)| order_of(k, d)).min()
    }

    pub fn plus(&self, other: &RationalHamiltonian) -> RationalHamiltonian {
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(1.0, 0.0));
        out
    }

    pub fn filter(&self, mut keep: impl FnMut(&Key, &Denoms) -> bool) -> RationalHamiltonian {
        RationalHamiltonian {
            terms: self.terms.iter().filter(|((k, d), _)| keep(k, d)).map(|(kd, c)| (*kd, *c)).collect(),
        }
    }

    pub fn of_order(&self, q: i32) -> RationalHamiltonian {
        self.filter(|k, d| order_of(k, d) == q)
    }

    pub fn max_order(&self) -> Option<i32> {
        self.terms.keys().map(|(k, d)| order_of(k, d)).max()
    }

    /// Largest denominator count.
    pub fn max_denominators(&self) -> usize {
        self.terms.keys().map(|(_, d)| d.len()).max().unwrap_or(0)
    }

    pub fn is_action_only(&self) -> bool {
        self.terms.keys().all(|(k, _)| k.is_action_type())
    }

    /// Polynomial part (terms without denominators).
    pub fn polynomial_part(&self) -> Poly {
        let mut p = Poly::new();
        for (k, d, c) in self.sorted_terms() {
            if d.is_empty() {
                p.add_term(k, c);
            }
        }
        p
    }

    pub fn compile(&self, alg: &Algebra) -> CompiledRational {
        CompiledRational::new(self, alg)
    }

    pub fn eval(&self, alg: &Algebra, u: &FourierState) -> Complex64 {
        self.compile(alg).eval(alg, u)
    }

    /// Smallest |omega_h(u)| over denominators used by this Hamiltonian.
    pub fn min_denominator(&self, alg: &Algebra, u: &FourierState) -> f64 {
        self.compile(alg).min_denominator(alg, u)
    }

    /// X_j = -i dQ/d conj(u_j) by the quotient rule.
    pub fn vector_field(&self, alg: &Algebra, u: &FourierState) -> FourierState {
        self.compile(alg).vector_field(alg, u)
    }

    /// Exact Poisson bracket {self, other}. Pairs whose result would exceed
    /// `max_order` are skipped; the count is of left terms hitting the cutoff.
    pub fn bracket(
        &self,
        alg: &Algebra,
        other: &RationalHamiltonian,
        max_order: i32,
    ) -> Result<(RationalHamiltonian, usize), RationalError> {
        let m = alg.modes() as i64;
        let orders = |h: &RationalHamiltonian| h.terms.keys().map(|(k, d)| order_of(k, d)).min();
        let (Some(p_min), Some(q_min)) = (orders(self), orders(other)) else {
            return Ok((RationalHamiltonian::new(), 0));
        };
        let prep = |h: &RationalHamiltonian, lim: i32| -> Result<Vec<(Key, Denoms, Complex64, i32)>, RationalError> {
            let mut v = Vec::new();
            for (k, d, c) in h.sorted_terms() {
                let q = order_of(&k, &d);
                if q > lim {
                    continue;
                }
                if k.max_mode() as i64 > m {
                    return Err(RationalError::ModeOutOfRange(k.max_mode() as i64));
                }
                v.push((k, d, c, q));
            }
            Ok(v)
        };
        // only pairs with q_a + q_b - 1 <= max_order contribute
        let p = prep(self, max_order + 1 - q_min)?;
        let skipped = self.len() - p.len();
        let mut q = prep(other, max_order + 1 - p_min)?;
        // by order, so loops over q can stop at the order cutoff
        q.sort_by_key(|t| t.3);
        let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); NUM_VARS];
        for (i, t) in q.iter().enumerate() {
            for (v, _) in t.0.vars() {
                by_var[v].push(i);
            }
        }
        // <charge(k), A c_id>
        let dot = |k: &Key, id: u32| -> f64 {
            let b = alg.bvec(id);
            k.vars().map(|(v, e)| var_sign(v) as f64 * e as f64 * b[(var_mode(v) + m) as usize]).sum()
        };
        type Acc = FxHashMap<(Key, Denoms), Complex64>;
        let parts: Vec<Result<(Acc, usize), RationalError>> = p
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc: Acc = FxHashMap::default();
                let mut dropped = 0usize;
                let mut put = |k: Key, d: Denoms, c: Complex64| {
                    *acc.entry((k, d)).or_insert(Complex64::new(0.0, 0.0)) += c;
                };
                for (ka, da, ca, qa) in chunk {
                    // polynomial part
                    for (v, av) in ka.vars() {
                        let w = conj_var(v);
                        let ka1 = ka.dec(v);
                        let base = Complex64::new(0.0, -(var_sign(v) as f64) * av as f64) * ca;
                        for &qi in &by_var[w] {
                            let (kb, db, cb, qb) = &q[qi];
                            if qa + qb - 1 > max_order {
                                break;
                            }
                            let nk = ka1.checked_add(&kb.dec(w)).ok_or(RationalError::ExponentOverflow)?;
                            let nd = da.merge(db).ok_or(RationalError::TooManyDenominators)?;
                            put(nk, nd, base * cb * kb.exp(w) as f64);
                        }
                    }
                    // denominator part
                    for (kb, db, cb, qb) in &q {
                        if qa + qb - 1 > max_order {
                            dropped += 1;
                            break;
                        }
                        if da.is_empty() && db.is_empty() {
                            continue;
                        }
                        let nk = ka.checked_add(kb).ok_or(RationalError::ExponentOverflow)?;
                        let base = da.merge(db).ok_or(RationalError::TooManyDenominators)?;
                        let ab = ca * cb;
                        for (g, mu) in db.grouped() {
                            let t = dot(ka, g);
                            if t != 0.0 {
                                let nd = base.with(g).ok_or(RationalError::TooManyDenominators)?;
                                put(nk, nd, Complex64::new(0.0, mu as f64 * t) * ab);
                            }
                        }
                        for (h, mu) in da.grouped() {
                            let t = dot(kb, h);
                            if t != 0.0 {
                                let nd = base.with(h).ok_or(RationalError::TooManyDenominators)?;
                                put(nk, nd, Complex64::new(0.0, -(mu as f64) * t) * ab);
                            }
                        }
                    }
                }
                Ok((acc, dropped))
            })
            .collect();
        let mut out = RationalHamiltonian::new();
        let mut dropped = skipped;
        for part in parts {
            let (acc, dr) = part?;
            dropped += dr;
            let mut entries: Vec<((Key, Denoms), Complex64)> = acc.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            for ((k, d), c) in entries {
                out.add_term(k, d, c);
            }
        }
        Ok((out, dropped))
    }

    /// One line per term: `coeff | numerator | denom ; denom ; ...`.
    pub fn dump(&self, alg: &Algebra) -> String {
        let mut rows: Vec<((u32, Vec<Index>), Vec<String>, Complex64)> = self
            .sorted_terms()
            .into_iter()
            .map(|(k, d, c)| {
                let dens = d
                    .ids()
                    .iter()
                    .map(|&id| alg.denom_multi_index(id).map(|m| m.to_string()).unwrap_or_default())
                    .collect();
                (k.order_key(), dens, c)
            })
            .collect();
        rows.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        let mut s = String::new();
        for ((_, ix), dens, c) in rows {
            let num: Vec<String> = ix.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{:.17e} {:.17e} | {} | {}", c.re, c.im, num.join(" "), dens.join(" ; "));
        }
        s
    }
}
