//! Packed monomial exponents: 4 bits per variable, 62 variables in 256 bits.
//!
//! Variable v = 2 (j + MAX_MODE) + (sigma == -1) stands for u_{(j, sigma)}.

use std::fmt;

use crate::lattice::{Index, Sign};

pub const MAX_MODE: i32 = 15;
pub const NUM_VARS: usize = 2 * (2 * MAX_MODE as usize + 1);
pub const MAX_EXP: u8 = 15;

const LOW_NIBBLE_BITS: u64 = 0x1111_1111_1111_1111;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Key(pub [u64; 4]);

pub fn var_of(ix: Index) -> Option<usize> {
    if ix.j.abs() > MAX_MODE {
        return None;
    }
    Some(2 * (ix.j + MAX_MODE) as usize + usize::from(ix.sigma == Sign::Minus))
}

pub fn index_of(v: usize) -> Index {
    let j = (v / 2) as i32 - MAX_MODE;
    let sigma = if v % 2 == 0 { Sign::Plus } else { Sign::Minus };
    Index { j, sigma }
}

/// Variable index of the complex conjugate.
#[inline]
pub fn conj_var(v: usize) -> usize {
    v ^ 1
}

#[inline]
pub fn var_sign(v: usize) -> i64 {
    if v % 2 == 0 {
        1
    } else {
        -1
    }
}

#[inline]
pub fn var_mode(v: usize) -> i64 {
    (v / 2) as i64 - MAX_MODE as i64
}

impl Key {
    pub const ONE: Key = Key([0; 4]);

    #[inline]
    pub fn exp(&self, v: usize) -> u8 {
        ((self.0[v >> 4] >> ((v & 15) * 4)) & 0xf) as u8
    }

    /// Adds `n` to the exponent of v; None on nibble overflow.
    #[inline]
    pub fn bump(&self, v: usize, n: u8) -> Option<Key> {
        let e = self.exp(v) as u16 + n as u16;
        if e > MAX_EXP as u16 {
            return None;
        }
        let mut k = *self;
        k.0[v >> 4] += (n as u64) << ((v & 15) * 4);
        Some(k)
    }

    /// Subtracts one from the exponent of v (caller guarantees it is positive).
    #[inline]
    pub fn dec(&self, v: usize) -> Key {
        debug_assert!(self.exp(v) > 0);
        let mut k = *self;
        k.0[v >> 4] -= 1u64 << ((v & 15) * 4);
        k
    }

    /// Nibble-wise sum; None if any exponent overflows.
    #[inline]
    pub fn checked_add(&self, other: &Key) -> Option<Key> {
        let mut out = [0u64; 4];
        for l in 0..4 {
            let (a, b) = (self.0[l], other.0[l]);
            let s = a.wrapping_add(b);
            // a carry into nibble k shows up as a flipped low bit of that nibble
            let carries = (a ^ b ^ s) & LOW_NIBBLE_BITS & !1;
            if carries != 0 || s < a {
                return None;
            }
            out[l] = s;
        }
        Some(Key(out))
    }

    pub fn degree(&self) -> u32 {
        self.vars().map(|(_, e)| e as u32).sum()
    }

    /// (variable, exponent) pairs with positive exponent, ascending.
    pub fn vars(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        (0..4).flat_map(move |l| {
            let mut w = self.0[l];
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize / 4;
                let e = ((w >> (t * 4)) & 0xf) as u8;
                w &= !(0xfu64 << (t * 4));
                Some((l * 16 + t, e))
            })
        })
    }

    pub fn from_indices(ix: &[Index]) -> Option<Key> {
        let mut k = Key::ONE;
        for &i in ix {
            k = k.bump(var_of(i)?, 1)?;
        }
        Some(k)
    }

    /// Entries in canonical (j, sigma) order.
    pub fn indices(&self) -> Vec<Index> {
        let mut out = Vec::new();
        for (v, e) in self.vars() {
            for _ in 0..e {
                out.push(index_of(v));
            }
        }
        out
    }

    pub fn conjugate(&self) -> Key {
        let mut out = [0u64; 4];
        for l in 0..4 {
            let w = self.0[l];
            // swap adjacent nibbles: (j,+) <-> (j,-)
            let even = w & 0x0f0f_0f0f_0f0f_0f0f;
            let odd = w & 0xf0f0_f0f0_f0f0_f0f0;
            out[l] = (even << 4) | (odd >> 4);
        }
        Key(out)
    }

    pub fn momentum(&self) -> i64 {
        self.vars().map(|(v, e)| var_sign(v) * var_mode(v) * e as i64).sum()
    }

    pub fn energy(&self) -> i64 {
        self.vars()
            .map(|(v, e)| var_sign(v) * var_mode(v) * var_mode(v) * e as i64)
            .sum()
    }

    /// #plus - #minus
    pub fn gauge(&self) -> i64 {
        self.vars().map(|(v, e)| var_sign(v) * e as i64).sum()
    }

    pub fn is_action_type(&self) -> bool {
        self.vars().all(|(v, e)| self.exp(conj_var(v)) == e)
    }

    pub fn max_mode(&self) -> u32 {
        self.vars().map(|(v, _)| var_mode(v).unsigned_abs() as u32).max().unwrap_or(0)
    }

    /// Number of entries with |j| > n.
    pub fn high_count(&self, n: u32) -> u32 {
        self.vars()
            .filter(|(v, _)| var_mode(*v).unsigned_abs() as u32 > n)
            .map(|(_, e)| e as u32)
            .sum()
    }

    /// Sort key: degree first, then the canonical entry list.
    pub fn order_key(&self) -> (u32, Vec<Index>) {
        (self.degree(), self.indices())
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, ix) in self.indices().iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{ix}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_conjugate() {
        let ix = vec![Index::plus(-3), Index::plus(1), Index::plus(1), Index::minus(1), Index::minus(15)];
        let k = Key::from_indices(&ix).unwrap();
        let mut sorted = ix.clone();
        sorted.sort();
        assert_eq!(k.indices(), sorted);
        assert_eq!(k.degree(), 5);
        let c = k.conjugate();
        let mut conj: Vec<Index> = ix.iter().map(|i| i.conjugate()).collect();
        conj.sort();
        assert_eq!(c.indices(), conj);
        assert_eq!(c.conjugate(), k);
        assert!(Key::from_indices(&[Index::plus(16)]).is_none());
    }

    #[test]
    fn checked_add_detects_overflow() {
        let a = Key::ONE.bump(7, 9).unwrap();
        let b = Key::ONE.bump(7, 6).unwrap();
        assert_eq!(a.checked_add(&b).unwrap().exp(7), 15);
        let c = Key::ONE.bump(7, 7).unwrap();
        assert!(a.checked_add(&c).is_none());
        let hi = Key::ONE.bump(15, 15).unwrap();
        assert!(hi.checked_add(&Key::ONE.bump(15, 1).unwrap()).is_none());
        let x = Key::ONE.bump(3, 2).unwrap().bump(40, 1).unwrap();
        let y = Key::ONE.bump(4, 1).unwrap().bump(40, 3).unwrap();
        let s = x.checked_add(&y).unwrap();
        assert_eq!((s.exp(3), s.exp(4), s.exp(40)), (2, 1, 4));
    }

    #[test]
    fn indicators() {
        let k = Key::from_indices(&[Index::plus(1), Index::plus(-1), Index::minus(0), Index::minus(0)]).unwrap();
        assert_eq!(k.momentum(), 0);
        assert_eq!(k.energy(), 2);
        assert_eq!(k.gauge(), 0);
        assert!(!k.is_action_type());
        let a = Key::from_indices(&[Index::plus(2), Index::minus(2), Index::plus(-4), Index::minus(-4)]).unwrap();
        assert!(a.is_action_type());
        assert_eq!(a.high_count(2), 2);
        assert_eq!(a.max_mode(), 4);
    }
}
