//! The truncated Hamiltonian and its integrable quartic part.

use num_complex::Complex64;

use super::{key_of, PolyError, Poly, MAX_MODE};
use crate::kernel::KernelSpec;
use crate::lattice::Index;
use crate::state::FourierState;

/// Prefactor of the quartic sum in H.
///
/// With 1/2 in front of the ordered quadruple sum the resonant quartic layer
/// would come out as K2/2; the integral form of the energy carries no 1/2, and
/// that is the normalization used here. The two differ by rescaling u by sqrt 2.
pub const QUARTIC_SCALE: f64 = 1.0;

fn check_m(m: usize) -> Result<(), PolyError> {
    if m as i32 > MAX_MODE {
        return Err(PolyError::ModeOutOfRange(m as i32));
    }
    Ok(())
}

/// H0 = sum_{|j| <= m} j^2 u_{(j,+)} u_{(j,-)}; the j = 0 term is zero.
pub fn h0(m: usize) -> Result<Poly, PolyError> {
    check_m(m)?;
    let mut p = Poly::new();
    for j in -(m as i32)..=m as i32 {
        p.add_term(key_of(&[Index::plus(j), Index::minus(j)])?, Complex64::new((j * j) as f64, 0.0));
    }
    Ok(p)
}

/// H = H0 + sum_{k1+k2=k3+k4} K_{k1-k3} u_{k1} u_{k2} conj(u_{k3}) conj(u_{k4}), |k_i| <= m.
pub fn build_hamiltonian(spec: &KernelSpec, m: usize) -> Result<Poly, PolyError> {
    let mut p = h0(m)?;
    let mi = m as i32;
    for k1 in -mi..=mi {
        for k2 in -mi..=mi {
            for k3 in -mi..=mi {
                let k4 = k1 + k2 - k3;
                if k4.abs() > mi {
                    continue;
                }
                let c = QUARTIC_SCALE * spec.coeff((k1 - k3) as i64);
                if c == 0.0 {
                    continue;
                }
                let key = key_of(&[Index::plus(k1), Index::plus(k2), Index::minus(k3), Index::minus(k4)])?;
                p.add_term(key, Complex64::new(c, 0.0));
            }
        }
    }
    Ok(p)
}

/// K2 = sum_{k1,k2} K_{|k1-k2|} |u_{k1}|^2 |u_{k2}|^2 over |k_i| <= m.
pub fn k2(spec: &KernelSpec, m: usize) -> Result<Poly, PolyError> {
    check_m(m)?;
    let mut p = Poly::new();
    let mi = m as i32;
    for a in -mi..=mi {
        for b in -mi..=mi {
            let c = spec.coeff((a - b) as i64);
            if c == 0.0 {
                continue;
            }
            let key = key_of(&[Index::plus(a), Index::minus(a), Index::plus(b), Index::minus(b)])?;
            p.add_term(key, Complex64::new(c, 0.0));
        }
    }
    Ok(p)
}

/// Direct ordered quadruple sum of the quartic energy at a physical state.
pub fn quartic_quadruple_sum(spec: &KernelSpec, u: &FourierState) -> Complex64 {
    let m = u.modes() as i64;
    let mut s = Complex64::new(0.0, 0.0);
    for k1 in -m..=m {
        for k2 in -m..=m {
            for k3 in -m..=m {
                let k4 = k1 + k2 - k3;
                if k4.abs() > m {
                    continue;
                }
                s += spec.coeff(k1 - k3) * u.get(k1) * u.get(k2) * u.get(k3).conj() * u.get(k4).conj();
            }
        }
    }
    QUARTIC_SCALE * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::MultiIndex;

    #[test]
    fn quadratic_part_m1() {
        let h = h0(1).unwrap();
        // j = 0 contributes 0 and is not stored
        assert_eq!(h.len(), 2);
        for j in [-1, 1] {
            let jm = MultiIndex::new(vec![Index::plus(j), Index::minus(j)]).unwrap();
            assert_eq!(h.coeff(&jm), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn diagonal_quartic_coefficient() {
        // four ordered pairings (k1,k3) all equal (k,k): coefficient K_0
        let e = KernelSpec::Exponential { beta: 1.0 };
        let h = build_hamiltonian(&e, 2).unwrap();
        let jm = MultiIndex::from_pairs(&[(1, 1), (1, 1), (1, -1), (1, -1)]).unwrap();
        assert_eq!(h.coeff(&jm).re, 1.0);
        let p = build_hamiltonian(&KernelSpec::PowerLaw { p: 2 }, 2).unwrap();
        assert_eq!(p.coeff(&jm).re, 0.0);
        // off-diagonal action: orderings (a,b,a,b),(b,a,b,a) give 2K_0, (a,b,b,a),(b,a,a,b) give 2K_{a-b}
        let off = MultiIndex::from_pairs(&[(0, 1), (2, 1), (0, -1), (2, -1)]).unwrap();
        assert!((h.coeff(&off).re - 2.0 * (1.0 + (-2f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn term_count_m2_matches_enumeration() {
        let e = KernelSpec::Exponential { beta: 1.0 };
        let h = build_hamiltonian(&e, 2).unwrap();
        let mut set = std::collections::BTreeSet::new();
        for k1 in -2i32..=2 {
            for k2 in -2i32..=2 {
                for k3 in -2i32..=2 {
                    let k4 = k1 + k2 - k3;
                    if k4.abs() <= 2 {
                        let mut a = [k1, k2];
                        let mut b = [k3, k4];
                        a.sort();
                        b.sort();
                        set.insert((a, b));
                    }
                }
            }
        }
        assert_eq!(h.layer(4).len(), set.len());
    }
}
