use super::*;
use crate::lattice::MultiIndex;
use crate::poly::build_hamiltonian;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_state(m: usize, scale: f64, seed: u64) -> FourierState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..2 * m + 1)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
        .collect();
    FourierState::from_vec(m, amps)
}

fn k2_of(m: usize) -> Poly {
    build_hamiltonian(&KernelSpec::PowerLaw { p: 2 }, m).unwrap().layer(4).filter(|k| k.is_action_type())
}

fn mono(pairs: &[(i32, i64)], coef: Complex64) -> Poly {
    Poly::monomial(&MultiIndex::from_pairs(pairs).unwrap(), coef).unwrap()
}

fn real_poly(p: Poly) -> Poly {
    let mut out = p.clone();
    for (k, c) in p.sorted_terms() {
        out.add_term(k.conjugate(), c.conj());
    }
    out
}

fn real_rational(q: RationalHamiltonian) -> RationalHamiltonian {
    let mut out = q.clone();
    for (k, d, c) in q.sorted_terms() {
        out.add_term(k.conjugate(), d, c.conj());
    }
    out
}

fn rel(a: &FourierState, b: &FourierState) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(1e-300)
}

#[test]
fn denoms_stay_sorted() {
    let d = Denoms::EMPTY.with(5).unwrap().with(2).unwrap().with(5).unwrap();
    assert_eq!(d.ids(), &[2, 5, 5]);
    assert_eq!(d.grouped(), vec![(2, 1), (5, 2)]);
    let e = d.merge(&Denoms::EMPTY.with(3).unwrap()).unwrap();
    assert_eq!(e.ids(), &[2, 3, 5, 5]);
    let mut full = Denoms::EMPTY;
    for i in 0..MAX_DEN as u32 {
        full = full.with(i).unwrap();
    }
    assert!(full.with(0).is_none());
}

#[test]
fn intern_normalizes_sign() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let (a, sa) = alg.intern(&[0, 1, -1, 0, 0]).unwrap();
    let (b, sb) = alg.intern(&[0, -1, 1, 0, 0]).unwrap();
    assert_eq!(a, b);
    assert_eq!((sa, sb), (1.0, -1.0));
    assert_eq!(alg.intern(&[0; 5]), Err(RationalError::ZeroFrequency));
    assert_eq!(alg.denom_multi_index(a).unwrap().to_string(), MultiIndex::from_pairs(&[(-1, 1), (0, -1)]).unwrap().to_string());
}

#[test]
fn model_matches_quartic_frequencies() {
    // Omega_j = dK2/dI_j
    let m = 2;
    let k2 = k2_of(m);
    let model = FreqModel::from_action_quartic(&k2, m).unwrap();
    let u = random_state(m, 0.3, 4);
    let sf = model.site_freqs(&u);
    for j in -2i64..=2 {
        let h = 1e-6;
        let bump = |e: f64| {
            let mut v = u.clone();
            let a = v.get(j);
            v.set(j, a * ((a.norm_sqr() + e) / a.norm_sqr()).sqrt());
            k2.eval(&v).re
        };
        let fd = (bump(h) - bump(-h)) / (2.0 * h);
        assert!((fd - sf[(j + 2) as usize]).abs() < 1e-7, "{j}: {fd} vs {}", sf[(j + 2) as usize]);
    }
}

#[test]
fn bracket_field_sign_matches_poly_bracket() {
    // the identity holds for real Hamiltonians only
    let f = real_poly(mono(&[(1, 1), (1, -1), (0, 1), (0, -1)], c(0.7, 0.0)).plus(&mono(&[(2, 1), (-1, -1), (0, -1), (1, -1), (0, 1), (0, 1)], c(0.2, -0.4))));
    let g = real_poly(mono(&[(1, 1), (-1, 1), (0, -1), (0, -1)], c(0.3, 0.1)));
    let u = random_state(2, 0.5, 9);
    let xf = |v: &FourierState| f.vector_field(v);
    let xg = |v: &FourierState| g.vector_field(v);
    let num = bracket_field(&xf, &xg, &u);
    let exact = f.bracket(&g).unwrap().vector_field(&u);
    assert!(rel(&num, &exact) < 1e-8, "{}", rel(&num, &exact));
}

#[test]
fn empty_denominators_reproduce_poly() {
    let h = build_hamiltonian(&KernelSpec::Exponential { beta: 0.5 }, 2).unwrap();
    let alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = RationalHamiltonian::from_poly(&h);
    let u = random_state(2, 0.4, 2);
    assert_eq!(q.vector_field(&alg, &u).as_slice(), h.vector_field(&u).as_slice());
    assert!((q.eval(&alg, &u) - h.eval(&u)).norm() < 1e-14);
    let g = RationalHamiltonian::from_poly(&mono(&[(1, 1), (-1, 1), (0, -1), (0, -1)], c(0.3, 0.1)));
    let (b, _) = q.bracket(&alg, &g, 100).unwrap();
    let pb = h.bracket(&g.polynomial_part()).unwrap();
    assert_eq!(b.polynomial_part().sorted_terms().len(), pb.len());
    assert!(b.polynomial_part().minus(&pb).max_abs_coeff() < 1e-15);
}

fn sample_rational(alg: &mut Algebra) -> RationalHamiltonian {
    let mut q = RationalHamiltonian::new();
    let (h1, s1) = alg.intern(&[0, 1, -2, 1, 0]).unwrap();
    let (h2, s2) = alg.intern(&[1, -1, 0, -1, 1]).unwrap();
    let k1 = crate::poly::key_of(MultiIndex::from_pairs(&[(1, 1), (1, -1), (2, 1), (2, -1)]).unwrap().entries()).unwrap();
    let k2 = crate::poly::key_of(MultiIndex::from_pairs(&[(1, 1), (-1, 1), (0, -1), (0, -1), (2, 1), (2, -1)]).unwrap().entries()).unwrap();
    q.add_term(k1, Denoms::EMPTY.with(h1).unwrap(), c(0.8 * s1, 0.1));
    q.add_term(k2, Denoms::EMPTY.with(h2).unwrap().with(h1).unwrap(), c(-0.3, 0.5 * s2));
    real_rational(q)
}

#[test]
fn rational_field_matches_finite_differences() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = sample_rational(&mut alg);
    let u = random_state(2, 0.5, 11);
    let x = q.vector_field(&alg, &u);
    let h = 1e-5;
    for j in -2i64..=2 {
        let shift = |dz: Complex64| {
            let mut v = u.clone();
            v.set(j, v.get(j) + dz);
            q.eval(&alg, &v)
        };
        let dx = (shift(c(h, 0.0)) - shift(c(-h, 0.0))) / (2.0 * h);
        let dy = (shift(c(0.0, h)) - shift(c(0.0, -h))) / (2.0 * h);
        let dbar = (dx + c(0.0, 1.0) * dy) * 0.5;
        let want = c(0.0, -1.0) * dbar;
        assert!((want - x.get(j)).norm() <= 1e-6 * x.max_abs(), "{j}: {want} vs {}", x.get(j));
    }
}

#[test]
fn rational_bracket_matches_numeric_commutator() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = sample_rational(&mut alg);
    let mut g = RationalHamiltonian::from_poly(&mono(&[(1, 1), (-1, 1), (0, -1), (0, -1)], c(0.3, 0.1)));
    let (h3, _) = alg.intern(&[0, 0, 1, -1, 0]).unwrap();
    let k = crate::poly::key_of(MultiIndex::from_pairs(&[(0, 1), (0, -1), (-2, 1), (-2, -1)]).unwrap().entries()).unwrap();
    g.add_term(k, Denoms::EMPTY.with(h3).unwrap(), c(0.0, 0.4));
    let g = real_rational(g);
    let (b, dropped) = q.bracket(&alg, &g, 100).unwrap();
    assert_eq!(dropped, 0);
    let u = random_state(2, 0.5, 5);
    let xq = |v: &FourierState| q.vector_field(&alg, v);
    let xg = |v: &FourierState| g.vector_field(&alg, v);
    let num = bracket_field(&xq, &xg, &u);
    let exact = b.vector_field(&alg, &u);
    assert!(rel(&num, &exact) < 1e-7, "{}", rel(&num, &exact));
    // orders add minus one
    for (k, d, _) in b.sorted_terms() {
        assert!(order_of(&k, &d) <= 3 + 2 - 1);
    }
}

#[test]
fn homological_equation_is_exact() {
    let m = 2;
    let k2 = k2_of(m);
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2, m).unwrap());
    let z = mono(&[(2, 1), (-1, 1), (-1, 1), (1, -1), (1, -1), (-2, -1)], c(0.5, -0.25))
        .plus(&mono(&[(2, -1), (-1, -1), (-1, -1), (1, 1), (1, 1), (-2, 1)], c(0.5, 0.25)))
        .plus(&mono(&[(1, 1), (1, -1), (0, 1), (0, -1), (2, 1), (2, -1)], c(0.9, 0.0)));
    let zr = RationalHamiltonian::from_poly(&z);
    let (s, dk) = rational_homological_split(&mut alg, &zr, 6).unwrap();
    assert_eq!(dk.len(), 1);
    assert_eq!(s.len(), 2);
    // symbolically {K2, S} is omega_J u_J / omega_J, not yet cancelled
    let (b, _) = RationalHamiltonian::from_poly(&k2).bracket(&alg, &s, 100).unwrap();
    let z_na = zr.filter(|k, _| !k.is_action_type());
    for seed in 0..10 {
        let u = random_state(m, 0.3, 100 + seed);
        let xk = |v: &FourierState| k2.vector_field(v);
        let xs = |v: &FourierState| s.vector_field(&alg, v);
        let num = bracket_field(&xk, &xs, &u);
        let xz = z_na.vector_field(&alg, &u);
        assert!(rel(&num, &xz) < 1e-8, "{}", rel(&num, &xz));
        assert!(rel(&b.vector_field(&alg, &u), &xz) < 1e-12);
        assert!((b.eval(&alg, &u) - z_na.eval(&alg, &u)).norm() < 1e-12 * z_na.eval(&alg, &u).norm());
    }
    assert!(matches!(
        rational_homological_split(&mut alg, &zr, 4),
        Err(RationalError::HBudgetExceeded { len: 6, budget: 4 })
    ));
}

#[test]
fn action_polynomial_goes_to_k() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let z = RationalHamiltonian::from_poly(&mono(&[(1, 1), (1, -1), (2, 1), (2, -1), (0, 1), (0, -1)], c(1.0, 0.0)));
    let (s, dk) = rational_homological_split(&mut alg, &z, 6).unwrap();
    assert!(s.is_empty());
    assert_eq!(dk, z);
}

#[test]
fn quartic_only_input_is_identity() {
    let m = 2;
    let h = build_hamiltonian(&KernelSpec::PowerLaw { p: 2 }, m).unwrap();
    let hm = h.layer(2).plus(&k2_of(m));
    let nr = NonResonanceParams { gamma: 1e-6, m, d: 5 };
    let p = NormParams { s: 0.2, s0: 0.1, r: 1e-8 };
    let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
    let res = integrable_normalize(&hm, 5, &p, &nr, &f, &RationalOptions::default()).unwrap();
    assert!(res.generators.iter().all(|g| g.is_empty()));
    assert_eq!(res.k.polynomial_part(), k2_of(m));
    let bad = NormParams { r: 1e-2, ..p };
    assert!(matches!(
        integrable_normalize(&hm, 5, &bad, &nr, &f, &RationalOptions::default()),
        Err(RationalError::SmallnessViolated { step: 0, .. })
    ));
}

#[test]
fn zero_generator_flow_is_identity() {
    let alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
    let u = random_state(2, 0.1, 3);
    let rep = flow_map(&alg, &RationalHamiltonian::new(), &u, 1.0, 0.0, 0.2, &f, &OdeOptions::default()).unwrap();
    assert_eq!(rep.state, u);
    assert_eq!(rep.displacement, 0.0);
}

#[test]
fn flow_round_trip() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = sample_rational(&mut alg);
    let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
    let u = random_state(2, 0.3, 8);
    let opts = OdeOptions::default();
    let fwd = flow_map(&alg, &q, &u, 0.7, 0.0, 0.2, &f, &opts).unwrap();
    let back = flow_map(&alg, &q, &fwd.state, -0.7, 0.0, 0.2, &f, &opts).unwrap();
    assert!(back.state.sub(&u).max_abs() < 1e-8 * u.max_abs());
}

#[test]
fn domain_exit_reports_time() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = sample_rational(&mut alg);
    let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
    let u = random_state(2, 0.3, 8);
    let e = flow_map(&alg, &q, &u, 0.5, 1e6, 0.2, &f, &OdeOptions::default()).unwrap_err();
    assert_eq!(e, RationalError::DomainExit { t: 0.0 });
}

#[test]
fn exact_jvp_matches_finite_differences() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = sample_rational(&mut alg).compile(&alg);
    let u = random_state(2, 0.5, 21);
    let w = random_state(2, 0.5, 22);
    let (x, dx) = q.jvp(&alg, &u, &w);
    assert_eq!(x.as_slice(), q.vector_field(&alg, &u).as_slice());
    // the stencil's h^4 truncation dominates here
    let fd = directional_derivative(&|v: &FourierState| q.vector_field(&alg, v), &u, &w);
    assert!(rel(&fd, &dx) < 1e-6, "{}", rel(&fd, &dx));
}

#[test]
fn exact_bracket_field_matches_symbolic_bracket() {
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = sample_rational(&mut alg);
    let g = real_rational(RationalHamiltonian::from_poly(&mono(&[(1, 1), (-1, 1), (0, -1), (0, -1)], c(0.3, 0.1))));
    let (b, _) = q.bracket(&alg, &g, 100).unwrap();
    let u = random_state(2, 0.5, 23);
    let num = bracket_field_exact(&q.compile(&alg), &g.compile(&alg), &alg, &u);
    assert!(rel(&num, &b.vector_field(&alg, &u)) < 1e-12);
}

#[test]
fn cauchy_and_lie_estimates_hold_on_samples() {
    use super::lemmas::*;
    let mut alg = Algebra::new(FreqModel::from_action_quartic(&k2_of(2), 2).unwrap());
    let q = sample_rational(&mut alg);
    let g = real_rational(RationalHamiltonian::from_poly(&mono(&[(1, 1), (-1, 1), (0, -1), (0, -1)], c(0.3, 0.1))));
    let (b, _) = q.bracket(&alg, &g, 100).unwrap();
    let (qc, gc, bc) = (q.compile(&alg), g.compile(&alg), b.compile(&alg));
    let f = WeightFunction::gevrey(0.5, 0.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // rho small enough that gamma' > 0, states inside the non-resonant domain
    let (gamma, rho) = (0.05, 0.002);
    let gp = gamma_prime(gamma, rho, 4, alg.model.max_abs() / 2.0);
    assert!(gp > 0.0);
    let mut checked = 0;
    for seed in 0..200 {
        let u = random_state(2, 0.1, 300 + seed);
        let n = weighted_norm_with(&u, 0.2, &f, NormKind::L1);
        if qc.min_denominator(&alg, &u) <= gamma * n * n {
            continue;
        }
        let rep = cauchy_check(&qc, &alg, &u, rho, 0.2, &f, 200, &mut rng);
        assert!(rep.jacobian <= 2.0 * rep.bound, "{rep:?}");
        checked += 1;
    }
    assert!(checked > 20);
    let rep = lie_bracket_check(&qc, &gc, &bc, &alg, 0.1, rho, gamma, gp, 0.2, &f, 300, &mut rng);
    assert!(rep.admitted > 0);
    assert!(rep.bracket <= 2.0 * rep.bound, "{rep:?}");
}
