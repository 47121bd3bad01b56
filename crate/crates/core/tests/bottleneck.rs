use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use slowmix::bottleneck::*;
use slowmix::hamiltonians::{build_ising_1d, build_tfim_2d, DiagTerm, DiagonalHamiltonian};
use slowmix::lindblad::*;
use slowmix::operator::*;
use slowmix::Error;

fn mag(i: usize, n: usize) -> i64 {
    spins_of(i, n).iter().map(|&s| s as i64).sum()
}

fn sign_regions(n: usize) -> (Region, Region, Region) {
    let a = Region::from_predicate(n, RegionLabel::A, |i| mag(i, n) > 0).unwrap();
    let c = Region::from_predicate(n, RegionLabel::C, |i| mag(i, n) < 0).unwrap();
    let b = Region::complement_of(&a, &c, RegionLabel::B).unwrap();
    (a, b, c)
}

fn x_transitions(es: &EigenSystem, n: usize) -> Vec<Transition> {
    let mut out = Vec::new();
    for q in 0..n {
        let x = PauliString::single(n, q, Pauli::X).unwrap().to_dense().unwrap();
        out.extend(jump_decompose(es, &x, 1e-9).unwrap().transitions);
    }
    out
}

/// `sum_i w_i Z_i` with distinct weights, so every eigenvalue is simple.
fn generic_fields(n: usize) -> DenseOperator {
    let terms = (0..n)
        .map(|i| DiagTerm {
            sites: vec![i],
            coef: 1.0 + 0.37 * i as f64,
        })
        .collect();
    DiagonalHamiltonian::new(n, terms).unwrap().to_dense().unwrap()
}

#[test]
fn computational_distance_examples() {
    let a = Region::from_bitstrings(3, RegionLabel::A, &["000"]).unwrap();
    let c = Region::from_bitstrings(3, RegionLabel::C, &["111"]).unwrap();
    assert_eq!(computational_distance(&a, &c).unwrap(), 3);
    let b = Region::from_bitstrings(3, RegionLabel::B, &["111", "010"]).unwrap();
    assert_eq!(computational_distance(&c, &b).unwrap(), 0);

    let n = 6;
    let low = Region::from_predicate(n, RegionLabel::A, |i| i.count_ones() <= 1).unwrap();
    let high = Region::from_predicate(n, RegionLabel::C, |i| i.count_ones() >= 4).unwrap();
    assert_eq!(computational_distance(&low, &high).unwrap(), 3);

    let empty = Region::diagonal(3, RegionLabel::B, []).unwrap();
    assert!(computational_distance(&a, &empty).is_err());
    assert!(Region::from_bitstrings(3, RegionLabel::A, &["01"]).is_err());
}

#[test]
fn jump_distance_examples() {
    let h = generic_fields(2);
    let es = eig_hermitian(&h).unwrap();
    let r00 = Region::from_bitstrings(2, RegionLabel::A, &["00"]).unwrap();
    let r11 = Region::from_bitstrings(2, RegionLabel::C, &["11"]).unwrap();
    let r10 = Region::from_bitstrings(2, RegionLabel::C, &["10"]).unwrap();
    let x1 = PauliString::parse("XI").unwrap().to_dense().unwrap();
    let only_x1 = jump_decompose(&es, &x1, 1e-9).unwrap().transitions;
    assert_eq!(jump_distance(&only_x1, &r00, &r11, &es).unwrap(), UNREACHABLE);
    assert_eq!(jump_distance(&only_x1, &r00, &r10, &es).unwrap(), 1);
    let both = x_transitions(&es, 2);
    assert_eq!(jump_distance(&both, &r00, &r11, &es).unwrap(), 2);
}

#[test]
fn jump_distance_needs_eigenbasis_region() {
    let h = build_tfim_2d(2, 1.0).unwrap();
    let es = eig_hermitian(&h).unwrap();
    let t = x_transitions(&es, 4);
    let a = Region::from_bitstrings(4, RegionLabel::A, &["0000"]).unwrap();
    let c = Region::from_bitstrings(4, RegionLabel::C, &["1111"]).unwrap();
    assert!(jump_distance(&t, &a, &c, &es).is_err());
}

#[test]
fn range_checks() {
    let n = 3;
    let h = generic_fields(n);
    let es = eig_hermitian(&h).unwrap();
    let t = x_transitions(&es, n);
    let mut blocks = Vec::new();
    for q in 0..n {
        let x = PauliString::single(n, q, Pauli::X).unwrap().to_dense().unwrap();
        for (_, b) in jump_decompose(&es, &x, 1e-9).unwrap().blocks {
            blocks.push(b.into_mat());
        }
    }
    assert!(verify_range_at_most(&blocks, &t, 1, &es));
    let two = vec![&blocks[0] * &blocks[blocks.len() - 1]];
    assert!(max_abs(&two[0]) > 0.5);
    assert!(verify_range_at_most(&two, &t, 2, &es));
    assert!(!verify_range_at_most(&two, &t, 1, &es));
    assert!(verify_range_at_most(&[CMat::identity(8, 8)], &t, 1, &es));
}

#[test]
fn locality_examples() {
    let x2 = PauliString::single(3, 2, Pauli::X).unwrap().to_dense().unwrap();
    assert_eq!(locality_of_kraus(x2.mat(), 3, 1e-9), vec![2]);
    assert!(locality_of_kraus(&CMat::identity(8, 8), 3, 1e-9).is_empty());

    let h = LocalHamiltonian::tfim_chain(4, 1.0, 1.0).unwrap().to_dense().unwrap();
    let es = eig_hermitian(&h).unwrap();
    let x1 = PauliString::single(4, 0, Pauli::X).unwrap().to_dense().unwrap();
    let at = |t: f64, thr: f64| {
        let u = unitary_evolution(&es, t);
        locality_of_kraus(&(u.adjoint() * x1.mat() * u), 4, thr).len()
    };
    assert_eq!(at(0.0, 1e-9), 1);
    assert!(at(0.05, 1e-3) <= at(0.5, 1e-3));
    assert!(at(0.5, 1e-3) <= at(2.0, 1e-3));
    assert!(at(2.0, 1e-3) > 1);
    for t in [0.2, 1.0] {
        assert!(at(t, 1e-2) <= at(t, 1e-6));
    }
}

#[test]
fn sigma0_examples() {
    let n = 4;
    let h = build_ising_1d(n, 1.0, false).unwrap().to_dense().unwrap();
    let (a, _, c) = sign_regions(n);
    let beta = 1.3;
    let s0 = sigma0_build(&h, &a, beta).unwrap();
    let es = eig_hermitian(&h).unwrap();
    let rho = gibbs_state(&es, beta);
    let p = a.projector().unwrap();
    let expect = p.mat() * rho.mat() * p.mat() / C64::new(a.weight(rho.mat()), 0.0);
    assert!(max_abs(&(s0.mat() - expect)) < 1e-12);
    assert_eq!(c.weight(s0.mat()), 0.0);

    let all = Region::from_predicate(n, RegionLabel::A, |_| true).unwrap();
    let s = sigma0_build(&h, &all, beta).unwrap();
    assert!(max_abs(&(s.mat() - rho.mat())) < 1e-12);

    let t = build_tfim_2d(2, 0.7).unwrap();
    let plus = Region::from_predicate(4, RegionLabel::A, |i| mag(i, 4) > 0).unwrap();
    let s = sigma0_build(&t, &plus, 2.0).unwrap();
    assert_abs_diff_eq!(s.trace().re, 1.0, epsilon = 1e-10);
    assert!(s.flags().density);

    let empty = Region::diagonal(4, RegionLabel::A, []).unwrap();
    assert!(matches!(sigma0_build(&t, &empty, 1.0), Err(Error::Overflow(_))));
}

#[test]
fn lower_bound_formula() {
    let c = DEFAULT_BOUND_CONSTANT;
    assert_eq!(c, 0.25);
    assert!(bottleneck_lower_bound(0.5, 0.0, 0.5, 0.0, c).is_infinite());
    let v = bottleneck_lower_bound(0.5, (-10.0f64).exp(), 0.5, 0.0, c);
    assert_abs_diff_eq!(v, c * 0.25 * 10.0f64.exp(), epsilon = 1e-9 * v);
    let v = bottleneck_lower_bound(0.5, 0.01, 0.5, 0.1, c);
    assert_abs_diff_eq!(v, c * 5.0, epsilon = 1e-12);
}

#[test]
fn audit_identity_channel() {
    let n = 4;
    let h = build_ising_1d(n, 1.0, false).unwrap().to_dense().unwrap();
    let (a, b, c) = sign_regions(n);
    let id = KrausChannel::new(n, vec![CMat::identity(16, 16)]).unwrap();
    let rep = trajectory_audit(&id, [&a, &b, &c], &h, 1.0, 20, 0.0, 1e-12).unwrap();
    assert!(rep.trajectory.iter().all(|&(_, tc, _)| tc == rep.trajectory[0].1));
    assert_eq!(rep.trajectory.len(), 21);
}

#[test]
fn audit_rejects_overlapping_regions() {
    let n = 3;
    let h = build_ising_1d(n, 1.0, false).unwrap().to_dense().unwrap();
    let a = Region::from_predicate(n, RegionLabel::A, |i| i < 5).unwrap();
    let b = Region::from_predicate(n, RegionLabel::B, |i| i == 4).unwrap();
    let c = Region::from_predicate(n, RegionLabel::C, |i| i >= 5).unwrap();
    let id = KrausChannel::new(n, vec![CMat::identity(8, 8)]).unwrap();
    assert!(trajectory_audit(&id, [&a, &b, &c], &h, 1.0, 2, 0.0, 1e-12).is_err());
}

#[test]
fn audit_davies_ising_chain() {
    let n = 6;
    let beta = 2.0;
    let h = build_ising_1d(n, 1.0, false).unwrap().to_dense().unwrap();
    let jumps: Vec<PauliString> = (0..n).map(|q| PauliString::single(n, q, Pauli::X).unwrap()).collect();
    let spec = davies_generator(&h, &jumps, beta, GammaProfile::Metropolis).unwrap();
    let ch = discrete_sampler(&spec, max_discrete_step(&spec)).unwrap();
    let (a, b, c) = sign_regions(n);
    let rep = trajectory_audit(&ch, [&a, &b, &c], &h, beta, 10_000, 0.0, 1e-9).unwrap();
    assert!(rep.tr_a + rep.tr_b + rep.tr_c <= 1.0 + 1e-9);
    assert_abs_diff_eq!(rep.tr_a + rep.tr_b + rep.tr_c, 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(
        rep.lower_bound,
        bottleneck_lower_bound(rep.tr_a, rep.tr_b, rep.tr_c, 0.0, 0.25),
        epsilon = 1e-12
    );
    let (_, c0, b0) = rep.trajectory[0];
    let (_, c1, _) = rep.trajectory[1];
    assert!(c1 - c0 <= b0 + 1e-12);
    let cap = rep.tr_b / rep.tr_a;
    for &(t, tc, _) in &rep.trajectory {
        assert!(tc <= c0 + t as f64 * cap + 1e-8);
    }
}

#[test]
fn mixing_time_respects_bound() {
    let n = 4;
    let beta = 2.0;
    let h = build_ising_1d(n, 1.0, false).unwrap().to_dense().unwrap();
    let es = eig_hermitian(&h).unwrap();
    let mut jumps: Vec<PauliString> = (0..n).map(|q| PauliString::single(n, q, Pauli::X).unwrap()).collect();
    jumps.extend((0..n).map(|q| PauliString::single(n, q, Pauli::Z).unwrap()));
    let spec = davies_from_eigen(&es, &jumps, beta, GammaProfile::Metropolis).unwrap();
    let ch = discrete_sampler(&spec, max_discrete_step(&spec)).unwrap();
    let (a, b, c) = sign_regions(n);
    let rep = trajectory_audit(&ch, [&a, &b, &c], &h, beta, 50, 0.0, 1e-9).unwrap();
    let rho = gibbs_state(&es, beta).into_mat();
    let s0 = sigma0_from_eigen(&es, &a, beta).unwrap().into_mat();
    let mut pairs = default_pairs(16);
    pairs.push(StatePair::new("sigma0 vs gibbs", s0, rho));
    let mix = channel_mixing_time(&ch, 0.25, &pairs).unwrap();
    assert!(mix.time >= rep.lower_bound, "{} < {}", mix.time, rep.lower_bound);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classical_jump_distance_is_hamming(n in 2usize..5, s1 in proptest::collection::vec(0usize..16, 1..4), s2 in proptest::collection::vec(0usize..16, 1..4)) {
        let d = 1usize << n;
        let m1: Vec<usize> = s1.iter().map(|x| x % d).collect();
        let m2: Vec<usize> = s2.iter().map(|x| x % d).collect();
        let r1 = Region::diagonal(n, RegionLabel::A, m1).unwrap();
        let r2 = Region::diagonal(n, RegionLabel::C, m2).unwrap();
        let h = generic_fields(n);
        let es = eig_hermitian(&h).unwrap();
        let t = x_transitions(&es, n);
        prop_assert_eq!(jump_distance(&t, &r1, &r2, &es).unwrap(), computational_distance(&r1, &r2).unwrap());
    }

    #[test]
    fn lower_bound_monotone(a in 0.01f64..1.0, c in 0.01f64..1.0, b1 in 1e-6f64..1.0, b2 in 1e-6f64..1.0, e1 in 1e-6f64..1.0, e2 in 1e-6f64..1.0) {
        let (bl, bh) = (b1.min(b2), b1.max(b2));
        let (el, eh) = (e1.min(e2), e1.max(e2));
        prop_assert!(bottleneck_lower_bound(a, bh, c, el, 0.25) <= bottleneck_lower_bound(a, bl, c, el, 0.25));
        prop_assert!(bottleneck_lower_bound(a, bl, c, eh, 0.25) <= bottleneck_lower_bound(a, bl, c, el, 0.25));
    }
}
