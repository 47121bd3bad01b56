use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use proptest::prelude::*;
use slowmix::hamiltonians::build_tfim_2d;
use slowmix::operator::*;
use slowmix::rng::seeded;
use slowmix::Error;

fn basis(d: usize, i: usize) -> DVector<C64> {
    let mut v = DVector::from_element(d, ZERO);
    v[i] = ONE;
    v
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn pauli_x_maps_zero_to_one() {
    let x = PauliString::parse("X").unwrap().to_dense().unwrap();
    let out = x.mat() * basis(2, 0);
    assert_eq!(out, basis(2, 1));
}

#[test]
fn zz_sign_on_01() {
    let zz = PauliString::parse("ZZ").unwrap().to_dense().unwrap();
    let out = zz.mat() * basis(4, 0b01);
    assert_eq!(out, basis(4, 0b01) * c(-1.0, 0.0));
}

#[test]
fn y_on_zero_is_i_one() {
    let y = PauliString::parse("Y").unwrap().to_dense().unwrap();
    let out = y.mat() * basis(2, 0);
    assert_eq!(out, basis(2, 1) * I);
}

#[test]
fn pauli_phase_is_applied() {
    let p = PauliString::parse("-iZ").unwrap().to_dense().unwrap();
    assert_eq!(p.mat()[(0, 0)], c(0.0, -1.0));
    assert_eq!(p.mat()[(1, 1)], c(0.0, 1.0));
    assert!(!p.flags().hermitian);
}

#[test]
fn pauli_matrix_respects_cap() {
    let p = PauliString::identity(MAX_OPERATOR_QUBITS + 1);
    assert!(matches!(p.to_dense(), Err(Error::DimensionCap { .. })));
}

#[test]
fn parse_rejects_bad_letters() {
    assert!(PauliString::parse("XQ").is_err());
    assert!(PauliString::parse("-").is_err());
    assert_eq!(PauliString::parse("+iXY").unwrap().to_string(), "+iXY");
}

#[test]
fn eig_of_z_and_x() {
    let z = PauliString::parse("Z").unwrap().to_dense().unwrap();
    let es = eig_hermitian(&z).unwrap();
    assert_abs_diff_eq!(es.values[0], -1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(es.values[1], 1.0, epsilon = 1e-14);

    let x = PauliString::parse("X").unwrap().to_dense().unwrap();
    let es = eig_hermitian(&x).unwrap();
    assert_abs_diff_eq!(es.values[0], -1.0, epsilon = 1e-14);
    // ground vector is |-> up to phase
    let v = es.vectors.column(0);
    assert_abs_diff_eq!((v[0] + v[1]).norm(), 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(v[0].norm(), 0.5f64.sqrt(), epsilon = 1e-12);
}

#[test]
fn eig_reconstructs_random_four_qubit() {
    let mut r = seeded(11);
    let h = random_hermitian(4, &mut r).unwrap();
    let es = eig_hermitian(&h).unwrap();
    assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
    let norm = h.op_norm();
    assert!(max_abs(&(es.reconstruct() - h.mat())) <= 1e-9 * norm);
    let v = &es.vectors;
    assert!(max_abs(&(v.adjoint() * v - CMat::identity(16, 16))) <= 1e-10);
    let hv = h.mat() * v;
    let vd = v * CMat::from_diagonal(&DVector::from_iterator(16, es.values.iter().map(|&e| c(e, 0.0))));
    assert!(max_abs(&(hv - vd)) <= 1e-9 * norm);
}

#[test]
fn eig_rejects_non_hermitian() {
    let m = CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
    let op = DenseOperator::new(1, m).unwrap();
    assert!(matches!(eig_hermitian(&op), Err(Error::NotHermitian { .. })));
}

#[test]
fn exp_of_z() {
    let z = PauliString::parse("Z").unwrap().to_dense().unwrap();
    let beta = 0.7;
    let e = exp_hermitian(&z, -beta).unwrap();
    assert_abs_diff_eq!(e.mat()[(0, 0)].re, (-beta).exp(), epsilon = 1e-14);
    assert_abs_diff_eq!(e.mat()[(1, 1)].re, beta.exp(), epsilon = 1e-14);
    assert_abs_diff_eq!(e.mat()[(0, 1)].norm(), 0.0, epsilon = 1e-14);
}

#[test]
fn exp_at_zero_is_identity() {
    let mut r = seeded(3);
    let h = random_hermitian(3, &mut r).unwrap();
    let e = exp_hermitian(&h, 0.0).unwrap();
    assert!(max_abs(&(e.mat() - CMat::identity(8, 8))) < 1e-12);
}

#[test]
fn tfim_partition_function_two_paths() {
    // Z from the exponential's trace against the eigenvalue sum.
    let h = build_tfim_2d(2, 0.6).unwrap();
    let tr = exp_hermitian(&h, -1.0).unwrap().trace().re;
    let vals = hermitian_eigenvalues(h.mat());
    let z: f64 = vals.iter().map(|e| (-e).exp()).sum();
    assert_abs_diff_eq!(tr / z, 1.0, epsilon = 1e-12);
}

#[test]
fn trace_norm_examples() {
    assert_abs_diff_eq!(trace_norm(&CMat::identity(2, 2)), 2.0, epsilon = 1e-14);
    let mut r = seeded(5);
    let rho = random_density(2, &mut r).unwrap();
    assert_abs_diff_eq!(trace_norm(&(rho.mat() - rho.mat())), 0.0, epsilon = 1e-14);
    let z = PauliString::parse("Z").unwrap().to_dense().unwrap();
    assert_abs_diff_eq!(trace_norm(z.mat()), 2.0, epsilon = 1e-14);
}

#[test]
fn superop_identity_channel() {
    let s = vectorize_superop(&[CMat::identity(4, 4)]).unwrap();
    assert!(max_abs(&(s - CMat::identity(16, 16))) < 1e-15);
}

#[test]
fn superop_bit_flip_matches_direct() {
    let p: f64 = 0.3;
    let k = vec![
        CMat::identity(2, 2) * c((1.0 - p).sqrt(), 0.0),
        Pauli::X.matrix() * c(p.sqrt(), 0.0),
    ];
    let s = vectorize_superop(&k).unwrap();
    let rho = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
    let via = unvec(&(&s * vec_of(&rho)), 2);
    let direct = apply_kraus(&k, &rho);
    assert!(max_abs(&(via.clone() - direct)) < 1e-14);
    assert_abs_diff_eq!(via[(1, 1)].re, p, epsilon = 1e-14);
}

#[test]
fn superop_depolarizing_to_maximally_mixed() {
    let k: Vec<CMat> = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
        .iter()
        .map(|p| p.matrix() * c(0.5, 0.0))
        .collect();
    let s = vectorize_superop(&k).unwrap();
    let mut r = seeded(9);
    for _ in 0..5 {
        let rho = random_density(1, &mut r).unwrap();
        let out = unvec(&(&s * vec_of(rho.mat())), 2);
        assert!(max_abs(&(out - CMat::identity(2, 2) * c(0.5, 0.0))) < 1e-14);
    }
}

#[test]
fn superop_cap() {
    let d = 1usize << (MAX_SUPEROPERATOR_QUBITS + 1);
    let k = vec![CMat::identity(d, d)];
    assert!(matches!(vectorize_superop(&k), Err(Error::DimensionCap { .. })));
}

#[test]
fn flags_are_verified() {
    let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
    assert!(DenseOperator::new(1, m.clone()).unwrap().into_hermitian(1e-12).is_err());
    let half = CMat::identity(2, 2) * c(0.5, 0.0);
    assert!(DenseOperator::new(1, half.clone()).unwrap().into_projector(1e-10).is_err());
    assert!(DenseOperator::new(1, half).unwrap().into_density(1e-10).is_ok());
    let neg = CMat::from_row_slice(2, 2, &[c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
    assert!(matches!(
        DenseOperator::new(1, neg).unwrap().into_density(1e-10),
        Err(Error::Positivity(_))
    ));
}

#[test]
fn degenerate_eigenvalues_cluster() {
    let h = PauliString::parse("ZI").unwrap().to_dense().unwrap();
    let es = eig_hermitian(&h).unwrap();
    assert_eq!(es.clusters.len(), 2);
    assert!(es.clusters.iter().all(|r| r.len() == 2));
}

fn random_unitary(n: usize, r: &mut slowmix::rng::Rng) -> CMat {
    let h = random_hermitian(n, r).unwrap();
    unitary_evolution(&eig_hermitian(&h).unwrap(), 1.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pauli_product_and_commutation(a in "[IXYZ]{1,5}", b in "[IXYZ]{1,5}") {
        let n = a.len().min(b.len());
        let p = PauliString::parse(&a[..n]).unwrap();
        let q = PauliString::parse(&b[..n]).unwrap();
        prop_assert!(p.weight() <= n);
        let pq = p.mul(&q).unwrap();
        let dense = p.to_dense().unwrap().mat() * q.to_dense().unwrap().mat();
        prop_assert!(max_abs(&(pq.to_dense().unwrap().mat() - &dense)) < 1e-14);
        let qp = q.to_dense().unwrap().mat() * p.to_dense().unwrap().mat();
        let commute = max_abs(&(&dense - qp)) < 1e-14;
        prop_assert_eq!(commute, p.commutes_with(&q));
    }

    #[test]
    fn exp_semigroup(seed in any::<u64>(), s in -1.5f64..1.5, t in -1.5f64..1.5) {
        let mut r = seeded(seed);
        let h = random_hermitian(3, &mut r).unwrap();
        let es = eig_hermitian(&h).unwrap();
        let a = exp_from_eigen(&es, s).unwrap();
        let b = exp_from_eigen(&es, t).unwrap();
        let ab = exp_from_eigen(&es, s + t).unwrap();
        let scale = max_abs(ab.mat());
        prop_assert!(max_abs(&(a.mat() * b.mat() - ab.mat())) <= 1e-8 * scale);
    }

    #[test]
    fn trace_norm_unitary_invariance(seed in any::<u64>()) {
        let mut r = seeded(seed);
        let a = random_complex_matrix(8, &mut r);
        let u = random_unitary(3, &mut r);
        let v = random_unitary(3, &mut r);
        let lhs = trace_norm(&(&u * &a * &v));
        prop_assert!((lhs - trace_norm(&a)).abs() <= 1e-9 * lhs.max(1.0));
    }
}
