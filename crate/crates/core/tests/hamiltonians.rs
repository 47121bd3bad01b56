use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;
use slowmix::hamiltonians::*;
use slowmix::operator::*;
use slowmix::rng::seeded;

fn all_configs(n: usize) -> impl Iterator<Item = Vec<i8>> {
    (0..1usize << n).map(move |i| spins_of(i, n))
}

#[test]
fn curie_weiss_examples() {
    let h = build_curie_weiss(2).unwrap();
    assert_abs_diff_eq!(h.energy(&[1, 1]), -2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(h.energy(&[1, -1]), 0.0, epsilon = 1e-14);
    for n in [1, 3, 7, 12] {
        let h = build_curie_weiss(n).unwrap();
        assert_abs_diff_eq!(h.energy(&vec![1; n]), -(n as f64), epsilon = 1e-12);
        assert_abs_diff_eq!(h.ground_energy().unwrap(), -(n as f64), epsilon = 1e-12);
    }
}

#[test]
fn curie_weiss_oracle_matches_double_sum() {
    let n = 5;
    let h = build_curie_weiss(n).unwrap();
    for s in all_configs(n) {
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                e -= (s[i] * s[j]) as f64 / n as f64;
            }
        }
        assert_abs_diff_eq!(h.energy(&s), e, epsilon = 1e-12);
        assert_abs_diff_eq!(h.energy_from_terms(&s), e, epsilon = 1e-12);
    }
}

#[test]
fn ising_2d_open_l2() {
    let h = build_ising_2d(2, false).unwrap();
    assert_eq!(h.terms().len(), 4);
    let ground = all_configs(4).map(|s| h.energy(&s)).fold(f64::INFINITY, f64::min);
    assert_abs_diff_eq!(ground, -4.0, epsilon = 1e-14);
}

#[test]
fn ising_2d_edge_counts() {
    for l in 2..6 {
        let open = build_ising_2d(l, false).unwrap();
        assert_eq!(open.terms().len(), 2 * l * (l - 1));
        assert_abs_diff_eq!(open.energy(&vec![1; l * l]), -((2 * l * (l - 1)) as f64), epsilon = 1e-12);
    }
    assert_eq!(build_ising_2d(4, true).unwrap().terms().len(), 32);
}

#[test]
fn ising_2d_corner_flip() {
    let h = build_ising_2d(3, false).unwrap();
    let mut s = vec![1i8; 9];
    let ground = h.energy(&s);
    s[0] = -1;
    assert_abs_diff_eq!(h.energy(&s) - ground, 4.0, epsilon = 1e-12);
    assert_abs_diff_eq!(h.flip_delta(&vec![1i8; 9], 0), 4.0, epsilon = 1e-12);
}

#[test]
fn p_spin_determinism_and_count() {
    let a = build_p_spin(6, 3, 42).unwrap();
    let b = build_p_spin(6, 3, 42).unwrap();
    assert_eq!(a.terms(), b.terms());
    assert_ne!(a.terms(), build_p_spin(6, 3, 43).unwrap().terms());
    assert_eq!(build_p_spin(4, 2, 1).unwrap().terms().len(), 6);
    assert!(build_p_spin(3, 4, 1).is_err());
}

#[test]
fn p_spin_energy_variance() {
    // Var E(sigma) over couplings is C(n,p) * n^{-(p-1)} for any fixed sigma.
    let (n, p) = (12usize, 3usize);
    let expected = 220.0 / 144.0;
    let mut r = seeded(7);
    let seeds = 4000;
    let es: Vec<f64> = (0..seeds)
        .map(|k| {
            let h = build_p_spin(n, p, 1000 + k).unwrap();
            let s: Vec<i8> = (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
            h.energy(&s)
        })
        .collect();
    let mean = es.iter().sum::<f64>() / seeds as f64;
    let var = es.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
    // stderr of a Gaussian sample variance
    let se = expected * (2.0 / (seeds - 1) as f64).sqrt();
    assert!((var - expected).abs() < 3.0 * se, "var {var} vs {expected} (se {se})");
}

#[test]
fn ksat_examples() {
    let clause = vec![
        Literal { var: 0, negated: false },
        Literal { var: 1, negated: false },
        Literal { var: 2, negated: false },
    ];
    let h = ksat_from_clauses(3, vec![clause]).unwrap();
    assert_abs_diff_eq!(h.energy(&[-1, -1, -1]), 1.0, epsilon = 1e-14);
    for s in all_configs(3).filter(|s| s.iter().any(|&x| x > 0)) {
        assert_abs_diff_eq!(h.energy(&s), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h.energy_from_terms(&s), 0.0, epsilon = 1e-14);
    }
}

#[test]
fn ksat_structure_and_two_paths() {
    let h = build_ksat(10, 40, 4, 5).unwrap();
    match h.family() {
        Family::KSat { clauses } => {
            assert_eq!(clauses.len(), 40);
            for c in clauses {
                let mut v: Vec<usize> = c.iter().map(|l| l.var).collect();
                v.dedup();
                assert_eq!(v.len(), 4);
            }
        }
        f => panic!("unexpected family {f:?}"),
    }
    let dense = h.to_dense().unwrap();
    let mut r = seeded(99);
    for _ in 0..100 {
        let i = r.random_range(0..1usize << 10);
        let s = spins_of(i, 10);
        assert_abs_diff_eq!(h.energy(&s), dense.mat()[(i, i)].re, epsilon = 1e-10);
    }
}

#[test]
fn satisfying_assignment_has_zero_energy() {
    let h = build_ksat(8, 6, 3, 17).unwrap();
    let diag = h.diagonal().unwrap();
    let best = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    // 6 random 3-clauses on 8 variables are always satisfiable
    assert_eq!(best, 0.0);
}

#[test]
fn tfim_field_free_matches_ising() {
    let t = build_tfim_2d(2, 0.0).unwrap();
    let i = build_ising_2d(2, false).unwrap().to_dense().unwrap();
    assert!(max_abs(&(t.mat() - i.mat())) < 1e-14);
}

#[test]
fn tfim_ground_energy_and_stoquastic() {
    let h = build_tfim_2d(2, 1.0).unwrap();
    // independent construction from Pauli strings
    let mut m = CMat::zeros(16, 16);
    for (a, b) in [(0, 1), (2, 3), (0, 2), (1, 3)] {
        m -= PauliString::on_sites(4, &[a, b], Pauli::Z).unwrap().to_dense().unwrap().into_mat();
    }
    for s in 0..4 {
        m -= PauliString::single(4, s, Pauli::X).unwrap().to_dense().unwrap().into_mat();
    }
    assert!(max_abs(&(h.mat() - &m)) < 1e-14);
    let e0 = eig_hermitian(&h).unwrap().values[0];
    let oracle = hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
    assert_abs_diff_eq!(e0, oracle, epsilon = 1e-10);
    for h in [0.0, 0.3, 2.5] {
        let t = build_tfim_2d(2, h).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                if i != j {
                    assert!(t.mat()[(i, j)].re <= 0.0 && t.mat()[(i, j)].im == 0.0);
                }
            }
        }
    }
}

#[test]
fn tfim_respects_cap() {
    assert!(build_tfim_2d(4, 1.0).is_err());
}

#[test]
fn bohr_examples() {
    let z = PauliString::parse("Z").unwrap().to_dense().unwrap();
    let b = bohr_spectrum(&eig_hermitian(&z).unwrap(), 1e-8).unwrap();
    assert_eq!(b.frequencies, vec![-2.0, 0.0, 2.0]);

    let id = DenseOperator::new(2, CMat::identity(4, 4)).unwrap();
    let b = bohr_spectrum(&eig_hermitian(&id).unwrap(), 1e-8).unwrap();
    assert_eq!(b.frequencies, vec![0.0]);

    let zz = DenseOperator::new(
        2,
        PauliString::parse("ZI").unwrap().to_dense().unwrap().into_mat()
            + PauliString::parse("IZ").unwrap().to_dense().unwrap().into_mat(),
    )
    .unwrap();
    let b = bohr_spectrum(&eig_hermitian(&zz).unwrap(), 1e-8).unwrap();
    let f: Vec<f64> = b.frequencies.iter().map(|x| x.round()).collect();
    assert_eq!(f, vec![-4.0, -2.0, 0.0, 2.0, 4.0]);
    assert!(bohr_spectrum(&eig_hermitian(&zz).unwrap(), 0.0).is_err());
}

fn check_bohr(h: &DenseOperator) {
    let es = eig_hermitian(h).unwrap();
    let tol = bohr_tolerance(h.op_norm());
    let b = bohr_spectrum(&es, tol).unwrap();
    let f = &b.frequencies;
    assert!(f.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(f[b.zero_index()], 0.0);
    for (k, v) in f.iter().enumerate() {
        assert_abs_diff_eq!(*v, -f[f.len() - 1 - k], epsilon = 1e-12);
    }
    let d = es.dim();
    for i in 0..d {
        for j in 0..d {
            let nu = b.pair_frequency(i, j);
            assert!((nu - (es.values[i] - es.values[j])).abs() <= 10.0 * tol);
        }
    }
}

#[test]
fn bohr_invariants_on_builders() {
    check_bohr(&build_tfim_2d(2, 0.7).unwrap());
    check_bohr(&build_ising_2d(2, true).unwrap().to_dense().unwrap());
    check_bohr(&build_curie_weiss(4).unwrap().to_dense().unwrap());
    check_bohr(&build_p_spin(5, 3, 3).unwrap().to_dense().unwrap());
    check_bohr(&build_ksat(5, 8, 3, 3).unwrap().to_dense().unwrap());
    check_bohr(&build_ising_1d(5, 1.0, true).unwrap().to_dense().unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_matches_dense_diagonal(seed in any::<u64>(), family in 0usize..5) {
        let h = match family {
            0 => build_curie_weiss(6).unwrap(),
            1 => build_ising_2d(3, seed % 2 == 0).unwrap(),
            2 => build_p_spin(7, 2 + (seed % 3) as usize, seed).unwrap(),
            3 => build_ksat(7, 12, 3, seed).unwrap(),
            _ => build_ising_1d(8, 0.5 + (seed % 7) as f64, seed % 2 == 1).unwrap(),
        };
        let dense = h.to_dense().unwrap();
        let n = h.n();
        let m = dense.mat();
        for i in 0..1usize << n {
            prop_assert!((h.energy_of_index(i) - m[(i, i)].re).abs() <= 1e-10);
        }
        prop_assert!(dense.flags().hermitian);
        let off = (0..1usize << n).flat_map(|i| (0..1usize << n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .all(|(i, j)| m[(i, j)].norm() == 0.0);
        prop_assert!(off);
    }

    #[test]
    fn flip_delta_consistent(seed in any::<u64>(), site in 0usize..9) {
        let h = build_p_spin(9, 3, seed).unwrap();
        let mut r = seeded(seed);
        let s: Vec<i8> = (0..9).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect();
        let mut t = s.clone();
        t[site] = -t[site];
        prop_assert!((h.flip_delta(&s, site) - (h.energy(&t) - h.energy(&s))).abs() < 1e-10);
    }
}
