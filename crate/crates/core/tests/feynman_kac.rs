use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use slowmix::bottleneck::{Region, RegionLabel};
use slowmix::classical::linear_fit;
use slowmix::feynman_kac::*;
use slowmix::hamiltonians::{build_ising_1d, build_ising_2d, build_tfim_2d, DiagonalHamiltonian};
use slowmix::lattice::{c0_regions, flip_side, min_defect_fault_line, SpinConfiguration};
use slowmix::operator::*;
use slowmix::rng::seeded;

fn dense_element(l: usize, h: f64, beta: f64, s: &[i8], t: &[i8]) -> f64 {
    let m = exp_hermitian(&build_tfim_2d(l, h).unwrap(), -beta).unwrap();
    m.mat()[(index_of_spins(s), index_of_spins(t))].re
}

fn random_spins(n: usize, r: &mut impl Rng) -> Vec<i8> {
    (0..n).map(|_| if r.random::<bool>() { 1 } else { -1 }).collect()
}

fn two_phase(l: usize) -> SpinConfiguration {
    let spins = (0..l * l).map(|s| if s / l < l / 2 { 1 } else { -1 }).collect();
    SpinConfiguration::new(l, spins).unwrap()
}

#[test]
fn path_without_rate() {
    let mut r = seeded(1);
    let p = sample_conditioned_path(5, 0.0, &[0; 5], &mut r).unwrap();
    assert!((0..5).all(|i| p.flip_count(i) == 0));
    assert!(sample_conditioned_path(2, 0.0, &[0, 1], &mut r).is_err());
}

#[test]
fn path_invariants() {
    let mut r = seeded(2);
    let parities = [0, 1, 1, 0, 1, 0];
    for _ in 0..200 {
        let p = sample_conditioned_path(6, 1.7, &parities, &mut r).unwrap();
        for (i, &par) in parities.iter().enumerate() {
            let t = p.flip_times(i);
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            assert!(t.iter().all(|&x| x > 0.0 && x < 1.0));
            assert_eq!(p.parity(i), par);
            let sign_end = p.sign_at(i, 1.0);
            assert_eq!(sign_end, if par == 1 { -1 } else { 1 });
            if let Some(&first) = t.first() {
                // right-continuous: the flip has happened at its own time
                assert_eq!(p.sign_at(i, first), -1);
                assert_eq!(p.sign_at(i, first * 0.999), 1);
            }
        }
    }
}

#[test]
fn conditioned_flip_count_moments() {
    let x: f64 = 1.0;
    let mut r = seeded(3);
    let sites = 10;
    let draws = 10_000;
    let mut counts = Vec::with_capacity(sites * draws);
    for _ in 0..draws {
        let p = sample_conditioned_path(sites, x, &[0; 10], &mut r).unwrap();
        counts.extend((0..sites).map(|i| p.flip_count(i) as f64));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let expect = x * x.tanh();
    assert!((mean - expect).abs() < 3.0 * (var / n).sqrt(), "{mean} vs {expect}");

    let frac = counts.iter().filter(|&&c| c > 0.0).count() as f64 / n;
    let q = (x.cosh() - 1.0) / x.cosh();
    assert!((frac - q).abs() < 3.0 * (q * (1.0 - q) / n).sqrt(), "{frac} vs {q}");
}

#[test]
fn action_examples() {
    let h0 = build_ising_1d(2, 1.0, false).unwrap();
    let still = PoissonPath::new(0.5, vec![vec![], vec![]]).unwrap();
    for s in [[1i8, 1], [1, -1]] {
        assert_abs_diff_eq!(action_integral(&still, &h0, &s).unwrap(), -h0.energy(&s), epsilon = 1e-14);
    }
    // one flip at t = 1/2: half the time aligned (E = -1), half anti-aligned (E = +1)
    let half = PoissonPath::new(0.5, vec![vec![0.5], vec![]]).unwrap();
    assert_abs_diff_eq!(action_integral(&half, &h0, &[1, 1]).unwrap(), 0.0, epsilon = 1e-14);
    let early = PoissonPath::new(0.5, vec![vec![0.25], vec![]]).unwrap();
    assert_abs_diff_eq!(action_integral(&early, &h0, &[1, 1]).unwrap(), 0.25 - 0.75, epsilon = 1e-14);
    assert!(PoissonPath::new(0.5, vec![vec![0.6, 0.3]]).is_err());
    assert!(PoissonPath::new(0.5, vec![vec![1.0]]).is_err());
}

#[test]
fn action_mirror_symmetry() {
    let h0 = build_ising_2d(3, false).unwrap();
    let mut r = seeded(4);
    for _ in 0..100 {
        let p = sample_conditioned_path(9, 1.3, &[0; 9], &mut r).unwrap();
        let s = random_spins(9, &mut r);
        let a = action_integral(&p, &h0, &s).unwrap();
        let b = action_integral(&p.mirrored(), &h0, &s).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn fk_zero_field_is_exact() {
    let h0 = build_ising_2d(2, false).unwrap();
    let mut r = seeded(5);
    let s = [1i8, -1, 1, 1];
    let est = fk_matrix_element(&h0, 0.0, 1.5, &s, &s, 100, &mut r).unwrap();
    assert_abs_diff_eq!(est.mean, (-1.5 * h0.energy(&s)).exp(), epsilon = 1e-12);
    assert!(est.stderr <= 1e-9 * est.mean);
    let off = fk_matrix_element(&h0, 0.0, 1.5, &s, &[1, 1, 1, 1], 100, &mut r).unwrap();
    assert_eq!(off.mean, 0.0);
}

#[test]
fn fk_free_spin() {
    let h0 = DiagonalHamiltonian::new(1, vec![]).unwrap();
    let mut r = seeded(6);
    let (beta, h) = (1.3, 0.8);
    let est = fk_matrix_element(&h0, h, beta, &[1], &[1], 1000, &mut r).unwrap();
    assert_abs_diff_eq!(est.mean, (beta * h).cosh(), epsilon = 1e-12);
    assert!(est.stderr <= 1e-9 * est.mean);
    let off = fk_matrix_element(&h0, h, beta, &[1], &[-1], 1000, &mut r).unwrap();
    assert_abs_diff_eq!(off.mean, (beta * h).sinh(), epsilon = 1e-12);
}

#[test]
fn fk_plaquette_against_dense() {
    let h0 = build_ising_2d(2, false).unwrap();
    let (beta, h) = (1.0, 0.5);
    let s = [1i8; 4];
    let mut r = seeded(7);
    let est = fk_matrix_element(&h0, h, beta, &s, &s, 100_000, &mut r).unwrap();
    let oracle = dense_element(2, h, beta, &s, &s);
    assert!((est.mean - oracle).abs() <= 3.0 * est.stderr, "{} vs {oracle} ({})", est.mean, est.stderr);
    assert!(est.relative_stderr() < 0.02);
    assert_abs_diff_eq!(est.prefactor, (beta * h).cosh().powi(4), epsilon = 1e-12);
}

#[test]
fn fk_random_pairs_against_dense() {
    let (l, beta, h) = (2, 0.8, 0.6);
    let h0 = build_ising_2d(l, false).unwrap();
    let m = exp_hermitian(&build_tfim_2d(l, h).unwrap(), -beta).unwrap();
    let mut r = seeded(8);
    for _ in 0..50 {
        let s = random_spins(4, &mut r);
        let t = random_spins(4, &mut r);
        let est = fk_matrix_element(&h0, h, beta, &s, &t, 20_000, &mut r).unwrap();
        let oracle = m.mat()[(index_of_spins(&s), index_of_spins(&t))].re;
        assert!(est.mean >= 0.0);
        assert!((est.mean - oracle).abs() <= 4.0 * est.stderr, "{s:?} {t:?}: {} vs {oracle}", est.mean);
    }
}

#[test]
fn fk_orientation_symmetry() {
    let h0 = build_ising_2d(2, false).unwrap();
    let mut r = seeded(9);
    let s = [1i8, 1, -1, 1];
    let t = [1i8, -1, -1, -1];
    let a = fk_matrix_element(&h0, 0.7, 1.2, &s, &t, 50_000, &mut r).unwrap();
    let b = fk_matrix_element(&h0, 0.7, 1.2, &t, &s, 50_000, &mut r).unwrap();
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 4.0 * se);
}

#[test]
fn fk_stderr_scaling() {
    let h0 = build_ising_2d(2, false).unwrap();
    let s = [1i8; 4];
    let mut r = seeded(10);
    let ns = [1_000usize, 10_000, 100_000, 1_000_000];
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ns
        .iter()
        .map(|&n| fk_matrix_element(&h0, 0.5, 0.5, &s, &s, n, &mut r).unwrap().stderr.ln())
        .collect();
    let (slope, _, _) = linear_fit(&xs, &ys);
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
}

#[test]
fn fk_is_deterministic_per_seed() {
    let h0 = build_ising_2d(2, false).unwrap();
    let s = [1i8, -1, 1, -1];
    let a = fk_matrix_element(&h0, 0.4, 1.0, &s, &s, 30_000, &mut seeded(11)).unwrap();
    let b = fk_matrix_element(&h0, 0.4, 1.0, &s, &s, 30_000, &mut seeded(11)).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.stderr, b.stderr);
}

#[test]
fn dense_gibbs_operator_is_nonnegative() {
    for h in [0.1, 0.5, 1.5] {
        let t = build_tfim_2d(2, h).unwrap();
        assert!(is_stoquastic(&t, 1e-14));
        let m = exp_hermitian(&t, -1.0).unwrap();
        assert!(m.mat().iter().all(|z| z.re >= -1e-12));
    }
    let y = PauliString::parse("YY").unwrap().to_dense().unwrap();
    let x = PauliString::parse("XI").unwrap().to_dense().unwrap();
    assert!(!is_stoquastic(&x, 1e-14));
    assert!(!is_stoquastic(&y.add(&x.scale(C64::new(-1.0, 0.0))).unwrap(), 1e-14));
}

#[test]
fn hbound_examples() {
    let h0 = build_ising_1d(6, 1.0, false).unwrap();
    let plus = Region::from_predicate(6, RegionLabel::A, |i| spins_of(i, 6).iter().map(|&s| s as i32).sum::<i32>() > 0)
        .unwrap();
    let zero = hbound_audit(&h0, 0.0, 1.0, &plus).unwrap();
    assert_eq!(zero.bound, 0.0);
    assert!(zero.log_ratio < 1e-12 && zero.pass);

    let rep = hbound_audit(&h0, 0.2, 1.0, &plus).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.log_ratio > 0.0);
    let all = Region::from_predicate(6, RegionLabel::A, |_| true).unwrap();
    let rep = hbound_audit(&h0, 0.2, 1.0, &all).unwrap();
    assert!(rep.pass, "{rep:?}");

    // independent dense evaluation of the same log ratio
    let h = build_ising_1d(6, 1.0, false).unwrap();
    let tf = slowmix::hamiltonians::TransverseField::new(&h, 0.2).unwrap().to_dense().unwrap();
    let q = exp_hermitian(&tf, -1.0).unwrap().trace().re;
    let c: f64 = h.diagonal().unwrap().iter().map(|e| (-e).exp()).sum();
    assert_abs_diff_eq!(rep.log_ratio, (q / c).ln().abs(), epsilon = 1e-9);

    assert!(hbound_audit(&h0, 1.5, 1.0, &all).is_err());
}

#[test]
fn decoupling_commuting_case() {
    let h = build_tfim_2d(2, 0.0).unwrap();
    let a = Region::from_bitstrings(4, RegionLabel::A, &["0000", "0001"]).unwrap();
    let c = Region::from_bitstrings(4, RegionLabel::C, &["1111"]).unwrap();
    let rep = decoupling_estimate(&h, &a, &c, 1.0, 0.25).unwrap();
    assert_eq!(rep.exact, 0.0);
}

#[test]
fn decoupling_tfim_plaquette() {
    let (beta, h) = (1.0, 0.2);
    let t = build_tfim_2d(2, h).unwrap();
    let [a, _, c] = c0_regions(2, 1.0).unwrap();
    let rep = decoupling_estimate(&t, &a, &c, beta, 1.0 / 16.0).unwrap();
    assert!(rep.exact <= rep.bound);
    assert!(rep.exact > 0.0);

    let mut prev = f64::INFINITY;
    for delta in [0.25, 1.0 / 16.0, 1.0 / 64.0] {
        let b = tfim_norm_bound(delta, beta, h, 4, 3.0).unwrap() / delta;
        assert!(b <= prev);
        prev = b;
    }
    assert!(decoupling_estimate(&t, &a, &c, beta, 0.3).is_err());
    let y = PauliString::parse("YYII").unwrap().to_dense().unwrap();
    assert!(decoupling_estimate(&t.add(&y).unwrap(), &a, &c, beta, 0.25).is_err());
}

#[test]
fn fault_ratio_classical() {
    let beta = 0.7;
    let sigma = two_phase(4);
    let rep = fault_ratio_audit(&sigma, None, 0.0, beta, RatioMode::Exact).unwrap();
    assert_eq!(rep.defects, 0);
    let expect = (2.0 * beta * (rep.length as f64 - 2.0 * rep.defects as f64)).exp();
    assert_abs_diff_eq!(rep.ratio / expect, 1.0, epsilon = 1e-9);
    assert!(rep.pass);

    let line = min_defect_fault_line(&sigma, 0).unwrap();
    let flipped = flip_side(&sigma, &line).unwrap();
    assert_eq!(flipped, SpinConfiguration::uniform(4, 1));
    assert_abs_diff_eq!(
        sigma.ising_energy() - flipped.ising_energy(),
        2.0 * line.length as f64,
        epsilon = 1e-12
    );
}

#[test]
fn fault_ratio_quantum_plaquette() {
    let sigma = SpinConfiguration::parse("+ + -\n+ + -\n+ + -").unwrap();
    let line = min_defect_fault_line(&sigma, 9).unwrap();
    let rep = fault_ratio_audit(&sigma, Some(&line), 0.1, 2.0, RatioMode::Exact).unwrap();
    assert!(rep.pass, "{rep:?}");
    let mc = fault_ratio_audit(&sigma, Some(&line), 0.1, 2.0, RatioMode::MonteCarlo { samples: 20_000, seed: 3 }).unwrap();
    assert!((mc.ratio.ln() - rep.ratio.ln()).abs() <= 4.0 * mc.log_stderr + 1e-12);
}

#[test]
fn fault_ratio_balanced_line() {
    let (lo, hi) = fault_ratio_bracket(1.5, 0.0, 4, 2);
    assert!(lo <= 1.0 && hi >= 1.0);
    let (lo, hi) = fault_ratio_bracket(1.5, 0.3, 6, 3);
    assert!(lo <= 1.0 && hi >= 1.0);
    assert!(lo < hi);
}

#[test]
fn midratio_pathwise() {
    let sigma = two_phase(4);
    let line = min_defect_fault_line(&sigma, 0).unwrap();
    let mut r = seeded(12);
    let mut touched = 0;
    for _ in 0..500 {
        let p = sample_conditioned_path(16, 0.4, &[0; 16], &mut r).unwrap();
        let chk = midratio_check(&sigma, &line, &p, 1.5).unwrap();
        assert!(chk.pass, "{chk:?}");
        touched += chk.touched;
    }
    assert!(touched > 0);
}

#[test]
fn stratum_brackets() {
    let h0 = build_ising_2d(2, false).unwrap();
    let sigma = [1i8; 4];
    for m in [1, 2] {
        let chk = stratum_check(&h0, 0.5, 1.0, &sigma, &[1, 3], m, 20_000, 77).unwrap();
        assert!(chk.pass, "{chk:?}");
    }
    assert!(stratum_check(&h0, 0.5, 1.0, &sigma, &[1, 3], 3, 100, 1).is_err());
}

fn nonneg_matrix(d: usize, vals: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| vals[(i * d + j) % vals.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projector_insertion_never_increases(vals in proptest::collection::vec(0.0f64..3.0, 16), wals in proptest::collection::vec(0.0f64..3.0, 16), mask in proptest::collection::vec(any::<bool>(), 4)) {
        let a = nonneg_matrix(4, &vals);
        let b = nonneg_matrix(4, &wals);
        prop_assert!(projector_insertion_gap(&a, &b, &mask).unwrap() <= 1e-12);
    }

    #[test]
    fn sandwich_power_never_increases(beta in 0.1f64..2.0, h in 0.0f64..1.5, bits in 0usize..16, gamma in 1.0f64..4.0) {
        // e^{-beta H / 2} for a stoquastic H is symmetric PSD and entrywise nonnegative
        let t = build_tfim_2d(2, h).unwrap();
        let m = exp_hermitian(&t, -beta / 2.0).unwrap();
        let a = DMatrix::from_fn(16, 16, |i, j| m.mat()[(i, j)].re);
        let mask: Vec<bool> = (0..16).map(|i| (i >> (i % 4)) & 1 == (bits >> (i % 4)) & 1).collect();
        let scale = a.iter().fold(0.0f64, |x, y| x.max(y.abs())).powf(2.0);
        prop_assert!(sandwich_power_gap(&a, &mask, gamma).unwrap() <= 1e-9 * scale.max(1.0));
    }
}
