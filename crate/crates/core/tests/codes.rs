use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use slowmix::codes::*;
use slowmix::operator::*;
use std::collections::BTreeSet;

const FIVE_QUBIT: &str = include_str!("data/five_qubit.txt");

fn p(s: &str) -> PauliString {
    PauliString::parse(s).unwrap()
}

fn dense(s: &PauliString) -> CMat {
    s.to_dense().unwrap().into_mat()
}

fn repetition() -> StabilizerCode {
    code_from_checks(vec![p("ZZI"), p("IZZ")]).unwrap()
}

fn anticommute_dense(a: &PauliString, b: &PauliString) -> bool {
    let (x, y) = (dense(a), dense(b));
    max_abs(&(&x * &y + &y * &x)) < 1e-12
}

#[test]
fn construction_examples() {
    let c = repetition();
    assert_eq!((c.n(), c.k()), (3, 1));
    let err = code_from_checks(vec![p("X"), p("Z")]).unwrap_err().to_string();
    assert!(err.contains("0") && err.contains("1"), "{err}");
    assert!(code_from_checks(vec![p("ZZI"), p("IZZ"), p("ZIZ")]).is_err());
    assert!(code_from_checks(vec![]).is_err());
    assert!(code_from_checks(vec![p("ZZ"), p("ZZZ")]).is_err());
}

#[test]
fn check_file_parsing() {
    let c = parse_checks(FIVE_QUBIT).unwrap();
    assert_eq!((c.n(), c.k()), (5, 1));
    assert!(parse_checks("5 2\nXZZXI\nIXZZX\nXIXZZ\nZXIXZ\n").is_err());
    assert!(parse_checks("XZZXI IXZZX\n").is_err());
    assert!(parse_checks("XZQXI\n").is_err());
}

#[test]
fn repetition_hamiltonian() {
    let c = repetition();
    let h = code_hamiltonian(&c).unwrap();
    let m = h.mat();
    // diagonal in the computational basis: energy = violated checks
    assert_abs_diff_eq!(m[(0b000, 0b000)].re, 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(m[(0b111, 0b111)].re, 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(m[(0b010, 0b010)].re, 2.0, epsilon = 1e-14);
    let mut vals = hermitian_eigenvalues(m);
    vals.sort_by(f64::total_cmp);
    let expect = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0];
    for (v, e) in vals.iter().zip(expect) {
        assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
    }
    assert_eq!(syndrome_weight_spectrum(&c), expect.to_vec());
}

#[test]
fn violation_examples() {
    let c = repetition();
    assert_eq!(violations(&c, &p("III")).unwrap(), 0);
    assert_eq!(violations(&c, &p("IXI")).unwrap(), 2);
    assert_eq!(violations(&c, &p("XII")).unwrap(), 1);
    assert_eq!(violations(&c, &p("XXX")).unwrap(), 0);
    assert!(violations(&c, &p("XX")).is_err());
}

#[test]
fn weight_one_expansion_matches_enumeration() {
    let c = repetition();
    let mut best = f64::INFINITY;
    for q in 0..3 {
        for l in [Pauli::X, Pauli::Y, Pauli::Z] {
            let a = PauliString::single(3, q, l).unwrap();
            let v = c.checks().iter().filter(|ch| anticommute_dense(&a, ch)).count();
            best = best.min(v as f64);
        }
    }
    let rep = expansion_check(&c, 2.0, 1.0 / 3.0, ExpansionMode::Exhaustive { budget: 100 }).unwrap();
    assert_eq!(rep.max_weight, 1);
    assert_eq!(rep.checked, 9);
    assert_eq!(rep.min_ratio, best);
    assert!(!rep.holds && rep.certified);
    let none = expansion_check(&c, 2.0, 0.0, ExpansionMode::Exhaustive { budget: 100 }).unwrap();
    assert_eq!(none.checked, 0);
    assert!(none.min_ratio.is_infinite() && none.holds);
}

#[test]
fn logical_operator_refutes_expansion() {
    let c = parse_checks(FIVE_QUBIT).unwrap();
    assert_eq!(code_distance(&c, 10_000).unwrap(), 3);
    assert_eq!(code_distance(&repetition(), 100).unwrap(), 1);

    let below = expansion_check(&c, 0.5, 0.4, ExpansionMode::Exhaustive { budget: 10_000 }).unwrap();
    assert!(below.min_ratio > 0.0 && below.holds);
    let above = expansion_check(&c, 0.5, 0.6, ExpansionMode::Exhaustive { budget: 10_000 }).unwrap();
    assert_eq!(above.min_ratio, 0.0);
    assert!(!above.holds);
    assert_eq!(above.witness_violations, 0);
    assert!(above.witness_is_logical);
    let w = p(above.witness.as_ref().unwrap());
    assert_eq!(w.weight(), 3);
    assert!(c.checks().iter().all(|ch| !anticommute_dense(&w, ch)));
    assert!(expansion_check(&c, 0.5, 1.0, ExpansionMode::Exhaustive { budget: 10 }).is_err());
}

#[test]
fn random_mode_only_refutes() {
    let c = parse_checks(FIVE_QUBIT).unwrap();
    let exact = expansion_check(&c, 0.5, 0.6, ExpansionMode::Exhaustive { budget: 10_000 }).unwrap();
    let rnd = expansion_check(&c, 0.5, 0.6, ExpansionMode::Random { samples: 2000, seed: 4 }).unwrap();
    assert!(!rnd.certified);
    assert_eq!(rnd.checked, 2000);
    assert!(rnd.min_ratio >= exact.min_ratio);
}

#[test]
fn completion_fixes_unique_states() {
    for code in [repetition(), parse_checks(FIVE_QUBIT).unwrap()] {
        let n = code.n();
        let code = code.completed().unwrap();
        let gens: Vec<PauliString> = code.checks().iter().cloned().chain(code.completion().unwrap()).collect();
        assert_eq!(gens.len(), n);
        for a in &gens {
            for b in &gens {
                assert!(!anticommute_dense(a, b));
            }
        }
        let labels: Vec<usize> = (0..1usize << n).collect();
        let mut total = CMat::zeros(1 << n, 1 << n);
        for &s in &labels {
            let proj = syndrome_projector(&code, &[s]).unwrap();
            assert_abs_diff_eq!(proj.trace().re, 1.0, epsilon = 1e-10);
            total += proj.mat();
        }
        assert!(max_abs(&(total - CMat::identity(1 << n, 1 << n))) < 1e-9);
    }
}

#[test]
fn region_examples() {
    let c = repetition().completed().unwrap();
    let r0 = code_regions(&c, 0, 1).unwrap();
    assert_eq!(r0.a, vec![0]);

    let r1 = code_regions(&c, 1, 3).unwrap();
    let gens: Vec<PauliString> = c.checks().iter().cloned().chain(c.completion().unwrap()).collect();
    let mut expect = BTreeSet::from([0usize]);
    for q in 0..3 {
        for l in [Pauli::X, Pauli::Y, Pauli::Z] {
            let a = PauliString::single(3, q, l).unwrap();
            let label = gens.iter().fold(0usize, |acc, g| (acc << 1) | anticommute_dense(&a, g) as usize);
            expect.insert(label);
        }
    }
    assert_eq!(r1.a.iter().cloned().collect::<BTreeSet<_>>(), expect);
    assert!(r1.a.iter().all(|s| !r1.b.contains(s)));

    let pa = syndrome_projector(&c, &r1.a).unwrap();
    let pb = syndrome_projector(&c, &r1.b).unwrap();
    assert!(max_abs(&(pa.mat() * pb.mat())) < 1e-10);

    assert!(code_regions(&repetition(), 0, 1).is_err());
    assert!(code_regions(&c, 2, 1).is_err());
}

#[test]
fn regions_grow_with_weight() {
    let c = parse_checks(FIVE_QUBIT).unwrap().completed().unwrap();
    let mut prev: BTreeSet<usize> = BTreeSet::new();
    for w in 0..=5 {
        let r = code_regions(&c, w, 5).unwrap();
        let now: BTreeSet<usize> = r.a.iter().cloned().collect();
        assert!(prev.is_subset(&now));
        prev = now;
    }
    assert_eq!(prev.len(), 32);
}

#[test]
fn bottleneck_formula() {
    let (n, gamma, alpha, l1, l2) = (20, 0.5, 0.3, 1.0, 0.1);
    let thr = std::f64::consts::LN_2 / (gamma * (alpha - l1 * l2));
    let at = code_bottleneck_bound(n, gamma, alpha, l1, l2, thr).unwrap();
    assert_abs_diff_eq!(at.beta_threshold, thr, epsilon = 1e-12);
    assert_abs_diff_eq!(at.trace_bound, 1.0, epsilon = 1e-9);
    let twice = code_bottleneck_bound(n, gamma, alpha, l1, l2, 2.0 * thr).unwrap();
    let expect = 2f64.powf(-(n as f64) * (2.0 * thr * gamma * (alpha - l1 * l2) / std::f64::consts::LN_2 - 1.0));
    assert_abs_diff_eq!(twice.trace_bound / expect, 1.0, epsilon = 1e-9);
    assert!(code_bottleneck_bound(n, gamma, alpha, l1, l2, 0.5 * thr).is_err());
    assert!(code_bottleneck_bound(n, gamma, 0.1, 1.0, 0.2, 10.0).is_err());
}

#[test]
fn toy_trace_below_bound() {
    // a weight-one logical puts the other code state in B at zero energy
    let rep = repetition().completed().unwrap();
    assert_eq!(code_regions(&rep, 0, 3).unwrap().b_energy_floor(), Some(0));

    let c = parse_checks(FIVE_QUBIT).unwrap().completed().unwrap();
    let r = code_regions(&c, 0, 2).unwrap();
    let floor = r.b_energy_floor().unwrap();
    assert!(floor >= 1);
    // gamma (alpha - l1 l2) n equal to the smallest violation count in B
    let (gamma, alpha) = (1.0, floor as f64 / 5.0);
    let h = code_hamiltonian(&c).unwrap();
    let pb = syndrome_projector(&c, &r.b).unwrap();
    for mult in [1.0, 2.0, 4.0] {
        let beta = mult * std::f64::consts::LN_2 / (gamma * alpha);
        let bound = code_bottleneck_bound(5, gamma, alpha, 0.0, 0.0, beta).unwrap();
        let g = exp_hermitian(&h, -beta).unwrap();
        let dense_trace = (pb.mat() * g.mat()).trace().re;
        assert_abs_diff_eq!(r.b_trace(beta), dense_trace, epsilon = 1e-9);
        assert!(dense_trace <= bound.trace_bound);
    }
}

fn pauli_strategy(n: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('I'), Just('X'), Just('Y'), Just('Z')], n)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn symplectic_commutation_matches_dense(a in pauli_strategy(6), b in pauli_strategy(6)) {
        let (pa, pb) = (p(&a), p(&b));
        let sym = BinaryPauli::from_pauli(&pa).anticommutes(&BinaryPauli::from_pauli(&pb));
        prop_assert_eq!(sym, anticommute_dense(&pa, &pb));
    }

    #[test]
    fn violations_flip_syndromes(a in pauli_strategy(5), label in 0usize..32) {
        let c = parse_checks(FIVE_QUBIT).unwrap().completed().unwrap();
        let pa = p(&a);
        let gens: Vec<PauliString> = c.checks().iter().cloned().chain(c.completion().unwrap()).collect();
        let flip = gens.iter().fold(0usize, |acc, g| (acc << 1) | anticommute_dense(&pa, g) as usize);
        // checks are the high n-k bits of a label
        prop_assert_eq!((flip >> c.k()).count_ones() as usize, violations(&c, &pa).unwrap());
        let ps = syndrome_projector(&c, &[label]).unwrap();
        let pt = syndrome_projector(&c, &[label ^ flip]).unwrap();
        let moved = dense(&pa) * ps.mat();
        prop_assert!(max_abs(&(pt.mat() * &moved - &moved)) < 1e-9);
    }
}

#[test]
fn hamiltonian_spectrum_is_syndrome_weights() {
    let codes = [
        repetition(),
        parse_checks(FIVE_QUBIT).unwrap(),
        code_from_checks(["IIIXXXX", "IXXIIXX", "XIXIXIX", "IIIZZZZ", "IZZIIZZ", "ZIZIZIZ"].iter().map(|s| p(s)).collect()).unwrap(),
    ];
    for c in codes {
        let h = code_hamiltonian(&c).unwrap();
        let mut vals = hermitian_eigenvalues(h.mat());
        vals.sort_by(f64::total_cmp);
        for (v, e) in vals.iter().zip(syndrome_weight_spectrum(&c)) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-9);
        }
    }
}
