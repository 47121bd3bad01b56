//! Stabilizer codes in binary symplectic form: validation, completion to a
//! full commuting set, code Hamiltonians, small-set expansion, and the
//! syndrome-space bottleneck regions.

use crate::error::{invalid, Error, Result};
use crate::operator::{check_operator_cap, CMat, DenseOperator, Pauli, PauliString, Phase, C64};
use crate::rng;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;

/// GF(2) vector over `2n` coordinates: `x` bits then `z` bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryPauli {
    n: usize,
    words: Vec<u64>,
}

impl BinaryPauli {
    pub fn identity(n: usize) -> Self {
        BinaryPauli {
            n,
            words: vec![0; (2 * n).div_ceil(64)],
        }
    }

    pub fn from_pauli(p: &PauliString) -> Self {
        let mut b = BinaryPauli::identity(p.n());
        for (q, l) in p.letters().iter().enumerate() {
            if l.has_x() {
                b.set(q, true);
            }
            if l.has_z() {
                b.set(p.n() + q, true);
            }
        }
        b
    }

    /// Hermitian Pauli with these bits (`Y` where both are set).
    pub fn to_pauli(&self) -> PauliString {
        let letters = (0..self.n).map(|q| Pauli::from_xz(self.x(q), self.z(q))).collect();
        PauliString::new(letters, Phase(0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set(&mut self, i: usize, v: bool) {
        if v {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn x(&self, q: usize) -> bool {
        self.get(q)
    }

    pub fn z(&self, q: usize) -> bool {
        self.get(self.n + q)
    }

    pub fn is_identity(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        (0..self.n).filter(|&q| self.x(q) || self.z(q)).count()
    }

    /// Product up to phase.
    pub fn mul(&self, other: &BinaryPauli) -> BinaryPauli {
        BinaryPauli {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        }
    }

    fn xor_assign(&mut self, other: &BinaryPauli) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Symplectic form: true when the two Paulis anticommute.
    pub fn anticommutes(&self, other: &BinaryPauli) -> bool {
        let mut parity = 0u32;
        for q in 0..self.n {
            parity += ((self.x(q) && other.z(q)) ^ (self.z(q) && other.x(q))) as u32;
        }
        parity % 2 == 1
    }

    fn leading(&self) -> Option<usize> {
        (0..2 * self.n).find(|&i| self.get(i))
    }
}

/// Row-reduced GF(2) span with pivot lookup.
#[derive(Clone, Debug)]
struct Span {
    rows: Vec<(usize, BinaryPauli)>,
}

impl Span {
    fn new() -> Self {
        Span { rows: Vec::new() }
    }

    fn reduce(&self, v: &BinaryPauli) -> BinaryPauli {
        let mut v = v.clone();
        for (p, r) in &self.rows {
            if v.get(*p) {
                v.xor_assign(r);
            }
        }
        v
    }

    /// Adds `v`; false if it was already in the span.
    fn insert(&mut self, v: &BinaryPauli) -> bool {
        let r = self.reduce(v);
        match r.leading() {
            None => false,
            Some(p) => {
                for (_, row) in self.rows.iter_mut() {
                    if row.get(p) {
                        row.xor_assign(&r);
                    }
                }
                self.rows.push((p, r));
                true
            }
        }
    }

    fn contains(&self, v: &BinaryPauli) -> bool {
        self.reduce(v).is_identity()
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Clone, Debug)]
pub struct StabilizerCode {
    n: usize,
    k: usize,
    checks: Vec<PauliString>,
    sym: Vec<BinaryPauli>,
    completion: Option<Vec<BinaryPauli>>,
}

/// Validates commutation and independence of a check list.
pub fn code_from_checks(checks: Vec<PauliString>) -> Result<StabilizerCode> {
    let Some(first) = checks.first() else {
        return invalid("a code needs at least one check");
    };
    let n = first.n();
    for (i, c) in checks.iter().enumerate() {
        if c.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: c.n() });
        }
        if c.phase().0 % 2 == 1 {
            return invalid(format!("check {i} has an imaginary phase and is not Hermitian"));
        }
    }
    let sym: Vec<BinaryPauli> = checks.iter().map(BinaryPauli::from_pauli).collect();
    for i in 0..sym.len() {
        for j in i + 1..sym.len() {
            if sym[i].anticommutes(&sym[j]) {
                return invalid(format!("checks {i} and {j} anticommute"));
            }
        }
    }
    let mut span = Span::new();
    for (i, s) in sym.iter().enumerate() {
        if !span.insert(s) {
            return invalid(format!(
                "check {i} depends on the earlier checks (rank {} < {})",
                span.rank(),
                sym.len()
            ));
        }
    }
    if sym.len() > n {
        return invalid(format!("{} independent checks on {n} qubits", sym.len()));
    }
    Ok(StabilizerCode {
        n,
        k: n - sym.len(),
        checks,
        sym,
        completion: None,
    })
}

/// Reads one Pauli string per line (`#` comments allowed) with an optional
/// leading `n k` header.
pub fn parse_checks(text: &str) -> Result<StabilizerCode> {
    let mut header: Option<(usize, usize)> = None;
    let mut checks = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if checks.is_empty() && header.is_none() && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            header = Some((fields[0].parse().unwrap(), fields[1].parse().unwrap()));
            continue;
        }
        if fields.len() != 1 {
            return Err(Error::Parse(format!("line {}: expected one Pauli string", lineno + 1)));
        }
        checks.push(PauliString::parse(fields[0]).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?);
    }
    let code = code_from_checks(checks)?;
    if let Some((n, k)) = header {
        if n != code.n || k != code.k {
            return Err(Error::Parse(format!(
                "header says n={n}, k={k} but the checks give n={}, k={}",
                code.n, code.k
            )));
        }
    }
    Ok(code)
}

impl StabilizerCode {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn checks(&self) -> &[PauliString] {
        &self.checks
    }

    pub fn symplectic(&self) -> &[BinaryPauli] {
        &self.sym
    }

    pub fn completion(&self) -> Option<Vec<PauliString>> {
        self.completion.as_ref().map(|c| c.iter().map(BinaryPauli::to_pauli).collect())
    }

    /// Checks then completion, as binary vectors.
    pub fn generators(&self) -> Result<Vec<BinaryPauli>> {
        let c = self
            .completion
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("code has no completion".into()))?;
        Ok(self.sym.iter().chain(c).cloned().collect())
    }

    /// Max number of checks acting on one qubit.
    pub fn max_checks_per_qubit(&self) -> usize {
        (0..self.n)
            .map(|q| self.sym.iter().filter(|c| c.x(q) || c.z(q)).count())
            .max()
            .unwrap_or(0)
    }

    /// Basis of the centralizer `{p : p commutes with every check}`.
    fn centralizer(&self) -> Vec<BinaryPauli> {
        // p commutes with c iff p.x . c.z + p.z . c.x = 0: nullspace of rows (c.z | c.x)
        let n = self.n;
        let rows: Vec<BinaryPauli> = self
            .sym
            .iter()
            .map(|c| {
                let mut r = BinaryPauli::identity(n);
                for q in 0..n {
                    r.set(q, c.z(q));
                    r.set(n + q, c.x(q));
                }
                r
            })
            .collect();
        let mut span = Span::new();
        for r in &rows {
            span.insert(r);
        }
        let pivots: Vec<usize> = span.rows.iter().map(|r| r.0).collect();
        (0..2 * n)
            .filter(|f| !pivots.contains(f))
            .map(|f| {
                let mut v = BinaryPauli::identity(n);
                v.set(f, true);
                for (p, r) in &span.rows {
                    if r.get(f) {
                        v.set(*p, true);
                    }
                }
                v
            })
            .collect()
    }

    /// Extends the checks by `k` commuting logical operators so that the
    /// `n` generators fix a unique eigenbasis. Lexicographically first pivots.
    pub fn complete(&mut self) -> Result<()> {
        let mut span = Span::new();
        for s in &self.sym {
            span.insert(s);
        }
        let mut reps: Vec<BinaryPauli> = Vec::new();
        for v in self.centralizer() {
            if span.insert(&v) {
                reps.push(v);
            }
        }
        if reps.len() != 2 * self.k {
            return Err(Error::NoConvergence(format!(
                "found {} logical representatives, expected {}",
                reps.len(),
                2 * self.k
            )));
        }
        let mut chosen = Vec::new();
        while let Some(v) = (!reps.is_empty()).then(|| reps.remove(0)) {
            let Some(j) = reps.iter().position(|w| v.anticommutes(w)) else {
                return Err(Error::NoConvergence("logical operators have no symplectic partner".into()));
            };
            let w = reps.remove(j);
            for u in reps.iter_mut() {
                let (cw, cv) = (u.anticommutes(&w), u.anticommutes(&v));
                if cw {
                    u.xor_assign(&v);
                }
                if cv {
                    u.xor_assign(&w);
                }
            }
            chosen.push(v);
        }
        self.completion = Some(chosen);
        Ok(())
    }

    pub fn completed(mut self) -> Result<Self> {
        self.complete()?;
        Ok(self)
    }

    /// Syndrome of `p` against the checks (true = anticommutes).
    pub fn syndrome(&self, p: &BinaryPauli) -> Vec<bool> {
        self.sym.iter().map(|c| c.anticommutes(p)).collect()
    }

    /// True if `p` commutes with every check but is not a stabilizer.
    pub fn is_logical(&self, p: &BinaryPauli) -> bool {
        if self.syndrome(p).iter().any(|&b| b) {
            return false;
        }
        let mut span = Span::new();
        for s in &self.sym {
            span.insert(s);
        }
        !span.contains(p)
    }
}

/// `sum_i (I - C_i) / 2`.
pub fn code_hamiltonian(code: &StabilizerCode) -> Result<DenseOperator> {
    check_operator_cap(code.n)?;
    let d = 1usize << code.n;
    let mut m = CMat::zeros(d, d);
    for c in &code.checks {
        for i in 0..d {
            m[(i, i)] += C64::new(0.5, 0.0);
        }
        for (i, j, v) in c.entries() {
            m[(i, j)] -= v * 0.5;
        }
    }
    DenseOperator::new(code.n, m)?.into_hermitian(1e-12)
}

/// Syndrome weights `|s|` for `s` in `{0,1}^{n-k}`, each repeated `2^k` times, sorted.
pub fn syndrome_weight_spectrum(code: &StabilizerCode) -> Vec<f64> {
    let m = code.n - code.k;
    let mut out = Vec::with_capacity(1 << code.n);
    for s in 0..1usize << m {
        for _ in 0..1usize << code.k {
            out.push(s.count_ones() as f64);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Number of checks anticommuting with `a`.
pub fn violations(code: &StabilizerCode, a: &PauliString) -> Result<usize> {
    if a.n() != code.n {
        return Err(Error::DimensionMismatch { expected: code.n, got: a.n() });
    }
    let b = BinaryPauli::from_pauli(a);
    Ok(code.syndrome(&b).iter().filter(|&&x| x).count())
}

/// Minimum weight of a logical operator, by increasing-weight enumeration.
pub fn code_distance(code: &StabilizerCode, budget: u64) -> Result<usize> {
    if code.k == 0 {
        return invalid("a code with k = 0 has no logical operators");
    }
    let masks = SyndromeMasks::new(code);
    let mut span = Span::new();
    for s in &code.sym {
        span.insert(s);
    }
    let mut spent = 0u64;
    for w in 1..=code.n {
        spent += class_size(code.n, w);
        if spent > budget {
            return Err(Error::Budget(format!("distance search exceeds {budget} assignments at weight {w}")));
        }
        let mut found = false;
        for_each_assignment(code.n, w, |sites, letters| {
            if found || masks.count(sites, letters) != 0 {
                return;
            }
            if !span.contains(&assignment_pauli(code.n, sites, letters)) {
                found = true;
            }
        });
        if found {
            return Ok(w);
        }
    }
    Err(Error::NoConvergence("no logical operator found".into()))
}

fn class_size(n: usize, w: usize) -> u64 {
    let mut c: u64 = 1;
    for i in 0..w {
        c = c * (n - i) as u64 / (i + 1) as u64;
    }
    c.saturating_mul(3u64.saturating_pow(w as u32))
}

/// Per-qubit, per-letter syndrome bitmasks for fast violation counts.
struct SyndromeMasks {
    words: usize,
    /// `masks[(q * 3 + letter) * words ..]`, letters X, Y, Z.
    masks: Vec<u64>,
}

const LETTERS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

impl SyndromeMasks {
    fn new(code: &StabilizerCode) -> Self {
        let m = code.sym.len();
        let words = m.div_ceil(64).max(1);
        let mut masks = vec![0u64; code.n * 3 * words];
        for q in 0..code.n {
            for (li, &p) in LETTERS.iter().enumerate() {
                let b = BinaryPauli::from_pauli(&PauliString::single(code.n, q, p).unwrap());
                for (ci, c) in code.sym.iter().enumerate() {
                    if c.anticommutes(&b) {
                        masks[(q * 3 + li) * words + ci / 64] |= 1 << (ci % 64);
                    }
                }
            }
        }
        SyndromeMasks { words, masks }
    }

    fn count(&self, sites: &[usize], letters: &[u8]) -> usize {
        let mut acc = [0u64; 8];
        let mut big;
        let buf: &mut [u64] = if self.words <= 8 {
            &mut acc[..self.words]
        } else {
            big = vec![0u64; self.words];
            &mut big[..]
        };
        for (&q, &l) in sites.iter().zip(letters) {
            let base = (q * 3 + l as usize) * self.words;
            for (b, m) in buf.iter_mut().zip(&self.masks[base..base + self.words]) {
                *b ^= m;
            }
        }
        buf.iter().map(|w| w.count_ones() as usize).sum()
    }
}

fn assignment_pauli(n: usize, sites: &[usize], letters: &[u8]) -> BinaryPauli {
    let mut ls = vec![Pauli::I; n];
    for (&q, &l) in sites.iter().zip(letters) {
        ls[q] = LETTERS[l as usize];
    }
    BinaryPauli::from_pauli(&PauliString::new(ls, Phase(0)))
}

/// Calls `f(sites, letters)` for every weight-`w` assignment, in lexicographic
/// order of sites and then letters.
fn for_each_assignment(n: usize, w: usize, mut f: impl FnMut(&[usize], &[u8])) {
    if w == 0 || w > n {
        return;
    }
    let mut sites: Vec<usize> = (0..w).collect();
    let mut letters = vec![0u8; w];
    loop {
        letters.iter_mut().for_each(|l| *l = 0);
        loop {
            f(&sites, &letters);
            let mut i = w;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if letters[i] < 2 {
                    letters[i] += 1;
                    break;
                }
                letters[i] = 0;
                if i == 0 {
                    i = usize::MAX;
                    break;
                }
            }
            if i == usize::MAX {
                break;
            }
        }
        // next combination
        let mut i = w;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if sites[i] < n - w + i {
                sites[i] += 1;
                for j in i + 1..w {
                    sites[j] = sites[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ExpansionMode {
    /// All assignments of weight `1..=floor(alpha n)`, if their number fits the budget.
    Exhaustive { budget: u64 },
    /// `samples` random assignments; can only refute.
    Random { samples: u64, seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub gamma: f64,
    pub alpha: f64,
    pub max_weight: usize,
    /// False when a violating assignment was found.
    pub holds: bool,
    /// True only for an exhaustive sweep.
    pub certified: bool,
    /// Smallest `V(a) / w(a)` seen (infinite if no assignment was checked).
    pub min_ratio: f64,
    pub witness: Option<String>,
    pub witness_weight: usize,
    pub witness_violations: usize,
    pub witness_is_logical: bool,
    pub checked: u64,
}

#[derive(Clone, Debug)]
struct Worst {
    ratio: f64,
    weight: usize,
    violations: usize,
    sites: Vec<usize>,
    letters: Vec<u8>,
}

impl Worst {
    fn better(a: Option<Worst>, b: Option<Worst>) -> Option<Worst> {
        match (a, b) {
            (Some(x), Some(y)) => Some(if (y.ratio, y.weight) < (x.ratio, x.weight) { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        }
    }
}

/// Checks `V(a) >= gamma w(a)` for every assignment with `1 <= w(a) <= alpha n`.
pub fn expansion_check(code: &StabilizerCode, gamma: f64, alpha: f64, mode: ExpansionMode) -> Result<ExpansionReport> {
    if !(alpha >= 0.0 && alpha <= 1.0) || gamma < 0.0 {
        return invalid("need 0 <= alpha <= 1 and gamma >= 0");
    }
    let n = code.n;
    let max_weight = ((alpha * n as f64) + 1e-9).floor() as usize;
    let masks = SyndromeMasks::new(code);
    let (worst, checked, certified) = match mode {
        ExpansionMode::Exhaustive { budget } => {
            let total: u64 = (1..=max_weight).map(|w| class_size(n, w)).fold(0u64, u64::saturating_add);
            if total > budget {
                return Err(Error::Budget(format!(
                    "exhaustive expansion check needs {total} assignments, budget is {budget}"
                )));
            }
            let worst = (1..=max_weight)
                .into_par_iter()
                .map(|w| {
                    let mut best: Option<Worst> = None;
                    for_each_assignment(n, w, |sites, letters| {
                        let v = masks.count(sites, letters);
                        let ratio = v as f64 / w as f64;
                        if best.as_ref().is_none_or(|b| ratio < b.ratio) {
                            best = Some(Worst {
                                ratio,
                                weight: w,
                                violations: v,
                                sites: sites.to_vec(),
                                letters: letters.to_vec(),
                            });
                        }
                    });
                    best
                })
                .reduce(|| None, Worst::better);
            (worst, total, true)
        }
        ExpansionMode::Random { samples, seed } => {
            let mut r = rng::seeded(seed);
            let mut best: Option<Worst> = None;
            if max_weight > 0 {
                for _ in 0..samples {
                    let w = r.random_range(1..=max_weight);
                    let mut sites = rand::seq::index::sample(&mut r, n, w).into_vec();
                    sites.sort_unstable();
                    let letters: Vec<u8> = (0..w).map(|_| r.random_range(0..3u8)).collect();
                    let v = masks.count(&sites, &letters);
                    let ratio = v as f64 / w as f64;
                    if best.as_ref().is_none_or(|b| ratio < b.ratio) {
                        best = Some(Worst {
                            ratio,
                            weight: w,
                            violations: v,
                            sites,
                            letters,
                        });
                    }
                }
            }
            (best, if max_weight > 0 { samples } else { 0 }, false)
        }
    };
    let min_ratio = worst.as_ref().map_or(f64::INFINITY, |w| w.ratio);
    let holds = min_ratio >= gamma;
    let (witness, witness_weight, witness_violations, witness_is_logical) = match &worst {
        Some(w) => {
            let p = assignment_pauli(n, &w.sites, &w.letters);
            (Some(p.to_pauli().to_string()), w.weight, w.violations, code.is_logical(&p))
        }
        None => (None, 0, 0, false),
    };
    Ok(ExpansionReport {
        gamma,
        alpha,
        max_weight,
        holds,
        certified,
        min_ratio,
        witness,
        witness_weight,
        witness_violations,
        witness_is_logical,
        checked,
    })
}

/// Full syndromes (checks first, then completion; bit 0 of the label is the
/// first check, stored most significant) grouped by Pauli distance from the
/// reference code states.
#[derive(Clone, Debug, Serialize)]
pub struct CodeRegions {
    pub n: usize,
    pub k: usize,
    pub w_cut: usize,
    pub w_max: usize,
    /// Minimum assignment weight reaching each label from the reference set
    /// (`usize::MAX` if unreachable).
    pub distance: Vec<usize>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl CodeRegions {
    /// Number of violated original checks for a label.
    pub fn energy(&self, label: usize) -> usize {
        (label >> self.k).count_ones() as usize
    }

    /// Smallest energy among labels in `b`.
    pub fn b_energy_floor(&self) -> Option<usize> {
        self.b.iter().map(|&s| self.energy(s)).min()
    }

    /// Exact `Tr[P_B e^{-beta H}]`.
    pub fn b_trace(&self, beta: f64) -> f64 {
        self.b.iter().map(|&s| (-beta * self.energy(s) as f64).exp()).sum()
    }

    /// Exact `Tr[P_A e^{-beta H}]`.
    pub fn a_trace(&self, beta: f64) -> f64 {
        self.a.iter().map(|&s| (-beta * self.energy(s) as f64).exp()).sum()
    }
}

fn label_of(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// `A` = labels within Pauli weight `w_cut` of the reference code states
/// (no check violated, first completion bit 0), `B` = labels at weight in
/// `(w_cut, w_max]`.
pub fn code_regions(code: &StabilizerCode, w_cut: usize, w_max: usize) -> Result<CodeRegions> {
    if w_cut > w_max {
        return invalid("need w_cut <= w_max");
    }
    let gens = code.generators()?;
    let n = code.n;
    if n > 24 {
        return Err(Error::DimensionCap {
            what: "syndrome-space regions",
            qubits: n,
            cap: 24,
        });
    }
    let size = 1usize << n;
    let k = code.k;
    let steps: Vec<usize> = (0..n)
        .flat_map(|q| LETTERS.iter().map(move |&p| (q, p)))
        .map(|(q, p)| {
            let b = BinaryPauli::from_pauli(&PauliString::single(n, q, p).unwrap());
            label_of(&gens.iter().map(|g| g.anticommutes(&b)).collect::<Vec<_>>())
        })
        .collect();
    let mut distance = vec![usize::MAX; size];
    let mut queue = VecDeque::new();
    // completion bits are the low k bits; the first completion bit is bit k-1
    for sb in 0..1usize << k {
        if k == 0 || (sb >> (k - 1)) & 1 == 0 {
            distance[sb] = 0;
            queue.push_back(sb);
        }
    }
    while let Some(s) = queue.pop_front() {
        let d = distance[s];
        if d >= w_max {
            continue;
        }
        for &st in &steps {
            let t = s ^ st;
            if distance[t] == usize::MAX {
                distance[t] = d + 1;
                queue.push_back(t);
            }
        }
    }
    let a = (0..size).filter(|&s| distance[s] <= w_cut).collect();
    let b = (0..size).filter(|&s| distance[s] > w_cut && distance[s] <= w_max).collect();
    Ok(CodeRegions {
        n,
        k,
        w_cut,
        w_max,
        distance,
        a,
        b,
    })
}

/// Dense projector onto the span of the eigenstates with the given labels.
pub fn syndrome_projector(code: &StabilizerCode, labels: &[usize]) -> Result<DenseOperator> {
    check_operator_cap(code.n)?;
    let gens: Vec<PauliString> = code.checks.iter().cloned().chain(
        code.completion()
            .ok_or_else(|| Error::InvalidParameter("code has no completion".into()))?,
    )
    .collect();
    let n = code.n;
    let d = 1usize << n;
    let mut r = rng::seeded(0x5EED);
    let mut out = CMat::zeros(d, d);
    for &label in labels {
        let mut v: Vec<C64> = (0..d).map(|_| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect();
        for (i, g) in gens.iter().enumerate() {
            let sign = if (label >> (n - 1 - i)) & 1 == 1 { -1.0 } else { 1.0 };
            let mut w = v.iter().map(|z| z * 0.5).collect::<Vec<_>>();
            for (row, col, val) in g.entries() {
                w[row] += v[col] * val * (0.5 * sign);
            }
            v = w;
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::NoConvergence(format!("eigenstate {label} not found")));
        }
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += v[i] * v[j].conj() / (norm * norm);
            }
        }
    }
    DenseOperator::new(n, out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CodeBottleneck {
    /// `log(2) / (gamma (alpha - l1 l2))`.
    pub beta_threshold: f64,
    /// `2^n exp(-beta gamma (alpha - l1 l2) n)`.
    pub trace_bound: f64,
    /// `n (beta gamma (alpha - l1 l2) - log 2)`, the exponent of the mixing-time bound.
    pub exponent: f64,
}

/// Bottleneck weight bound for a `(gamma, alpha)` expanding code whose sampler
/// has range `l2 n` on qubits touching at most `l1` checks.
pub fn code_bottleneck_bound(
    n: usize,
    gamma: f64,
    alpha: f64,
    l1: f64,
    l2: f64,
    beta: f64,
) -> Result<CodeBottleneck> {
    let gap = alpha - l1 * l2;
    if !(gap > 0.0) || !(gamma > 0.0) {
        return Err(Error::OutsideWindow(format!(
            "need l1 l2 < alpha and gamma > 0 (alpha - l1 l2 = {gap})"
        )));
    }
    let beta_threshold = std::f64::consts::LN_2 / (gamma * gap);
    if beta < beta_threshold * (1.0 - 1e-12) {
        return Err(Error::OutsideWindow(format!(
            "beta = {beta} is below the threshold {beta_threshold}"
        )));
    }
    let nf = n as f64;
    let exponent = nf * (beta * gamma * gap - std::f64::consts::LN_2);
    Ok(CodeBottleneck {
        beta_threshold,
        trace_bound: (-exponent).exp(),
        exponent,
    })
}

/// Range bound in units of `n` implied by a verified range of `range` steps.
pub fn implied_range_fraction(range: usize, n: usize) -> f64 {
    range as f64 / n as f64
}
