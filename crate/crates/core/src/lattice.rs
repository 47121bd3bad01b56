//! Open `L x L` spin lattices: monochromatic crossings, fault lines on the
//! dual lattice, region classification and fault-line Gibbs measures.
//!
//! Sites are row-major with row 0 at the top; site `s = r L + c` is qubit `s`
//! of the computational basis (spin `+1` is bit 0). Dual vertices are the
//! grid corners `(r, c)` with `0 <= r, c <= L`. Only interior dual edges are
//! used: the horizontal edge `(r, c)-(r, c+1)` with `0 < r < L` separates the
//! sites `(r-1, c)` and `(r, c)`; the vertical edge `(r, c)-(r+1, c)` with
//! `0 < c < L` separates `(r, c-1)` and `(r, c)`.

use crate::bottleneck::{Region, RegionLabel};
use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{build_ising_2d, TransverseField};
use crate::krylov::log_diag_exp;
use crate::operator::{check_enumeration_cap, check_operator_cap, eig_hermitian, exp_scaled};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    l: usize,
    spins: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(l: usize, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != l * l {
            return Err(Error::DimensionMismatch {
                expected: l * l,
                got: spins.len(),
            });
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return invalid("spins must be +1 or -1");
        }
        Ok(SpinConfiguration { l, spins })
    }

    pub fn uniform(l: usize, sign: i8) -> Self {
        SpinConfiguration {
            l,
            spins: vec![sign; l * l],
        }
    }

    /// Configuration of a computational basis index.
    pub fn from_index(l: usize, index: usize) -> Self {
        SpinConfiguration {
            l,
            spins: crate::operator::spins_of(index, l * l),
        }
    }

    /// Rows of `+1`/`-1` (or `+`/`-`) separated by whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Vec<i8>> = text
            .lines()
            .map(str::trim)
            .filter(|r| !r.is_empty() && !r.starts_with('#'))
            .map(|r| {
                r.split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| match t {
                        "+1" | "1" | "+" => Ok(1),
                        "-1" | "-" => Ok(-1),
                        _ => Err(Error::Parse(format!("bad spin token '{t}'"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let l = rows.len();
        if l == 0 || rows.iter().any(|r| r.len() != l) {
            return Err(Error::Parse("configuration must be a square grid".into()));
        }
        Self::new(l, rows.concat())
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.spins[r * self.l + c]
    }

    pub fn index(&self) -> usize {
        crate::operator::index_of_spins(&self.spins)
    }

    pub fn flipped(&self) -> Self {
        SpinConfiguration {
            l: self.l,
            spins: self.spins.iter().map(|s| -s).collect(),
        }
    }

    /// `-sum_<ij> s_i s_j` over nearest neighbours (open boundary).
    pub fn ising_energy(&self) -> f64 {
        let l = self.l;
        let mut e = 0i64;
        for r in 0..l {
            for c in 0..l {
                let s = self.get(r, c) as i64;
                if c + 1 < l {
                    e -= s * self.get(r, c + 1) as i64;
                }
                if r + 1 < l {
                    e -= s * self.get(r + 1, c) as i64;
                }
            }
        }
        e as f64
    }

    pub fn hamming(&self, other: &SpinConfiguration) -> usize {
        self.spins.iter().zip(&other.spins).filter(|(a, b)| a != b).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    LeftRight,
    TopBottom,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultLine {
    /// Dual vertices `(r, c)` from one boundary side to the opposite one.
    pub path: Vec<(usize, usize)>,
    pub orientation: Orientation,
    pub defects: usize,
    pub length: usize,
}

impl FaultLine {
    /// Consecutive dual-vertex pairs.
    pub fn edges(&self) -> Vec<((usize, usize), (usize, usize))> {
        self.path.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Checks the boundary endpoints, interior edges and self-avoidance, and
    /// recounts defects against `sigma`.
    pub fn validate(&self, sigma: &SpinConfiguration) -> Result<()> {
        let l = sigma.l;
        let (Some(&first), Some(&last)) = (self.path.first(), self.path.last()) else {
            return invalid("empty fault line");
        };
        let ok_ends = match self.orientation {
            Orientation::LeftRight => first.1 == 0 && last.1 == l,
            Orientation::TopBottom => first.0 == 0 && last.0 == l,
        };
        if !ok_ends {
            return invalid("fault line does not join opposite sides");
        }
        let mut seen = std::collections::HashSet::new();
        for v in &self.path {
            if !seen.insert(*v) {
                return invalid(format!("fault line revisits dual vertex {v:?}"));
            }
        }
        let mut defects = 0;
        for (a, b) in self.edges() {
            let (s1, s2) = edge_sites(l, a, b).ok_or_else(|| {
                Error::InvalidParameter(format!("{a:?}-{b:?} is not an interior dual edge"))
            })?;
            if sigma.spins[s1] == sigma.spins[s2] {
                defects += 1;
            }
        }
        if defects != self.defects || self.length != self.path.len() - 1 {
            return invalid("fault line defect or length count is stale");
        }
        Ok(())
    }

    /// Site pairs on opposite sides of each edge of the line.
    pub fn crossing_bonds(&self, l: usize) -> Vec<(usize, usize)> {
        self.edges().into_iter().filter_map(|(a, b)| edge_sites(l, a, b)).collect()
    }

    /// Sites adjacent to the line, sorted and deduplicated.
    pub fn adjacent_sites(&self, l: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.crossing_bonds(l).into_iter().flat_map(|(a, b)| [a, b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Sites separated by an interior dual edge, if it is one.
fn edge_sites(l: usize, a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if a.0 == b.0 && b.1 == a.1 + 1 {
        let (r, c) = a;
        (r > 0 && r < l && c < l).then(|| ((r - 1) * l + c, r * l + c))
    } else if a.1 == b.1 && b.0 == a.0 + 1 {
        let (r, c) = a;
        (c > 0 && c < l && r < l).then(|| (r * l + c - 1, r * l + c))
    } else {
        None
    }
}

/// Dual lattice adjacency: `(neighbour vertex, site 1, site 2)`.
struct DualGraph {
    l: usize,
    adj: Vec<Vec<(usize, usize, usize)>>,
}

impl DualGraph {
    fn new(l: usize) -> Self {
        let w = l + 1;
        let mut adj = vec![Vec::new(); w * w];
        for r in 0..=l {
            for c in 0..=l {
                let v = r * w + c;
                if c < l {
                    if let Some((s1, s2)) = edge_sites(l, (r, c), (r, c + 1)) {
                        adj[v].push((v + 1, s1, s2));
                        adj[v + 1].push((v, s1, s2));
                    }
                }
                if r < l {
                    if let Some((s1, s2)) = edge_sites(l, (r, c), (r + 1, c)) {
                        adj[v].push((v + w, s1, s2));
                        adj[v + w].push((v, s1, s2));
                    }
                }
            }
        }
        DualGraph { l, adj }
    }

    fn endpoints(&self, o: Orientation) -> (Vec<usize>, Vec<bool>) {
        let l = self.l;
        let w = l + 1;
        let mut src = Vec::new();
        let mut dst = vec![false; w * w];
        for k in 1..l {
            match o {
                Orientation::LeftRight => {
                    src.push(k * w);
                    dst[k * w + l] = true;
                }
                Orientation::TopBottom => {
                    src.push(k);
                    dst[l * w + k] = true;
                }
            }
        }
        (src, dst)
    }

    /// Lexicographic (defects, length) shortest path.
    fn best_line(&self, spins: &[i8], o: Orientation) -> Option<FaultLine> {
        let w = self.l + 1;
        let nv = w * w;
        let big = (nv * 4) as u64;
        let (src, dst) = self.endpoints(o);
        let mut dist = vec![u64::MAX; nv];
        let mut prev = vec![usize::MAX; nv];
        let mut heap = BinaryHeap::new();
        for &s in &src {
            dist[s] = 0;
            heap.push(Reverse((0u64, s)));
        }
        let mut hit = None;
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if dst[u] {
                hit = Some(u);
                break;
            }
            for &(v, s1, s2) in &self.adj[u] {
                let cost = if spins[s1] == spins[s2] { big + 1 } else { 1 };
                let nd = d + cost;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        let end = hit?;
        let mut path = vec![end];
        let mut cur = end;
        while prev[cur] != usize::MAX {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        let d = dist[end];
        Some(FaultLine {
            path: path.iter().map(|&v| (v / w, v % w)).collect(),
            orientation: o,
            defects: (d / big) as usize,
            length: (d % big) as usize,
        })
    }

    /// Fewest defects over both orientations, from packed bits (`bit_of_site`).
    fn min_defects_bits(&self, x: u64, bit_of_site: &[u32], deque: &mut VecDeque<usize>, dist: &mut [u32]) -> u32 {
        let mut best = u32::MAX;
        for o in [Orientation::LeftRight, Orientation::TopBottom] {
            let (src, dst) = self.endpoints(o);
            dist.iter_mut().for_each(|d| *d = u32::MAX);
            deque.clear();
            for &s in &src {
                dist[s] = 0;
                deque.push_back(s);
            }
            while let Some(u) = deque.pop_front() {
                let du = dist[u];
                if du >= best {
                    continue;
                }
                if dst[u] {
                    best = best.min(du);
                    continue;
                }
                for &(v, s1, s2) in &self.adj[u] {
                    let same = ((x >> bit_of_site[s1]) ^ (x >> bit_of_site[s2])) & 1 == 0;
                    let nd = du + same as u32;
                    if nd < dist[v] {
                        dist[v] = nd;
                        if same {
                            deque.push_back(v);
                        } else {
                            deque.push_front(v);
                        }
                    }
                }
            }
        }
        best
    }
}

/// Whether a 4-connected path of `sign` spins joins the two sides.
pub fn has_crossing(sigma: &SpinConfiguration, sign: i8, direction: Orientation) -> bool {
    let l = sigma.l;
    let mut seen = vec![false; l * l];
    let mut queue = VecDeque::new();
    for k in 0..l {
        let s = match direction {
            Orientation::LeftRight => k * l,
            Orientation::TopBottom => k,
        };
        if sigma.spins[s] == sign {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        let (r, c) = (s / l, s % l);
        let done = match direction {
            Orientation::LeftRight => c == l - 1,
            Orientation::TopBottom => r == l - 1,
        };
        if done {
            return true;
        }
        let mut nb = Vec::with_capacity(4);
        if r > 0 {
            nb.push(s - l);
        }
        if r + 1 < l {
            nb.push(s + l);
        }
        if c > 0 {
            nb.push(s - 1);
        }
        if c + 1 < l {
            nb.push(s + 1);
        }
        for t in nb {
            if !seen[t] && sigma.spins[t] == sign {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    false
}

/// Fault line with the fewest defects (then shortest), if it has at most `k_max` defects.
pub fn min_defect_fault_line(sigma: &SpinConfiguration, k_max: usize) -> Option<FaultLine> {
    if sigma.l < 2 {
        return None;
    }
    let g = DualGraph::new(sigma.l);
    let lr = g.best_line(&sigma.spins, Orientation::LeftRight);
    let tb = g.best_line(&sigma.spins, Orientation::TopBottom);
    let best = match (lr, tb) {
        (Some(a), Some(b)) => {
            if (b.defects, b.length) < (a.defects, a.length) {
                b
            } else {
                a
            }
        }
        (a, b) => a.or(b)?,
    };
    (best.defects <= k_max).then_some(best)
}

/// Defect threshold `ceil(c0 L) - 1` used by the classification.
pub fn defect_threshold(c0: f64, l: usize) -> Option<usize> {
    let t = (c0 * l as f64).ceil() as i64 - 1;
    (t >= 0).then_some(t as usize)
}

/// `A`: plus crossings both ways and no fault line with fewer than `c0 L`
/// defects; `C`: the same for minus; `B` otherwise.
pub fn classify_region(sigma: &SpinConfiguration, c0: f64) -> RegionLabel {
    let plus = has_crossing(sigma, 1, Orientation::LeftRight) && has_crossing(sigma, 1, Orientation::TopBottom);
    let minus =
        !plus && has_crossing(sigma, -1, Orientation::LeftRight) && has_crossing(sigma, -1, Orientation::TopBottom);
    if !plus && !minus {
        return RegionLabel::B;
    }
    let short = match defect_threshold(c0, sigma.l) {
        Some(k) => min_defect_fault_line(sigma, k).is_some(),
        None => false,
    };
    match (short, plus) {
        (true, _) => RegionLabel::B,
        (false, true) => RegionLabel::A,
        (false, false) => RegionLabel::C,
    }
}

/// Flips every site on the far side of `fault` from the site `(0, 0)`.
pub fn flip_side(sigma: &SpinConfiguration, fault: &FaultLine) -> Result<SpinConfiguration> {
    fault.validate(sigma)?;
    let l = sigma.l;
    let mut blocked = std::collections::HashSet::new();
    for (a, b) in fault.edges() {
        let (s1, s2) = edge_sites(l, a, b).expect("validated");
        blocked.insert((s1.min(s2), s1.max(s2)));
    }
    let mut seen = vec![false; l * l];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let (r, c) = (s / l, s % l);
        let mut nb = Vec::with_capacity(4);
        if r > 0 {
            nb.push(s - l);
        }
        if r + 1 < l {
            nb.push(s + l);
        }
        if c > 0 {
            nb.push(s - 1);
        }
        if c + 1 < l {
            nb.push(s + 1);
        }
        for t in nb {
            if !seen[t] && !blocked.contains(&(s.min(t), s.max(t))) {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    let spins = sigma
        .spins
        .iter()
        .zip(&seen)
        .map(|(&v, &keep)| if keep { v } else { -v })
        .collect();
    Ok(SpinConfiguration { l, spins })
}

// ---------------------------------------------------------------------------
// Field-dependent ratio exponent and the Peierls-type bound
// ---------------------------------------------------------------------------

/// `a + (1/beta) log[1 + sech(beta h)(e^{-a beta} - 1)]`, evaluated without overflow.
pub fn g_function(beta: f64, h: f64, a: f64) -> f64 {
    let y = beta * h;
    // 1 - sech(y) = 2 sinh^2(y/2) / cosh(y)
    let one_minus_s = if y.abs() > 700.0 {
        1.0
    } else {
        2.0 * (y / 2.0).sinh().powi(2) / y.cosh()
    };
    let s = 1.0 - one_minus_s;
    // a + (1/beta) log(1 + s(e^{-a beta} - 1)) = (1/beta) log(1 + (1-s)(e^{a beta} - 1))
    let t = a * beta;
    if t <= 30.0 {
        (one_minus_s * t.exp_m1()).ln_1p() / beta
    } else {
        a + log_add(one_minus_s.ln(), s.ln() - t) / beta
    }
}

fn log_add(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Largest admissible field
/// `(1/beta) acosh(e^beta (e^{a beta} - 1) / (e^{beta(a+1)} - sqrt3 e^{2 beta kappa}))`.
/// `None` when the argument of `acosh` is below 1.
pub fn field_threshold(beta: f64, kappa: f64, a: f64) -> Option<f64> {
    let sqrt3 = 3f64.sqrt();
    // numerator and denominator are both negative for a < 0
    let num = (-(a * beta).exp_m1()).ln() + beta;
    let inner = sqrt3 - (beta * (a + 1.0 - 2.0 * kappa)).exp();
    if !(inner > 0.0) || !(a < 0.0) {
        return None;
    }
    let ly = num - (2.0 * beta * kappa + inner.ln());
    if ly < 0.0 {
        return None;
    }
    let acosh = ly + (1.0 + (1.0 - (-2.0 * ly).exp()).sqrt()).ln();
    Some(acosh / beta)
}

/// Exponent used for the Peierls window.
pub const PEIERLS_A: f64 = -14.0;

/// Closed-form bound on the Gibbs weight of configurations with a fault line
/// of at most `kappa L` defects on an `L x L` lattice.
pub fn peierls_bound(beta: f64, h: f64, kappa: f64, l: usize) -> Result<f64> {
    let b_min = 3f64.ln() / (2.0 * (1.0 - 2.0 * kappa));
    if !(kappa >= 0.0 && kappa < 0.5) || beta < b_min {
        return Err(Error::OutsideWindow(format!(
            "need 0 <= kappa < 1/2 and beta >= {b_min:.4} (got kappa={kappa}, beta={beta})"
        )));
    }
    match field_threshold(beta, kappa, PEIERLS_A) {
        Some(t) if h >= 0.0 && h < t => {}
        t => {
            return Err(Error::OutsideWindow(format!(
                "field h={h} is not below the threshold {t:?} at beta={beta}, kappa={kappa}"
            )))
        }
    }
    let g = g_function(beta, h, PEIERLS_A);
    let rootn = l as f64;
    let step = 3f64.ln() - 2.0 * beta * (1.0 + g);
    if step >= 0.0 {
        return Err(Error::OutsideWindow(format!("geometric ratio 3 e^(-2 beta(1+g)) >= 1 (g={g})")));
    }
    let pre = 2.0 * (rootn + 1.0) / ((1.0 - step.exp()) * -(-4.0 * beta).exp_m1());
    let tail = (4.0 * beta * kappa * rootn).exp() - (-4.0 * beta).exp();
    Ok(pre * (rootn * step).exp() * tail)
}

/// Direct double sum `2 sum_{ell >= L} sum_{j <= k} (L+1) 3^ell e^{-2 beta(ell(1+g) - 2j)}`.
pub fn peierls_double_sum(beta: f64, h: f64, k: usize, l: usize, terms: usize) -> f64 {
    let g = g_function(beta, h, PEIERLS_A);
    let mut total = 0.0;
    for ell in l..l + terms {
        for j in 0..=k {
            total += (ell as f64 * 3f64.ln() - 2.0 * beta * (ell as f64 * (1.0 + g) - 2.0 * j as f64)).exp();
        }
    }
    2.0 * (l as f64 + 1.0) * total
}

// ---------------------------------------------------------------------------
// Exact fault-line measures
// ---------------------------------------------------------------------------

/// Counts of classical configurations by (disagreeing bonds, fewest fault-line defects).
#[derive(Clone, Debug)]
pub struct FaultCensus {
    pub l: usize,
    pub bonds: usize,
    /// `counts[disagree][min_defects]`.
    pub counts: Vec<Vec<u64>>,
}

impl FaultCensus {
    pub fn build(l: usize) -> Result<Self> {
        let n = l * l;
        check_enumeration_cap(n)?;
        if l < 2 {
            return invalid("fault lines need L >= 2");
        }
        let g = DualGraph::new(l);
        let bit_of_site: Vec<u32> = (0..n).map(|s| (n - 1 - s) as u32).collect();
        let bonds: Vec<(u32, u32)> = crate::hamiltonians::square_lattice_edges(l, false)
            .into_iter()
            .map(|(a, b)| (bit_of_site[a], bit_of_site[b]))
            .collect();
        let nb = bonds.len();
        let half = 1u64 << (n - 1);
        let chunk = 1u64 << 14.min(n - 1);
        let merged = (0..half.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let mut counts = vec![vec![0u64; l + 1]; nb + 1];
                let mut deque = VecDeque::with_capacity(64);
                let mut dist = vec![0u32; (l + 1) * (l + 1)];
                for x in c * chunk..((c + 1) * chunk).min(half) {
                    let dis = bonds.iter().filter(|(a, b)| ((x >> a) ^ (x >> b)) & 1 == 1).count();
                    let k = g.min_defects_bits(x, &bit_of_site, &mut deque, &mut dist).min(l as u32);
                    counts[dis][k as usize] += 2;
                }
                counts
            })
            .reduce(
                || vec![vec![0u64; l + 1]; nb + 1],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    a
                },
            );
        Ok(FaultCensus {
            l,
            bonds: nb,
            counts: merged,
        })
    }

    /// Cached census for side `l`.
    pub fn shared(l: usize) -> Result<Arc<FaultCensus>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FaultCensus>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(c) = cache.lock().unwrap().get(&l) {
            return Ok(c.clone());
        }
        let c = Arc::new(Self::build(l)?);
        cache.lock().unwrap().insert(l, c.clone());
        Ok(c)
    }

    /// Gibbs weight at `beta` of configurations with a fault line of at most `k_max` defects.
    pub fn measure(&self, beta: f64, k_max: usize) -> f64 {
        // E = -(bonds - 2 dis); weight e^{-beta E} relative to the ground state is e^{-2 beta dis}
        let (mut num, mut den) = (0.0, 0.0);
        for (dis, row) in self.counts.iter().enumerate() {
            let w = (-2.0 * beta * dis as f64).exp();
            for (k, &c) in row.iter().enumerate() {
                let t = c as f64 * w;
                den += t;
                if k <= k_max {
                    num += t;
                }
            }
        }
        num / den
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaultModel {
    Classical,
    /// Transverse field strength.
    Quantum(f64),
}

/// Site permutations of the square's symmetry group.
fn d4_maps(l: usize) -> Vec<Vec<usize>> {
    let t = |r: usize, c: usize, k: usize| -> (usize, usize) {
        let m = l - 1;
        match k {
            0 => (r, c),
            1 => (c, m - r),
            2 => (m - r, m - c),
            3 => (m - c, r),
            4 => (r, m - c),
            5 => (m - r, c),
            6 => (c, r),
            _ => (m - c, m - r),
        }
    };
    (0..8)
        .map(|k| {
            (0..l * l)
                .map(|s| {
                    let (r, c) = t(s / l, s % l, k);
                    r * l + c
                })
                .collect()
        })
        .collect()
}

/// `log <sigma| e^{-beta H} |sigma>` for every basis state of the open TFIM
/// `-sum ZZ - h sum X`, up to a common additive constant.
pub fn tfim_log_diagonal(l: usize, h: f64, beta: f64) -> Result<Vec<f64>> {
    let n = l * l;
    check_enumeration_cap(n)?;
    let ising = build_ising_2d(l, false)?;
    if h == 0.0 {
        return Ok(ising.diagonal()?.iter().map(|e| -beta * e).collect());
    }
    let tf = TransverseField::new(&ising, h)?;
    let d = 1usize << n;
    if d <= 512 {
        let es = eig_hermitian(&tf.to_dense()?)?;
        let (m, shift) = exp_scaled(&es, -beta);
        return Ok((0..d).map(|i| m[(i, i)].re.ln() + shift).collect());
    }
    // one Lanczos quadrature per orbit of the lattice symmetries and the global flip
    let maps = d4_maps(l);
    let permute = |x: usize, map: &[usize]| -> usize {
        let mut y = 0;
        for s in 0..n {
            if (x >> (n - 1 - s)) & 1 == 1 {
                y |= 1 << (n - 1 - map[s]);
            }
        }
        y
    };
    let mut rep = vec![usize::MAX; d];
    let mut reps = Vec::new();
    for x in 0..d {
        if rep[x] != usize::MAX {
            continue;
        }
        reps.push(x);
        for map in &maps {
            let y = permute(x, map);
            rep[y] = x;
            rep[y ^ (d - 1)] = x;
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| tf.apply(x, y);
    let vals: Vec<(usize, f64)> = reps
        .par_iter()
        .map(|&r| log_diag_exp(d, &apply, r, beta, 1e-10, 300).map(|v| (r, v)))
        .collect::<Result<_>>()?;
    let lookup: HashMap<usize, f64> = vals.into_iter().collect();
    Ok(rep.iter().map(|r| lookup[r]).collect())
}

/// Exact Gibbs weight of `{sigma : sigma has a fault line with <= k_max defects}`.
pub fn exact_fault_measure(model: FaultModel, beta: f64, k_max: usize, l: usize) -> Result<f64> {
    match model {
        FaultModel::Classical => Ok(FaultCensus::shared(l)?.measure(beta, k_max)),
        FaultModel::Quantum(h) if h == 0.0 => Ok(FaultCensus::shared(l)?.measure(beta, k_max)),
        FaultModel::Quantum(h) => {
            if l > 4 {
                return Err(Error::DimensionCap {
                    what: "quantum fault measure",
                    qubits: l * l,
                    cap: 16,
                });
            }
            let logd = tfim_log_diagonal(l, h, beta)?;
            let top = logd.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let g = DualGraph::new(l);
            let n = l * l;
            let bit_of_site: Vec<u32> = (0..n).map(|s| (n - 1 - s) as u32).collect();
            let mut deque = VecDeque::new();
            let mut dist = vec![0u32; (l + 1) * (l + 1)];
            let (mut num, mut den) = (0.0, 0.0);
            for (x, lv) in logd.iter().enumerate() {
                let w = (lv - top).exp();
                den += w;
                if g.min_defects_bits(x as u64, &bit_of_site, &mut deque, &mut dist) as usize <= k_max {
                    num += w;
                }
            }
            Ok(num / den)
        }
    }
}

/// Fewest defects of any fault line in `sigma`.
pub fn min_defects(sigma: &SpinConfiguration) -> usize {
    let l = sigma.l;
    let g = DualGraph::new(l);
    let n = l * l;
    let bit_of_site: Vec<u32> = (0..n).map(|s| (n - 1 - s) as u32).collect();
    let mut deque = VecDeque::new();
    let mut dist = vec![0u32; (l + 1) * (l + 1)];
    g.min_defects_bits(sigma.index() as u64, &bit_of_site, &mut deque, &mut dist) as usize
}

/// Labels of every configuration of an `L x L` lattice.
pub fn classify_all(l: usize, c0: f64) -> Result<Vec<RegionLabel>> {
    let n = l * l;
    check_enumeration_cap(n)?;
    Ok((0..1usize << n)
        .into_par_iter()
        .map(|x| classify_region(&SpinConfiguration::from_index(l, x), c0))
        .collect())
}

/// Diagonal regions `(A, B, C)` of the classification, for dense use.
pub fn c0_regions(l: usize, c0: f64) -> Result<[Region; 3]> {
    check_operator_cap(l * l)?;
    let labels = classify_all(l, c0)?;
    let pick = |want: RegionLabel| -> Result<Region> {
        Region::diagonal(l * l, want, (0..labels.len()).filter(|&i| labels[i] == want))
    };
    Ok([pick(RegionLabel::A)?, pick(RegionLabel::B)?, pick(RegionLabel::C)?])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HammingMode {
    Exhaustive,
    Bound,
}

/// Smallest Hamming distance between `A` and `C` members (exhaustive, `L <= 4`)
/// or the guaranteed value `ceil(c0 L) - 3` (which may be nonpositive).
pub fn min_hamming_between_regions(c0: f64, l: usize, mode: HammingMode) -> Result<i64> {
    match mode {
        HammingMode::Bound => Ok((c0 * l as f64).ceil() as i64 - 3),
        HammingMode::Exhaustive => {
            if l > 4 {
                return Err(Error::DimensionCap {
                    what: "exhaustive region distance",
                    qubits: l * l,
                    cap: 16,
                });
            }
            let labels = classify_all(l, c0)?;
            let n = l * l;
            let mut dist = vec![u32::MAX; labels.len()];
            let mut queue = VecDeque::new();
            for (x, lab) in labels.iter().enumerate() {
                if *lab == RegionLabel::A {
                    dist[x] = 0;
                    queue.push_back(x);
                }
            }
            if queue.is_empty() {
                return invalid("region A is empty");
            }
            while let Some(u) = queue.pop_front() {
                if labels[u] == RegionLabel::C {
                    return Ok(dist[u] as i64);
                }
                for q in 0..n {
                    let v = u ^ (1 << q);
                    if dist[v] == u32::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            invalid("region C is empty")
        }
    }
}
