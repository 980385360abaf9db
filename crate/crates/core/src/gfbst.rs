//! The three-valued Generalized FBST, region-estimator tests, and an exact
//! finite testbed for checking the logical coherence conditions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::numeric::mix_seed;

/// Default GFBST threshold on the ev scale.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Decision values ordered reject < agnostic < accept, encoded 0, 1/2, 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionValue {
    Reject,
    Agnostic,
    Accept,
}

impl DecisionValue {
    pub fn as_f64(self) -> f64 {
        match self {
            Self::Reject => 0.0,
            Self::Agnostic => 0.5,
            Self::Accept => 1.0,
        }
    }
}

impl fmt::Display for DecisionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Reject => "reject",
            Self::Agnostic => "agnostic",
            Self::Accept => "accept",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub value: DecisionValue,
    pub threshold: f64,
    pub ev_h: f64,
    pub ev_hbar: f64,
}

fn check_threshold(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(FbstError::InvalidArgument(format!("threshold must lie in (0, 1), got {c}")))
    }
}

/// Reject if `ev(H) < c`, accept if `ev(H̄) < c`, agnostic otherwise.
/// Equality with `c` is agnostic.
pub fn gfbst_decide(ev_h: f64, ev_hbar: f64, c: f64) -> Result<Decision> {
    check_threshold(c)?;
    for v in [ev_h, ev_hbar] {
        if !(0.0..=1.0).contains(&v) {
            return Err(FbstError::InvalidArgument(format!("e-value {v} outside [0, 1]")));
        }
    }
    let value = match (ev_h < c, ev_hbar < c) {
        (true, true) => {
            return Err(FbstError::InconsistentDecision {
                ev_h,
                ev_hbar,
                threshold: c,
            })
        }
        (true, false) => DecisionValue::Reject,
        (false, true) => DecisionValue::Accept,
        (false, false) => DecisionValue::Agnostic,
    };
    Ok(Decision {
        value,
        threshold: c,
        ev_h,
        ev_hbar,
    })
}

/// Fixed-size bitset over grid cells.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CellSet {
    len: usize,
    words: Vec<u64>,
}

impl CellSet {
    pub fn empty(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        s.words.iter_mut().for_each(|w| *w = u64::MAX);
        s.trim();
        s
    }

    pub fn from_cells(len: usize, cells: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for c in cells {
            s.insert(c);
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, cell: usize) {
        assert!(cell < self.len, "cell {cell} outside a universe of {}", self.len);
        self.words[cell / 64] |= 1 << (cell % 64);
    }

    pub fn contains(&self, cell: usize) -> bool {
        cell < self.len && self.words[cell / 64] >> (cell % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    fn zip(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.len, other.len, "cell sets over different universes");
        let mut s = Self {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| f(*a, *b)).collect(),
        };
        s.trim();
        s
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & b)
    }

    pub fn complement(&self) -> Self {
        let mut s = Self {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        s.trim();
        s
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|c| self.contains(*c))
    }

    /// Little-endian hex encoding of the bit words.
    pub fn to_hex(&self) -> String {
        self.words.iter().map(|w| format!("{w:016x}")).collect::<Vec<_>>().join("")
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellSet({}/{}: {})", self.count(), self.len, self.to_hex())
    }
}

/// Accept if `S ⊆ H`, reject if `S ⊆ H̄`, agnostic otherwise.
pub fn region_estimator_decide(s: &CellSet, h: &CellSet) -> Result<DecisionValue> {
    if s.is_empty() {
        return Err(FbstError::EmptyRegion);
    }
    Ok(if s.is_subset(h) {
        DecisionValue::Accept
    } else if s.is_disjoint(h) {
        DecisionValue::Reject
    } else {
        DecisionValue::Agnostic
    })
}

/// Finite 2-D parameter grid with exact posterior masses and surprise values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    nx: usize,
    ny: usize,
    mass: Vec<f64>,
    log_s: Vec<f64>,
    /// `W(s(cell))`: mass of all cells with surprise at most the cell's.
    w_cell: Vec<f64>,
}

impl GridModel {
    /// Builds a grid from per-cell posterior and reference masses.
    pub fn new(nx: usize, ny: usize, mass: Vec<f64>, reference: Vec<f64>) -> Result<Self> {
        let n = nx * ny;
        if n == 0 || mass.len() != n || reference.len() != n {
            return Err(FbstError::InvalidArgument(format!(
                "grid {nx}x{ny} needs {n} posterior and reference masses"
            )));
        }
        if mass.iter().chain(&reference).any(|m| !(m.is_finite() && *m >= 0.0)) || reference.contains(&0.0) {
            return Err(FbstError::InvalidArgument(
                "grid masses must be finite, non-negative, with a positive reference".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(FbstError::InvalidArgument("grid posterior carries no mass".into()));
        }
        let mass: Vec<f64> = mass.iter().map(|m| m / total).collect();
        let log_s: Vec<f64> = mass.iter().zip(&reference).map(|(m, r)| (m / r).ln()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| log_s[*a].total_cmp(&log_s[*b]));
        let mut w_cell = vec![0.0; n];
        let mut acc = 0.0;
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j < n && log_s[order[j]] == log_s[order[i]] {
                acc += mass[order[j]];
                j += 1;
            }
            let level = if j == n { 1.0 } else { acc.min(1.0) };
            for &c in &order[i..j] {
                w_cell[c] = level;
            }
            i = j;
        }
        Ok(Self {
            nx,
            ny,
            mass,
            log_s,
            w_cell,
        })
    }

    /// Random smooth multimodal posterior with a random positive reference.
    pub fn random(nx: usize, ny: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    0.05 + 0.25 * rng.random::<f64>(),
                    0.2 + rng.random::<f64>(),
                )
            })
            .collect();
        let n = nx * ny;
        let mut mass = Vec::with_capacity(n);
        for i in 0..n {
            let (x, y) = ((i % nx) as f64 / nx as f64, (i / nx) as f64 / ny as f64);
            let dens: f64 = bumps
                .iter()
                .map(|(cx, cy, w, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp())
                .sum();
            mass.push(dens * (0.9 + 0.2 * rng.random::<f64>()) + 1e-6);
        }
        let reference = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
        Self::new(nx, ny, mass, reference).expect("random grid is valid")
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn log_surprise(&self) -> &[f64] {
        &self.log_s
    }

    /// `W` evaluated at each cell's own surprise.
    pub fn truth_at_cells(&self) -> &[f64] {
        &self.w_cell
    }

    /// Exact `W(v)`.
    pub fn truth(&self, log_v: f64) -> f64 {
        self.mass
            .iter()
            .zip(&self.log_s)
            .filter(|(_, s)| **s <= log_v)
            .map(|(m, _)| m)
            .sum::<f64>()
            .min(1.0)
    }

    /// Exact e-value. `ev(∅) = 0`.
    pub fn ev(&self, h: &CellSet) -> f64 {
        h.iter().map(|c| self.w_cell[c]).fold(0.0, f64::max)
    }

    /// `s* = max_{cell ∈ H} log s`, `−∞` on the empty set.
    pub fn log_s_star(&self, h: &CellSet) -> f64 {
        h.iter().map(|c| self.log_s[c]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Upper cut `{cell : s > v}`.
    pub fn upper_cut(&self, log_v: f64) -> CellSet {
        CellSet::from_cells(self.cells(), (0..self.cells()).filter(|c| self.log_s[*c] > log_v))
    }
}

/// Decision rule plugged into the property harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestRule {
    Gfbst,
    /// Reject iff `ev(H) < c`, accept iff `ev(H) > 1 − c`; ignores `ev(H̄)`.
    BrokenNegativeControl,
}

impl FromStr for TestRule {
    type Err = FbstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gfbst" => Ok(Self::Gfbst),
            "broken-negative-control" => Ok(Self::BrokenNegativeControl),
            other => Err(FbstError::InvalidArgument(format!("unknown test rule `{other}`"))),
        }
    }
}

impl TestRule {
    pub fn decide(self, grid: &GridModel, h: &CellSet, c: f64) -> DecisionValue {
        let ev_h = grid.ev(h);
        match self {
            Self::Gfbst => {
                gfbst_decide(ev_h, grid.ev(&h.complement()), c)
                    .expect("grid e-values of H and its complement cannot both fall below c")
                    .value
            }
            Self::BrokenNegativeControl => {
                if ev_h < c {
                    DecisionValue::Reject
                } else if ev_h > 1.0 - c {
                    DecisionValue::Accept
                } else {
                    DecisionValue::Agnostic
                }
            }
        }
    }
}

/// The six modalities of a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalRecord {
    /// □H: H is accepted.
    pub necessary: bool,
    /// ¬◇H: H is rejected.
    pub impossible: bool,
    /// ∇H: H is not decided.
    pub contingent: bool,
    /// ◇H: H is not rejected.
    pub possible: bool,
    /// ¬□H: H is not accepted.
    pub unnecessary: bool,
    /// ΔH: H is decided.
    pub determined: bool,
}

impl ModalRecord {
    /// The table's equivalences and the hexagon of opposition.
    pub fn is_consistent(&self) -> bool {
        let eq = self.determined == (self.necessary || self.impossible)
            && self.contingent == (self.possible && self.unnecessary)
            && self.possible == !self.impossible
            && self.unnecessary == !self.necessary;
        let contradiction = self.necessary != self.unnecessary
            && self.possible != self.impossible
            && self.contingent != self.determined;
        let contrariety = !(self.necessary && self.impossible);
        let subcontrariety = self.possible || self.unnecessary;
        eq && contradiction && contrariety && subcontrariety
    }
}

pub fn modal_table(value: DecisionValue) -> ModalRecord {
    let necessary = value == DecisionValue::Accept;
    let impossible = value == DecisionValue::Reject;
    ModalRecord {
        necessary,
        impossible,
        contingent: value == DecisionValue::Agnostic,
        possible: !impossible,
        unnecessary: !necessary,
        determined: necessary || impossible,
    }
}

/// The eight coherence conditions checked by the harness.
pub const CONDITIONS: [&str; 8] = [
    "necessity_inversion",
    "possibility_inversion",
    "contingency_inversion",
    "monotonic_necessity",
    "monotonic_possibility",
    "union_consonance",
    "intersection_consonance",
    "compatibility",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub trial: usize,
    /// Hex-encoded cell sets involved, in the order the condition names them.
    pub sets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub rule: TestRule,
    pub grid: (usize, usize),
    pub trials: usize,
    pub threshold: f64,
    pub seed: u64,
    pub counts: std::collections::BTreeMap<String, usize>,
    /// Trials where the region test on an upper cut `S` and the GFBST at the
    /// matching threshold disagree.
    pub region_mismatches: usize,
    pub examples: Vec<Violation>,
}

impl ViolationReport {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn count(&self, condition: &str) -> usize {
        self.counts.get(condition).copied().unwrap_or(0)
    }

    pub fn invertibility(&self) -> usize {
        CONDITIONS[..3].iter().map(|c| self.count(c)).sum()
    }
}

const MAX_EXAMPLES: usize = 20;

fn random_set(grid: &GridModel, rng: &mut ChaCha8Rng) -> CellSet {
    let n = grid.cells();
    let (nx, ny) = grid.shape();
    match rng.random_range(0..4u8) {
        0 => {
            let p: f64 = rng.random();
            CellSet::from_cells(n, (0..n).filter(|_| rng.random::<f64>() < p))
        }
        1 => {
            let (x0, x1) = sorted_pair(rng, nx);
            let (y0, y1) = sorted_pair(rng, ny);
            CellSet::from_cells(n, (0..n).filter(|c| (x0..=x1).contains(&(c % nx)) && (y0..=y1).contains(&(c / nx))))
        }
        2 => {
            // lower or upper cut of the surprise, possibly with a few cells flipped
            let pivot = grid.log_surprise()[rng.random_range(0..n)];
            let upper = rng.random::<bool>();
            let mut s = CellSet::from_cells(
                n,
                (0..n).filter(|c| (grid.log_surprise()[*c] > pivot) == upper),
            );
            for _ in 0..rng.random_range(0..3) {
                let c = rng.random_range(0..n);
                if s.contains(c) {
                    s = s.intersection(&CellSet::from_cells(n, [c]).complement());
                } else {
                    s.insert(c);
                }
            }
            s
        }
        _ => {
            let k = rng.random_range(0..=3usize);
            CellSet::from_cells(n, (0..k).map(|_| rng.random_range(0..n)))
        }
    }
}

fn sorted_pair(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    (a.min(b), a.max(b))
}

struct TrialOutcome {
    hits: [usize; 8],
    region_mismatch: bool,
    examples: Vec<Violation>,
}

fn run_trial(grid: &GridModel, rule: TestRule, c: f64, seed: u64, trial: usize) -> TrialOutcome {
    use DecisionValue::*;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, trial as u64));
    let mut hits = [0usize; 8];
    let mut examples = Vec::new();
    let mut flag = |i: usize, sets: &[&CellSet], hits: &mut [usize; 8]| {
        hits[i] += 1;
        examples.push(Violation {
            condition: CONDITIONS[i].into(),
            trial,
            sets: sets.iter().map(|s| s.to_hex()).collect(),
        });
    };
    let d = |h: &CellSet| rule.decide(grid, h, c);

    let h = random_set(grid, &mut rng);
    let hb = h.complement();
    let (dh, dhb) = (d(&h), d(&hb));
    if (dh == Accept) != (dhb == Reject) {
        flag(0, &[&h], &mut hits);
    }
    if (dh != Reject) != (dhb != Accept) {
        flag(1, &[&h], &mut hits);
    }
    if (dh == Agnostic) != (dhb == Agnostic) {
        flag(2, &[&h], &mut hits);
    }

    let h_big = h.union(&random_set(grid, &mut rng));
    let dbig = d(&h_big);
    if dh == Accept && dbig != Accept {
        flag(3, &[&h, &h_big], &mut hits);
    }
    if dh != Reject && dbig == Reject {
        flag(4, &[&h, &h_big], &mut hits);
    }

    let m = rng.random_range(2..=4usize);
    let family: Vec<CellSet> = (0..m).map(|_| random_set(grid, &mut rng)).collect();
    let join = family.iter().skip(1).fold(family[0].clone(), |a, b| a.union(b));
    let meet = family.iter().skip(1).fold(family[0].clone(), |a, b| a.intersection(b));
    let fam_refs: Vec<&CellSet> = family.iter().collect();
    let decisions: Vec<DecisionValue> = family.iter().map(&d).collect();
    if d(&join) != Reject && decisions.iter().all(|v| *v == Reject) {
        flag(5, &fam_refs, &mut hits);
    }
    if decisions.iter().all(|v| *v == Accept) && d(&meet) != Accept {
        flag(6, &fam_refs, &mut hits);
    }

    // compatibility on a random pair, in both its dominance and reject-level forms
    let h2 = random_set(grid, &mut rng);
    let pairs = [(&h, &h2), (&h2, &h)];
    for (a, b) in pairs {
        let (ea, eb) = (grid.ev(a), grid.ev(b));
        let (eab, ebb) = (grid.ev(&a.complement()), grid.ev(&b.complement()));
        let (da, db) = (d(a), d(b));
        let dominance = ea >= eb && eab <= ebb && da < db;
        let reject_level = ea >= eb && db != Reject && da == Reject;
        if dominance || reject_level {
            flag(7, &[a, b], &mut hits);
            break;
        }
    }

    // region-estimator characterization on an upper cut through a random cell
    let s_levels = grid.log_surprise();
    let pivot = s_levels[rng.random_range(0..grid.cells())];
    let s = grid.upper_cut(pivot);
    let mut region_mismatch = false;
    if !s.is_empty() && rule == TestRule::Gfbst {
        let c_s = s.iter().map(|cell| (s_levels[cell], grid.truth_at_cells()[cell]))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|p| p.1)
            .unwrap_or(1.0);
        if c_s < 1.0 {
            let by_region = region_estimator_decide(&s, &h).expect("non-empty region");
            let by_gfbst = gfbst_decide(grid.ev(&h), grid.ev(&hb), c_s).map(|x| x.value);
            region_mismatch = by_gfbst.map(|v| v != by_region).unwrap_or(true);
        }
    }

    examples.truncate(MAX_EXAMPLES);
    TrialOutcome {
        hits,
        region_mismatch,
        examples,
    }
}

/// Counts violations of the eight coherence conditions over random
/// hypothesis families evaluated exactly on `grid`.
pub fn check_logical_properties(
    grid: &GridModel,
    trials: usize,
    c: f64,
    seed: u64,
    rule: TestRule,
) -> Result<ViolationReport> {
    check_threshold(c)?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(grid, rule, c, seed, t))
        .collect();
    let mut counts: std::collections::BTreeMap<String, usize> =
        CONDITIONS.iter().map(|c| (c.to_string(), 0)).collect();
    let mut examples = Vec::new();
    let mut region_mismatches = 0;
    for o in outcomes {
        for (i, n) in o.hits.iter().enumerate() {
            *counts.get_mut(CONDITIONS[i]).unwrap() += n;
        }
        region_mismatches += o.region_mismatch as usize;
        for e in o.examples {
            if examples.len() < MAX_EXAMPLES {
                examples.push(e);
            }
        }
    }
    Ok(ViolationReport {
        rule,
        grid: grid.shape(),
        trials,
        threshold: c,
        seed,
        counts,
        region_mismatches,
        examples,
    })
}
