//! Step-ladder estimates of the truth function
//! `W(v) = Pr{θ : s(θ) ≤ v}` under the posterior.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::sampler::SurpriseSample;

/// Default condensation bound.
pub const DEFAULT_N_MAX: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderOrigin {
    Empirical,
    Convolved,
    Analytic,
}

/// Right-continuous step CDF over log-surprise values.
///
/// `W(v) = max{w_i : v_i ≤ v}` and `W(v) = 0` below the first support point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLadder {
    log_v: Vec<f64>,
    w: Vec<f64>,
    origin: LadderOrigin,
}

impl TruthLadder {
    /// Validates a ladder given as support points and cumulative masses.
    pub fn new(log_v: Vec<f64>, w: Vec<f64>, origin: LadderOrigin) -> Result<Self> {
        if log_v.is_empty() || log_v.len() != w.len() {
            return Err(FbstError::InvalidArgument(
                "ladder needs matching non-empty support and mass vectors".into(),
            ));
        }
        if log_v.windows(2).any(|p| !(p[0] < p[1])) || log_v.iter().any(|v| v.is_nan()) {
            return Err(FbstError::InvalidArgument(
                "ladder support must be strictly increasing".into(),
            ));
        }
        if w.windows(2).any(|p| p[0] > p[1]) || w[0] < 0.0 || w.iter().any(|m| m.is_nan()) {
            return Err(FbstError::InvalidArgument(
                "ladder masses must be non-decreasing in [0, 1]".into(),
            ));
        }
        if *w.last().unwrap() != 1.0 {
            return Err(FbstError::InvalidArgument(
                "ladder must end with total mass 1".into(),
            ));
        }
        Ok(Self { log_v, w, origin })
    }

    /// Builds a ladder from (log-value, mass) atoms. Masses are normalized;
    /// equal values are merged.
    pub fn from_atoms(atoms: &mut [(f64, f64)], origin: LadderOrigin) -> Result<Self> {
        if atoms.is_empty() {
            return Err(FbstError::EmptySample);
        }
        if atoms.iter().any(|a| a.0.is_nan() || !(a.1 >= 0.0)) {
            return Err(FbstError::InvalidArgument(
                "atoms need non-NaN values and non-negative masses".into(),
            ));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(FbstError::InvalidArgument("atoms carry no mass".into()));
        }
        let mut log_v = Vec::with_capacity(atoms.len());
        let mut w = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for &(v, m) in atoms.iter() {
            acc += m;
            if log_v.last() == Some(&v) {
                *w.last_mut().unwrap() = acc / total;
            } else {
                log_v.push(v);
                w.push(acc / total);
            }
        }
        let last = w.len() - 1;
        w[last] = 1.0;
        for i in (0..last).rev() {
            w[i] = w[i].min(w[i + 1]);
        }
        Ok(Self { log_v, w, origin })
    }

    /// Single atom of mass one at `log_a`.
    pub fn unit_atom(log_a: f64) -> Self {
        Self {
            log_v: vec![log_a],
            w: vec![1.0],
            origin: LadderOrigin::Analytic,
        }
    }

    pub fn len(&self) -> usize {
        self.log_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_v.is_empty()
    }

    pub fn support(&self) -> &[f64] {
        &self.log_v
    }

    pub fn masses(&self) -> &[f64] {
        &self.w
    }

    pub fn origin(&self) -> LadderOrigin {
        self.origin
    }

    pub fn min_support(&self) -> f64 {
        self.log_v[0]
    }

    pub fn max_support(&self) -> f64 {
        *self.log_v.last().unwrap()
    }

    /// Point masses `(log_v_i, w_i - w_{i-1})`.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.log_v
            .iter()
            .zip(&self.w)
            .scan(0.0, |prev, (&v, &w)| {
                let m = w - *prev;
                *prev = w;
                Some((v, m))
            })
    }

    pub fn eval(&self, log_v: f64) -> f64 {
        if log_v.is_nan() {
            return f64::NAN;
        }
        let idx = self.log_v.partition_point(|&s| s <= log_v);
        if idx == 0 {
            0.0
        } else {
            self.w[idx - 1]
        }
    }

    /// Adds `delta` to every support value.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            log_v: self.log_v.iter().map(|v| v + delta).collect(),
            ..self.clone()
        }
    }

    /// Two-column CSV `log_v,w`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["log_v", "w"])?;
        for (v, m) in self.log_v.iter().zip(&self.w) {
            wtr.write_record([format!("{v:e}"), format!("{m:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Right-continuous evaluation of `W` at a log-scale level.
pub fn eval_truth(ladder: &TruthLadder, log_v: f64) -> f64 {
    ladder.eval(log_v)
}

/// Empirical truth function of a surprise sample, condensed to at most
/// `n_max` support points. Ties at a level count inside the lower cut.
pub fn estimate_truth_ladder(sample: &SurpriseSample, n_max: usize) -> Result<TruthLadder> {
    if !sample.is_empty() && (n_max == 0 || sample.len() < n_max) {
        return Err(FbstError::InvalidArgument(format!(
            "condensation bound {n_max} needs a sample with at least that many draws, got {}",
            sample.len()
        )));
    }
    Ok(condense(&empirical_ladder(sample)?, n_max.max(2)))
}

/// The full (uncondensed) empirical truth function of a sample.
pub fn empirical_ladder(sample: &SurpriseSample) -> Result<TruthLadder> {
    if sample.is_empty() {
        return Err(FbstError::EmptySample);
    }
    let mut values: Vec<f64> = sample.log_surprise().to_vec();
    if values.iter().any(|v| v.is_nan()) {
        return Err(FbstError::InvalidArgument("log-surprise sample contains NaN".into()));
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mut log_v = Vec::new();
    let mut w = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if log_v.last() == Some(&v) {
            *w.last_mut().unwrap() = (i + 1) as f64 / n;
        } else {
            log_v.push(v);
            w.push((i + 1) as f64 / n);
        }
    }
    *w.last_mut().unwrap() = 1.0;
    Ok(TruthLadder {
        log_v,
        w,
        origin: LadderOrigin::Empirical,
    })
}

/// Reduces a ladder to at most `n_max` support points with sup-norm error at
/// most `1/n_max`. Kept supports retain their exact cumulative masses, so
/// total mass is preserved and the result never exceeds the input.
///
/// `n_max` below 2 is treated as 2.
pub fn condense(ladder: &TruthLadder, n_max: usize) -> TruthLadder {
    let n_max = n_max.max(2);
    if ladder.len() <= n_max {
        return ladder.clone();
    }
    let delta = 1.0 / n_max as f64;
    let last = ladder.len() - 1;
    let mut log_v = Vec::with_capacity(n_max);
    let mut w = Vec::with_capacity(n_max);
    let mut kept = 0.0;
    for i in 0..last {
        if ladder.w[i] - kept > delta {
            log_v.push(ladder.log_v[i]);
            w.push(ladder.w[i]);
            kept = ladder.w[i];
        }
    }
    log_v.push(ladder.log_v[last]);
    w.push(1.0);
    TruthLadder {
        log_v,
        w,
        origin: ladder.origin,
    }
}

/// `sup_v |A(v) - B(v)|`, attained at a support point of either ladder.
pub fn sup_distance(a: &TruthLadder, b: &TruthLadder) -> f64 {
    a.log_v
        .iter()
        .chain(&b.log_v)
        .map(|&v| (a.eval(v) - b.eval(v)).abs())
        .fold(0.0, f64::max)
}

/// Sup distance that tolerates a horizontal slack of `eps·(1 + |v|)` in the
/// support values, so rounding in log-value arithmetic does not register as
/// a full mass jump: `sup_v max(A(v) − B(v + ε), B(v) − A(v + ε), 0)`.
pub fn sup_distance_with_slack(a: &TruthLadder, b: &TruthLadder, eps: f64) -> f64 {
    let slack = |v: f64| v + eps * (1.0 + v.abs());
    let one_sided = |x: &TruthLadder, y: &TruthLadder| {
        x.log_v
            .iter()
            .chain(&y.log_v)
            .map(|&v| (x.eval(v) - y.eval(slack(v))).max(0.0))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}
