//! Seeded MCMC sampling of the posterior with per-draw log-surprise values.
//!
//! Chains start at a crude posterior mode and use a proposal shaped by the
//! Laplace approximation at that mode. The global proposal scale is tuned
//! during burn-in and frozen for the retained draws.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::model::StatisticalModel;
use crate::numeric::{hessian, laplace_factor, mix_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Metropolis,
    HitAndRun,
}

impl std::str::FromStr for Algorithm {
    type Err = FbstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metropolis" => Ok(Algorithm::Metropolis),
            "hit-and-run" => Ok(Algorithm::HitAndRun),
            other => Err(FbstError::InvalidArgument(format!(
                "unknown sampler algorithm `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub algorithm: Algorithm,
    pub chains: usize,
    /// Retained draws per chain.
    pub draws_per_chain: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Per-coordinate proposal scales; overrides the Laplace preconditioner.
    pub proposal_scale: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Metropolis,
            chains: 4,
            draws_per_chain: 50_000,
            burn_in: 10_000,
            thin: 1,
            proposal_scale: None,
            seed: 42,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Splits `total` retained draws evenly across the chains (rounding up).
    pub fn with_total_draws(mut self, total: usize) -> Self {
        self.draws_per_chain = total.div_ceil(self.chains.max(1));
        self
    }

    pub fn total_draws(&self) -> usize {
        self.chains * self.draws_per_chain
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(FbstError::InvalidArgument("need at least one chain".into()));
        }
        if self.draws_per_chain < 1000 {
            return Err(FbstError::InvalidArgument(format!(
                "draws per chain must be at least 1000, got {}",
                self.draws_per_chain
            )));
        }
        if self.thin == 0 {
            return Err(FbstError::InvalidArgument("thinning step must be >= 1".into()));
        }
        if let Some(s) = &self.proposal_scale {
            if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(FbstError::InvalidArgument(
                    "proposal scales must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Retained draws and their log-surprise values.
#[derive(Debug, Clone, PartialEq)]
pub struct SurpriseSample {
    names: Vec<String>,
    dim: usize,
    /// Row-major, `len() x dim`.
    draws: Vec<f64>,
    log_surprise: Vec<f64>,
    chains: usize,
    acceptance: Vec<f64>,
    ess: Option<f64>,
    config: Option<SamplerConfig>,
}

/// Diagnostics written next to an exported sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub names: Vec<String>,
    pub chains: usize,
    pub draws: usize,
    pub acceptance: Vec<f64>,
    pub ess: Option<f64>,
    pub config: Option<SamplerConfig>,
}

impl SurpriseSample {
    /// Assembles a sample from equal-length chains stored back to back.
    pub fn from_parts(
        names: Vec<String>,
        draws: Vec<f64>,
        log_surprise: Vec<f64>,
        chains: usize,
    ) -> Result<Self> {
        let dim = names.len();
        let n = log_surprise.len();
        if draws.len() != n * dim {
            return Err(FbstError::InvalidArgument(format!(
                "{} draw values for {n} draws of dimension {dim}",
                draws.len()
            )));
        }
        if chains == 0 || !n.is_multiple_of(chains) {
            return Err(FbstError::InvalidArgument(format!(
                "{n} draws cannot be split into {chains} equal chains"
            )));
        }
        Ok(Self {
            names,
            dim,
            draws,
            log_surprise,
            chains,
            acceptance: Vec::new(),
            ess: None,
            config: None,
        })
    }

    /// A draw-less sample holding only a log-surprise series (one chain).
    pub fn from_log_surprise(values: Vec<f64>) -> Self {
        Self {
            names: Vec::new(),
            dim: 0,
            draws: Vec::new(),
            log_surprise: values,
            chains: 1,
            acceptance: Vec::new(),
            ess: None,
            config: None,
        }
    }

    pub fn len(&self) -> usize {
        self.log_surprise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_surprise.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn log_surprise(&self) -> &[f64] {
        &self.log_surprise
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn chain_len(&self) -> usize {
        self.len() / self.chains
    }

    pub fn acceptance(&self) -> &[f64] {
        &self.acceptance
    }

    pub fn ess(&self) -> Option<f64> {
        self.ess
    }

    pub fn config(&self) -> Option<&SamplerConfig> {
        self.config.as_ref()
    }

    /// Per-coordinate sample means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (acc, v) in m.iter_mut().zip(self.draw(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.len() as f64);
        m
    }

    /// Per-coordinate sample variances.
    pub fn variance(&self) -> Vec<f64> {
        let m = self.mean();
        let mut s = vec![0.0; self.dim];
        for i in 0..self.len() {
            for ((acc, v), mu) in s.iter_mut().zip(self.draw(i)).zip(&m) {
                *acc += (v - mu) * (v - mu);
            }
        }
        s.iter_mut().for_each(|v| *v /= (self.len() - 1) as f64);
        s
    }

    /// Keeps every `step`-th draw of each chain.
    pub fn thinned(&self, step: usize) -> Self {
        let step = step.max(1);
        let per = self.chain_len();
        let keep = per / step;
        let mut draws = Vec::with_capacity(keep * self.chains * self.dim);
        let mut logs = Vec::with_capacity(keep * self.chains);
        for c in 0..self.chains {
            for j in 0..keep {
                let i = c * per + j * step;
                draws.extend_from_slice(self.draw(i));
                logs.push(self.log_surprise[i]);
            }
        }
        Self {
            draws,
            log_surprise: logs,
            ess: None,
            ..self.clone()
        }
    }

    /// Split-half stationarity flags per coordinate: `true` when the two
    /// halves' means differ by less than 4 standard errors.
    pub fn stationarity_flags(&self) -> Vec<bool> {
        let n = self.len();
        let half = n / 2;
        (0..self.dim)
            .map(|j| {
                let col: Vec<f64> = (0..n).map(|i| self.draws[i * self.dim + j]).collect();
                let (a, b) = col.split_at(half);
                let se2 = |x: &[f64]| {
                    let ess = ess_series(x).max(1.0);
                    let m = mean(x);
                    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64;
                    v / ess
                };
                let diff = (mean(a) - mean(b)).abs();
                diff < 4.0 * (se2(a) + se2(b)).sqrt() || diff == 0.0
            })
            .collect()
    }

    /// Writes draws and a `logS` column as CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("logS");
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.draw(i).iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{:e}", self.log_surprise[i]));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn sidecar(&self) -> SampleSidecar {
        SampleSidecar {
            names: self.names.clone(),
            chains: self.chains,
            draws: self.len(),
            acceptance: self.acceptance.clone(),
            ess: self.ess,
            config: self.config.clone(),
        }
    }

    /// Reads a sample written by [`SurpriseSample::write_csv`] plus its sidecar.
    pub fn read_csv<R: Read>(csv_reader: R, sidecar: &SampleSidecar) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(csv_reader);
        let headers = rdr.headers()?.clone();
        let dim = headers.len().saturating_sub(1);
        if headers.get(dim) != Some("logS") || dim != sidecar.names.len() {
            return Err(FbstError::Spec(
                "sample CSV header does not match its sidecar".into(),
            ));
        }
        let mut draws = Vec::new();
        let mut logs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| FbstError::Spec(format!("bad sample value `{field}`")))?;
                if j < dim {
                    draws.push(v);
                } else {
                    logs.push(v);
                }
            }
        }
        let mut s = Self::from_parts(sidecar.names.clone(), draws, logs, sidecar.chains)?;
        s.acceptance = sidecar.acceptance.clone();
        s.ess = sidecar.ess;
        s.config = sidecar.config.clone();
        Ok(s)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Metropolis acceptance test for a log target ratio and a uniform draw.
pub(crate) fn metropolis_accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || u < log_ratio.exp()
}

/// 100 sweeps of coordinate search on the log-kernel.
pub fn crude_mode(model: &StatisticalModel) -> Vec<f64> {
    let mut x = model.initial_point().to_vec();
    let mut fx = model.log_kernel(&x);
    let mut steps: Vec<f64> = x.iter().map(|v| 0.1 * v.abs().max(1.0)).collect();
    for _ in 0..100 {
        for i in 0..x.len() {
            let base = x[i];
            let mut moved = false;
            for dir in [1.0, -1.0] {
                x[i] = base + dir * steps[i];
                let f = model.log_kernel(&x);
                if f > fx {
                    fx = f;
                    moved = true;
                    break;
                }
            }
            if moved {
                steps[i] *= 1.5;
            } else {
                x[i] = base;
                steps[i] *= 0.5;
            }
        }
    }
    x
}

struct ChainOutput {
    draws: Vec<f64>,
    log_surprise: Vec<f64>,
    acceptance: f64,
}

struct Proposal {
    factor: DMatrix<f64>,
    dim: usize,
}

impl Proposal {
    fn build(model: &StatisticalModel, at: &[f64], cfg: &SamplerConfig) -> Self {
        let d = at.len();
        if let Some(scales) = &cfg.proposal_scale {
            let diag = DVector::from_iterator(d, (0..d).map(|i| scales[i.min(scales.len() - 1)]));
            return Self {
                factor: DMatrix::from_diagonal(&diag),
                dim: d,
            };
        }
        let h = hessian(&|x: &[f64]| model.log_kernel(x), at);
        let factor = laplace_factor(-h).unwrap_or_else(|| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                at.iter().map(|v| 0.1 * v.abs().max(1.0)),
            ))
        });
        Self { factor, dim: d }
    }

    fn direction<R: Rng>(&self, rng: &mut R, algorithm: Algorithm) -> DVector<f64> {
        let z = DVector::from_iterator(self.dim, (0..self.dim).map(|_| rng.sample(StandardNormal)));
        match algorithm {
            Algorithm::Metropolis => &self.factor * z,
            Algorithm::HitAndRun => {
                let u = &z / z.norm().max(f64::MIN_POSITIVE);
                // 1-D bracket [-√3, √3]·λ along the whitened direction
                let r: f64 = rng.random_range(-1.0..1.0) * 3f64.sqrt() * (self.dim as f64).sqrt();
                (&self.factor * u) * r
            }
        }
    }
}

fn run_chain(
    model: &StatisticalModel,
    cfg: &SamplerConfig,
    proposal: &Proposal,
    start: &[f64],
    chain: usize,
) -> Result<ChainOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, chain as u64));
    let d = start.len();
    let mut x = start.to_vec();
    let mut lx = model.log_kernel(&x);
    if !lx.is_finite() {
        return Err(FbstError::Initialization(format!(
            "log-kernel is {lx} at the starting point {x:?}"
        )));
    }
    let target = if d == 1 { 0.44 } else { 0.234 };
    let mut log_lambda = (2.38 / (d as f64).sqrt()).ln();
    let mut cand = vec![0.0; d];

    let mut step = |x: &mut Vec<f64>, lx: &mut f64, lambda: f64, rng: &mut ChaCha8Rng| -> bool {
        let dir = proposal.direction(rng, cfg.algorithm);
        for i in 0..d {
            cand[i] = x[i] + lambda * dir[i];
        }
        let lc = model.log_kernel(&cand);
        let u: f64 = rng.random();
        if lc.is_finite() && metropolis_accept(lc - *lx, u) {
            x.copy_from_slice(&cand);
            *lx = lc;
            true
        } else {
            false
        }
    };

    const BATCH: usize = 50;
    let mut batch_acc = 0usize;
    let mut batches = 0usize;
    for i in 0..cfg.burn_in {
        if step(&mut x, &mut lx, log_lambda.exp(), &mut rng) {
            batch_acc += 1;
        }
        if (i + 1) % BATCH == 0 {
            batches += 1;
            let rate = batch_acc as f64 / BATCH as f64;
            let gain = (10.0 / (batches as f64).sqrt()).min(1.0);
            log_lambda += gain * (rate - target);
            batch_acc = 0;
        }
    }

    let lambda = log_lambda.exp();
    let total = cfg.draws_per_chain * cfg.thin;
    let mut draws = Vec::with_capacity(cfg.draws_per_chain * d);
    let mut logs = Vec::with_capacity(cfg.draws_per_chain);
    let mut accepted = 0usize;
    for i in 0..total {
        if step(&mut x, &mut lx, lambda, &mut rng) {
            accepted += 1;
        }
        if (i + 1) % cfg.thin == 0 {
            draws.extend_from_slice(&x);
            logs.push(lx - model.log_reference(&x));
        }
    }
    if accepted == 0 {
        return Err(FbstError::SamplerStuck { chain });
    }
    Ok(ChainOutput {
        draws,
        log_surprise: logs,
        acceptance: accepted as f64 / total as f64,
    })
}

/// Runs `cfg.chains` independent chains targeting the model's posterior
/// kernel. Chains run in parallel; results are merged in chain order, so the
/// output depends only on `(model, cfg)`.
pub fn sample_posterior(model: &StatisticalModel, cfg: &SamplerConfig) -> Result<SurpriseSample> {
    cfg.validate()?;
    let start = crude_mode(model);
    if !model.log_kernel(&start).is_finite() {
        return Err(FbstError::Initialization(format!(
            "log-kernel is not finite at the crude mode {start:?}"
        )));
    }
    let proposal = Proposal::build(model, &start, cfg);
    let outputs: Vec<Result<ChainOutput>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(model, cfg, &proposal, &start, c))
        .collect();

    let d = model.dim();
    let mut draws = Vec::with_capacity(cfg.total_draws() * d);
    let mut logs = Vec::with_capacity(cfg.total_draws());
    let mut acceptance = Vec::with_capacity(cfg.chains);
    for out in outputs {
        let out = out?;
        draws.extend(out.draws);
        logs.extend(out.log_surprise);
        acceptance.push(out.acceptance);
    }
    let mut sample = SurpriseSample::from_parts(model.space().names().to_vec(), draws, logs, cfg.chains)?;
    sample.acceptance = acceptance;
    sample.ess = effective_sample_size(&sample).ok();
    sample.config = Some(cfg.clone());
    Ok(sample)
}

/// Initial-positive-sequence ESS of a single series (Geyer).
pub(crate) fn ess_series(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let c0 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let autocorr = |lag: usize| {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (x[i] - m) * (x[i + lag] - m);
        }
        s / n as f64 / c0
    };
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n / 2 {
        let mut gamma = autocorr(2 * k) + autocorr(2 * k + 1);
        if gamma <= 0.0 {
            break;
        }
        // initial monotone sequence
        gamma = gamma.min(prev);
        prev = gamma;
        tau += 2.0 * gamma;
        k += 1;
    }
    (n as f64 / tau.max(f64::MIN_POSITIVE)).min(n as f64)
}

/// Effective sample size of the log-surprise series, summed over chains.
pub fn effective_sample_size(sample: &SurpriseSample) -> Result<f64> {
    let n = sample.len();
    if n < 100 {
        return Err(FbstError::InvalidArgument(format!(
            "ESS needs at least 100 draws, got {n}"
        )));
    }
    let s = sample.log_surprise();
    let first = s[0];
    if s.iter().all(|&v| v == first) {
        return Err(FbstError::DegenerateSeries(
            "log-surprise series is constant".into(),
        ));
    }
    let per = sample.chain_len();
    let total: f64 = s.chunks(per).map(ess_series).sum();
    Ok(total.min(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_gaussian_mean_model;

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let bad = SamplerConfig {
            draws_per_chain: 999,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            thin: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            proposal_scale: Some(vec![0.0]),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(SamplerConfig::default().with_total_draws(200_001).draws_per_chain, 50_001);
    }

    #[test]
    fn detailed_balance_on_three_points() {
        // random walk on a cycle of three states with symmetric proposals
        let pi: [f64; 3] = [0.2, 0.3, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 400_000;
        let mut state = 0usize;
        let mut counts = [[0usize; 3]; 3];
        for _ in 0..n {
            let prop = if rng.random::<bool>() { (state + 1) % 3 } else { (state + 2) % 3 };
            let lr = (pi[prop] / pi[state]).ln();
            let next = if metropolis_accept(lr, rng.random()) { prop } else { state };
            counts[state][next] += 1;
            state = next;
        }
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                let fab = counts[a][b] as f64 / n as f64;
                let fba = counts[b][a] as f64 / n as f64;
                let se = ((fab + fba) / n as f64).sqrt();
                assert!((fab - fba).abs() < 3.0 * se, "{a}->{b}: {fab} vs {fba}");
            }
        }
    }

    #[test]
    fn gaussian_moments_and_determinism() {
        let model = make_gaussian_mean_model(0.0, 1.0).unwrap();
        let cfg = SamplerConfig::default();
        let s = sample_posterior(&model, &cfg).unwrap();
        assert_eq!(s.len(), 200_000);
        assert!(s.mean()[0].abs() < 0.01, "mean {}", s.mean()[0]);
        assert!((s.variance()[0] - 1.0).abs() < 0.02, "var {}", s.variance()[0]);
        let again = sample_posterior(&model, &cfg).unwrap();
        assert_eq!(s, again);
        assert!(s.stationarity_flags().iter().all(|&ok| ok));
        for &a in s.acceptance() {
            assert!(a > 0.25 && a < 0.65, "acceptance {a}");
        }
    }

    #[test]
    fn hit_and_run_targets_the_posterior() {
        let model = make_gaussian_mean_model(2.0, 0.25).unwrap();
        let cfg = SamplerConfig {
            algorithm: Algorithm::HitAndRun,
            draws_per_chain: 25_000,
            ..Default::default()
        };
        let s = sample_posterior(&model, &cfg).unwrap();
        assert!((s.mean()[0] - 2.0).abs() < 0.01);
        assert!((s.variance()[0] - 0.25).abs() < 0.01);
    }

    #[test]
    fn non_finite_start_fails_initialization() {
        use crate::model::{ParameterSpace, StatisticalModel};
        use std::sync::Arc;
        let space = ParameterSpace::unbounded(vec!["a".into()]).unwrap();
        let model = StatisticalModel::with_flat_reference(space, Arc::new(|_: &[f64]| f64::NEG_INFINITY));
        let cfg = SamplerConfig {
            draws_per_chain: 1000,
            burn_in: 100,
            ..Default::default()
        };
        assert!(matches!(
            sample_posterior(&model, &cfg),
            Err(FbstError::Initialization(_))
        ));
    }

    #[test]
    fn ess_rejects_constant_series() {
        let s = SurpriseSample::from_log_surprise(vec![1.5; 500]);
        assert!(matches!(
            effective_sample_size(&s),
            Err(FbstError::DegenerateSeries(_))
        ));
        let short = SurpriseSample::from_log_surprise(vec![1.0, 2.0]);
        assert!(effective_sample_size(&short).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let model = make_gaussian_mean_model(0.0, 1.0).unwrap();
        let cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 1000,
            burn_in: 200,
            ..Default::default()
        };
        let s = sample_posterior(&model, &cfg).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let sidecar: SampleSidecar =
            serde_json::from_str(&serde_json::to_string(&s.sidecar()).unwrap()).unwrap();
        let back = SurpriseSample::read_csv(buf.as_slice(), &sidecar).unwrap();
        assert_eq!(back, s);
    }
}
