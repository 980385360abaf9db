//! Polynomial order selection on the Sakamoto benchmark: empirical and
//! penalized errors, AIC, and FBST-based selection.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::evalue::{evalue, EvidenceReport};
use crate::model::{polynomial_regression, Dataset, Hypothesis, RegressionFit, SigmaScale};
use crate::numeric::mix_seed;
use crate::optimizer::OptimizerConfig;
use crate::sampler::{sample_posterior, SamplerConfig};
use crate::truth::DEFAULT_N_MAX;

/// Design grid `x_i = (i − 1)·0.05`, `i = 1 … 21`.
pub const SAKAMOTO_X: [f64; 21] = [
    0.00, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75,
    0.80, 0.85, 0.90, 0.95, 1.00,
];

pub const SAKAMOTO_Y: [f64; 21] = [
    0.125, 0.156, 0.193, -0.032, -0.075, -0.064, 0.006, -0.135, 0.105, 0.131, 0.154, 0.114, -0.094,
    0.215, 0.035, 0.327, 0.061, 0.383, 0.357, 0.605, 0.499,
];

/// Noise standard deviation of the benchmark generator.
pub const GENERATOR_NOISE_SD: f64 = 0.1;

/// Target function `g(x) = exp((x − 0.3)²) − 1`.
pub fn target_function(x: f64) -> f64 {
    ((x - 0.3) * (x - 0.3)).exp() - 1.0
}

pub fn sakamoto_dataset() -> Dataset {
    Dataset::from_columns(&[("x", &SAKAMOTO_X), ("y", &SAKAMOTO_Y)]).expect("embedded benchmark is valid")
}

/// Fresh dataset `y_i = g(x_i) + N(0, sd²)` on the benchmark grid.
pub fn generate_dataset(seed: u64, noise_sd: f64) -> Result<Dataset> {
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|e| FbstError::InvalidArgument(format!("noise sd {noise_sd}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = SAKAMOTO_X.iter().map(|&x| target_function(x) + noise.sample(&mut rng)).collect();
    Dataset::from_columns(&[("x", &SAKAMOTO_X), ("y", &y)])
}

/// Mean squared residual `SSR/n` of the least-squares order-`k` fit.
pub fn empirical_error(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    let fit = RegressionFit::fit(x, y, k, SigmaScale::LogSigma)?;
    Ok(fit.ssr / fit.n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Fpe,
    Sbc,
    Gcv,
    Sms,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Self::Fpe, Self::Sbc, Self::Gcv, Self::Sms];
}

impl FromStr for Criterion {
    type Err = FbstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fpe" => Ok(Self::Fpe),
            "sbc" | "bic" => Ok(Self::Sbc),
            "gcv" => Ok(Self::Gcv),
            "sms" => Ok(Self::Sms),
            _ => Err(FbstError::UnknownCriterion(s.to_string())),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fpe => "fpe",
            Self::Sbc => "sbc",
            Self::Gcv => "gcv",
            Self::Sms => "sms",
        })
    }
}

/// Regularization factor `r(d, n)` with `q = d/n`.
pub fn penalty_factor(criterion: Criterion, d: usize, n: usize) -> Result<f64> {
    if d == 0 || d >= n {
        return Err(FbstError::InvalidArgument(format!(
            "penalty factor needs 0 < d < n, got d = {d}, n = {n}"
        )));
    }
    let q = d as f64 / n as f64;
    Ok(match criterion {
        Criterion::Fpe => (1.0 + q) / (1.0 - q),
        Criterion::Sbc => 1.0 + (n as f64).ln() * q / (2.0 - 2.0 * q),
        Criterion::Gcv => (1.0 - q).powi(-2),
        Criterion::Sms => 1.0 + 2.0 * q,
    })
}

/// `−2·(maximized Gaussian log-likelihood) + 2d`, `d = k + 2`.
pub fn aic(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    let r = empirical_error(x, y, k)?;
    Ok(aic_from_error(r, y.len(), k + 2))
}

fn aic_from_error(r_emp: f64, n: usize, d: usize) -> f64 {
    let n = n as f64;
    let loglik = -(n / 2.0) * (2.0 * std::f64::consts::PI * r_emp).ln() - n / 2.0;
    -2.0 * loglik + 2.0 * d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub order: usize,
    pub r_emp: f64,
    pub r_fpe: f64,
    pub r_sbc: f64,
    pub r_gcv: f64,
    pub r_sms: f64,
    pub aic: f64,
    /// `ev(β_k = 0)` within the order-`k` model.
    pub ev: Option<f64>,
    pub sev: Option<f64>,
    pub d: usize,
    pub q_ratio: f64,
}

impl SelectionRow {
    pub fn penalized(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Fpe => self.r_fpe,
            Criterion::Sbc => self.r_sbc,
            Criterion::Gcv => self.r_gcv,
            Criterion::Sms => self.r_sms,
        }
    }
}

/// Sampling and optimization settings for the FBST columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbstSettings {
    pub sampler: SamplerConfig,
    pub n_max: usize,
    pub optimizer: OptimizerConfig,
    pub threshold: f64,
}

impl Default for FbstSettings {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            n_max: DEFAULT_N_MAX,
            optimizer: OptimizerConfig::default(),
            threshold: crate::gfbst::DEFAULT_THRESHOLD,
        }
    }
}

/// Full e-value report for `β_k = 0` in the order-`k` model. The sampler
/// seed is derived from the configured seed and `k`.
pub fn order_evidence(x: &[f64], y: &[f64], k: usize, settings: &FbstSettings) -> Result<EvidenceReport> {
    let model = polynomial_regression(x, y, k, SigmaScale::LogSigma)?;
    let h = Hypothesis::coordinate_equals(model.dim(), k, 0.0);
    let sampler = settings.sampler.clone().with_seed(mix_seed(settings.sampler.seed, k as u64));
    let sample = sample_posterior(&model, &sampler)?;
    evalue(&model, &h, &sample, settings.n_max, &settings.optimizer)
}

/// Rows for `k = 0 … k_max`, with e-value columns when `fbst` is given.
pub fn selection_table(x: &[f64], y: &[f64], k_max: usize, fbst: Option<&FbstSettings>) -> Result<Vec<SelectionRow>> {
    let n = y.len();
    if n < 3 || k_max > n - 3 {
        return Err(FbstError::InvalidArgument(format!(
            "maximum order {k_max} needs at least {} observations, got {n}",
            k_max + 3
        )));
    }
    (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let r_emp = empirical_error(x, y, k)?;
            let d = k + 2;
            let f = |c| penalty_factor(c, d, n).map(|p| p * r_emp);
            let (ev, sev) = match fbst {
                Some(s) => {
                    let rep = order_evidence(x, y, k, s)?;
                    (Some(rep.ev), rep.sev)
                }
                None => (None, None),
            };
            Ok(SelectionRow {
                order: k,
                r_emp,
                r_fpe: f(Criterion::Fpe)?,
                r_sbc: f(Criterion::Sbc)?,
                r_gcv: f(Criterion::Gcv)?,
                r_sms: f(Criterion::Sms)?,
                aic: aic_from_error(r_emp, n, d),
                ev,
                sev,
                d,
                q_ratio: d as f64 / n as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Selector {
    Criterion { criterion: Criterion },
    Fbst { threshold: f64 },
}

impl Selector {
    /// Picks an order from a computed table.
    ///
    /// Criteria take the argmin of their column (lowest order on ties). The
    /// FBST scans `k = k_max … 1` and keeps the first order whose top
    /// coefficient is rejected (`ev(β_k = 0) < c`), else order 0.
    pub fn select(&self, rows: &[SelectionRow]) -> Result<usize> {
        match *self {
            Selector::Criterion { criterion } => rows
                .iter()
                .min_by(|a, b| a.penalized(criterion).total_cmp(&b.penalized(criterion)))
                .map(|r| r.order)
                .ok_or_else(|| FbstError::InvalidArgument("empty selection table".into())),
            Selector::Fbst { threshold } => {
                for r in rows.iter().rev().filter(|r| r.order >= 1) {
                    let ev = r.ev.ok_or_else(|| {
                        FbstError::InvalidArgument("FBST selection needs the e-value column".into())
                    })?;
                    if ev < threshold {
                        return Ok(r.order);
                    }
                }
                Ok(0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub selector: Selector,
    pub selected_order: usize,
    pub rows: Vec<SelectionRow>,
}

pub fn select_order(
    x: &[f64],
    y: &[f64],
    k_max: usize,
    selector: Selector,
    fbst: Option<&FbstSettings>,
) -> Result<SelectionReport> {
    if matches!(selector, Selector::Fbst { .. }) && fbst.is_none() {
        return Err(FbstError::InvalidArgument("FBST selection needs sampler settings".into()));
    }
    let rows = selection_table(x, y, k_max, fbst)?;
    let selected_order = selector.select(&rows)?;
    Ok(SelectionReport {
        selector,
        selected_order,
        rows,
    })
}

/// Writes the table as CSV, leaving e-value cells blank when absent.
pub fn write_table_csv<W: std::io::Write>(rows: &[SelectionRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["order", "r_emp", "r_fpe", "r_sbc", "r_gcv", "r_sms", "aic", "ev", "sev", "d", "q_ratio"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.order.to_string(),
            r.r_emp.to_string(),
            r.r_fpe.to_string(),
            r.r_sbc.to_string(),
            r.r_gcv.to_string(),
            r.r_sms.to_string(),
            r.aic.to_string(),
            opt(r.ev),
            opt(r.sev),
            r.d.to_string(),
            r.q_ratio.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One abscissa of the fitted-curves plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    /// Observed value when `x` is a data point.
    pub y: Option<f64>,
    pub target: f64,
    /// Fitted polynomial of each order `0 … k_max` at `x`.
    pub fitted: Vec<f64>,
}

/// Data points, target function and least-squares fits of orders
/// `0 … k_max`, on the data abscissae merged with `resolution` even points
/// across the data range.
pub fn plot_data(x: &[f64], y: &[f64], k_max: usize, resolution: usize) -> Result<Vec<PlotRow>> {
    let fits: Vec<RegressionFit> = (0..=k_max)
        .map(|k| RegressionFit::fit(x, y, k, SigmaScale::LogSigma))
        .collect::<Result<_>>()?;
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let mut points: Vec<(f64, Option<f64>)> = x.iter().zip(y).map(|(a, b)| (*a, Some(*b))).collect();
    if resolution >= 2 {
        points.extend((0..resolution).map(|i| (lo + (hi - lo) * i as f64 / (resolution - 1) as f64, None)));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.is_some().cmp(&a.1.is_some())));
    points.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    Ok(points
        .into_iter()
        .map(|(px, py)| PlotRow {
            x: px,
            y: py,
            target: target_function(px),
            fitted: fits
                .iter()
                .map(|f| f.beta_hat.iter().enumerate().map(|(j, b)| b * px.powi(j as i32)).sum())
                .collect(),
        })
        .collect())
}

pub fn write_plot_csv<W: std::io::Write>(rows: &[PlotRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let k = rows.first().map(|r| r.fitted.len()).unwrap_or(0);
    let mut header = vec!["x".to_string(), "y".into(), "target".into()];
    header.extend((0..k).map(|j| format!("fit_{j}")));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.x.to_string(), r.y.map(|v| v.to_string()).unwrap_or_default(), r.target.to_string()];
        rec.extend(r.fitted.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
