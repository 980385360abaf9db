//! E-values, their complements and the chi-square standardization.

use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::model::{Hypothesis, StatisticalModel};
use crate::optimizer::{maximize_surprise, Method, OptimizerConfig, Optimum};
use crate::sampler::SurpriseSample;
use crate::truth::{estimate_truth_ladder, TruthLadder};

pub use crate::special::{chi2_cdf, chi2_quantile};

/// Monte Carlo and optimizer diagnostics attached to a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub draws: usize,
    pub chains: usize,
    pub ess: Option<f64>,
    pub acceptance: Vec<f64>,
    pub ladder_points: usize,
    /// Sup-norm error bound of the condensed ladder, `1/N_max`.
    pub condensation_bound: f64,
    pub stationary: bool,
    pub optimizer: Option<OptimizerDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub method: Method,
    pub eq_residual: f64,
    pub ineq_residual: f64,
    pub restarts_used: usize,
    pub boundary: bool,
    pub multimodal: bool,
    pub limit_point: bool,
}

impl From<&Optimum> for OptimizerDiagnostics {
    fn from(o: &Optimum) -> Self {
        Self {
            method: o.method,
            eq_residual: o.eq_residual,
            ineq_residual: o.ineq_residual,
            restarts_used: o.restarts_used,
            boundary: o.boundary,
            multimodal: o.multimodal,
            limit_point: o.limit_point,
        }
    }
}

/// Reproducibility metadata. The config hash is filled in by the caller
/// that owns the full configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub ev: f64,
    pub ev_bar: f64,
    pub sev: Option<f64>,
    pub sev_bar: Option<f64>,
    /// Bracket for `sev` when `ev_bar` is below the Monte Carlo resolution `1/ESS`.
    pub sev_interval: Option<[f64; 2]>,
    /// `hdim = t`: sev is reported equal to ev without standardization.
    pub unstandardized: bool,
    pub log_s_star: f64,
    pub theta_star: Vec<f64>,
    pub parameter_names: Vec<String>,
    pub t: usize,
    pub hdim: usize,
    pub diagnostics: Diagnostics,
    /// `ev(H̄)` when it has been computed, for the three-valued test.
    pub ev_complement: Option<f64>,
    pub provenance: Provenance,
}

impl EvidenceReport {
    /// Report from a ladder and a supremum level, with no sample diagnostics.
    pub fn from_ladder(ladder: &TruthLadder, log_s_star: f64, t: usize, hdim: usize) -> Self {
        let ev = ladder.eval(log_s_star);
        Self {
            ev,
            ev_bar: 1.0 - ev,
            sev: None,
            sev_bar: None,
            sev_interval: None,
            unstandardized: false,
            log_s_star,
            theta_star: Vec::new(),
            parameter_names: Vec::new(),
            t,
            hdim,
            diagnostics: Diagnostics {
                ladder_points: ladder.len(),
                ..Default::default()
            },
            ev_complement: None,
            provenance: Provenance::default(),
        }
    }
}

/// `σ(t, h, c) = Q(t − h, Q⁻¹(t, c))`, with `σ(t, t, c) = c`.
///
/// `c` is clamped into `[0, 1]`; `h` above `t` is treated as `t`.
pub fn standardize(t: usize, h: usize, c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if h >= t || t == 0 || h == 0 {
        // h = 0 gives Q(t, Q⁻¹(t, c)) = c as well
        return c;
    }
    if c == 0.0 || c == 1.0 {
        return c;
    }
    chi2_cdf((t - h) as u32, chi2_quantile(t as u32, c)).clamp(0.0, 1.0)
}

/// Fills in `sev` and `sev_bar = σ(t, hdim, ev_bar)`.
pub fn standardized_evalue(mut report: EvidenceReport) -> EvidenceReport {
    let (t, h) = (report.t, report.hdim);
    report.unstandardized = h >= t;
    let sev_bar = standardize(t, h, report.ev_bar);
    report.sev_bar = Some(sev_bar);
    report.sev = Some(1.0 - sev_bar);
    report.sev_interval = match report.diagnostics.ess {
        Some(ess) if ess > 0.0 && report.ev_bar < 1.0 / ess && !report.unstandardized => {
            let hi_bar = standardize(t, h, (2.0 / ess).min(1.0));
            Some([1.0 - hi_bar, 1.0 - standardize(t, h, 0.0)])
        }
        _ => None,
    };
    report
}

/// Standard FBST evaluation: `ev = W(s*)` with `W` estimated from `sample`
/// and `s*` from the constrained optimizer.
pub fn evalue(
    model: &StatisticalModel,
    h: &Hypothesis,
    sample: &SurpriseSample,
    n_max: usize,
    opt_cfg: &OptimizerConfig,
) -> Result<EvidenceReport> {
    let ladder = estimate_truth_ladder(sample, n_max)?;
    let opt = maximize_surprise(model, h, Some(sample), opt_cfg)?;
    Ok(assemble(model, h, sample, &ladder, &opt, n_max))
}

/// [`evalue`] plus `ev(H̄)`, from a second optimization over the closure of
/// the complement. An empty complement has e-value 0.
pub fn evalue_with_complement(
    model: &StatisticalModel,
    h: &Hypothesis,
    sample: &SurpriseSample,
    n_max: usize,
    opt_cfg: &OptimizerConfig,
) -> Result<EvidenceReport> {
    let ladder = estimate_truth_ladder(sample, n_max)?;
    let opt = maximize_surprise(model, h, Some(sample), opt_cfg)?;
    let mut report = assemble(model, h, sample, &ladder, &opt, n_max);
    report.ev_complement = Some(if h.is_whole() {
        0.0
    } else {
        match maximize_surprise(model, &h.complement(), Some(sample), opt_cfg) {
            Ok(o) => ladder.eval(o.log_s_star),
            Err(FbstError::InfeasibleHypothesis(_)) => 0.0,
            Err(e) => return Err(e),
        }
    });
    Ok(report)
}

/// Builds a report from already computed pieces.
pub fn assemble(
    model: &StatisticalModel,
    h: &Hypothesis,
    sample: &SurpriseSample,
    ladder: &TruthLadder,
    opt: &Optimum,
    n_max: usize,
) -> EvidenceReport {
    let mut report = EvidenceReport::from_ladder(ladder, opt.log_s_star, model.dim(), h.hdim());
    report.theta_star = opt.theta_star.clone();
    report.parameter_names = model.space().names().to_vec();
    report.diagnostics = Diagnostics {
        draws: sample.len(),
        chains: sample.chains(),
        ess: sample.ess(),
        acceptance: sample.acceptance().to_vec(),
        ladder_points: ladder.len(),
        condensation_bound: 1.0 / n_max.max(2) as f64,
        stationary: sample.stationarity_flags().iter().all(|f| *f),
        optimizer: Some(opt.into()),
    };
    report.provenance.seed = sample.config().map(|c| c.seed);
    standardized_evalue(report)
}
