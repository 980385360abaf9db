use std::path::{Path, PathBuf};

use clap::Args;
use fbst_core::composition::{conjunctive_evalue, disjunctive_evalue, Component, CompositeStructure};
use fbst_core::config::ModelRef;
use fbst_core::evalue::{evalue_with_complement, EvidenceReport};
use fbst_core::gfbst::{check_logical_properties, gfbst_decide, Decision, GridModel, TestRule, ViolationReport};
use fbst_core::model::{Dataset, Hypothesis};
use fbst_core::modelsel::{plot_data, sakamoto_dataset, select_order, write_plot_csv, write_table_csv, FbstSettings};
use fbst_core::optimizer::{maximize_surprise, OptimizerConfig};
use fbst_core::sampler::{sample_posterior, SamplerConfig};
use fbst_core::truth::estimate_truth_ladder;
use fbst_core::{Criterion, FbstError, HypothesisSpec, ModelSpec, NetworkSpec, Result, SelectionReport, Selector};
use serde::Serialize;

use crate::manifest::{emit, read_input, resolve_seed, write_csv, ManifestBuilder, RunManifest};
use crate::GlobalArgs;

const DEFAULT_PLOT_RESOLUTION: usize = 200;

#[derive(Debug, Args)]
pub struct EvArgs {
    /// Model file (JSON).
    spec: PathBuf,
    /// CSV dataset with `x` and `y` columns; overrides the model file's dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Equality constraint such as `theta = 0`; replaces the model file's hypothesis.
    #[arg(long = "eq")]
    equalities: Vec<String>,
    /// Inequality constraint such as `theta <= 1`; replaces the model file's hypothesis.
    #[arg(long = "ineq")]
    inequalities: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// CSV dataset with `x` and `y` columns.
    #[arg(long, conflicts_with = "builtin")]
    data: Option<PathBuf>,
    /// Embedded dataset; `sakamoto` is used when neither source is given.
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long, default_value_t = 5)]
    kmax: usize,
    /// `fpe`, `sbc`, `gcv`, `sms` or `fbst`.
    #[arg(long, default_value = "sbc")]
    criterion: String,
    /// Write fitted curves for every order as CSV.
    #[arg(long)]
    emit_plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Grid shape `NxM` (or `N` for a square), each side at least 4.
    #[arg(long, default_value = "20x20")]
    grid: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// `gfbst` or `broken-negative-control`.
    #[arg(long, default_value = "gfbst")]
    rule: String,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Network file (JSON).
    network: PathBuf,
}

#[derive(Serialize)]
struct SamplerSettings<'a> {
    draws: usize,
    chains: usize,
    burnin: usize,
    algorithm: &'a str,
    nmax: usize,
}

impl<'a> From<&'a GlobalArgs> for SamplerSettings<'a> {
    fn from(g: &'a GlobalArgs) -> Self {
        Self {
            draws: g.draws,
            chains: g.chains,
            burnin: g.burnin,
            algorithm: &g.algorithm,
            nmax: g.nmax,
        }
    }
}

fn sampler_config(g: &GlobalArgs, seed: u64) -> Result<SamplerConfig> {
    let cfg = SamplerConfig {
        algorithm: g.algorithm.parse()?,
        chains: g.chains,
        burn_in: g.burnin,
        ..SamplerConfig::default()
    };
    Ok(cfg.with_total_draws(g.draws).with_seed(seed))
}

fn check_threshold(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(FbstError::InvalidArgument(format!("--threshold must lie in (0, 1), got {c}")))
    }
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_dataset(path: &Path, manifest: &mut ManifestBuilder) -> Result<Dataset> {
    let bytes = read_input(path)?;
    manifest.input(path, &bytes);
    Dataset::from_csv(bytes.as_slice())
}

fn outputs(g: &GlobalArgs, extra: &[&Option<PathBuf>]) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = g.out.iter().chain(&g.csv).cloned().collect();
    out.extend(extra.iter().filter_map(|p| (*p).clone()));
    out
}

fn sidecar_text(manifest: &RunManifest) -> Result<String> {
    Ok(serde_json::to_string_pretty(manifest)? + "\n")
}

#[derive(Serialize)]
struct EvOutput {
    #[serde(flatten)]
    report: EvidenceReport,
    decision: Option<Decision>,
    /// Set when both `ev(H)` and `ev(H̄)` fall below the threshold.
    decision_error: Option<String>,
    manifest: RunManifest,
}

pub fn ev(g: &GlobalArgs, a: EvArgs) -> Result<u8> {
    check_threshold(g.threshold)?;
    #[derive(Serialize)]
    struct Config<'a> {
        sampler: SamplerSettings<'a>,
        threshold: f64,
        equalities: &'a [String],
        inequalities: &'a [String],
    }
    let mut manifest = ManifestBuilder::new(
        "ev",
        &Config {
            sampler: g.into(),
            threshold: g.threshold,
            equalities: &a.equalities,
            inequalities: &a.inequalities,
        },
    )?;
    let src = read_input(&a.spec)?;
    manifest.input(&a.spec, &src);
    let spec = ModelSpec::from_json(&String::from_utf8_lossy(&src))?;
    let data = a.data.as_deref().map(|p| load_dataset(p, &mut manifest)).transpose()?;
    let model = spec.build(&parent_dir(&a.spec), data.as_ref())?;
    let hspec = if a.equalities.is_empty() && a.inequalities.is_empty() {
        spec.hypothesis.clone().ok_or_else(|| {
            FbstError::Spec("no hypothesis: add a `hypothesis` object to the model file or pass --eq/--ineq".into())
        })?
    } else {
        HypothesisSpec {
            equalities: a.equalities.clone(),
            inequalities: a.inequalities.clone(),
        }
    };
    let h = hspec.build(model.space())?;
    let (seed, generated) = resolve_seed(g.seed);
    manifest.seed(seed, generated);
    let sample = sample_posterior(&model, &sampler_config(g, seed)?)?;
    manifest.lap("sampling");
    let mut report = evalue_with_complement(&model, &h, &sample, g.nmax, &OptimizerConfig::default())?;
    manifest.lap("evaluation");
    report.provenance.config_hash = Some(manifest.config_hash());

    let ev_hbar = report.ev_complement.unwrap_or(1.0);
    let (decision, decision_error) = match gfbst_decide(report.ev, ev_hbar, g.threshold) {
        Ok(d) => (Some(d), None),
        Err(e @ FbstError::InconsistentDecision { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let manifest = manifest.finish(outputs(g, &[]));
    if let Some(path) = &g.csv {
        write_csv(path, &sidecar_text(&manifest)?, |f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["ev", "ev_bar", "sev", "ev_complement", "log_s_star", "decision"])?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                report.ev.to_string(),
                report.ev_bar.to_string(),
                opt(report.sev),
                opt(report.ev_complement),
                report.log_s_star.to_string(),
                decision.map(|d| d.value.to_string()).unwrap_or_default(),
            ])?;
            w.flush()?;
            Ok(())
        })?;
    }
    emit(
        &EvOutput {
            report,
            decision,
            decision_error,
            manifest,
        },
        g.out.as_deref(),
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct SelectOutput {
    #[serde(flatten)]
    report: SelectionReport,
    manifest: RunManifest,
}

pub fn select(g: &GlobalArgs, a: SelectArgs) -> Result<u8> {
    check_threshold(g.threshold)?;
    let fbst_path = a.criterion == "fbst";
    let selector = if fbst_path {
        Selector::Fbst { threshold: g.threshold }
    } else {
        Selector::Criterion {
            criterion: a.criterion.parse::<Criterion>()?,
        }
    };
    #[derive(Serialize)]
    struct Config<'a> {
        builtin: Option<&'a str>,
        kmax: usize,
        selector: &'a Selector,
        sampler: Option<SamplerSettings<'a>>,
    }
    let mut manifest = ManifestBuilder::new(
        "select",
        &Config {
            builtin: a.builtin.as_deref(),
            kmax: a.kmax,
            selector: &selector,
            sampler: fbst_path.then(|| g.into()),
        },
    )?;
    let data = match (&a.data, a.builtin.as_deref()) {
        (Some(p), _) => load_dataset(p, &mut manifest)?,
        (None, None | Some("sakamoto")) => sakamoto_dataset(),
        (None, Some(other)) => return Err(FbstError::Spec(format!("unknown builtin dataset `{other}`"))),
    };
    let (x, y) = (data.column("x")?, data.column("y")?);
    let settings = if fbst_path {
        let (seed, generated) = resolve_seed(g.seed);
        manifest.seed(seed, generated);
        Some(FbstSettings {
            sampler: sampler_config(g, seed)?,
            n_max: g.nmax,
            threshold: g.threshold,
            ..FbstSettings::default()
        })
    } else {
        None
    };
    let report = select_order(&x, &y, a.kmax, selector, settings.as_ref())?;
    manifest.lap("selection");
    let manifest = manifest.finish(outputs(g, &[&a.emit_plot]));
    let side = sidecar_text(&manifest)?;
    if let Some(path) = &g.csv {
        write_csv(path, &side, |f| write_table_csv(&report.rows, f))?;
    }
    if let Some(path) = &a.emit_plot {
        let rows = plot_data(&x, &y, a.kmax, DEFAULT_PLOT_RESOLUTION)?;
        write_csv(path, &side, |f| write_plot_csv(&rows, f))?;
    }
    emit(&SelectOutput { report, manifest }, g.out.as_deref())?;
    Ok(0)
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || FbstError::InvalidArgument(format!("--grid expects NxM with N, M >= 4, got `{s}`"));
    let (nx, ny) = match s.split_once(['x', 'X']) {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if nx < 4 || ny < 4 {
        return Err(bad());
    }
    Ok((nx, ny))
}

#[derive(Serialize)]
struct VerifyOutput {
    passed: bool,
    #[serde(flatten)]
    report: ViolationReport,
    manifest: RunManifest,
}

pub fn verify_logic(g: &GlobalArgs, a: VerifyArgs) -> Result<u8> {
    check_threshold(g.threshold)?;
    let (nx, ny) = parse_grid(&a.grid)?;
    let rule: TestRule = a.rule.parse()?;
    #[derive(Serialize)]
    struct Config {
        grid: [usize; 2],
        trials: usize,
        threshold: f64,
        rule: TestRule,
    }
    let mut manifest = ManifestBuilder::new(
        "verify-logic",
        &Config {
            grid: [nx, ny],
            trials: a.trials,
            threshold: g.threshold,
            rule,
        },
    )?;
    let (seed, generated) = resolve_seed(g.seed);
    manifest.seed(seed, generated);
    let grid = GridModel::random(nx, ny, seed);
    let report = check_logical_properties(&grid, a.trials, g.threshold, seed, rule)?;
    manifest.lap("verification");
    let passed = report.total() == 0 && report.region_mismatches == 0;
    let manifest = manifest.finish(outputs(g, &[]));
    if let Some(path) = &g.csv {
        write_csv(path, &sidecar_text(&manifest)?, |f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["condition", "violations"])?;
            for (name, count) in &report.counts {
                w.write_record([name.as_str(), &count.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    emit(&VerifyOutput { passed, report, manifest }, g.out.as_deref())?;
    Ok(if passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct ComponentOutput {
    name: String,
    log_s_max: f64,
    ladder_points: usize,
    draws: usize,
    ess: Option<f64>,
}

#[derive(Serialize)]
struct DisjunctOutput {
    ev: f64,
    /// Per-slot sup of the log-surprise; `null` leaves that component free.
    log_s_star: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct ComposeOutput {
    ev: f64,
    ev_bar: f64,
    disjuncts: Vec<DisjunctOutput>,
    components: Vec<ComponentOutput>,
    joint_ladder_points: usize,
    manifest: RunManifest,
}

pub fn compose(g: &GlobalArgs, a: ComposeArgs) -> Result<u8> {
    #[derive(Serialize)]
    struct Config<'a> {
        sampler: SamplerSettings<'a>,
    }
    let mut manifest = ManifestBuilder::new("compose", &Config { sampler: g.into() })?;
    let src = read_input(&a.network)?;
    manifest.input(&a.network, &src);
    let network = NetworkSpec::from_json(&String::from_utf8_lossy(&src))?;
    let base = parent_dir(&a.network);
    let (seed, generated) = resolve_seed(g.seed);
    manifest.seed(seed, generated);
    let opt = OptimizerConfig::default();

    let mut models = Vec::with_capacity(network.serial.len());
    let mut components = Vec::with_capacity(network.serial.len());
    let mut summaries = Vec::with_capacity(network.serial.len());
    for (i, slot) in network.serial.iter().enumerate() {
        let (spec, dir) = slot.resolve(&base)?;
        if let ModelRef::Path(p) = slot {
            let full = base.join(p);
            manifest.input(&full, &read_input(&full)?);
        }
        let model = spec.build(&dir, None)?;
        // component 0 shares the seed of a plain `ev` run
        let sample = sample_posterior(&model, &sampler_config(g, seed.wrapping_add(i as u64))?)?;
        let ladder = estimate_truth_ladder(&sample, g.nmax)?;
        let top = maximize_surprise(&model, &Hypothesis::whole(model.dim()), Some(&sample), &opt)?.log_s_star;
        let name = match slot {
            ModelRef::Path(p) => p.display().to_string(),
            ModelRef::Inline(_) => format!("model{i}"),
        };
        summaries.push(ComponentOutput {
            name: name.clone(),
            log_s_max: top,
            ladder_points: ladder.len(),
            draws: sample.len(),
            ess: sample.ess(),
        });
        components.push(Component {
            name,
            ladder,
            log_s_max: Some(top),
        });
        models.push((model, sample));
    }
    manifest.lap("sampling");

    let mut grid = Vec::with_capacity(network.disjuncts.len());
    for row in &network.disjuncts {
        let mut out = Vec::with_capacity(row.len());
        for (slot, (model, sample)) in row.iter().zip(&models) {
            out.push(match slot {
                Some(hspec) => {
                    let h = hspec.build(model.space())?;
                    Some(maximize_surprise(model, &h, Some(sample), &opt)?.log_s_star)
                }
                None => None,
            });
        }
        grid.push(out);
    }
    let structure = CompositeStructure::new(components, grid, g.nmax)?;
    let ev = disjunctive_evalue(&structure)?;
    let disjuncts = (0..structure.q())
        .map(|r| {
            Ok(DisjunctOutput {
                ev: conjunctive_evalue(&structure, r)?,
                log_s_star: structure.grid()[r].clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    manifest.lap("composition");
    let manifest = manifest.finish(outputs(g, &[]));
    if let Some(path) = &g.csv {
        write_csv(path, &sidecar_text(&manifest)?, |f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["disjunct", "ev"])?;
            for (r, d) in disjuncts.iter().enumerate() {
                w.write_record([r.to_string(), d.ev.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
    }
    let out = ComposeOutput {
        ev,
        ev_bar: 1.0 - ev,
        disjuncts,
        components: summaries,
        joint_ladder_points: structure.joint_ladder().len(),
        manifest,
    };
    emit(&out, g.out.as_deref())?;
    Ok(0)
}
