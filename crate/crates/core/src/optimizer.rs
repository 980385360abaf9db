//! Constrained maximization of the surprise function over a hypothesis set.
//!
//! Built-in families with linear equality hypotheses have closed-form
//! solutions. Everything else goes through multistart local ascent on an
//! augmented Lagrangian (damped Newton on finite-difference derivatives),
//! seeded from posterior draws projected onto the equality constraints, with
//! a simulated-annealing pass when the restarts disagree.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::model::{Constraint, Hypothesis, ModelFamily, RegressionFit, StatisticalModel};
use crate::numeric::{gradient, hessian, mix_seed, regularized_solve};
use crate::sampler::SurpriseSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of multistart seeds taken from the sample.
    pub restarts: usize,
    /// Outer iterations during which the penalty weight grows.
    pub penalty_growth_iterations: usize,
    /// Hard cap on augmented-Lagrangian outer iterations.
    pub max_outer_iterations: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    /// Constraint residual accepted as feasible.
    pub feasibility_tol: f64,
    /// Relative tolerance on the objective for inner convergence.
    pub rel_tol: f64,
    pub anneal_steps: usize,
    pub anneal_t0: f64,
    pub anneal_t1: f64,
    /// Spread of restart optima that triggers annealing.
    pub multimodal_tol: f64,
    /// Posterior draws examined when picking starting points.
    pub candidate_pool: usize,
    /// Skip closed-form solutions even when available.
    pub generic_only: bool,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            penalty_growth_iterations: 8,
            max_outer_iterations: 40,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            feasibility_tol: 1e-8,
            rel_tol: 1e-10,
            anneal_steps: 50_000,
            anneal_t0: 1.0,
            anneal_t1: 1e-4,
            multimodal_tol: 1e-3,
            candidate_pool: 2048,
            generic_only: false,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Multistart,
    Annealing,
}

/// Supremum of the surprise function over a hypothesis and its tangential point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub log_s_star: f64,
    pub theta_star: Vec<f64>,
    pub method: Method,
    /// `max_j |h_j(θ*)|`.
    pub eq_residual: f64,
    /// `max_i max(g_i(θ*), 0)`.
    pub ineq_residual: f64,
    pub restarts_used: usize,
    /// θ* lies on a finite bound of the parameter space.
    pub boundary: bool,
    /// Restart optima disagreed by more than the multimodality tolerance.
    pub multimodal: bool,
    /// The supremum is a limit approached from inside the set (complements
    /// of sharp hypotheses) rather than an attained maximum.
    pub limit_point: bool,
}

#[derive(Clone, Copy)]
struct Signed<'a> {
    c: &'a Constraint,
    sign: f64,
}

impl Signed<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        self.sign * self.c.eval(x)
    }
}

struct Problem<'a> {
    model: &'a StatisticalModel,
    ineq: Vec<Signed<'a>>,
    eq: Vec<Signed<'a>>,
}

impl Problem<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        self.model.log_surprise_unchecked(x)
    }

    fn residuals(&self, x: &[f64]) -> (f64, f64) {
        let e = self.eq.iter().map(|h| h.eval(x).abs()).fold(0.0, f64::max);
        let g = self.ineq.iter().map(|g| g.eval(x).max(0.0)).fold(0.0, f64::max);
        (e, g)
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let (e, g) = self.residuals(x);
        e.max(g)
    }

    fn penalty_sq(&self, x: &[f64]) -> f64 {
        self.eq.iter().map(|h| h.eval(x).powi(2)).sum::<f64>()
            + self.ineq.iter().map(|g| g.eval(x).max(0.0).powi(2)).sum::<f64>()
    }

    fn is_unconstrained(&self) -> bool {
        self.eq.is_empty() && self.ineq.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Local {
    x: Vec<f64>,
    value: f64,
    violation: f64,
    unbounded: bool,
}

/// Computes `s* = sup_{θ ∈ H} s(θ)` in log space together with a tangential point.
///
/// `sample` supplies multistart seeds for the generic path; without it the
/// model's initial point and the parameter-space center are used.
pub fn maximize_surprise(
    model: &StatisticalModel,
    h: &Hypothesis,
    sample: Option<&SurpriseSample>,
    cfg: &OptimizerConfig,
) -> Result<Optimum> {
    if h.dim() != model.dim() {
        return Err(FbstError::InvalidArgument(format!(
            "hypothesis of dimension {} for a model of dimension {}",
            h.dim(),
            model.dim()
        )));
    }
    if h.is_structurally_empty() {
        return Err(FbstError::InfeasibleHypothesis(
            "the complement of the whole parameter space is empty".into(),
        ));
    }
    if h.is_negated() {
        return maximize_complement(model, h, sample, cfg);
    }
    if !cfg.generic_only {
        if let Some(opt) = closed_form(model, h)? {
            return Ok(opt);
        }
    }
    let problem = Problem {
        model,
        ineq: h.inequalities().iter().map(|c| Signed { c, sign: 1.0 }).collect(),
        eq: h.equalities().iter().map(|c| Signed { c, sign: 1.0 }).collect(),
    };
    solve_generic(&problem, sample, cfg)
}

// not(g_1 ≤ 0 ∧ … ∧ h_1 = 0 ∧ …) is the union of {g_i > 0} and {h_j ≠ 0};
// the supremum over the union is the max of the suprema over the closures.
fn maximize_complement(
    model: &StatisticalModel,
    h: &Hypothesis,
    sample: Option<&SurpriseSample>,
    cfg: &OptimizerConfig,
) -> Result<Optimum> {
    let mut candidates = Vec::new();
    for g in h.inequalities() {
        let problem = Problem {
            model,
            ineq: vec![Signed { c: g, sign: -1.0 }],
            eq: Vec::new(),
        };
        let mut opt = solve_generic(&problem, sample, cfg)?;
        opt.limit_point = g.eval(&opt.theta_star) <= 0.0;
        candidates.push(opt);
    }
    if !h.equalities().is_empty() {
        let whole = Hypothesis::whole(model.dim());
        let mut opt = match (cfg.generic_only, closed_form(model, &whole)?) {
            (false, Some(o)) => o,
            _ => solve_generic(
                &Problem {
                    model,
                    ineq: Vec::new(),
                    eq: Vec::new(),
                },
                sample,
                cfg,
            )?,
        };
        let eps = crate::model::DEFAULT_EQ_TOLERANCE;
        opt.limit_point = h.equalities().iter().all(|c| c.eval(&opt.theta_star).abs() <= eps);
        candidates.push(opt);
    }
    candidates
        .into_iter()
        .reduce(|best, o| if o.log_s_star > best.log_s_star { o } else { best })
        .ok_or_else(|| FbstError::InfeasibleHypothesis("empty complement".into()))
}

fn finish(model: &StatisticalModel, h: &Hypothesis, mut theta: Vec<f64>, method: Method) -> Result<Optimum> {
    // adding +0.0 turns -0.0 into 0.0
    theta.iter_mut().for_each(|v| *v += 0.0);
    let log_s_star = model.log_surprise(&theta)?;
    let eq_residual = h.equalities().iter().map(|c| c.eval(&theta).abs()).fold(0.0, f64::max);
    let ineq_residual = h
        .inequalities()
        .iter()
        .map(|c| c.eval(&theta).max(0.0))
        .fold(0.0, f64::max);
    Ok(Optimum {
        log_s_star,
        boundary: on_boundary(model, &theta),
        theta_star: theta,
        method,
        eq_residual,
        ineq_residual,
        restarts_used: 0,
        multimodal: false,
        limit_point: false,
    })
}

fn on_boundary(model: &StatisticalModel, theta: &[f64]) -> bool {
    let s = model.space();
    theta.iter().zip(s.lower().iter().zip(s.upper())).any(|(x, (lo, hi))| {
        let tol = 1e-8 * x.abs().max(1.0);
        (lo.is_finite() && (x - lo).abs() <= tol) || (hi.is_finite() && (hi - x).abs() <= tol)
    })
}

/// Linear equalities on the coefficients of a polynomial regression, as
/// `(C, b)` with `Cβ + b = 0`.
fn regression_linear_system(fit: &RegressionFit, h: &Hypothesis) -> Option<(DMatrix<f64>, DVector<f64>)> {
    if h.is_negated() || !h.inequalities().is_empty() {
        return None;
    }
    let p = fit.n_coefficients();
    let q = h.equalities().len();
    let mut c = DMatrix::zeros(q, p);
    let mut b = DVector::zeros(q);
    for (i, eq) in h.equalities().iter().enumerate() {
        let (a, off) = eq.affine_form()?;
        if a[p] != 0.0 {
            return None;
        }
        for j in 0..p {
            c[(i, j)] = a[j];
        }
        b[i] = *off;
    }
    Some((c, b))
}

fn closed_form(model: &StatisticalModel, h: &Hypothesis) -> Result<Option<Optimum>> {
    match model.family() {
        ModelFamily::PolynomialRegression(fit) => {
            if regression_linear_system(fit, h).is_some() {
                closed_form_constrained_mode(model, h).map(Some)
            } else {
                Ok(None)
            }
        }
        ModelFamily::GaussianMean {
            mean, exp_scale, ..
        } => {
            if !h.inequalities().is_empty() || h.equalities().len() > 1 {
                return Ok(None);
            }
            let to_coord = |t: f64| if *exp_scale { t.exp() } else { t };
            let theta = match h.equalities().first() {
                None => to_coord(*mean),
                Some(eq) => match eq.affine_form() {
                    Some((a, b)) if a[0] != 0.0 => -b / a[0],
                    Some((_, b)) if *b == 0.0 => to_coord(*mean),
                    Some(_) => {
                        return Err(FbstError::InfeasibleHypothesis(format!(
                            "constraint `{}` has no solution",
                            eq.label()
                        )))
                    }
                    None => return Ok(None),
                },
            };
            if !model.space().contains(&[theta]) {
                return Err(FbstError::InfeasibleHypothesis(format!(
                    "constraint solution {theta} is outside the parameter space"
                )));
            }
            let mut opt = finish(model, h, vec![theta], Method::ClosedForm)?;
            opt.limit_point = false;
            Ok(Some(opt))
        }
        ModelFamily::Generic => Ok(None),
    }
}

/// Closed-form maximizer of the regression surprise under linear equality
/// constraints `Cβ + b = 0` on the coefficients:
/// `β̃ = β̂ − (X'X)⁻¹C'(C(X'X)⁻¹C')⁻¹(Cβ̂ + b)` and
/// `σ̃² = ((n−k)s² + (β̃−β̂)'X'X(β̃−β̂)) / (n+1)`.
pub fn closed_form_constrained_mode(model: &StatisticalModel, h: &Hypothesis) -> Result<Optimum> {
    let fit = model.regression().ok_or_else(|| {
        FbstError::InvalidArgument("closed-form mode needs a polynomial-regression model".into())
    })?;
    let (c, b) = regression_linear_system(fit, h).ok_or_else(|| {
        FbstError::InvalidArgument(
            "closed-form mode needs linear equality constraints on the coefficients only".into(),
        )
    })?;
    let beta_tilde = if c.nrows() == 0 {
        fit.beta_hat.clone()
    } else {
        let ai_ct = &fit.xtx_inv * c.transpose();
        let m = &c * &ai_ct;
        let chol = m.cholesky().ok_or_else(|| {
            FbstError::InfeasibleHypothesis("constraints on the coefficients are redundant".into())
        })?;
        let r = &c * &fit.beta_hat + &b;
        &fit.beta_hat - ai_ct * chol.solve(&r)
    };
    let beta: Vec<f64> = beta_tilde.iter().copied().collect();
    let sigma2 = (fit.ssr + fit.quad_form(&beta)) / (fit.n + 1) as f64;
    let mut theta = beta;
    theta.push(fit.sigma_coordinate(sigma2.sqrt()));
    finish(model, h, theta, Method::ClosedForm)
}

fn solve_generic(problem: &Problem<'_>, sample: Option<&SurpriseSample>, cfg: &OptimizerConfig) -> Result<Optimum> {
    let starts = candidate_starts(problem, sample, cfg);
    if starts.is_empty() {
        return Err(FbstError::InfeasibleHypothesis(
            "no starting point with finite surprise".into(),
        ));
    }
    let locals: Vec<Local> = starts.par_iter().map(|s| solve_local(problem, s, cfg)).collect();
    if let Some(u) = locals.iter().find(|l| l.unbounded) {
        return Err(FbstError::Unbounded(format!(
            "ascent diverged from the feasible set near {:?}",
            u.x
        )));
    }
    let feasible: Vec<&Local> = locals
        .iter()
        .filter(|l| l.value.is_finite() && l.violation <= cfg.feasibility_tol)
        .collect();
    let mut best = feasible
        .iter()
        .copied()
        .reduce(|b, l| if l.value > b.value { l } else { b })
        .cloned()
        .ok_or_else(|| {
            let v = locals.iter().map(|l| l.violation).fold(f64::INFINITY, f64::min);
            FbstError::InfeasibleHypothesis(format!(
                "no feasible point found (best constraint residual {v:e})"
            ))
        })?;
    let worst = feasible.iter().map(|l| l.value).fold(f64::INFINITY, f64::min);
    let multimodal = best.value - worst > cfg.multimodal_tol;
    let mut method = Method::Multistart;
    if multimodal {
        let scale = coordinate_scales(problem, sample, &best.x);
        let annealed = anneal(problem, &best.x, &scale, cfg);
        let polished = solve_local(problem, &annealed, cfg);
        if polished.violation <= cfg.feasibility_tol && polished.value > best.value {
            best = polished;
            method = Method::Annealing;
        }
    }
    let model = problem.model;
    let (eq_residual, ineq_residual) = problem.residuals(&best.x);
    Ok(Optimum {
        log_s_star: model.log_surprise(&best.x)?,
        boundary: on_boundary(model, &best.x),
        theta_star: best.x,
        method,
        eq_residual,
        ineq_residual,
        restarts_used: starts.len(),
        multimodal,
        limit_point: false,
    })
}

fn coordinate_scales(problem: &Problem<'_>, sample: Option<&SurpriseSample>, at: &[f64]) -> Vec<f64> {
    match sample {
        Some(s) if s.dim() == at.len() && s.len() > 1 => {
            s.variance().iter().map(|v| v.sqrt().max(1e-8)).collect()
        }
        _ => {
            let _ = problem;
            at.iter().map(|v| 0.1 * v.abs().max(1.0)).collect()
        }
    }
}

/// One Gauss–Newton step toward `h(θ) = 0`, clamped into the bounds.
fn project_once(problem: &Problem<'_>, x: &[f64], active: &[Signed<'_>]) -> Vec<f64> {
    if active.is_empty() {
        return x.to_vec();
    }
    let d = x.len();
    let q = active.len();
    let mut jac = DMatrix::zeros(q, d);
    let mut r = DVector::zeros(q);
    for (i, c) in active.iter().enumerate() {
        let g = gradient(&|y: &[f64]| c.eval(y), x);
        for j in 0..d {
            jac[(i, j)] = g[j];
        }
        r[i] = c.eval(x);
    }
    let jjt = &jac * jac.transpose();
    let Some(step) = regularized_solve(&jjt, r.as_slice()) else {
        return x.to_vec();
    };
    let delta = jac.transpose() * step;
    let mut y: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a - b).collect();
    problem.model.space().clamp(&mut y);
    y
}

fn candidate_starts(problem: &Problem<'_>, sample: Option<&SurpriseSample>, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
    let model = problem.model;
    let d = model.dim();
    let mut pool: Vec<Vec<f64>> = vec![model.initial_point().to_vec(), model.space().center()];
    match sample {
        Some(s) if s.dim() == d && !s.is_empty() => {
            let take = cfg.candidate_pool.max(1).min(s.len());
            let stride = s.len() / take;
            pool.extend((0..take).map(|i| s.draw(i * stride).to_vec()));
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let base = model.initial_point().to_vec();
            for _ in 0..cfg.restarts {
                let mut p = base.clone();
                for v in p.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += z * v.abs().max(1.0);
                }
                model.space().clamp(&mut p);
                pool.push(p);
            }
        }
    }
    let mut scored: Vec<(f64, Vec<f64>)> = pool
        .into_iter()
        .map(|p| {
            let y = project_once(problem, &p, &problem.eq);
            (problem.objective(&y), y)
        })
        .filter(|(v, _)| v.is_finite())
        .collect();
    // stable: ties keep pool order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.dedup_by(|a, b| a.1 == b.1);
    scored.into_iter().take(cfg.restarts.max(1)).map(|(_, y)| y).collect()
}

/// Damped Newton ascent from `x0`. Returns the final point and whether the
/// iterates diverged.
fn newton_ascent<F: Fn(&[f64]) -> f64>(phi: &F, x0: &[f64], rel_tol: f64) -> (Vec<f64>, bool) {
    let mut x = x0.to_vec();
    let mut fx = phi(&x);
    if !fx.is_finite() {
        return (x, fx == f64::INFINITY);
    }
    for _ in 0..200 {
        let g = gradient(phi, &x);
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        let hm = hessian(phi, &x);
        let mut p: Vec<f64> = regularized_solve(&(-hm), &g)
            .map(|v| v.iter().copied().collect())
            .unwrap_or_else(|| g.clone());
        let mut slope: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            p = g.clone();
            slope = g.iter().map(|v| v * v).sum();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let fv = phi(&xn);
            if fv == f64::INFINITY {
                return (xn, true);
            }
            if fv.is_finite() && fv >= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fv));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fv)) = accepted else { break };
        let gain = fv - fx;
        x = xn;
        fx = fv;
        if x.iter().any(|v| v.abs() > 1e12) {
            return (x, true);
        }
        if gain <= rel_tol * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, false)
}

fn solve_local(problem: &Problem<'_>, start: &[f64], cfg: &OptimizerConfig) -> Local {
    let f = |x: &[f64]| problem.objective(x);
    if problem.is_unconstrained() {
        let (x, unbounded) = newton_ascent(&f, start, cfg.rel_tol);
        let value = f(&x);
        return Local {
            unbounded: unbounded || value == f64::INFINITY,
            violation: 0.0,
            value,
            x,
        };
    }

    let mut lambda = vec![0.0; problem.eq.len()];
    let mut nu = vec![0.0; problem.ineq.len()];
    let mut rho = cfg.initial_penalty;
    let mut x = start.to_vec();
    let mut prev_violation = f64::INFINITY;
    let mut prev_value = f64::NAN;
    for outer in 0..cfg.max_outer_iterations {
        let lag = |y: &[f64]| {
            let fy = f(y);
            if !fy.is_finite() {
                return fy;
            }
            let mut v = fy;
            for (h, l) in problem.eq.iter().zip(&lambda) {
                let hv = h.eval(y);
                v -= l * hv + 0.5 * rho * hv * hv;
            }
            for (g, n) in problem.ineq.iter().zip(&nu) {
                let t = (n + rho * g.eval(y)).max(0.0);
                v -= (t * t - n * n) / (2.0 * rho);
            }
            v
        };
        let (xn, unbounded) = newton_ascent(&lag, &x, cfg.rel_tol);
        x = xn;
        if unbounded {
            return Local {
                value: f(&x),
                violation: problem.violation(&x),
                unbounded: true,
                x,
            };
        }
        let violation = problem.violation(&x);
        let value = f(&x);
        let settled = (value - prev_value).abs() <= cfg.rel_tol.sqrt() * (1.0 + value.abs());
        if violation <= cfg.feasibility_tol * 1e-2 && settled {
            break;
        }
        prev_value = value;
        for (h, l) in problem.eq.iter().zip(lambda.iter_mut()) {
            *l += rho * h.eval(&x);
        }
        for (g, n) in problem.ineq.iter().zip(nu.iter_mut()) {
            *n = (*n + rho * g.eval(&x)).max(0.0);
        }
        if outer < cfg.penalty_growth_iterations || violation > 0.25 * prev_violation {
            rho = (rho * cfg.penalty_growth).min(1e12);
        }
        prev_violation = violation;
    }

    // polish feasibility: Gauss–Newton on equalities plus violated inequalities
    for _ in 0..20 {
        let active: Vec<Signed<'_>> = problem
            .eq
            .iter()
            .copied()
            .chain(problem.ineq.iter().copied().filter(|g| g.eval(&x) > 0.0))
            .collect();
        if problem.violation(&x) <= 1e-13 || active.is_empty() {
            break;
        }
        let y = project_once(problem, &x, &active);
        if problem.violation(&y) >= problem.violation(&x) {
            break;
        }
        x = y;
    }
    Local {
        value: f(&x),
        violation: problem.violation(&x),
        unbounded: false,
        x,
    }
}

/// Geometric-cooling simulated annealing on the penalized surprise.
fn anneal(problem: &Problem<'_>, start: &[f64], scale: &[f64], cfg: &OptimizerConfig) -> Vec<f64> {
    const PENALTY: f64 = 1e6;
    let objective = |x: &[f64]| problem.objective(x) - PENALTY * problem.penalty_sq(x);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xA11EA1));
    let mut x = start.to_vec();
    let mut fx = objective(&x);
    let mut best = (fx, x.clone());
    let steps = cfg.anneal_steps.max(1);
    let ratio = (cfg.anneal_t1 / cfg.anneal_t0).ln();
    let mut cand = x.clone();
    for k in 0..steps {
        let temp = cfg.anneal_t0 * (ratio * k as f64 / steps as f64).exp();
        let width = temp.sqrt().max(1e-3);
        for i in 0..x.len() {
            let z: f64 = rng.sample(StandardNormal);
            cand[i] = x[i] + scale[i] * width * z;
        }
        let fc = objective(&cand);
        if !fc.is_finite() {
            continue;
        }
        let u: f64 = rng.random();
        if fc >= fx || u < ((fc - fx) / temp).exp() {
            x.copy_from_slice(&cand);
            fx = fc;
            if fx > best.0 {
                best = (fx, x.clone());
            }
        }
    }
    best.1
}
