//! Parametric Bayesian models and hypothesis constraint systems.
//!
//! Every density is handled as a log-kernel defined up to an additive
//! constant. The surprise function is the log-kernel minus the log-reference
//! density, so it inherits the same single model-wide constant.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::expr::Expr;
use crate::special::erfc;

/// Default feasibility tolerance for equality constraints in membership probes.
pub const DEFAULT_EQ_TOLERANCE: f64 = 1e-9;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterSpace {
    pub fn new(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(FbstError::InvalidArgument(
                "parameter space needs at least one coordinate".into(),
            ));
        }
        if lower.len() != names.len() || upper.len() != names.len() {
            return Err(FbstError::InvalidArgument(
                "bounds and names must have equal length".into(),
            ));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(FbstError::InvalidArgument(format!(
                    "coordinate `{}` has empty range [{lo}, {hi}]",
                    names[i]
                )));
            }
        }
        Ok(Self {
            names,
            lower,
            upper,
        })
    }

    pub fn unbounded(names: Vec<String>) -> Result<Self> {
        let t = names.len();
        Self::new(names, vec![f64::NEG_INFINITY; t], vec![f64::INFINITY; t])
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| x >= lo && x <= hi)
    }

    /// A finite interior reference point.
    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => 0.0,
            })
            .collect()
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (x, (lo, hi)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

/// Scale used for the regression noise parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaScale {
    #[default]
    LogSigma,
    Sigma,
}

/// Least-squares summary of a polynomial regression and its posterior under
/// the prior `p0(β, σ) = 1/σ`.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub order: usize,
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub design: DMatrix<f64>,
    pub xtx: DMatrix<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub beta_hat: DVector<f64>,
    pub fitted: DVector<f64>,
    /// Residual sum of squares `(y - ŷ)'(y - ŷ)`.
    pub ssr: f64,
    pub sigma_scale: SigmaScale,
}

impl RegressionFit {
    pub fn fit(x: &[f64], y: &[f64], order: usize, sigma_scale: SigmaScale) -> Result<Self> {
        let n = y.len();
        if x.len() != n {
            return Err(FbstError::InvalidArgument(
                "x and y must have equal length".into(),
            ));
        }
        if n <= order + 2 {
            return Err(FbstError::InvalidArgument(format!(
                "order {order} needs more than {} observations, got {n}",
                order + 2
            )));
        }
        let p = order + 1;
        let design = DMatrix::from_fn(n, p, |i, j| x[i].powi(j as i32));
        let yv = DVector::from_column_slice(y);
        let xtx = design.transpose() * &design;
        let chol = xtx.clone().cholesky().ok_or(FbstError::SingularDesign)?;
        let diag = chol.l_dirty().diagonal();
        let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
        if !(dmin > 0.0) || (dmin / dmax).powi(2) < 1e-15 {
            return Err(FbstError::SingularDesign);
        }
        let xty = design.transpose() * &yv;
        let mut beta_hat = chol.solve(&xty);
        // one step of iterative refinement for the ill-conditioned power basis
        let r = &xty - &xtx * &beta_hat;
        beta_hat += chol.solve(&r);
        let xtx_inv = chol.inverse();
        let fitted = &design * &beta_hat;
        let ssr = (&yv - &fitted).norm_squared();
        if !beta_hat.iter().all(|b| b.is_finite()) {
            return Err(FbstError::SingularDesign);
        }
        Ok(Self {
            order,
            n,
            x: x.to_vec(),
            y: y.to_vec(),
            design,
            xtx,
            xtx_inv,
            beta_hat,
            fitted,
            ssr,
            sigma_scale,
        })
    }

    /// Number of regression coefficients, `k + 1`.
    pub fn n_coefficients(&self) -> usize {
        self.order + 1
    }

    /// Dimension of the parameter space, `t = k + 2`.
    pub fn dim(&self) -> usize {
        self.order + 2
    }

    /// `s² = SSR / (n - k)`.
    pub fn s2(&self) -> f64 {
        self.ssr / (self.n - self.order) as f64
    }

    /// `(β - β̂)' X'X (β - β̂)`.
    pub fn quad_form(&self, beta: &[f64]) -> f64 {
        let p = self.n_coefficients();
        let mut acc = 0.0;
        for i in 0..p {
            let di = beta[i] - self.beta_hat[i];
            let mut row = 0.0;
            for j in 0..p {
                row += self.xtx[(i, j)] * (beta[j] - self.beta_hat[j]);
            }
            acc += di * row;
        }
        acc
    }

    /// Log posterior kernel in the natural (β, σ) coordinates:
    /// `-(n+1) ln σ - ((n-k) s² + (β-β̂)'X'X(β-β̂)) / (2σ²)`.
    pub fn log_posterior_natural(&self, beta: &[f64], sigma: f64) -> f64 {
        if sigma <= 0.0 || !sigma.is_finite() {
            return f64::NEG_INFINITY;
        }
        -((self.n + 1) as f64) * sigma.ln()
            - (self.ssr + self.quad_form(beta)) / (2.0 * sigma * sigma)
    }

    /// `σ` stored in coordinate `k + 1`, back-transformed.
    pub fn sigma_of(&self, theta: &[f64]) -> f64 {
        let raw = theta[self.order + 1];
        match self.sigma_scale {
            SigmaScale::LogSigma => raw.exp(),
            SigmaScale::Sigma => raw,
        }
    }

    pub fn sigma_coordinate(&self, sigma: f64) -> f64 {
        match self.sigma_scale {
            SigmaScale::LogSigma => sigma.ln(),
            SigmaScale::Sigma => sigma,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ModelFamily {
    Generic,
    /// Posterior `N(mean, variance)`; with `exp_scale` the coordinate is
    /// `φ = exp(θ)` with a Jacobian-adjusted reference.
    GaussianMean {
        mean: f64,
        variance: f64,
        exp_scale: bool,
    },
    PolynomialRegression(Arc<RegressionFit>),
}

impl ModelFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelFamily::Generic => "generic",
            ModelFamily::GaussianMean { .. } => "gaussian-mean",
            ModelFamily::PolynomialRegression(_) => "polynomial-regression",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n: usize,
    pub s: usize,
}

/// A parameter space with a log-posterior kernel and a log-reference density.
#[derive(Clone)]
pub struct StatisticalModel {
    space: ParameterSpace,
    log_kernel: ScalarFn,
    log_reference: ScalarFn,
    initial: Vec<f64>,
    sample_meta: Option<SampleMeta>,
    family: ModelFamily,
}

impl fmt::Debug for StatisticalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StatisticalModel")
            .field("space", &self.space)
            .field("family", &self.family.tag())
            .field("initial", &self.initial)
            .field("sample_meta", &self.sample_meta)
            .finish_non_exhaustive()
    }
}

impl StatisticalModel {
    /// Generic model with the given log-kernel and log-reference.
    pub fn new(space: ParameterSpace, log_kernel: ScalarFn, log_reference: ScalarFn) -> Self {
        let initial = space.center();
        Self {
            space,
            log_kernel,
            log_reference,
            initial,
            sample_meta: None,
            family: ModelFamily::Generic,
        }
    }

    /// Generic model with a flat reference density.
    pub fn with_flat_reference(space: ParameterSpace, log_kernel: ScalarFn) -> Self {
        Self::new(space, log_kernel, Arc::new(|_: &[f64]| 0.0))
    }

    pub fn with_initial_point(mut self, initial: Vec<f64>) -> Result<Self> {
        if !self.space.contains(&initial) {
            return Err(FbstError::Domain(format!(
                "initial point {initial:?} outside bounds"
            )));
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn with_sample_meta(mut self, meta: SampleMeta) -> Self {
        self.sample_meta = Some(meta);
        self
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn sample_meta(&self) -> Option<SampleMeta> {
        self.sample_meta
    }

    pub fn regression(&self) -> Option<&RegressionFit> {
        match &self.family {
            ModelFamily::PolynomialRegression(fit) => Some(fit),
            _ => None,
        }
    }

    /// Starting point for samplers and optimizers.
    pub fn initial_point(&self) -> &[f64] {
        &self.initial
    }

    /// Log posterior kernel in the model's own coordinates (the sampling target).
    pub fn log_kernel(&self, theta: &[f64]) -> f64 {
        if !self.space.contains(theta) {
            return f64::NEG_INFINITY;
        }
        let v = (self.log_kernel)(theta);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub fn log_reference(&self, theta: &[f64]) -> f64 {
        (self.log_reference)(theta)
    }

    /// Log surprise without the bounds check; `-inf` outside the support.
    pub fn log_surprise_unchecked(&self, theta: &[f64]) -> f64 {
        let k = self.log_kernel(theta);
        if k == f64::NEG_INFINITY {
            return k;
        }
        k - self.log_reference(theta)
    }

    /// `ln s(θ) = ln p_n(θ) - ln r(θ)`, up to one model-wide constant.
    pub fn log_surprise(&self, theta: &[f64]) -> Result<f64> {
        if !self.space.contains(theta) {
            return Err(FbstError::Domain(format!(
                "{theta:?} not in {:?} x {:?}",
                self.space.lower, self.space.upper
            )));
        }
        Ok(self.log_surprise_unchecked(theta))
    }
}

/// Free-function form of [`StatisticalModel::log_surprise`].
pub fn log_surprise(model: &StatisticalModel, theta: &[f64]) -> Result<f64> {
    model.log_surprise(theta)
}

/// 1-dimensional model with posterior `N(m, v)` and flat reference.
pub fn make_gaussian_mean_model(m: f64, v: f64) -> Result<StatisticalModel> {
    if !(v > 0.0) || !v.is_finite() || !m.is_finite() {
        return Err(FbstError::InvalidArgument(format!(
            "gaussian-mean needs finite m and v > 0, got m = {m}, v = {v}"
        )));
    }
    let space = ParameterSpace::unbounded(vec!["theta".into()])?;
    let kernel: ScalarFn = Arc::new(move |th: &[f64]| -(th[0] - m).powi(2) / (2.0 * v));
    let mut model = StatisticalModel::with_flat_reference(space, kernel);
    model.initial = vec![m];
    model.family = ModelFamily::GaussianMean {
        mean: m,
        variance: v,
        exp_scale: false,
    };
    Ok(model)
}

/// The same posterior as [`make_gaussian_mean_model`] expressed in
/// `φ = exp(θ)`, with the flat reference carried through the Jacobian
/// (`r(φ) ∝ 1/φ`).
pub fn make_gaussian_mean_exp_model(m: f64, v: f64) -> Result<StatisticalModel> {
    if !(v > 0.0) || !v.is_finite() || !m.is_finite() {
        return Err(FbstError::InvalidArgument(format!(
            "gaussian-mean needs finite m and v > 0, got m = {m}, v = {v}"
        )));
    }
    let space = ParameterSpace::new(vec!["phi".into()], vec![0.0], vec![f64::INFINITY])?;
    let kernel: ScalarFn = Arc::new(move |ph: &[f64]| {
        if ph[0] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let l = ph[0].ln();
        -(l - m).powi(2) / (2.0 * v) - l
    });
    let reference: ScalarFn = Arc::new(|ph: &[f64]| -ph[0].ln());
    let mut model = StatisticalModel::new(space, kernel, reference);
    model.initial = vec![m.exp()];
    model.family = ModelFamily::GaussianMean {
        mean: m,
        variance: v,
        exp_scale: true,
    };
    Ok(model)
}

/// Analytic e-value of the point hypothesis `θ = θ_H` under posterior
/// `N(m, v)` with flat reference: `2 (1 - Φ(|θ_H - m| / √v))`.
pub fn gaussian_mean_oracle_ev(m: f64, v: f64, theta_h: f64) -> f64 {
    erfc((theta_h - m).abs() / (2.0 * v).sqrt())
}

/// Polynomial regression of order `k` on the `x`/`y` columns of `data`.
pub fn make_polynomial_regression_model(data: &Dataset, k: usize) -> Result<StatisticalModel> {
    let x = data.column("x")?;
    let y = data.column("y")?;
    polynomial_regression(&x, &y, k, SigmaScale::LogSigma)
}

/// Polynomial regression `y = Σ β_j x^j + N(0, σ²)` under the prior `1/σ`.
///
/// Coordinates are `b0 … bk` followed by `log_sigma` (or `sigma`).
pub fn polynomial_regression(
    x: &[f64],
    y: &[f64],
    k: usize,
    sigma_scale: SigmaScale,
) -> Result<StatisticalModel> {
    let fit = Arc::new(RegressionFit::fit(x, y, k, sigma_scale)?);
    let t = fit.dim();
    let mut names: Vec<String> = (0..=k).map(|j| format!("b{j}")).collect();
    let mut lower = vec![f64::NEG_INFINITY; t];
    match sigma_scale {
        SigmaScale::LogSigma => names.push("log_sigma".into()),
        SigmaScale::Sigma => {
            names.push("sigma".into());
            lower[t - 1] = 0.0;
        }
    }
    let space = ParameterSpace::new(names, lower, vec![f64::INFINITY; t])?;

    let kf = Arc::clone(&fit);
    let (kernel, reference): (ScalarFn, ScalarFn) = match sigma_scale {
        SigmaScale::LogSigma => (
            // density in (β, ln σ) carries the Jacobian σ
            Arc::new(move |th: &[f64]| {
                let ls = th[k + 1];
                kf.log_posterior_natural(&th[..=k], ls.exp()) + ls
            }),
            Arc::new(move |th: &[f64]| th[k + 1]),
        ),
        SigmaScale::Sigma => (
            Arc::new(move |th: &[f64]| kf.log_posterior_natural(&th[..=k], th[k + 1])),
            Arc::new(|_: &[f64]| 0.0),
        ),
    };

    let sigma_hat = (fit.ssr / fit.n as f64).sqrt();
    let mut initial: Vec<f64> = fit.beta_hat.iter().copied().collect();
    initial.push(fit.sigma_coordinate(sigma_hat));

    let mut model = StatisticalModel::new(space, kernel, reference);
    model.initial = initial;
    model.sample_meta = Some(SampleMeta { n: fit.n, s: 2 });
    model.family = ModelFamily::PolynomialRegression(fit);
    Ok(model)
}

/// `g(θ) ≤ 0` or `h(θ) = 0` constraint function.
#[derive(Clone)]
pub struct Constraint {
    label: String,
    f: ScalarFn,
    affine: Option<(Vec<f64>, f64)>,
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Constraint")
            .field("label", &self.label)
            .field("affine", &self.affine)
            .finish()
    }
}

impl Constraint {
    pub fn from_fn(label: impl Into<String>, f: ScalarFn) -> Self {
        Self {
            label: label.into(),
            f,
            affine: None,
        }
    }

    /// `a·θ + b`.
    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        let label = a
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| format!("{c}*x{i}"))
            .chain(std::iter::once(format!("{b}")))
            .collect::<Vec<_>>()
            .join(" + ");
        let coeffs = a.clone();
        let f: ScalarFn = Arc::new(move |th: &[f64]| {
            coeffs.iter().zip(th).map(|(c, x)| c * x).sum::<f64>() + b
        });
        Self {
            label,
            f,
            affine: Some((a, b)),
        }
    }

    /// Parses an expression over the coordinate names of `space`.
    ///
    /// Relations are normalized: `lhs = rhs` becomes `lhs - rhs`, as do
    /// `lhs <= rhs` and `lhs < rhs`; `lhs >= rhs` and `lhs > rhs` become
    /// `rhs - lhs`. A bare expression is taken as is.
    pub fn parse(src: &str, space: &ParameterSpace) -> Result<Self> {
        let names = space.names();
        let expr = if let Some((l, r)) = split_relation(src, &["<=", "<"]) {
            sub(Expr::parse(l, names)?, Expr::parse(r, names)?)
        } else if let Some((l, r)) = split_relation(src, &[">=", ">"]) {
            sub(Expr::parse(r, names)?, Expr::parse(l, names)?)
        } else if let Some((l, r)) = split_relation(src, &["=="]) {
            sub(Expr::parse(l, names)?, Expr::parse(r, names)?)
        } else if let Some((l, r)) = split_relation(src, &["="]) {
            sub(Expr::parse(l, names)?, Expr::parse(r, names)?)
        } else {
            Expr::parse(src, names)?
        };
        let affine = expr.affine_form(space.dim());
        let expr = Arc::new(expr);
        Ok(Self {
            label: src.to_string(),
            f: Arc::new(move |th: &[f64]| expr.eval(th)),
            affine,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        (self.f)(theta)
    }

    pub fn affine_form(&self) -> Option<&(Vec<f64>, f64)> {
        self.affine.as_ref()
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    Expr::Sub(Box::new(a), Box::new(b))
}

fn split_relation<'a>(src: &'a str, ops: &[&str]) -> Option<(&'a str, &'a str)> {
    for op in ops {
        if let Some(i) = src.find(op) {
            // `=` must not be part of `<=`, `>=` or `==`
            if *op == "=" {
                let before = src[..i].chars().last();
                let after = src[i + 1..].chars().next();
                if matches!(before, Some('<' | '>' | '=')) || after == Some('=') {
                    continue;
                }
            }
            if (*op == "<" || *op == ">") && src[i + 1..].starts_with('=') {
                continue;
            }
            return Some((&src[..i], &src[i + op.len()..]));
        }
    }
    None
}

/// The set `{θ : g(θ) ≤ 0 ∧ h(θ) = 0}`, or its complement when `negated`.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    dim: usize,
    inequalities: Vec<Constraint>,
    equalities: Vec<Constraint>,
    negated: bool,
}

impl Hypothesis {
    pub fn new(dim: usize, inequalities: Vec<Constraint>, equalities: Vec<Constraint>) -> Self {
        Self {
            dim,
            inequalities,
            equalities,
            negated: false,
        }
    }

    /// The whole parameter space.
    pub fn whole(dim: usize) -> Self {
        Self::new(dim, Vec::new(), Vec::new())
    }

    /// `θ_i = value`.
    pub fn coordinate_equals(dim: usize, i: usize, value: f64) -> Self {
        let mut a = vec![0.0; dim];
        a[i] = 1.0;
        Self::new(dim, Vec::new(), vec![Constraint::affine(a, -value)])
    }

    pub fn parse(space: &ParameterSpace, inequalities: &[&str], equalities: &[&str]) -> Result<Self> {
        let ineq = inequalities
            .iter()
            .map(|s| Constraint::parse(s, space))
            .collect::<Result<Vec<_>>>()?;
        let eq = equalities
            .iter()
            .map(|s| Constraint::parse(s, space))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(space.dim(), ineq, eq))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> &[Constraint] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[Constraint] {
        &self.equalities
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    /// Positive form with no constraints: the whole space.
    pub fn is_whole(&self) -> bool {
        !self.negated && self.inequalities.is_empty() && self.equalities.is_empty()
    }

    /// Complement of the whole space.
    pub fn is_structurally_empty(&self) -> bool {
        self.negated && self.inequalities.is_empty() && self.equalities.is_empty()
    }

    /// Number of equality constraints `q` of a positive hypothesis.
    pub fn n_equalities(&self) -> usize {
        if self.negated {
            0
        } else {
            self.equalities.len()
        }
    }

    pub fn is_sharp(&self) -> bool {
        self.n_equalities() > 0
    }

    /// `dim(H) = t - q`; complements are full-dimensional.
    pub fn hdim(&self) -> usize {
        self.dim.saturating_sub(self.n_equalities())
    }

    pub fn contains(&self, theta: &[f64], eps_h: f64) -> bool {
        let base = self.inequalities.iter().all(|g| g.eval(theta) <= 0.0)
            && self.equalities.iter().all(|h| h.eval(theta).abs() <= eps_h);
        base != self.negated
    }

    pub fn complement(&self) -> Self {
        Self {
            negated: !self.negated,
            ..self.clone()
        }
    }
}

pub fn hypothesis_contains(h: &Hypothesis, theta: &[f64], eps_h: f64) -> bool {
    h.contains(theta, eps_h)
}

pub fn complement(h: &Hypothesis) -> Hypothesis {
    h.complement()
}

/// `n` observations of `s` named variables, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    rows: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(FbstError::InvalidArgument("dataset has no rows".into()));
        }
        let s = names.len();
        let mut values = Vec::with_capacity(rows.len() * s);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != s {
                return Err(FbstError::InvalidArgument(format!(
                    "row {i} has {} entries, expected {s}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(FbstError::InvalidArgument(format!(
                    "row {i} has non-finite entry {v}"
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            names,
            rows: rows.len(),
            values,
        })
    }

    pub fn from_columns(columns: &[(&str, &[f64])]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        let names = columns.iter().map(|c| c.0.to_string()).collect();
        let rows = (0..n)
            .map(|i| columns.iter().map(|c| c.1[i]).collect())
            .collect();
        Self::new(names, rows)
    }

    /// Reads a CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| FbstError::Spec(format!("non-numeric CSV field `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(names, rows)
    }

    pub fn n(&self) -> usize {
        self.rows
    }

    pub fn s(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| FbstError::Spec(format!("dataset has no column `{name}`")))?;
        Ok((0..self.rows).map(|i| self.values[i * self.s() + j]).collect())
    }
}
