//! JSON model, hypothesis and network descriptions.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FbstError, Result};
use crate::expr::Expr;
use crate::model::{
    make_gaussian_mean_exp_model, make_gaussian_mean_model, polynomial_regression, Dataset, Hypothesis,
    ParameterSpace, SigmaScale, StatisticalModel,
};
use crate::modelsel::sakamoto_dataset;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanParameterization {
    #[default]
    Identity,
    /// Coordinate `φ = exp(θ)` with the Jacobian-adjusted reference.
    Exp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDecl {
    pub name: String,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    GaussianMean {
        mean: f64,
        variance: f64,
        #[serde(default)]
        parameterization: MeanParameterization,
    },
    PolynomialRegression {
        order: usize,
        /// CSV with columns `x` and `y`, relative to the model file.
        #[serde(default)]
        data: Option<PathBuf>,
        /// Embedded dataset name; only `sakamoto` is known.
        #[serde(default)]
        builtin: Option<String>,
        #[serde(default)]
        parameterization: SigmaScale,
    },
    Generic {
        parameters: Vec<ParameterDecl>,
        log_kernel: String,
        /// Defaults to a flat reference.
        #[serde(default)]
        log_reference: Option<String>,
        #[serde(default)]
        initial: Option<Vec<f64>>,
    },
}

/// Constraints in the expression language. Relations are normalized to
/// `g ≤ 0` and `h = 0`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    #[serde(default)]
    pub equalities: Vec<String>,
    #[serde(default)]
    pub inequalities: Vec<String>,
}

impl HypothesisSpec {
    pub fn build(&self, space: &ParameterSpace) -> Result<Hypothesis> {
        let ineq: Vec<&str> = self.inequalities.iter().map(String::as_str).collect();
        let eq: Vec<&str> = self.equalities.iter().map(String::as_str).collect();
        Hypothesis::parse(space, &ineq, &eq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    #[serde(default)]
    pub hypothesis: Option<HypothesisSpec>,
}

fn spec_err(e: impl std::fmt::Display) -> FbstError {
    FbstError::Spec(e.to_string())
}

impl ModelSpec {
    pub fn from_json(src: &str) -> Result<Self> {
        serde_json::from_str(src).map_err(spec_err)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| FbstError::Spec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&src)
    }

    /// Builds the model. `data` overrides any dataset named in the model file;
    /// relative data paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path, data: Option<&Dataset>) -> Result<StatisticalModel> {
        match &self.family {
            FamilySpec::GaussianMean {
                mean,
                variance,
                parameterization,
            } => {
                let r = match parameterization {
                    MeanParameterization::Identity => make_gaussian_mean_model(*mean, *variance),
                    MeanParameterization::Exp => make_gaussian_mean_exp_model(*mean, *variance),
                };
                r.map_err(|e| match e {
                    FbstError::InvalidArgument(m) => FbstError::Spec(m),
                    other => other,
                })
            }
            FamilySpec::PolynomialRegression {
                order,
                data: path,
                builtin,
                parameterization,
            } => {
                let loaded;
                let ds = match (data, path, builtin.as_deref()) {
                    (Some(d), _, _) => d,
                    (None, Some(p), _) => {
                        let full = base_dir.join(p);
                        let f = File::open(&full)
                            .map_err(|e| FbstError::Spec(format!("cannot open {}: {e}", full.display())))?;
                        loaded = Dataset::from_csv(f)?;
                        &loaded
                    }
                    (None, None, Some("sakamoto")) => {
                        loaded = sakamoto_dataset();
                        &loaded
                    }
                    (None, None, Some(other)) => {
                        return Err(FbstError::Spec(format!("unknown builtin dataset `{other}`")))
                    }
                    (None, None, None) => {
                        return Err(FbstError::Spec(
                            "polynomial-regression needs `data`, `builtin` or a dataset argument".into(),
                        ))
                    }
                };
                let x = ds.column("x")?;
                let y = ds.column("y")?;
                polynomial_regression(&x, &y, *order, *parameterization).map_err(|e| match e {
                    FbstError::InvalidArgument(m) => FbstError::Spec(m),
                    other => other,
                })
            }
            FamilySpec::Generic {
                parameters,
                log_kernel,
                log_reference,
                initial,
            } => {
                let names: Vec<String> = parameters.iter().map(|p| p.name.clone()).collect();
                let lower = parameters.iter().map(|p| p.lower.unwrap_or(f64::NEG_INFINITY)).collect();
                let upper = parameters.iter().map(|p| p.upper.unwrap_or(f64::INFINITY)).collect();
                let space = ParameterSpace::new(names.clone(), lower, upper).map_err(|e| match e {
                    FbstError::InvalidArgument(m) => FbstError::Spec(m),
                    other => other,
                })?;
                let kernel = Expr::parse(log_kernel, &names)?;
                let reference = match log_reference {
                    Some(src) => Some(Expr::parse(src, &names)?),
                    None => None,
                };
                let model = match reference {
                    Some(r) => StatisticalModel::new(
                        space,
                        Arc::new(move |t: &[f64]| kernel.eval(t)),
                        Arc::new(move |t: &[f64]| r.eval(t)),
                    ),
                    None => StatisticalModel::with_flat_reference(space, Arc::new(move |t: &[f64]| kernel.eval(t))),
                };
                match initial {
                    Some(p) => model.with_initial_point(p.clone()).map_err(|e| match e {
                        FbstError::InvalidArgument(m) | FbstError::Domain(m) => FbstError::Spec(m),
                        other => other,
                    }),
                    None => Ok(model),
                }
            }
        }
    }
}

/// A serial slot: a path to a model spec file or an inline spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(Box<ModelSpec>),
}

impl ModelRef {
    pub fn resolve(&self, base_dir: &Path) -> Result<(ModelSpec, PathBuf)> {
        match self {
            ModelRef::Path(p) => {
                let full = base_dir.join(p);
                let dir = full.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok((ModelSpec::from_path(&full)?, dir))
            }
            ModelRef::Inline(s) => Ok(((**s).clone(), base_dir.to_path_buf())),
        }
    }
}

/// Independent serial models and disjunctive alternatives; a `null` slot
/// leaves that component unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub serial: Vec<ModelRef>,
    pub disjuncts: Vec<Vec<Option<HypothesisSpec>>>,
}

impl NetworkSpec {
    pub fn from_json(src: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(src).map_err(spec_err)?;
        if spec.serial.is_empty() || spec.disjuncts.is_empty() {
            return Err(FbstError::Spec("network needs at least one model and one disjunct".into()));
        }
        if let Some(i) = spec.disjuncts.iter().position(|d| d.len() != spec.serial.len()) {
            return Err(FbstError::Spec(format!(
                "disjunct {i} has {} slots for {} serial models",
                spec.disjuncts[i].len(),
                spec.serial.len()
            )));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_spec() {
        let s = ModelSpec::from_json(
            r#"{"family": "gaussian-mean", "mean": 1, "variance": 1, "hypothesis": {"equalities": ["theta = 0"]}}"#,
        )
        .unwrap();
        let m = s.build(Path::new("."), None).unwrap();
        assert_eq!(m.dim(), 1);
        let h = s.hypothesis.unwrap().build(m.space()).unwrap();
        assert!(h.is_sharp());
    }

    #[test]
    fn regression_builtin() {
        let s = ModelSpec::from_json(r#"{"family": "polynomial-regression", "order": 2, "builtin": "sakamoto"}"#)
            .unwrap();
        let m = s.build(Path::new("."), None).unwrap();
        assert_eq!(m.space().names(), &["b0", "b1", "b2", "log_sigma"]);
    }

    #[test]
    fn generic_spec() {
        let s = ModelSpec::from_json(
            r#"{"family": "generic",
                "parameters": [{"name": "a"}, {"name": "b", "lower": 0}],
                "log_kernel": "-(a^2)/2 - b",
                "initial": [0, 1]}"#,
        )
        .unwrap();
        let m = s.build(Path::new("."), None).unwrap();
        assert_eq!(m.log_kernel(&[0.0, 1.0]), -1.0);
        assert_eq!(m.log_kernel(&[0.0, -1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn malformed_specs() {
        assert!(matches!(ModelSpec::from_json("{"), Err(FbstError::Spec(_))));
        assert!(matches!(
            ModelSpec::from_json(r#"{"family": "nope"}"#),
            Err(FbstError::Spec(_))
        ));
        let s = ModelSpec::from_json(r#"{"family": "gaussian-mean", "mean": 0, "variance": -1}"#).unwrap();
        assert!(matches!(s.build(Path::new("."), None), Err(FbstError::Spec(_))));
        assert!(NetworkSpec::from_json(r#"{"serial": [], "disjuncts": [[]]}"#).is_err());
    }

    #[test]
    fn network_spec() {
        let n = NetworkSpec::from_json(
            r#"{"serial": ["a.json", {"family": "gaussian-mean", "mean": 0, "variance": 1}],
                "disjuncts": [[{"equalities": ["theta = 0"]}, null]]}"#,
        )
        .unwrap();
        assert!(matches!(n.serial[0], ModelRef::Path(_)));
        assert!(matches!(n.serial[1], ModelRef::Inline(_)));
        assert!(n.disjuncts[0][1].is_none());
    }
}
