//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use ergodic_core::model::fixtures::logistic_geo;
use ergodic_core::model::{DiffusionModel, EconomicParams};
use ergodic_core::simulate::PathConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, Expr, ParseError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("in `{field}`: {source}")]
    Expr {
        field: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ergodic_core::Error),
}

/// Right endpoint: a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Finite(f64),
    Named(NamedBound),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedBound {
    #[serde(rename = "inf")]
    Inf,
}

impl Bound {
    pub fn value(self) -> f64 {
        match self {
            Bound::Finite(v) => v,
            Bound::Named(NamedBound::Inf) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub a: f64,
    pub b: Bound,
    pub x0: f64,
    #[serde(default)]
    pub b_cut: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Builtin {
    pub builtin: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expressions {
    pub mu_expr: String,
    pub sigma_expr: String,
    pub c_expr: String,
}

/// Either a named reference model or three expressions in `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Builtin(Builtin),
    Expressions(Expressions),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Economics {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_grid: usize,
    pub tol: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { n_grid: 2000, tol: 1e-9, dt: 1e-3, horizon: 200.0, n_paths: 1000, seed: 42 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelSpec,
    pub domain: Domain,
    pub economics: Economics,
    #[serde(default)]
    pub numerics: Numerics,
}

fn builtin_param(p: &BTreeMap<String, f64>, name: &str, default: Option<f64>) -> Result<f64, ConfigError> {
    p.get(name)
        .copied()
        .or(default)
        .ok_or_else(|| ConfigError::Invalid(format!("builtin parameter `{name}` is required")))
}

fn parse_field(field: &'static str, src: &str) -> Result<Expr, ConfigError> {
    parse_expr(src).map_err(|source| ConfigError::Expr { field, source })
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.numerics;
        if n.n_grid == 0 || !(n.tol > 0.0) || !(n.dt > 0.0) || !(n.horizon > 0.0) || n.n_paths == 0 {
            return Err(ConfigError::Invalid("all numerics must be positive".into()));
        }
        if n.dt > n.horizon {
            return Err(ConfigError::Invalid("dt must not exceed horizon".into()));
        }
        if let ModelSpec::Builtin(b) = &self.model {
            let known: &[&str] = match b.builtin.as_str() {
                "logistic_geo" => &["r", "kappa", "sigma0"],
                "shifted_logistic_geo" => &["r", "kappa", "shift", "sigma0"],
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown builtin `{other}`; expected logistic_geo or shifted_logistic_geo"
                    )))
                }
            };
            if let Some(k) = b.params.keys().find(|k| !known.contains(&k.as_str())) {
                return Err(ConfigError::Invalid(format!("unknown parameter `{k}` for builtin `{}`", b.builtin)));
            }
        }
        Ok(())
    }

    /// Builds the diffusion described by the configuration.
    pub fn build_model(&self) -> Result<DiffusionModel<f64>, ConfigError> {
        let d = &self.domain;
        let b = d.b.value();
        let model = match &self.model {
            ModelSpec::Builtin(spec) => {
                let p = &spec.params;
                let shift = if spec.builtin == "shifted_logistic_geo" { builtin_param(p, "shift", Some(0.2))? } else { 0.0 };
                if d.a != 0.0 || b.is_finite() {
                    return Err(ConfigError::Invalid("builtin models live on (0, inf)".into()));
                }
                logistic_geo(
                    builtin_param(p, "r", Some(1.0))?,
                    builtin_param(p, "kappa", Some(1.0))?,
                    shift,
                    builtin_param(p, "sigma0", Some(0.5))?,
                    d.x0,
                )?
                .with_name(spec.builtin.clone())
            }
            ModelSpec::Expressions(e) => {
                let mu = parse_field("mu_expr", &e.mu_expr)?;
                let sigma = parse_field("sigma_expr", &e.sigma_expr)?;
                let c = parse_field("c_expr", &e.c_expr)?;
                for (name, ex) in [("mu_expr", &mu), ("sigma_expr", &sigma), ("c_expr", &c)] {
                    ex.eval_checked(d.x0).map_err(|err| ConfigError::Invalid(format!("{name}: {err}")))?;
                }
                DiffusionModel::new(d.a, b, d.x0, move |x| mu.eval(x), move |x| sigma.eval(x), move |x| c.eval(x))?
                    .with_name("expressions")
            }
        };
        Ok(match d.b_cut {
            Some(cut) => model.with_b_cut(cut)?,
            None => model,
        })
    }

    pub fn params(&self) -> Result<EconomicParams<f64>, ConfigError> {
        let e = &self.economics;
        Ok(EconomicParams::new(e.p, e.k, e.gamma)?)
    }

    pub fn path_config(&self, model: &DiffusionModel<f64>, seed: Option<u64>) -> PathConfig {
        let n = &self.numerics;
        PathConfig::new(n.dt, n.horizon, n.n_paths, seed.unwrap_or(n.seed)).for_model(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUILTIN: &str = r#"{
        "model": {"builtin": "logistic_geo", "params": {"r": 1, "kappa": 1, "sigma0": 0.5}},
        "domain": {"a": 0, "b": "inf", "x0": 0.5, "b_cut": 4},
        "economics": {"p": 1, "K": 0.05, "gamma": 0.5}
    }"#;

    #[test]
    fn builtin_config() {
        let c = ModelConfig::from_json(BUILTIN).unwrap();
        let m = c.build_model().unwrap();
        assert_eq!(m.mu(0.5), 0.25);
        assert_eq!(m.b_cut(), 4.0);
        assert_eq!(c.numerics.n_grid, 2000);
    }

    #[test]
    fn expression_config() {
        let text = r#"{
            "model": {"mu_expr": "x*(1-x)", "sigma_expr": "0.5*x", "c_expr": "x/(1+x)"},
            "domain": {"a": 0, "b": "inf", "x0": 0.5},
            "economics": {"p": 1, "K": 0.05, "gamma": 0.5},
            "numerics": {"n_grid": 500, "tol": 1e-8, "dt": 0.01, "horizon": 10, "n_paths": 4, "seed": 1}
        }"#;
        let m = ModelConfig::from_json(text).unwrap().build_model().unwrap();
        assert_eq!(m.sigma(2.0), 1.0);
        assert_eq!(m.c(1.0), 0.5);
    }

    #[test]
    fn rejects_both_model_forms() {
        let text = BUILTIN.replace(r#""params""#, r#""mu_expr": "x", "params""#);
        assert!(ModelConfig::from_json(&text).is_err());
    }

    #[test]
    fn rejects_bad_expression_and_numerics() {
        let text = r#"{
            "model": {"mu_expr": "x*(1-", "sigma_expr": "0.5*x", "c_expr": "x"},
            "domain": {"a": 0, "b": "inf", "x0": 0.5},
            "economics": {"p": 1, "K": 0.05, "gamma": 0.5}
        }"#;
        let c = ModelConfig::from_json(text).unwrap();
        assert!(matches!(c.build_model(), Err(ConfigError::Expr { field: "mu_expr", .. })));
        let bad = BUILTIN.replace(r#""economics""#, r#""numerics": {"dt": -1}, "economics""#);
        assert!(matches!(ModelConfig::from_json(&bad), Err(ConfigError::Invalid(_))));
        assert!(ModelConfig::from_json(&BUILTIN.replace("\"inf\"", "\"infinity\"")).is_err());
    }
}
