//! TOML run configuration.
//!
//! ```toml
//! problem = "binh-korn"
//! seed = 7
//! weights = [1.0, 1.0]
//!
//! [engine]
//! n_initial = 8
//! max_iterations = 58
//!
//! [engine.ga]
//! population_size = 60
//! generations = 30
//!
//! [[parameters]]
//! name = "x"
//! type = "continuous"
//! lo = 0.0
//! hi = 5.0
//!
//! [constraints.c1]
//! mode = "soft"
//! beta = 0.25
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use moboga::engine::{EngineConfig, NextPick};
use moboga::nsga2::GaConfig;
use moboga::problems::BenchmarkProblem;
use moboga::{Candidate, ConstraintMode, ParamSpec, ParamValue, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Objective weights used when picking the recommended point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub engine: EngineSection,
    /// Replaces the built-in search space when non-empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constraints: BTreeMap<String, ConstraintOverride>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickSetting {
    #[default]
    Topsis,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub n_initial: usize,
    pub max_iterations: usize,
    pub delta: f64,
    pub next_pick: PickSetting,
    pub gp_noise: f64,
    pub parallel_evaluation: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub initial_points: Vec<Vec<ParamValue>>,
    pub ga: GaConfig,
}

impl Default for EngineSection {
    fn default() -> Self {
        let d = EngineConfig::default();
        EngineSection {
            n_initial: d.n_initial,
            max_iterations: d.max_iterations,
            delta: d.delta,
            next_pick: PickSetting::Topsis,
            gp_noise: d.gp_noise,
            parallel_evaluation: d.parallel_evaluation,
            initial_points: Vec::new(),
            ga: d.ga,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSetting {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintOverride {
    pub mode: ModeSetting,
    /// Constant penalty factor for soft mode, in `[0, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl RunConfig {
    pub fn for_problem(problem: &str) -> Self {
        RunConfig {
            problem: problem.to_string(),
            seed: None,
            weights: None,
            engine: EngineSection::default(),
            parameters: Vec::new(),
            constraints: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Builds the benchmark with any space and constraint overrides applied.
    pub fn build_problem(&self) -> CliResult<BenchmarkProblem> {
        let space = if self.parameters.is_empty() {
            None
        } else {
            Some(
                SearchSpace::new(self.parameters.clone())
                    .map_err(|e| CliError::Config(format!("parameters: {e}")))?,
            )
        };
        let mut bench =
            BenchmarkProblem::with_space(&self.problem, space).map_err(|e| match e {
                moboga::Error::Config(m) => CliError::Config(format!("problem: {m}")),
                other => CliError::Config(format!("parameters: {other}")),
            })?;
        for (name, o) in &self.constraints {
            let key = format!("constraints.{name}");
            let slot = bench
                .problem
                .constraints
                .iter_mut()
                .find(|c| &c.name == name)
                .ok_or_else(|| {
                    CliError::Config(format!("{key}: problem has no such constraint"))
                })?;
            let mode = match (o.mode, o.beta) {
                (ModeSetting::Hard, None) => ConstraintMode::Hard,
                (ModeSetting::Hard, Some(_)) => {
                    return Err(CliError::Config(format!(
                        "{key}.beta: only valid with mode = \"soft\""
                    )))
                }
                (ModeSetting::Soft, Some(beta)) if (0.0..1.0).contains(&beta) => {
                    ConstraintMode::Soft(Arc::new(move |_: &Candidate| beta))
                }
                (ModeSetting::Soft, Some(beta)) => {
                    return Err(CliError::Config(format!(
                        "{key}.beta: {beta} is outside [0, 1)"
                    )))
                }
                (ModeSetting::Soft, None) => {
                    return Err(CliError::Config(format!(
                        "{key}.beta: required for soft mode"
                    )))
                }
            };
            *slot = slot.with_mode(mode);
        }
        if let Some(w) = &self.weights {
            let k = bench.problem.num_objectives();
            if w.len() != k {
                return Err(CliError::Config(format!(
                    "weights: expected {k} values, got {}",
                    w.len()
                )));
            }
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(CliError::Config(
                    "weights: values must be finite and positive".into(),
                ));
            }
        }
        Ok(bench)
    }

    pub fn engine_config(&self, space: &SearchSpace) -> CliResult<EngineConfig> {
        let e = &self.engine;
        let mut initial_points = Vec::new();
        for (i, values) in e.initial_points.iter().enumerate() {
            let c = Candidate(values.clone());
            space
                .validate(&c)
                .map_err(|err| CliError::Config(format!("engine.initial_points[{i}]: {err}")))?;
            initial_points.push(c);
        }
        let cfg = EngineConfig {
            n_initial: e.n_initial,
            max_iterations: e.max_iterations,
            delta: e.delta,
            ga: e.ga.clone(),
            next_pick: match e.next_pick {
                PickSetting::Topsis => NextPick::Topsis,
                PickSetting::All => NextPick::All,
            },
            seed: self.seed.unwrap_or(0),
            initial_points,
            gp_noise: e.gp_noise,
            parallel_evaluation: e.parallel_evaluation,
        };
        cfg.validate().map_err(|err| match err {
            moboga::Error::Config(m) => CliError::Config(format!("engine: {m}")),
            other => CliError::Config(format!("engine: {other}")),
        })?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("problem = \"constr-ex\"").unwrap();
        assert_eq!(c.engine, EngineSection::default());
        let bench = c.build_problem().unwrap();
        let e = c.engine_config(&bench.problem.space).unwrap();
        assert_eq!((e.n_initial, e.max_iterations), (8, 50));
    }

    #[test]
    fn unknown_key_is_named() {
        let err =
            RunConfig::parse("problem = \"binh-korn\"\n[engine]\nn_inital = 3\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("n_inital"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let text = r#"
problem = "sinusoid-1d"
seed = 3

[[parameters]]
name = "x"
type = "continuous"
lo = 0.0
hi = 1.0

[constraints.band]
mode = "soft"
beta = 0.5
"#;
        let c = RunConfig::parse(text).unwrap();
        let bench = c.build_problem().unwrap();
        assert_eq!(
            bench.problem.space.params()[0].kind,
            moboga::ParamKind::Continuous { lo: 0.0, hi: 1.0 }
        );
        let band = bench
            .problem
            .constraints
            .iter()
            .find(|c| c.name == "band")
            .unwrap();
        assert!(!band.is_hard());
        assert_eq!(
            band.soft_factor(&Candidate::from_reals(&[0.3])).unwrap(),
            0.5
        );
    }

    #[test]
    fn bad_overrides_name_their_key() {
        for (text, key) in [
            (
                "problem = \"binh-korn\"\n[constraints.c9]\nmode = \"hard\"\n",
                "constraints.c9",
            ),
            (
                "problem = \"binh-korn\"\n[constraints.c1]\nmode = \"soft\"\nbeta = 1.5\n",
                "constraints.c1.beta",
            ),
            ("problem = \"binh-korn\"\nweights = [1.0]\n", "weights"),
            ("problem = \"nope\"\n", "problem"),
        ] {
            let err = RunConfig::parse(text).unwrap().build_problem().unwrap_err();
            assert!(err.to_string().contains(key), "{err}");
            assert_eq!(err.exit_code(), 2);
        }
        let c =
            RunConfig::parse("problem = \"binh-korn\"\n[engine]\nmax_iterations = 0\n").unwrap();
        let bench = c.build_problem().unwrap();
        let err = c.engine_config(&bench.problem.space).unwrap_err();
        assert!(err.to_string().contains("max_iterations"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::for_problem("sinusoid-1d");
        c.seed = Some(11);
        c.engine.initial_points = vec![vec![ParamValue::Real(0.1)]];
        let back = RunConfig::parse(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
