//! Scenario files: JSON with matrices as nested arrays and expressions as
//! strings. Modes are numbered from 1 in files and from 0 in memory.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use switchcert::dynamics::{Drift, DynamicsError, Mode, SwitchedSystem};
use switchcert::expr::{Expression, ParseError};
use switchcert::lyapunov::{LyapunovError, LyapunovFamily, SampleSpec};
use switchcert::switching::{GeneratorMatrix, PmfBoundParams, SwitchingError, SwitchingSignal};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{context}: {source}")]
    Expression { context: String, source: ParseError },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    Switching(#[from] SwitchingError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub dimension: usize,
    pub modes: Vec<ModeConfig>,
    #[serde(default)]
    pub lyapunov: Option<LyapunovConfig>,
    pub switching: SwitchingConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub controller: Option<ControllerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<String>>,
    /// One field (n expressions) per input.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LyapunovConfig {
    Quadratic(Vec<Vec<Vec<f64>>>),
    Expressions(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchingConfig {
    Markov {
        generator: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
    Signal {
        instants: Vec<f64>,
        modes: Vec<usize>,
        horizon: f64,
    },
    Bounds {
        decay: f64,
        intensity: f64,
        #[serde(default)]
        onset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub step: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub trajectories: usize,
    pub seed: u64,
    /// Explicit statistic times; empty means `grid_points` uniform points.
    pub grid: Vec<f64>,
    pub grid_points: usize,
    pub epsilon: f64,
    pub convergence_target: Option<f64>,
    pub pmf_times: Vec<f64>,
    pub kmax: usize,
    pub pmf_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            step: 1e-3,
            horizon: 1.0,
            x0: Vec::new(),
            trajectories: 1000,
            seed: 0,
            grid: Vec::new(),
            grid_points: 20,
            epsilon: 1e-3,
            convergence_target: None,
            pmf_times: vec![0.5, 1.0, 2.0],
            kmax: 10,
            pmf_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub samples: usize,
    pub min_radius: f64,
    pub max_radius: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        let spec = SampleSpec::default();
        CertifyConfig {
            samples: spec.count,
            min_radius: spec.min_radius,
            max_radius: spec.max_radius,
        }
    }
}

impl CertifyConfig {
    pub fn sample_spec(&self) -> SampleSpec {
        SampleSpec {
            count: self.samples,
            min_radius: self.min_radius,
            max_radius: self.max_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub decay_rate: f64,
    #[serde(default = "one")]
    pub gain_scale: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub small_control_radii: Vec<f64>,
    #[serde(default = "twenty")]
    pub small_control_samples: usize,
}

fn one() -> f64 {
    1.0
}

fn twenty() -> usize {
    20
}

/// Where the switching signal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SwitchingSource {
    Markov {
        generator: GeneratorMatrix,
        initial: Vec<f64>,
    },
    Signal(SwitchingSignal),
    Bounds(PmfBoundParams),
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub system: SwitchedSystem,
    pub family: Option<LyapunovFamily>,
    pub source: SwitchingSource,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(ConfigError::Invalid(format!("{what} must be a rectangular nonempty array")));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

fn parse_all(sources: &[String], dimension: usize, context: &str) -> Result<Vec<Expression>, ConfigError> {
    sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Expression::parse(s, dimension).map_err(|source| ConfigError::Expression {
                context: format!("{context}[{}] `{s}`", i + 1),
                source,
            })
        })
        .collect()
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Canonical JSON with every default filled in.
    pub fn to_normalized_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn build(self) -> Result<Scenario, ConfigError> {
        let n = self.dimension;
        if n == 0 {
            return Err(ConfigError::Invalid("dimension must be positive".into()));
        }
        let mut modes = Vec::with_capacity(self.modes.len());
        for (p, m) in self.modes.iter().enumerate() {
            let label = format!("mode {}", p + 1);
            let drift = match (&m.matrix, &m.drift) {
                (Some(rows), None) => Drift::Linear(matrix(rows, &format!("{label} matrix"))?),
                (None, Some(exprs)) => Drift::Expressions(parse_all(exprs, n, &format!("{label} drift"))?),
                _ => {
                    return Err(ConfigError::Invalid(format!(
                        "{label} needs exactly one of `matrix` or `drift`"
                    )))
                }
            };
            let controls = m
                .controls
                .iter()
                .enumerate()
                .map(|(i, g)| parse_all(g, n, &format!("{label} control {}", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            modes.push(Mode { drift, controls });
        }
        let system = SwitchedSystem::new(n, modes)?;
        let count = system.mode_count();

        let family = match &self.lyapunov {
            None => None,
            Some(LyapunovConfig::Quadratic(ms)) => Some(LyapunovFamily::quadratic(
                ms.iter()
                    .enumerate()
                    .map(|(p, rows)| matrix(rows, &format!("Lyapunov matrix {}", p + 1)))
                    .collect::<Result<_, _>>()?,
            )?),
            Some(LyapunovConfig::Expressions(es)) => {
                Some(LyapunovFamily::expressions(parse_all(es, n, "Lyapunov function")?)?)
            }
        };
        if let Some(f) = &family {
            if f.modes() != count || f.dimension() != n {
                return Err(ConfigError::Invalid(format!(
                    "Lyapunov family has {} functions on dimension {}, system has {count} modes on dimension {n}",
                    f.modes(),
                    f.dimension()
                )));
            }
        }

        let source = match &self.switching {
            SwitchingConfig::Markov { generator, initial } => {
                let generator = GeneratorMatrix::new(generator.clone())?;
                if generator.modes() != count {
                    return Err(ConfigError::Invalid(format!(
                        "generator has {} modes, system has {count}",
                        generator.modes()
                    )));
                }
                switchcert::switching::check_distribution(initial, count)?;
                SwitchingSource::Markov {
                    generator,
                    initial: initial.clone(),
                }
            }
            SwitchingConfig::Signal {
                instants,
                modes,
                horizon,
            } => {
                if modes.iter().any(|&m| m == 0 || m > count) {
                    return Err(ConfigError::Invalid(format!("signal modes must lie in 1..={count}")));
                }
                SwitchingSource::Signal(SwitchingSignal::new(
                    instants.clone(),
                    modes.iter().map(|m| m - 1).collect(),
                    *horizon,
                )?)
            }
            SwitchingConfig::Bounds {
                decay,
                intensity,
                onset,
            } => SwitchingSource::Bounds(PmfBoundParams::new(*decay, *intensity, *onset)?),
        };

        let run = &self.run;
        if !(run.step > 0.0 && run.horizon > 0.0) {
            return Err(ConfigError::Invalid("run.step and run.horizon must be positive".into()));
        }
        if !run.x0.is_empty() && run.x0.len() != n {
            return Err(ConfigError::Invalid(format!("run.x0 must have {n} entries")));
        }
        if let Some(c) = &self.controller {
            if !(c.decay_rate > 0.0) {
                return Err(ConfigError::Invalid("controller.decay_rate must be positive".into()));
            }
        }
        Ok(Scenario {
            config: self,
            system,
            family,
            source,
        })
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        ScenarioConfig::from_json(text)?.build()
    }

    pub fn x0(&self) -> Result<Vec<f64>, ConfigError> {
        if self.config.run.x0.is_empty() {
            return Err(ConfigError::Invalid("run.x0 is required for this command".into()));
        }
        Ok(self.config.run.x0.clone())
    }

    pub fn family(&self) -> Result<&LyapunovFamily, ConfigError> {
        self.family
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("a `lyapunov` family is required for this command".into()))
    }

    pub fn markov(&self) -> Result<(&GeneratorMatrix, &[f64]), ConfigError> {
        match &self.source {
            SwitchingSource::Markov { generator, initial } => Ok((generator, initial)),
            _ => Err(ConfigError::Invalid(
                "this command needs a `markov` switching source".into(),
            )),
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        let run = &self.config.run;
        if run.grid.is_empty() {
            switchcert::montecarlo::uniform_grid(run.horizon, run.grid_points)
        } else {
            run.grid.clone()
        }
    }
}

/// Scenarios shipped with the tool.
pub const BUNDLED: &[(&str, &str)] = &[
    ("mjls2", include_str!("../scenarios/mjls2.json")),
    ("mjls2b", include_str!("../scenarios/mjls2b.json")),
    ("fail1", include_str!("../scenarios/fail1.json")),
    ("nl2", include_str!("../scenarios/nl2.json")),
    ("ctrl1", include_str!("../scenarios/ctrl1.json")),
    ("ctrl2", include_str!("../scenarios/ctrl2.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
