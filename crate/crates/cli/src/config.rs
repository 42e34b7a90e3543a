//! Experiment configuration files and flag overrides.

use std::path::{Path, PathBuf};

use ahb_core::{Method, ProblemKind, ProblemSpec, SolverConfig, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

/// Start point shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    #[default]
    Zeros,
    /// Standard-normal direction scaled to `norm`.
    SeededRandom { seed: u64, norm: f64 },
}

impl StartPoint {
    pub fn realize(&self, dim: usize) -> Result<Vector, Failure> {
        match *self {
            StartPoint::Zeros => Ok(Vector::zeros(dim)),
            StartPoint::SeededRandom { seed, norm } => {
                if !(norm >= 0.0 && norm.is_finite()) {
                    return Err(Failure::Config(format!("x0.norm: {norm} must be nonnegative")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let dir = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                let len = dir.norm();
                Ok(if len > 0.0 { dir * (norm / len) } else { dir })
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            StartPoint::Zeros => None,
            StartPoint::SeededRandom { seed, .. } => Some(*seed),
        }
    }
}

/// One solver run: the solver settings plus an optional label and an
/// optional copy of the problem, which must match the experiment's.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: Option<String>,
    pub problem: Option<ProblemSpec>,
    pub config: SolverConfig,
}

impl RunSpec {
    pub fn new(config: SolverConfig) -> Self {
        RunSpec {
            label: None,
            problem: None,
            config,
        }
    }

    fn from_value(index: usize, mut v: Value) -> Result<Self, Failure> {
        let field = |name: &str| format!("runs[{index}].{name}");
        let map = v
            .as_object_mut()
            .ok_or_else(|| Failure::Config(format!("runs[{index}]: expected an object")))?;
        let label = match map.remove("label") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(Failure::Config(format!("{}: expected a string", field("label")))),
        };
        let problem = match map.remove("problem") {
            None | Some(Value::Null) => None,
            Some(p) => Some(
                serde_json::from_value(p).map_err(|e| Failure::Config(format!("{}: {e}", field("problem"))))?,
            ),
        };
        let config =
            serde_json::from_value(v).map_err(|e| Failure::Config(format!("runs[{index}]: {e}")))?;
        Ok(RunSpec { label, problem, config })
    }
}

/// `{"problem", "runs", "x0", "out_dir"}`. Omitted `runs` means the
/// command's default set of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Option<ProblemSpec>,
    pub runs: Vec<RunSpec>,
    pub x0: StartPoint,
    pub out_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<ProblemSpec>,
    #[serde(default)]
    runs: Vec<Value>,
    #[serde(default)]
    x0: StartPoint,
    out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn empty() -> Self {
        ExperimentConfig {
            problem: None,
            runs: Vec::new(),
            x0: StartPoint::Zeros,
            out_dir: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Failure::Config(format!("config: {e}")))?;
        let runs = raw
            .runs
            .into_iter()
            .enumerate()
            .map(|(i, v)| RunSpec::from_value(i, v))
            .collect::<Result<_, _>>()?;
        Ok(ExperimentConfig {
            problem: raw.problem,
            runs,
            x0: raw.x0,
            out_dir: raw.out_dir,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

pub fn parse_kind(s: &str) -> Result<ProblemKind, Failure> {
    serde_json::from_value(Value::String(s.replace('-', "_")))
        .map_err(|_| Failure::Config(format!("problem: unknown kind '{s}'")))
}

pub fn parse_method(s: &str) -> Result<Method, Failure> {
    serde_json::from_value(Value::String(s.replace('-', "").to_lowercase()))
        .map_err(|_| Failure::Config(format!("method: unknown method '{s}'")))
}

pub fn parse_json(flag: &str, s: &str) -> Result<Value, Failure> {
    serde_json::from_str(s).map_err(|e| Failure::Config(format!("{flag}: invalid JSON: {e}")))
}

/// Accepts `[1, 2]` or `1,2`.
pub fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, Failure> {
    let t = s.trim();
    if t.starts_with('[') {
        return serde_json::from_str(t).map_err(|e| Failure::Config(format!("{flag}: {e}")));
    }
    t.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Config(format!("{flag}: '{p}' is not a number")))
        })
        .collect()
}

/// The four standard comparison configurations.
pub fn default_runs() -> Vec<RunSpec> {
    [Method::Ahb, Method::Alrhb, Method::Nesterov, Method::Gd]
        .into_iter()
        .map(|m| RunSpec::new(SolverConfig::new(m)))
        .collect()
}
