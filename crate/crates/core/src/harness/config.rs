use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environments::{
    load_empirical_csv, make_mixture_benchmark, make_two_arm_benchmark, ArmSpec, Environment,
};
use crate::error::{BanditError, Result};
use crate::policy::PolicySpec;
use crate::rng::RngStream;
use crate::safety::ValueFunctionSpec;

/// Environment section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    /// Deterministic `r` against `Uniform(0, 1)`.
    TwoArm { r: f64 },
    /// `k` truncated Gaussian mixtures drawn from the experiment seed.
    Mixture { k: usize },
    /// One empirical arm per group of a CSV file.
    Csv {
        path: PathBuf,
        value_column: String,
        group_column: String,
    },
    /// Explicit list of arms.
    Arms {
        arms: Vec<ArmSpec>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
}

impl EnvironmentSpec {
    pub fn build(&self, rng: &mut RngStream) -> Result<Environment> {
        match self {
            EnvironmentSpec::TwoArm { r } => make_two_arm_benchmark(*r),
            EnvironmentSpec::Mixture { k } => make_mixture_benchmark(*k, rng),
            EnvironmentSpec::Csv {
                path,
                value_column,
                group_column,
            } => load_empirical_csv(path, value_column, group_column),
            EnvironmentSpec::Arms { arms, labels } => {
                let arms = arms.iter().map(ArmSpec::build).collect::<Result<Vec<_>>>()?;
                let env = Environment::new(arms)?;
                match labels {
                    Some(l) => env.with_labels(l.clone()),
                    None => Ok(env),
                }
            }
        }
    }
}

/// A full experiment: one environment, one value function for regret
/// accounting, and one or more policies compared side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub policies: Vec<PolicySpec>,
    pub value_function: ValueFunctionSpec,
    pub horizon: u64,
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Record every step in the per-run trace files instead of checkpoints only.
    #[serde(default)]
    pub full_traces: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| BanditError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BanditError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            BanditError::Config(msg) => BanditError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(BanditError::Config("horizon must be >= 1".into()));
        }
        if self.replications < 1 {
            return Err(BanditError::Config("replications must be >= 1".into()));
        }
        if self.replications > u32::MAX as u64 {
            return Err(BanditError::Config("replications must fit in 32 bits".into()));
        }
        if self.policies.is_empty() {
            return Err(BanditError::Config("at least one policy is required".into()));
        }
        for p in &self.policies {
            p.validate()?;
        }
        self.value_function
            .build()
            .map_err(|e| BanditError::Config(e.to_string()))?;
        Ok(())
    }
}
