//! JSON experiment configuration.
//!
//! A config names a policy, one environment source, a horizon grid, the number
//! of repetitions, and a base seed. Its digest (SHA-256 of the compact JSON
//! serialization) is written into every output file.
//!
//! ```json
//! {
//!   "policy": { "name": "uniinf" },
//!   "environment": {
//!     "kind": { "stochastic": { "arms": [
//!       { "mean": 0.0, "spread": 10.0, "tail_prob": 0.01 },
//!       { "mean": 0.5, "spread": 10.0, "tail_prob": 0.01 }
//!     ] } },
//!     "alpha": 1.5,
//!     "sigma": 1.0
//!   },
//!   "horizons": [1024, 4096, 16384],
//!   "reps": 10,
//!   "base_seed": 1
//! }
//! ```
//!
//! Instead of `environment`, a config may give `switching` parameters; the
//! switching schedule is then rebuilt for each horizon.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{make_switching_adversary, EnvironmentSpec, SwitchingParams};
use crate::harness::PolicySpec;
use crate::Result;

/// Failure to read or make sense of a config file.
#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(serde_json::Error),
    Schema(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(e) => write!(f, "malformed config: {e}"),
            ConfigError::Schema(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Mean regrets `coefficient * T^exponent` used in place of simulation by `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_policy")]
    pub policy: PolicySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switching: Option<SwitchingParams>,
    pub horizons: Vec<u64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticPowerLaw>,
}

fn default_policy() -> PolicySpec {
    PolicySpec::UniInf
}

fn default_reps() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(ConfigError::Parse)?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    /// Structural checks; value-level checks on the environment are left to the harness.
    pub fn check_schema(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Schema(m.to_string()));
        match (&self.environment, &self.switching) {
            (None, None) => return fail("one of `environment` or `switching` is required"),
            (Some(_), Some(_)) => return fail("`environment` and `switching` are mutually exclusive"),
            _ => {}
        }
        if self.horizons.is_empty() {
            return fail("`horizons` must not be empty");
        }
        if self.reps == 0 {
            return fail("`reps` must be at least 1");
        }
        Ok(())
    }

    /// The environment played at horizon `horizon`.
    pub fn environment_for(&self, horizon: u64) -> Result<EnvironmentSpec> {
        match (&self.environment, &self.switching) {
            (Some(env), _) => Ok(env.clone()),
            (None, Some(p)) => make_switching_adversary(p, horizon),
            (None, None) => Err(crate::error::Error::Domain("config has no environment".into())),
        }
    }
}
