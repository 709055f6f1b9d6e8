//! Tool configuration: defaults, optional JSON config file (via
//! `--config` or the `B2_CONFIG` environment variable), and validation.
//! Every invalid field is reported by name with its constraint.

use std::path::{Path, PathBuf};

use bmq_core::boundary::Connectivity;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Config {
    pub connectivity: Connectivity,
    pub epsilon: f64,
    pub attention_resolution: u32,
    pub assembly_resolution: u32,
    pub ap_thresholds: Vec<f64>,
    pub seed: u64,
    /// Worker threads; 0 means all available cores.
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            connectivity: Connectivity::Four,
            epsilon: 1.0,
            attention_resolution: 7,
            assembly_resolution: 56,
            ap_thresholds: bmq_core::eval::default_thresholds(),
            seed: 42,
            jobs: 0,
        }
    }
}

/// On-disk form: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    connectivity: Option<Connectivity>,
    epsilon: Option<f64>,
    attention_resolution: Option<u32>,
    assembly_resolution: Option<u32>,
    ap_thresholds: Option<Vec<f64>>,
    seed: Option<u64>,
    jobs: Option<usize>,
}

impl Config {
    /// Resolve the configuration: defaults, then the config file (flag
    /// wins over `B2_CONFIG`), then the `--jobs` override.
    pub fn load(flag_path: Option<&Path>, jobs_override: Option<usize>) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let env_path = std::env::var_os("B2_CONFIG").map(PathBuf::from);
        let path = flag_path.map(Path::to_path_buf).or(env_path);
        if let Some(path) = path {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError {
                code: 2,
                message: format!("config file {}: {e}", path.display()),
            })?;
            let file: ConfigFile = serde_json::from_str(&text).map_err(|e| CliError {
                code: 4,
                message: format!("config file {}: {e}", path.display()),
            })?;
            if let Some(v) = file.connectivity {
                cfg.connectivity = v;
            }
            if let Some(v) = file.epsilon {
                cfg.epsilon = v;
            }
            if let Some(v) = file.attention_resolution {
                cfg.attention_resolution = v;
            }
            if let Some(v) = file.assembly_resolution {
                cfg.assembly_resolution = v;
            }
            if let Some(v) = file.ap_thresholds {
                cfg.ap_thresholds = v;
            }
            if let Some(v) = file.seed {
                cfg.seed = v;
            }
            if let Some(v) = file.jobs {
                cfg.jobs = v;
            }
        }
        if let Some(jobs) = jobs_override {
            cfg.jobs = jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let fail = |field: &str, constraint: &str| {
            Err(CliError {
                code: 4,
                message: format!("config field `{field}`: {constraint}"),
            })
        };
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail("epsilon", "must be positive and finite");
        }
        if self.attention_resolution == 0 {
            return fail("attention_resolution", "must be at least 1");
        }
        if self.assembly_resolution == 0 {
            return fail("assembly_resolution", "must be at least 1");
        }
        if self.ap_thresholds.is_empty() {
            return fail("ap_thresholds", "must contain at least one threshold");
        }
        if self.ap_thresholds.iter().any(|t| !(0.0 < *t && *t <= 1.0)) {
            return fail("ap_thresholds", "every threshold must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn laplacian(&self) -> bmq_core::boundary::LaplacianConfig {
        bmq_core::boundary::LaplacianConfig {
            connectivity: self.connectivity,
        }
    }

    pub fn dice(&self) -> Result<bmq_core::boundary::DiceConfig, CliError> {
        bmq_core::boundary::DiceConfig::new(self.epsilon).map_err(CliError::from)
    }
}
