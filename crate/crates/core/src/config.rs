//! Run configuration loaded from TOML.
//!
//! ```toml
//! seeds = [0, 1, 2]
//! strategies = ["gsal", "random", "entropy"]
//! budgets = [0.01, 0.02, 0.05, 0.10]
//!
//! [pool]
//! pool_size = 2000
//!
//! [acquisition.fusion]
//! eta = 0.5
//! ```
//!
//! Every table rejects unknown keys. Missing keys take the library defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{EntropyAggregation, StrategyKind};
use crate::error::{GsalError, Result};
use crate::exec::Execution;
use crate::fusion::AcquisitionConfig;
use crate::generative::SyntheticModel;
use crate::rarity::DEFAULT_PERCENTILE;
use crate::simulator::{ExperimentConfig, PoolSpec};

/// External inputs for `score`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportConfig {
    /// JSON Lines pool file.
    pub pool: Option<PathBuf>,
    /// Concept graph JSON, optionally carrying coverage counts.
    pub graph: Option<PathBuf>,
    /// `id,R,V` CSV or `{id, z, recon}` JSON Lines; omitted when the pool embeds scores.
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategyKind>,
    pub budgets: Vec<f64>,
    pub percentile: f64,
    /// Reconstructions per item for the synthetic provider.
    pub reconstructions: usize,
    pub entropy_aggregation: EntropyAggregation,
    pub runs_execution: Execution,
    pub out: Option<PathBuf>,
    pub pool: PoolSpec,
    pub import: ImportConfig,
    pub acquisition: AcquisitionConfig,
    pub synthetic: SyntheticModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        Self {
            seeds: exp.seeds,
            strategies: exp.strategies,
            budgets: exp.budgets,
            percentile: DEFAULT_PERCENTILE,
            reconstructions: exp.reconstructions,
            entropy_aggregation: exp.entropy_aggregation,
            runs_execution: exp.runs_execution,
            out: None,
            pool: exp.spec,
            import: ImportConfig::default(),
            acquisition: exp.acquisition,
            synthetic: exp.synthetic,
        }
    }
}

fn at(path: &str, reason: impl std::fmt::Display) -> GsalError {
    GsalError::Config {
        path: path.to_string(),
        reason: reason.to_string(),
    }
}

/// Prefixes a parameter error with its table.
fn within(table: &str, err: GsalError) -> GsalError {
    match err {
        GsalError::InvalidParameter { name, reason } => at(&format!("{table}.{name}"), reason),
        GsalError::InfeasibleSpec(reason) => at(table, reason),
        other => at(table, other),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" (byte {})", s.start)).unwrap_or_default();
            at("<config>", format!("{}{span}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        // an unreadable config is bad input, not a run-time failure
        let text = std::fs::read_to_string(path).map_err(|e| at(&path.display().to_string(), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            GsalError::Config { path: field, reason } => GsalError::Config {
                path: format!("{}: {field}", path.display()),
                reason,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.pool.validate().map_err(|e| within("pool", e))?;
        self.acquisition.fusion.validate().map_err(|e| within("acquisition.fusion", e))?;
        self.acquisition.bonus.validate().map_err(|e| within("acquisition.bonus", e))?;
        self.acquisition
            .generative
            .validate()
            .map_err(|e| within("acquisition.generative", e))?;
        if !(self.synthetic.bias_scale >= 0.0 && self.synthetic.noise_scale >= 0.0) {
            return Err(at("synthetic", "scales must be nonnegative"));
        }
        self.experiment().validate().map_err(|e| match e {
            GsalError::InvalidParameter { name, reason } => at(name, reason),
            other => other,
        })
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            spec: self.pool.clone(),
            strategies: self.strategies.clone(),
            budgets: self.budgets.clone(),
            seeds: self.seeds.clone(),
            acquisition: self.acquisition,
            percentile: self.percentile,
            reconstructions: self.reconstructions,
            synthetic: self.synthetic,
            entropy_aggregation: self.entropy_aggregation,
            runs_execution: self.runs_execution,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let exp = cfg.experiment();
        assert_eq!(exp, ExperimentConfig::default());
        assert_eq!(exp.acquisition.fusion.eta, 0.5);
        assert_eq!(exp.acquisition.fusion.gamma, 0.5);
        assert_eq!(exp.acquisition.fusion.rho, 2.0);
        assert_eq!(exp.reconstructions, 4);
        assert_eq!(exp.percentile, 20.0);
    }

    #[test]
    fn nested_overrides() {
        let cfg = RunConfig::from_toml(
            r#"
            seeds = [3, 4]
            strategies = ["gsal", "core_set"]
            budgets = [0.01]
            [pool]
            pool_size = 500
            [acquisition.fusion]
            rho = 4.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, [3, 4]);
        assert_eq!(cfg.strategies, [StrategyKind::Gsal, StrategyKind::CoreSet]);
        assert_eq!(cfg.pool.pool_size, 500);
        assert_eq!(cfg.acquisition.fusion.rho, 4.0);
        assert_eq!(cfg.acquisition.fusion.eta, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["bogus = 1", "[pool]\nsize = 3", "[acquisition.fusion]\nlambda = 2.0"] {
            let err = RunConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, GsalError::Config { .. }), "{text}: {err}");
            assert!(err.is_validation());
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::from_toml("[acquisition.fusion]\nrho = 0.5").unwrap_err();
        assert!(err.to_string().contains("acquisition.fusion.rho"), "{err}");
        let err = RunConfig::from_toml("budgets = [0.2, 0.1]").unwrap_err();
        assert!(err.to_string().contains("budgets"), "{err}");
        let err = RunConfig::from_toml("[pool]\npool_size = 0").unwrap_err();
        assert!(err.to_string().contains("pool"), "{err}");
    }
}
