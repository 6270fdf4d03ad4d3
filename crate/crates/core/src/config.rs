//! Run configuration: a declarative TOML file mirroring these structs. The
//! JSON manifest written next to the results is the normative serialized
//! form of a run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Transform, YearMonth};
use crate::error::{Error, Result};
use crate::mcmc::ChainConfig;
use crate::structural::VarSpec;

/// Input CSV location, date handling, transforms, and sample window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub csv_path: String,
    pub date_column: String,
    /// Transform per used column; must cover `variable_order`.
    pub transforms: BTreeMap<String, Transform>,
    /// VAR ordering; the first entry is the instrument variable.
    pub variable_order: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_start: Option<YearMonth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_end: Option<YearMonth>,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variable_order.is_empty() {
            return Err(Error::config("variable_order must be nonempty"));
        }
        for v in &self.variable_order {
            if !self.transforms.contains_key(v) {
                return Err(Error::config(format!(
                    "no transform configured for column '{v}'"
                )));
            }
        }
        Ok(())
    }
}

/// VAR settings beyond the variable ordering (which lives in the dataset
/// section).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarSettings {
    pub lags: usize,
    pub include_intercept: bool,
}

impl Default for VarSettings {
    fn default() -> Self {
        // Monthly-data convention.
        VarSettings {
            lags: 6,
            include_intercept: true,
        }
    }
}

/// Network architecture rule. With `neurons` unset, each hidden layer gets
/// as many neurons as the regression has inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSettings {
    pub hidden_layers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neurons: Option<usize>,
    pub leaky_alpha: f64,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        NetworkSettings {
            hidden_layers: 1,
            neurons: None,
            leaky_alpha: crate::bnn::DEFAULT_LEAKY_ALPHA,
        }
    }
}

/// Chain settings; the run-level seed governs all chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSettings {
    pub n_iter: usize,
    pub n_burn: usize,
    pub hmc_step_size: f64,
    pub hmc_n_steps: usize,
    pub sv_enabled: bool,
    pub network_enabled: bool,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let cfg = ChainConfig::default();
        ChainSettings {
            n_iter: cfg.n_iter,
            n_burn: cfg.n_burn,
            hmc_step_size: cfg.hmc_step_size,
            hmc_n_steps: cfg.hmc_n_steps,
            sv_enabled: cfg.sv_enabled,
            network_enabled: cfg.network_enabled,
        }
    }
}

/// Projection settings: horizon grid, shock sizes, history draws, covariate
/// lag count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlpSettings {
    /// Maximum horizon `H`; responses are computed for `0..=H`.
    pub horizons: usize,
    pub taus: Vec<f64>,
    /// Histories drawn per (draw, horizon, shock size).
    pub r_paths: usize,
    /// Lags of every panel variable entering the covariate block.
    pub x_lags: usize,
}

impl Default for NlpSettings {
    fn default() -> Self {
        NlpSettings {
            horizons: 24,
            taus: vec![1.0, -1.0, 3.0],
            r_paths: 400,
            x_lags: 3,
        }
    }
}

/// Complete configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    /// Response variables; each gets its own sequential projection system.
    pub targets: Vec<String>,
    pub data: DatasetConfig,
    #[serde(default)]
    pub var: VarSettings,
    #[serde(default)]
    pub network: NetworkSettings,
    #[serde(default)]
    pub chain: ChainSettings,
    #[serde(default)]
    pub nlp: NlpSettings,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.targets.is_empty() {
            return Err(Error::config("at least one target variable required"));
        }
        let instrument = &self.data.variable_order[0];
        for t in &self.targets {
            if t == instrument {
                return Err(Error::config(format!(
                    "target '{t}' is the instrument variable; order it first and project others"
                )));
            }
            if !self.data.variable_order.contains(t) {
                return Err(Error::config(format!(
                    "target '{t}' is not in variable_order"
                )));
            }
        }
        if self.nlp.taus.is_empty() {
            return Err(Error::config("at least one shock size required"));
        }
        if self.nlp.r_paths == 0 {
            return Err(Error::config("r_paths must be at least 1"));
        }
        if self.network.hidden_layers == 0 {
            return Err(Error::config("at least one hidden layer required"));
        }
        self.var_spec().validate()?;
        self.chain_config(self.seed).validate()
    }

    /// VAR specification implied by the dataset ordering.
    pub fn var_spec(&self) -> VarSpec {
        VarSpec {
            lags: self.var.lags,
            variable_order: self.data.variable_order.clone(),
            include_intercept: self.var.include_intercept,
        }
    }

    /// Chain configuration with the given seed.
    pub fn chain_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            n_iter: self.chain.n_iter,
            n_burn: self.chain.n_burn,
            hmc_step_size: self.chain.hmc_step_size,
            hmc_n_steps: self.chain.hmc_n_steps,
            seed,
            sv_enabled: self.chain.sv_enabled,
            network_enabled: self.chain.network_enabled,
            leaky_alpha: self.network.leaky_alpha,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }
}
