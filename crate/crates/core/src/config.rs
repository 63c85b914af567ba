//! Run configuration files (TOML).
//!
//! ```toml
//! evaluation_time = 0.0
//! output_path = "out"
//! calibrate_k0 = 0.05
//!
//! [market]
//! strike = 100.0
//! rate = 0.05
//! sigma = 0.2
//! maturity = 1.0
//! rehedge_dt = 0.25
//!
//! [grid]
//! s_max = 400.0
//! n_space = 400
//! boundary = "discounted_intrinsic"   # n_time omitted: smallest stable count
//!
//! [[structures]]
//! name = "constant"
//! type = "constant"
//! k = 0.05
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::CostStructure;
use crate::pde_engine::{min_stable_n_time, BoundaryMode, GridSpec, MarketParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub s_max: f64,
    pub n_space: usize,
    /// Omitted means: smallest count passing the a-priori stability bound for every structure.
    #[serde(default)]
    pub n_time: Option<usize>,
    #[serde(default)]
    pub boundary: BoundaryMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedStructure {
    pub name: String,
    #[serde(flatten)]
    pub structure: CostStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    pub grid: GridConfig,
    #[serde(default)]
    pub structures: Vec<NamedStructure>,
    #[serde(default)]
    pub evaluation_time: f64,
    /// Directory receiving `<name>.csv`; `--out` takes precedence.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub calibrate_k0: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: crate::Error| ConfigError::Invalid(e.to_string());
        self.market.validate().map_err(invalid)?;
        self.grid_spec_unchecked(1).validate(&self.market).map_err(invalid)?;
        if self.grid.n_time == Some(0) {
            return Err(ConfigError::Invalid("grid.n_time must be positive".into()));
        }
        if !(0.0..=self.market.maturity).contains(&self.evaluation_time) {
            return Err(ConfigError::Invalid(format!(
                "evaluation_time = {} outside [0, {}]",
                self.evaluation_time, self.market.maturity
            )));
        }
        if let Some(k0) = self.calibrate_k0 {
            if !(k0 > 0.0 && k0 < 1.0) {
                return Err(ConfigError::Invalid(format!("calibrate_k0 = {k0} must lie in (0, 1)")));
            }
        }
        let mut seen = HashSet::new();
        for s in &self.structures {
            let safe = !s.name.is_empty()
                && !s.name.starts_with('.')
                && s.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
            if !safe {
                return Err(ConfigError::Invalid(format!(
                    "structure name {:?} must be non-empty and use only [A-Za-z0-9._-]",
                    s.name
                )));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate structure name {:?}", s.name)));
            }
            s.structure
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("structure {:?}: {e}", s.name)))?;
        }
        Ok(())
    }

    /// Structures after optional k(0) calibration.
    pub fn resolved_structures(&self) -> Result<Vec<NamedStructure>, ConfigError> {
        self.structures
            .iter()
            .map(|s| {
                let structure = match self.calibrate_k0 {
                    Some(k0) => s
                        .structure
                        .calibrated_to(k0)
                        .map_err(|e| ConfigError::Invalid(format!("structure {:?}: {e}", s.name)))?,
                    None => s.structure.clone(),
                };
                Ok(NamedStructure {
                    name: s.name.clone(),
                    structure,
                })
            })
            .collect()
    }

    /// Grid shared by the baseline and every structure in `structures`.
    pub fn grid_spec(&self, structures: &[NamedStructure]) -> GridSpec {
        if let Some(n) = self.grid.n_time {
            return self.grid_spec_unchecked(n);
        }
        let probe = self.grid_spec_unchecked(1);
        let n = structures
            .iter()
            .map(|s| min_stable_n_time(&self.market, &probe, Some(&s.structure)))
            .fold(min_stable_n_time(&self.market, &probe, None), usize::max);
        self.grid_spec_unchecked(n)
    }

    fn grid_spec_unchecked(&self, n_time: usize) -> GridSpec {
        GridSpec {
            s_max: self.grid.s_max,
            n_space: self.grid.n_space,
            n_time,
            boundary: self.grid.boundary,
        }
    }
}

impl std::str::FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
