//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 2024                       # master seed
//! trials = 200                      # windows per (s, strategy)
//! workers = 0                       # 0 = one per core
//! window_lengths = [10, 100, 1000]  # slots
//! strategies = ["atbs", "orr"]
//! reference_horizon_slots = 1000000 # long-term TBS estimate
//! output = "results.csv"
//! # thresholds = [0.0, ...]         # skip calibration
//!
//! [demand]
//! n_max = 2
//! lower = ["1/5", "1/5", "1/5", "1/5", "1/5"]
//! upper = ["1", "1", "1", "1", "1"]
//!
//! [sampler]
//! kind = "cell"                     # cell | fixed | exponential | lognormal
//! drop_seed = 7
//! # means = [...]; sigma = 0.5      # synthetic kinds, one mean per virtual user
//!
//! [sampler.cell]                    # optional overrides, units in names
//! outer_radius_m = 100.0
//!
//! [calibration]
//! tolerance = 0.01
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationConfig;
use crate::catalog::VirtualUserCatalog;
use crate::channel::{drop_users, CellConfig, CellSampler, PerformanceSampler, SyntheticKind, SyntheticSampler};
use crate::demand::TemporalDemand;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::strategies::{StrategyKind, ThresholdVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub n_max: usize,
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
}

impl DemandSection {
    pub fn demand(&self) -> Result<TemporalDemand> {
        TemporalDemand::new(self.lower.clone(), self.upper.clone())
    }

    pub fn catalog(&self) -> Result<VirtualUserCatalog> {
        VirtualUserCatalog::homogeneous(self.lower.len(), self.n_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Cell,
    Fixed,
    Exponential,
    Lognormal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    #[serde(default)]
    pub drop_seed: u64,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default)]
    pub means: Vec<f64>,
    #[serde(default)]
    pub sigma: f64,
}

impl SamplerSection {
    pub fn build(&self, catalog: &VirtualUserCatalog) -> Result<Box<dyn PerformanceSampler>> {
        let synthetic = |kind| -> Result<Box<dyn PerformanceSampler>> {
            Ok(Box::new(SyntheticSampler::new(kind, self.means.clone(), self.sigma, catalog)?))
        };
        match self.kind {
            SamplerKind::Cell => {
                if self.cell.n_users != catalog.n() {
                    return Err(Error::InvalidConfig(format!(
                        "sampler.cell.n_users = {} but the demand lists {} users",
                        self.cell.n_users,
                        catalog.n()
                    )));
                }
                let users = drop_users(&self.cell, self.drop_seed)?;
                Ok(Box::new(CellSampler::new(&users, catalog, &self.cell)?))
            }
            SamplerKind::Fixed => synthetic(SyntheticKind::Fixed),
            SamplerKind::Exponential => synthetic(SyntheticKind::Exponential),
            SamplerKind::Lognormal => synthetic(SyntheticKind::Lognormal),
        }
    }
}

fn default_horizon() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    #[serde(default)]
    pub workers: usize,
    pub window_lengths: Vec<u64>,
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_horizon")]
    pub reference_horizon_slots: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
    #[serde(default)]
    pub audit: bool,
    #[serde(default)]
    pub thresholds: Option<ThresholdVector>,
    pub demand: DemandSection,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Structural checks plus feasibility of every listed window.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be positive".into()));
        }
        if self.window_lengths.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidConfig("need at least one window length and one strategy".into()));
        }
        if self.reference_horizon_slots == 0 {
            return Err(Error::InvalidConfig("reference_horizon_slots must be positive".into()));
        }
        let demand = self.demand.demand()?;
        let catalog = self.demand.catalog()?;
        if let Some(th) = &self.thresholds {
            if th.len() != catalog.n() {
                return Err(Error::InvalidConfig(format!(
                    "{} thresholds for {} users",
                    th.len(),
                    catalog.n()
                )));
            }
        }
        self.calibration.validate()?;
        for &s in &self.window_lengths {
            if let Some(reason) = infeasibility_reason(s, &demand, catalog.n_max())? {
                return Err(Error::InfeasibleWindow { s, reason });
            }
        }
        self.sampler.build(&catalog)?;
        Ok(())
    }
}

/// Names the first violated feasibility constraint, or `None` if `s` is feasible.
pub fn infeasibility_reason(s: u64, demand: &TemporalDemand, n_max: usize) -> Result<Option<String>> {
    if s == 0 {
        return Ok(Some("window length must be positive".into()));
    }
    let b = demand.count_bounds(s)?;
    for i in 0..demand.n() {
        if b.lower[i] > b.upper[i] {
            return Ok(Some(format!(
                "user {}: ceil(s*lower) = {} exceeds floor(s*upper) = {}",
                i + 1,
                b.lower[i],
                b.upper[i]
            )));
        }
    }
    let total: u64 = b.lower.iter().sum();
    if total > s * n_max as u64 {
        return Ok(Some(format!(
            "lower demands need {total} user-slots but only s*n_max = {} exist",
            s * n_max as u64
        )));
    }
    Ok(None)
}
