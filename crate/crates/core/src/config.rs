//! Run configuration shared by all CLI commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{AssemblyOptions, Censoring};
use crate::error::{Error, Result};
use crate::evaluation::{Roster, SplitPlan};
use crate::kinematics::DEFAULT_BANDWIDTH;
use crate::metrics::{BandEdges, BandSet, Metric};
use crate::models::{BoostSpec, Booster};
use crate::synth::SynthConfig;
use crate::tracking::CameraWindow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: usize,
    pub test: usize,
    /// Explicit chronological game order; defaults to sorted game ids.
    pub games: Option<Vec<String>>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 13,
            test: 5,
            games: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub metrics: Vec<Metric>,
    pub boosters: Vec<BoostSpec>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            boosters: Booster::ALL.iter().map(|&b| BoostSpec::new(b)).collect(),
        }
    }
}

/// Everything a run depends on. All randomness derives from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Generator settings; its own `seed` field is replaced by the run seed.
    pub synth: SynthConfig,
    pub window: CameraWindow,
    pub bandwidth: f64,
    pub bands: BandEdges,
    pub censoring: Censoring,
    pub split: SplitConfig,
    pub models: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            window: CameraWindow::default(),
            bandwidth: DEFAULT_BANDWIDTH,
            bands: BandEdges::default(),
            censoring: Censoring::default(),
            split: SplitConfig::default(),
            models: ModelConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        self.band_set()?;
        if let Censoring::Random { p } = self.censoring {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("censoring probability {p} outside [0, 1]")));
            }
        }
        if self.split.train == 0 || self.split.test == 0 {
            return Err(Error::Config("split needs at least one train and one test game".into()));
        }
        if self.models.metrics.is_empty() {
            return Err(Error::Config("models.metrics is empty".into()));
        }
        for spec in &self.models.boosters {
            spec.validate()?;
        }
        let mut boosters: Vec<Booster> = self.models.boosters.iter().map(|s| s.booster).collect();
        boosters.sort();
        let n = boosters.len();
        boosters.dedup();
        if boosters.len() != n {
            return Err(Error::Config("each booster may appear only once".into()));
        }
        self.synth_config().validate()
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            ..self.synth.clone()
        }
    }

    pub fn band_set(&self) -> Result<BandSet> {
        BandSet::from_edges(&self.bands).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions {
            window: self.window,
            bandwidth: self.bandwidth,
            censoring: self.censoring.clone(),
            seed: self.seed,
        }
    }

    pub fn roster(&self) -> Roster {
        Roster {
            metrics: self.models.metrics.clone(),
            boosters: self
                .models
                .boosters
                .iter()
                .map(|s| BoostSpec {
                    seed: self.seed,
                    ..s.clone()
                })
                .collect(),
        }
    }

    /// Split over `available` games, honouring an explicit order if given.
    pub fn split_plan(&self, available: Vec<String>) -> Result<SplitPlan> {
        let plan = match &self.split.games {
            Some(order) => {
                for g in order {
                    if !available.contains(g) {
                        return Err(Error::Config(format!("split lists unknown game `{g}`")));
                    }
                }
                SplitPlan::new(order.clone(), self.split.train, self.split.test)
            }
            None => SplitPlan::chronological(available, self.split.train, self.split.test),
        };
        plan.map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }
}
