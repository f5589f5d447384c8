//! Scenario configuration and `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adaptation::EstimatorConfig;
use crate::error::{Error, Result};
use crate::exchange::{PairSchedules, ReplicaConfig};
use crate::kernels::Schedule;
use crate::target::EnergyModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Single chain at the low temperature.
    Sgld,
    /// Two chains swapped with the uncorrected stochastic rate.
    NaiveResgld,
    /// Two chains with the adaptively corrected rate.
    AdaptiveResgld,
}

/// Schedules for the low and high temperature slots. `high` defaults to
/// `low` when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotSchedules {
    pub low: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<Schedule>,
}

impl SlotSchedules {
    pub fn constant(v: f64) -> Self {
        Self {
            low: Schedule::constant(v),
            high: None,
        }
    }

    pub fn both(&self) -> [Schedule; 2] {
        [self.low, self.high.unwrap_or(self.low)]
    }
}

fn one() -> u64 {
    1
}
fn default_metrics_every() -> u64 {
    1000
}
fn default_grid() -> usize {
    1000
}
fn default_bins() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub model: EnergyModel,
    pub sampler: Sampler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica: Option<ReplicaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    pub learning_rate: SlotSchedules,
    /// Overrides the constant temperatures of `replica`, e.g. for annealing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<SlotSchedules>,
    #[serde(default = "one")]
    pub steps_per_epoch: u64,
    pub iterations: u64,
    #[serde(default = "one")]
    pub thinning: u64,
    #[serde(default)]
    pub burn_in: u64,
    pub seed: u64,
    #[serde(default)]
    pub run_id: u64,
    /// Start positions of the low and high chains.
    #[serde(default)]
    pub initial_positions: [f64; 2],
    #[serde(default = "default_metrics_every")]
    pub metrics_every: u64,
    #[serde(default = "default_grid")]
    pub quantile_grid: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default)]
    pub output_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be >= 1".into()));
        }
        if self.steps_per_epoch == 0 || self.metrics_every == 0 {
            return Err(Error::Config("steps_per_epoch and metrics_every must be >= 1".into()));
        }
        if self.quantile_grid < 100 {
            return Err(Error::Config("quantile_grid must be >= 100".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be >= 1".into()));
        }
        if self.initial_positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("initial positions must be finite".into()));
        }
        for s in self.learning_rate.both() {
            s.validate()?;
        }
        match self.sampler {
            Sampler::Sgld => {
                self.sgld_temperature()?.validate()?;
            }
            Sampler::NaiveResgld | Sampler::AdaptiveResgld => {
                self.replica_config()?.validate()?;
                self.pair_schedules()?;
                if self.sampler == Sampler::AdaptiveResgld {
                    self.estimator_config()?.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn replica_config(&self) -> Result<ReplicaConfig> {
        self.replica
            .ok_or_else(|| Error::Config(format!("sampler {:?} needs a replica block", self.sampler)))
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        self.estimator
            .ok_or_else(|| Error::Config("adaptive_resgld needs an estimator block".into()))
    }

    pub fn sgld_temperature(&self) -> Result<Schedule> {
        match (&self.temperature, &self.replica) {
            (Some(t), _) => Ok(t.low),
            (None, Some(r)) => Ok(Schedule::constant(r.tau_low)),
            (None, None) => Err(Error::Config(
                "sgld needs a temperature schedule or a replica block".into(),
            )),
        }
    }

    pub fn pair_schedules(&self) -> Result<PairSchedules> {
        let replica = self.replica_config()?;
        let temperature = match &self.temperature {
            Some(t) => [
                t.low,
                t.high
                    .ok_or_else(|| Error::Config("temperature.high is required for replica samplers".into()))?,
            ],
            None => [Schedule::constant(replica.tau_low), Schedule::constant(replica.tau_high)],
        };
        for s in temperature {
            s.validate()?;
        }
        Ok(PairSchedules {
            learning_rate: self.learning_rate.both(),
            temperature,
            steps_per_epoch: self.steps_per_epoch,
        })
    }

    /// Number of retained samples: `floor((iterations - burn_in) / thinning)`.
    pub fn expected_sample_count(&self) -> u64 {
        self.iterations.saturating_sub(self.burn_in) / self.thinning
    }

    /// Whether the sample after kernel step `step` (1-based) is retained.
    pub fn keeps_sample(&self, step: u64) -> bool {
        step > self.burn_in && (step - self.burn_in).is_multiple_of(self.thinning)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies `key.path=value` overrides. Values parse as JSON when they
    /// can and fall back to strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut tree = serde_json::to_value(self)?;
        for o in overrides {
            apply_override(&mut tree, o.as_ref())?;
        }
        let cfg: Self = serde_json::from_value(tree)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let slot = match node {
            Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{key}` is not an index")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range in `{key}`")))?
            }
            _ => return Err(Error::Config(format!("`{key}` does not name a config field"))),
        };
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    Err(Error::Config(format!("empty override key in `{assignment}`")))
}
