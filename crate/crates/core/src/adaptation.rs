//! Stochastic-approximation estimate of the energy-noise variance and the
//! swap correction built from it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size policy of the variance recursion
/// `s_{m+1} = (1 - gamma) s_m + gamma * obs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaMode {
    /// `gamma_m = 1/m` for the m-th update (1-based): a running mean.
    RobbinsMonro,
    /// Fixed smoothing factor for a drifting variance.
    Exponential { gamma: f64 },
}

/// Divisor applied to the correction term. `Infinite` disables correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionFactor {
    Finite(f64),
    Infinite,
}

impl CorrectionFactor {
    pub fn value(self) -> f64 {
        match self {
            CorrectionFactor::Finite(f) => f,
            CorrectionFactor::Infinite => f64::INFINITY,
        }
    }

    pub fn from_value(f: f64) -> Result<Self> {
        if f == f64::INFINITY {
            Ok(CorrectionFactor::Infinite)
        } else if f.is_finite() && f > 0.0 {
            Ok(CorrectionFactor::Finite(f))
        } else {
            Err(Error::Config(format!("correction factor {f} must be > 0 or infinite")))
        }
    }
}

impl fmt::Display for CorrectionFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrectionFactor::Finite(v) => write!(f, "{v}"),
            CorrectionFactor::Infinite => f.write_str("inf"),
        }
    }
}

// JSON has no infinity literal, so the infinite factor is the string "inf".
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FactorRepr {
    Number(f64),
    Text(String),
}

impl Serialize for CorrectionFactor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            CorrectionFactor::Finite(v) => FactorRepr::Number(v),
            CorrectionFactor::Infinite => FactorRepr::Text("inf".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CorrectionFactor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match FactorRepr::deserialize(d)? {
            FactorRepr::Number(v) => CorrectionFactor::from_value(v).map_err(D::Error::custom),
            FactorRepr::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(CorrectionFactor::Infinite),
                other => other
                    .parse::<f64>()
                    .map_err(D::Error::custom)
                    .and_then(|v| CorrectionFactor::from_value(v).map_err(D::Error::custom)),
            },
        }
    }
}

/// Where the variance replicates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateSite {
    #[default]
    Low,
    High,
    /// Mean of the sample variances at both chains.
    Both,
}

fn default_replicates() -> usize {
    10
}
fn default_update_every() -> u64 {
    100
}
fn default_init() -> f64 {
    100.0
}

/// Static settings of a [`CorrectionEstimator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub gamma: GammaMode,
    pub correction_factor: CorrectionFactor,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    #[serde(default = "default_update_every")]
    pub update_every: u64,
    #[serde(default = "default_init")]
    pub sigma_hat_sq_init: f64,
    #[serde(default)]
    pub replicate_site: ReplicateSite,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            gamma: GammaMode::RobbinsMonro,
            correction_factor: CorrectionFactor::Finite(1.0),
            n_replicates: default_replicates(),
            update_every: default_update_every(),
            sigma_hat_sq_init: default_init(),
            replicate_site: ReplicateSite::Low,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates < 2 {
            return Err(Error::Config("n_replicates must be >= 2".into()));
        }
        if self.update_every == 0 {
            return Err(Error::Config("update_every must be >= 1".into()));
        }
        if !(self.sigma_hat_sq_init.is_finite() && self.sigma_hat_sq_init >= 0.0) {
            return Err(Error::Config("sigma_hat_sq_init must be >= 0".into()));
        }
        if let GammaMode::Exponential { gamma } = self.gamma {
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::Config(format!("smoothing factor {gamma} not in (0, 1]")));
            }
        }
        CorrectionFactor::from_value(self.correction_factor.value())?;
        Ok(())
    }
}

/// Adaptive variance estimate `sigma_hat_sq` after `updates` SA steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionEstimator {
    pub config: EstimatorConfig,
    pub sigma_hat_sq: f64,
    pub updates: u64,
}

impl CorrectionEstimator {
    pub fn new(config: EstimatorConfig) -> Self {
        Self {
            config,
            sigma_hat_sq: config.sigma_hat_sq_init,
            updates: 0,
        }
    }

    pub fn correction_factor(&self) -> CorrectionFactor {
        self.config.correction_factor
    }

    /// Whether an SA step is due after kernel step `step` (1-based).
    pub fn is_due(&self, step: u64) -> bool {
        step.is_multiple_of(self.config.update_every)
    }

    /// Folds one variance observation into the estimate.
    pub fn sa_update(&self, observation: f64) -> Result<Self> {
        if !(observation.is_finite() && observation >= 0.0) {
            return Err(Error::Precondition(format!(
                "variance observation {observation} must be finite and >= 0"
            )));
        }
        let m = self.updates + 1;
        let gamma = match self.config.gamma {
            GammaMode::RobbinsMonro => 1.0 / m as f64,
            GammaMode::Exponential { gamma } => gamma,
        };
        Ok(Self {
            config: self.config,
            sigma_hat_sq: (1.0 - gamma) * self.sigma_hat_sq + gamma * observation,
            updates: m,
        })
    }

    /// `(1/tau_low - 1/tau_high) * sigma_hat_sq / F`
    pub fn correction_term(&self, tau_low: f64, tau_high: f64) -> Result<f64> {
        correction_term(self.sigma_hat_sq, self.config.correction_factor, tau_low, tau_high)
    }
}

pub fn correction_term(
    sigma_hat_sq: f64,
    factor: CorrectionFactor,
    tau_low: f64,
    tau_high: f64,
) -> Result<f64> {
    let gap = inverse_temperature_gap(tau_low, tau_high)?;
    Ok(match factor {
        CorrectionFactor::Infinite => 0.0,
        CorrectionFactor::Finite(f) => gap * sigma_hat_sq / f,
    })
}

/// `1/tau_low - 1/tau_high`, requiring `0 < tau_low < tau_high`.
pub fn inverse_temperature_gap(tau_low: f64, tau_high: f64) -> Result<f64> {
    if !(tau_low > 0.0 && tau_low < tau_high && tau_high.is_finite()) {
        return Err(Error::Precondition(format!(
            "temperatures must satisfy 0 < tau_low < tau_high, got {tau_low} and {tau_high}"
        )));
    }
    Ok(1.0 / tau_low - 1.0 / tau_high)
}

/// Unbiased sample variance with denominator `n - 1`.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Precondition(format!(
            "sample variance needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}
