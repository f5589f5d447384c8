//! Single-chain Langevin kernel and step-size / temperature schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::target::EnergyModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub position: f64,
    pub step_index: u64,
}

impl ChainState {
    pub fn new(position: f64) -> Self {
        Self {
            position,
            step_index: 0,
        }
    }
}

/// Learning-rate or temperature schedule, indexed by epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// `max(floor_fraction, factor^k) * initial`
    ExponentialDecay {
        initial: f64,
        factor: f64,
        floor_fraction: f64,
    },
    /// `initial / divisor^k`
    GeometricAnneal {
        initial: f64,
        divisor: f64,
    },
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match *self {
            Schedule::Constant { value } => positive(value),
            Schedule::ExponentialDecay {
                initial,
                factor,
                floor_fraction,
            } => positive(initial) && positive(factor) && positive(floor_fraction),
            Schedule::GeometricAnneal { initial, divisor } => positive(initial) && positive(divisor),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSchedule(format!("{self:?} has non-positive parameters")))
        }
    }

    pub fn value(&self, k: u64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::ExponentialDecay {
                initial,
                factor,
                floor_fraction,
            } => floor_fraction.max(factor.powf(k as f64)) * initial,
            Schedule::GeometricAnneal { initial, divisor } => {
                // clamp keeps the value strictly positive for huge k
                (initial / divisor.powf(k as f64)).max(f64::MIN_POSITIVE)
            }
        }
    }
}

/// Free function form of [`Schedule::value`].
pub fn schedule_value(s: &Schedule, k: u64) -> f64 {
    s.value(k)
}

/// `x - eta * grad + sqrt(2 eta tau) * xi`
pub fn langevin_update(position: f64, gradient: f64, eta: f64, tau: f64, xi: f64) -> f64 {
    position - eta * gradient + (2.0 * eta * tau).sqrt() * xi
}

fn check_step_sizes(eta: f64, tau: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Precondition(format!("learning rate {eta} must be > 0")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Precondition(format!("temperature {tau} must be > 0")));
    }
    Ok(())
}

/// One SGLD transition with gradient noise and Langevin noise drawn from
/// separate sources.
pub fn sgld_step_with<K, G>(
    state: ChainState,
    model: &EnergyModel,
    eta: f64,
    tau: f64,
    kernel: &mut K,
    gradient: &mut G,
) -> Result<ChainState>
where
    K: RandomSource + ?Sized,
    G: RandomSource + ?Sized,
{
    check_step_sizes(eta, tau)?;
    let step = state.step_index + 1;
    let divergence = || Error::Divergence {
        step,
        last_position: state.position,
    };
    let g = model
        .stochastic_gradient(state.position, gradient)
        .map_err(|_| divergence())?;
    let xi = kernel.standard_normal();
    let position = langevin_update(state.position, g, eta, tau, xi);
    if !position.is_finite() {
        return Err(divergence());
    }
    Ok(ChainState {
        position,
        step_index: step,
    })
}

/// One SGLD transition; the gradient-noise draw precedes the Langevin draw
/// on the same stream.
pub fn sgld_step<R: RandomSource + ?Sized>(
    state: ChainState,
    model: &EnergyModel,
    eta: f64,
    tau: f64,
    rng: &mut R,
) -> Result<ChainState> {
    check_step_sizes(eta, tau)?;
    let step = state.step_index + 1;
    let divergence = || Error::Divergence {
        step,
        last_position: state.position,
    };
    let g = model
        .stochastic_gradient(state.position, rng)
        .map_err(|_| divergence())?;
    let xi = rng.standard_normal();
    let position = langevin_update(state.position, g, eta, tau, xi);
    if !position.is_finite() {
        return Err(divergence());
    }
    Ok(ChainState {
        position,
        step_index: step,
    })
}
