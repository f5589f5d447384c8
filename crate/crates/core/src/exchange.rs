//! Two-chain replica exchange: swap rates, the swap test and the full
//! sample / adapt / swap iteration.
//!
//! A pair can be represented two ways. Under [`Representation::PositionSwap`]
//! chain 0 always runs at the low temperature and an accepted swap exchanges
//! positions. Under [`Representation::TemperatureSwap`] chains keep their
//! positions and exchange temperature labels. Random streams are attached to
//! temperature slots rather than chains, so both representations consume
//! identical draws and produce bit-identical `(position, temperature)` sets.

use serde::{Deserialize, Serialize};

use crate::adaptation::{inverse_temperature_gap, sample_variance, CorrectionEstimator, CorrectionFactor, ReplicateSite};
use crate::error::{Error, Result};
use crate::kernels::{sgld_step_with, ChainState, Schedule};
use crate::rng::{RandomSource, RunStreams};
use crate::target::EnergyModel;

/// Exponents are clamped to this magnitude before `exp`.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    PositionSwap,
    TemperatureSwap,
}

fn default_intensity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaConfig {
    pub tau_low: f64,
    pub tau_high: f64,
    /// Swap intensity times learning rate; the swap probability is
    /// `min(1, rate * intensity_times_lr)`.
    #[serde(default = "default_intensity")]
    pub intensity_times_lr: f64,
    #[serde(default)]
    pub representation: Representation,
}

impl ReplicaConfig {
    pub fn new(tau_low: f64, tau_high: f64) -> Self {
        Self {
            tau_low,
            tau_high,
            intensity_times_lr: 1.0,
            representation: Representation::PositionSwap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        inverse_temperature_gap(self.tau_low, self.tau_high)?;
        if !(self.intensity_times_lr > 0.0 && self.intensity_times_lr <= 1.0) {
            return Err(Error::Config(format!(
                "intensity_times_lr {} not in (0, 1]",
                self.intensity_times_lr
            )));
        }
        Ok(())
    }
}

/// Record of one swap attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapDecision {
    pub step_index: u64,
    pub stochastic_energy_low: f64,
    pub stochastic_energy_high: f64,
    pub sigma_hat_sq: f64,
    pub correction_used: f64,
    pub rate: f64,
    pub uniform_draw: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaPair {
    chains: [ChainState; 2],
    /// Index of the chain currently holding the low temperature.
    low: usize,
    pub config: ReplicaConfig,
    pub swap_attempts: u64,
    pub swap_accepts: u64,
}

impl ReplicaPair {
    pub fn new(config: ReplicaConfig, start_low: f64, start_high: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            chains: [ChainState::new(start_low), ChainState::new(start_high)],
            low: 0,
            config,
            swap_attempts: 0,
            swap_accepts: 0,
        })
    }

    /// Index of the chain in temperature slot `slot` (0 = low, 1 = high).
    pub fn chain_in_slot(&self, slot: usize) -> usize {
        if slot == 0 {
            self.low
        } else {
            1 - self.low
        }
    }

    pub fn low(&self) -> ChainState {
        self.chains[self.low]
    }

    pub fn high(&self) -> ChainState {
        self.chains[1 - self.low]
    }

    /// Chains in fixed identity order.
    pub fn chains(&self) -> &[ChainState; 2] {
        &self.chains
    }

    pub fn step_index(&self) -> u64 {
        self.chains[0].step_index
    }

    /// `(position, slot)` for each chain, in chain order.
    pub fn labelled_positions(&self) -> [(f64, usize); 2] {
        [
            (self.chains[0].position, usize::from(self.low != 0)),
            (self.chains[1].position, usize::from(self.low != 1)),
        ]
    }

    /// Swap test `u < min(1, rate * intensity_times_lr)`; on acceptance
    /// exchanges positions or temperature labels per the representation.
    pub fn attempt_swap(&mut self, rate: f64, u: f64) -> Result<bool> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Precondition(format!("uniform draw {u} not in [0, 1)")));
        }
        if rate.is_nan() || rate < 0.0 {
            return Err(Error::Precondition(format!("swap rate {rate} must be >= 0")));
        }
        self.swap_attempts += 1;
        let accepted = u < (rate * self.config.intensity_times_lr).min(1.0);
        if accepted {
            self.swap_accepts += 1;
            match self.config.representation {
                Representation::PositionSwap => {
                    let [a, b] = &mut self.chains;
                    std::mem::swap(&mut a.position, &mut b.position);
                }
                Representation::TemperatureSwap => self.low = 1 - self.low,
            }
        }
        Ok(accepted)
    }
}

fn exp_clamped(exponent: f64) -> f64 {
    exponent.clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()
}

/// `exp((1/tau_low - 1/tau_high) (U_low - U_high))`
pub fn naive_swap_rate(energy_low: f64, energy_high: f64, tau_low: f64, tau_high: f64) -> Result<f64> {
    let gap = inverse_temperature_gap(tau_low, tau_high)?;
    Ok(exp_clamped(gap * (energy_low - energy_high)))
}

/// `exp(gap * (U_low - U_high - gap * sigma_hat_sq / F))` with
/// `gap = 1/tau_low - 1/tau_high`.
pub fn corrected_swap_rate(
    energy_low: f64,
    energy_high: f64,
    tau_low: f64,
    tau_high: f64,
    sigma_hat_sq: f64,
    factor: CorrectionFactor,
) -> Result<f64> {
    let gap = inverse_temperature_gap(tau_low, tau_high)?;
    if sigma_hat_sq.is_nan() || sigma_hat_sq < 0.0 {
        return Err(Error::Precondition(format!("variance estimate {sigma_hat_sq} must be >= 0")));
    }
    let correction = match factor {
        CorrectionFactor::Infinite => 0.0,
        CorrectionFactor::Finite(f) => gap * sigma_hat_sq / f,
    };
    Ok(exp_clamped(gap * (energy_low - energy_high - correction)))
}

/// Learning-rate and temperature schedules of the two temperature slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSchedules {
    pub learning_rate: [Schedule; 2],
    pub temperature: [Schedule; 2],
    pub steps_per_epoch: u64,
}

impl PairSchedules {
    pub fn constant(eta: f64, tau_low: f64, tau_high: f64) -> Self {
        Self {
            learning_rate: [Schedule::constant(eta); 2],
            temperature: [Schedule::constant(tau_low), Schedule::constant(tau_high)],
            steps_per_epoch: 1,
        }
    }

    fn epoch(&self, step: u64) -> u64 {
        step / self.steps_per_epoch.max(1)
    }
}

/// One iteration: an SGLD step per chain at its slot's temperature, an SA
/// update of the variance estimate when due, then one swap attempt with the
/// corrected rate. Without an estimator the swap uses the uncorrected rate.
pub fn step_pair<R: RandomSource>(
    pair: &mut ReplicaPair,
    model: &EnergyModel,
    schedules: &PairSchedules,
    estimator: Option<&mut CorrectionEstimator>,
    streams: &mut RunStreams<R>,
) -> Result<SwapDecision> {
    let epoch = schedules.epoch(pair.step_index());
    let eta = [0, 1].map(|s| schedules.learning_rate[s].value(epoch));
    let tau = [0, 1].map(|s| schedules.temperature[s].value(epoch));

    for slot in 0..2 {
        let c = pair.chain_in_slot(slot);
        let s = &mut streams.slots[slot];
        pair.chains[c] = sgld_step_with(pair.chains[c], model, eta[slot], tau[slot], &mut s.kernel, &mut s.gradient)?;
    }
    let step = pair.step_index();

    let (sigma_hat_sq, factor) = match estimator {
        Some(est) => {
            if est.is_due(step) {
                let observation = replicate_variance(pair, model, est, &mut streams.replicates)?;
                *est = est.sa_update(observation)?;
            }
            (est.sigma_hat_sq, est.correction_factor())
        }
        None => (0.0, CorrectionFactor::Infinite),
    };

    let energy_low = model.stochastic_energy(pair.low().position, &mut streams.slots[0].energy)?;
    let energy_high = model.stochastic_energy(pair.high().position, &mut streams.slots[1].energy)?;
    let gap = inverse_temperature_gap(tau[0], tau[1])?;
    let correction_used = match factor {
        CorrectionFactor::Infinite => 0.0,
        CorrectionFactor::Finite(f) => gap * sigma_hat_sq / f,
    };
    let rate = corrected_swap_rate(energy_low, energy_high, tau[0], tau[1], sigma_hat_sq, factor)?;
    let uniform_draw = streams.swap.uniform();
    let accepted = pair.attempt_swap(rate, uniform_draw)?;

    Ok(SwapDecision {
        step_index: step,
        stochastic_energy_low: energy_low,
        stochastic_energy_high: energy_high,
        sigma_hat_sq,
        correction_used,
        rate,
        uniform_draw,
        accepted,
    })
}

fn replicate_variance<R: RandomSource>(
    pair: &ReplicaPair,
    model: &EnergyModel,
    est: &CorrectionEstimator,
    rng: &mut R,
) -> Result<f64> {
    let n = est.config.n_replicates;
    let mut at = |x: f64| -> Result<f64> {
        let reps = (0..n)
            .map(|_| model.stochastic_energy(x, &mut *rng))
            .collect::<Result<Vec<_>>>()?;
        sample_variance(&reps)
    };
    match est.config.replicate_site {
        ReplicateSite::Low => at(pair.low().position),
        ReplicateSite::High => at(pair.high().position),
        ReplicateSite::Both => {
            let low = at(pair.low().position)?;
            let high = at(pair.high().position)?;
            Ok(0.5 * (low + high))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Mean swap rate when the energy difference is observed as
/// `delta_u + sqrt(2) * sigma * Z`, with the correction computed from the
/// true variance `sigma^2` and divisor `factor`. `Infinite` gives the
/// uncorrected rate.
pub fn mc_swap_mean<R: RandomSource>(
    tau_low: f64,
    tau_high: f64,
    sigma: f64,
    delta_u: f64,
    n_draws: usize,
    factor: CorrectionFactor,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    if n_draws == 0 {
        return Err(Error::Precondition("n_draws must be >= 1".into()));
    }
    // Welford running moments
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_draws {
        let observed = delta_u + std::f64::consts::SQRT_2 * sigma * rng.standard_normal();
        let r = corrected_swap_rate(observed, 0.0, tau_low, tau_high, sigma * sigma, factor)?;
        let d = r - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (r - mean);
    }
    let n = n_draws as f64;
    let var = if n_draws > 1 { m2 / (n - 1.0) } else { 0.0 };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
    })
}

/// [`mc_swap_mean`] with `F = 1`: converges to
/// `exp((1/tau_low - 1/tau_high) * delta_u)`.
pub fn mc_swap_unbiasedness<R: RandomSource>(
    tau_low: f64,
    tau_high: f64,
    sigma: f64,
    delta_u: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    mc_swap_mean(tau_low, tau_high, sigma, delta_u, n_draws, CorrectionFactor::Finite(1.0), rng)
}
