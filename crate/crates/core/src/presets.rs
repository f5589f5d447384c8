//! Named scenarios for the Gaussian-mixture study.

use std::path::PathBuf;

use crate::adaptation::{CorrectionFactor, EstimatorConfig, GammaMode, ReplicateSite};
use crate::config::{Sampler, ScenarioConfig, SlotSchedules};
use crate::error::{Error, Result};
use crate::exchange::{ReplicaConfig, Representation};
use crate::target::{EnergyModel, MixtureSpec, NoiseSpec};

pub const PRESET_NAMES: [&str; 12] = [
    "gm1-sgld",
    "gm1-naive",
    "gm1-resgld",
    "gm2-sgld",
    "gm2-naive",
    "gm2-resgld",
    "gm3-F1",
    "gm3-F2",
    "gm3-F4",
    "gm3-Finf",
    "unbiasedness",
    "discretization",
];

const LEARNING_RATE: f64 = 0.03;
const TAU_LOW: f64 = 1.0;
const TAU_HIGH: f64 = 10.0;
const ITERATIONS: u64 = 100_000;

/// Two-component mixture `0.4 N(left, 0.7^2) + 0.6 N(right, 0.5^2)`.
fn two_modes(left: f64, right: f64) -> MixtureSpec {
    MixtureSpec::new(vec![0.4, 0.6], vec![left, right], vec![0.7, 0.5]).expect("static mixture")
}

/// Gradient noise defaults to a Gaussian with the energy noise's std.
fn noisy(mixture: MixtureSpec, energy_noise: NoiseSpec) -> EnergyModel {
    let gradient_noise = match energy_noise {
        NoiseSpec::None => NoiseSpec::None,
        other => NoiseSpec::Gaussian { std: other.std() },
    };
    EnergyModel::new(mixture, energy_noise, gradient_noise).expect("static noise")
}

fn estimator(factor: CorrectionFactor) -> EstimatorConfig {
    EstimatorConfig {
        gamma: GammaMode::RobbinsMonro,
        correction_factor: factor,
        n_replicates: 10,
        update_every: 100,
        sigma_hat_sq_init: 100.0,
        replicate_site: ReplicateSite::Low,
    }
}

fn base(name: &str, model: EnergyModel, sampler: Sampler) -> ScenarioConfig {
    let replica = (sampler != Sampler::Sgld).then(|| ReplicaConfig::new(TAU_LOW, TAU_HIGH));
    let temperature = (sampler == Sampler::Sgld).then(|| SlotSchedules::constant(TAU_LOW));
    ScenarioConfig {
        model,
        sampler,
        replica,
        estimator: None,
        learning_rate: SlotSchedules::constant(LEARNING_RATE),
        temperature,
        steps_per_epoch: 1,
        iterations: ITERATIONS,
        thinning: 1,
        burn_in: 0,
        seed: 1,
        run_id: 0,
        initial_positions: [0.0, 0.0],
        metrics_every: 1000,
        quantile_grid: 1000,
        histogram_bins: 200,
        output_dir: PathBuf::from("runs").join(name),
    }
}

fn family(name: &str, model: EnergyModel, variant: &str) -> Option<ScenarioConfig> {
    Some(match variant {
        "sgld" => base(name, model, Sampler::Sgld),
        "naive" => base(name, model, Sampler::NaiveResgld),
        "resgld" => ScenarioConfig {
            estimator: Some(estimator(CorrectionFactor::Finite(1.0))),
            ..base(name, model, Sampler::AdaptiveResgld)
        },
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let found = match name.split_once('-') {
        Some(("gm1", v)) => family(
            name,
            noisy(two_modes(-3.0, 2.0), NoiseSpec::Gaussian { std: 2.0 }),
            v,
        ),
        Some(("gm2", v)) => family(
            name,
            noisy(two_modes(-4.0, 3.0), NoiseSpec::StudentT { dof: 5.0, scale: 1.0 }),
            v,
        ),
        Some(("gm3", v)) => {
            let factor = match v {
                "F1" => Some(CorrectionFactor::Finite(1.0)),
                "F2" => Some(CorrectionFactor::Finite(2.0)),
                "F4" => Some(CorrectionFactor::Finite(4.0)),
                "Finf" => Some(CorrectionFactor::Infinite),
                _ => None,
            };
            factor.map(|f| {
                let model = noisy(two_modes(-6.0, 4.0), NoiseSpec::StudentT { dof: 10.0, scale: 7.0 });
                ScenarioConfig {
                    estimator: Some(estimator(f)),
                    ..base(name, model, Sampler::AdaptiveResgld)
                }
            })
        }
        _ => match name {
            // Known unit noise variance: the estimator starts at the truth.
            "unbiasedness" => {
                let model = noisy(MixtureSpec::normal(0.0, 1.0)?, NoiseSpec::Gaussian { std: 1.0 });
                Some(ScenarioConfig {
                    estimator: Some(EstimatorConfig {
                        sigma_hat_sq_init: 1.0,
                        ..estimator(CorrectionFactor::Finite(1.0))
                    }),
                    ..base(name, model, Sampler::AdaptiveResgld)
                })
            }
            // Single-well base for the step-size sweep: swap intensity r = 1
            // per unit time, horizon T = 3 at eta = 0.05.
            "discretization" => {
                let eta = 0.05;
                Some(ScenarioConfig {
                    replica: Some(ReplicaConfig {
                        tau_low: TAU_LOW,
                        tau_high: TAU_HIGH,
                        intensity_times_lr: eta,
                        representation: Representation::PositionSwap,
                    }),
                    estimator: Some(EstimatorConfig {
                        sigma_hat_sq_init: 0.0,
                        ..estimator(CorrectionFactor::Finite(1.0))
                    }),
                    learning_rate: SlotSchedules::constant(eta),
                    iterations: 60,
                    seed: 2024,
                    ..base(name, EnergyModel::exact(MixtureSpec::normal(0.0, 1.0)?), Sampler::AdaptiveResgld)
                })
            }
            _ => None,
        },
    };
    found.ok_or_else(|| Error::UnknownPreset {
        name: name.to_string(),
        valid: PRESET_NAMES.join(", "),
    })
}
