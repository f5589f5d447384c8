//! Self-checks runnable from the command line.

use std::fmt;
use std::str::FromStr;

use crate::adaptation::{sample_variance, CorrectionEstimator, CorrectionFactor, EstimatorConfig};
use crate::config::Sampler;
use crate::error::{Error, Result};
use crate::exchange::{mc_swap_mean, step_pair, ReplicaPair, Representation};
use crate::presets::preset;
use crate::rng::{rng_streams, Purpose, RandomSource, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Unbiasedness,
    Sa,
    Equivalence,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiasedness" => Ok(Suite::Unbiasedness),
            "sa" => Ok(Suite::Sa),
            "equivalence" => Ok(Suite::Equivalence),
            other => Err(Error::Config(format!(
                "unknown suite `{other}`; expected unbiasedness, sa or equivalence"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    match suite {
        Suite::Unbiasedness => unbiasedness(seed, 1_000_000),
        Suite::Sa => sa_consistency(seed),
        Suite::Equivalence => representation_equivalence(seed, 10_000),
    }
}

/// Mean corrected swap rate against `exp(gap * dU)` for `dU in {-1, 0, 1}`
/// (1% relative), and the uncorrected mean at `dU = 0` against its
/// lognormal value `exp(gap^2 sigma^2)` (3% relative).
pub fn unbiasedness(seed: u64, n_draws: usize) -> Result<Vec<Check>> {
    let cfg = preset("unbiasedness")?;
    let replica = cfg.replica_config()?;
    let (t1, t2) = (replica.tau_low, replica.tau_high);
    let sigma = cfg.model.energy_noise.std();
    let gap = 1.0 / t1 - 1.0 / t2;
    let mut rng = Stream::new(seed, 0, Purpose::Auxiliary);
    let mut checks = Vec::new();
    for du in [-1.0, 0.0, 1.0] {
        let est = mc_swap_mean(t1, t2, sigma, du, n_draws, CorrectionFactor::Finite(1.0), &mut rng)?;
        let target = (gap * du).exp();
        let rel = (est.mean / target - 1.0).abs();
        checks.push(Check {
            name: format!("corrected swap rate unbiased at dU={du}"),
            passed: rel < 0.01,
            detail: format!("mean {:.6} vs {target:.6} (rel err {rel:.2e}, tol 1e-2)", est.mean),
        });
    }
    let naive = mc_swap_mean(t1, t2, sigma, 0.0, n_draws, CorrectionFactor::Infinite, &mut rng)?;
    let biased = (gap * gap * sigma * sigma).exp();
    let rel = (naive.mean / biased - 1.0).abs();
    checks.push(Check {
        name: "naive swap rate carries lognormal bias".into(),
        passed: rel < 0.03,
        detail: format!("mean {:.6} vs {biased:.6} (rel err {rel:.2e}, tol 3e-2)", naive.mean),
    });
    Ok(checks)
}

/// Robbins-Monro estimate after 1000 updates from variance-of-10 replicates
/// of N(0, 2^2) noise must land in [3.8, 4.2].
pub fn sa_consistency(seed: u64) -> Result<Vec<Check>> {
    let mut rng = Stream::new(seed, 0, Purpose::Replicates);
    let mut est = CorrectionEstimator::new(EstimatorConfig::default());
    for _ in 0..1000 {
        let reps: Vec<f64> = (0..est.config.n_replicates)
            .map(|_| 2.0 * rng.standard_normal())
            .collect();
        est = est.sa_update(sample_variance(&reps)?)?;
    }
    Ok(vec![Check {
        name: "SA variance estimate consistent".into(),
        passed: (3.8..=4.2).contains(&est.sigma_hat_sq),
        detail: format!("sigma_hat_sq {:.4} after {} updates, band [3.8, 4.2]", est.sigma_hat_sq, est.updates),
    }])
}

/// Position-swap and temperature-swap pairs with identical streams hold the
/// same `(position, temperature slot)` multiset at every step, bit for bit.
pub fn representation_equivalence(seed: u64, steps: u64) -> Result<Vec<Check>> {
    let cfg = preset("gm1-resgld")?;
    let schedules = cfg.pair_schedules()?;
    let replica = cfg.replica_config()?;
    let [x0, x1] = cfg.initial_positions;
    let mut by_position = ReplicaPair::new(replica, x0, x1)?;
    let mut by_temperature = ReplicaPair::new(
        crate::exchange::ReplicaConfig {
            representation: Representation::TemperatureSwap,
            ..replica
        },
        x0,
        x1,
    )?;
    let est_cfg = match cfg.sampler {
        Sampler::AdaptiveResgld => cfg.estimator_config()?,
        _ => unreachable!("preset is adaptive"),
    };
    let mut e1 = CorrectionEstimator::new(est_cfg);
    let mut e2 = CorrectionEstimator::new(est_cfg);
    let mut s1 = rng_streams(seed, 0);
    let mut s2 = rng_streams(seed, 0);
    let mut first_mismatch = None;
    let mut swaps = 0u64;
    for _ in 0..steps {
        let d = step_pair(&mut by_position, &cfg.model, &schedules, Some(&mut e1), &mut s1)?;
        step_pair(&mut by_temperature, &cfg.model, &schedules, Some(&mut e2), &mut s2)?;
        swaps += u64::from(d.accepted);
        let key = |p: &ReplicaPair| {
            let mut k = p.labelled_positions().map(|(x, slot)| (x.to_bits(), slot));
            k.sort_unstable();
            k
        };
        if first_mismatch.is_none() && key(&by_position) != key(&by_temperature) {
            first_mismatch = Some(by_position.step_index());
        }
    }
    Ok(vec![Check {
        name: "position/temperature swap representations agree".into(),
        passed: first_mismatch.is_none(),
        detail: match first_mismatch {
            None => format!("{steps} steps identical to the bit ({swaps} swaps)"),
            Some(step) => format!("multisets differ first at step {step}"),
        },
    }])
}
