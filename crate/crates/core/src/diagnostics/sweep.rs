//! Step-size and gradient-noise sweep of the replica pair's discretisation
//! error against a fine-step, noiseless reference.
//!
//! Every cell reuses the reference run's random streams: a step of size
//! `k * h` consumes `k` reference draws through [`BlockAggregate`], so the
//! clouds differ by discretisation and injected gradient noise rather than
//! by reseeding. Each cloud holds the low-temperature positions at the
//! horizon over `n_runs` run ids; the distance is repeated over
//! `n_repeats` disjoint blocks of run ids for a standard error.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::adaptation::CorrectionEstimator;
use crate::config::{Sampler, ScenarioConfig};
use crate::diagnostics::w2_between_samples;
use crate::error::{Error, Result};
use crate::exchange::{step_pair, PairSchedules, ReplicaConfig, ReplicaPair};
use crate::kernels::Schedule;
use crate::rng::{rng_streams, BlockAggregate};
use crate::run::fmt_f64;
use crate::target::{EnergyModel, NoiseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub etas: Vec<f64>,
    pub grad_noise_stds: Vec<f64>,
    pub horizon: f64,
    pub n_runs: usize,
    pub n_repeats: usize,
    /// Reference step is `min(etas) / refinement`.
    pub refinement: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            etas: vec![0.1, 0.05, 0.025, 0.0125],
            grad_noise_stds: vec![0.0, 1.0, 2.0, 4.0],
            horizon: 3.0,
            n_runs: 200,
            n_repeats: 8,
            refinement: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    pub grad_noise_std: f64,
    pub w2_mean: f64,
    pub w2_stderr: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub reference_eta: f64,
    /// Self-comparison at the reference step with zero gradient noise.
    pub floor: SweepRow,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn cell(&self, eta: f64, grad_noise_std: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.eta == eta && r.grad_noise_std == grad_noise_std)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(w, "eta,grad_noise_std,w2_mean,w2_stderr,n_runs").map_err(io)?;
        for r in std::iter::once(&self.floor).chain(&self.rows) {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(r.eta),
                fmt_f64(r.grad_noise_std),
                fmt_f64(r.w2_mean),
                fmt_f64(r.w2_stderr),
                r.n_runs
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn ratio(numerator: f64, denominator: f64, what: &str) -> Result<u64> {
    let k = (numerator / denominator).round();
    if k < 1.0 || (k * denominator - numerator).abs() > 1e-9 * numerator {
        return Err(Error::Config(format!(
            "{what}: {numerator} is not a multiple of {denominator}"
        )));
    }
    Ok(k as u64)
}

struct Plan<'a> {
    base: &'a ScenarioConfig,
    replica: ReplicaConfig,
    temperature: [Schedule; 2],
    intensity: f64,
    reference_eta: f64,
    horizon: f64,
}

impl Plan<'_> {
    /// Low-temperature position at the horizon for one run id.
    fn final_position(&self, model: &EnergyModel, eta: f64, run_id: u64) -> Result<f64> {
        let block = ratio(eta, self.reference_eta, "step size vs reference")? as usize;
        let steps = ratio(self.horizon, eta, "horizon vs step size")?;
        let mut streams = rng_streams(self.base.seed, run_id).map(|s| BlockAggregate::new(s, block));
        let replica = ReplicaConfig {
            intensity_times_lr: (self.intensity * eta).min(1.0),
            ..self.replica
        };
        let [x_low, x_high] = self.base.initial_positions;
        let mut pair = ReplicaPair::new(replica, x_low, x_high)?;
        let schedules = PairSchedules {
            learning_rate: [Schedule::constant(eta); 2],
            temperature: self.temperature,
            steps_per_epoch: self.base.steps_per_epoch,
        };
        let mut estimator = match self.base.sampler {
            Sampler::AdaptiveResgld => Some(CorrectionEstimator::new(self.base.estimator_config()?)),
            _ => None,
        };
        for _ in 0..steps {
            step_pair(&mut pair, model, &schedules, estimator.as_mut(), &mut streams)?;
        }
        Ok(pair.low().position)
    }

    fn cloud(&self, model: &EnergyModel, eta: f64, run_ids: std::ops::Range<u64>) -> Result<Vec<f64>> {
        run_ids
            .into_par_iter()
            .map(|id| self.final_position(model, eta, id))
            .collect()
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// W2 at the horizon between each `(eta, gradient-noise std)` cloud and the
/// reference cloud run with exact energies and gradients at the finest step.
pub fn discretization_sweep(base: &ScenarioConfig, settings: &SweepSettings) -> Result<SweepTable> {
    base.validate()?;
    if base.sampler == Sampler::Sgld {
        return Err(Error::Config("the discretisation sweep needs a replica sampler".into()));
    }
    if settings.etas.is_empty() || settings.n_runs == 0 || settings.n_repeats == 0 || settings.refinement == 0 {
        return Err(Error::Config("sweep needs step sizes, runs, repeats and refinement".into()));
    }
    if settings.etas.iter().any(|e| e.is_nan() || *e <= 0.0) || settings.grad_noise_stds.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::Config("step sizes must be > 0 and noise stds >= 0".into()));
    }
    let replica = base.replica_config()?;
    let base_eta = base.learning_rate.low.value(0);
    let intensity = replica.intensity_times_lr / base_eta;
    let reference_eta = settings.etas.iter().copied().fold(f64::INFINITY, f64::min) / settings.refinement as f64;
    let plan = Plan {
        base,
        replica,
        temperature: base.pair_schedules()?.temperature,
        intensity,
        reference_eta,
        horizon: settings.horizon,
    };
    for &eta in &settings.etas {
        ratio(eta, reference_eta, "step size vs reference")?;
        ratio(settings.horizon, eta, "horizon vs step size")?;
    }

    let exact = EnergyModel::exact(base.model.mixture.clone());
    let with_gradient_noise = |std: f64| EnergyModel {
        gradient_noise: if std == 0.0 { NoiseSpec::None } else { NoiseSpec::Gaussian { std } },
        ..base.model.clone()
    };

    let mut cells: Vec<(f64, f64)> = vec![(reference_eta, 0.0)];
    for &eta in &settings.etas {
        for &g in &settings.grad_noise_stds {
            cells.push((eta, g));
        }
    }
    let mut distances = vec![Vec::with_capacity(settings.n_repeats); cells.len()];
    let n = settings.n_runs as u64;
    for repeat in 0..settings.n_repeats as u64 {
        let ids = repeat * n..(repeat + 1) * n;
        let reference = plan.cloud(&exact, reference_eta, ids.clone())?;
        for (c, &(eta, g)) in cells.iter().enumerate() {
            let cloud = plan.cloud(&with_gradient_noise(g), eta, ids.clone())?;
            distances[c].push(w2_between_samples(&cloud, &reference, settings.n_runs)?);
        }
    }

    let mut rows: Vec<SweepRow> = cells
        .iter()
        .zip(&distances)
        .map(|(&(eta, grad_noise_std), d)| {
            let (w2_mean, w2_stderr) = mean_and_stderr(d);
            SweepRow {
                eta,
                grad_noise_std,
                w2_mean,
                w2_stderr,
                n_runs: settings.n_runs,
            }
        })
        .collect();
    let floor = rows.remove(0);
    Ok(SweepTable {
        reference_eta,
        floor,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    fn small() -> SweepSettings {
        SweepSettings {
            n_runs: 24,
            n_repeats: 2,
            ..Default::default()
        }
    }

    #[test]
    fn floor_is_zero_for_noiseless_self_comparison() {
        let t = discretization_sweep(&preset("discretization").unwrap(), &small()).unwrap();
        assert_eq!(t.reference_eta, 0.0125 / 8.0);
        assert_eq!(t.floor.w2_mean, 0.0);
        assert_eq!(t.rows.len(), 16);
        assert!(t.rows.iter().all(|r| r.w2_mean.is_finite() && r.w2_mean >= 0.0));
        assert!(t.cell(0.1, 0.0).unwrap().w2_mean > 0.0);
    }

    #[test]
    fn incommensurate_horizon_rejected() {
        let s = SweepSettings {
            horizon: 3.01,
            ..small()
        };
        assert!(discretization_sweep(&preset("discretization").unwrap(), &s).is_err());
    }

    #[test]
    fn sgld_base_rejected() {
        assert!(discretization_sweep(&preset("gm1-sgld").unwrap(), &small()).is_err());
    }
}
