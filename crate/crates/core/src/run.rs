//! Scenario execution and artifact persistence.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptation::CorrectionEstimator;
use crate::config::{Sampler, ScenarioConfig};
use crate::diagnostics::{
    l2_density_error, swap_rate_summary, AnalyticQuantiles, Histogram, MetricRow, MetricTrace,
};
use crate::error::{Error, Result};
use crate::exchange::{step_pair, ReplicaPair, SwapDecision};
use crate::kernels::{sgld_step_with, ChainState};
use crate::rng::rng_streams;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SWAPS_FILE: &str = "swaps.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// A retained sample of the chain at the low temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRow {
    pub step: u64,
    pub position: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sampler: Sampler,
    pub iterations: u64,
    pub samples: u64,
    pub final_w2: Option<f64>,
    pub final_l2_density: Option<f64>,
    pub swap_attempts: u64,
    pub swap_accepts: u64,
    pub accept_fraction: f64,
    pub mean_capped_rate: f64,
    pub final_sigma_hat_sq: Option<f64>,
    pub wall_time_secs: f64,
    pub code_version: String,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub samples: Vec<SampleRow>,
    pub metrics: MetricTrace,
    pub swaps: Vec<SwapDecision>,
    pub summary: RunSummary,
}

impl RunOutcome {
    pub fn positions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.position).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub samples_path: PathBuf,
    pub metrics_path: PathBuf,
    pub swaps_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
}

/// Sorted view of a growing sample set, merged lazily.
struct SortedSamples {
    sorted: Vec<f64>,
    pending: Vec<f64>,
}

impl SortedSamples {
    fn new() -> Self {
        Self {
            sorted: Vec::new(),
            pending: Vec::new(),
        }
    }

    fn push(&mut self, x: f64) {
        self.pending.push(x);
    }

    fn view(&mut self) -> &[f64] {
        if !self.pending.is_empty() {
            self.pending.sort_by(f64::total_cmp);
            let mut merged = Vec::with_capacity(self.sorted.len() + self.pending.len());
            let (mut i, mut j) = (0, 0);
            while i < self.sorted.len() && j < self.pending.len() {
                if self.sorted[i] <= self.pending[j] {
                    merged.push(self.sorted[i]);
                    i += 1;
                } else {
                    merged.push(self.pending[j]);
                    j += 1;
                }
            }
            merged.extend_from_slice(&self.sorted[i..]);
            merged.extend_from_slice(&self.pending[j..]);
            self.sorted = merged;
            self.pending.clear();
        }
        &self.sorted
    }
}

struct Tracker<'a> {
    config: &'a ScenarioConfig,
    quantiles: AnalyticQuantiles,
    sorted: SortedSamples,
    histogram: Histogram,
    samples: Vec<SampleRow>,
    metrics: MetricTrace,
    accepts: u64,
    attempts: u64,
}

impl<'a> Tracker<'a> {
    fn new(config: &'a ScenarioConfig) -> Result<Self> {
        let mixture = &config.model.mixture;
        let (lo, hi) = mixture.span(6.0);
        Ok(Self {
            config,
            quantiles: AnalyticQuantiles::new(mixture, config.quantile_grid)?,
            sorted: SortedSamples::new(),
            histogram: Histogram::new(lo, hi, config.histogram_bins)?,
            samples: Vec::with_capacity(config.expected_sample_count() as usize),
            metrics: MetricTrace::default(),
            accepts: 0,
            attempts: 0,
        })
    }

    fn accept_fraction(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepts as f64 / self.attempts as f64
        }
    }

    fn current(&mut self) -> Result<Option<(f64, f64)>> {
        if self.samples.is_empty() {
            return Ok(None);
        }
        let w2 = self.quantiles.w2_sorted(self.sorted.view())?;
        // all mass outside the histogram span leaves L2 undefined
        let l2 = l2_density_error(&self.histogram, &self.config.model.mixture).unwrap_or(f64::NAN);
        Ok(Some((w2, l2)))
    }

    fn after_step(&mut self, step: u64, position: f64, temperature: f64, swap: Option<&SwapDecision>) -> Result<()> {
        if let Some(d) = swap {
            self.attempts += 1;
            self.accepts += u64::from(d.accepted);
        }
        if self.config.keeps_sample(step) {
            self.samples.push(SampleRow {
                step,
                position,
                temperature,
            });
            self.sorted.push(position);
            self.histogram.add(position);
        }
        if step.is_multiple_of(self.config.metrics_every) {
            if let Some((w2, l2_density)) = self.current()? {
                self.metrics.push(MetricRow {
                    step,
                    w2,
                    l2_density,
                    accept_fraction: self.accept_fraction(),
                })?;
            }
        }
        Ok(())
    }
}

/// Runs the configured sampler in memory.
pub fn simulate(config: &ScenarioConfig) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let model = &config.model;
    let mut streams = rng_streams(config.seed, config.run_id);
    let mut tracker = Tracker::new(config)?;
    let mut swaps = Vec::new();
    let mut final_sigma_hat_sq = None;

    match config.sampler {
        Sampler::Sgld => {
            let eta = config.learning_rate.low;
            let tau = config.sgld_temperature()?;
            let mut chain = ChainState::new(config.initial_positions[0]);
            let slot = &mut streams.slots[0];
            for _ in 0..config.iterations {
                let epoch = chain.step_index / config.steps_per_epoch;
                let t = tau.value(epoch);
                chain = sgld_step_with(chain, model, eta.value(epoch), t, &mut slot.kernel, &mut slot.gradient)?;
                tracker.after_step(chain.step_index, chain.position, t, None)?;
            }
        }
        Sampler::NaiveResgld | Sampler::AdaptiveResgld => {
            let schedules = config.pair_schedules()?;
            let [x_low, x_high] = config.initial_positions;
            let mut pair = ReplicaPair::new(config.replica_config()?, x_low, x_high)?;
            let mut estimator = match config.sampler {
                Sampler::AdaptiveResgld => Some(CorrectionEstimator::new(config.estimator_config()?)),
                _ => None,
            };
            swaps.reserve(config.iterations as usize);
            for _ in 0..config.iterations {
                let epoch = pair.step_index() / config.steps_per_epoch;
                let decision = step_pair(&mut pair, model, &schedules, estimator.as_mut(), &mut streams)?;
                let t = schedules.temperature[0].value(epoch);
                tracker.after_step(decision.step_index, pair.low().position, t, Some(&decision))?;
                swaps.push(decision);
            }
            final_sigma_hat_sq = estimator.map(|e| e.sigma_hat_sq);
        }
    }

    let final_metrics = tracker.current()?;
    let swap_summary = swap_rate_summary(&swaps);
    let summary = RunSummary {
        sampler: config.sampler,
        iterations: config.iterations,
        samples: tracker.samples.len() as u64,
        final_w2: final_metrics.map(|m| m.0),
        final_l2_density: final_metrics.map(|m| m.1).filter(|v| v.is_finite()),
        swap_attempts: swap_summary.attempts,
        swap_accepts: swap_summary.accepts,
        accept_fraction: swap_summary.accept_fraction,
        mean_capped_rate: swap_summary.mean_capped_rate,
        final_sigma_hat_sq,
        wall_time_secs: started.elapsed().as_secs_f64(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
    };
    Ok(RunOutcome {
        samples: tracker.samples,
        metrics: tracker.metrics,
        swaps,
        summary,
    })
}

/// Runs the scenario and writes its artifacts under `config.output_dir`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunArtifacts> {
    let outcome = simulate(config)?;
    write_artifacts(&outcome, &config.output_dir)
}

/// 17 significant digits, enough to reproduce every f64 bit.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_csv<T>(path: &Path, header: &str, rows: &[T], line: impl Fn(&T) -> String) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        writeln!(w, "{}", line(r)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let samples_path = dir.join(SAMPLES_FILE);
    let metrics_path = dir.join(METRICS_FILE);
    let swaps_path = dir.join(SWAPS_FILE);
    let summary_path = dir.join(SUMMARY_FILE);

    write_csv(&samples_path, "step,position,temperature", &outcome.samples, |s| {
        format!("{},{},{}", s.step, fmt_f64(s.position), fmt_f64(s.temperature))
    })?;
    write_csv(
        &metrics_path,
        "step,w2,l2_density,accept_fraction",
        outcome.metrics.rows(),
        |m| {
            format!(
                "{},{},{},{}",
                m.step,
                fmt_f64(m.w2),
                fmt_f64(m.l2_density),
                fmt_f64(m.accept_fraction)
            )
        },
    )?;
    write_csv(
        &swaps_path,
        "step,energy_low,energy_high,sigma_hat_sq,correction,rate,uniform,accepted",
        &outcome.swaps,
        |d| {
            format!(
                "{},{},{},{},{},{},{},{}",
                d.step_index,
                fmt_f64(d.stochastic_energy_low),
                fmt_f64(d.stochastic_energy_high),
                fmt_f64(d.sigma_hat_sq),
                fmt_f64(d.correction_used),
                fmt_f64(d.rate),
                fmt_f64(d.uniform_draw),
                u8::from(d.accepted)
            )
        },
    )?;
    let mut w = create(&summary_path)?;
    serde_json::to_writer_pretty(&mut w, &outcome.summary)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&summary_path, e))?;

    Ok(RunArtifacts {
        samples_path,
        metrics_path,
        swaps_path,
        summary_path,
        summary: outcome.summary.clone(),
    })
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    #[test]
    fn sorted_samples_merge() {
        let mut s = SortedSamples::new();
        for x in [3.0, 1.0, 2.0] {
            s.push(x);
        }
        assert_eq!(s.view(), &[1.0, 2.0, 3.0]);
        for x in [0.5, 2.5, 9.0] {
            s.push(x);
        }
        assert_eq!(s.view(), &[0.5, 1.0, 2.0, 2.5, 3.0, 9.0]);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -3.0e-300, 1.0 / 3.0, 12345.678, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn one_iteration_sgld() {
        let cfg = ScenarioConfig {
            iterations: 1,
            seed: 3,
            ..preset("gm1-sgld").unwrap()
        };
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert!(out.swaps.is_empty());
        assert!(out.metrics.rows().is_empty());
        assert!(out.summary.final_w2.is_some());
    }

    #[test]
    fn metrics_cadence_and_counts() {
        let cfg = ScenarioConfig {
            iterations: 5_500,
            burn_in: 1_500,
            thinning: 3,
            ..preset("gm1-resgld").unwrap()
        };
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.samples.len() as u64, cfg.expected_sample_count());
        assert_eq!(out.swaps.len(), 5_500);
        let steps: Vec<u64> = out.metrics.rows().iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![2000, 3000, 4000, 5000]);
        assert_eq!(out.summary.swap_attempts, 5_500);
        assert!(out.summary.swap_accepts <= out.summary.swap_attempts);
        assert!(out.summary.final_sigma_hat_sq.is_some());
    }

    #[test]
    fn samples_follow_low_temperature_label() {
        let cfg = ScenarioConfig {
            iterations: 3_000,
            ..preset("gm1-naive").unwrap()
        };
        let out = simulate(&cfg).unwrap();
        assert!(out.samples.iter().all(|s| s.temperature == 1.0));
        let mut tcfg = cfg.clone();
        tcfg.replica.as_mut().unwrap().representation = crate::exchange::Representation::TemperatureSwap;
        let tout = simulate(&tcfg).unwrap();
        assert_eq!(out.samples, tout.samples);
        assert_eq!(out.swaps, tout.swaps);
    }
}
