//! Distances between sampler output and the analytic target, plus swap
//! statistics.

pub mod sweep;

use crate::error::{Error, Result};
use crate::exchange::SwapDecision;
use crate::target::MixtureSpec;

pub use sweep::{discretization_sweep, SweepRow, SweepSettings, SweepTable};

/// Quantile levels `(i - 0.5) / grid`.
pub fn quantile_levels(grid: usize) -> impl Iterator<Item = f64> {
    (1..=grid).map(move |i| (i as f64 - 0.5) / grid as f64)
}

/// Empirical quantile of sorted data, interpolating order statistics placed
/// at levels `(i - 0.5) / n`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * n as f64 - 0.5;
    if h <= 0.0 {
        return sorted[0];
    }
    if h >= (n - 1) as f64 {
        return sorted[n - 1];
    }
    let i = h.floor() as usize;
    let frac = h - i as f64;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

fn sort_samples(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Analytic quantiles on a fixed grid, reusable across many W2 evaluations.
#[derive(Debug, Clone)]
pub struct AnalyticQuantiles {
    levels: Vec<f64>,
    values: Vec<f64>,
}

impl AnalyticQuantiles {
    pub fn new(mixture: &MixtureSpec, grid: usize) -> Result<Self> {
        if grid < 100 {
            return Err(Error::Precondition(format!("quantile grid {grid} < 100")));
        }
        let levels: Vec<f64> = quantile_levels(grid).collect();
        let values = levels.iter().map(|&p| mixture.quantile(p)).collect();
        Ok(Self { levels, values })
    }

    /// W2 of already-sorted samples against the cached quantiles.
    pub fn w2_sorted(&self, sorted: &[f64]) -> Result<f64> {
        if sorted.is_empty() {
            return Err(Error::EmptySamples);
        }
        let sum: f64 = self
            .levels
            .iter()
            .zip(&self.values)
            .map(|(&p, &q)| (empirical_quantile(sorted, p) - q).powi(2))
            .sum();
        Ok((sum / self.levels.len() as f64).sqrt())
    }
}

/// One-dimensional 2-Wasserstein distance between the empirical law of
/// `samples` and `mixture`, via the quantile coupling on `grid` levels.
pub fn w2_empirical_vs_analytic(samples: &[f64], mixture: &MixtureSpec, grid: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    AnalyticQuantiles::new(mixture, grid)?.w2_sorted(&sort_samples(samples))
}

/// W2 between two empirical laws on `grid` quantile levels.
pub fn w2_between_samples(a: &[f64], b: &[f64], grid: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySamples);
    }
    let (a, b) = (sort_samples(a), sort_samples(b));
    let sum: f64 = quantile_levels(grid)
        .map(|p| (empirical_quantile(&a, p) - empirical_quantile(&b, p)).powi(2))
        .sum();
    Ok((sum / grid as f64).sqrt())
}

/// Fixed-width histogram over `[lo, hi)`; values outside are tallied apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// In-range observations; equals the sum of `counts`.
    pub total: u64,
    pub outside: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bin_count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || bin_count == 0 {
            return Err(Error::DegenerateHistogram(format!(
                "need lo < hi and at least one bin, got [{lo}, {hi}) with {bin_count} bins"
            )));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bin_count],
            total: 0,
            outside: 0,
        })
    }

    pub fn from_samples(lo: f64, hi: f64, bin_count: usize, samples: &[f64]) -> Result<Self> {
        let mut h = Self::new(lo, hi, bin_count)?;
        samples.iter().for_each(|&x| h.add(x));
        Ok(h)
    }

    /// Counts proportional to the mass `cdf` assigns each bin, scaled to
    /// `resolution` total observations.
    pub fn from_cdf(lo: f64, hi: f64, bin_count: usize, resolution: f64, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        let mut h = Self::new(lo, hi, bin_count)?;
        let w = h.bin_width();
        for i in 0..bin_count {
            let a = lo + i as f64 * w;
            let c = ((cdf(a + w) - cdf(a)) * resolution).round() as u64;
            h.counts[i] = c;
            h.total += c;
        }
        Ok(h)
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn add(&mut self, x: f64) {
        if !(x >= self.lo && x < self.hi) {
            self.outside += 1;
            return;
        }
        let i = (((x - self.lo) / self.bin_width()) as usize).min(self.counts.len() - 1);
        self.counts[i] += 1;
        self.total += 1;
    }

    /// Density heights normalised over the in-range mass.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        if self.total == 0 {
            return Err(Error::DegenerateHistogram("no observations inside [lo, hi)".into()));
        }
        let scale = 1.0 / (self.total as f64 * self.bin_width());
        Ok(self.counts.iter().map(|&c| c as f64 * scale).collect())
    }
}

/// `sqrt(sum_bins width * (height - pdf(center))^2)`.
pub fn l2_density_error(h: &Histogram, mixture: &MixtureSpec) -> Result<f64> {
    let heights = h.normalized()?;
    let w = h.bin_width();
    let sum: f64 = heights
        .iter()
        .enumerate()
        .map(|(i, &y)| w * (y - mixture.pdf(h.bin_center(i))).powi(2))
        .sum();
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapSummary {
    pub attempts: u64,
    pub accepts: u64,
    pub accept_fraction: f64,
    /// Mean of `min(1, rate)`.
    pub mean_capped_rate: f64,
}

pub fn swap_rate_summary(log: &[SwapDecision]) -> SwapSummary {
    let attempts = log.len() as u64;
    let accepts = log.iter().filter(|d| d.accepted).count() as u64;
    let (accept_fraction, mean_capped_rate) = if attempts == 0 {
        (0.0, 0.0)
    } else {
        let capped: f64 = log.iter().map(|d| d.rate.min(1.0)).sum();
        (accepts as f64 / attempts as f64, capped / attempts as f64)
    };
    SwapSummary {
        attempts,
        accepts,
        accept_fraction,
        mean_capped_rate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub step: u64,
    pub w2: f64,
    pub l2_density: f64,
    pub accept_fraction: f64,
}

/// Convergence trace with strictly increasing steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTrace {
    rows: Vec<MetricRow>,
}

impl MetricTrace {
    pub fn push(&mut self, row: MetricRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::Precondition(format!(
                    "metric step {} does not follow {}",
                    row.step, last.step
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }
}
