//! Analytic one-dimensional Gaussian-mixture targets with injected
//! stochastic-energy and stochastic-gradient noise.

use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn log_normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (LN_2 + PI.ln())
}

/// Weights, means and standard deviations of a mixture density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureSpec {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl TryFrom<RawMixture> for MixtureSpec {
    type Error = Error;
    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureSpec::new(raw.weights, raw.means, raw.stds)
    }
}

impl From<MixtureSpec> for RawMixture {
    fn from(m: MixtureSpec) -> Self {
        RawMixture {
            weights: m.weights,
            means: m.means,
            stds: m.stds,
        }
    }
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMixture("at least one component required".into()));
        }
        if weights.len() != means.len() || weights.len() != stds.len() {
            return Err(Error::InvalidMixture(format!(
                "length mismatch: {} weights, {} means, {} stds",
                weights.len(),
                means.len(),
                stds.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMixture(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidMixture(format!("weights sum to {total}, not 1")));
        }
        if let Some(m) = means.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidMixture(format!("mean {m} is not finite")));
        }
        if let Some(s) = stds.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidMixture(format!("std {s} is not positive")));
        }
        Ok(Self {
            weights,
            means,
            stds,
        })
    }

    /// A single Gaussian component.
    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![std])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((&w, &m), &s)| (w, m, s))
    }

    /// Log of the mixture density, evaluated with a log-sum-exp.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .components()
            .map(|(w, m, s)| w.ln() + log_normal_pdf(x, m, s))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components()
            .map(|(w, m, s)| w * log_normal_pdf(x, m, s).exp())
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let c: f64 = self
            .components()
            .map(|(w, m, s)| w * std_normal_cdf((x - m) / s))
            .sum();
        c.clamp(0.0, 1.0)
    }

    /// Interval `[min mean - k * max std, max mean + k * max std]`.
    pub fn span(&self, k: f64) -> (f64, f64) {
        let lo = self.means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s = self.stds.iter().copied().fold(0.0, f64::max);
        (lo - k * s, hi + k * s)
    }

    /// Inverse CDF by bisection, run until the bracket stops shrinking
    /// (well below 1e-10 in x).
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.span(40.0);
        if p <= 0.0 {
            return lo;
        }
        if p >= 1.0 {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Exact draw: pick a component by weight, then sample it.
    pub fn sample<R: RandomSource + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = rng.uniform();
        let mut acc = 0.0;
        let last = self.weights.len() - 1;
        for (i, (w, m, s)) in self.components().enumerate() {
            acc += w;
            if u < acc || i == last {
                return m + s * rng.standard_normal();
            }
        }
        unreachable!("mixture has at least one component")
    }
}

/// Additive noise law for energy or gradient estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    None,
    Gaussian { std: f64 },
    StudentT { dof: f64, scale: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Gaussian { std } if std.is_finite() && std >= 0.0 => Ok(()),
            NoiseSpec::Gaussian { std } => {
                Err(Error::InvalidNoise(format!("gaussian std {std} must be >= 0")))
            }
            NoiseSpec::StudentT { dof, scale } => {
                if !(dof.is_finite() && dof > 2.0) {
                    return Err(Error::InvalidNoise(format!(
                        "student-t dof {dof} must exceed 2 for finite variance"
                    )));
                }
                if !(scale.is_finite() && scale >= 0.0) {
                    return Err(Error::InvalidNoise(format!(
                        "student-t scale {scale} must be >= 0"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { std } => std * std,
            NoiseSpec::StudentT { dof, scale } => scale * scale * dof / (dof - 2.0),
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// One noise draw. `None` consumes nothing from the stream.
    pub fn draw<R: RandomSource + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { std } => std * rng.standard_normal(),
            NoiseSpec::StudentT { dof, scale } => scale * rng.student_t(dof),
        }
    }
}

/// Energy `U(x) = -log p(x)` of a mixture, with the noise laws of its
/// stochastic estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub mixture: MixtureSpec,
    pub energy_noise: NoiseSpec,
    pub gradient_noise: NoiseSpec,
}

impl EnergyModel {
    pub fn new(mixture: MixtureSpec, energy_noise: NoiseSpec, gradient_noise: NoiseSpec) -> Result<Self> {
        let model = Self {
            mixture,
            energy_noise,
            gradient_noise,
        };
        model.validate()?;
        Ok(model)
    }

    /// Noiseless model.
    pub fn exact(mixture: MixtureSpec) -> Self {
        Self {
            mixture,
            energy_noise: NoiseSpec::None,
            gradient_noise: NoiseSpec::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.energy_noise.validate()?;
        self.gradient_noise.validate()
    }

    pub fn exact_energy(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinitePosition(x));
        }
        Ok(-self.mixture.log_pdf(x))
    }

    /// `dU/dx = sum_i r_i(x) (x - mu_i) / sigma_i^2` with component
    /// responsibilities `r_i`.
    pub fn exact_gradient(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinitePosition(x));
        }
        let m = &self.mixture;
        let logs: Vec<f64> = m
            .components()
            .map(|(w, mu, s)| w.ln() + log_normal_pdf(x, mu, s))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for ((_, mu, s), l) in m.components().zip(&logs) {
            let r = (l - max).exp();
            num += r * (x - mu) / (s * s);
            den += r;
        }
        Ok(num / den)
    }

    pub fn stochastic_energy<R: RandomSource + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        Ok(self.exact_energy(x)? + self.energy_noise.draw(rng))
    }

    pub fn stochastic_gradient<R: RandomSource + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        Ok(self.exact_gradient(x)? + self.gradient_noise.draw(rng))
    }
}

/// Mixture CDF `sum_i w_i Phi((x - mu_i) / sigma_i)`.
pub fn target_cdf(mixture: &MixtureSpec, x: f64) -> f64 {
    mixture.cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, Stream};

    fn u1() -> MixtureSpec {
        MixtureSpec::new(vec![0.4, 0.6], vec![-3.0, 2.0], vec![0.7, 0.5]).unwrap()
    }

    fn mc_stats(mut f: impl FnMut() -> f64, n: usize) -> (f64, f64) {
        let xs: Vec<f64> = (0..n).map(|_| f()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var)
    }

    #[test]
    fn rejects_bad_mixtures() {
        assert!(MixtureSpec::new(vec![], vec![], vec![]).is_err());
        assert!(MixtureSpec::new(vec![0.5, 0.6], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(MixtureSpec::new(vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(MixtureSpec::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(MixtureSpec::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn rejects_bad_noise() {
        assert!(NoiseSpec::Gaussian { std: -1.0 }.validate().is_err());
        assert!(NoiseSpec::StudentT { dof: 2.0, scale: 1.0 }.validate().is_err());
        assert!(NoiseSpec::StudentT { dof: 5.0, scale: -1.0 }.validate().is_err());
        assert!(NoiseSpec::StudentT { dof: 5.0, scale: 0.0 }.validate().is_ok());
    }

    #[test]
    fn standard_normal_energy_at_mode() {
        let m = EnergyModel::exact(MixtureSpec::normal(0.0, 1.0).unwrap());
        let expected = 0.5 * (2.0 * PI).ln();
        assert!((m.exact_energy(0.0).unwrap() - expected).abs() < 1e-15);
        assert!((m.exact_energy(0.0).unwrap() - 0.918939).abs() < 1e-6);
        assert!((m.exact_gradient(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn u1_energy_at_two() {
        // 0.6 * N(2; 2, 0.5^2) + 0.4 * N(2; -3, 0.7^2), the second term ~1e-23
        let density = 0.6 / (0.5 * (2.0 * PI).sqrt())
            + 0.4 / (0.7 * (2.0 * PI).sqrt()) * (-(5.0f64 / 0.7).powi(2) / 2.0).exp();
        let m = EnergyModel::exact(u1());
        assert!((m.exact_energy(2.0).unwrap() - (-density.ln())).abs() < 1e-12);
        assert!((m.exact_energy(2.0).unwrap() - 0.7366).abs() < 1e-4);
    }

    #[test]
    fn symmetric_mixture() {
        let m = EnergyModel::exact(
            MixtureSpec::new(vec![0.5, 0.5], vec![-1.5, 1.5], vec![0.4, 0.4]).unwrap(),
        );
        for x in [0.1, 0.7, 1.5, 3.0] {
            assert!((m.exact_energy(-x).unwrap() - m.exact_energy(x).unwrap()).abs() < 1e-12);
        }
        assert_eq!(m.exact_gradient(0.0).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_difference_at_two() {
        let m = EnergyModel::exact(u1());
        let h = 1e-6;
        let fd = (m.exact_energy(2.0 + h).unwrap() - m.exact_energy(2.0 - h).unwrap()) / (2.0 * h);
        let g = m.exact_gradient(2.0).unwrap();
        // U is locally quadratic at the mode: gradient is ~ (x - 2)/0.25 = 0
        assert!((g - fd).abs() < 1e-6);
        let x = 1.7;
        let fd = (m.exact_energy(x + h).unwrap() - m.exact_energy(x - h).unwrap()) / (2.0 * h);
        let g = m.exact_gradient(x).unwrap();
        assert!(((g - fd) / g).abs() < 1e-6);
    }

    #[test]
    fn non_finite_position_rejected() {
        let m = EnergyModel::exact(u1());
        assert!(m.exact_energy(f64::NAN).is_err());
        assert!(m.exact_gradient(f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_values() {
        let n = MixtureSpec::normal(0.0, 1.0).unwrap();
        assert_eq!(target_cdf(&n, 0.0), 0.5);
        assert_eq!(target_cdf(&n, f64::NEG_INFINITY), 0.0);
        assert_eq!(target_cdf(&n, f64::INFINITY), 1.0);
        assert!(target_cdf(&n, -40.0) < 1e-300);
        assert_eq!(target_cdf(&n, 40.0), 1.0);
        let expected = 0.4 * std_normal_cdf(5.0 / 0.7) + 0.3;
        assert!((target_cdf(&u1(), 2.0) - expected).abs() < 1e-15);
        assert!((target_cdf(&u1(), 2.0) - 0.7).abs() < 1e-4);
    }

    #[test]
    fn phi_reference_values() {
        // tabulated values of the standard normal CDF
        let table = [
            (-3.0, 1.349_898_031_630_094_6e-3),
            (-1.0, 0.158_655_253_931_457_05),
            (0.5, 0.691_462_461_274_013_1),
            (1.959_963_984_540_054, 0.975),
        ];
        for (z, p) in table {
            assert!((std_normal_cdf(z) / p - 1.0).abs() < 1e-14, "z = {z}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let m = u1();
        for p in [0.001, 0.2, 0.4, 0.5, 0.95, 0.999] {
            let x = m.quantile(p);
            assert!((m.cdf(x) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        for m in [
            u1(),
            MixtureSpec::new(vec![0.4, 0.6], vec![-6.0, 4.0], vec![0.7, 0.5]).unwrap(),
        ] {
            let (lo, hi) = m.span(10.0);
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            // composite Simpson
            let mut acc = m.pdf(lo) + m.pdf(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * m.pdf(lo + i as f64 * h);
            }
            assert!((acc * h / 3.0 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn no_noise_is_identity() {
        let m = EnergyModel::exact(u1());
        let mut rng = Stream::new(0, 0, Purpose::Auxiliary);
        for x in [-3.0, 0.0, 2.5] {
            assert_eq!(m.stochastic_energy(x, &mut rng).unwrap(), m.exact_energy(x).unwrap());
            assert_eq!(m.stochastic_gradient(x, &mut rng).unwrap(), m.exact_gradient(x).unwrap());
        }
    }

    #[test]
    fn gaussian_energy_noise_unbiased() {
        let m = EnergyModel::new(u1(), NoiseSpec::Gaussian { std: 2.0 }, NoiseSpec::None).unwrap();
        let mut rng = Stream::new(1, 0, Purpose::Auxiliary);
        let x = 1.3;
        let (mean, _) = mc_stats(|| m.stochastic_energy(x, &mut rng).unwrap(), 1_000_000);
        // 5 standard errors = 5 * 2 / 1000
        assert!((mean - m.exact_energy(x).unwrap()).abs() < 0.01);
    }

    #[test]
    fn student_t_energy_noise_variance() {
        let noise = NoiseSpec::StudentT { dof: 5.0, scale: 1.0 };
        let m = EnergyModel::new(u1(), noise, NoiseSpec::None).unwrap();
        let mut rng = Stream::new(2, 0, Purpose::Auxiliary);
        let (mean, var) = mc_stats(|| m.stochastic_energy(0.3, &mut rng).unwrap(), 1_000_000);
        assert!((var / (5.0 / 3.0) - 1.0).abs() < 0.05);
        assert!((mean - m.exact_energy(0.3).unwrap()).abs() < 5.0 * (5.0f64 / 3.0 / 1e6).sqrt());
    }

    #[test]
    fn gaussian_gradient_noise_unbiased_and_nondegenerate() {
        let m = EnergyModel::new(u1(), NoiseSpec::None, NoiseSpec::Gaussian { std: 1.0 }).unwrap();
        let mut rng = Stream::new(3, 0, Purpose::Auxiliary);
        let x = -2.4;
        let (mean, _) = mc_stats(|| m.stochastic_gradient(x, &mut rng).unwrap(), 1_000_000);
        assert!((mean - m.exact_gradient(x).unwrap()).abs() < 0.005);

        let mut a = Stream::new(3, 1, Purpose::Auxiliary);
        let mut b = Stream::new(3, 2, Purpose::Auxiliary);
        assert_ne!(
            m.stochastic_gradient(x, &mut a).unwrap(),
            m.stochastic_gradient(x, &mut b).unwrap()
        );
    }

    #[test]
    fn exact_sampler_matches_cdf() {
        let m = u1();
        let mut rng = Stream::new(4, 0, Purpose::Auxiliary);
        let n = 200_000;
        let below = (0..n).filter(|_| m.sample(&mut rng) < 0.0).count() as f64 / n as f64;
        assert!((below - m.cdf(0.0)).abs() < 5.0 * (0.24f64 / n as f64).sqrt());
    }
}
