//! Reproducible random streams.
//!
//! Every random quantity a run consumes comes from its own ChaCha stream.
//! The 256-bit key is derived from `(seed, run_id)` and the ChaCha stream id
//! is the [`Purpose`] tag, so streams for different purposes never overlap
//! and any one of them can be regenerated in isolation.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Source of the primitive draws used by samplers.
pub trait RandomSource {
    fn standard_normal(&mut self) -> f64;

    /// Uniform on `[0, 1)`.
    fn uniform(&mut self) -> f64;

    fn chi_squared(&mut self, dof: f64) -> f64;

    /// Student-t with `dof` degrees of freedom as `Z / sqrt(V / dof)`.
    fn student_t(&mut self, dof: f64) -> f64 {
        let z = self.standard_normal();
        let v = self.chi_squared(dof);
        z / (v / dof).sqrt()
    }
}

impl<R: RandomSource + ?Sized> RandomSource for &mut R {
    fn standard_normal(&mut self) -> f64 {
        (**self).standard_normal()
    }
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }
    fn chi_squared(&mut self, dof: f64) -> f64 {
        (**self).chi_squared(dof)
    }
}

/// What a stream is used for. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    /// Langevin noise for whichever chain currently holds the low temperature.
    KernelLow = 1,
    KernelHigh = 2,
    /// Gradient-estimate noise, per temperature slot.
    GradientLow = 3,
    GradientHigh = 4,
    /// Energy-estimate noise for the swap test, per temperature slot.
    EnergyLow = 5,
    EnergyHigh = 6,
    /// Replicate energies feeding the variance estimator.
    Replicates = 7,
    SwapUniform = 8,
    /// Free-form draws (reference samples, Monte Carlo checks).
    Auxiliary = 9,
}

/// A single counter-based stream.
#[derive(Debug, Clone)]
pub struct Stream(ChaCha12Rng);

impl Stream {
    pub fn new(seed: u64, run_id: u64, purpose: Purpose) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&run_id.to_le_bytes());
        key[16..24].copy_from_slice(b"resgld\0\0");
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(purpose as u64);
        Stream(rng)
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

impl RandomSource for Stream {
    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }
    fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
    fn chi_squared(&mut self, dof: f64) -> f64 {
        // dof is validated by NoiseSpec before any draw
        ChiSquared::new(dof)
            .expect("chi-squared degrees of freedom must be positive")
            .sample(&mut self.0)
    }
}

/// Streams owned by one temperature slot.
#[derive(Debug, Clone)]
pub struct SlotStreams<R> {
    pub kernel: R,
    pub gradient: R,
    pub energy: R,
}

/// All streams of one run. Slot 0 belongs to the low temperature, slot 1 to
/// the high temperature, independent of which chain currently holds it.
#[derive(Debug, Clone)]
pub struct RunStreams<R> {
    pub slots: [SlotStreams<R>; 2],
    pub replicates: R,
    pub swap: R,
}

impl<R> RunStreams<R> {
    pub fn map<S>(self, mut f: impl FnMut(R) -> S) -> RunStreams<S> {
        let [low, high] = self.slots;
        let mut slot = |s: SlotStreams<R>| SlotStreams {
            kernel: f(s.kernel),
            gradient: f(s.gradient),
            energy: f(s.energy),
        };
        let slots = [slot(low), slot(high)];
        RunStreams {
            slots,
            replicates: f(self.replicates),
            swap: f(self.swap),
        }
    }
}

/// Derives the per-purpose streams of run `run_id` under `seed`.
pub fn rng_streams(seed: u64, run_id: u64) -> RunStreams<Stream> {
    let s = |p| Stream::new(seed, run_id, p);
    RunStreams {
        slots: [
            SlotStreams {
                kernel: s(Purpose::KernelLow),
                gradient: s(Purpose::GradientLow),
                energy: s(Purpose::EnergyLow),
            },
            SlotStreams {
                kernel: s(Purpose::KernelHigh),
                gradient: s(Purpose::GradientHigh),
                energy: s(Purpose::EnergyHigh),
            },
        ],
        replicates: s(Purpose::Replicates),
        swap: s(Purpose::SwapUniform),
    }
}

/// Collapses `block` consecutive draws of an inner source into one draw with
/// the same marginal law.
///
/// A normal is the scaled sum of `block` inner normals, so a step of size
/// `block * h` sees exactly the Brownian increment of `block` steps of size
/// `h`. A uniform is `1 - (1 - min u_j)^block`: it falls below `p` roughly
/// when one of the inner uniforms falls below `p / block`, which couples a
/// coarse swap test to the fine ones. Chi-square draws are passed through.
#[derive(Debug, Clone)]
pub struct BlockAggregate<R> {
    inner: R,
    block: usize,
}

impl<R> BlockAggregate<R> {
    pub fn new(inner: R, block: usize) -> Self {
        assert!(block >= 1, "block size must be at least 1");
        Self { inner, block }
    }
}

impl<R: RandomSource> RandomSource for BlockAggregate<R> {
    fn standard_normal(&mut self) -> f64 {
        if self.block == 1 {
            return self.inner.standard_normal();
        }
        let sum: f64 = (0..self.block).map(|_| self.inner.standard_normal()).sum();
        sum / (self.block as f64).sqrt()
    }

    fn uniform(&mut self) -> f64 {
        if self.block == 1 {
            return self.inner.uniform();
        }
        let min = (0..self.block)
            .map(|_| self.inner.uniform())
            .fold(1.0_f64, f64::min);
        1.0 - (1.0 - min).powi(self.block as i32)
    }

    fn chi_squared(&mut self, dof: f64) -> f64 {
        self.inner.chi_squared(dof)
    }
}
