//! Laplace sampling, the Laplace mechanism and Report Noisy Max.
//!
//! All mechanisms take an explicit [`RandomSource`]. A source built with
//! `zero_noise` set returns the exact value from every mechanism, which is
//! what the baseline-equivalence tests rely on; callers still charge the
//! ledger as usual.

use rand::distributions::{Distribution, Open01};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale `b` of a centered Laplace distribution, strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScale(f64);

impl NoiseScale {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!(
                "noise scale must be positive and finite, got {scale}"
            )));
        }
        Ok(NoiseScale(scale))
    }

    /// Scale `sensitivity / budget` of the Laplace mechanism.
    pub fn for_mechanism(sensitivity: f64, budget: f64) -> Result<Self> {
        check_positive("sensitivity", sensitivity)?;
        check_positive("budget", budget)?;
        NoiseScale::new(sensitivity / budget)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Mixes a list of words into one 64-bit stream id (SplitMix64 finalizer).
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// A seeded, reproducible randomness stream.
///
/// `(seed, stream)` fully determines the sequence; distinct stream ids select
/// independent ChaCha20 streams under the same key.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    zero_noise: bool,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource {
            seed,
            stream,
            zero_noise: false,
            rng,
        }
    }

    pub fn with_zero_noise(mut self, zero_noise: bool) -> Self {
        self.zero_noise = zero_noise;
        self
    }

    pub fn zero_noise(&self) -> bool {
        self.zero_noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh source on another stream of the same seed, keeping the
    /// zero-noise flag.
    pub fn derive(&self, parts: &[u64]) -> RandomSource {
        let mut all = Vec::with_capacity(parts.len() + 1);
        all.push(self.stream);
        all.extend_from_slice(parts);
        RandomSource::new(self.seed, stream_id(&all)).with_zero_noise(self.zero_noise)
    }

    /// Uniform draw from the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// One draw from Lap(0, scale) by inverting the CDF
/// `F(x) = 1/2 + 1/2·sgn(x)·(1 − exp(−|x|/b))`.
pub fn sample_laplace(scale: NoiseScale, rng: &mut RandomSource) -> f64 {
    if rng.zero_noise {
        return 0.0;
    }
    let u = rng.open01();
    let b = scale.get();
    if u < 0.5 {
        b * (2.0 * u).ln()
    } else {
        -b * (2.0 * (1.0 - u)).ln()
    }
}

/// `true_value + Lap(sensitivity / budget)`. Charging is the caller's job.
pub fn laplace_mechanism(
    true_value: f64,
    sensitivity: f64,
    budget: f64,
    rng: &mut RandomSource,
) -> Result<f64> {
    let scale = NoiseScale::for_mechanism(sensitivity, budget)?;
    Ok(true_value + sample_laplace(scale, rng))
}

/// `t` with `Pr(|Y| ≥ t) = delta` for `Y ~ Lap(scale)`: `ln(1/delta)·scale`.
pub fn laplace_tail_threshold(scale: NoiseScale, delta: f64) -> Result<f64> {
    laplace_max_tail_threshold(scale, delta, 1)
}

/// Union bound over `draws` i.i.d. draws: `Pr(max |Y_i| ≥ ln(k/delta)·b) ≤ delta`.
pub fn laplace_max_tail_threshold(scale: NoiseScale, delta: f64, draws: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if draws == 0 {
        return Err(Error::invalid("draw count must be at least 1"));
    }
    Ok((draws as f64 / delta).ln() * scale.get())
}

/// Report Noisy Max: adds `Lap(2·sensitivity/budget)` to every score and
/// releases only the winning index and its noisy score. Ties go to the
/// lowest index.
pub fn report_noisy_max(
    scores: &[f64],
    sensitivity: f64,
    budget: f64,
    rng: &mut RandomSource,
) -> Result<(usize, f64)> {
    if scores.is_empty() {
        return Err(Error::invalid("report noisy max needs at least one score"));
    }
    let scale = NoiseScale::for_mechanism(2.0 * sensitivity, budget)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &s) in scores.iter().enumerate() {
        let noisy = s + sample_laplace(scale, rng);
        if noisy > best.1 {
            best = (i, noisy);
        }
    }
    Ok(best)
}
