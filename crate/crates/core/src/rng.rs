//! Named, seed-reproducible random streams.
//!
//! A stream is ChaCha8 keyed with `SHA-256("flexigen/stream/v1" || seed as
//! little-endian u64 || label bytes)`. Uniform reals take the top 53 bits of
//! one `u64` draw. Both choices are frozen: golden tests pin the first draws,
//! and changing either changes every generated dataset.
//!
//! Because each profile owns a stream derived from its own label, profiles can
//! be generated in any order (or in parallel) with identical bytes.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::config::{RoutineBucket, Weighted};

const DOMAIN: &[u8] = b"flexigen/stream/v1";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SampleError {
    #[error("cannot sample from an empty table")]
    Empty,
    #[error("weights must be non-negative and sum to 1 (sum = {sum})")]
    Unnormalized { sum: f64 },
    #[error("empty range: lo {lo} > hi {hi}")]
    Range { lo: f64, hi: f64 },
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
}

#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    label: String,
}

impl RngStream {
    pub fn derive(master_seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(master_seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        Self {
            rng: ChaCha8Rng::from_seed(key),
            label: label.to_string(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Index `i` with probability `weights[i]`. Consumes exactly one draw.
    pub fn sample_bucket(&mut self, weights: &[f64]) -> Result<usize, SampleError> {
        if weights.is_empty() {
            return Err(SampleError::Empty);
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > crate::config::SUM_EPSILON {
            return Err(SampleError::Unnormalized { sum });
        }
        let u = self.next_unit();
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return Ok(i);
            }
        }
        // u landed in the rounding gap above the cumulative sum
        Ok(weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1))
    }

    /// Picks a row of a probability table.
    pub fn pick<'t, B: Weighted>(&mut self, table: &'t [B]) -> Result<&'t B, SampleError> {
        let weights: Vec<f64> = table.iter().map(Weighted::probability).collect();
        Ok(&table[self.sample_bucket(&weights)?])
    }

    /// Uniform in `[lo, hi)`; `lo == hi` gives `lo`. Always consumes one draw.
    pub fn sample_uniform(&mut self, lo: f64, hi: f64) -> Result<f64, SampleError> {
        if !(lo <= hi) {
            return Err(SampleError::Range { lo, hi });
        }
        let u = self.next_unit();
        if lo == hi {
            return Ok(lo);
        }
        let x = lo + (hi - lo) * u;
        Ok(if x < hi { x } else { next_below(hi).max(lo) })
    }

    /// Whole minute uniformly drawn from the bucket's window.
    pub fn sample_time_in(&mut self, bucket: &RoutineBucket) -> Result<u32, SampleError> {
        let x = self.sample_uniform(f64::from(bucket.hour_min), f64::from(bucket.hour_max))?;
        let last = bucket.hour_max.saturating_sub(1).max(bucket.hour_min);
        Ok((x.floor() as u32).clamp(bucket.hour_min, last))
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool, SampleError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SampleError::Probability(p));
        }
        Ok(self.next_unit() < p)
    }
}

fn next_below(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else if x == 0.0 {
        -f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}
