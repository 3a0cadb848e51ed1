//! Univariate distributions, the standard normal CDF and seeded random streams.

use std::f64::consts::{LN_2, PI};

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf;

use crate::{Error, Result};

/// Log-density value used for points outside a distribution's support.
/// Adding anything finite to it leaves it unchanged, so a single
/// out-of-support prior term rejects the whole proposal.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// A univariate distribution used as a prior, an error model or a capacity model.
///
/// Construct through [`Distribution1D::uniform`], [`Distribution1D::normal`]
/// or [`Distribution1D::half_normal`] (or validate a deserialized value with
/// [`Distribution1D::validate`]) so that invalid parameters are rejected up
/// front instead of surfacing as NaN log-densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution1D {
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64 },
    HalfNormal { scale: f64 },
}

impl Distribution1D {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::Uniform { lo, hi }.validate()
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::Normal { mu, sigma }.validate()
    }

    pub fn half_normal(scale: f64) -> Result<Self> {
        Self::HalfNormal { scale }.validate()
    }

    /// Checks the parameter invariants and returns the distribution unchanged.
    pub fn validate(self) -> Result<Self> {
        match self {
            Self::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform requires finite lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            Self::Normal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "normal requires finite mu and sigma > 0, got ({mu}, {sigma})"
                    )));
                }
            }
            Self::HalfNormal { scale } => {
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "half-normal requires scale > 0, got {scale}"
                    )));
                }
            }
        }
        Ok(self)
    }

    /// Natural-log density; [`LOG_ZERO`] outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => {
                if x < lo || x > hi {
                    LOG_ZERO
                } else {
                    -(hi - lo).ln()
                }
            }
            Self::Normal { mu, sigma } => {
                let z = (x - mu) / sigma;
                -HALF_LN_TWO_PI - sigma.ln() - 0.5 * z * z
            }
            Self::HalfNormal { scale } => {
                if x < 0.0 {
                    LOG_ZERO
                } else {
                    let z = x / scale;
                    LN_2 - HALF_LN_TWO_PI - scale.ln() - 0.5 * z * z
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Self::Uniform { lo, hi } => x >= lo && x <= hi,
            Self::Normal { .. } => x.is_finite(),
            Self::HalfNormal { .. } => x >= 0.0,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => {
                let u = rng.uniform01();
                // u is in [0, 1); the clamp guards against lo + (hi - lo) rounding past hi
                (lo + (hi - lo) * u).min(hi)
            }
            Self::Normal { mu, sigma } => mu + sigma * rng.standard_normal(),
            Self::HalfNormal { scale } => (scale * rng.standard_normal()).abs(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Normal { mu, .. } => mu,
            Self::HalfNormal { scale } => scale * (2.0 / PI).sqrt(),
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Self::Normal { sigma, .. } => sigma,
            Self::HalfNormal { scale } => scale * (1.0 - 2.0 / PI).sqrt(),
        }
    }
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_cdf`] for `p` in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let z = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Newton step against the accurate CDF
    let density = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    if density > 0.0 {
        z - (normal_cdf(z) - p) / density
    } else {
        z
    }
}

/// Seeded random stream. Equal `(seed, stream_id)` pairs give bitwise-equal
/// sequences; different stream ids select disjoint ChaCha streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform01(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be nonempty");
        ((self.uniform01() * n as f64) as usize).min(n - 1)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
