//! Forward/feedback AWGN channel parameters and the coding rate.
//!
//! The per-round transmit power budget is fixed at `P = 1`, so the linear
//! forward SNR is `S = 1 / sigma_ff^2`.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec<T> {
    pub snr_ff_db: f64,
    /// `None` means a noiseless feedback link.
    pub snr_fb_db: Option<f64>,
    pub sigma_ff_sq: T,
    pub sigma_fb_sq: T,
}

impl<T: Real> ChannelSpec<T> {
    /// Per-round transmit power budget.
    pub const POWER: f64 = 1.0;

    pub fn new(snr_ff_db: f64, snr_fb_db: Option<f64>) -> Result<Self> {
        if snr_ff_db.is_nan() {
            return config("forward SNR is NaN");
        }
        if let Some(fb) = snr_fb_db {
            if fb.is_nan() {
                return config("feedback SNR is NaN");
            }
        }
        let sigma_ff_sq = T::of(Self::POWER * db_to_linear(-snr_ff_db));
        let sigma_fb_sq = snr_fb_db.map_or(T::zero(), |db| T::of(Self::POWER * db_to_linear(-db)));
        Ok(Self {
            snr_ff_db,
            snr_fb_db,
            sigma_ff_sq,
            sigma_fb_sq,
        })
    }

    pub fn noiseless_feedback(snr_ff_db: f64) -> Result<Self> {
        Self::new(snr_ff_db, None)
    }

    pub fn power(&self) -> T {
        T::of(Self::POWER)
    }

    /// Linear forward SNR `S = P / sigma_ff^2` (infinite for a noiseless link).
    pub fn snr(&self) -> T {
        self.power() / self.sigma_ff_sq
    }

    pub fn is_feedback_noiseless(&self) -> bool {
        self.sigma_fb_sq == T::zero()
    }

    pub fn sigma_ff(&self) -> T {
        self.sigma_ff_sq.sqrt()
    }

    pub fn sigma_fb(&self) -> T {
        self.sigma_fb_sq.sqrt()
    }
}

/// `K` bits carried over `D` channel uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RateSpec {
    pub k: usize,
    pub d: usize,
}

impl RateSpec {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k == 0 {
            return config("K must be at least 1");
        }
        if d == 0 {
            return config("D must be at least 1");
        }
        Ok(Self { k, d })
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.d as f64
    }

    pub fn messages(&self) -> usize {
        1usize << self.k
    }

    pub fn require_rounds(&self, min: usize, scheme: &str) -> Result<()> {
        if self.d < min {
            return config(format!("{scheme} needs D >= {min}, got D = {}", self.d));
        }
        Ok(())
    }
}

/// `x + n` with `n ~ N(0, sigma_sq)`. A zero variance returns `x` untouched and
/// consumes no randomness.
pub fn awgn<T: Real>(x: T, sigma_sq: T, rng: &mut RngStream) -> Result<T> {
    if !(sigma_sq >= T::zero()) {
        return Err(Error::Config(format!("noise variance must be >= 0, got {sigma_sq}")));
    }
    if sigma_sq == T::zero() {
        return Ok(x);
    }
    Ok(x + sigma_sq.sqrt() * rng.gaussian::<T>())
}
