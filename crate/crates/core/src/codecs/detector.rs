use crate::error::Result;
use crate::formulas::{map_gamma, FinalAmplitude};
use crate::scalar::Real;

/// MAP detector for the final round, where the transmitter sends the PAM
/// index error `U ∈ {-1, 0, +1}` with priors `{p1/2, 1-p1, p1/2}` at
/// amplitude `A sqrt(P)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinalRoundDetector<T> {
    /// Threshold in units of the round's noise-normalized amplitude.
    pub gamma: T,
    /// Decision boundary in received-signal units, `gamma * sqrt(P)`.
    pub tau: T,
    pub amplitude_a: T,
    pub p1: T,
    /// Transmit power of the final round.
    pub power: T,
}

impl<T: Real> FinalRoundDetector<T> {
    /// `snr` is the final round's linear SNR `power / sigma_ff^2`.
    pub fn new(p1: T, snr: T, power: T, amp: FinalAmplitude) -> Result<Self> {
        // keep the hint inside (0, 1) so a perfect channel still yields a finite boundary
        let p1 = p1.max(T::min_positive_value()).min(T::one() - T::epsilon());
        let gamma = map_gamma(p1, snr)?;
        Ok(Self {
            gamma,
            tau: gamma * power.sqrt(),
            amplitude_a: amp.amplitude(p1),
            p1,
            power,
        })
    }

    pub fn priors(&self) -> [T; 3] {
        let half = self.p1 / T::of(2.0);
        [half, T::one() - self.p1, half]
    }

    /// Transmitted value for index error `u`.
    pub fn modulate(&self, u: i64) -> T {
        if u == 0 {
            return T::zero();
        }
        T::of(u as f64) * self.amplitude_a * self.power.sqrt()
    }

    pub fn detect(&self, y: T) -> i64 {
        map_detect_ternary(y, self)
    }
}

/// `0` if `|y| <= tau`, otherwise `sign(y)`.
pub fn map_detect_ternary<T: Real>(y: T, det: &FinalRoundDetector<T>) -> i64 {
    if y.abs() <= det.tau {
        0
    } else if y > T::zero() {
        1
    } else {
        -1
    }
}
