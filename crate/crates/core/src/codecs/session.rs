use crate::channel::{ChannelSpec, RateSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;

use super::Scheme;

/// One channel use: transmitted and received value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundRecord<T> {
    pub x: T,
    pub y: T,
}

/// Per-codeword state of the SK-style refinement shared by SK and the first
/// phase of PowerBlast.
///
/// `residual_sigma_sq[i]` is `E[eps_{i+1}^2]`, the variance the transmitter
/// normalizes by in round `i + 2`; `estimate` is the receiver's current
/// LMMSE estimate of the transmitted amplitude `theta`.
#[derive(Clone, Debug)]
pub struct CodecSession<'a, T> {
    pub scheme: Scheme,
    pub rate: RateSpec,
    pub channel: &'a ChannelSpec<T>,
    pub theta: T,
    pub estimate: T,
    pub residual_sigma_sq: T,
    pub round: usize,
    /// Analog rounds this session will run before going terminal.
    pub rounds: usize,
    pub per_round_power: T,
    schedule: &'a [T],
    pub energy: T,
}

impl<'a, T: Real> CodecSession<'a, T> {
    /// `schedule[i]` must hold the residual variance after round `i + 1`, for
    /// at least `rounds - 1` entries.
    pub fn new(
        scheme: Scheme,
        rate: RateSpec,
        channel: &'a ChannelSpec<T>,
        theta: T,
        rounds: usize,
        schedule: &'a [T],
    ) -> Self {
        debug_assert!(schedule.len() + 1 >= rounds);
        Self {
            scheme,
            rate,
            channel,
            theta,
            estimate: T::zero(),
            residual_sigma_sq: T::one(),
            round: 0,
            rounds,
            per_round_power: channel.power(),
            schedule,
            energy: T::zero(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.round >= self.rounds
    }

    /// Runs the next round: uncoded PAM in round 1, then the scaled error of
    /// the previous estimate.
    pub fn advance(&mut self, rng: &mut RngStream) -> Result<RoundRecord<T>> {
        if self.is_terminal() {
            return Err(Error::Config(format!(
                "session already ran its {} rounds",
                self.rounds
            )));
        }
        let p = self.per_round_power;
        let sp = p.sqrt();
        let s2 = self.channel.sigma_ff_sq;
        let noise = self.channel.sigma_ff() * rng.gaussian::<T>();
        let rec = if self.round == 0 {
            let x = sp * self.theta;
            let y = x + noise;
            self.estimate = sp * y / (p + s2);
            self.residual_sigma_sq = self.schedule.first().copied().unwrap_or(s2 / (p + s2));
            RoundRecord { x, y }
        } else {
            let sigma_prev = self.residual_sigma_sq.sqrt();
            let eps = self.estimate - self.theta;
            if sigma_prev == T::zero() {
                // nothing left to refine on a perfect link
                RoundRecord { x: T::zero(), y: noise }
            } else {
                let x = sp * eps / sigma_prev;
                let y = x + noise;
                let eps_hat = sp * sigma_prev * y / (p + s2);
                self.estimate -= eps_hat;
                self.residual_sigma_sq = self
                    .schedule
                    .get(self.round)
                    .copied()
                    .unwrap_or_else(|| residual_variance_step(self.residual_sigma_sq, p / s2));
                RoundRecord { x, y }
            }
        };
        self.round += 1;
        self.energy += rec.x * rec.x;
        Ok(rec)
    }

    /// Estimate with the LMMSE shrinkage `1 - sigma^2` undone, which is what
    /// nearest-symbol (ML) detection should slice.
    pub fn unbiased_estimate(&self) -> T {
        let gain = T::one() - self.residual_sigma_sq;
        if gain > T::zero() {
            self.estimate / gain
        } else {
            self.estimate
        }
    }
}

/// `sigma_sq_prev / (1 + s_round)`: the residual variance after one more
/// LMMSE refinement at per-round SNR `s_round`.
pub fn residual_variance_step<T: Real>(sigma_sq_prev: T, s_round: T) -> T {
    sigma_sq_prev / (T::one() + s_round)
}

/// Analytic residual variances after rounds `1..=rounds` for unit-power
/// amplitudes.
pub fn analytic_schedule<T: Real>(channel: &ChannelSpec<T>, rounds: usize) -> Vec<T> {
    let p = channel.power();
    let s2 = channel.sigma_ff_sq;
    let mut out = Vec::with_capacity(rounds);
    let mut v = s2 / (p + s2);
    for _ in 0..rounds {
        out.push(v);
        v = residual_variance_step(v, p / s2);
    }
    out
}
