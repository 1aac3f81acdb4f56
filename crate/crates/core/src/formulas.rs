//! Closed-form block error probabilities for the SK, GN and PowerBlast
//! schemes, the MAP threshold of the ternary final round, and the
//! sub-block composition rule for longer blocks.
//!
//! All `S` arguments are linear forward SNRs.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::scalar::Real;

/// Which round-1 estimator the effective-SNR expression assumes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaVariant {
    /// Scaled-observation estimator of the closed-form analysis: `S (1+S)^(r-1)`.
    Mvue,
    /// Linear MMSE estimator actually run by the codecs: `(1+S)^r - 1`.
    #[default]
    Lmmse,
}

/// Nonzero-symbol amplitude `A` of the ternary final round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalAmplitude {
    /// `A = 1/sqrt(p)`: the amplitude that makes the final round unit power
    /// and for which the threshold below is the exact MAP boundary.
    #[default]
    Consistent,
    /// `A = 1/p`, as the miss term is usually written.
    AsPrinted,
}

impl FinalAmplitude {
    pub fn amplitude<T: Real>(self, p1: T) -> T {
        match self {
            FinalAmplitude::Consistent => p1.sqrt().recip(),
            FinalAmplitude::AsPrinted => p1.recip(),
        }
    }
}

/// `Q(x) = P(N(0,1) > x)`.
pub fn q_function<T: Real>(x: T) -> T {
    T::of(0.5) * (x / T::of(std::f64::consts::SQRT_2)).erfc()
}

/// SNR of the single AWGN observation equivalent to `rounds` feedback-refined
/// channel uses at per-use SNR `s`.
pub fn effective_snr<T: Real>(s: T, rounds: usize, variant: FormulaVariant) -> T {
    let r = T::of_usize(rounds);
    match variant {
        FormulaVariant::Mvue => s * ((r - T::one()) * s.ln_1p()).exp(),
        FormulaVariant::Lmmse => (r * s.ln_1p()).exp_m1(),
    }
}

fn check_prob<T: Real>(p: T, what: &str) -> Result<()> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Domain(format!("{what} must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// Symbol error probability of unit-power 2^K PAM at SNR `s_eff`:
/// `2 (1 - 2^-K) Q(sqrt(3 s_eff / (4^K - 1)))`.
pub fn p_pam_at_snr<T: Real>(k: usize, s_eff: T) -> Result<T> {
    if !(s_eff >= T::zero()) {
        return Err(Error::Domain(format!("effective SNR must be >= 0, got {s_eff}")));
    }
    if k == 0 || k > 30 {
        return config(format!("K must be in 1..=30, got {k}"));
    }
    let m = (1u64 << k) as f64;
    let lead = T::of(2.0 * (1.0 - 1.0 / m));
    let arg = (T::of(3.0) * s_eff / T::of(m * m - 1.0)).sqrt();
    Ok(lead * q_function(arg))
}

/// SK over `D` rounds.
pub fn p_sk<T: Real>(k: usize, d: usize, s: T, variant: FormulaVariant) -> Result<T> {
    if d < 2 {
        return config(format!("SK needs D >= 2, got {d}"));
    }
    p_pam_at_snr(k, effective_snr(s, d, variant))
}

/// Error probability of the GN first phase (round-1 PAM plus D-2 Elias rounds).
pub fn p_gn_phase1<T: Real>(k: usize, d: usize, s: T) -> Result<T> {
    if d < 3 {
        return config(format!("GN needs D >= 3, got {d}"));
    }
    let dm1 = T::of_usize(d - 1);
    let base = T::one() + s - dm1.recip();
    if !(base > T::zero()) {
        return Err(Error::Domain(format!("GN phase-1 base 1 + S - 1/(D-1) = {base} is not positive")));
    }
    p_pam_at_snr(k, base.powf(dm1))
}

/// MAP threshold (in units of the nonzero amplitude scale) separating `U = 0`
/// from `U = ±1` when `P(U = ±1) = p1/2`.
pub fn map_gamma<T: Real>(p1: T, s: T) -> Result<T> {
    check_prob(p1, "p1")?;
    let sp = p1.sqrt();
    let two = T::of(2.0);
    Ok((two * sp).recip() + sp / s * (two * (T::one() - p1) / p1).ln())
}

/// Error probability of the ternary MAP round given phase-1 error `p1`.
pub fn p_final_round<T: Real>(p1: T, s: T, amp: FinalAmplitude) -> Result<T> {
    check_prob(p1, "p1")?;
    if !(s > T::zero()) {
        return Err(Error::Domain(format!("S must be > 0, got {s}")));
    }
    let gamma = map_gamma(p1, s)?;
    let a = amp.amplitude(p1);
    let rs = s.sqrt();
    let two = T::of(2.0);
    Ok(two * (T::one() - p1) * q_function(gamma * rs) + p1 * q_function((a - gamma) * rs))
}

/// Phase-1 error of PowerBlast: D-1 rounds of SK.
pub fn p_pb_phase1<T: Real>(k: usize, d: usize, s: T, variant: FormulaVariant) -> Result<T> {
    if d < 3 {
        return config(format!("PowerBlast needs D >= 3, got {d}"));
    }
    p_pam_at_snr(k, effective_snr(s, d - 1, variant))
}

pub fn p_pb<T: Real>(k: usize, d: usize, s: T, variant: FormulaVariant, amp: FinalAmplitude) -> Result<T> {
    let p1 = p_pb_phase1(k, d, s, variant)?;
    final_or_zero(p1, s, amp)
}

pub fn p_gn<T: Real>(k: usize, d: usize, s: T, amp: FinalAmplitude) -> Result<T> {
    let p1 = p_gn_phase1(k, d, s)?;
    final_or_zero(p1, s, amp)
}

// p1 underflowing to exactly zero is the p1 -> 0 limit, where both terms vanish
fn final_or_zero<T: Real>(p1: T, s: T, amp: FinalAmplitude) -> Result<T> {
    if p1 == T::zero() {
        return Ok(T::zero());
    }
    p_final_round(p1, s, amp)
}

/// Block error rate of `l` independent sub-blocks each failing with `p_k`.
pub fn compose_block_bler<T: Real>(p_k: T, l: usize) -> Result<T> {
    if !(p_k >= T::zero() && p_k <= T::one()) {
        return Err(Error::Domain(format!("p_K must lie in [0, 1], got {p_k}")));
    }
    if l == 0 {
        return config("sub-block count must be >= 1");
    }
    if p_k == T::one() {
        return Ok(T::one());
    }
    Ok(-(T::of_usize(l) * (-p_k).ln_1p()).exp_m1())
}

/// GN round powers `(P1, P2)` in units of the forward noise variance:
/// `P1 + (D-1) P2 = D S` and `P1 = P2 + 1`.
pub fn gn_power_split<T: Real>(d: usize, s: T) -> Result<(T, T)> {
    if d < 2 {
        return config(format!("power split needs D >= 2, got {d}"));
    }
    let dd = T::of_usize(d);
    let p2 = s - dd.recip();
    if !(p2 > T::zero()) {
        return Err(Error::InfeasibleSplit {
            rounds: d,
            snr: s.as_f64(),
        });
    }
    Ok((p2 + T::one(), p2))
}
