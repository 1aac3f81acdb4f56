use crate::channel::{ChannelSpec, RateSpec};
use crate::error::{Error, Result};
use crate::formulas::{gn_power_split, p_gn_phase1, FinalAmplitude};
use crate::pam::{make_constellation, MessageBlock, PamConstellation};
use crate::rng::RngStream;
use crate::scalar::Real;

use super::detector::FinalRoundDetector;
use super::{clamp_index, require_noiseless_feedback, AnalyticCodec, Scheme, Transmission};

/// Gallager-Nakiboğlu: uncoded PAM at power `P1`, Elias refinement of the
/// round-1 noise over rounds `2..D-1` at power `P2`, then the ternary index
/// error round, also at `P2`.
#[derive(Clone, Debug)]
pub struct GnCodec<T> {
    rate: RateSpec,
    channel: ChannelSpec<T>,
    pam: PamConstellation<T>,
    p1: T,
    p2: T,
    amp: FinalAmplitude,
    detector: FinalRoundDetector<T>,
}

impl<T: Real> GnCodec<T> {
    pub fn new(rate: RateSpec, channel: ChannelSpec<T>) -> Result<Self> {
        rate.require_rounds(3, "GN")?;
        require_noiseless_feedback(&channel, Scheme::Gn)?;
        let s2 = channel.sigma_ff_sq;
        if s2 > T::zero() {
            gn_power_split(rate.d, channel.snr())?;
        }
        // absolute powers: P1 + (D-1) P2 = D P and P1 = P2 + sigma^2
        let p2 = channel.power() - s2 / T::of_usize(rate.d);
        let p1 = p2 + s2;
        let hint = p_gn_phase1(rate.k, rate.d, channel.snr())?;
        let amp = FinalAmplitude::Consistent;
        Ok(Self {
            detector: FinalRoundDetector::new(hint, p2 / s2, p2, amp)?,
            pam: make_constellation(rate.k)?,
            rate,
            channel,
            p1,
            p2,
            amp,
        })
    }

    pub fn with_p1_hint(mut self, p1: T) -> Result<Self> {
        if !(p1 > T::zero() && p1 < T::one()) {
            return Err(Error::Domain(format!("p1 hint must lie in (0, 1), got {p1}")));
        }
        self.detector = FinalRoundDetector::new(p1, self.p2 / self.channel.sigma_ff_sq, self.p2, self.amp)?;
        Ok(self)
    }

    /// `(P1, P2)` in absolute power units.
    pub fn powers(&self) -> (T, T) {
        (self.p1, self.p2)
    }

    pub fn detector(&self) -> &FinalRoundDetector<T> {
        &self.detector
    }
}

impl<T: Real> AnalyticCodec<T> for GnCodec<T> {
    fn scheme(&self) -> Scheme {
        Scheme::Gn
    }

    fn rate(&self) -> RateSpec {
        self.rate
    }

    fn channel(&self) -> &ChannelSpec<T> {
        &self.channel
    }

    fn simulate_codeword(&self, msg: &MessageBlock, rng: &mut RngStream) -> Result<Transmission<T>> {
        let sigma = self.channel.sigma_ff();
        let s2 = self.channel.sigma_ff_sq;
        let theta = self.pam.bits_to_symbol(msg)?;
        let sp1 = self.p1.sqrt();
        let sp2 = self.p2.sqrt();

        let x1 = sp1 * theta;
        let n1 = sigma * rng.gaussian::<T>();
        let y1 = x1 + n1;
        let mut energy = x1 * x1;

        // u: what the receiver still does not know about n1; var_u its variance
        let mut u = n1;
        let mut var_u = s2;
        let mut n1_hat = T::zero();
        for _ in 2..self.rate.d {
            if var_u == T::zero() {
                rng.gaussian::<T>();
                continue;
            }
            let su = var_u.sqrt();
            let x = sp2 * u / su;
            let y = x + sigma * rng.gaussian::<T>();
            energy += x * x;
            let u_hat = su * sp2 * y / (self.p2 + s2);
            n1_hat += u_hat;
            u -= u_hat;
            var_u = var_u * s2 / (self.p2 + s2);
        }
        let m_hat = self.pam.nearest_symbol((y1 - n1_hat) / sp1)?;

        let idx_err = m_hat as i64 - msg.index() as i64;
        let x = self.detector.modulate(idx_err);
        let y = x + sigma * rng.gaussian::<T>();
        energy += x * x;
        let u_hat = self.detector.detect(y);
        Ok(Transmission {
            decoded: clamp_index(m_hat as i64 - u_hat, self.rate.messages()),
            energy,
            phase1: Some(m_hat),
            index_error: Some(idx_err),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::PbCodec;
    use crate::formulas::{p_gn_phase1, p_pam_at_snr};

    fn codec(db: f64) -> GnCodec<f64> {
        GnCodec::new(RateSpec::new(3, 9).unwrap(), ChannelSpec::noiseless_feedback(db).unwrap()).unwrap()
    }

    #[test]
    fn power_budget_is_split_exactly() {
        let c = codec(-1.0);
        let (p1, p2) = c.powers();
        assert!((p1 + 8.0 * p2 - 9.0).abs() < 1e-12);
        assert!((p1 - p2 - c.channel.sigma_ff_sq).abs() < 1e-12);
    }

    #[test]
    fn infeasible_split_rejected() {
        // S = 0.1 < 1/D
        let r = GnCodec::<f64>::new(RateSpec::new(3, 9).unwrap(), ChannelSpec::noiseless_feedback(-10.0).unwrap());
        assert!(matches!(r, Err(Error::InfeasibleSplit { .. })));
    }

    #[test]
    fn perfect_link_is_exact() {
        let c = codec(f64::INFINITY);
        let mut rng = RngStream::new(4, 4);
        for i in 0..8 {
            let msg = MessageBlock::from_index(i, 3).unwrap();
            assert_eq!(c.simulate_codeword(&msg, &mut rng).unwrap().decoded, i);
        }
    }

    #[test]
    fn phase1_error_close_to_formula() {
        let c = codec(-1.0);
        let n = 1_000_000u64;
        let mut errs = 0u64;
        for t in 0..n {
            let mut rng = RngStream::new(6, t);
            let msg = MessageBlock::from_index(rng.index(8), 3).unwrap();
            if c.simulate_codeword(&msg, &mut rng).unwrap().phase1 != Some(msg.index()) {
                errs += 1;
            }
        }
        let emp = errs as f64 / n as f64;
        let printed = p_gn_phase1(3, 9, c.channel.snr()).unwrap();
        assert!(emp / printed < 1.5 && printed / emp < 1.5, "{emp} vs {printed}");
        // the simulated split gives exactly S_eff = (1 + S - 1/D)^(D-1)
        let exact = p_pam_at_snr(3, (1.0 + c.channel.snr() - 1.0 / 9.0).powi(8)).unwrap();
        let se = (exact / n as f64).sqrt();
        assert!((emp - exact).abs() < 3.0 * se, "{emp} vs {exact}");
    }

    #[test]
    fn no_better_than_powerblast() {
        let gn = codec(-1.0);
        let pb = PbCodec::new(RateSpec::new(3, 9).unwrap(), ChannelSpec::noiseless_feedback(-1.0).unwrap()).unwrap();
        let n = 200_000u64;
        let count = |c: &dyn AnalyticCodec<f64>| {
            (0..n).filter(|&t| c.simulate_random(&mut RngStream::new(10, t)).unwrap()).count()
        };
        assert!(count(&gn) >= count(&pb));
    }

    #[test]
    fn energy_within_budget() {
        let c = codec(-1.0);
        let n = 1_000_000u64;
        let mut e = 0.0;
        for t in 0..n {
            let mut rng = RngStream::new(8, t);
            let msg = MessageBlock::from_index(rng.index(8), 3).unwrap();
            e += c.simulate_codeword(&msg, &mut rng).unwrap().energy;
        }
        assert!(e / n as f64 <= 9.0 * 1.02, "{}", e / n as f64);
    }
}
