use crate::channel::{ChannelSpec, RateSpec};
use crate::error::{Error, Result};
use crate::formulas::{p_pb_phase1, FinalAmplitude, FormulaVariant};
use crate::pam::MessageBlock;
use crate::rng::RngStream;
use crate::scalar::Real;

use super::detector::FinalRoundDetector;
use super::sk::SkCodec;
use super::{clamp_index, require_noiseless_feedback, AnalyticCodec, Detection, ResidualMode, Scheme, Transmission};

/// PowerBlast: `D - 1` SK rounds, an intermediate hard decision, then one
/// round carrying the PAM index error `U = M_hat - M` decoded by a ternary
/// MAP detector.
#[derive(Clone, Debug)]
pub struct PbCodec<T> {
    sk: SkCodec<T>,
    rate: RateSpec,
    amp: FinalAmplitude,
    detector: FinalRoundDetector<T>,
}

impl<T: Real> PbCodec<T> {
    /// Uses the LMMSE phase-1 formula as the detector's prior.
    pub fn new(rate: RateSpec, channel: ChannelSpec<T>) -> Result<Self> {
        rate.require_rounds(3, "PowerBlast")?;
        require_noiseless_feedback(&channel, Scheme::Pb)?;
        let p1 = p_pb_phase1(rate.k, rate.d, channel.snr(), FormulaVariant::Lmmse)?;
        let amp = FinalAmplitude::Consistent;
        Ok(Self {
            detector: FinalRoundDetector::new(p1, channel.snr(), channel.power(), amp)?,
            sk: SkCodec::new(rate, channel)?,
            rate,
            amp,
        })
    }

    /// Overrides the phase-1 error probability the final round is built for,
    /// e.g. with a Monte Carlo measurement.
    pub fn with_p1_hint(mut self, p1: T) -> Result<Self> {
        if !(p1 > T::zero() && p1 < T::one()) {
            return Err(Error::Domain(format!("p1 hint must lie in (0, 1), got {p1}")));
        }
        let ch = self.sk.channel();
        self.detector = FinalRoundDetector::new(p1, ch.snr(), ch.power(), self.amp)?;
        Ok(self)
    }

    pub fn with_amplitude(mut self, amp: FinalAmplitude) -> Result<Self> {
        self.amp = amp;
        let ch = self.sk.channel();
        self.detector = FinalRoundDetector::new(self.detector.p1, ch.snr(), ch.power(), amp)?;
        Ok(self)
    }

    pub fn with_detection(mut self, detection: Detection) -> Self {
        self.sk = self.sk.with_detection(detection);
        self
    }

    pub fn with_residuals(mut self, mode: ResidualMode) -> Result<Self> {
        self.sk = self.sk.with_residuals(mode)?;
        Ok(self)
    }

    pub fn detector(&self) -> &FinalRoundDetector<T> {
        &self.detector
    }

    /// The SK codec running the first `D - 1` rounds.
    pub fn sk(&self) -> &SkCodec<T> {
        &self.sk
    }
}

impl<T: Real> AnalyticCodec<T> for PbCodec<T> {
    fn scheme(&self) -> Scheme {
        Scheme::Pb
    }

    fn rate(&self) -> RateSpec {
        self.rate
    }

    fn channel(&self) -> &ChannelSpec<T> {
        self.sk.channel()
    }

    fn simulate_codeword(&self, msg: &MessageBlock, rng: &mut RngStream) -> Result<Transmission<T>> {
        let (m_hat, mut energy) = self.sk.run_rounds(msg, self.rate.d - 1, rng)?;
        let u = m_hat as i64 - msg.index() as i64;
        let x = self.detector.modulate(u);
        let y = x + self.channel().sigma_ff() * rng.gaussian::<T>();
        energy += x * x;
        let u_hat = self.detector.detect(y);
        Ok(Transmission {
            decoded: clamp_index(m_hat as i64 - u_hat, self.rate.messages()),
            energy,
            phase1: Some(m_hat),
            index_error: Some(u),
        })
    }
}
