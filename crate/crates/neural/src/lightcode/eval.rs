use fbcode_core::{BlerSource, ChannelSpec, RateSpec};

use super::model::{ChannelDraw, LightCodeModel};
use crate::error::{NnError, Result};
use crate::tensor::Scalar;

const CHUNK: usize = 8192;
/// Stream offset of the energy audit.
pub const AUDIT_STREAMS: u64 = 1 << 61;

/// A calibrated model on a concrete channel, usable by the Monte Carlo
/// harness.
#[derive(Clone, Debug)]
pub struct LightCodeLink<'a, T> {
    model: &'a LightCodeModel<T>,
    channel: ChannelSpec<T>,
}

impl<'a, T: Scalar> LightCodeLink<'a, T> {
    pub fn new(model: &'a LightCodeModel<T>, channel: ChannelSpec<T>) -> Result<Self> {
        if model.calibration().is_none() {
            return Err(NnError::State("evaluation needs a calibrated model".into()));
        }
        ChannelDraw::trials(model.arch(), &channel, 0, 0, 0, 0)?;
        Ok(Self { model, channel })
    }

    pub fn model(&self) -> &LightCodeModel<T> {
        self.model
    }

    pub fn channel(&self) -> &ChannelSpec<T> {
        &self.channel
    }

    /// Block errors among trials `first..first + n`.
    pub fn errors(&self, seed: u64, base: u64, first: u64, n: u64) -> Result<u64> {
        let mut errs = 0;
        let mut t = first;
        while t < first + n {
            let m = (first + n - t).min(CHUNK as u64);
            let draw = ChannelDraw::trials(self.model.arch(), &self.channel, seed, base, t, m as usize)?;
            let out = self.model.infer(&draw)?;
            errs += out.decisions().iter().zip(&draw.msgs).filter(|(a, b)| a != b).count() as u64;
            t += m;
        }
        Ok(errs)
    }
}

fn to_core(e: NnError) -> fbcode_core::Error {
    match e {
        NnError::Core(e) => e,
        NnError::Numeric(m) => fbcode_core::Error::Numeric(m),
        other => fbcode_core::Error::Config(other.to_string()),
    }
}

impl<T: Scalar> BlerSource for LightCodeLink<'_, T> {
    fn label(&self) -> String {
        "lightcode".into()
    }

    fn rate(&self) -> RateSpec {
        let a = self.model.arch();
        RateSpec::new(a.k, a.d).expect("architecture was validated")
    }

    fn snr_ff_db(&self) -> f64 {
        self.channel.snr_ff_db
    }

    fn snr_fb_db(&self) -> Option<f64> {
        self.channel.snr_fb_db
    }

    fn count_errors(&self, seed: u64, stream_base: u64, first: u64, n: u64) -> fbcode_core::Result<u64> {
        self.errors(seed, stream_base, first, n).map_err(to_core)
    }
}

/// Mean `sum_i x_i^2` per codeword over `n` calibrated codewords.
pub fn codeword_energy<T: Scalar>(model: &LightCodeModel<T>, channel: &ChannelSpec<T>, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(NnError::Config("energy audit needs n >= 1".into()));
    }
    let mut total = 0.0f64;
    for start in (0..n).step_by(CHUNK) {
        let m = CHUNK.min(n - start);
        let draw = ChannelDraw::trials(model.arch(), channel, seed, AUDIT_STREAMS, start as u64, m)?;
        let out = model.infer(&draw)?;
        total += out.x.data().iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>();
    }
    Ok(total / n as f64)
}
