//! Round-by-round simulators of the SK, GN and PowerBlast feedback schemes
//! over an AWGN forward channel with noiseless passive feedback.

mod detector;
mod gn;
mod pb;
mod session;
mod sk;

use serde::{Deserialize, Serialize};

pub use detector::{map_detect_ternary, FinalRoundDetector};
pub use gn::GnCodec;
pub use pb::PbCodec;
pub use session::{analytic_schedule, residual_variance_step, CodecSession, RoundRecord};
pub use sk::{empirical_schedule, SkCodec};

use crate::channel::{ChannelSpec, RateSpec};
use crate::error::{Error, Result};
use crate::pam::MessageBlock;
use crate::rng::RngStream;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sk,
    Gn,
    Pb,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Sk => "sk",
            Scheme::Gn => "gn",
            Scheme::Pb => "pb",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sk" => Ok(Scheme::Sk),
            "gn" => Ok(Scheme::Gn),
            "pb" | "powerblast" => Ok(Scheme::Pb),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// How the receiver slices its final analog estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detection {
    /// Undo the LMMSE shrinkage before nearest-symbol mapping (ML detection).
    #[default]
    Unbiased,
    /// Slice the shrunk LMMSE estimate directly.
    Raw,
}

/// Where the per-round residual variances used for normalization come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualMode {
    #[default]
    Analytic,
    /// Measured on a pilot population of this many codewords.
    Empirical { pilot: usize, seed: u64 },
}

/// Outcome of one simulated codeword.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transmission<T> {
    pub decoded: usize,
    /// Sum of squared transmitted values over all rounds.
    pub energy: T,
    /// Intermediate decision after the analog phase (GN/PB).
    pub phase1: Option<usize>,
    /// Index error `M_hat - M` sent in the final round (GN/PB).
    pub index_error: Option<i64>,
}

/// A feedback scheme that can be run one codeword at a time.
pub trait AnalyticCodec<T: Real>: Send + Sync {
    fn scheme(&self) -> Scheme;
    fn rate(&self) -> RateSpec;
    fn channel(&self) -> &ChannelSpec<T>;
    fn simulate_codeword(&self, msg: &MessageBlock, rng: &mut RngStream) -> Result<Transmission<T>>;

    /// Simulates a uniformly drawn message and reports whether it was
    /// decoded wrongly.
    fn simulate_random(&self, rng: &mut RngStream) -> Result<bool> {
        let rate = self.rate();
        let index = rng.index(rate.messages());
        let msg = MessageBlock::from_index(index, rate.k)?;
        Ok(self.simulate_codeword(&msg, rng)?.decoded != index)
    }
}

fn require_noiseless_feedback<T: Real>(channel: &ChannelSpec<T>, scheme: Scheme) -> Result<()> {
    if !channel.is_feedback_noiseless() {
        return Err(Error::Unsupported(format!(
            "{scheme} is defined for noiseless feedback only"
        )));
    }
    Ok(())
}

fn clamp_index(v: i64, m: usize) -> usize {
    v.clamp(0, m as i64 - 1) as usize
}
