//! Analytic feedback codes over the AWGN channel: PAM mapping, closed-form
//! error probabilities, round-by-round SK/GN/PowerBlast simulators and a
//! deterministic parallel Monte Carlo harness.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codecs;
pub mod error;
pub mod formulas;
pub mod harness;
pub mod pam;
pub mod rng;
pub mod scalar;

pub use channel::{awgn, db_to_linear, linear_to_db, ChannelSpec, RateSpec};
pub use codecs::{
    AnalyticCodec, CodecSession, Detection, FinalRoundDetector, GnCodec, PbCodec, ResidualMode, Scheme, SkCodec,
    Transmission,
};
pub use error::{Error, Result};
pub use formulas::{FinalAmplitude, FormulaVariant};
pub use harness::{estimate_bler, sweep_bler, BlerEstimate, BlerRecord, BlerSource, StopRule};
pub use pam::{make_constellation, MessageBlock, PamConstellation};
pub use rng::RngStream;
pub use scalar::Real;

pub type Channel = ChannelSpec<f64>;
pub type Pam = PamConstellation<f64>;
pub type Sk = SkCodec<f64>;
pub type Gn = GnCodec<f64>;
pub type Pb = PbCodec<f64>;
pub type Detector = FinalRoundDetector<f64>;
