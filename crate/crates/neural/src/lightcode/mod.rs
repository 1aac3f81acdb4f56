//! LightCode: a light-weight neural feedback code. A shared encoder maps the
//! message and the feedback history to one channel symbol per round; the
//! decoder maps the `D` received symbols to logits over the `2^K` messages.

mod calibrate;
mod checkpoint;
mod config;
mod eval;
mod model;
mod train;

pub use calibrate::{calibrate, CalibrationReport, CALIBRATION_STREAMS};
pub use checkpoint::{from_bytes, load_model, save_model, to_bytes, Metadata, FORMAT_MAJOR, FORMAT_MINOR, MAGIC};
pub use config::{ArchitectureConfig, FeedbackMode, Preset, TrainConfig};
pub use eval::{codeword_energy, LightCodeLink, AUDIT_STREAMS};
pub use model::{
    argmax_rows, assemble_features, Bound, Calibration, ChannelDraw, FeatureExtractor, Inference, LightCodeModel,
    Linear, Norm, Unrolled, MIN_CALIBRATION_SAMPLES, OUTPUT_INIT_SCALE,
};
pub use train::{train, train_from, TrainReport};
