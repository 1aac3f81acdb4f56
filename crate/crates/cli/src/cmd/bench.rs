//! Encoder/decoder throughput of LightCode or PowerBlast.

use fbcode_core::{ChannelSpec, PbCodec, RateSpec};
use fbcode_neural::analysis::{throughput_bench, LightCodeBench, PbBench, ThroughputReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// `lightcode` or `pb`.
    pub target: String,
    pub model: Option<String>,
    pub k: usize,
    pub d: usize,
    pub snr: f64,
    pub batch: usize,
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            target: "lightcode".into(),
            model: None,
            k: 3,
            d: 9,
            snr: -1.0,
            batch: 10_000,
            duration_s: 3.0,
            seed: 1,
        }
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<ThroughputReport> {
    match cfg.target.as_str() {
        "lightcode" => {
            let path = cfg.model.as_deref().ok_or_else(|| CliError::usage("bench lightcode needs --model"))?;
            let model = super::load(path)?;
            let mut b = LightCodeBench::new(&model, ChannelSpec::noiseless_feedback(cfg.snr)?)?;
            Ok(throughput_bench(&mut b, cfg.batch, cfg.duration_s, cfg.seed)?)
        }
        "pb" => {
            let codec = PbCodec::new(RateSpec::new(cfg.k, cfg.d)?, ChannelSpec::noiseless_feedback(cfg.snr)?)?;
            let mut b = PbBench::new(&codec);
            Ok(throughput_bench(&mut b, cfg.batch, cfg.duration_s, cfg.seed)?)
        }
        other => Err(CliError::usage(format!("unknown bench target '{other}'"))),
    }
}
