//! BLER of a saved LightCode model.

use fbcode_core::Detection;
use serde::{Deserialize, Serialize};

use super::simulate::{simulate, SimulateConfig, SweepOutput};
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub model: Option<String>,
    pub snr: String,
    pub fb: String,
    pub target_errors: u64,
    pub max_trials: u64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let s = SimulateConfig::default();
        Self {
            model: None,
            snr: s.snr,
            fb: s.fb,
            target_errors: s.target_errors,
            max_trials: s.max_trials,
            seed: s.seed,
        }
    }
}

pub fn evaluate(cfg: &EvalConfig, workers: usize) -> Result<SweepOutput> {
    let path = cfg.model.as_deref().ok_or_else(|| CliError::usage("eval needs --model"))?;
    let model = super::load(path)?;
    let sim = SimulateConfig {
        scheme: "lightcode".into(),
        k: model.arch().k,
        d: model.arch().d,
        snr: cfg.snr.clone(),
        fb: cfg.fb.clone(),
        target_errors: cfg.target_errors,
        max_trials: cfg.max_trials,
        seed: cfg.seed,
        detection: Detection::default(),
        model: cfg.model.clone(),
    };
    simulate(&sim, workers)
}
