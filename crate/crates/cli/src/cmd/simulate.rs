//! Monte Carlo BLER sweeps of the analytic codecs and of trained models.

use fbcode_core::harness::sweep_bler;
use fbcode_core::{
    BlerEstimate, BlerRecord, BlerSource, ChannelSpec, Detection, GnCodec, PbCodec, RateSpec, SkCodec, StopRule,
};
use fbcode_neural::lightcode::LightCodeLink;
use serde::{Deserialize, Serialize};

use crate::config::{parse_fb, parse_grid};
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// `sk`, `gn`, `pb` or `lightcode`.
    pub scheme: String,
    pub k: usize,
    pub d: usize,
    pub snr: String,
    /// `noiseless` or a feedback SNR in dB.
    pub fb: String,
    pub target_errors: u64,
    pub max_trials: u64,
    pub seed: u64,
    pub detection: Detection,
    /// Checkpoint for `lightcode`.
    pub model: Option<String>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            scheme: "pb".into(),
            k: 3,
            d: 9,
            snr: "-1".into(),
            fb: "noiseless".into(),
            target_errors: 100,
            max_trials: 10_000_000,
            seed: 1,
            detection: Detection::Unbiased,
            model: None,
        }
    }
}

/// Output rows of a sweep, in grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<BlerRecord>,
    pub estimates: Vec<BlerEstimate>,
}

impl SweepOutput {
    fn from_sweep<S: BlerSource>(points: Vec<(f64, BlerEstimate)>, make: impl Fn(f64) -> Result<S>) -> Result<Self> {
        let mut records = Vec::with_capacity(points.len());
        let mut estimates = Vec::with_capacity(points.len());
        for (db, est) in points {
            records.push(BlerRecord::new(&make(db)?, &est));
            estimates.push(est);
        }
        Ok(Self { records, estimates })
    }

    pub fn unresolved(&self) -> usize {
        self.records.iter().filter(|r| !r.resolved()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", BlerRecord::HEADER);
        for r in &self.records {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }

    pub fn to_json_lines(&self) -> String {
        self.records.iter().map(|r| r.to_json() + "\n").collect()
    }
}

fn core_err(e: impl std::fmt::Display) -> fbcode_core::Error {
    fbcode_core::Error::Config(e.to_string())
}

pub fn simulate(cfg: &SimulateConfig, workers: usize) -> Result<SweepOutput> {
    let grid = parse_grid(&cfg.snr)?;
    let fb = parse_fb(&cfg.fb)?;
    let stop = StopRule::new(cfg.max_trials, cfg.target_errors)?;
    let rate = RateSpec::new(cfg.k, cfg.d)?;
    let det = cfg.detection;
    macro_rules! analytic {
        ($make:expr) => {{
            let make = $make;
            let points = sweep_bler(&make, &grid, stop, cfg.seed, workers)?;
            SweepOutput::from_sweep(points, |db| make(db).map_err(CliError::from))
        }};
    }
    match cfg.scheme.as_str() {
        "sk" => analytic!(|db| SkCodec::new(rate, ChannelSpec::<f64>::new(db, fb)?).map(|c| c.with_detection(det))),
        "gn" => analytic!(|db| GnCodec::new(rate, ChannelSpec::<f64>::new(db, fb)?)),
        "pb" => analytic!(|db| PbCodec::new(rate, ChannelSpec::<f64>::new(db, fb)?).map(|c| c.with_detection(det))),
        "lightcode" => {
            let path = cfg
                .model
                .as_deref()
                .ok_or_else(|| CliError::usage("scheme lightcode needs --model"))?;
            let model = super::load(path)?;
            let arch = model.arch();
            if (arch.k, arch.d) != (cfg.k, cfg.d) {
                return Err(CliError::usage(format!(
                    "model is {}/{} but the config asks for {}/{}",
                    arch.k, arch.d, cfg.k, cfg.d
                )));
            }
            let make = |db: f64| {
                let ch = ChannelSpec::<f32>::new(db, fb)?;
                LightCodeLink::new(&model, ch).map_err(core_err)
            };
            // surface model/channel mismatches with their own exit codes
            for &db in &grid {
                LightCodeLink::new(&model, ChannelSpec::<f32>::new(db, fb)?)?;
            }
            let points = sweep_bler(make, &grid, stop, cfg.seed, workers)?;
            SweepOutput::from_sweep(points, |db| make(db).map_err(CliError::from))
        }
        other => Err(CliError::usage(format!("unknown scheme '{other}'"))),
    }
}

/// Warning comment for estimates with too few errors.
pub fn unresolved_note(out: &SweepOutput) -> Option<String> {
    let n = out.unresolved();
    (n > 0).then(|| format!("# warning: {n} estimate(s) unresolved (fewer than 10 errors)\n"))
}
