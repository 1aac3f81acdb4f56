//! Trains, calibrates and saves a LightCode model.

use std::path::{Path, PathBuf};

use fbcode_core::harness::fmt_g9;
use fbcode_core::ChannelSpec;
use fbcode_neural::lightcode::{
    calibrate, codeword_energy, save_model, train_from, ArchitectureConfig, FeedbackMode, LightCodeModel, Metadata,
    Preset, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::parse_fb;
use crate::error::{CliError, Result};
use crate::output::TOOL;

/// Codewords in the post-training energy audit.
pub const AUDIT_SAMPLES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCommandConfig {
    pub preset: Preset,
    pub k: usize,
    pub d: usize,
    pub snr_ff: f64,
    pub fb: String,
    pub seed: u64,
    pub batch: Option<usize>,
    pub epochs: Option<usize>,
    pub batches_per_epoch: Option<usize>,
    pub lr0: Option<f64>,
    pub grad_clip: Option<f64>,
    pub calib_samples: usize,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Desk,
            k: 3,
            d: 9,
            snr_ff: -1.0,
            fb: "noiseless".into(),
            seed: 1,
            batch: None,
            epochs: None,
            batches_per_epoch: None,
            lr0: None,
            grad_clip: None,
            calib_samples: 1_000_000,
        }
    }
}

impl TrainCommandConfig {
    pub fn train_config(&self) -> Result<TrainConfig> {
        let fb = parse_fb(&self.fb)?;
        let mut c = TrainConfig::preset(self.preset, self.snr_ff, fb, self.seed);
        c.batch = self.batch.unwrap_or(c.batch);
        c.epochs = self.epochs.unwrap_or(c.epochs);
        c.batches_per_epoch = self.batches_per_epoch.unwrap_or(c.batches_per_epoch);
        c.lr0 = self.lr0.unwrap_or(c.lr0);
        c.grad_clip = self.grad_clip.unwrap_or(c.grad_clip);
        c.validate()?;
        Ok(c)
    }
}

/// Outcome of a training run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub parameters: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub energy: f64,
    pub alpha: Vec<f64>,
    pub epoch_lr: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
}

/// `<checkpoint>.loss.csv`.
pub fn loss_csv_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".loss.csv");
    PathBuf::from(s)
}

pub fn run_training(
    cfg: &TrainCommandConfig,
    out: &Path,
    mut progress: impl FnMut(usize, f64, f64),
) -> Result<TrainSummary> {
    let tc = cfg.train_config()?;
    let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{}: directory does not exist", dir.display())));
    }
    let mode = if tc.train_snr_fb_db.is_some() { FeedbackMode::Noisy } else { FeedbackMode::Noiseless };
    let arch = ArchitectureConfig::new(cfg.k, cfg.d, mode)?;
    let model = LightCodeModel::<f32>::new(arch, tc.seed)?;
    let (mut model, report) = train_from(model, &tc, &mut progress)?;
    let final_loss = report.final_loss();
    if !final_loss.is_finite() {
        return Err(CliError::Numeric(format!("training diverged: final loss {final_loss}")));
    }
    let channel = ChannelSpec::<f32>::new(tc.train_snr_ff_db, tc.train_snr_fb_db)?;
    calibrate(&mut model, cfg.calib_samples, &channel, tc.seed)?;
    let energy = codeword_energy(&model, &channel, AUDIT_SAMPLES, tc.seed)?;

    let meta = Metadata::from([
        ("tool".to_string(), TOOL.to_string()),
        ("config".to_string(), serde_json::to_string(cfg).expect("config serializes")),
        ("seed".to_string(), tc.seed.to_string()),
        ("final_loss".to_string(), fmt_g9(final_loss)),
    ]);
    save_model(&model, out, &meta).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", out.display())),
        other => other,
    })?;
    let mut csv = String::from("epoch,lr,loss\n");
    for (e, (lr, loss)) in report.epoch_lr.iter().zip(&report.epoch_losses).enumerate() {
        csv.push_str(&format!("{e},{},{}\n", fmt_g9(*lr), fmt_g9(*loss)));
    }
    let loss_csv = loss_csv_path(out);
    std::fs::write(&loss_csv, csv).map_err(|e| CliError::Io(format!("{}: {e}", loss_csv.display())))?;

    Ok(TrainSummary {
        parameters: model.parameter_count(),
        initial_loss: report.initial_loss(),
        final_loss,
        energy,
        alpha: model.alpha().iter().map(|a| *a as f64).collect(),
        epoch_lr: report.epoch_lr,
        epoch_losses: report.epoch_losses,
        checkpoint: out.to_path_buf(),
        loss_csv,
    })
}
