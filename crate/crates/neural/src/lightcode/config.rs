use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::optim::AdamWConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    #[default]
    Noiseless,
    Noisy,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::Noiseless => "noiseless",
            FeedbackMode::Noisy => "noisy",
        }
    }
}

impl std::str::FromStr for FeedbackMode {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noiseless" => Ok(FeedbackMode::Noiseless),
            "noisy" => Ok(FeedbackMode::Noisy),
            other => Err(NnError::Config(format!("unknown feedback mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub k: usize,
    pub d: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub enc_mlp_layers: usize,
    pub dec_mlp_layers: usize,
    pub dec_hidden: usize,
    pub feedback_mode: FeedbackMode,
}

impl ArchitectureConfig {
    pub fn new(k: usize, d: usize, feedback_mode: FeedbackMode) -> Result<Self> {
        let arch = Self {
            k,
            d,
            hidden_dim: 32,
            feature_dim: 16,
            enc_mlp_layers: 1,
            dec_mlp_layers: 2,
            dec_hidden: 32,
            feedback_mode,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnError::Config(m));
        if !(1..=12).contains(&self.k) {
            return bad(format!("K must be in 1..=12, got {}", self.k));
        }
        if self.d < 2 {
            return bad(format!("D must be >= 2, got {}", self.d));
        }
        if self.hidden_dim == 0 || self.feature_dim == 0 || self.dec_hidden == 0 {
            return bad("layer widths must be >= 1".into());
        }
        if self.enc_mlp_layers == 0 || self.dec_mlp_layers == 0 {
            return bad("MLP heads need at least one layer".into());
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        1 << self.k
    }

    /// Feedback slots per round-history kind.
    pub fn slots(&self) -> usize {
        self.d - 1
    }

    /// `K + (D - 1)` noiseless, `K + 2 (D - 1)` noisy.
    pub fn input_dim(&self) -> usize {
        match self.feedback_mode {
            FeedbackMode::Noiseless => self.k + self.slots(),
            FeedbackMode::Noisy => self.k + 2 * self.slots(),
        }
    }

    /// Human-readable encoder input layout, stored in checkpoints.
    pub fn input_layout(&self) -> String {
        match self.feedback_mode {
            FeedbackMode::Noiseless => format!("u[{}];y[1..{}]", self.k, self.d - 1),
            FeedbackMode::Noisy => format!("u[{}];x[1..{}];n+nfb[1..{}]", self.k, self.d - 1, self.d - 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    /// Also accepted as `paper`.
    #[serde(alias = "paper")]
    Full,
}

impl std::str::FromStr for Preset {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" | "paper" => Ok(Preset::Full),
            other => Err(NnError::Config(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch: usize,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub lr0: f64,
    pub grad_clip: f64,
    pub train_snr_ff_db: f64,
    /// `None` for noiseless feedback.
    pub train_snr_fb_db: Option<f64>,
    pub seed: u64,
    pub adamw: AdamWConfig,
}

impl TrainConfig {
    /// Full-scale hyperparameters: `B = 1e5`, 120 epochs of 1000 batches.
    pub fn full(train_snr_ff_db: f64, train_snr_fb_db: Option<f64>, seed: u64) -> Self {
        Self {
            batch: 100_000,
            epochs: 120,
            batches_per_epoch: 1000,
            lr0: 1e-3,
            grad_clip: 0.5,
            train_snr_ff_db,
            train_snr_fb_db,
            seed,
            adamw: AdamWConfig::default(),
        }
    }

    /// `B = 1e4` and 2000 batches in total.
    pub fn desk(train_snr_ff_db: f64, train_snr_fb_db: Option<f64>, seed: u64) -> Self {
        Self {
            batch: 10_000,
            epochs: 20,
            batches_per_epoch: 100,
            ..Self::full(train_snr_ff_db, train_snr_fb_db, seed)
        }
    }

    pub fn preset(p: Preset, train_snr_ff_db: f64, train_snr_fb_db: Option<f64>, seed: u64) -> Self {
        match p {
            Preset::Desk => Self::desk(train_snr_ff_db, train_snr_fb_db, seed),
            Preset::Full => Self::full(train_snr_ff_db, train_snr_fb_db, seed),
        }
    }

    pub fn total_batches(&self) -> usize {
        self.epochs * self.batches_per_epoch
    }

    /// `lr0 = 0` is accepted and runs forward/backward passes without
    /// updating parameters.
    pub fn validate(&self) -> Result<()> {
        if self.batch < 2 || self.epochs == 0 || self.batches_per_epoch == 0 {
            return Err(NnError::Config("batch must be >= 2 and epochs, batches_per_epoch >= 1".into()));
        }
        if !(self.lr0 >= 0.0) || !(self.grad_clip > 0.0) {
            return Err(NnError::Config(format!(
                "need lr0 >= 0 and grad_clip > 0, got {} and {}",
                self.lr0, self.grad_clip
            )));
        }
        Ok(())
    }
}
