use fbcode_core::{ChannelSpec, RngStream};
use serde::Serialize;

use super::config::{ArchitectureConfig, TrainConfig};
use super::model::{ChannelDraw, LightCodeModel, Norm};
use crate::error::{NnError, Result};
use crate::graph::Graph;
use crate::optim::{clip_grad_value, lr_lambda_schedule, AdamW};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    /// Cross-entropy of every batch, in order.
    pub batch_losses: Vec<f64>,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub epoch_lr: Vec<f64>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.batch_losses.first().copied().unwrap_or(f64::NAN)
    }

    /// Mean loss of the last epoch.
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Trains a freshly initialized model.
pub fn train<T: Scalar>(arch: ArchitectureConfig, cfg: &TrainConfig) -> Result<(LightCodeModel<T>, TrainReport)> {
    let model = LightCodeModel::new(arch, cfg.seed)?;
    train_from(model, cfg, |_, _, _| {})
}

/// Continues training `model`. Batch `s` draws its messages and noise from
/// `RngStream::new(cfg.seed, s)`; `on_epoch(epoch, lr, mean_loss)` runs after
/// every epoch. Calibration is cleared, since the encoder changes.
pub fn train_from<T: Scalar>(
    mut model: LightCodeModel<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(LightCodeModel<T>, TrainReport)> {
    cfg.validate()?;
    let arch = *model.arch();
    let channel = ChannelSpec::<T>::new(cfg.train_snr_ff_db, cfg.train_snr_fb_db)?;
    let mut opt = AdamW::new(cfg.adamw, model.params());
    let mut report = TrainReport::default();
    model.clear_calibration();
    for epoch in 0..cfg.epochs {
        let lr = lr_lambda_schedule(epoch, cfg.epochs, cfg.lr0);
        let mut sum = 0.0;
        for b in 0..cfg.batches_per_epoch {
            let step = epoch * cfg.batches_per_epoch + b;
            let loss = train_step(&mut model, &mut opt, &arch, &channel, cfg, step, lr)
                .map_err(|e| match e {
                    NnError::Numeric(m) => NnError::Numeric(format!("training aborted at batch {step} (epoch {epoch}, lr {lr}): {m}")),
                    other => other,
                })?;
            report.batch_losses.push(loss);
            sum += loss;
        }
        let mean = sum / cfg.batches_per_epoch as f64;
        report.epoch_losses.push(mean);
        report.epoch_lr.push(lr);
        on_epoch(epoch, lr, mean);
    }
    Ok((model, report))
}

fn train_step<T: Scalar>(
    model: &mut LightCodeModel<T>,
    opt: &mut AdamW<T>,
    arch: &ArchitectureConfig,
    channel: &ChannelSpec<T>,
    cfg: &TrainConfig,
    step: usize,
    lr: f64,
) -> Result<f64> {
    let mut rng = RngStream::new(cfg.seed, step as u64);
    let draw = ChannelDraw::batch(arch, channel, &mut rng, cfg.batch)?;
    let mut g = Graph::new();
    let bound = model.bind(&mut g, true)?;
    let vars = bound.vars().to_vec();
    let run = bound.unroll(&mut g, &draw, Norm::Batch)?;
    let loss = g.softmax_cross_entropy(run.logits, &draw.msgs)?;
    let value = g.value(loss).item()?.as_f64();
    if !value.is_finite() {
        return Err(NnError::Numeric(format!("loss is {value}")));
    }
    g.backward(loss)?;
    let mut grads: Vec<Tensor<T>> = vars
        .iter()
        .zip(model.params())
        .map(|(&v, p)| g.take_grad(v).unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols())))
        .collect();
    drop(g);
    clip_grad_value(&mut grads, cfg.grad_clip)?;
    if lr > 0.0 {
        opt.step(model.params_mut(), &grads, lr)?;
        model.project_alpha();
    }
    Ok(value)
}
