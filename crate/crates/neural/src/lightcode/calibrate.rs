use fbcode_core::ChannelSpec;
use serde::Serialize;

use super::model::{Calibration, ChannelDraw, LightCodeModel};
use crate::error::{NnError, Result};
use crate::graph::Graph;
use crate::tensor::{Scalar, Tensor};

const CHUNK: usize = 16_384;
/// Stream offset keeping calibration draws apart from evaluation trials.
pub const CALIBRATION_STREAMS: u64 = 1 << 62;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub samples: usize,
    /// Set when `samples` is below the recommended minimum.
    pub low_sample: bool,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Measures the per-round mean and standard deviation of the raw encoder
/// output on `n` codewords, round by round: round `i` is measured on inputs
/// produced by the already calibrated rounds `1..i`. Sample `j` is drawn from
/// `RngStream::new(seed, CALIBRATION_STREAMS + j)`.
pub fn calibrate<T: Scalar>(model: &mut LightCodeModel<T>, n: usize, channel: &ChannelSpec<T>, seed: u64) -> Result<CalibrationReport> {
    if n < 2 {
        return Err(NnError::Config("calibration needs at least 2 samples".into()));
    }
    let arch = *model.arch();
    let d = arch.d;
    let draw = ChannelDraw::trials(&arch, channel, seed, CALIBRATION_STREAMS, 0, n)?;
    let u = draw.bits_pm1(arch.k);
    let mut x = Tensor::<T>::zeros(n, d);
    let mut y = Tensor::<T>::zeros(n, d);
    let (mut means, mut stds) = (Vec::with_capacity(d), Vec::with_capacity(d));
    let mut raw = vec![0.0f64; n];
    for round in 1..=d {
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let out = raw_chunk(model, round, &u, &x, &y, &draw, start, end)?;
            raw[start..end].copy_from_slice(&out);
        }
        let mean = raw.iter().sum::<f64>() / n as f64;
        let var = raw.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(NnError::Numeric(format!("round {round}: encoder output has zero spread")));
        }
        let a = model.alpha()[round - 1].as_f64();
        for (j, r) in raw.iter().enumerate() {
            let xv = T::of(a * (r - mean) / std);
            x.set(j, round - 1, xv);
            y.set(j, round - 1, xv + draw.fwd.get(j, round - 1));
        }
        means.push(mean);
        stds.push(std);
    }
    model.set_calibration(Calibration {
        mean: means.iter().map(|&v| T::of(v)).collect(),
        std: stds.iter().map(|&v| T::of(v)).collect(),
        samples: n,
    })?;
    let stored = model.calibration().expect("just set");
    Ok(CalibrationReport {
        samples: n,
        low_sample: stored.low_sample(),
        mean: stored.mean.iter().map(|v| v.as_f64()).collect(),
        std: stored.std.iter().map(|v| v.as_f64()).collect(),
    })
}

#[allow(clippy::too_many_arguments)]
fn raw_chunk<T: Scalar>(
    model: &LightCodeModel<T>,
    round: usize,
    u: &Tensor<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    draw: &ChannelDraw<T>,
    start: usize,
    end: usize,
) -> Result<Vec<f64>> {
    let rows = end - start;
    let mut g = Graph::new();
    let b = model.bind(&mut g, false)?;
    let col = |t: &Tensor<T>, c: usize| Tensor::from_fn(rows, 1, |r, _| t.get(start + r, c));
    let uv = g.constant(Tensor::from_fn(rows, u.cols(), |r, c| u.get(start + r, c)))?;
    let (mut xs, mut ys, mut ns) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..round - 1 {
        xs.push(g.constant(col(x, j))?);
        ys.push(g.constant(col(y, j))?);
        if let Some(fb) = &draw.fb {
            ns.push(g.constant(Tensor::from_fn(rows, 1, |r, _| {
                draw.fwd.get(start + r, j) + fb.get(start + r, j)
            }))?);
        }
    }
    let input = b.assemble(&mut g, round, uv, &xs, &ys, &ns)?;
    let raw = b.encoder_raw(&mut g, input)?;
    Ok(g.value(raw).data().iter().map(|v| v.as_f64()).collect())
}
