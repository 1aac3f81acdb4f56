//! Per-round linear regression of an encoder's output on its own past
//! transmissions and the forward noise.

use fbcode_core::{ChannelSpec, RateSpec, RngStream};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::lightcode::{ChannelDraw, FeedbackMode, LightCodeModel};
use crate::tensor::{Scalar, Tensor};

/// Diagonal regularization of the normal equations.
pub const RIDGE: f64 = 1e-10;
/// Fits on fewer samples than this are flagged.
pub const MIN_PROBE_SAMPLES: usize = 10_000;
/// Stream offset of probe sample draws.
pub const PROBE_STREAMS: u64 = 1 << 60;

/// An encoder over a noiseless-feedback link, seen from outside: messages and
/// forward noise in, transmitted symbols out.
pub trait RoundEncoder {
    fn rate(&self) -> RateSpec;

    /// `x` (`n x D`) for messages `msgs` and forward noise `fwd` (`n x D`).
    fn transmit(&self, msgs: &[usize], fwd: &Tensor<f64>) -> Result<Tensor<f64>>;
}

impl<T: Scalar> RoundEncoder for LightCodeModel<T> {
    fn rate(&self) -> RateSpec {
        RateSpec::new(self.arch().k, self.arch().d).expect("architecture was validated")
    }

    fn transmit(&self, msgs: &[usize], fwd: &Tensor<f64>) -> Result<Tensor<f64>> {
        if self.arch().feedback_mode != FeedbackMode::Noiseless {
            return Err(NnError::Config("probes need a noiseless-feedback model".into()));
        }
        const CHUNK: usize = 8192;
        let d = self.arch().d;
        let mut out = Vec::with_capacity(msgs.len() * d);
        for start in (0..msgs.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(msgs.len());
            let draw = ChannelDraw {
                msgs: msgs[start..end].to_vec(),
                fwd: Tensor::from_fn(end - start, d, |r, c| T::of(fwd.get(start + r, c))),
                fb: None,
            };
            let inf = self.infer(&draw)?;
            out.extend(inf.x.data().iter().map(|v| v.as_f64()));
        }
        Tensor::from_vec(msgs.len(), d, out)
    }
}

/// Messages, forward noise and transmissions of `n` codewords; sample `j`
/// comes from `RngStream::new(seed, PROBE_STREAMS + j)`.
#[derive(Clone, Debug)]
pub struct ProbeSamples {
    pub msgs: Vec<usize>,
    pub noise: Tensor<f64>,
    pub x: Tensor<f64>,
}

impl ProbeSamples {
    pub fn draw(enc: &impl RoundEncoder, n: usize, channel: &ChannelSpec<f64>, seed: u64) -> Result<Self> {
        if !channel.is_feedback_noiseless() {
            return Err(NnError::Config("probes are defined for noiseless feedback".into()));
        }
        if n < 2 {
            return Err(NnError::Config("probes need at least 2 samples".into()));
        }
        let rate = enc.rate();
        let sigma = channel.sigma_ff();
        let mut msgs = Vec::with_capacity(n);
        let mut noise = Tensor::zeros(n, rate.d);
        for j in 0..n {
            let mut rng = RngStream::new(seed, PROBE_STREAMS + j as u64);
            msgs.push(rng.index(rate.messages()));
            for c in 0..rate.d {
                noise.set(j, c, sigma * rng.gaussian::<f64>());
            }
        }
        let x = enc.transmit(&msgs, &noise)?;
        if x.shape() != (n, rate.d) {
            return Err(NnError::Shape(format!("encoder returned {:?} for {n} codewords", x.shape())));
        }
        Ok(Self { msgs, noise, x })
    }

    pub fn len(&self) -> usize {
        self.msgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msgs.is_empty()
    }

    /// `y = x + n`.
    pub fn received(&self) -> Tensor<f64> {
        self.x.zip_map(&self.noise, |a, b| a + b).expect("same shape")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeMode {
    /// One regression per transmitted message.
    #[default]
    PerSymbol,
    /// One regression over all samples.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolFit {
    /// Message index, or `None` for a pooled fit.
    pub symbol: Option<usize>,
    pub count: usize,
    /// Coefficients of `x_1..x_{t-1}`.
    pub alpha: Vec<f64>,
    /// Coefficients of `n_1..n_{t-1}`.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub r_squared: f64,
    /// Numerical rank of the centered design against its `2 (t - 1)` columns.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearProbeResult {
    /// The regressed round `t`; the regressors are rounds `1..t`.
    pub round: usize,
    pub samples: usize,
    pub mode: ProbeMode,
    pub fits: Vec<SymbolFit>,
    /// Sample-weighted mean of the per-fit R².
    pub mean_r_squared: f64,
    pub low_sample: bool,
    /// Set when some fit's design has lower rank than its column count.
    pub rank_deficient: bool,
}

/// Fits `x_t ~ sum_j (alpha_j x_j + beta_j n_j) + c` over `j < t`.
pub fn fit_linear_probe(samples: &ProbeSamples, round: usize, mode: ProbeMode) -> Result<LinearProbeResult> {
    let d = samples.x.cols();
    if !(2..=d).contains(&round) {
        return Err(NnError::Config(format!("probe round must be in 2..={d}, got {round}")));
    }
    let groups: Vec<(Option<usize>, Vec<usize>)> = match mode {
        ProbeMode::Pooled => vec![(None, (0..samples.len()).collect())],
        ProbeMode::PerSymbol => {
            let m = samples.msgs.iter().max().map_or(0, |&v| v + 1);
            (0..m)
                .map(|s| (Some(s), (0..samples.len()).filter(|&j| samples.msgs[j] == s).collect::<Vec<_>>()))
                .filter(|(_, rows)| rows.len() >= 2)
                .collect()
        }
    };
    let past = round - 1;
    let mut fits = Vec::with_capacity(groups.len());
    for (symbol, rows) in groups {
        let design = DMatrix::from_fn(rows.len(), 2 * past, |r, c| {
            let j = rows[r];
            if c < past {
                samples.x.get(j, c)
            } else {
                samples.noise.get(j, c - past)
            }
        });
        let target = DVector::from_iterator(rows.len(), rows.iter().map(|&j| samples.x.get(j, round - 1)));
        let (coef, intercept, r_squared, rank) = ols(&design, &target)?;
        fits.push(SymbolFit {
            symbol,
            count: rows.len(),
            alpha: coef[..past].to_vec(),
            beta: coef[past..].to_vec(),
            intercept,
            r_squared,
            rank,
        });
    }
    let total: usize = fits.iter().map(|f| f.count).sum();
    let mean_r_squared = fits.iter().map(|f| f.r_squared * f.count as f64).sum::<f64>() / total as f64;
    Ok(LinearProbeResult {
        round,
        samples: samples.len(),
        mode,
        rank_deficient: fits.iter().any(|f| f.rank < 2 * past),
        fits,
        mean_r_squared,
        low_sample: samples.len() < MIN_PROBE_SAMPLES,
    })
}

/// Draws `n` samples from `enc` and fits round `round`.
pub fn linear_probe(
    enc: &impl RoundEncoder,
    round: usize,
    n: usize,
    channel: &ChannelSpec<f64>,
    seed: u64,
    mode: ProbeMode,
) -> Result<LinearProbeResult> {
    let samples = ProbeSamples::draw(enc, n, channel, seed)?;
    fit_linear_probe(&samples, round, mode)
}

/// Least squares with intercept on centered data; returns coefficients,
/// intercept, R² and the numerical rank of the design.
fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(Vec<f64>, f64, f64, usize)> {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let xm: Vec<f64> = (0..p).map(|c| x.column(c).sum() / n).collect();
    let ym = y.sum() / n;
    let xc = DMatrix::from_fn(x.nrows(), p, |r, c| x[(r, c)] - xm[c]);
    let yc = y.map(|v| v - ym);
    let mut a = xc.transpose() * &xc;
    for i in 0..p {
        a[(i, i)] += RIDGE;
    }
    let rhs = xc.transpose() * &yc;
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol.max(2.0 * RIDGE)).count();
    let coef = svd
        .solve(&rhs, tol)
        .map_err(|e| NnError::Numeric(format!("least squares: {e}")))?;
    let pred = &xc * &coef;
    let ss_res: f64 = (&yc - pred).iter().map(|v| v * v).sum();
    let ss_tot: f64 = yc.iter().map(|v| v * v).sum();
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let r2 = if ss_tot <= 1e-24 * scale {
        if ss_res <= 1e-24 * scale {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let intercept = ym - coef.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    Ok((coef.iter().copied().collect(), intercept, r2, rank))
}
