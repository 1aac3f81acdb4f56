//! Per-sample transmit magnitude against the receiver's running index error.

use fbcode_core::{ChannelSpec, RngStream};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::probe::{ProbeSamples, RoundEncoder};
use crate::error::{NnError, Result};

/// Rows sampled into the report table.
pub const REPORT_ROWS: usize = 50;
/// Diagonal loading of the pooled covariance.
pub const LDA_RIDGE: f64 = 1e-9;
/// Stream used to pick the reported rows.
pub const ROW_STREAM: u64 = (1 << 60) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerRow {
    pub sample: usize,
    pub msg: usize,
    /// `|M_hat - M|` for the estimate from rounds `1..i`.
    pub index_error: usize,
    pub abs_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerReport {
    pub round: usize,
    pub samples: usize,
    pub rows: Vec<PowerRow>,
    pub erroneous: usize,
    pub mean_abs_x_erroneous: Option<f64>,
    pub mean_abs_x_correct: Option<f64>,
}

/// Linear discriminant over `y_1..y_{i-1}` with equal priors and a pooled
/// within-class covariance.
#[derive(Clone, Debug)]
pub struct Lda {
    means: Vec<DVector<f64>>,
    weights: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

impl Lda {
    /// `features` is `n x p`; classes with no samples never win.
    pub fn fit(features: &DMatrix<f64>, labels: &[usize], classes: usize) -> Result<Self> {
        let (n, p) = features.shape();
        if labels.len() != n || n == 0 {
            return Err(NnError::Shape(format!("{} labels for {n} feature rows", labels.len())));
        }
        let mut counts = vec![0usize; classes];
        let mut means = vec![DVector::zeros(p); classes];
        for (r, &l) in labels.iter().enumerate() {
            if l >= classes {
                return Err(NnError::Config(format!("label {l} outside {classes} classes")));
            }
            counts[l] += 1;
            means[l] += features.row(r).transpose();
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            if c > 0 {
                *m /= c as f64;
            }
        }
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for (r, &l) in labels.iter().enumerate() {
            let dev = features.row(r).transpose() - &means[l];
            cov += &dev * dev.transpose();
        }
        cov /= n as f64;
        let scale = (cov.trace() / p as f64).max(1.0);
        for i in 0..p {
            cov[(i, i)] += LDA_RIDGE * scale;
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| NnError::Numeric("pooled covariance is not positive definite".into()))?;
        let mut weights = Vec::with_capacity(classes);
        let mut offsets = Vec::with_capacity(classes);
        for (m, &c) in means.iter().zip(&counts) {
            let w = chol.solve(m);
            offsets.push(if c > 0 { -0.5 * m.dot(&w) } else { f64::NEG_INFINITY });
            weights.push(w);
        }
        Ok(Self { means, weights, offsets })
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Vec<usize> {
        (0..features.nrows())
            .map(|r| {
                let f = features.row(r).transpose();
                let mut best = (0, f64::NEG_INFINITY);
                for (k, (w, &o)) in self.weights.iter().zip(&self.offsets).enumerate() {
                    let s = w.dot(&f) + o;
                    if s > best.1 {
                        best = (k, s);
                    }
                }
                best.0
            })
            .collect()
    }
}

/// Index errors of the receiver after `round - 1` rounds against `|x_round|`.
///
/// The receiver is an LDA classifier on the received `y_1..y_{round-1}`,
/// fitted and evaluated on the same samples.
pub fn power_distribution_report(
    enc: &impl RoundEncoder,
    round: usize,
    n: usize,
    channel: &ChannelSpec<f64>,
    seed: u64,
) -> Result<PowerReport> {
    let samples = ProbeSamples::draw(enc, n, channel, seed)?;
    power_report_from(&samples, enc.rate().messages(), round, seed)
}

pub fn power_report_from(samples: &ProbeSamples, classes: usize, round: usize, seed: u64) -> Result<PowerReport> {
    let d = samples.x.cols();
    if !(2..=d).contains(&round) {
        return Err(NnError::Config(format!("power report round must be in 2..={d}, got {round}")));
    }
    let n = samples.len();
    let y = samples.received();
    let feats = DMatrix::from_fn(n, round - 1, |r, c| y.get(r, c));
    let guesses = Lda::fit(&feats, &samples.msgs, classes)?.predict(&feats);
    let errs: Vec<usize> = guesses.iter().zip(&samples.msgs).map(|(&g, &m)| g.abs_diff(m)).collect();
    let abs_x: Vec<f64> = (0..n).map(|r| samples.x.get(r, round - 1).abs()).collect();

    let mean = |pick: bool| {
        let (s, c) = errs
            .iter()
            .zip(&abs_x)
            .filter(|(&e, _)| (e != 0) == pick)
            .fold((0.0, 0usize), |(s, c), (_, &a)| (s + a, c + 1));
        (c > 0).then(|| s / c as f64)
    };

    let mut rng = RngStream::new(seed, ROW_STREAM);
    let mut pool: Vec<usize> = (0..n).collect();
    let take = REPORT_ROWS.min(n);
    for i in 0..take {
        let j = i + rng.index(n - i);
        pool.swap(i, j);
    }
    let rows = pool[..take]
        .iter()
        .map(|&s| PowerRow {
            sample: s,
            msg: samples.msgs[s],
            index_error: errs[s],
            abs_x: abs_x[s],
        })
        .collect();
    Ok(PowerReport {
        round,
        samples: n,
        rows,
        erroneous: errs.iter().filter(|&&e| e != 0).count(),
        mean_abs_x_erroneous: mean(true),
        mean_abs_x_correct: mean(false),
    })
}
