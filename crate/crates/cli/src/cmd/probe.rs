//! Linear and power-distribution probes of a trained encoder.

use fbcode_core::ChannelSpec;
use fbcode_neural::analysis::{linear_probe, power_distribution_report, LinearProbeResult, PowerReport, ProbeMode};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, Result};
use crate::output::Table;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    #[default]
    Linear,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub model: Option<String>,
    pub kind: ProbeKind,
    pub round: usize,
    pub samples: usize,
    pub snr: f64,
    pub seed: u64,
    pub mode: ProbeMode,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            model: None,
            kind: ProbeKind::Linear,
            round: 2,
            samples: 100_000,
            snr: -1.0,
            seed: 1,
            mode: ProbeMode::PerSymbol,
        }
    }
}

pub enum ProbeOutput {
    Linear(LinearProbeResult),
    Power(PowerReport),
}

pub fn run_probe(cfg: &ProbeConfig) -> Result<ProbeOutput> {
    let path = cfg.model.as_deref().ok_or_else(|| CliError::usage("probe needs --model"))?;
    let model = super::load(path)?;
    let channel = ChannelSpec::<f64>::noiseless_feedback(cfg.snr)?;
    Ok(match cfg.kind {
        ProbeKind::Linear => {
            ProbeOutput::Linear(linear_probe(&model, cfg.round, cfg.samples, &channel, cfg.seed, cfg.mode)?)
        }
        ProbeKind::Power => {
            ProbeOutput::Power(power_distribution_report(&model, cfg.round, cfg.samples, &channel, cfg.seed)?)
        }
    })
}

/// Coefficient `alpha_j` multiplies the round-`j` symbol, `beta_j` the
/// round-`j` forward noise.
pub fn linear_table(res: &LinearProbeResult) -> Table {
    let lags = res.round - 1;
    let mut cols = vec!["round".to_string(), "symbol".into(), "count".into(), "rank".into(), "r_squared".into(), "intercept".into()];
    cols.extend((1..=lags).map(|j| format!("alpha_{j}")));
    cols.extend((1..=lags).map(|j| format!("beta_{j}")));
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for f in &res.fits {
        let mut row = vec![
            json!(res.round),
            f.symbol.map_or(json!("all"), |s| json!(s)),
            json!(f.count),
            json!(f.rank),
            json!(f.r_squared),
            json!(f.intercept),
        ];
        row.extend(f.alpha.iter().map(|v| json!(v)));
        row.extend(f.beta.iter().map(|v| json!(v)));
        t.push(row);
    }
    t
}

pub fn linear_notes(res: &LinearProbeResult) -> String {
    let mut s = format!("# mean_r_squared: {}\n", fbcode_core::harness::fmt_g9(res.mean_r_squared));
    if res.low_sample {
        s.push_str("# warning: some symbols have fewer samples than recommended\n");
    }
    if res.rank_deficient {
        s.push_str("# warning: collinear regressors, minimum-norm coefficients reported\n");
    }
    s
}

pub fn power_table(rep: &PowerReport) -> Table {
    let mut t = Table::new(&["sample", "msg", "index_error", "abs_x"]);
    for r in &rep.rows {
        t.push(vec![json!(r.sample), json!(r.msg), json!(r.index_error), json!(r.abs_x)]);
    }
    t
}

pub fn power_notes(rep: &PowerReport) -> String {
    let g = |v: Option<f64>| v.map_or("-".to_string(), fbcode_core::harness::fmt_g9);
    format!(
        "# round: {}\n# erroneous: {} of {}\n# mean_abs_x_erroneous: {}\n# mean_abs_x_correct: {}\n",
        rep.round,
        rep.erroneous,
        rep.samples,
        g(rep.mean_abs_x_erroneous),
        g(rep.mean_abs_x_correct)
    )
}

