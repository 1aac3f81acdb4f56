//! Closed-form block error probabilities over an SNR grid.

use fbcode_core::formulas::{compose_block_bler, p_gn, p_pam_at_snr, p_pb, p_sk};
use fbcode_core::{db_to_linear, FinalAmplitude, FormulaVariant, RateSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::parse_grid;
use crate::error::{CliError, Result};
use crate::output::Table;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormulaConfig {
    /// `sk`, `gn`, `pb`, `pam` (one-shot equal-energy PAM) or `compose`.
    pub scheme: String,
    pub k: usize,
    pub d: usize,
    pub snr: String,
    pub variant: FormulaVariant,
    pub amplitude: FinalAmplitude,
    /// Sub-block BLER for `compose`.
    pub p: Option<f64>,
    /// Sub-block count for `compose`.
    pub l: Option<usize>,
}

impl Default for FormulaConfig {
    fn default() -> Self {
        Self {
            scheme: "pb".into(),
            k: 3,
            d: 9,
            snr: "-1".into(),
            variant: FormulaVariant::Lmmse,
            amplitude: FinalAmplitude::Consistent,
            p: None,
            l: None,
        }
    }
}

pub fn formula_table(cfg: &FormulaConfig) -> Result<Table> {
    if cfg.scheme == "compose" {
        let (p, l) = cfg
            .p
            .zip(cfg.l)
            .ok_or_else(|| CliError::usage("compose needs --p and --l"))?;
        let mut t = Table::new(&["scheme", "p_K", "l", "p_L"]);
        t.push(vec![json!("compose"), json!(p), json!(l), json!(compose_block_bler(p, l)?)]);
        return Ok(t);
    }
    let (uses_variant, uses_amp) = match cfg.scheme.as_str() {
        "sk" => (true, false),
        "gn" => (false, true),
        "pb" => (true, true),
        "pam" => (false, false),
        other => return Err(CliError::usage(format!("unknown formula scheme '{other}'"))),
    };
    let (k, d) = (cfg.k, cfg.d);
    RateSpec::new(k, d)?;
    let mut t = Table::new(&["scheme", "K", "D", "snr_ff_db", "variant", "amplitude", "bler"]);
    for db in parse_grid(&cfg.snr)? {
        let s = db_to_linear(db);
        let p = match cfg.scheme.as_str() {
            "sk" => p_sk(k, d, s, cfg.variant)?,
            "gn" => p_gn(k, d, s, cfg.amplitude)?,
            "pb" => p_pb(k, d, s, cfg.variant, cfg.amplitude)?,
            _ => p_pam_at_snr(k, d as f64 * s)?,
        };
        let variant = if uses_variant { json!(cfg.variant) } else { Value::Null };
        let amplitude = if uses_amp { json!(cfg.amplitude) } else { Value::Null };
        t.push(vec![json!(cfg.scheme), json!(k), json!(d), json!(db), variant, amplitude, json!(p)]);
    }
    Ok(t)
}
