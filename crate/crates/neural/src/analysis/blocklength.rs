//! BLER of long blocks sent as independent `K`-bit sub-blocks.

use fbcode_core::formulas::compose_block_bler;
use serde::Serialize;

use crate::error::{NnError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlocklengthRow {
    #[serde(rename = "L")]
    pub bits: usize,
    #[serde(rename = "l")]
    pub sub_blocks: usize,
    pub p_l: f64,
}

/// One row per entry of `lengths`; each must be a positive multiple of `k`.
pub fn blocklength_table(p_k: f64, lengths: &[usize], k: usize) -> Result<Vec<BlocklengthRow>> {
    if k == 0 {
        return Err(NnError::Config("K must be >= 1".into()));
    }
    lengths
        .iter()
        .map(|&l| {
            if l == 0 || l % k != 0 {
                return Err(NnError::Config(format!("block length {l} is not a positive multiple of K = {k}")));
            }
            let sub = l / k;
            Ok(BlocklengthRow {
                bits: l,
                sub_blocks: sub,
                p_l: compose_block_bler(p_k, sub)?,
            })
        })
        .collect()
}
