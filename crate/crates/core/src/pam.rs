//! Unit-power 2^K-ary PAM and the message <-> index <-> amplitude maps.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::scalar::Real;

pub const MAX_BITS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PamConstellation<T> {
    k: usize,
    eta: T,
    amplitudes: Vec<T>,
}

/// Builds the constellation `{±η, ±3η, …, ±(2^K−1)η}` with `η = sqrt(3/(4^K − 1))`,
/// sorted ascending.
pub fn make_constellation<T: Real>(k: usize) -> Result<PamConstellation<T>> {
    if !(1..=MAX_BITS).contains(&k) {
        return config(format!("K must be in 1..={MAX_BITS}, got {k}"));
    }
    let m = 1usize << k;
    let eta = (3.0 / ((m * m) as f64 - 1.0)).sqrt();
    let amplitudes = (0..m)
        .map(|i| T::of((2.0 * i as f64 - (m as f64 - 1.0)) * eta))
        .collect();
    Ok(PamConstellation {
        k,
        eta: T::of(eta),
        amplitudes,
    })
}

impl<T: Real> PamConstellation<T> {
    pub fn bits(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> T {
        self.amplitudes[index]
    }

    pub fn mean_power(&self) -> T {
        self.amplitudes.iter().map(|&a| a * a).sum::<T>() / T::of_usize(self.size())
    }

    /// Index of the closest amplitude; equidistant ties go to the lower index.
    pub fn nearest_symbol(&self, estimate: T) -> Result<usize> {
        if !estimate.is_finite() {
            return Err(Error::Numeric(format!("non-finite estimate {estimate}")));
        }
        let m = self.size();
        let pos = ((estimate / self.eta).as_f64() + (m as f64 - 1.0)) / 2.0;
        let lo = pos.floor().clamp(0.0, (m - 1) as f64) as usize;
        if lo + 1 < m {
            let d_lo = (estimate - self.amplitudes[lo]).abs();
            let d_hi = (estimate - self.amplitudes[lo + 1]).abs();
            if d_hi < d_lo {
                return Ok(lo + 1);
            }
        }
        Ok(lo)
    }

    pub fn bits_to_symbol(&self, msg: &MessageBlock) -> Result<T> {
        if msg.bits.len() != self.k || msg.index >= self.size() {
            return config(format!(
                "message of {} bits / index {} does not fit a {}-bit constellation",
                msg.bits.len(),
                msg.index,
                self.k
            ));
        }
        Ok(self.amplitudes[msg.index])
    }
}

/// K message bits (MSB first) and their natural-binary index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MessageBlock {
    bits: Vec<u8>,
    index: usize,
}

impl MessageBlock {
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() || bits.len() > MAX_BITS {
            return config(format!("message length must be in 1..={MAX_BITS}"));
        }
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return config(format!("bit value {b} is not binary"));
            }
            index = (index << 1) | b as usize;
        }
        Ok(Self {
            bits: bits.to_vec(),
            index,
        })
    }

    pub fn from_index(index: usize, k: usize) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&k) || index >= (1usize << k) {
            return config(format!("index {index} out of range for K = {k}"));
        }
        let bits = (0..k).rev().map(|s| ((index >> s) & 1) as u8).collect();
        Ok(Self { bits, index })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn k(&self) -> usize {
        self.bits.len()
    }
}
