//! Binary checkpoint format.
//!
//! ```text
//! "LCFK" | major u32 | minor u32 | total length u64
//! header length u32 | "key=value\n" lines (UTF-8)
//! array count u32 | per array: name length u16, name, rows u32, cols u32, f32 values
//! CRC-64/XZ of everything before it, u64
//! ```
//! All integers and floats are little-endian. Arrays are the parameters in
//! model order (the power weights are the array `alpha`), followed by
//! `calib.mean` and `calib.std` when the model is calibrated.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::{ArchitectureConfig, FeedbackMode};
use super::model::{Calibration, LightCodeModel};
use crate::error::{NnError, Result};
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"LCFK";
pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_MINOR: u32 = 0;

const CRC64: crc::Crc<u64> = crc::Crc::<u64>::new(&crc::CRC_64_XZ);
const FIXED: usize = 4 + 4 + 4 + 8;

/// Free-form string metadata stored next to the architecture.
pub type Metadata = BTreeMap<String, String>;

const ARCH_KEYS: [&str; 10] = [
    "k",
    "d",
    "hidden_dim",
    "feature_dim",
    "enc_mlp_layers",
    "dec_mlp_layers",
    "dec_hidden",
    "feedback_mode",
    "input_layout",
    "calib_samples",
];

pub fn to_bytes<T: Scalar>(model: &LightCodeModel<T>, meta: &Metadata) -> Result<Vec<u8>> {
    let a = model.arch();
    let mut header = vec![
        ("k".to_string(), a.k.to_string()),
        ("d".into(), a.d.to_string()),
        ("hidden_dim".into(), a.hidden_dim.to_string()),
        ("feature_dim".into(), a.feature_dim.to_string()),
        ("enc_mlp_layers".into(), a.enc_mlp_layers.to_string()),
        ("dec_mlp_layers".into(), a.dec_mlp_layers.to_string()),
        ("dec_hidden".into(), a.dec_hidden.to_string()),
        ("feedback_mode".into(), a.feedback_mode.as_str().to_string()),
        ("input_layout".into(), a.input_layout()),
    ];
    if let Some(c) = model.calibration() {
        header.push(("calib_samples".into(), c.samples.to_string()));
    }
    for (k, v) in meta {
        if ARCH_KEYS.contains(&k.as_str()) || k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
            return Err(NnError::Config(format!("invalid metadata key/value '{k}'")));
        }
        header.push((k.clone(), v.clone()));
    }
    let header: String = header.iter().map(|(k, v)| format!("{k}={v}\n")).collect();

    let mut arrays: Vec<(String, Tensor<T>)> = model.named_params().map(|(n, t)| (n.to_string(), t.clone())).collect();
    if let Some(c) = model.calibration() {
        let row = |v: &[T]| Tensor::from_vec(1, v.len(), v.to_vec()).expect("row");
        arrays.push(("calib.mean".into(), row(&c.mean)));
        arrays.push(("calib.std".into(), row(&c.std)));
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_MAJOR.to_le_bytes());
    out.extend_from_slice(&FORMAT_MINOR.to_le_bytes());
    out.extend_from_slice(&0u64.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for (name, t) in &arrays {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let total = (out.len() + 8) as u64;
    out[12..20].copy_from_slice(&total.to_le_bytes());
    let crc = CRC64.checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::Truncated(format!("need {n} bytes at offset {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<(LightCodeModel<T>, Metadata)> {
    if bytes.len() < FIXED {
        return Err(NnError::Truncated(format!("{} bytes is shorter than the fixed header", bytes.len())));
    }
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NnError::Format("bad magic, not a LightCode checkpoint".into()));
    }
    let major = r.u32()?;
    let _minor = r.u32()?;
    if major != FORMAT_MAJOR {
        return Err(NnError::Version {
            found: major,
            expected: FORMAT_MAJOR,
        });
    }
    let total = r.u64()? as usize;
    if bytes.len() < total {
        return Err(NnError::Truncated(format!("{} of {total} bytes present", bytes.len())));
    }
    if bytes.len() > total || total < FIXED + 8 {
        return Err(NnError::Format(format!("length field {total} does not match file size {}", bytes.len())));
    }
    let (payload, tail) = bytes.split_at(total - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = CRC64.checksum(payload);
    if stored != computed {
        return Err(NnError::Checksum { stored, computed });
    }
    let mut r = Reader { buf: payload, pos: FIXED };

    let hlen = r.u32()? as usize;
    let header = std::str::from_utf8(r.take(hlen)?).map_err(|e| NnError::Format(format!("header: {e}")))?;
    let mut kv = Metadata::new();
    for line in header.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NnError::Format(format!("header line '{line}'")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let num = |key: &str| -> Result<usize> {
        kv.get(key)
            .ok_or_else(|| NnError::Format(format!("header lacks '{key}'")))?
            .parse()
            .map_err(|_| NnError::Format(format!("header '{key}' is not an integer")))
    };
    let arch = ArchitectureConfig {
        k: num("k")?,
        d: num("d")?,
        hidden_dim: num("hidden_dim")?,
        feature_dim: num("feature_dim")?,
        enc_mlp_layers: num("enc_mlp_layers")?,
        dec_mlp_layers: num("dec_mlp_layers")?,
        dec_hidden: num("dec_hidden")?,
        feedback_mode: kv
            .get("feedback_mode")
            .ok_or_else(|| NnError::Format("header lacks 'feedback_mode'".into()))?
            .parse::<FeedbackMode>()?,
    };
    arch.validate()?;
    if kv.get("input_layout") != Some(&arch.input_layout()) {
        return Err(NnError::Format("encoder input layout does not match this build".into()));
    }

    let count = r.u32()? as usize;
    let mut arrays = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|e| NnError::Format(format!("array name: {e}")))?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let raw = r.take(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect();
        arrays.push((name, Tensor::from_vec(rows, cols, data)?));
    }
    if r.pos != payload.len() {
        return Err(NnError::Format("trailing bytes after the last array".into()));
    }

    let calibration = match arrays.last().map(|(n, _)| n.as_str()) {
        Some("calib.std") => {
            let (_, std) = arrays.pop().expect("present");
            let (name, mean) = arrays.pop().ok_or_else(|| NnError::Format("calib.std without calib.mean".into()))?;
            if name != "calib.mean" {
                return Err(NnError::Format(format!("expected calib.mean, found '{name}'")));
            }
            Some(Calibration {
                mean: mean.into_vec(),
                std: std.into_vec(),
                samples: num("calib_samples")?,
            })
        }
        _ => None,
    };
    let model = LightCodeModel::from_named(arch, arrays, calibration)?;
    let meta = kv.into_iter().filter(|(k, _)| !ARCH_KEYS.contains(&k.as_str())).collect();
    Ok((model, meta))
}

pub fn save_model<T: Scalar>(model: &LightCodeModel<T>, path: impl AsRef<Path>, meta: &Metadata) -> Result<()> {
    std::fs::write(path, to_bytes(model, meta)?)?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<(LightCodeModel<T>, Metadata)> {
    from_bytes(&std::fs::read(path)?)
}
