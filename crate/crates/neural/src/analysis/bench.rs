//! Wall-clock encoder/decoder throughput of LightCode and PowerBlast.

use std::time::Instant;

use fbcode_core::{AnalyticCodec, ChannelSpec, PbCodec, RateSpec, RngStream};
use serde::Serialize;

use crate::error::{NnError, Result};
use crate::lightcode::{argmax_rows, ChannelDraw, LightCodeModel};
use crate::tensor::{Scalar, Tensor};

/// Timed repetitions per direction; the median is reported.
pub const BENCH_REPS: usize = 3;

/// Something with a batched encoder and decoder. `prepare` draws messages
/// and noise outside the timed region.
pub trait BenchTarget {
    fn label(&self) -> &str;
    fn rate(&self) -> RateSpec;
    fn prepare(&mut self, batch: usize, seed: u64) -> Result<()>;
    /// Runs all `D` rounds of the transmitter over the prepared batch.
    fn encode_batch(&mut self) -> Result<()>;
    /// Decodes the received block produced by the last `encode_batch`.
    fn decode_batch(&mut self) -> Result<()>;
    /// Decisions of the last `decode_batch`, with the prepared messages.
    fn decisions(&self) -> (&[usize], &[usize]);
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub label: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub batch: usize,
    pub reps: usize,
    /// Encoded symbols per second.
    pub t_e: f64,
    /// Decoded symbols per second.
    pub t_d: f64,
    /// `(K / D) T_E`, bits per second.
    pub t_ek: f64,
    /// `(K / D) T_D`, bits per second.
    pub t_dk: f64,
    pub hardware: String,
}

impl ThroughputReport {
    pub fn new(label: &str, rate: RateSpec, batch: usize, reps: usize, t_e: f64, t_d: f64) -> Self {
        let bits = rate.k as f64 / rate.d as f64;
        Self {
            label: label.to_string(),
            k: rate.k,
            d: rate.d,
            batch,
            reps,
            t_e,
            t_d,
            t_ek: bits * t_e,
            t_dk: bits * t_d,
            hardware: hardware_note(),
        }
    }
}

/// CPU model, logical cores, OS and architecture.
pub fn hardware_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|v| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{cpu}; {cores} logical cores; {}-{}; single-threaded",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Times `BENCH_REPS` windows of `duration_s / BENCH_REPS` per direction and
/// reports the median symbol rate of each.
pub fn throughput_bench(target: &mut impl BenchTarget, batch: usize, duration_s: f64, seed: u64) -> Result<ThroughputReport> {
    if batch == 0 {
        return Err(NnError::Config("bench batch must be >= 1".into()));
    }
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(NnError::Config(format!("bench duration must be positive, got {duration_s}")));
    }
    let rate = target.rate();
    target.prepare(batch, seed)?;
    let window = duration_s / BENCH_REPS as f64;
    let t0 = Instant::now();
    target.encode_batch()?;
    let warm_enc = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    target.decode_batch()?;
    let warm_dec = t0.elapsed().as_secs_f64();
    if warm_enc.max(warm_dec) > window {
        return Err(NnError::Config(format!(
            "duration {duration_s} s leaves {window:.3e} s per repetition, one batch takes {:.3e} s",
            warm_enc.max(warm_dec)
        )));
    }
    let symbols = (batch * rate.d) as f64;
    let mut enc = Vec::with_capacity(BENCH_REPS);
    let mut dec = Vec::with_capacity(BENCH_REPS);
    for _ in 0..BENCH_REPS {
        let (mut n, t0) = (0usize, Instant::now());
        while n == 0 || t0.elapsed().as_secs_f64() < window {
            target.encode_batch()?;
            n += 1;
        }
        enc.push(n as f64 * symbols / t0.elapsed().as_secs_f64());
        let (mut n, t0) = (0usize, Instant::now());
        while n == 0 || t0.elapsed().as_secs_f64() < window {
            target.decode_batch()?;
            n += 1;
        }
        dec.push(n as f64 * symbols / t0.elapsed().as_secs_f64());
    }
    Ok(ThroughputReport::new(target.label(), rate, batch, BENCH_REPS, median(enc), median(dec)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A calibrated LightCode model; the encoder runs the feedback loop and the
/// decoder maps the resulting received block to messages.
pub struct LightCodeBench<'a, T> {
    model: &'a LightCodeModel<T>,
    channel: ChannelSpec<T>,
    draw: Option<ChannelDraw<T>>,
    y: Option<Tensor<T>>,
    decided: Vec<usize>,
}

impl<'a, T: Scalar> LightCodeBench<'a, T> {
    pub fn new(model: &'a LightCodeModel<T>, channel: ChannelSpec<T>) -> Result<Self> {
        if model.calibration().is_none() {
            return Err(NnError::State("benchmarking needs a calibrated model".into()));
        }
        Ok(Self {
            model,
            channel,
            draw: None,
            y: None,
            decided: Vec::new(),
        })
    }
}

impl<T: Scalar> BenchTarget for LightCodeBench<'_, T> {
    fn label(&self) -> &str {
        "lightcode"
    }

    fn rate(&self) -> RateSpec {
        RateSpec::new(self.model.arch().k, self.model.arch().d).expect("architecture was validated")
    }

    fn prepare(&mut self, batch: usize, seed: u64) -> Result<()> {
        self.draw = Some(ChannelDraw::trials(self.model.arch(), &self.channel, seed, 0, 0, batch)?);
        self.y = None;
        Ok(())
    }

    fn encode_batch(&mut self) -> Result<()> {
        let draw = self.draw.as_ref().ok_or_else(|| NnError::Usage("encode before prepare".into()))?;
        self.y = Some(self.model.encode(draw)?.1);
        Ok(())
    }

    fn decode_batch(&mut self) -> Result<()> {
        let y = self.y.as_ref().ok_or_else(|| NnError::Usage("decode before encode".into()))?;
        self.decided = argmax_rows(&self.model.decode(y)?);
        Ok(())
    }

    fn decisions(&self) -> (&[usize], &[usize]) {
        (&self.decided, self.draw.as_ref().map_or(&[][..], |d| &d.msgs[..]))
    }
}

/// PowerBlast with noise drawn up front: the transmitter runs the analog
/// refinement and the final ternary round, the receiver repeats the LMMSE
/// recursion on the received values and applies the ternary detector.
pub struct PbBench<'a> {
    codec: &'a PbCodec<f64>,
    msgs: Vec<usize>,
    noise: Vec<f64>,
    y: Vec<f64>,
    decided: Vec<usize>,
}

impl<'a> PbBench<'a> {
    pub fn new(codec: &'a PbCodec<f64>) -> Self {
        Self {
            codec,
            msgs: Vec::new(),
            noise: Vec::new(),
            y: Vec::new(),
            decided: Vec::new(),
        }
    }

    fn gains(&self) -> (f64, f64) {
        let p = self.codec.channel().power();
        (p.sqrt(), p + self.codec.channel().sigma_ff_sq)
    }
}

impl BenchTarget for PbBench<'_> {
    fn label(&self) -> &str {
        "pb"
    }

    fn rate(&self) -> RateSpec {
        self.codec.rate()
    }

    fn prepare(&mut self, batch: usize, seed: u64) -> Result<()> {
        let rate = self.codec.rate();
        let sigma = self.codec.channel().sigma_ff();
        self.msgs.clear();
        self.noise.clear();
        for j in 0..batch {
            let mut rng = RngStream::new(seed, j as u64);
            self.msgs.push(rng.index(rate.messages()));
            self.noise.extend((0..rate.d).map(|_| sigma * rng.gaussian::<f64>()));
        }
        self.y = vec![0.0; self.noise.len()];
        Ok(())
    }

    fn encode_batch(&mut self) -> Result<()> {
        let d = self.codec.rate().d;
        let sk = self.codec.sk();
        let (pam, sched) = (sk.constellation(), sk.schedule());
        let (sp, den) = self.gains();
        for (j, &m) in self.msgs.iter().enumerate() {
            let theta = pam.amplitude(m);
            let (noise, y) = (&self.noise[j * d..(j + 1) * d], &mut self.y[j * d..(j + 1) * d]);
            let mut est = 0.0;
            let mut var = 1.0f64;
            for r in 0..d - 1 {
                let x = if r == 0 {
                    sp * theta
                } else if var > 0.0 {
                    sp * (est - theta) / var.sqrt()
                } else {
                    0.0
                };
                y[r] = x + noise[r];
                est = if r == 0 { sp * y[r] / den } else { est - sp * var.sqrt() * y[r] / den };
                var = sched[r];
            }
            let gain = 1.0 - var;
            let m_hat = pam.nearest_symbol(if gain > 0.0 { est / gain } else { est })?;
            let x = self.codec.detector().modulate(m_hat as i64 - m as i64);
            y[d - 1] = x + noise[d - 1];
        }
        Ok(())
    }

    fn decode_batch(&mut self) -> Result<()> {
        let d = self.codec.rate().d;
        let sk = self.codec.sk();
        let (pam, sched) = (sk.constellation(), sk.schedule());
        let m = self.codec.rate().messages() as i64;
        let (sp, den) = self.gains();
        self.decided.clear();
        for y in self.y.chunks_exact(d) {
            let mut est = sp * y[0] / den;
            let mut var = sched[0];
            for r in 1..d - 1 {
                est -= sp * var.sqrt() * y[r] / den;
                var = sched[r];
            }
            let gain = 1.0 - var;
            let m_hat = pam.nearest_symbol(if gain > 0.0 { est / gain } else { est })? as i64;
            let u = self.codec.detector().detect(y[d - 1]);
            self.decided.push((m_hat - u).clamp(0, m - 1) as usize);
        }
        Ok(())
    }

    fn decisions(&self) -> (&[usize], &[usize]) {
        (&self.decided, &self.msgs)
    }
}
