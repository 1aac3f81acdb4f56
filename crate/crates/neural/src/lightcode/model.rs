use fbcode_core::{ChannelSpec, RngStream};

use super::config::{ArchitectureConfig, FeedbackMode};
use crate::error::{shape, NnError, Result};
use crate::graph::{Graph, Var};
use crate::tensor::{Scalar, Tensor};

/// Calibrations on fewer samples than this are flagged.
pub const MIN_CALIBRATION_SAMPLES: usize = 10_000;

/// Indices of a dense layer's weight (`fan_in x fan_out`) and bias
/// (`1 x fan_out`) in the parameter list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

/// `out = L4(concat(L3(relu(L2(relu(h1)))), -h1))` with `h1 = L1(input)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureExtractor {
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
    pub l4: Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Layout {
    enc_fe: FeatureExtractor,
    enc_head: Vec<Linear>,
    dec_fe: FeatureExtractor,
    dec_head: Vec<Linear>,
    alpha: usize,
}

#[derive(Default)]
struct LayoutBuilder {
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, shape: (usize, usize)) -> usize {
        self.names.push(name);
        self.shapes.push(shape);
        self.names.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.push(format!("{name}.weight"), (fan_in, fan_out)),
            b: self.push(format!("{name}.bias"), (1, fan_out)),
        }
    }

    fn extractor(&mut self, prefix: &str, input: usize, hidden: usize, features: usize) -> FeatureExtractor {
        FeatureExtractor {
            l1: self.linear(&format!("{prefix}.fe.l1"), input, hidden),
            l2: self.linear(&format!("{prefix}.fe.l2"), hidden, hidden),
            l3: self.linear(&format!("{prefix}.fe.l3"), hidden, hidden),
            l4: self.linear(&format!("{prefix}.fe.l4"), 2 * hidden, features),
        }
    }

    fn head(&mut self, prefix: &str, layers: usize, input: usize, hidden: usize, output: usize) -> Vec<Linear> {
        (0..layers)
            .map(|l| {
                let fan_in = if l == 0 { input } else { hidden };
                let fan_out = if l + 1 == layers { output } else { hidden };
                self.linear(&format!("{prefix}.head.{l}"), fan_in, fan_out)
            })
            .collect()
    }
}

fn build_layout(arch: &ArchitectureConfig) -> (Layout, Vec<String>, Vec<(usize, usize)>) {
    let mut b = LayoutBuilder::default();
    let h = arch.hidden_dim;
    let f = arch.feature_dim;
    let enc_fe = b.extractor("enc", arch.input_dim(), h, f);
    let enc_head = b.head("enc", arch.enc_mlp_layers, f, h, 1);
    let dec_fe = b.extractor("dec", arch.d, h, f);
    let dec_head = b.head("dec", arch.dec_mlp_layers, f, arch.dec_hidden, arch.classes());
    let alpha = b.push("alpha".into(), (1, arch.d));
    let layout = Layout {
        enc_fe,
        enc_head,
        dec_fe,
        dec_head,
        alpha,
    };
    (layout, b.names, b.shapes)
}

/// Init scale of the decoder's output layer relative to the other layers.
pub const OUTPUT_INIT_SCALE: f64 = 0.1;

/// Per-round statistics of the raw encoder output used at inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub samples: usize,
}

impl<T> Calibration<T> {
    pub fn low_sample(&self) -> bool {
        self.samples < MIN_CALIBRATION_SAMPLES
    }
}

/// How each round's raw encoder output is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    /// Statistics of the current batch (training).
    Batch,
    /// Stored calibration statistics (inference).
    Calibrated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LightCodeModel<T> {
    arch: ArchitectureConfig,
    names: Vec<String>,
    params: Vec<Tensor<T>>,
    layout: Layout,
    calibration: Option<Calibration<T>>,
}

impl<T: Scalar> LightCodeModel<T> {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`, `alpha_i = 1`. The
    /// decoder's output layer is scaled by [`OUTPUT_INIT_SCALE`] and its bias
    /// zeroed, so initial logits are near uniform.
    pub fn new(arch: ArchitectureConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let (layout, names, shapes) = build_layout(&arch);
        let out = *layout.dec_head.last().expect("heads have at least one layer");
        let mut rng = RngStream::new(seed, u64::MAX - 1);
        let mut params: Vec<Tensor<T>> = Vec::with_capacity(names.len());
        for (i, &(r, c)) in shapes.iter().enumerate() {
            if i == layout.alpha {
                params.push(Tensor::filled(r, c, T::one()));
                continue;
            }
            // a bias shares its layer's fan-in, the weight that precedes it
            let fan_in = if names[i].ends_with(".bias") { shapes[i - 1].0 } else { r };
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if i == out.w {
                bound *= OUTPUT_INIT_SCALE;
            } else if i == out.b {
                bound = 0.0;
            }
            params.push(Tensor::from_fn(r, c, |_, _| T::of(bound * (2.0 * rng.uniform() - 1.0))));
        }
        Ok(Self {
            arch,
            names,
            params,
            layout,
            calibration: None,
        })
    }

    /// Reassembles a model from named arrays, checking names and shapes.
    pub fn from_named(
        arch: ArchitectureConfig,
        named: Vec<(String, Tensor<T>)>,
        calibration: Option<Calibration<T>>,
    ) -> Result<Self> {
        arch.validate()?;
        let (layout, names, shapes) = build_layout(&arch);
        if named.len() != names.len() {
            return shape(format!("expected {} parameter arrays, got {}", names.len(), named.len()));
        }
        let mut params = Vec::with_capacity(names.len());
        for ((name, t), (want, &sh)) in named.into_iter().zip(names.iter().zip(&shapes)) {
            if &name != want || t.shape() != sh {
                return shape(format!("parameter '{name}' {:?} where '{want}' {sh:?} was expected", t.shape()));
            }
            params.push(t);
        }
        if let Some(c) = &calibration {
            if c.mean.len() != arch.d || c.std.len() != arch.d {
                return shape("calibration vectors must have D entries");
            }
        }
        if params[layout.alpha].data().iter().any(|a| !a.is_finite()) {
            return Err(NnError::Numeric("alpha is not finite".into()));
        }
        Ok(Self {
            arch,
            names,
            params,
            layout,
            calibration,
        })
    }

    pub fn arch(&self) -> &ArchitectureConfig {
        &self.arch
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    /// Total number of scalars, including the `D` power weights.
    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// `(encoder, decoder)` scalar counts, excluding the power weights.
    pub fn parameter_split(&self) -> (usize, usize) {
        let enc = self
            .named_params()
            .filter(|(n, _)| n.starts_with("enc."))
            .map(|(_, t)| t.len())
            .sum();
        let dec = self
            .named_params()
            .filter(|(n, _)| n.starts_with("dec."))
            .map(|(_, t)| t.len())
            .sum();
        (enc, dec)
    }

    pub fn alpha(&self) -> &[T] {
        self.params[self.layout.alpha].data()
    }

    /// Sets the power weights and rescales them to `sum alpha_i^2 = D`.
    pub fn set_alpha(&mut self, alpha: &[T]) -> Result<()> {
        if alpha.len() != self.arch.d {
            return shape(format!("{} power weights for D = {}", alpha.len(), self.arch.d));
        }
        self.params[self.layout.alpha].data_mut().copy_from_slice(alpha);
        self.project_alpha();
        Ok(())
    }

    /// Rescales `alpha` onto the sphere `sum alpha_i^2 = D`; a zero vector
    /// is reset to all ones.
    pub fn project_alpha(&mut self) {
        let d = self.arch.d as f64;
        let a = self.params[self.layout.alpha].data_mut();
        let ss: f64 = a.iter().map(|v| v.as_f64() * v.as_f64()).sum();
        if ss > 0.0 && ss.is_finite() {
            let s = (d / ss).sqrt();
            a.iter_mut().for_each(|v| *v = T::of(v.as_f64() * s));
        } else {
            a.iter_mut().for_each(|v| *v = T::one());
        }
    }

    pub fn calibration(&self) -> Option<&Calibration<T>> {
        self.calibration.as_ref()
    }

    pub fn set_calibration(&mut self, c: Calibration<T>) -> Result<()> {
        if c.mean.len() != self.arch.d || c.std.len() != self.arch.d {
            return shape("calibration vectors must have D entries");
        }
        if c.std.iter().any(|s| !(*s > T::zero())) {
            return Err(NnError::Numeric("calibration std must be > 0 every round".into()));
        }
        self.calibration = Some(c);
        Ok(())
    }

    pub fn clear_calibration(&mut self) {
        self.calibration = None;
    }

    /// Same model in another scalar type.
    pub fn cast<U: Scalar>(&self) -> LightCodeModel<U> {
        LightCodeModel {
            arch: self.arch,
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            layout: self.layout.clone(),
            calibration: self.calibration.as_ref().map(|c| Calibration {
                mean: c.mean.iter().map(|v| U::of(v.as_f64())).collect(),
                std: c.std.iter().map(|v| U::of(v.as_f64())).collect(),
                samples: c.samples,
            }),
        }
    }

    /// Places the parameters on `g`, as trainable leaves or as constants.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Result<Bound<'_, T>> {
        let vars = self
            .params
            .iter()
            .map(|p| if trainable { g.param(p.clone()) } else { g.constant(p.clone()) })
            .collect::<Result<Vec<_>>>()?;
        Ok(Bound { model: self, vars })
    }

    /// Runs a calibrated encoder/decoder over `draw` without gradients.
    pub fn infer(&self, draw: &ChannelDraw<T>) -> Result<Inference<T>> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false)?;
        let run = b.unroll(&mut g, draw, Norm::Calibrated)?;
        let x = g.concat_cols(&run.xs)?;
        let y = g.concat_cols(&run.ys)?;
        Ok(Inference {
            x: g.value(x).clone(),
            y: g.value(y).clone(),
            logits: g.value(run.logits).clone(),
        })
    }

    /// Calibrated encoder rounds only; returns `x` and `y`, both `B x D`.
    pub fn encode(&self, draw: &ChannelDraw<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false)?;
        let (xs, ys, _) = b.transmit(&mut g, draw, Norm::Calibrated)?;
        let x = g.concat_cols(&xs)?;
        let y = g.concat_cols(&ys)?;
        Ok((g.value(x).clone(), g.value(y).clone()))
    }

    /// Decoder logits for a `B x D` received block.
    pub fn decode(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false)?;
        let yv = g.constant(y.clone())?;
        let logits = b.decode(&mut g, yv)?;
        Ok(g.value(logits).clone())
    }

    /// Mean cross-entropy on `draw` with the given normalization.
    pub fn loss(&self, draw: &ChannelDraw<T>, norm: Norm) -> Result<f64> {
        let mut g = Graph::new();
        let b = self.bind(&mut g, false)?;
        let run = b.unroll(&mut g, draw, norm)?;
        let loss = g.softmax_cross_entropy(run.logits, &draw.msgs)?;
        Ok(g.value(loss).item()?.as_f64())
    }
}

/// Outputs of [`LightCodeModel::infer`]; `x` and `y` are `B x D`.
#[derive(Clone, Debug)]
pub struct Inference<T> {
    pub x: Tensor<T>,
    pub y: Tensor<T>,
    pub logits: Tensor<T>,
}

impl<T: Scalar> Inference<T> {
    pub fn decisions(&self) -> Vec<usize> {
        argmax_rows(&self.logits)
    }
}

/// Index of the largest entry of each row; ties go to the lower index.
pub fn argmax_rows<T: Scalar>(t: &Tensor<T>) -> Vec<usize> {
    (0..t.rows())
        .map(|r| {
            t.row(r)
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

/// Messages and channel noise for a batch of codewords.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw<T> {
    pub msgs: Vec<usize>,
    /// Forward noise `n_i`, `B x D`.
    pub fwd: Tensor<T>,
    /// Feedback noise, `B x D`; `None` on a noiseless feedback link.
    pub fb: Option<Tensor<T>>,
}

impl<T: Scalar> ChannelDraw<T> {
    fn check(arch: &ArchitectureConfig, channel: &ChannelSpec<T>) -> Result<()> {
        let noisy = !channel.is_feedback_noiseless();
        if noisy != (arch.feedback_mode == FeedbackMode::Noisy) {
            return Err(NnError::Config(format!(
                "a {} feedback model cannot run on a channel with {} feedback",
                arch.feedback_mode.as_str(),
                if noisy { "noisy" } else { "noiseless" }
            )));
        }
        Ok(())
    }

    fn draw_row(arch: &ArchitectureConfig, channel: &ChannelSpec<T>, rng: &mut RngStream, fwd: &mut [T], fb: Option<&mut [T]>) -> usize {
        let msg = rng.index(arch.classes());
        let sf = channel.sigma_ff();
        fwd.iter_mut().for_each(|v| *v = sf * rng.gaussian::<T>());
        if let Some(fb) = fb {
            let sb = channel.sigma_fb();
            fb.iter_mut().for_each(|v| *v = sb * rng.gaussian::<T>());
        }
        msg
    }

    /// `b` codewords from one stream (training batches).
    pub fn batch(arch: &ArchitectureConfig, channel: &ChannelSpec<T>, rng: &mut RngStream, b: usize) -> Result<Self> {
        Self::build(arch, channel, b, |f, fb| Self::draw_row(arch, channel, rng, f, fb))
    }

    /// Trials `first..first + n`, trial `t` drawn from its own stream
    /// `RngStream::new(seed, base + t)`.
    pub fn trials(arch: &ArchitectureConfig, channel: &ChannelSpec<T>, seed: u64, base: u64, first: u64, n: usize) -> Result<Self> {
        let mut t = first;
        Self::build(arch, channel, n, |f, fb| {
            let mut rng = RngStream::new(seed, base.wrapping_add(t));
            t += 1;
            Self::draw_row(arch, channel, &mut rng, f, fb)
        })
    }

    fn build(
        arch: &ArchitectureConfig,
        channel: &ChannelSpec<T>,
        b: usize,
        mut row: impl FnMut(&mut [T], Option<&mut [T]>) -> usize,
    ) -> Result<Self> {
        Self::check(arch, channel)?;
        let d = arch.d;
        let noisy = arch.feedback_mode == FeedbackMode::Noisy;
        let mut fwd = Tensor::zeros(b, d);
        let mut fb = noisy.then(|| Tensor::zeros(b, d));
        let mut msgs = Vec::with_capacity(b);
        for r in 0..b {
            let fwd_row = &mut fwd.data_mut()[r * d..(r + 1) * d];
            let fb_row = fb.as_mut().map(|t| &mut t.data_mut()[r * d..(r + 1) * d]);
            msgs.push(row(fwd_row, fb_row));
        }
        Ok(Self { msgs, fwd, fb })
    }

    pub fn len(&self) -> usize {
        self.msgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msgs.is_empty()
    }

    /// Messages as `±1` bit rows, most significant bit first.
    pub fn bits_pm1(&self, k: usize) -> Tensor<T> {
        Tensor::from_fn(self.msgs.len(), k, |r, j| {
            if (self.msgs[r] >> (k - 1 - j)) & 1 == 1 {
                T::one()
            } else {
                -T::one()
            }
        })
    }
}

/// Graph nodes of one unrolled block.
#[derive(Clone, Debug)]
pub struct Unrolled {
    pub xs: Vec<Var>,
    pub ys: Vec<Var>,
    pub raws: Vec<Var>,
    pub logits: Var,
}

/// A model's parameters placed on a graph.
pub struct Bound<'m, T> {
    model: &'m LightCodeModel<T>,
    vars: Vec<Var>,
}

impl<T: Scalar> Bound<'_, T> {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn linear(&self, g: &mut Graph<T>, l: Linear, x: Var) -> Result<Var> {
        let h = g.matmul(x, self.vars[l.w])?;
        g.add_bias(h, self.vars[l.b])
    }

    fn extractor(&self, g: &mut Graph<T>, fe: FeatureExtractor, input: Var) -> Result<Var> {
        let h1 = self.linear(g, fe.l1, input)?;
        let h2 = g.relu(h1)?;
        let h3 = self.linear(g, fe.l2, h2)?;
        let h4 = g.relu(h3)?;
        let main = self.linear(g, fe.l3, h4)?;
        let skip = g.negate(h1)?;
        let cat = g.concat_cols(&[main, skip])?;
        self.linear(g, fe.l4, cat)
    }

    fn mlp(&self, g: &mut Graph<T>, layers: &[Linear], mut x: Var) -> Result<Var> {
        for (i, &l) in layers.iter().enumerate() {
            if i > 0 {
                x = g.relu(x)?;
            }
            x = self.linear(g, l, x)?;
        }
        Ok(x)
    }

    /// Encoder feature extractor output, `B x feature_dim`.
    pub fn encoder_features(&self, g: &mut Graph<T>, input: Var) -> Result<Var> {
        let w = g.value(input).cols();
        if w != self.model.arch.input_dim() {
            return shape(format!("encoder input width {w}, expected {}", self.model.arch.input_dim()));
        }
        self.extractor(g, self.model.layout.enc_fe, input)
    }

    /// Unnormalized encoder output, `B x 1`.
    pub fn encoder_raw(&self, g: &mut Graph<T>, input: Var) -> Result<Var> {
        let f = self.encoder_features(g, input)?;
        self.mlp(g, &self.model.layout.enc_head, f)
    }

    /// `x_i = alpha_i * normalize(raw_i)` for round `i` in `1..=D`; returns
    /// `(x_i, raw_i)`.
    pub fn encode_round(&self, g: &mut Graph<T>, round: usize, input: Var, norm: Norm) -> Result<(Var, Var)> {
        let d = self.model.arch.d;
        if !(1..=d).contains(&round) {
            return Err(NnError::Usage(format!("round {round} outside 1..={d}")));
        }
        let raw = self.encoder_raw(g, input)?;
        let z = match norm {
            Norm::Batch => g.standardize(raw)?,
            Norm::Calibrated => {
                let c = self
                    .model
                    .calibration
                    .as_ref()
                    .ok_or_else(|| NnError::State("inference before calibration".into()))?;
                let shift = g.constant(Tensor::scalar(-c.mean[round - 1]))?;
                let centered = g.add_bias(raw, shift)?;
                g.scale(centered, c.std[round - 1].recip())?
            }
        };
        let a = g.slice_cols(self.vars[self.model.layout.alpha], round - 1, round)?;
        Ok((g.mul_row(z, a)?, raw))
    }

    /// Logits over the `2^K` messages from the `B x D` received block.
    pub fn decode(&self, g: &mut Graph<T>, ys: Var) -> Result<Var> {
        let w = g.value(ys).cols();
        if w != self.model.arch.d {
            return shape(format!("decoder input width {w}, expected D = {}", self.model.arch.d));
        }
        let f = self.extractor(g, self.model.layout.dec_fe, ys)?;
        self.mlp(g, &self.model.layout.dec_head, f)
    }

    /// Encoder input for round `round` from the message bits `u` and the
    /// `round - 1` past rounds: `ys` (noiseless) or `xs` and `noise`
    /// (`n_j + nfb_j`, noisy). Unused slots are zero.
    pub fn assemble(&self, g: &mut Graph<T>, round: usize, u: Var, xs: &[Var], ys: &[Var], noise: &[Var]) -> Result<Var> {
        let arch = &self.model.arch;
        let rows = g.value(u).rows();
        let past = round - 1;
        let pad = arch.slots() - past;
        let mut parts = vec![u];
        let push_block = |g: &mut Graph<T>, vals: &[Var], parts: &mut Vec<Var>| -> Result<()> {
            if vals.len() != past {
                return shape(format!("round {round} needs {past} past entries, got {}", vals.len()));
            }
            parts.extend_from_slice(vals);
            if pad > 0 {
                parts.push(g.constant(Tensor::zeros(rows, pad))?);
            }
            Ok(())
        };
        match arch.feedback_mode {
            FeedbackMode::Noiseless => push_block(g, ys, &mut parts)?,
            FeedbackMode::Noisy => {
                push_block(g, xs, &mut parts)?;
                push_block(g, noise, &mut parts)?;
            }
        }
        g.concat_cols(&parts)
    }

    /// All `D` rounds over the channel realization `draw`, then the decoder.
    pub fn unroll(&self, g: &mut Graph<T>, draw: &ChannelDraw<T>, norm: Norm) -> Result<Unrolled> {
        let (xs, ys, raws) = self.transmit(g, draw, norm)?;
        let y = g.concat_cols(&ys)?;
        let logits = self.decode(g, y)?;
        Ok(Unrolled { xs, ys, raws, logits })
    }

    /// The `D` encoder rounds alone; returns per-round `(xs, ys, raws)`.
    #[allow(clippy::type_complexity)]
    pub fn transmit(&self, g: &mut Graph<T>, draw: &ChannelDraw<T>, norm: Norm) -> Result<(Vec<Var>, Vec<Var>, Vec<Var>)> {
        let arch = self.model.arch;
        if draw.fwd.cols() != arch.d {
            return shape(format!("noise has {} rounds, model has D = {}", draw.fwd.cols(), arch.d));
        }
        let u = g.constant(draw.bits_pm1(arch.k))?;
        let mut xs = Vec::with_capacity(arch.d);
        let mut ys = Vec::with_capacity(arch.d);
        let mut raws = Vec::with_capacity(arch.d);
        let mut noise = Vec::new();
        for round in 1..=arch.d {
            let input = self.assemble(g, round, u, &xs, &ys, &noise)?;
            let (x, raw) = self.encode_round(g, round, input, norm)?;
            let n = g.constant(Tensor::from_vec(draw.len(), 1, draw.fwd.col(round - 1))?)?;
            let y = g.add(x, n)?;
            if let Some(fb) = &draw.fb {
                let nn = Tensor::from_fn(draw.len(), 1, |r, _| draw.fwd.get(r, round - 1) + fb.get(r, round - 1));
                noise.push(g.constant(nn)?);
            }
            xs.push(x);
            ys.push(y);
            raws.push(raw);
        }
        Ok((xs, ys, raws))
    }
}

/// Row-level encoder input: message bits as `±1`, then the feedback slots in
/// round order, zero-padded. `history` holds one `(x_j, y_tilde_j)` pair per
/// past round, where `y_tilde_j` is what the feedback link returned.
pub fn assemble_features<T: Scalar>(arch: &ArchitectureConfig, round: usize, bits: &[u8], history: &[(T, T)]) -> Result<Vec<T>> {
    if bits.len() != arch.k {
        return shape(format!("{} bits for K = {}", bits.len(), arch.k));
    }
    if !(1..=arch.d).contains(&round) || history.len() != round - 1 {
        return shape(format!("round {round} needs {} history entries, got {}", round.saturating_sub(1), history.len()));
    }
    let mut row: Vec<T> = bits.iter().map(|&b| if b == 1 { T::one() } else { -T::one() }).collect();
    let slot = |vals: Vec<T>| {
        let mut v = vals;
        v.resize(arch.slots(), T::zero());
        v
    };
    match arch.feedback_mode {
        FeedbackMode::Noiseless => row.extend(slot(history.iter().map(|&(_, y)| y).collect())),
        FeedbackMode::Noisy => {
            row.extend(slot(history.iter().map(|&(x, _)| x).collect()));
            row.extend(slot(history.iter().map(|&(x, yt)| yt - x).collect()));
        }
    }
    Ok(row)
}
