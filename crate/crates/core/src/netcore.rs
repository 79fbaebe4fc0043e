//! Small feedforward networks with exact reverse-mode gradients.
//!
//! A [`NetworkSpec`] lists dense blocks. The first block is the stem and is
//! applied once; the remaining blocks form the body, which is cascaded
//! `repeat` times. Each block computes `h ↦ act(W h + b)` and, when `skip` is
//! set, adds the identity shortcut `h`. A bias-free linear readout maps the
//! last hidden width to `output_dim`, so an all-zero parameter vector yields
//! all-zero logits. An empty block list gives the linear model `f = W x`.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::generators::{one_hot, ConvexGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Softplus,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Softplus => {
                if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative; relu uses 0 at the kink.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub width: usize,
    pub activation: Activation,
    #[serde(default)]
    pub skip: bool,
}

impl Block {
    pub fn dense(width: usize, activation: Activation) -> Self {
        Self { width, activation, skip: false }
    }

    pub fn residual(width: usize, activation: Activation) -> Self {
        Self { width, activation, skip: true }
    }
}

fn default_repeat() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub blocks: Vec<Block>,
    #[serde(default = "default_repeat")]
    pub repeat: usize,
}

/// One expanded dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    /// Index into `NetworkSpec::blocks`.
    pub block: usize,
    /// Which repetition of the body this layer belongs to (0 for the stem).
    pub copy: usize,
    pub in_dim: usize,
    pub width: usize,
    pub activation: Activation,
    pub skip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    Weight,
    Bias,
    Readout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutEntry {
    /// Expanded layer index; `None` for the readout.
    pub layer: Option<usize>,
    pub block: Option<usize>,
    pub role: TensorRole,
    pub range: Range<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
}

/// Index ranges of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    pub len: usize,
}

impl NetworkSpec {
    /// Dense stem followed by `k` plain dense blocks.
    pub fn model_a(input_dim: usize, output_dim: usize, width: usize, k: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            blocks: vec![Block::dense(width, Activation::Tanh), Block::dense(width, Activation::Tanh)],
            repeat: k,
        }
    }

    /// Model A with identity shortcuts around the repeated blocks.
    pub fn model_b(input_dim: usize, output_dim: usize, width: usize, k: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            blocks: vec![Block::dense(width, Activation::Tanh), Block::residual(width, Activation::Tanh)],
            repeat: k,
        }
    }

    /// Wider relu variant with a two-layer repeated body.
    pub fn model_c(input_dim: usize, output_dim: usize, width: usize, k: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            blocks: vec![
                Block::dense(width, Activation::Relu),
                Block::dense(width, Activation::Relu),
                Block::dense(width, Activation::Softplus),
            ],
            repeat: k,
        }
    }

    /// Model C with identity shortcuts around each repeated layer.
    pub fn model_d(input_dim: usize, output_dim: usize, width: usize, k: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            blocks: vec![
                Block::dense(width, Activation::Relu),
                Block::residual(width, Activation::Relu),
                Block::residual(width, Activation::Softplus),
            ],
            repeat: k,
        }
    }

    /// Bias-free linear map `f = W x`.
    pub fn linear(input_dim: usize, output_dim: usize) -> Self {
        Self { input_dim, output_dim, blocks: Vec::new(), repeat: 1 }
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut out = Vec::new();
        let mut in_dim = self.input_dim;
        let mut push = |block: usize, copy: usize, b: &Block, in_dim: &mut usize| {
            out.push(LayerShape {
                block,
                copy,
                in_dim: *in_dim,
                width: b.width,
                activation: b.activation,
                skip: b.skip,
            });
            *in_dim = b.width;
        };
        if let Some(stem) = self.blocks.first() {
            push(0, 0, stem, &mut in_dim);
            for copy in 0..self.repeat {
                for (i, b) in self.blocks.iter().enumerate().skip(1) {
                    push(i, copy, b, &mut in_dim);
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(invalid("network input and output dimensions must be positive"));
        }
        if self.repeat == 0 {
            return Err(invalid("repeat count must be positive"));
        }
        for l in self.layers() {
            if l.width == 0 {
                return Err(invalid(format!("block {} has zero width", l.block)));
            }
            if l.skip && l.in_dim != l.width {
                return Err(invalid(format!(
                    "skip block {} maps width {} to {}; identity shortcut needs equal widths",
                    l.block, l.in_dim, l.width
                )));
            }
        }
        Ok(())
    }

    fn last_width(&self) -> usize {
        self.blocks.last().map_or(self.input_dim, |b| b.width)
    }

    pub fn layout(&self) -> Layout {
        let mut entries = Vec::new();
        let mut off = 0;
        for (i, l) in self.layers().iter().enumerate() {
            let w = l.width * l.in_dim;
            entries.push(LayoutEntry {
                layer: Some(i),
                block: Some(l.block),
                role: TensorRole::Weight,
                range: off..off + w,
                fan_in: l.in_dim,
                fan_out: l.width,
            });
            off += w;
            entries.push(LayoutEntry {
                layer: Some(i),
                block: Some(l.block),
                role: TensorRole::Bias,
                range: off..off + l.width,
                fan_in: l.in_dim,
                fan_out: l.width,
            });
            off += l.width;
        }
        let last = self.last_width();
        entries.push(LayoutEntry {
            layer: None,
            block: None,
            role: TensorRole::Readout,
            range: off..off + self.output_dim * last,
            fan_in: last,
            fan_out: self.output_dim,
        });
        off += self.output_dim * last;
        Layout { entries, len: off }
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.width * (l.in_dim + 1)).sum::<usize>()
            + self.output_dim * self.last_width()
    }
}

/// Flat parameter vector θ together with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParamVector {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layout = spec.layout();
        Self { values: vec![0.0; layout.len], layout }
    }

    pub fn from_values(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        let layout = spec.layout();
        if values.len() != layout.len {
            return Err(invalid(format!(
                "parameter vector has length {}, network needs {}",
                values.len(),
                layout.len
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { values, layout: self.layout.clone() }
    }
}

/// Uniform fan-scaled initialization: weights in ±scale·√(6/(fan_in+fan_out)), biases zero.
pub fn init_params(spec: &NetworkSpec, seed: u64, scale: f64) -> Result<ParamVector> {
    spec.validate()?;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(invalid(format!("init scale must be positive, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = ParamVector::zeros(spec);
    for e in &theta.layout.entries {
        if e.role == TensorRole::Bias {
            continue;
        }
        let limit = scale * (6.0 / (e.fan_in + e.fan_out) as f64).sqrt();
        for v in &mut theta.values[e.range.clone()] {
            *v = rng.random_range(-limit..limit);
        }
    }
    Ok(theta)
}

/// Per-output parameter gradients `∂f_i/∂θ_j` at one input, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Jacobian {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("ragged Jacobian rows"));
        }
        let n = rows.len();
        Ok(Self { rows: n, cols, data: rows.concat() })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `Jᵀ e`.
    pub fn transpose_mul(&self, e: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, ei) in e.iter().enumerate() {
            for (o, j) in out.iter_mut().zip(self.row(i)) {
                *o += ei * j;
            }
        }
        out
    }
}

/// Forward activations retained for reverse sweeps.
#[derive(Debug, Clone)]
pub struct Tape<'a> {
    spec: &'a NetworkSpec,
    theta: &'a [f64],
    layers: Vec<LayerShape>,
    /// `hidden[0] = x`, `hidden[l+1]` = output of layer l.
    hidden: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl<'a> Tape<'a> {
    pub fn record(spec: &'a NetworkSpec, theta: &'a ParamVector, x: &[f64]) -> Result<Self> {
        if x.len() != spec.input_dim {
            return Err(invalid(format!(
                "input has length {}, network expects {}",
                x.len(),
                spec.input_dim
            )));
        }
        if theta.len() != spec.param_count() {
            return Err(invalid(format!(
                "parameter vector has length {}, network needs {}",
                theta.len(),
                spec.param_count()
            )));
        }
        let layers = spec.layers();
        let p = &theta.values[..];
        let mut hidden = Vec::with_capacity(layers.len() + 1);
        let mut pre = Vec::with_capacity(layers.len());
        hidden.push(x.to_vec());
        let mut off = 0;
        for l in &layers {
            let h = hidden.last().unwrap();
            let w = &p[off..off + l.width * l.in_dim];
            let b = &p[off + l.width * l.in_dim..off + l.width * (l.in_dim + 1)];
            off += l.width * (l.in_dim + 1);
            let z: Vec<f64> = (0..l.width)
                .map(|i| {
                    let row = &w[i * l.in_dim..(i + 1) * l.in_dim];
                    b[i] + row.iter().zip(h).map(|(a, c)| a * c).sum::<f64>()
                })
                .collect();
            let mut out: Vec<f64> = z.iter().map(|&v| l.activation.apply(v)).collect();
            if l.skip {
                out.iter_mut().zip(h).for_each(|(o, hi)| *o += hi);
            }
            pre.push(z);
            hidden.push(out);
        }
        let h = hidden.last().unwrap();
        let width = h.len();
        let r = &p[off..off + spec.output_dim * width];
        let logits = (0..spec.output_dim)
            .map(|i| r[i * width..(i + 1) * width].iter().zip(h).map(|(a, c)| a * c).sum())
            .collect();
        Ok(Self { spec, theta: p, layers, hidden, pre, logits })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Smallest |pre-activation| over all hidden units (relu kink distance).
    pub fn min_abs_preactivation(&self) -> f64 {
        self.pre.iter().flatten().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    /// One reverse sweep: returns `(∂f/∂θ)ᵀ c` for an output cotangent `c`.
    pub fn backward(&self, cotangent: &[f64]) -> Vec<f64> {
        debug_assert_eq!(cotangent.len(), self.spec.output_dim);
        let p = self.theta;
        let mut grad = vec![0.0; p.len()];
        let h_last = self.hidden.last().unwrap();
        let width = h_last.len();
        let r_off = p.len() - self.spec.output_dim * width;
        let r = &p[r_off..];
        let mut delta = vec![0.0; width];
        for (i, &c) in cotangent.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let g = &mut grad[r_off + i * width..r_off + (i + 1) * width];
            let row = &r[i * width..(i + 1) * width];
            for j in 0..width {
                g[j] = c * h_last[j];
                delta[j] += c * row[j];
            }
        }
        let mut off = r_off;
        for (li, l) in self.layers.iter().enumerate().rev() {
            off -= l.width * (l.in_dim + 1);
            let w = &p[off..off + l.width * l.in_dim];
            let h_in = &self.hidden[li];
            let dz: Vec<f64> =
                self.pre[li].iter().zip(&delta).map(|(&z, &d)| d * l.activation.derivative(z)).collect();
            let mut next = if l.skip { delta.clone() } else { vec![0.0; l.in_dim] };
            for i in 0..l.width {
                let d = dz[i];
                grad[off + l.width * l.in_dim + i] = d;
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + i * l.in_dim..off + (i + 1) * l.in_dim];
                let row = &w[i * l.in_dim..(i + 1) * l.in_dim];
                for j in 0..l.in_dim {
                    g[j] = d * h_in[j];
                    next[j] += d * row[j];
                }
            }
            delta = next;
        }
        grad
    }

    pub fn jacobian(&self) -> Jacobian {
        let out = self.spec.output_dim;
        let mut data = Vec::with_capacity(out * self.theta.len());
        let mut unit = vec![0.0; out];
        for i in 0..out {
            unit[i] = 1.0;
            data.extend(self.backward(&unit));
            unit[i] = 0.0;
        }
        Jacobian { rows: out, cols: self.theta.len(), data }
    }
}

/// Logits `f_θ(x)`.
pub fn forward(spec: &NetworkSpec, theta: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    Ok(Tape::record(spec, theta, x)?.logits)
}

/// Output error `e = ∇Φ*(f) − 1_y`, the gradient of d_Φ(1_y, ·) at the logits.
pub fn link_error(gen: &dyn ConvexGenerator, logits: &[f64], y: usize) -> Result<Vec<f64>> {
    let target = one_hot(y, logits.len())?;
    Ok(gen
        .grad_conjugate(logits)
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| p - t)
        .collect())
}

/// Per-sample loss, its parameter gradient, and the logits, from one forward and one reverse sweep.
pub fn loss_and_grad(
    spec: &NetworkSpec,
    theta: &ParamVector,
    gen: &dyn ConvexGenerator,
    x: &[f64],
    y: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let tape = Tape::record(spec, theta, x)?;
    let target = one_hot(y, spec.output_dim)?;
    let loss = gen.fy_loss(target.as_slice(), tape.logits())?;
    let e = link_error(gen, tape.logits(), y)?;
    let g = tape.backward(&e);
    Ok((loss, g, tape.logits))
}

/// `∇_θ d_Φ(1_y, f_θ(x))`.
pub fn loss_grad(
    spec: &NetworkSpec,
    theta: &ParamVector,
    gen: &dyn ConvexGenerator,
    x: &[f64],
    y: usize,
) -> Result<Vec<f64>> {
    Ok(loss_and_grad(spec, theta, gen, x, y)?.1)
}

/// Jacobian of the logits, one reverse sweep per output coordinate.
pub fn jacobian(spec: &NetworkSpec, theta: &ParamVector, x: &[f64]) -> Result<Jacobian> {
    Ok(Tape::record(spec, theta, x)?.jacobian())
}

/// Central-difference approximation of [`loss_grad`], coordinate by coordinate.
pub fn fd_grad_oracle(
    spec: &NetworkSpec,
    theta: &ParamVector,
    gen: &dyn ConvexGenerator,
    x: &[f64],
    y: usize,
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let target = one_hot(y, spec.output_dim)?;
    let loss = |v: &ParamVector| -> Result<f64> { gen.fy_loss(target.as_slice(), &forward(spec, v, x)?) };
    let mut probe = theta.clone();
    let mut out = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let orig = probe.values[j];
        probe.values[j] = orig + step;
        let up = loss(&probe)?;
        probe.values[j] = orig - step;
        let down = loss(&probe)?;
        probe.values[j] = orig;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Generator;

    fn tanh_net() -> NetworkSpec {
        NetworkSpec {
            input_dim: 3,
            output_dim: 2,
            blocks: vec![Block::dense(4, Activation::Tanh), Block::residual(4, Activation::Softplus)],
            repeat: 2,
        }
    }

    #[test]
    fn layout_partitions_parameters() {
        let spec = NetworkSpec::model_d(5, 3, 6, 2);
        let layout = spec.layout();
        assert_eq!(layout.len, spec.param_count());
        let mut next = 0;
        for e in &layout.entries {
            assert_eq!(e.range.start, next);
            next = e.range.end;
        }
        assert_eq!(next, layout.len);
    }

    #[test]
    fn layers_expand_stem_and_body() {
        let spec = tanh_net();
        let layers = spec.layers();
        assert_eq!(layers.len(), 3);
        assert_eq!((layers[0].in_dim, layers[0].width), (3, 4));
        assert!(layers[1].skip && layers[2].skip);
        assert_eq!((layers[1].copy, layers[2].copy), (0, 1));
    }

    #[test]
    fn skip_width_mismatch_rejected() {
        let spec = NetworkSpec {
            input_dim: 3,
            output_dim: 2,
            blocks: vec![Block::residual(4, Activation::Tanh)],
            repeat: 1,
        };
        assert!(spec.validate().is_err());
        assert!(NetworkSpec { repeat: 0, ..tanh_net() }.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let spec = tanh_net();
        let a = init_params(&spec, 7, 1.0).unwrap();
        let b = init_params(&spec, 7, 1.0).unwrap();
        assert_eq!(a.values, b.values);
        let c = init_params(&spec, 8, 1.0).unwrap();
        assert_ne!(a.values, c.values);
        assert!(init_params(&spec, 7, 0.0).is_err());
        for e in &a.layout.entries {
            if e.role == TensorRole::Bias {
                assert!(a.values[e.range.clone()].iter().all(|v| *v == 0.0));
            } else {
                let lim = (6.0 / (e.fan_in + e.fan_out) as f64).sqrt();
                assert!(a.values[e.range.clone()].iter().all(|v| v.abs() <= lim));
            }
        }
    }

    #[test]
    fn zero_params_give_zero_logits() {
        for spec in [
            NetworkSpec::model_a(4, 3, 5, 2),
            NetworkSpec::model_b(4, 3, 5, 2),
            NetworkSpec::model_c(4, 3, 5, 1),
            NetworkSpec::model_d(4, 3, 5, 3),
        ] {
            let theta = ParamVector::zeros(&spec);
            assert_eq!(forward(&spec, &theta, &[1.0, -2.0, 0.5, 3.0]).unwrap(), vec![0.0; 3]);
        }
    }

    #[test]
    fn identity_linear_model_passes_input_through() {
        let spec = NetworkSpec::linear(3, 3);
        let theta =
            ParamVector::from_values(&spec, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(forward(&spec, &theta, &[0.1, -0.2, 0.3]).unwrap(), vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn forward_rejects_bad_dimensions() {
        let spec = tanh_net();
        let theta = init_params(&spec, 1, 1.0).unwrap();
        assert!(forward(&spec, &theta, &[1.0, 2.0]).is_err());
        let short = ParamVector::zeros(&NetworkSpec::linear(3, 2));
        assert!(forward(&spec, &short, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn forward_matches_hand_evaluation() {
        // 2 -> 2 tanh -> 1 readout, written out by hand
        let spec = NetworkSpec {
            input_dim: 2,
            output_dim: 1,
            blocks: vec![Block::dense(2, Activation::Tanh)],
            repeat: 1,
        };
        let v = vec![0.5, -1.0, 2.0, 0.25, 0.1, -0.2, 1.5, -0.7];
        let theta = ParamVector::from_values(&spec, v).unwrap();
        let x = [0.3, 0.8];
        let h0 = (0.5 * 0.3 - 1.0 * 0.8 + 0.1f64).tanh();
        let h1 = (2.0 * 0.3 + 0.25 * 0.8 - 0.2f64).tanh();
        let expected = 1.5 * h0 - 0.7 * h1;
        let got = forward(&spec, &theta, &x).unwrap();
        assert!((got[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn linear_jacobian_places_input_in_row_block() {
        let spec = NetworkSpec::linear(3, 2);
        let theta = init_params(&spec, 3, 1.0).unwrap();
        let x = [0.4, -1.0, 2.0];
        let j = jacobian(&spec, &theta, &x).unwrap();
        assert_eq!(j.row(0), &[0.4, -1.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(j.row(1), &[0.0, 0.0, 0.0, 0.4, -1.0, 2.0]);
    }

    #[test]
    fn zero_theta_two_class_gradient_uses_uniform_error() {
        let spec = NetworkSpec::model_a(2, 2, 3, 1);
        let theta = ParamVector::zeros(&spec);
        let gen = Generator::NegEntropySimplex { dim: 2 };
        let x = [0.5, -0.5];
        let e = link_error(&gen, &forward(&spec, &theta, &x).unwrap(), 0).unwrap();
        assert_eq!(e, vec![-0.5, 0.5]);
        let g = loss_grad(&spec, &theta, &gen, &x, 0).unwrap();
        let j = jacobian(&spec, &theta, &x).unwrap();
        assert_eq!(g, j.transpose_mul(&e));
    }

    #[test]
    fn relu_zero_params_stay_finite() {
        let spec = NetworkSpec::model_c(3, 4, 5, 2);
        let theta = ParamVector::zeros(&spec);
        let j = jacobian(&spec, &theta, &[1.0, 2.0, 3.0]).unwrap();
        assert!(j.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn link_error_shrinks_as_prediction_sharpens() {
        let gen = Generator::NegEntropySimplex { dim: 3 };
        let mut prev = f64::INFINITY;
        for t in [0.0, 1.0, 3.0, 10.0, 30.0] {
            let e = link_error(&gen, &[t, 0.0, 0.0], 0).unwrap();
            let n: f64 = e.iter().map(|v| v * v).sum();
            assert!(n < prev);
            prev = n;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn fd_oracle_is_exact_on_quadratic_toy() {
        // linear model + squared loss is quadratic in θ: central differences are exact up to rounding
        let spec = NetworkSpec::linear(2, 2);
        let theta = init_params(&spec, 11, 1.0).unwrap();
        let gen = Generator::SquaredL2 { dim: 2 };
        let x = [0.7, -0.3];
        let g = loss_grad(&spec, &theta, &gen, &x, 1).unwrap();
        let fd = fd_grad_oracle(&spec, &theta, &gen, &x, 1, 1e-3).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(fd_grad_oracle(&spec, &theta, &gen, &x, 1, 0.0).is_err());
    }

    #[test]
    fn reverse_mode_matches_finite_differences() {
        let spec = tanh_net();
        let gen = Generator::NegEntropySimplex { dim: 2 };
        let theta = init_params(&spec, 5, 1.0).unwrap();
        let x = [0.2, -0.9, 1.1];
        let g = loss_grad(&spec, &theta, &gen, &x, 1).unwrap();
        let fd = fd_grad_oracle(&spec, &theta, &gen, &x, 1, 1e-6).unwrap();
        let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / scale < 1e-5, "relative error {}", err / scale);
    }
}
