//! Dense feedforward networks with rectifier hidden layers and an identity
//! output layer.
//!
//! Parameters live in one flat buffer. Layer `l` owns a row-major block of
//! shape `out × (in + 1)`; the last column of every row is the bias. The
//! same layout is used for gradients, so optimizers and the Gaussian
//! posterior in [`crate::bnn`] can treat a network as a plain vector.
//!
//! The checked entry points ([`forward`], [`backward`]) validate shapes and
//! finiteness. Hot loops use a reusable [`Trace`] directly.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Layer widths from input to output. Hidden layers use `max(x, 0)`, the
/// output layer is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    layer_sizes: Vec<usize>,
}

impl MlpArch {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid(
                "an architecture needs at least an input and an output size",
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        Ok(Self { layer_sizes })
    }

    /// `input → hidden… → output`.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight matrices.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// `(rows, cols)` of matrix `l`, bias column included.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.layer_sizes[l + 1], self.layer_sizes[l] + 1)
    }

    pub fn num_params(&self) -> usize {
        (0..self.num_layers())
            .map(|l| {
                let (r, c) = self.layer_shape(l);
                r * c
            })
            .sum()
    }

    /// Offset of matrix `l` in the flat buffer.
    pub fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|i| {
                let (r, c) = self.layer_shape(i);
                r * c
            })
            .sum()
    }

    /// Fan-in (excluding the bias) of every parameter, in flat order.
    pub fn fan_in_per_param(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in 0..self.num_layers() {
            let (r, c) = self.layer_shape(l);
            out.extend(std::iter::repeat_n(c - 1, r * c));
        }
        out
    }
}

/// Flat parameter (or gradient) buffer for one network realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub values: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(arch: &MlpArch) -> Self {
        Self {
            values: vec![0.0; arch.num_params()],
        }
    }

    pub fn from_values(arch: &MlpArch, values: Vec<f64>) -> Result<Self> {
        let p = Self { values };
        p.check(arch)?;
        Ok(p)
    }

    /// Build from per-layer row-major matrices (bias as last column).
    pub fn from_layers(arch: &MlpArch, layers: &[Vec<Vec<f64>>]) -> Result<Self> {
        if layers.len() != arch.num_layers() {
            return Err(Error::shape(format!(
                "expected {} layers, got {}",
                arch.num_layers(),
                layers.len()
            )));
        }
        let mut values = Vec::with_capacity(arch.num_params());
        for (l, m) in layers.iter().enumerate() {
            let (r, c) = arch.layer_shape(l);
            if m.len() != r || m.iter().any(|row| row.len() != c) {
                return Err(Error::shape(format!("layer {l} must be {r}x{c}")));
            }
            for row in m {
                values.extend_from_slice(row);
            }
        }
        Ok(Self { values })
    }

    pub fn layer<'a>(&'a self, arch: &MlpArch, l: usize) -> &'a [f64] {
        let (r, c) = arch.layer_shape(l);
        let off = arch.layer_offset(l);
        &self.values[off..off + r * c]
    }

    pub fn check(&self, arch: &MlpArch) -> Result<()> {
        if self.values.len() != arch.num_params() {
            return Err(Error::shape(format!(
                "parameter buffer has {} entries, architecture {:?} needs {}",
                self.values.len(),
                arch.layer_sizes(),
                arch.num_params()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("parameter {i} is not finite")));
        }
        Ok(())
    }
}

/// Activations recorded by a forward pass, reused across calls.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the post-activation output of
    /// matrix `l`.
    acts: Vec<Vec<f64>>,
    /// Reverse-pass scratch, one buffer per layer width.
    deltas: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(arch: &MlpArch) -> Self {
        let acts = arch.layer_sizes().iter().map(|&s| vec![0.0; s]).collect();
        let deltas = arch.layer_sizes().iter().map(|&s| vec![0.0; s]).collect();
        Self { acts, deltas }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    /// Forward pass without validation. Panics on length mismatch.
    pub fn forward(&mut self, arch: &MlpArch, params: &[f64], input: &[f64]) -> &[f64] {
        self.acts[0].copy_from_slice(input);
        let last = arch.num_layers() - 1;
        let mut off = 0;
        for l in 0..=last {
            let (rows, cols) = arch.layer_shape(l);
            let w = &params[off..off + rows * cols];
            off += rows * cols;
            let (prev, next) = self.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let y = &mut next[0];
            for (i, yi) in y.iter_mut().enumerate() {
                let row = &w[i * cols..(i + 1) * cols];
                let mut s = row[cols - 1];
                for (wij, xj) in row[..cols - 1].iter().zip(x) {
                    s += wij * xj;
                }
                *yi = if l < last { s.max(0.0) } else { s };
            }
        }
        self.output()
    }

    /// Reverse pass for the most recent [`Trace::forward`].
    ///
    /// Parameter gradients are *added* into `param_grad` when given; the
    /// input gradient overwrites `input_grad`. A rectifier whose output is
    /// exactly zero passes no gradient.
    pub fn backward(
        &mut self,
        arch: &MlpArch,
        params: &[f64],
        cotangent: &[f64],
        mut param_grad: Option<&mut [f64]>,
        input_grad: &mut [f64],
    ) {
        let nl = arch.num_layers();
        self.deltas[nl].copy_from_slice(cotangent);
        for l in (0..nl).rev() {
            let (rows, cols) = arch.layer_shape(l);
            let off = arch.layer_offset(l);
            let w = &params[off..off + rows * cols];
            let (lower, upper) = self.deltas.split_at_mut(l + 1);
            let delta = &upper[0];
            let dprev = &mut lower[l];
            let x = &self.acts[l];
            if let Some(g) = param_grad.as_deref_mut() {
                let g = &mut g[off..off + rows * cols];
                for (i, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let grow = &mut g[i * cols..(i + 1) * cols];
                    for (gij, xj) in grow[..cols - 1].iter_mut().zip(x) {
                        *gij += d * xj;
                    }
                    grow[cols - 1] += d;
                }
            }
            dprev.iter_mut().for_each(|v| *v = 0.0);
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &w[i * cols..(i + 1) * cols];
                for (dj, wij) in dprev.iter_mut().zip(&row[..cols - 1]) {
                    *dj += d * wij;
                }
            }
            if l > 0 {
                for (dj, &aj) in dprev.iter_mut().zip(&self.acts[l]) {
                    if aj <= 0.0 {
                        *dj = 0.0;
                    }
                }
            }
        }
        input_grad.copy_from_slice(&self.deltas[0]);
    }

    fn first_non_finite_layer(&self) -> Option<usize> {
        self.acts
            .iter()
            .skip(1)
            .position(|a| a.iter().any(|v| !v.is_finite()))
    }
}

/// Output of the network for one input vector.
pub fn forward(arch: &MlpArch, params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != arch.input_dim() {
        return Err(Error::shape(format!(
            "input has length {}, architecture expects {}",
            input.len(),
            arch.input_dim()
        )));
    }
    if params.values.len() != arch.num_params() {
        return Err(Error::shape(format!(
            "parameter buffer has {} entries, architecture needs {}",
            params.values.len(),
            arch.num_params()
        )));
    }
    let mut trace = Trace::new(arch);
    Ok(trace.forward(arch, &params.values, input).to_vec())
}

/// Gradients of `cotangent · forward(input)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: MlpParams,
    pub input: Vec<f64>,
}

pub fn backward(
    arch: &MlpArch,
    params: &MlpParams,
    input: &[f64],
    cotangent: &[f64],
) -> Result<Gradients> {
    if cotangent.len() != arch.output_dim() {
        return Err(Error::shape(format!(
            "cotangent has length {}, architecture outputs {}",
            cotangent.len(),
            arch.output_dim()
        )));
    }
    if input.len() != arch.input_dim() || params.values.len() != arch.num_params() {
        return Err(Error::shape("input or parameter buffer does not match architecture"));
    }
    let mut trace = Trace::new(arch);
    trace.forward(arch, &params.values, input);
    if let Some(l) = trace.first_non_finite_layer() {
        return Err(Error::NonFinite { layer: l });
    }
    let mut g = MlpParams::zeros(arch);
    let mut gi = vec![0.0; arch.input_dim()];
    trace.backward(arch, &params.values, cotangent, Some(&mut g.values), &mut gi);
    if g.values.iter().chain(&gi).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { layer: arch.num_layers() - 1 });
    }
    Ok(Gradients { params: g, input: gi })
}
