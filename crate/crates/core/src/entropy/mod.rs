//! Kozachenko–Leonenko differential entropy estimation.
//!
//! ```text
//! Ĥ = ψ(n) − ψ(k) + log V_d + (d/n) Σ_i log r_i
//! ```
//!
//! with `r_i` the distance from sample `i` to its k-th nearest neighbour and
//! `V_d` the volume of the unit Euclidean ball in `d` dimensions.

mod digamma;
pub mod knn;

pub use digamma::digamma;
pub use knn::kth_neighbor_distances;

use crate::{Error, Result};

/// Neighbour distances below this are treated as duplicates.
pub const MIN_DISTANCE: f64 = 1e-12;

/// Default neighbour order.
pub const DEFAULT_K: usize = 3;

/// `n` points in `d` dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    dim: usize,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::shape(format!(
                "{} values cannot be split into points of dimension {dim}",
                values.len()
            )));
        }
        if values.len() / dim < 2 {
            return Err(Error::invalid("a sample set needs at least two points"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        Ok(Self { values, dim })
    }

    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub nats: f64,
    pub n: usize,
    pub k: usize,
    /// Neighbour distances that were clamped to [`MIN_DISTANCE`].
    pub zero_distances: usize,
}

/// `log V_d`, via `V_d = V_{d−2} · 2π / d` from `V_0 = 1`, `V_1 = 2`.
pub fn log_unit_ball_volume(d: usize) -> f64 {
    let mut log_v = if d % 2 == 0 { 0.0 } else { 2f64.ln() };
    let mut j = if d % 2 == 0 { 2 } else { 3 };
    while j <= d {
        log_v += (2.0 * std::f64::consts::PI / j as f64).ln();
        j += 2;
    }
    log_v
}

/// Kozachenko–Leonenko estimate in nats.
pub fn kl_entropy(samples: &SampleSet, k: usize) -> Result<EntropyEstimate> {
    let n = samples.len();
    let first = samples.point(0);
    if (1..n).all(|i| samples.point(i) == first) {
        return Err(Error::Degenerate(
            "all samples are identical; entropy is undefined".into(),
        ));
    }
    let r = kth_neighbor_distances(samples, k)?;
    let mut zero = 0;
    let mut sum_log = 0.0;
    for &ri in &r {
        if ri < MIN_DISTANCE {
            zero += 1;
            sum_log += MIN_DISTANCE.ln();
        } else {
            sum_log += ri.ln();
        }
    }
    let d = samples.dim() as f64;
    let nats = digamma(n as f64)? - digamma(k as f64)?
        + log_unit_ball_volume(samples.dim())
        + d * sum_log / n as f64;
    Ok(EntropyEstimate {
        nats,
        n,
        k,
        zero_distances: zero,
    })
}
