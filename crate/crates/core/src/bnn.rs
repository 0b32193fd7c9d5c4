//! Bayesian neural networks with a scalar latent input per datapoint.
//!
//! The model is `y = f(x ⊕ z; W) + ε` with `z ~ N(0, γ)`, `ε ~ N(0, Σ)` and a
//! Gaussian prior `N(0, λ)` on every weight. The posterior is approximated by
//! a fully factorized Gaussian over all weights and all training latents,
//! and fitted by minimizing a black-box α-divergence energy:
//!
//! ```text
//! E = KL(q(W) ‖ p(W))
//!   + (N / |B|) Σ_{n∈B} [ −(1/α) log (1/K) Σ_k exp(α ℓ_{n,k}) + KL(q(z_n) ‖ p(z_n)) ]
//! ```
//!
//! where `ℓ_{n,k}` is the Gaussian log-likelihood of `y_n` under a joint
//! reparameterized draw `(W_k, z_{n,k})`. At `α = 0` the local term becomes
//! the plain Monte-Carlo ELBO data term.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mlp::{MlpArch, MlpParams, Trace};
use crate::optim::Adam;
use crate::rng::{stream, StreamRng};
use crate::stats::log_sum_exp;
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Initial log-variance of every weight factor.
pub const INIT_WEIGHT_LOG_VARIANCE: f64 = -6.907_755_278_982_137; // ln(1e-3)

/// One independent Gaussian factor, variance stored in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFactor {
    pub mean: f64,
    pub log_variance: f64,
}

impl GaussianFactor {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self {
            mean,
            log_variance: variance.ln(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.log_variance.exp()
    }

    pub fn std_dev(&self) -> f64 {
        (0.5 * self.log_variance).exp()
    }
}

/// Regression data stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    input_dim: usize,
    output_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::invalid("a dataset needs at least one row"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::shape(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let d = inputs[0].len();
        let k = targets[0].len();
        if d == 0 || k == 0 {
            return Err(Error::shape("inputs and targets need at least one column"));
        }
        let mut xs = Vec::with_capacity(inputs.len() * d);
        let mut ys = Vec::with_capacity(inputs.len() * k);
        for (i, (x, y)) in inputs.iter().zip(&targets).enumerate() {
            if x.len() != d || y.len() != k {
                return Err(Error::shape(format!("row {i} has inconsistent width")));
            }
            xs.extend_from_slice(x);
            ys.extend_from_slice(y);
        }
        Self::from_flat(inputs.len(), d, k, xs, ys)
    }

    pub fn from_flat(
        n: usize,
        input_dim: usize,
        output_dim: usize,
        inputs: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("a dataset needs at least one row"));
        }
        if inputs.len() != n * input_dim || targets.len() != n * output_dim {
            return Err(Error::shape("flat buffers do not match the declared shape"));
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Self {
            n,
            input_dim,
            output_dim,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }

    /// Append rows of another dataset with the same widths.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.input_dim != self.input_dim || other.output_dim != self.output_dim {
            return Err(Error::shape("cannot concatenate datasets of different widths"));
        }
        self.inputs.extend_from_slice(&other.inputs);
        self.targets.extend_from_slice(&other.targets);
        self.n += other.n;
        Ok(())
    }
}

/// Optimization settings for [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub alpha: f64,
    pub mc_samples: usize,
    pub step_size: f64,
    pub steps: usize,
    pub minibatch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            mc_samples: 20,
            step_size: 1e-2,
            steps: 2000,
            minibatch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.mc_samples == 0 {
            return Err(Error::invalid("mc_samples must be at least 1"));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::invalid("step_size must be positive"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::invalid("minibatch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Architecture and prior hyperparameters for a fresh posterior; input and
/// output widths come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Hidden layer widths.
    pub arch: Vec<usize>,
    pub lambda: f64,
    pub gamma: f64,
    /// Output noise variance, shared by every output dimension.
    pub sigma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            arch: vec![20, 20],
            lambda: 1.0,
            gamma: 1.0,
            sigma: 0.01,
        }
    }
}

/// Factorized Gaussian belief over network weights and training latents.
#[derive(Debug, Clone, PartialEq)]
pub struct BnnPosterior {
    pub arch: MlpArch,
    pub weight_factors: Vec<GaussianFactor>,
    pub latent_factors: Vec<GaussianFactor>,
    pub prior_weight_variance: f64,
    pub prior_latent_variance: f64,
    pub output_noise_variance: Vec<f64>,
}

/// Gradient of the energy with respect to every variational parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGradient {
    pub weight_mean: Vec<f64>,
    pub weight_log_variance: Vec<f64>,
    pub latent_mean: Vec<f64>,
    pub latent_log_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEvaluation {
    pub energy: f64,
    pub gradient: PosteriorGradient,
}

/// Standard-normal draws behind one energy evaluation. Holding them fixed
/// makes the energy a deterministic function of the variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyNoise {
    /// `K` vectors, one per weight draw, each of length `num_params`.
    pub weight_eps: Vec<Vec<f64>>,
    /// One row per batch entry, each of length `K`.
    pub latent_eps: Vec<Vec<f64>>,
}

impl EnergyNoise {
    pub fn sample<R: Rng + ?Sized>(
        num_params: usize,
        batch_len: usize,
        mc_samples: usize,
        rng: &mut R,
    ) -> Self {
        let weight_eps = (0..mc_samples)
            .map(|_| normals(rng, num_params))
            .collect();
        let latent_eps = (0..batch_len).map(|_| normals(rng, mc_samples)).collect();
        Self {
            weight_eps,
            latent_eps,
        }
    }
}

fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `M × S` predictive draws of a `K`-dimensional output.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub weight_draws: usize,
    pub per_weight: usize,
    pub output_dim: usize,
    pub values: Vec<f64>,
}

impl PredictiveSamples {
    pub fn get(&self, m: usize, s: usize) -> &[f64] {
        let i = (m * self.per_weight + s) * self.output_dim;
        &self.values[i..i + self.output_dim]
    }
}

/// `log N(y | mean, diag(Σ))`.
pub fn gaussian_log_density(y: &[f64], mean: &[f64], sigma: &[f64]) -> Result<f64> {
    if y.len() != mean.len() || y.len() != sigma.len() {
        return Err(Error::shape("y, mean and sigma must have equal length"));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid("noise variances must be positive"));
    }
    Ok(log_density_unchecked(y, mean, sigma))
}

fn log_density_unchecked(y: &[f64], mean: &[f64], sigma: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((yk, mk), vk) in y.iter().zip(mean).zip(sigma) {
        let r = yk - mk;
        s += -0.5 * (LN_2PI + vk.ln()) - r * r / (2.0 * vk);
    }
    s
}

/// `KL(N(m, v) ‖ N(0, p))`.
pub fn kl_gaussian(q: &GaussianFactor, prior_variance: f64) -> f64 {
    let v = q.variance();
    0.5 * (v / prior_variance + q.mean * q.mean / prior_variance - 1.0
        + prior_variance.ln()
        - q.log_variance)
}

impl BnnPosterior {
    /// Fresh posterior: weight means from `N(0, 1/fan_in)`, weight variances
    /// `1e-3`, latent means 0 with variance `γ`.
    pub fn init(
        arch: MlpArch,
        n: usize,
        lambda: f64,
        gamma: f64,
        sigma: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("posterior needs at least one training datapoint"));
        }
        if arch.input_dim() < 2 {
            return Err(Error::invalid(
                "input layer must hold at least one feature and the latent",
            ));
        }
        let mut rng = stream(seed, &[0x1417]);
        let weight_factors = arch
            .fan_in_per_param()
            .into_iter()
            .map(|fan_in| {
                let z: f64 = rng.sample(StandardNormal);
                GaussianFactor {
                    mean: z / (fan_in as f64).sqrt(),
                    log_variance: INIT_WEIGHT_LOG_VARIANCE,
                }
            })
            .collect();
        let post = Self {
            latent_factors: vec![GaussianFactor::new(0.0, gamma); n],
            arch,
            weight_factors,
            prior_weight_variance: lambda,
            prior_latent_variance: gamma,
            output_noise_variance: sigma,
        };
        post.validate()?;
        Ok(post)
    }

    /// Posterior sized for `data` with `x ⊕ z` inputs.
    pub fn for_dataset(config: &ModelConfig, data: &Dataset, seed: u64) -> Result<Self> {
        let arch = MlpArch::with_hidden(data.input_dim() + 1, &config.arch, data.output_dim())?;
        Self::init(
            arch,
            data.len(),
            config.lambda,
            config.gamma,
            vec![config.sigma; data.output_dim()],
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior_weight_variance > 0.0) || !self.prior_weight_variance.is_finite() {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(self.prior_latent_variance > 0.0) || !self.prior_latent_variance.is_finite() {
            return Err(Error::invalid("gamma must be positive"));
        }
        if self.output_noise_variance.len() != self.arch.output_dim() {
            return Err(Error::shape("sigma needs one entry per output"));
        }
        if self.output_noise_variance.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("sigma entries must be positive"));
        }
        if self.weight_factors.len() != self.arch.num_params() {
            return Err(Error::shape("one weight factor per network parameter required"));
        }
        if self.latent_factors.is_empty() {
            return Err(Error::invalid("posterior needs at least one latent factor"));
        }
        let bad = self
            .weight_factors
            .iter()
            .chain(&self.latent_factors)
            .any(|f| !f.mean.is_finite() || !f.log_variance.is_finite());
        if bad {
            return Err(Error::invalid("posterior factors must be finite"));
        }
        Ok(())
    }

    /// Number of input features, excluding the latent slot.
    pub fn feature_dim(&self) -> usize {
        self.arch.input_dim() - 1
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    pub fn num_latents(&self) -> usize {
        self.latent_factors.len()
    }

    pub fn mean_weights(&self) -> MlpParams {
        MlpParams {
            values: self.weight_factors.iter().map(|f| f.mean).collect(),
        }
    }

    /// `mean + std · eps`, one entry per weight.
    pub fn weights_from_noise(&self, eps: &[f64]) -> MlpParams {
        MlpParams {
            values: self
                .weight_factors
                .iter()
                .zip(eps)
                .map(|(f, e)| f.mean + f.std_dev() * e)
                .collect(),
        }
    }

    pub fn sample_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> MlpParams {
        MlpParams {
            values: self
                .weight_factors
                .iter()
                .map(|f| {
                    let e: f64 = rng.sample(StandardNormal);
                    f.mean + f.std_dev() * e
                })
                .collect(),
        }
    }

    /// One output draw for fixed weights: `f(x ⊕ z; W) + ε` with
    /// `z ~ N(0, γ)` and `ε ~ N(0, Σ)`.
    pub(crate) fn sample_output<R: Rng + ?Sized>(
        &self,
        weights: &MlpParams,
        trace: &mut Trace,
        input: &mut [f64],
        rng: &mut R,
        out: &mut [f64],
    ) {
        let d = self.feature_dim();
        let z: f64 = rng.sample(StandardNormal);
        input[d] = self.prior_latent_variance.sqrt() * z;
        let f = trace.forward(&self.arch, &weights.values, input);
        for ((o, fk), vk) in out.iter_mut().zip(f).zip(&self.output_noise_variance) {
            let e: f64 = rng.sample(StandardNormal);
            *o = fk + vk.sqrt() * e;
        }
    }

    /// `M` weight draws, `S` latent/noise draws per weight.
    pub fn predict_samples<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        weight_draws: usize,
        per_weight: usize,
        rng: &mut R,
    ) -> Result<PredictiveSamples> {
        if x.len() != self.feature_dim() {
            return Err(Error::shape(format!(
                "input has length {}, model expects {}",
                x.len(),
                self.feature_dim()
            )));
        }
        if weight_draws == 0 || per_weight == 0 {
            return Err(Error::invalid("need at least one weight draw and one sample per draw"));
        }
        let k = self.output_dim();
        let mut trace = Trace::new(&self.arch);
        let mut input = x.to_vec();
        input.push(0.0);
        let mut values = vec![0.0; weight_draws * per_weight * k];
        for m in 0..weight_draws {
            let w = self.sample_weights(rng);
            for s in 0..per_weight {
                let i = (m * per_weight + s) * k;
                self.sample_output(&w, &mut trace, &mut input, rng, &mut values[i..i + k]);
            }
        }
        Ok(PredictiveSamples {
            weight_draws,
            per_weight,
            output_dim: k,
            values,
        })
    }

    fn check_batch(&self, data: &Dataset, batch: &[usize]) -> Result<()> {
        if data.input_dim() != self.feature_dim() || data.output_dim() != self.output_dim() {
            return Err(Error::shape(format!(
                "dataset is {}→{}, model is {}→{}",
                data.input_dim(),
                data.output_dim(),
                self.feature_dim(),
                self.output_dim()
            )));
        }
        if batch.is_empty() {
            return Err(Error::invalid("empty minibatch"));
        }
        if let Some(&bad) = batch
            .iter()
            .find(|&&n| n >= self.num_latents() || n >= data.len())
        {
            return Err(Error::invalid(format!(
                "batch index {bad} out of range for {} latents",
                self.num_latents()
            )));
        }
        Ok(())
    }

    /// Energy and gradient on a minibatch with freshly drawn noise.
    pub fn alpha_energy<R: Rng + ?Sized>(
        &self,
        data: &Dataset,
        batch: &[usize],
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<EnergyEvaluation> {
        if config.mc_samples == 0 {
            return Err(Error::invalid("mc_samples must be at least 1"));
        }
        let noise = EnergyNoise::sample(self.arch.num_params(), batch.len(), config.mc_samples, rng);
        self.alpha_energy_with_noise(data, batch, config.alpha, &noise)
    }

    /// Energy and gradient for fixed standard-normal draws.
    ///
    /// `batch` holds global datapoint indices; entry `b` uses latent factor
    /// `batch[b]` and noise row `noise.latent_eps[b]`.
    pub fn alpha_energy_with_noise(
        &self,
        data: &Dataset,
        batch: &[usize],
        alpha: f64,
        noise: &EnergyNoise,
    ) -> Result<EnergyEvaluation> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let k_samples = noise.weight_eps.len();
        if k_samples == 0 {
            return Err(Error::invalid("mc_samples must be at least 1"));
        }
        self.check_batch(data, batch)?;
        let p = self.arch.num_params();
        if noise.weight_eps.iter().any(|e| e.len() != p)
            || noise.latent_eps.len() != batch.len()
            || noise.latent_eps.iter().any(|e| e.len() != k_samples)
        {
            return Err(Error::shape("noise does not match batch and sample counts"));
        }

        let d = self.feature_dim();
        let n_out = self.output_dim();
        let sigma = &self.output_noise_variance;
        let scale = self.num_latents() as f64 / batch.len() as f64;
        let ln_k = (k_samples as f64).ln();

        let weights: Vec<MlpParams> = noise
            .weight_eps
            .iter()
            .map(|e| self.weights_from_noise(e))
            .collect();
        let mut weight_grads = vec![vec![0.0; p]; k_samples];
        let mut traces = vec![Trace::new(&self.arch); k_samples];
        let mut grad = PosteriorGradient {
            weight_mean: vec![0.0; p],
            weight_log_variance: vec![0.0; p],
            latent_mean: vec![0.0; self.num_latents()],
            latent_log_variance: vec![0.0; self.num_latents()],
        };

        let mut input = vec![0.0; d + 1];
        let mut ell = vec![0.0; k_samples];
        let mut cot = vec![0.0; n_out];
        let mut in_grad = vec![0.0; d + 1];
        let mut data_term = 0.0;

        for (b, &n) in batch.iter().enumerate() {
            let x = data.input(n);
            let y = data.target(n);
            let qz = &self.latent_factors[n];
            let sd_z = qz.std_dev();
            input[..d].copy_from_slice(x);
            for k in 0..k_samples {
                input[d] = qz.mean + sd_z * noise.latent_eps[b][k];
                let out = traces[k].forward(&self.arch, &weights[k].values, &input);
                ell[k] = log_density_unchecked(y, out, sigma);
            }
            let (local, lse) = if alpha == 0.0 {
                (-ell.iter().sum::<f64>() / k_samples as f64, 0.0)
            } else {
                let scaled: Vec<f64> = ell.iter().map(|l| alpha * l).collect();
                let lse = log_sum_exp(&scaled);
                (-(lse - ln_k) / alpha, lse)
            };
            if !local.is_finite() {
                return Err(Error::NonFiniteEnergy { index: b });
            }
            data_term += local;

            for k in 0..k_samples {
                let w_k = if alpha == 0.0 {
                    1.0 / k_samples as f64
                } else {
                    (alpha * ell[k] - lse).exp()
                };
                let out = traces[k].output();
                for j in 0..n_out {
                    cot[j] = -scale * w_k * (y[j] - out[j]) / sigma[j];
                }
                traces[k].backward(
                    &self.arch,
                    &weights[k].values,
                    &cot,
                    Some(&mut weight_grads[k]),
                    &mut in_grad,
                );
                let dz = in_grad[d];
                grad.latent_mean[n] += dz;
                grad.latent_log_variance[n] += dz * noise.latent_eps[b][k] * 0.5 * sd_z;
            }
        }
        let mut energy = scale * data_term;

        for (i, f) in self.weight_factors.iter().enumerate() {
            let half_sd = 0.5 * f.std_dev();
            let mut gm = 0.0;
            let mut gl = 0.0;
            for k in 0..k_samples {
                gm += weight_grads[k][i];
                gl += weight_grads[k][i] * noise.weight_eps[k][i] * half_sd;
            }
            let lam = self.prior_weight_variance;
            energy += kl_gaussian(f, lam);
            grad.weight_mean[i] = gm + f.mean / lam;
            grad.weight_log_variance[i] = gl + 0.5 * (f.variance() / lam - 1.0);
        }

        let gam = self.prior_latent_variance;
        for &n in batch {
            let f = &self.latent_factors[n];
            energy += scale * kl_gaussian(f, gam);
            grad.latent_mean[n] += scale * f.mean / gam;
            grad.latent_log_variance[n] += scale * 0.5 * (f.variance() / gam - 1.0);
        }

        if !energy.is_finite() {
            return Err(Error::NonFiniteEnergy { index: batch.len() });
        }
        Ok(EnergyEvaluation {
            energy,
            gradient: grad,
        })
    }

    /// Flat view `[weight means, weight log-variances, latent means, latent
    /// log-variances]` used by the optimizer.
    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * (self.weight_factors.len() + self.latent_factors.len()));
        v.extend(self.weight_factors.iter().map(|f| f.mean));
        v.extend(self.weight_factors.iter().map(|f| f.log_variance));
        v.extend(self.latent_factors.iter().map(|f| f.mean));
        v.extend(self.latent_factors.iter().map(|f| f.log_variance));
        v
    }

    fn set_flat(&mut self, v: &[f64]) {
        let p = self.weight_factors.len();
        let n = self.latent_factors.len();
        for (i, f) in self.weight_factors.iter_mut().enumerate() {
            f.mean = v[i];
            f.log_variance = v[p + i];
        }
        for (i, f) in self.latent_factors.iter_mut().enumerate() {
            f.mean = v[2 * p + i];
            f.log_variance = v[2 * p + n + i];
        }
    }
}

impl PosteriorGradient {
    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * (self.weight_mean.len() + self.latent_mean.len()));
        v.extend_from_slice(&self.weight_mean);
        v.extend_from_slice(&self.weight_log_variance);
        v.extend_from_slice(&self.latent_mean);
        v.extend_from_slice(&self.latent_log_variance);
        v
    }
}

/// Result of [`train`]: the final posterior and the per-step minibatch energy.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub posterior: BnnPosterior,
    pub energy_trace: Vec<f64>,
}

fn step_noise(posterior: &BnnPosterior, seed: u64, step: u64, batch: &[usize], k: usize) -> EnergyNoise {
    let p = posterior.arch.num_params();
    let mut wrng = stream(seed, &[0xE1, step]);
    let weight_eps = (0..k).map(|_| normals(&mut wrng, p)).collect();
    let latent_eps = batch
        .iter()
        .map(|&n| {
            let mut r: StreamRng = stream(seed, &[0xE2, step, n as u64]);
            normals(&mut r, k)
        })
        .collect();
    EnergyNoise {
        weight_eps,
        latent_eps,
    }
}

/// Adam on the α-energy over shuffled minibatches.
pub fn train(posterior: &BnnPosterior, data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    posterior.validate()?;
    if data.len() != posterior.num_latents() {
        return Err(Error::shape(format!(
            "dataset has {} rows but the posterior holds {} latents",
            data.len(),
            posterior.num_latents()
        )));
    }
    let mut post = posterior.clone();
    let mut params = post.to_flat();
    let mut opt = Adam::new(params.len(), config.step_size);
    let bs = config.minibatch_size.min(data.len());
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0u64;
    let mut trace = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        if cursor + bs > order.len() {
            order = (0..data.len()).collect();
            let mut srng = stream(config.seed, &[0xE3, epoch]);
            shuffle(&mut order, &mut srng);
            epoch += 1;
            cursor = 0;
        }
        let batch = &order[cursor..cursor + bs];
        cursor += bs;
        let noise = step_noise(&post, config.seed, step as u64, batch, config.mc_samples);
        let eval = match post.alpha_energy_with_noise(data, batch, config.alpha, &noise) {
            Ok(e) => e,
            Err(Error::NonFiniteEnergy { .. }) => return Err(Error::Diverged { step }),
            Err(e) => return Err(e),
        };
        trace.push(eval.energy);
        let g = eval.gradient.to_flat();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
        opt.step(&mut params, &g);
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
        post.set_flat(&params);
    }
    Ok(TrainOutcome {
        posterior: post,
        energy_trace: trace,
    })
}

/// Fisher–Yates shuffle.
pub(crate) fn shuffle<T, R: Rng + ?Sized>(xs: &mut [T], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}
