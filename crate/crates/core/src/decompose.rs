//! Decomposition of predictive uncertainty.
//!
//! The epistemic score at an input `x` is the mutual information between
//! the output and the weights, `I(W; y) = H(y) − E_W[H(y | W)]`. Both terms
//! are estimated from model samples with the nearest-neighbour estimator:
//! `H(y)` from `L` samples that each redraw the weights, and `H(y | W)` as
//! the mean over `M` weight draws of the entropy of `L` samples that only
//! redraw the latent input and the output noise.
//!
//! The same split for variances (law of total variance) is provided by
//! [`variance_decomposition`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bnn::{self, BnnPosterior, Dataset, ModelConfig, TrainConfig};
use crate::entropy::{kl_entropy, SampleSet, DEFAULT_K};
use crate::envs::StochasticFunctionEnv;
use crate::mlp::{MlpParams, Trace};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::stats::{log_sum_exp, mean, unbiased_variance};
use crate::{Error, Result};

/// A model that can draw weights and, given weights, draw outputs.
pub trait PredictiveModel {
    type Weights;

    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn draw_weights(&self, rng: &mut StreamRng) -> Self::Weights;
    /// One draw of `y | x, W`; only the aleatoric randomness is sampled.
    fn draw_output(&self, weights: &mut Self::Weights, x: &[f64], rng: &mut StreamRng, out: &mut [f64]);
}

/// A weight sample with forward-pass scratch.
pub struct BnnDraw {
    params: MlpParams,
    trace: Trace,
    input: Vec<f64>,
}

impl PredictiveModel for BnnPosterior {
    type Weights = BnnDraw;

    fn input_dim(&self) -> usize {
        self.feature_dim()
    }

    fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    fn draw_weights(&self, rng: &mut StreamRng) -> BnnDraw {
        BnnDraw {
            params: self.sample_weights(rng),
            trace: Trace::new(&self.arch),
            input: vec![0.0; self.arch.input_dim()],
        }
    }

    fn draw_output(&self, w: &mut BnnDraw, x: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
        w.input[..x.len()].copy_from_slice(x);
        self.sample_output(&w.params, &mut w.trace, &mut w.input, rng, out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeConfig {
    /// `M`: weight draws averaged in the aleatoric term.
    #[serde(rename = "M")]
    pub weight_draws: usize,
    /// `L`: samples per entropy estimate.
    #[serde(rename = "L")]
    pub samples_per_entropy: usize,
    #[serde(rename = "k")]
    pub neighbor_k: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            weight_draws: 50,
            samples_per_entropy: 500,
            neighbor_k: DEFAULT_K,
            seed: 0,
        }
    }
}

impl DecomposeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weight_draws == 0 {
            return Err(Error::invalid("weight_draws must be at least 1"));
        }
        if self.neighbor_k == 0 || self.samples_per_entropy <= self.neighbor_k {
            return Err(Error::invalid(format!(
                "need 1 ≤ k < L, got k={} L={}",
                self.neighbor_k, self.samples_per_entropy
            )));
        }
        Ok(())
    }
}

/// Entropy scores at one input, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionScore {
    pub x: Vec<f64>,
    pub total_entropy: f64,
    pub aleatoric_entropy: f64,
    pub epistemic_score: f64,
}

const TOTAL_STREAM: u64 = 0x7074;
const ALEATORIC_STREAM: u64 = 0xA1EA;

fn check_input<P: PredictiveModel>(model: &P, x: &[f64]) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::shape(format!(
            "input has length {}, model expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    Ok(())
}

/// `Ĥ(y)` from `L` samples, each with fresh weights.
pub fn total_entropy<P: PredictiveModel>(model: &P, x: &[f64], config: &DecomposeConfig) -> Result<f64> {
    config.validate()?;
    check_input(model, x)?;
    let mut rng = stream(config.seed, &[TOTAL_STREAM]);
    let k = model.output_dim();
    let l = config.samples_per_entropy;
    let mut values = vec![0.0; l * k];
    for i in 0..l {
        let mut w = model.draw_weights(&mut rng);
        model.draw_output(&mut w, x, &mut rng, &mut values[i * k..(i + 1) * k]);
    }
    Ok(kl_entropy(&SampleSet::new(values, k)?, config.neighbor_k)?.nats)
}

/// `(1/M) Σ_i Ĥ(y | W_i)` with `L` samples per weight draw.
pub fn aleatoric_entropy<P: PredictiveModel>(
    model: &P,
    x: &[f64],
    config: &DecomposeConfig,
) -> Result<f64> {
    config.validate()?;
    check_input(model, x)?;
    let mut rng = stream(config.seed, &[ALEATORIC_STREAM]);
    let k = model.output_dim();
    let l = config.samples_per_entropy;
    let mut values = vec![0.0; l * k];
    let mut acc = 0.0;
    for _ in 0..config.weight_draws {
        let mut w = model.draw_weights(&mut rng);
        for i in 0..l {
            model.draw_output(&mut w, x, &mut rng, &mut values[i * k..(i + 1) * k]);
        }
        acc += kl_entropy(&SampleSet::new(values.clone(), k)?, config.neighbor_k)?.nats;
    }
    Ok(acc / config.weight_draws as f64)
}

/// Total, aleatoric and epistemic entropy at `x`. The score is not clamped;
/// small negative values are estimator noise.
pub fn epistemic_score<P: PredictiveModel>(
    model: &P,
    x: &[f64],
    config: &DecomposeConfig,
) -> Result<AcquisitionScore> {
    let total = total_entropy(model, x, config)?;
    let aleatoric = aleatoric_entropy(model, x, config)?;
    Ok(AcquisitionScore {
        x: x.to_vec(),
        total_entropy: total,
        aleatoric_entropy: aleatoric,
        epistemic_score: total - aleatoric,
    })
}

/// Scores for every candidate. All candidates share the same random streams,
/// so identical candidates receive identical scores.
pub fn score_candidates<P: PredictiveModel>(
    model: &P,
    candidates: &[Vec<f64>],
    config: &DecomposeConfig,
) -> Result<Vec<AcquisitionScore>> {
    candidates
        .iter()
        .map(|x| epistemic_score(model, x, config))
        .collect()
}

/// Indices of the `batch_size` largest scores, ties broken by lower index.
pub fn rank_scores(scores: &[f64], batch_size: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(batch_size);
    order
}

/// Pick the `batch_size` candidates with the highest epistemic score.
pub fn acquire<P: PredictiveModel>(
    model: &P,
    candidates: &[Vec<f64>],
    batch_size: usize,
    config: &DecomposeConfig,
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to acquire from"));
    }
    if batch_size > candidates.len() {
        return Err(Error::invalid(format!(
            "batch_size {batch_size} exceeds {} candidates",
            candidates.len()
        )));
    }
    let scores: Vec<f64> = score_candidates(model, candidates, config)?
        .iter()
        .map(|s| s.epistemic_score)
        .collect();
    Ok(rank_scores(&scores, batch_size))
}

/// Law-of-total-variance split of grouped samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDecomposition {
    pub total_variance: f64,
    pub expected_aleatoric_variance: f64,
    pub epistemic_variance: f64,
}

/// `groups[m][n]`: sample `n` under weight draw `m`. Uses the subtraction
/// form: total unbiased variance minus the mean within-group unbiased
/// variance.
pub fn variance_decomposition(groups: &[Vec<f64>]) -> Result<VarianceDecomposition> {
    if groups.len() < 2 {
        return Err(Error::invalid("need at least two groups"));
    }
    let n = groups[0].len();
    if n < 2 {
        return Err(Error::invalid("need at least two samples per group"));
    }
    if groups.iter().any(|g| g.len() != n) {
        return Err(Error::shape("all groups must have the same size"));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let total = unbiased_variance(&all);
    let within = groups.iter().map(|g| unbiased_variance(g)).sum::<f64>() / groups.len() as f64;
    Ok(VarianceDecomposition {
        total_variance: total,
        expected_aleatoric_variance: within,
        epistemic_variance: total - within,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Epistemic,
    Random,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epistemic" => Ok(Strategy::Epistemic),
            "random" => Ok(Strategy::Random),
            other => Err(Error::invalid(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlConfig {
    pub init_n: usize,
    pub rounds: usize,
    pub per_round: usize,
    /// Candidates drawn from the input law each round.
    pub pool_size: usize,
    /// Held-out points drawn uniformly over the environment domain.
    pub test_size: usize,
    pub grid_points: usize,
    /// Predictive draws per test point for the log-likelihood.
    pub likelihood_samples: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub model: ModelConfig,
    pub decompose: DecomposeConfig,
    pub train: TrainConfig,
}

impl Default for AlConfig {
    fn default() -> Self {
        Self {
            init_n: 100,
            rounds: 5,
            per_round: 50,
            pool_size: 500,
            test_size: 500,
            grid_points: 61,
            likelihood_samples: 200,
            strategy: Strategy::Epistemic,
            seed: 0,
            model: ModelConfig::default(),
            decompose: DecomposeConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlRecord {
    pub round: usize,
    pub dataset_size: usize,
    pub test_log_likelihood: f64,
    pub mean_epistemic_score: f64,
}

/// Mean Monte-Carlo predictive log-density of held-out pairs.
pub fn test_log_likelihood(
    posterior: &BnnPosterior,
    test: &Dataset,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    let sigma = &posterior.output_noise_variance;
    let mut logs = vec![0.0; samples];
    for i in 0..test.len() {
        let mut rng = stream(seed, &[0x7E57, i as u64]);
        let x = test.input(i);
        let y = test.target(i);
        let mut input = x.to_vec();
        input.push(0.0);
        let mut trace = Trace::new(&posterior.arch);
        for l in logs.iter_mut() {
            let w = posterior.sample_weights(&mut rng);
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            input[x.len()] = posterior.prior_latent_variance.sqrt() * z;
            let f = trace.forward(&posterior.arch, &w.values, &input);
            *l = bnn::gaussian_log_density(y, f, sigma)?;
        }
        total += log_sum_exp(&logs) - (samples as f64).ln();
    }
    Ok(total / test.len() as f64)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Active learning on a stochastic function: retrain from scratch, score,
/// acquire, label, repeat. Returns one record per training round
/// (`rounds + 1` in total).
pub fn al_loop(env: &StochasticFunctionEnv, config: &AlConfig) -> Result<Vec<AlRecord>> {
    if config.per_round == 0 {
        return Err(Error::invalid("per_round must be at least 1"));
    }
    if config.init_n == 0 || config.test_size == 0 || config.likelihood_samples == 0 {
        return Err(Error::invalid("init_n, test_size and likelihood_samples must be positive"));
    }
    if config.pool_size < config.per_round {
        return Err(Error::invalid("pool_size must be at least per_round"));
    }
    config.decompose.validate()?;
    let seed = config.seed;
    let mut data = crate::envs::make_dataset(env, config.init_n, derive_seed(seed, &[1]))?;

    let (lo, hi) = env.domain();
    let mut trng = stream(seed, &[2]);
    let mut tx = Vec::with_capacity(config.test_size);
    let mut ty = Vec::with_capacity(config.test_size);
    for _ in 0..config.test_size {
        let x = trng.random_range(lo..hi);
        tx.push(x);
        ty.push(env.sample_output(x, &mut trng));
    }
    let test = Dataset::from_flat(config.test_size, 1, 1, tx, ty)?;
    let grid: Vec<Vec<f64>> = linspace(lo, hi, config.grid_points)
        .into_iter()
        .map(|x| vec![x])
        .collect();

    let mut records = Vec::with_capacity(config.rounds + 1);
    for round in 0..=config.rounds {
        let init = BnnPosterior::for_dataset(&config.model, &data, derive_seed(seed, &[3, round as u64]))?;
        let train_cfg = TrainConfig {
            seed: derive_seed(seed, &[4, round as u64]),
            ..config.train.clone()
        };
        let post = bnn::train(&init, &data, &train_cfg)?.posterior;
        let dcfg = DecomposeConfig {
            seed: derive_seed(seed, &[5, round as u64]),
            ..config.decompose.clone()
        };
        let grid_scores = score_candidates(&post, &grid, &dcfg)?;
        let mean_score = mean(&grid_scores.iter().map(|s| s.epistemic_score).collect::<Vec<_>>());
        let ll = test_log_likelihood(&post, &test, config.likelihood_samples, derive_seed(seed, &[6]))?;
        records.push(AlRecord {
            round,
            dataset_size: data.len(),
            test_log_likelihood: ll,
            mean_epistemic_score: mean_score,
        });
        if round == config.rounds {
            break;
        }

        let mut prng = stream(seed, &[7, round as u64]);
        let pool: Vec<Vec<f64>> = (0..config.pool_size)
            .map(|_| vec![env.sample_input(&mut prng)])
            .collect();
        let chosen = match config.strategy {
            Strategy::Epistemic => acquire(&post, &pool, config.per_round, &dcfg)?,
            Strategy::Random => {
                let mut idx: Vec<usize> = (0..pool.len()).collect();
                bnn::shuffle(&mut idx, &mut prng);
                idx.truncate(config.per_round);
                idx
            }
        };
        let mut lrng = stream(seed, &[8, round as u64]);
        let xs: Vec<f64> = chosen.iter().map(|&i| pool[i][0]).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| env.sample_output(x, &mut lrng)).collect();
        data.extend(&Dataset::from_flat(xs.len(), 1, 1, xs, ys)?)?;
    }
    Ok(records)
}
