//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::{E, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latent_bnn::bnn::{BnnPosterior, Dataset, EnergyNoise, GaussianFactor, ModelConfig};
use latent_bnn::decompose::PredictiveModel;
use latent_bnn::envs::{heteroskedastic_env, make_dataset, narrow_passage_mdp, MdpCost};
use latent_bnn::mlp::{self, MlpArch, MlpParams};
use latent_bnn::policy::{
    gradient_with_noise, objective_with_noise, PolicyNet, RiskMode, RolloutConfig, RolloutNoise, TransitionModel,
};
use latent_bnn::rng::{stream, StreamRng};
use rand::Rng;
use rand_distr::StandardNormal;

/// ψ(x) by recurrence up to x ≥ 1000 (compensated sum of the shifts) and a
/// longer asymptotic tail.
pub fn digamma_oracle(x: f64) -> f64 {
    // Bernoulli numbers B_2..B_20.
    const B: [f64; 10] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
        43867.0 / 798.0,
        -174611.0 / 330.0,
    ];
    let (mut x, mut sum, mut comp) = (x, 0.0f64, 0.0f64);
    while x < 1000.0 {
        let y = 1.0 / x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        x += 1.0;
    }
    let mut tail = 0.0;
    for (i, b) in B.iter().enumerate().rev() {
        let n = 2.0 * (i + 1) as f64;
        tail += b / (n * x.powf(n));
    }
    x.ln() - 0.5 / x - tail - sum
}

/// 30-digit reference values, frozen.
pub const DIGAMMA_REFERENCE: [(f64, f64); 5] = [
    (0.5, -1.963_510_026_021_423_479_440_976_6),
    (1.0, -0.577_215_664_901_532_860_606_512_1),
    (2.0, 0.422_784_335_098_467_139_393_487_9),
    (6.0, 1.706_117_668_431_800_472_726_821_3),
    (10.3, 2.282_815_446_439_122_665_528_798_757),
];

/// Second implementation of the α → 0 energy: a plain Monte-Carlo ELBO
/// written from the definitions, sharing only the noise draws.
pub fn elbo_energy(post: &BnnPosterior, data: &Dataset, batch: &[usize], noise: &EnergyNoise) -> f64 {
    let kl = |m: f64, v: f64, p: f64| 0.5 * (v / p + m * m / p - 1.0 - (v / p).ln());
    let k = noise.weight_eps.len();
    let weights: Vec<_> = noise
        .weight_eps
        .iter()
        .map(|eps| {
            let vals = post
                .weight_factors
                .iter()
                .zip(eps)
                .map(|(f, e)| f.mean + f.log_variance.exp().sqrt() * e)
                .collect();
            MlpParams::from_values(&post.arch, vals).unwrap()
        })
        .collect();
    let mut local_sum = 0.0;
    for (b, &n) in batch.iter().enumerate() {
        let q = post.latent_factors[n];
        let mut ll = 0.0;
        for (kk, w) in weights.iter().enumerate() {
            let z = q.mean + q.log_variance.exp().sqrt() * noise.latent_eps[b][kk];
            let mut input = data.input(n).to_vec();
            input.push(z);
            let out = mlp::forward(&post.arch, w, &input).unwrap();
            for (j, o) in out.iter().enumerate() {
                let s = post.output_noise_variance[j];
                let r = data.target(n)[j] - o;
                ll += -0.5 * (2.0 * std::f64::consts::PI * s).ln() - r * r / (2.0 * s);
            }
        }
        local_sum += -ll / k as f64 + kl(q.mean, q.log_variance.exp(), post.prior_latent_variance);
    }
    let kl_w: f64 = post
        .weight_factors
        .iter()
        .map(|f| kl(f.mean, f.log_variance.exp(), post.prior_weight_variance))
        .sum();
    kl_w + post.latent_factors.len() as f64 / batch.len() as f64 * local_sum
}

/// Random posterior on heteroskedastic data with a 16-point batch and
/// 10 joint draws.
pub fn elbo_fixture(seed: u64, n: usize) -> (BnnPosterior, Dataset, Vec<usize>, EnergyNoise) {
    let data = make_dataset(&heteroskedastic_env(), n, seed).unwrap();
    let cfg = ModelConfig { arch: vec![8, 8], sigma: 1.0, ..Default::default() };
    let mut post = BnnPosterior::for_dataset(&cfg, &data, seed).unwrap();
    let mut rng = stream(seed, &[9]);
    for f in post.latent_factors.iter_mut() {
        *f = GaussianFactor::new(rng.sample(StandardNormal), rng.random_range(0.01..0.3));
    }
    let batch: Vec<usize> = (0..16).map(|i| (i * 7 + seed as usize) % n).collect();
    let noise = EnergyNoise::sample(post.arch.num_params(), batch.len(), 10, &mut rng);
    (post, data, batch, noise)
}

pub const FD_STEP: f64 = 1e-6;

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn normals<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn central<F: FnMut(f64) -> f64>(mut f: F) -> f64 {
    (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP)
}

/// Relative error of parameter and input gradients for one random network.
pub fn mlp_fd_error(case: u64) -> f64 {
    let mut rng = stream(case, &[1]);
    let d_in = rng.random_range(1..4);
    let d_out = rng.random_range(1..3);
    let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(2..8)).collect();
    let arch = MlpArch::with_hidden(d_in, &hidden, d_out).unwrap();
    let params = MlpParams::from_values(&arch, normals(&mut rng, arch.num_params(), 0.7)).unwrap();
    let x = normals(&mut rng, d_in, 1.0);
    let cot = normals(&mut rng, d_out, 1.0);
    let g = mlp::backward(&arch, &params, &x, &cot).unwrap();
    let f = |p: &MlpParams, x: &[f64]| -> f64 {
        mlp::forward(&arch, p, x).unwrap().iter().zip(&cot).map(|(a, b)| a * b).sum()
    };
    let fd: Vec<f64> = (0..arch.num_params())
        .map(|i| {
            central(|h| {
                let mut p = params.clone();
                p.values[i] += h;
                f(&p, &x)
            })
        })
        .collect();
    let fdx: Vec<f64> = (0..d_in)
        .map(|i| {
            central(|h| {
                let mut xp = x.clone();
                xp[i] += h;
                f(&params, &xp)
            })
        })
        .collect();
    rel_err(&g.params.values, &fd).max(rel_err(&g.input, &fdx))
}

fn random_posterior(case: u64) -> (BnnPosterior, Dataset, Vec<usize>, EnergyNoise, f64) {
    let mut rng = stream(case, &[2]);
    let n = rng.random_range(3..8);
    let d_in = rng.random_range(1..3);
    let d_out = rng.random_range(1..3);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| normals(&mut rng, d_in, 1.0)).collect();
    let targets: Vec<Vec<f64>> = (0..n).map(|_| normals(&mut rng, d_out, 1.0)).collect();
    let data = Dataset::new(inputs, targets).unwrap();
    let hidden = [rng.random_range(2..6)];
    let arch = MlpArch::with_hidden(d_in + 1, &hidden, d_out).unwrap();
    let sigma = (0..d_out).map(|_| rng.random_range(0.2..1.0)).collect();
    let mut post =
        BnnPosterior::init(arch, n, rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), sigma, case).unwrap();
    for f in post.weight_factors.iter_mut().chain(post.latent_factors.iter_mut()) {
        *f = GaussianFactor {
            mean: f.mean + 0.3 * rng.sample::<f64, _>(StandardNormal),
            log_variance: rng.random_range(-4.0..-0.5),
        };
    }
    let batch: Vec<usize> = (0..rng.random_range(1..=n)).map(|_| rng.random_range(0..n)).collect();
    let k = rng.random_range(1..5);
    let noise = EnergyNoise::sample(post.arch.num_params(), batch.len(), k, &mut rng);
    let alpha = [0.0, 0.5, 1.0, rng.random_range(0.0..1.0)][case as usize % 4];
    (post, data, batch, noise, alpha)
}

/// Relative error of the α-energy gradient over every variational parameter.
pub fn energy_fd_error(case: u64) -> f64 {
    let (post, data, batch, noise, alpha) = random_posterior(case);
    let g = post.alpha_energy_with_noise(&data, &batch, alpha, &noise).unwrap().gradient;
    let energy = |p: &BnnPosterior| p.alpha_energy_with_noise(&data, &batch, alpha, &noise).unwrap().energy;
    let mut analytic = Vec::new();
    let mut fd = Vec::new();
    let (nw, nz) = (post.weight_factors.len(), post.latent_factors.len());
    for which in 0..4 {
        let count = if which < 2 { nw } else { nz };
        for i in 0..count {
            fd.push(central(|h| {
                let mut p = post.clone();
                let f = if which < 2 { &mut p.weight_factors[i] } else { &mut p.latent_factors[i] };
                if which % 2 == 0 {
                    f.mean += h;
                } else {
                    f.log_variance += h;
                }
                energy(&p)
            }));
            analytic.push(match which {
                0 => g.weight_mean[i],
                1 => g.weight_log_variance[i],
                2 => g.latent_mean[i],
                _ => g.latent_log_variance[i],
            });
        }
    }
    rel_err(&analytic, &fd)
}

fn policy_case(case: u64) -> (PolicyNet, Vec<f64>, RolloutConfig) {
    let mut rng = stream(case, &[3]);
    let mut policy = PolicyNet::new(1, &[rng.random_range(2..6)], vec![-1.0], vec![1.0], case).unwrap();
    // Keep the tanh squashing away from saturation.
    policy.params.values.iter_mut().for_each(|v| *v *= 0.3);
    let mode = [RiskMode::None, RiskMode::Stddev, RiskMode::Bias][case as usize % 3];
    let cfg = RolloutConfig {
        horizon: rng.random_range(1..6),
        weight_draws: rng.random_range(2..4),
        noise_draws: rng.random_range(1..4),
        beta: rng.random_range(-1.0..3.0),
        risk_mode: mode,
        starts_per_step: 1,
        seed: case,
    };
    (policy, vec![rng.random_range(2.0..8.0)], cfg)
}

/// Relative error of the policy gradient for one random rollout setup.
/// Also checks that the objective does not depend on whether gradients
/// were requested.
pub fn policy_fd_error<T: TransitionModel>(model: &T, case: u64) -> f64 {
    // Wide bowl so gradients are well above finite-difference roundoff.
    let cost = MdpCost::Bowl { target: 7.0, width: 3.0 };
    let (policy, s0, cfg) = policy_case(case);
    let noise = RolloutNoise::sample(model, &cfg, case + 100);
    let g = gradient_with_noise(model, &cost, &policy, &s0, &cfg, &noise).unwrap();
    let j0 = objective_with_noise(model, &cost, &policy, &s0, &cfg, &noise).unwrap();
    if j0 != g.objective {
        return f64::INFINITY;
    }
    let fd: Vec<f64> = (0..policy.params.values.len())
        .map(|i| {
            central(|h| {
                let mut p = policy.clone();
                p.params.values[i] += h;
                objective_with_noise(model, &cost, &p, &s0, &cfg, &noise).unwrap()
            })
        })
        .collect();
    rel_err(&g.gradient.values, &fd)
}

/// Random small transition network with modest weight uncertainty.
pub fn policy_bnn(case: u64) -> BnnPosterior {
    let mut rng = stream(case, &[4]);
    let arch = MlpArch::with_hidden(3, &[rng.random_range(3..8)], 1).unwrap();
    let mut post = BnnPosterior::init(arch, 1, 1.0, 0.5, vec![0.01], case).unwrap();
    for f in post.weight_factors.iter_mut() {
        f.log_variance = -3.0;
    }
    post
}

/// Largest error across the policy suite, both dynamics.
pub fn policy_fd_errors(cases: u64) -> (f64, f64) {
    let mdp = narrow_passage_mdp();
    let bnn = (0..cases).map(|c| policy_fd_error(&policy_bnn(c), c)).fold(0.0, f64::max);
    let truth = (0..cases).map(|c| policy_fd_error(&mdp, c)).fold(0.0, f64::max);
    (bnn, truth)
}

pub const TINY: f64 = 1e-30;

pub fn gaussian_entropy(var: f64) -> f64 {
    0.5 * (2.0 * PI * E * var).ln()
}

/// Weights pick one of two output means, ±`sep`, with equal probability.
/// Only inputs listed in `active` see the separation.
pub struct TwoModel {
    pub sep: f64,
    pub active: Vec<f64>,
}

impl PredictiveModel for TwoModel {
    type Weights = f64;

    fn input_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn draw_weights(&self, rng: &mut StreamRng) -> f64 {
        if rng.random::<bool>() {
            self.sep
        } else {
            -self.sep
        }
    }

    fn draw_output(&self, w: &mut f64, x: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
        let m = if self.active.contains(&x[0]) { *w } else { 0.0 };
        out[0] = m + rng.sample::<f64, _>(StandardNormal);
    }
}

/// H(0.5 N(−s,1) + 0.5 N(s,1)) − H(N(0,1)) by the trapezoid rule.
pub fn mixture_information(s: f64) -> f64 {
    let phi = |y: f64| (-0.5 * y * y).exp() / (2.0 * PI).sqrt();
    let (lo, hi, n) = (-s - 12.0, s + 12.0, 200_000);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let y = lo + i as f64 * h;
        let p = 0.5 * (phi(y - s) + phi(y + s));
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        if p > 0.0 {
            acc -= w * p * p.ln();
        }
    }
    acc * h - gaussian_entropy(1.0)
}

/// `y = w·x + b + c·z` on a 1-feature input, every factor given explicitly.
pub fn linear_regressor(w: GaussianFactor, c: f64, b: f64, gamma: f64, sigma: f64) -> BnnPosterior {
    let arch = MlpArch::new(vec![2, 1]).unwrap();
    let mut post = BnnPosterior::init(arch, 1, 1.0, gamma, vec![sigma], 0).unwrap();
    post.weight_factors = vec![w, GaussianFactor::new(c, TINY), GaussianFactor::new(b, TINY)];
    post
}

pub const TINY_CONFIG: &str = r#"{
  "bnn": {"arch": [8], "steps": 60, "mc_samples": 4, "minibatch": 16, "step_size": 0.01},
  "decompose": {"M": 3, "L": 20, "k": 3},
  "policy": {"T": 5, "M": 2, "N": 2, "train_steps": 3, "hidden": [4], "eval_starts": 2, "reps_true": 3},
  "al": {"init_n": 20, "per_round": 5, "pool_size": 30, "test_size": 20, "grid_points": 5, "likelihood_samples": 10},
  "seed": 7
}"#;

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-bnn")).current_dir(dir).args(args).output().unwrap()
}

pub fn ok(dir: &Path, args: &[&str]) {
    let out = run_in(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Temporary directory holding `cfg.json` with [`TINY_CONFIG`].
pub fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), TINY_CONFIG).unwrap();
    dir
}

/// Every subcommand in pipeline order; returns the files left in `dir`.
pub fn run_all(dir: &Path) -> Vec<PathBuf> {
    let c = ["--config", "cfg.json", "--seed", "11"];
    let steps: Vec<Vec<&str>> = vec![
        vec!["gen", "heteroskedastic", "60", "5", "d.csv"],
        vec!["train", "d.csv", "m.json"],
        vec!["score", "m.json", "-2:2:5", "s.csv"],
        vec!["al", "bimodal", "1", "a.csv"],
        vec!["collect", "2", "t.csv"],
        vec!["train", "t.csv", "tm.json"],
        vec!["policy-train", "tm.json", "t.csv", "p.json"],
        vec!["policy-eval", "p.json", "tm.json", "t.csv", "r.json"],
        vec!["frontier", "tm.json", "t.csv", "f.csv", "--betas", "0,1", "--seeds", "1"],
    ];
    for s in steps {
        let args: Vec<&str> = c.iter().copied().chain(s).collect();
        ok(dir, &args);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

/// Names of files whose bytes differ between two [`run_all`] directories.
pub fn differing_files(a: &[PathBuf], b: &[PathBuf]) -> Vec<String> {
    let mut out = Vec::new();
    if a.len() != b.len() {
        out.push(format!("{} vs {} files", a.len(), b.len()));
    }
    for (x, y) in a.iter().zip(b) {
        if x.file_name() != y.file_name() || fs::read(x).unwrap() != fs::read(y).unwrap() {
            out.push(x.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    out
}
