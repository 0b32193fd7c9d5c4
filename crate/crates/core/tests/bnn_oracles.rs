mod common;

use common::elbo_fixture;
use latent_bnn::bnn::{self, BnnPosterior, Dataset, EnergyNoise, GaussianFactor, ModelConfig, TrainConfig};
use latent_bnn::envs::{heteroskedastic_env, make_dataset};
use latent_bnn::mlp::MlpArch;
use latent_bnn::rng::stream;
use latent_bnn::stats::{mean, unbiased_variance};
use rand::Rng;

#[test]
fn alpha_zero_matches_independent_elbo() {
    for seed in 0..5 {
        let (post, data, batch, noise) = elbo_fixture(seed, 40);
        let e = post.alpha_energy_with_noise(&data, &batch, 0.0, &noise).unwrap().energy;
        let oracle = common::elbo_energy(&post, &data, &batch, &noise);
        assert!((e - oracle).abs() <= 1e-12 * oracle.abs(), "seed {seed}: {e} vs {oracle}");
    }
}

#[test]
fn small_alpha_approaches_elbo() {
    // Full-batch on 16 points, so the data term carries no rescaling.
    for seed in 0..5 {
        let (post, data, batch, noise) = elbo_fixture(seed, 16);
        let e0 = post.alpha_energy_with_noise(&data, &batch, 0.0, &noise).unwrap().energy;
        let e1 = post.alpha_energy_with_noise(&data, &batch, 1e-4, &noise).unwrap().energy;
        assert!((e1 - e0).abs() < 1e-2, "seed {seed}: {e1} vs {e0}");
        // The α-energy never exceeds the ELBO energy (Jensen).
        assert!(e1 <= e0 + 1e-9);
    }
}

#[test]
fn small_alpha_local_terms_are_continuous() {
    // Single-point batches isolate one local term, scaled by N.
    for seed in 0..5 {
        let (post, data, _, _) = elbo_fixture(seed, 40);
        let mut rng = stream(seed, &[10]);
        for n in 0..40 {
            let noise = EnergyNoise::sample(post.arch.num_params(), 1, 10, &mut rng);
            let e0 = post.alpha_energy_with_noise(&data, &[n], 0.0, &noise).unwrap().energy;
            let e1 = post.alpha_energy_with_noise(&data, &[n], 1e-4, &noise).unwrap().energy;
            assert!(((e1 - e0) / 40.0).abs() < 1e-2, "seed {seed}, point {n}");
        }
    }
}

#[test]
fn initial_means_scale_with_fan_in() {
    // 20 inputs, latent slot included; weight 0 sits in the first layer.
    let arch = MlpArch::with_hidden(20, &[3], 1).unwrap();
    let draws: Vec<f64> = (0..10_000u64)
        .map(|s| BnnPosterior::init(arch.clone(), 1, 1.0, 1.0, vec![1.0], s).unwrap().weight_factors[0].mean)
        .collect();
    let v = unbiased_variance(&draws);
    let se = (2.0 / 9999.0f64).sqrt() / 20.0;
    assert!((v - 1.0 / 20.0).abs() < 4.0 * se, "variance {v}");
}

#[test]
fn weight_draws_match_factor_moments() {
    let arch = MlpArch::new(vec![2, 1]).unwrap();
    let mut post = BnnPosterior::init(arch, 1, 1.0, 1.0, vec![1.0], 0).unwrap();
    post.weight_factors[1] = GaussianFactor::new(0.7, 0.09);
    let mut rng = stream(11, &[]);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| post.sample_weights(&mut rng).values[1]).collect();
    let m = mean(&xs);
    let v = unbiased_variance(&xs);
    assert!((m - 0.7).abs() < 3.0 * (0.09 / n as f64).sqrt());
    assert!((v - 0.09).abs() < 3.0 * 0.09 * (2.0 / (n - 1) as f64).sqrt());
    let mut collapsed = post.clone();
    collapsed.weight_factors.iter_mut().for_each(|f| f.log_variance = (1e-30f64).ln());
    let w = collapsed.sample_weights(&mut rng);
    for (a, f) in w.values.iter().zip(&collapsed.weight_factors) {
        assert!((a - f.mean).abs() < 1e-10);
    }
}

#[test]
fn log_density_integrates_to_one() {
    // Trapezoid quadrature of exp(log N(y; 0.3, 0.5)) · (1 + y²) against
    // the analytic value 1 + 0.3² + 0.5.
    let sigma = [0.5];
    let (lo, hi, n) = (-10.0, 10.0, 200_000);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let y: f64 = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * bnn::gaussian_log_density(&[y], &[0.3], &sigma).unwrap().exp() * (1.0 + y * y);
    }
    assert!((acc * h - (1.0 + 0.09 + 0.5)).abs() < 1e-8);
}

#[test]
fn learns_a_deterministic_line() {
    let mut rng = stream(4, &[]);
    let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0]]).collect();
    let data = Dataset::new(xs, ys).unwrap();
    let mc = ModelConfig { arch: vec![20, 20], sigma: 1e-3, ..Default::default() };
    let init = BnnPosterior::for_dataset(&mc, &data, 1).unwrap();
    let cfg = TrainConfig { steps: 3000, step_size: 3e-3, seed: 2, ..Default::default() };
    let post = bnn::train(&init, &data, &cfg).unwrap().posterior;
    let mut rng = stream(5, &[]);
    for x in [-0.75, -0.2, 0.35, 0.8] {
        let s = post.predict_samples(&[x], 100, 10, &mut rng).unwrap();
        let m = mean(&s.values);
        assert!((m - 2.0 * x).abs() < 0.1, "x {x}: mean {m}");
    }
}

#[test]
fn heteroskedastic_training_descends() {
    let data = make_dataset(&heteroskedastic_env(), 750, 1).unwrap();
    let init = BnnPosterior::for_dataset(&ModelConfig::default(), &data, 1).unwrap();
    let out = bnn::train(&init, &data, &TrainConfig { steps: 300, ..Default::default() }).unwrap();
    let t = &out.energy_trace;
    assert_eq!(t.len(), 300);
    assert!(t[t.len() - 1] < t[0]);
}
