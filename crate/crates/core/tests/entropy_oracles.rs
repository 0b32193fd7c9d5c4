mod common;

use common::{digamma_oracle, DIGAMMA_REFERENCE as REFERENCE};
use latent_bnn::entropy::{digamma, kl_entropy, SampleSet};
use latent_bnn::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn oracle_agrees_with_reference_values() {
    for (x, v) in REFERENCE {
        assert!((digamma_oracle(x) - v).abs() < 1e-14, "x = {x}");
    }
}

#[test]
fn digamma_matches_oracle() {
    for (x, _) in REFERENCE {
        assert!((digamma(x).unwrap() - digamma_oracle(x)).abs() < 1e-10, "x = {x}");
    }
    let mut rng = stream(3, &[]);
    for _ in 0..200 {
        let x = 10f64.powf(rng.random_range(-3.0..4.0));
        let (a, b) = (digamma(x).unwrap(), digamma_oracle(x));
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "x = {x}: {a} vs {b}");
    }
}

fn gaussian(n: usize, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, &[]);
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

#[test]
fn gaussian_entropy_at_large_n() {
    for (i, sd) in [0.5f64, 1.0, 2.0].into_iter().enumerate() {
        let xs = gaussian(100_000, sd, i as u64);
        let h = kl_entropy(&SampleSet::from_scalars(&xs).unwrap(), 3).unwrap().nats;
        let target = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sd * sd).ln();
        assert!((h - target).abs() < 0.02, "sd {sd}: {h} vs {target}");
    }
}

#[test]
fn uniform_entropy_at_large_n() {
    let mut rng = stream(5, &[]);
    let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let h = kl_entropy(&SampleSet::from_scalars(&xs).unwrap(), 3).unwrap().nats;
    assert!(h.abs() < 0.02, "{h}");
}

#[test]
fn neighbour_orders_agree() {
    let s = SampleSet::from_scalars(&gaussian(100_000, 1.0, 9)).unwrap();
    let hs: Vec<f64> = [1, 3, 5].iter().map(|&k| kl_entropy(&s, k).unwrap().nats).collect();
    for a in &hs {
        for b in &hs {
            assert!((a - b).abs() < 0.05, "{hs:?}");
        }
    }
}

#[test]
fn two_dimensional_gaussian() {
    let mut rng = stream(12, &[]);
    // Correlated pair: covariance [[1, 0.6], [0.6, 1]].
    let mut v = Vec::with_capacity(40_000);
    for _ in 0..20_000 {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        v.push(a);
        v.push(0.6 * a + 0.8 * b);
    }
    let h = kl_entropy(&SampleSet::new(v, 2).unwrap(), 3).unwrap().nats;
    let det: f64 = 1.0 - 0.36;
    let target = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + 0.5 * det.ln();
    assert!((h - target).abs() < 0.05, "{h} vs {target}");
}

#[test]
fn translation_and_scaling() {
    let xs = gaussian(5000, 1.3, 21);
    let h = kl_entropy(&SampleSet::from_scalars(&xs).unwrap(), 3).unwrap().nats;
    let shifted: Vec<f64> = xs.iter().map(|x| x + 17.25).collect();
    let hs = kl_entropy(&SampleSet::from_scalars(&shifted).unwrap(), 3).unwrap().nats;
    assert!((h - hs).abs() < 1e-9);
    for c in [0.25, 3.0, 40.0] {
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let hc = kl_entropy(&SampleSet::from_scalars(&scaled).unwrap(), 3).unwrap().nats;
        assert!((hc - h - f64::ln(c)).abs() < 1e-9, "c = {c}");
    }
}
