//! Nearest-neighbour entropy of Gaussian and uniform samples.

use latent_bnn::entropy::{kl_entropy, SampleSet};
use latent_bnn::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> latent_bnn::Result<()> {
    let n = 20_000;
    let mut rng = stream(1, &[]);
    for sd in [0.5f64, 1.0, 2.0] {
        let xs: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let est = kl_entropy(&SampleSet::from_scalars(&xs)?, 3)?;
        let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sd * sd).ln();
        println!("N(0, {sd}^2): estimate {:.4}, exact {exact:.4}", est.nats);
    }
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    println!("U(0, 1):     estimate {:.4}, exact 0", kl_entropy(&SampleSet::from_scalars(&xs)?, 3)?.nats);

    // Two dimensions, independent unit normals.
    let v: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    let est = kl_entropy(&SampleSet::new(v, 2)?, 3)?;
    println!("N(0, I_2):   estimate {:.4}, exact {:.4}", est.nats, (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
    Ok(())
}
