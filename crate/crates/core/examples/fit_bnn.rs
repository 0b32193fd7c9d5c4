//! Fit a latent-input BNN to the heteroskedastic toy data and print the
//! predictive mean and spread at a few inputs.
//!
//! `cargo run --release --example fit_bnn -- [steps]`

use latent_bnn::bnn::{self, BnnPosterior, ModelConfig, TrainConfig};
use latent_bnn::envs::{heteroskedastic_env, make_dataset};
use latent_bnn::rng::stream;
use latent_bnn::stats::{mean, unbiased_std};

fn main() -> latent_bnn::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let env = heteroskedastic_env();
    let data = make_dataset(&env, 750, 1)?;
    let mc = ModelConfig { sigma: 0.1, ..Default::default() };
    let init = BnnPosterior::for_dataset(&mc, &data, 1)?;
    let cfg = TrainConfig { steps, step_size: 3e-3, seed: 1, ..Default::default() };
    let fit = bnn::train(&init, &data, &cfg)?;
    let trace = &fit.energy_trace;
    println!("energy {:.1} -> {:.1} over {steps} steps", trace[0], trace[trace.len() - 1]);

    let mut rng = stream(2, &[]);
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "x", "mean", "true", "sd", "true");
    for x in [-4.0, -2.0, 0.0, 2.0, 4.0] {
        let s = fit.posterior.predict_samples(&[x], 50, 20, &mut rng)?;
        let true_sd = 3.0 * (x / 2.0f64).cos().abs();
        let true_mean = 7.0 * f64::sin(x);
        println!(
            "{x:>6.1} {:>9.3} {true_mean:>9.3} {:>9.3} {true_sd:>9.3}",
            mean(&s.values),
            unbiased_std(&s.values)
        );
    }
    Ok(())
}
