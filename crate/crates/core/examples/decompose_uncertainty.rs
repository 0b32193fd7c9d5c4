//! Split predictive entropy into aleatoric and epistemic parts over an input
//! grid.
//!
//! `cargo run --release --example decompose_uncertainty -- [steps]`

use latent_bnn::bnn::{self, BnnPosterior, ModelConfig, TrainConfig};
use latent_bnn::decompose::{score_candidates, DecomposeConfig};
use latent_bnn::envs::{heteroskedastic_env, make_dataset};

fn main() -> latent_bnn::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let env = heteroskedastic_env();
    let data = make_dataset(&env, 750, 3)?;
    let init = BnnPosterior::for_dataset(&ModelConfig { sigma: 0.1, ..Default::default() }, &data, 3)?;
    let fit = bnn::train(&init, &data, &TrainConfig { steps, step_size: 3e-3, seed: 3, ..Default::default() })?;

    let grid: Vec<Vec<f64>> = (0..25).map(|i| vec![-6.0 + 0.5 * i as f64]).collect();
    let cfg = DecomposeConfig { weight_draws: 20, samples_per_entropy: 300, seed: 3, ..Default::default() };
    let scores = score_candidates(&fit.posterior, &grid, &cfg)?;
    println!("{:>6} {:>9} {:>10} {:>10} {:>10}", "x", "total", "aleatoric", "epistemic", "analytic");
    for s in &scores {
        let h = env.analytic_conditional_entropy(s.x[0]).map_or("-".into(), |h| format!("{h:.3}"));
        println!(
            "{:>6.1} {:>9.3} {:>10.3} {:>10.3} {h:>10}",
            s.x[0], s.total_entropy, s.aleatoric_entropy, s.epistemic_score
        );
    }
    Ok(())
}
