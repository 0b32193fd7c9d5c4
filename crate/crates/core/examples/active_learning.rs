//! Learning curves for epistemic and random acquisition on the
//! heteroskedastic toy problem.
//!
//! `cargo run --release --example active_learning -- [rounds] [steps]`

use latent_bnn::bnn::TrainConfig;
use latent_bnn::decompose::{al_loop, AlConfig, DecomposeConfig, Strategy};
use latent_bnn::envs::heteroskedastic_env;

fn main() -> latent_bnn::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let rounds = args.next().flatten().unwrap_or(3);
    let steps = args.next().flatten().unwrap_or(1500);
    let env = heteroskedastic_env();
    for strategy in [Strategy::Epistemic, Strategy::Random] {
        let cfg = AlConfig {
            init_n: 50,
            rounds,
            per_round: 25,
            pool_size: 200,
            test_size: 300,
            grid_points: 31,
            strategy,
            seed: 5,
            decompose: DecomposeConfig { weight_draws: 10, samples_per_entropy: 200, ..Default::default() },
            train: TrainConfig { steps, step_size: 3e-3, ..Default::default() },
            ..Default::default()
        };
        println!("{strategy:?}");
        for r in al_loop(&env, &cfg)? {
            println!(
                "  round {} n={:>3} test ll {:>8.4} mean score {:>7.4}",
                r.round, r.dataset_size, r.test_log_likelihood, r.mean_epistemic_score
            );
        }
    }
    Ok(())
}
