//! Small risk/bias frontier sweep over β, using the true simulator as the
//! transition model so it runs in seconds.

use latent_bnn::envs::{collect_batch, narrow_passage_mdp};
use latent_bnn::policy::{frontier, FrontierConfig, RiskMode, RolloutConfig};

fn main() -> latent_bnn::Result<()> {
    let mdp = narrow_passage_mdp();
    let starts = collect_batch(&mdp, 20, 7)?.starts();
    let cfg = FrontierConfig {
        rollout: RolloutConfig { horizon: 30, weight_draws: 4, noise_draws: 8, seed: 3, ..Default::default() },
        policy_hidden: vec![10],
        train_steps: 50,
        step_size: 5e-3,
        eval_starts: 5,
        reps_true: 50,
    };
    let records = frontier(&mdp, &mdp, &starts, &[0.0, 1.0, 5.0], RiskMode::Stddev, &[1, 2], &cfg)?;
    println!("beta seed model_cost true_cost bias");
    for r in records {
        println!("{:>4} {:>4} {:>10.3} {:>9.3} {:.3}", r.beta, r.seed, r.expected_model_cost, r.expected_true_cost, r.model_bias);
    }
    Ok(())
}
