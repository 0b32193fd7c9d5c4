//! Train a transition BNN on logged data, then train one policy on the
//! expected cost and one with the model-bias risk term, and compare both
//! against the true dynamics.
//!
//! `cargo run --release --example risk_sensitive_policy -- [policy_steps] [beta]`

use latent_bnn::bnn::{self, BnnPosterior, ModelConfig, TrainConfig};
use latent_bnn::envs::{collect_batch, narrow_passage_mdp};
use latent_bnn::policy::{evaluate_model_bias, pick_starts, train_policy, PolicyNet, RiskMode, RolloutConfig};

fn main() -> latent_bnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let beta: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let mdp = narrow_passage_mdp();
    let batch = collect_batch(&mdp, 100, 7)?;
    let data = batch.to_dataset()?;
    let mc = ModelConfig { sigma: 1e-3, ..Default::default() };
    let init = BnnPosterior::for_dataset(&mc, &data, 1)?;
    let model = bnn::train(&init, &data, &TrainConfig { steps: 20_000, step_size: 3e-3, seed: 1, ..Default::default() })?
        .posterior;

    let starts = batch.starts();
    let pool = pick_starts(&starts, 10, 0);
    let base = RolloutConfig { horizon: 100, weight_draws: 10, noise_draws: 5, ..Default::default() };
    for (mode, b) in [(RiskMode::None, 0.0), (RiskMode::Bias, beta)] {
        let cfg = RolloutConfig { risk_mode: mode, beta: b, ..base.clone() };
        let p0 = PolicyNet::new(1, &[20, 20], vec![mdp.action_low], vec![mdp.action_high], 1)?;
        let trained = train_policy(&model, &mdp, &p0, &starts, &cfg, steps, 2e-3, 1)?;
        let r = evaluate_model_bias(&trained.policy, &model, &mdp, &pool, 100, &cfg, 2)?;
        println!(
            "{mode:>4} beta {b}: model cost {:.2}, true cost {:.2}, model bias {:.2}",
            r.expected_model_cost, r.expected_true_cost, r.bias
        );
    }
    Ok(())
}
