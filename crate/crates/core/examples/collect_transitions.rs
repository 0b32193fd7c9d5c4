//! Log transitions from the narrow-passage MDP and summarize them.

use latent_bnn::envs::{collect_batch, narrow_passage_mdp};

fn main() -> latent_bnn::Result<()> {
    let mdp = narrow_passage_mdp();
    let batch = collect_batch(&mdp, 100, 7)?;
    println!("{} transitions", batch.len());
    let mut bins = [0usize; 10];
    for i in 0..batch.len() {
        bins[(batch.state(i)[0] as usize).min(9)] += 1;
    }
    for (b, c) in bins.iter().enumerate() {
        println!("s in [{b}, {}): {c:>5}  noise sd at centre {:.3}", b + 1, mdp.noise_scale(b as f64 + 0.5));
    }
    Ok(())
}
