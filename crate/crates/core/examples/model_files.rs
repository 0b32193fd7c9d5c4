//! Write and read the CSV and JSON artifacts.

use latent_bnn::bnn::{BnnPosterior, ModelConfig};
use latent_bnn::envs::{bimodal_env, make_dataset};
use latent_bnn::io;
use latent_bnn::policy::PolicyNet;

fn main() -> latent_bnn::Result<()> {
    let dir = std::env::temp_dir().join("latent-bnn-example");
    std::fs::create_dir_all(&dir)?;

    let data = make_dataset(&bimodal_env(), 20, 4)?;
    io::write_dataset(&data, &dir.join("data.csv"))?;
    let back = io::read_dataset(&dir.join("data.csv"))?;
    println!("dataset round trip exact: {}", back == data);

    let post = BnnPosterior::for_dataset(&ModelConfig::default(), &data, 4)?;
    io::save_model(&post, &dir.join("model.json"))?;
    println!("model round trip exact: {}", io::load_model(&dir.join("model.json"))? == post);

    let policy = PolicyNet::new(1, &[8], vec![-1.0], vec![1.0], 4)?;
    io::save_policy(&policy, &dir.join("policy.json"))?;
    println!("policy round trip exact: {}", io::load_policy(&dir.join("policy.json"))?.params == policy.params);
    println!("files in {}", dir.display());
    Ok(())
}
