//! Law-of-total-variance split of grouped cost samples.

use latent_bnn::decompose::variance_decomposition;
use latent_bnn::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> latent_bnn::Result<()> {
    // 200 weight draws with mean cost μ_m ~ N(0, 1), each with 200
    // outcomes of noise variance 4.
    let mut rng = stream(8, &[]);
    let groups: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let mu: f64 = rng.sample(StandardNormal);
            (0..200).map(|_| mu + 2.0 * rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect();
    let d = variance_decomposition(&groups)?;
    println!("total      {:.4}", d.total_variance);
    println!("aleatoric  {:.4}  (true 4)", d.expected_aleatoric_variance);
    println!("epistemic  {:.4}  (true 1)", d.epistemic_variance);
    Ok(())
}
