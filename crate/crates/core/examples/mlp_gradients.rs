//! Forward and reverse pass through a small rectifier network.

use latent_bnn::mlp::{self, MlpArch, MlpParams};

fn main() -> latent_bnn::Result<()> {
    let arch = MlpArch::with_hidden(2, &[4], 1)?;
    let values = (0..arch.num_params()).map(|i| ((i as f64) * 0.7).sin()).collect();
    let params = MlpParams::from_values(&arch, values)?;
    let x = [0.3, -1.2];

    let y = mlp::forward(&arch, &params, &x)?;
    let g = mlp::backward(&arch, &params, &x, &[1.0])?;
    println!("f(x) = {:.6}", y[0]);
    println!("df/dx = {:?}", g.input);

    // Central differences for every parameter.
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..params.values.len() {
        let mut p = params.clone();
        p.values[i] += h;
        let up = mlp::forward(&arch, &p, &x)?[0];
        p.values[i] -= 2.0 * h;
        let down = mlp::forward(&arch, &p, &x)?[0];
        worst = worst.max((g.params.values[i] - (up - down) / (2.0 * h)).abs());
    }
    println!("{} parameter derivatives, max gap to differences {worst:.2e}", params.values.len());
    Ok(())
}
