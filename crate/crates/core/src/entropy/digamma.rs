use crate::{Error, Result};

/// ψ(x) for `x > 0`.
///
/// Shifts the argument upward with `ψ(x) = ψ(x + 1) − 1/x` until it reaches
/// 10, then applies the asymptotic expansion through the `x^-14` term. The
/// first omitted term is below `5e-17` at the switch point.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("digamma needs a finite positive argument, got {x}")));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(x.ln() - 0.5 * inv - series - shift)
}
