use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

/// Adds i.i.d. `N(0, sigma²)` noise to every entry: the de-noising corruption `X̃ ~ q_D(X̃|X)`.
pub fn gaussian_corrupt(input: &Matrix, sigma: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(input.clone());
    }
    let mut out = input.clone();
    for v in out.as_mut_slice() {
        *v += sigma * rng.normal();
    }
    Ok(out)
}
