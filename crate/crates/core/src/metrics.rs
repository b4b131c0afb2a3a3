use crate::error::{invalid, Result};
use crate::matrix::Matrix;

/// Normalized mean squared error `‖X̂ − X‖_F² / ‖X‖_F²`.
///
/// This is the squared relative error; its square root is the relative
/// Frobenius error.
pub fn nmse(estimate: &Matrix, truth: &Matrix) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(invalid!(
            "estimate is {}x{} but truth is {}x{}",
            estimate.rows(),
            estimate.cols(),
            truth.rows(),
            truth.cols()
        ));
    }
    let denom = truth.frobenius_norm_sq();
    if denom == 0.0 {
        return Err(invalid!("NMSE against a zero ground truth is undefined"));
    }
    Ok(estimate.sub(truth).frobenius_norm_sq() / denom)
}
