use crate::error::{shape_err, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::mlp::sigmoid;

/// Binary cross entropy on logits: summed over the columns of each row
/// (one row is one example's likelihood), averaged over rows.
///
/// Uses `max(ℓ, 0) − ℓ·t + ln(1 + e^{−|ℓ|})`, finite for any finite logit.
/// Returns the loss and `∂loss/∂ℓ = (σ(ℓ) − t) / rows`.
pub fn bce_with_logits(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if logits.shape() != targets.shape() {
        return Err(shape_err(format!(
            "bce logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    let n = logits.rows().max(1) as f64;
    let mut total = 0.0f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let inv_n = (1.0 / n) as f32;
    for ((g, &l), &t) in grad
        .data_mut()
        .iter_mut()
        .zip(logits.data())
        .zip(targets.data())
    {
        total += bce_term(l as f64, t as f64);
        *g = (sigmoid(l) - t) * inv_n;
    }
    Ok((total / n, grad))
}

/// BCE against a constant target (all ones or all zeros), as used by the
/// discriminator and generator losses.
pub fn bce_with_logits_const(logits: &Matrix, target: f32) -> (f64, Matrix) {
    let n = logits.rows().max(1) as f64;
    let inv_n = (1.0 / n) as f32;
    let mut total = 0.0f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (g, &l) in grad.data_mut().iter_mut().zip(logits.data()) {
        total += bce_term(l as f64, target as f64);
        *g = (sigmoid(l) - target) * inv_n;
    }
    (total / n, grad)
}

#[inline]
pub(crate) fn bce_term(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Sum of absolute values. The subgradient used elsewhere at 0 is 0.
pub fn l1_norm(m: &Matrix) -> f64 {
    m.data().iter().map(|&v| (v as f64).abs()).sum()
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.data()
        .iter()
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        .sqrt()
}
