use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_SIGMAS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// Squared maximum mean discrepancy, biased (V-statistic) estimator:
///
/// `1/n² Σ k(xᵢ,xⱼ) + 1/m² Σ k(yᵢ,yⱼ) − 2/(nm) Σ k(xᵢ,yⱼ)`
///
/// with `k(x, x') = Σ_σ exp(−‖x − x'‖² / 2σ²)`, all in `f64`. The result
/// does not depend on argument order, bit for bit.
pub fn mmd_rbf(x: &Matrix, y: &Matrix, sigmas: &[f64]) -> Result<f64> {
    if x.cols() != y.cols() {
        return Err(Error::Analysis(format!(
            "mmd sample widths differ: {} vs {}",
            x.cols(),
            y.cols()
        )));
    }
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::Analysis(
            "mmd needs at least one sample per set".into(),
        ));
    }
    if sigmas.is_empty() || sigmas.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Analysis(format!("invalid bandwidths {sigmas:?}")));
    }
    let (x, y) = if canonical_order(x, y) == Ordering::Greater {
        (y, x)
    } else {
        (x, y)
    };
    let gammas: Vec<f64> = sigmas.iter().map(|s| 1.0 / (2.0 * s * s)).collect();
    let kernel = |a: &[f32], b: &[f32]| -> f64 {
        let d2: f64 = a
            .iter()
            .zip(b)
            .map(|(&u, &v)| {
                let d = u as f64 - v as f64;
                d * d
            })
            .sum();
        gammas.iter().map(|g| (-g * d2).exp()).sum()
    };
    let block = |p: &Matrix, q: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..p.rows() {
            for j in 0..q.rows() {
                s += kernel(p.row(i), q.row(j));
            }
        }
        s
    };
    let (n, m) = (x.rows() as f64, y.rows() as f64);
    let xx = block(x, x) / (n * n);
    let yy = block(y, y) / (m * m);
    let xy = block(x, y) / (n * m);
    Ok(xx + yy - 2.0 * xy)
}

fn canonical_order(x: &Matrix, y: &Matrix) -> Ordering {
    x.rows().cmp(&y.rows()).then_with(|| {
        x.data()
            .iter()
            .map(|v| v.to_bits())
            .cmp(y.data().iter().map(|v| v.to_bits()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sets_give_zero() {
        let x = Matrix::from_rows(&[vec![0.1, 2.0], vec![-1.0, 0.5], vec![3.0, 3.0]]).unwrap();
        assert!(mmd_rbf(&x, &x, &DEFAULT_SIGMAS).unwrap().abs() < 1e-10);
    }

    #[test]
    fn single_pair_closed_form() {
        // ‖x − y‖² = 2σ² with σ = 1.5
        let s = 1.5f64;
        let x = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![s as f32, s as f32]]).unwrap();
        let v = mmd_rbf(&x, &y, &[s]).unwrap();
        assert!((v - (2.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let x = Matrix::zeros(2, 3);
        let y = Matrix::zeros(2, 4);
        assert!(matches!(mmd_rbf(&x, &y, &[1.0]), Err(Error::Analysis(_))));
        assert!(matches!(mmd_rbf(&x, &x, &[]), Err(Error::Analysis(_))));
        assert!(matches!(
            mmd_rbf(&Matrix::zeros(0, 3), &x, &[1.0]),
            Err(Error::Analysis(_))
        ));
    }
}
