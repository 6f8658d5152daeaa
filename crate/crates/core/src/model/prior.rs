use std::fmt;
use std::str::FromStr;

use crate::error::{shape_err, Error, Result};
use crate::numerics::{Matrix, Rng};

/// Distribution the adversarial regularizer pushes latents towards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PriorKind {
    /// N(0, 1)
    Gaussian,
    /// Laplace(0, 1)
    Laplace,
    /// U(0, 1)
    Uniform,
    /// Sum of independent N(0, 1) and N(3, 1) draws per entry.
    MvGaussian,
}

impl PriorKind {
    pub const ALL: [PriorKind; 4] = [
        PriorKind::Gaussian,
        PriorKind::Laplace,
        PriorKind::Uniform,
        PriorKind::MvGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Gaussian => "gaussian",
            PriorKind::Laplace => "laplace",
            PriorKind::Uniform => "uniform",
            PriorKind::MvGaussian => "mvgaussian",
        }
    }

    fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            PriorKind::Gaussian => rng.normal(),
            PriorKind::Laplace => {
                // Inverse CDF on u ∈ (−½, ½).
                let u = rng.uniform_f64() - 0.5;
                let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                -u.signum() * tail.ln()
            }
            PriorKind::Uniform => rng.uniform_f64(),
            PriorKind::MvGaussian => {
                let g1 = rng.normal();
                let g2 = 3.0 + rng.normal();
                g1 + g2
            }
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown prior kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub dim: usize,
}

/// `n × dim` i.i.d. draws, filled row-major.
pub fn sample_prior(spec: PriorSpec, n: usize, rng: &mut Rng) -> Result<Matrix> {
    if n == 0 || spec.dim == 0 {
        return Err(shape_err(format!(
            "prior sample of {n}x{} requested",
            spec.dim
        )));
    }
    let data = (0..n * spec.dim)
        .map(|_| spec.kind.draw(rng) as f32)
        .collect();
    Matrix::from_vec(n, spec.dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(m: &Matrix) -> (f64, f64) {
        let n = m.data().len() as f64;
        let mean = m.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = m
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var)
    }

    fn draw(kind: PriorKind) -> Matrix {
        let mut rng = Rng::seed_from(77);
        sample_prior(PriorSpec { kind, dim: 100 }, 1000, &mut rng).unwrap()
    }

    #[test]
    fn uniform_support() {
        let m = draw(PriorKind::Uniform);
        assert!(m.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn gaussian_moments() {
        let (mean, var) = moments(&draw(PriorKind::Gaussian));
        assert!(mean.abs() < 3.0 / (1e5f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn mvgaussian_moments() {
        let (mean, var) = moments(&draw(PriorKind::MvGaussian));
        // sd of the sample mean is sqrt(2/1e5)
        assert!((mean - 3.0).abs() < 3.0 * (2.0 / 1e5f64).sqrt());
        assert!((var - 2.0).abs() < 0.1);
    }

    #[test]
    fn laplace_moments() {
        let (mean, var) = moments(&draw(PriorKind::Laplace));
        assert!(mean.abs() < 3.0 * (2.0 / 1e5f64).sqrt());
        assert!((var - 2.0).abs() < 0.1);
    }

    #[test]
    fn zero_rows_rejected() {
        let mut rng = Rng::seed_from(1);
        let spec = PriorSpec {
            kind: PriorKind::Gaussian,
            dim: 3,
        };
        assert!(sample_prior(spec, 0, &mut rng).is_err());
    }
}
