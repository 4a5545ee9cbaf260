//! Diagonal strongly convex quadratic `f(W) = ½ Σ_d h_d (W_d - c_d)²`,
//! the smallest objective on which the drift and penalty effects are
//! analytically checkable.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problems::VectorProblem;

#[derive(Debug, Clone)]
pub struct DiagQuadratic {
    curvature: Array1<f64>,
    center: Array1<f64>,
    /// Additive gradient-noise scale.
    sigma: f64,
}

impl DiagQuadratic {
    pub fn new(curvature: Array1<f64>, center: Array1<f64>, sigma: f64) -> Result<Self> {
        if curvature.len() != center.len() {
            return Err(Error::ShapeMismatch {
                expected: (curvature.len(), 1),
                got: (center.len(), 1),
            });
        }
        if curvature.iter().any(|&h| h <= 0.0) {
            return Err(Error::Other("curvature must be positive".into()));
        }
        if !(sigma >= 0.0) {
            return Err(Error::Other(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(DiagQuadratic {
            curvature,
            center,
            sigma,
        })
    }

    /// Scalar `f(w) = ½ h (w - c)²` with additive noise.
    pub fn scalar(h: f64, c: f64, sigma: f64) -> Result<Self> {
        Self::new(Array1::from_elem(1, h), Array1::from_elem(1, c), sigma)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl VectorProblem for DiagQuadratic {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn loss(&self, w: &Array1<f64>) -> f64 {
        let d = w - &self.center;
        0.5 * (&d * &d * &self.curvature).sum()
    }

    fn grad_full(&self, w: &Array1<f64>) -> Array1<f64> {
        (w - &self.center) * &self.curvature
    }

    fn grad_sample(&self, w: &Array1<f64>, rng: &mut ChaCha12Rng) -> Array1<f64> {
        let mut g = self.grad_full(w);
        if self.sigma > 0.0 {
            for v in g.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += self.sigma * z;
            }
        }
        g
    }

    fn hessian(&self) -> Array2<f64> {
        Array2::from_diag(&self.curvature)
    }

    fn w_star(&self) -> Array1<f64> {
        self.center.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scalar_gradient_and_loss() {
        let q = DiagQuadratic::scalar(1.0, 1.0, 0.0).unwrap();
        assert_eq!(q.grad_full(&array![1.0])[0], 0.0);
        assert_eq!(q.grad_full(&array![0.0])[0], -1.0);
        assert_eq!(q.loss(&array![3.0]), 2.0);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(DiagQuadratic::scalar(0.0, 1.0, 0.0).is_err());
        assert!(DiagQuadratic::scalar(1.0, 1.0, -0.1).is_err());
    }
}
