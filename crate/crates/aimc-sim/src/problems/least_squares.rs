//! Synthetic least-squares objective `f(W) = ½ ‖A W - b‖²` with
//! `b = A W*` exact at construction.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::VectorProblem;

/// Stochastic-gradient noise source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradNoise {
    /// Exact full-batch gradients.
    None,
    /// Full gradient plus `sigma * N(0, I)`.
    Additive { sigma: f64 },
    /// Uniform row subsampling without replacement, rescaled to stay
    /// unbiased.
    Subsample { batch: usize },
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Array2<f64>,
    b: Array1<f64>,
    w_star: Array1<f64>,
    noise: GradNoise,
}

impl LeastSquares {
    pub fn new(a: Array2<f64>, w_star: Array1<f64>, noise: GradNoise) -> Result<Self> {
        if a.ncols() != w_star.len() {
            return Err(Error::ShapeMismatch {
                expected: (a.nrows(), w_star.len()),
                got: a.dim(),
            });
        }
        if let GradNoise::Subsample { batch } = noise {
            if batch == 0 || batch > a.nrows() {
                return Err(Error::EmptyBatch);
            }
        }
        let b = a.dot(&w_star);
        Ok(LeastSquares { a, b, w_star, noise })
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn targets(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn noise(&self) -> GradNoise {
        self.noise
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// `Aᵀ(A w - b)` restricted to `batch` rows, rescaled by
    /// `rows / |batch|` so that averaging over all batches gives the full
    /// gradient.
    pub fn gradient_batch(&self, w: &Array1<f64>, batch: &[usize]) -> Result<Array1<f64>> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut g = Array1::zeros(self.dim());
        for &r in batch {
            let row = self.a.row(r);
            let resid = row.dot(w) - self.b[r];
            for (gi, &ai) in g.iter_mut().zip(row.iter()) {
                *gi += resid * ai;
            }
        }
        let scale = self.rows() as f64 / batch.len() as f64;
        Ok(g * scale)
    }

    /// Largest-eigenvalue estimate of `AᵀA` (the gradient's Lipschitz
    /// constant).
    pub fn lipschitz_estimate(&self) -> f64 {
        linalg::max_eigenvalue(&self.hessian(), 100)
    }
}

impl VectorProblem for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn loss(&self, w: &Array1<f64>) -> f64 {
        let r = self.a.dot(w) - &self.b;
        0.5 * r.dot(&r)
    }

    fn grad_full(&self, w: &Array1<f64>) -> Array1<f64> {
        let r = self.a.dot(w) - &self.b;
        self.a.t().dot(&r)
    }

    fn grad_sample(&self, w: &Array1<f64>, rng: &mut ChaCha12Rng) -> Array1<f64> {
        match self.noise {
            GradNoise::None => self.grad_full(w),
            GradNoise::Additive { sigma } => {
                let mut g = self.grad_full(w);
                for v in g.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += sigma * z;
                }
                g
            }
            GradNoise::Subsample { batch } => {
                let rows = self.rows();
                let idx = sample_without_replacement(rows, batch, rng);
                self.gradient_batch(w, &idx).expect("non-empty batch")
            }
        }
    }

    fn hessian(&self) -> Array2<f64> {
        self.a.t().dot(&self.a)
    }

    fn w_star(&self) -> Array1<f64> {
        self.w_star.clone()
    }
}

fn sample_without_replacement(n: usize, k: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    // Partial Fisher-Yates over an index vector.
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k.min(n));
    idx
}

/// Gaussian problem instance: `A` entries `N(0, sigma_a²)` of size
/// `d_out × d`, ground truth entries `N(0, sigma_w_star²)`, `b = A W*`.
pub fn make_least_squares(
    d: usize,
    d_out: usize,
    sigma_a: f64,
    sigma_w_star: f64,
    noise: GradNoise,
    rng: &mut ChaCha12Rng,
) -> Result<LeastSquares> {
    let mut a = Array2::zeros((d_out, d));
    for v in a.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sigma_a * z;
    }
    let mut w_star = Array1::zeros(d);
    for v in w_star.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sigma_w_star * z;
    }
    LeastSquares::new(a, w_star, noise)
}
