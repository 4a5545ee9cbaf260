//! Training objectives with exact stochastic gradients.

pub mod fcn;
pub mod least_squares;
pub mod mnist;
pub mod quadratic;

pub use fcn::{FcnClassifier, FcnProblem};
pub use least_squares::{make_least_squares, GradNoise, LeastSquares};
pub use mnist::{load_mnist_idx, write_idx_images, write_idx_labels, MnistDataset};
pub use quadratic::DiagQuadratic;

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha12Rng;

/// An objective whose parameters are a list of dense tensors.
///
/// Problem definitions are immutable after construction; the `&mut self` on
/// stochastic evaluation only advances data-ordering state (epoch cursors).
pub trait Objective {
    /// Shapes of the parameter tensors.
    fn shapes(&self) -> Vec<(usize, usize)>;

    /// Initial parameter values.
    fn init_weights(&self, rng: &mut ChaCha12Rng) -> Vec<Array2<f64>>;

    /// One stochastic loss/gradient sample at `weights`.
    fn stochastic_loss_grad(
        &mut self,
        weights: &[Array2<f64>],
        rng: &mut ChaCha12Rng,
    ) -> (f64, Vec<Array2<f64>>);

    /// Exact (full-data, noiseless) loss and gradient at `weights`.
    fn full_loss_grad(&self, weights: &[Array2<f64>]) -> (f64, Vec<Array2<f64>>);

    /// Exact loss and squared gradient norm for logging, when affordable at
    /// every log point. Dataset-backed problems return `None`.
    fn full_metrics(&self, weights: &[Array2<f64>]) -> Option<(f64, f64)> {
        let (loss, grads) = self.full_loss_grad(weights);
        let gsq = grads
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .sum();
        Some((loss, gsq))
    }

    /// Steps per pass over the data, for problems with a dataset.
    fn steps_per_epoch(&self) -> Option<u64> {
        None
    }

    /// Squared distance to the known optimum, when one exists.
    fn dist_to_opt_sq(&self, weights: &[Array2<f64>]) -> Option<f64> {
        let _ = weights;
        None
    }

    /// The known optimum, when one exists.
    fn optimum(&self) -> Option<Vec<Array2<f64>>> {
        None
    }

    /// Held-out evaluation metric (e.g. test accuracy), when one exists.
    fn eval_metric(&self, weights: &[Array2<f64>]) -> Option<f64> {
        let _ = weights;
        None
    }
}

/// A vector-valued problem with a known quadratic structure, used by the
/// diagnostic computations.
pub trait VectorProblem {
    fn dim(&self) -> usize;
    fn loss(&self, w: &Array1<f64>) -> f64;
    fn grad_full(&self, w: &Array1<f64>) -> Array1<f64>;
    fn grad_sample(&self, w: &Array1<f64>, rng: &mut ChaCha12Rng) -> Array1<f64>;
    fn hessian(&self) -> Array2<f64>;
    fn w_star(&self) -> Array1<f64>;
}

/// Adapts a [`VectorProblem`] to the tensor-based [`Objective`] interface as
/// a single `(D, 1)` column.
pub struct VectorObjective<P: VectorProblem> {
    problem: P,
    init: Array1<f64>,
}

impl<P: VectorProblem> VectorObjective<P> {
    pub fn new(problem: P) -> Self {
        let init = Array1::zeros(problem.dim());
        VectorObjective { problem, init }
    }

    pub fn with_init(problem: P, init: Array1<f64>) -> Self {
        VectorObjective { problem, init }
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }
}

pub(crate) fn column_to_vec(w: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(w.column(0).iter().copied())
}

pub(crate) fn vec_to_column(v: &Array1<f64>) -> Array2<f64> {
    let n = v.len();
    v.clone().into_shape_with_order((n, 1)).unwrap()
}

impl<P: VectorProblem> Objective for VectorObjective<P> {
    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.problem.dim(), 1)]
    }

    fn init_weights(&self, _rng: &mut ChaCha12Rng) -> Vec<Array2<f64>> {
        vec![vec_to_column(&self.init)]
    }

    fn stochastic_loss_grad(
        &mut self,
        weights: &[Array2<f64>],
        rng: &mut ChaCha12Rng,
    ) -> (f64, Vec<Array2<f64>>) {
        let w = column_to_vec(&weights[0]);
        let g = self.problem.grad_sample(&w, rng);
        (self.problem.loss(&w), vec![vec_to_column(&g)])
    }

    fn full_loss_grad(&self, weights: &[Array2<f64>]) -> (f64, Vec<Array2<f64>>) {
        let w = column_to_vec(&weights[0]);
        let g = self.problem.grad_full(&w);
        (self.problem.loss(&w), vec![vec_to_column(&g)])
    }

    fn dist_to_opt_sq(&self, weights: &[Array2<f64>]) -> Option<f64> {
        let w = column_to_vec(&weights[0]);
        let d = &w - &self.problem.w_star();
        Some(d.dot(&d))
    }

    fn optimum(&self) -> Option<Vec<Array2<f64>>> {
        Some(vec![vec_to_column(&self.problem.w_star())])
    }
}
