//! Diagnostic quantities for training runs: convergence metrics,
//! amplification factors, saturation, the noise-weighted stationary point of
//! the implicitly penalized objective, and empirical noise moments.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::linalg;
use crate::problems::VectorProblem;
use crate::response::ResponseModel;

/// Running averages of the per-iteration diagnostics. Merging two
/// accumulators is associative, so partial runs can be combined.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    count: u64,
    sum_grad_main_sq: f64,
    sum_grad_mixed_sq: f64,
    sum_p_residual_sq: f64,
    sum_dist_sq: f64,
    sum_amp_w: f64,
    sum_amp_p: f64,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        grad_main_sq: f64,
        grad_mixed_sq: f64,
        p_residual_sq: Option<f64>,
        dist_sq: Option<f64>,
        amp_w: Option<f64>,
        amp_p: Option<f64>,
    ) {
        self.count += 1;
        self.sum_grad_main_sq += grad_main_sq;
        self.sum_grad_mixed_sq += grad_mixed_sq;
        self.sum_p_residual_sq += p_residual_sq.unwrap_or(0.0);
        self.sum_dist_sq += dist_sq.unwrap_or(0.0);
        self.sum_amp_w += amp_w.unwrap_or(0.0);
        self.sum_amp_p += amp_p.unwrap_or(0.0);
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.count += other.count;
        self.sum_grad_main_sq += other.sum_grad_main_sq;
        self.sum_grad_mixed_sq += other.sum_grad_mixed_sq;
        self.sum_p_residual_sq += other.sum_p_residual_sq;
        self.sum_dist_sq += other.sum_dist_sq;
        self.sum_amp_w += other.sum_amp_w;
        self.sum_amp_p += other.sum_amp_p;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn avg(&self, sum: f64) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            sum / self.count as f64
        }
    }

    /// Average squared gradient norm at the main weights.
    pub fn e_main(&self) -> f64 {
        self.avg(self.sum_grad_main_sq)
    }

    /// Combined residual-learning convergence metric: average of
    /// `‖∇f(W̄)‖² + ‖P - P*(W)‖² + ‖W - W*‖²` (unit constants).
    pub fn e_residual(&self) -> f64 {
        self.avg(self.sum_grad_mixed_sq + self.sum_p_residual_sq + self.sum_dist_sq)
    }

    /// Average amplification factor of the main arrays.
    pub fn s_main(&self) -> f64 {
        self.avg(self.sum_amp_w)
    }

    /// Average amplification factor of the residual arrays.
    pub fn s_residual(&self) -> f64 {
        self.avg(self.sum_amp_p)
    }

    pub fn mean_dist_sq(&self) -> f64 {
        self.avg(self.sum_dist_sq)
    }
}

/// `‖G(X)/√F(X)‖²_∞`: the worst squared asymmetry-to-symmetry ratio over
/// the entries of `x`.
pub fn amplification_factor(model: &ResponseModel, x: &[f64]) -> f64 {
    x.iter()
        .map(|&w| {
            let (f, g) = model.decompose(w);
            if f > 0.0 {
                g * g / f
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Elementwise saturation `q_plus(x) * q_minus(x)`.
pub fn saturation_vector(model: &ResponseModel, x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&w| model.q_plus(w) * model.q_minus(w))
        .collect()
}

/// Squared norm weighted by the saturation vector: `Σ v_d² M_d`.
pub fn saturation_weighted_norm_sq(model: &ResponseModel, v: &Array1<f64>, x: &Array1<f64>) -> f64 {
    v.iter()
        .zip(x.iter())
        .map(|(&vd, &xd)| vd * vd * model.q_plus(xd) * model.q_minus(xd))
        .sum()
}

/// Stationary point of the noise-penalized objective
/// `f(W) + <Sigma, R_c(W)>` around the minimizer, to first order:
///
/// ```text
/// (H + Diag(Sigma) R'(w◇)) X = H W* + Diag(Sigma) R'(w◇) w◇
/// ```
///
/// with `H` the Hessian at the minimizer and `R = G/F` the asymmetry ratio.
pub fn implicit_stationary_point(
    model: &ResponseModel,
    problem: &dyn VectorProblem,
    sigma: &Array1<f64>,
) -> Result<Array1<f64>> {
    let d = problem.dim();
    let hess = problem.hessian();
    let w_star = problem.w_star();
    let w_diamond = model.symmetric_point()?;
    let r_prime = model.r_prime_at_symmetric()?;

    let mut m = hess.clone();
    for i in 0..d {
        m[[i, i]] += sigma[i] * r_prime;
    }
    let mut rhs = hess.dot(&w_star);
    for i in 0..d {
        rhs[i] += sigma[i] * r_prime * w_diamond;
    }
    linalg::solve(&m, &rhs)
}

/// Monte-Carlo elementwise mean of `|stochastic gradient|` at `w`.
pub fn empirical_sigma(
    problem: &dyn VectorProblem,
    w: &Array1<f64>,
    n_samples: usize,
    rng: &mut ChaCha12Rng,
) -> Array1<f64> {
    let mut acc = Array1::zeros(problem.dim());
    for _ in 0..n_samples.max(1) {
        let g = problem.grad_sample(w, rng);
        for (a, v) in acc.iter_mut().zip(g.iter()) {
            *a += v.abs();
        }
    }
    acc / n_samples.max(1) as f64
}

/// Residual the second array should settle at: `(W* - W) / gamma`.
pub fn residual_target(w: &Array1<f64>, w_star: &Array1<f64>, gamma: f64) -> Array1<f64> {
    (w_star - w) / gamma
}

/// Matrix version of [`residual_target`].
pub fn residual_target_mat(w: &Array2<f64>, w_star: &Array2<f64>, gamma: f64) -> Array2<f64> {
    (w_star - w) / gamma
}
