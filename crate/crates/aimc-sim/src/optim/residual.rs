//! Residual learning: a second analog array `P` tracks the residual of the
//! main array by descending the objective at the mixed weight
//! `W̄ = W + gamma * P`, while a round-robin transfer periodically moves
//! scaled residual columns into `W`. With `gamma = 0` this reduces to the
//! classic two-array scheme that transfers an accumulated gradient.
//!
//! Per step:
//! 1. `W̄ = W + gamma * read(P)` (noisy read when configured);
//! 2. `g` = stochastic gradient at `W̄`;
//! 3. analog-update `P` with desired increment `-alpha * g`;
//! 4. analog-update the scheduled columns of `W` with desired increment
//!    `+beta * read(P)` on those columns.

use ndarray::Array2;
use rand_chacha::ChaCha12Rng;

use crate::device::AnalogArray;
use crate::error::{Error, Result};
use crate::optim::{Algorithm, BuildArgs, HyperParams};
use crate::problems::Objective;
use crate::rng::RunStreams;

pub type GradFn<'a> = &'a mut dyn FnMut(&[Array2<f64>], &mut ChaCha12Rng) -> (f64, Vec<Array2<f64>>);

pub struct ResidualLearning {
    w: Vec<AnalogArray>,
    p: Vec<AnalogArray>,
    alpha: f64,
    beta: f64,
    gamma: f64,
    transfer_columns: usize,
    mixing_read_noisy: bool,
    cursors: Vec<usize>,
    k: u64,
}

impl ResidualLearning {
    pub(crate) fn build(args: &mut BuildArgs) -> Result<Self> {
        let w = args
            .init
            .iter()
            .map(|init| (args.make_array)(init))
            .collect::<Result<Vec<_>>>()?;
        let p = args
            .init
            .iter()
            .map(|init| {
                let mut arr = (args.make_array)(&Array2::zeros(init.dim()))?;
                if args.hp.zero_shift_p {
                    arr.zero_shift_to_symmetric()?;
                }
                Ok(arr)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(w, p, args.hp)
    }

    pub fn new(w: Vec<AnalogArray>, p: Vec<AnalogArray>, hp: &HyperParams) -> Result<Self> {
        if w.is_empty() || w.len() != p.len() {
            return Err(Error::MissingResidualArray);
        }
        for (wi, pi) in w.iter().zip(&p) {
            if wi.shape() != pi.shape() {
                return Err(Error::ShapeMismatch {
                    expected: wi.shape(),
                    got: pi.shape(),
                });
            }
        }
        if hp.transfer_columns == 0 {
            return Err(Error::Other("transfer_columns must be >= 1".into()));
        }
        let cursors = vec![0; w.len()];
        Ok(ResidualLearning {
            w,
            p,
            alpha: hp.alpha,
            beta: hp.beta,
            gamma: hp.gamma,
            transfer_columns: hp.transfer_columns,
            mixing_read_noisy: hp.mixing_read_noisy,
            cursors,
            k: 0,
        })
    }

    fn mixed_weights(&self, read_rng: &mut ChaCha12Rng) -> Vec<Array2<f64>> {
        self.w
            .iter()
            .zip(&self.p)
            .map(|(wi, pi)| {
                let base = wi.read_noiseless();
                if self.gamma == 0.0 {
                    return base;
                }
                let p_read = if self.mixing_read_noisy {
                    pi.read(read_rng)
                } else {
                    pi.read_noiseless()
                };
                base + p_read * self.gamma
            })
            .collect()
    }

    /// One full iteration given a gradient callback evaluated at the mixed
    /// weight.
    pub fn step_with_grad_fn(&mut self, grad_fn: GradFn, streams: &mut RunStreams) -> Result<f64> {
        let RunStreams {
            grad: grad_rng,
            device: device_rng,
            read: read_rng,
            ..
        } = streams;
        let mixed = self.mixed_weights(read_rng);
        let (loss, grads) = grad_fn(&mixed, grad_rng);
        for (pi, g) in self.p.iter_mut().zip(&grads) {
            pi.apply_update(g, self.alpha, device_rng)?;
        }
        for (idx, wi) in self.w.iter_mut().enumerate() {
            let cols = wi.shape().1;
            for _ in 0..self.transfer_columns.min(cols) {
                let col = self.cursors[idx];
                self.cursors[idx] = (col + 1) % cols;
                let p_col = self.p[idx].read_column(col, read_rng);
                wi.apply_delta_column(col, &(p_col * self.beta), device_rng)?;
            }
        }
        self.k += 1;
        Ok(loss)
    }

    pub fn main_arrays(&self) -> &[AnalogArray] {
        &self.w
    }

    pub fn residual_arrays(&self) -> &[AnalogArray] {
        &self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Algorithm for ResidualLearning {
    fn name(&self) -> &'static str {
        "residual_learning"
    }

    fn step(&mut self, obj: &mut dyn Objective, streams: &mut RunStreams) -> Result<f64> {
        self.step_with_grad_fn(&mut |w, rng| obj.stochastic_loss_grad(w, rng), streams)
    }

    fn logical_weights(&self) -> Vec<Array2<f64>> {
        self.w
            .iter()
            .zip(&self.p)
            .map(|(wi, pi)| wi.read_noiseless() + pi.read_noiseless() * self.gamma)
            .collect()
    }

    fn main_weights(&self) -> Vec<Array2<f64>> {
        self.w.iter().map(|a| a.read_noiseless()).collect()
    }

    fn residual_weights(&self) -> Option<Vec<Array2<f64>>> {
        Some(self.p.iter().map(|a| a.read_noiseless()).collect())
    }

    fn amp_w(&self) -> Option<f64> {
        Some(
            self.w
                .iter()
                .map(|a| a.amp_factor_sq_inf())
                .fold(0.0, f64::max),
        )
    }

    fn amp_p(&self) -> Option<f64> {
        Some(
            self.p
                .iter()
                .map(|a| a.amp_factor_sq_inf())
                .fold(0.0, f64::max),
        )
    }

    fn iterations(&self) -> u64 {
        self.k
    }
}
