//! SGD written through the analog update: every element's increment is
//! scaled by the response factor of its current state, which biases the
//! descent toward symmetric points under gradient noise.

use ndarray::Array2;
use rand_chacha::ChaCha12Rng;

use crate::device::AnalogArray;
use crate::error::{Error, Result};
use crate::optim::{effective_alpha, Algorithm, BuildArgs};
use crate::problems::Objective;
use crate::rng::RunStreams;

pub struct AnalogSgd {
    arrays: Vec<AnalogArray>,
    alpha: f64,
    lr_decay_t0: Option<f64>,
    k: u64,
}

impl AnalogSgd {
    pub fn new(arrays: Vec<AnalogArray>, alpha: f64) -> Self {
        AnalogSgd {
            arrays,
            alpha,
            lr_decay_t0: None,
            k: 0,
        }
    }

    pub(crate) fn build(args: &mut BuildArgs) -> Result<Self> {
        let arrays = args
            .init
            .iter()
            .map(|w| (args.make_array)(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnalogSgd {
            arrays,
            alpha: args.hp.alpha,
            lr_decay_t0: args.hp.lr_decay_t0,
            k: 0,
        })
    }

    /// One analog descent step with the supplied gradients.
    pub fn step_with_grads(&mut self, grads: &[Array2<f64>], rng: &mut ChaCha12Rng) -> Result<()> {
        if grads.len() != self.arrays.len() {
            return Err(Error::ShapeMismatch {
                expected: (self.arrays.len(), 0),
                got: (grads.len(), 0),
            });
        }
        let alpha = effective_alpha(self.alpha, self.k, self.lr_decay_t0);
        for (arr, g) in self.arrays.iter_mut().zip(grads) {
            arr.apply_update(g, alpha, rng)?;
        }
        self.k += 1;
        Ok(())
    }

    pub fn arrays(&self) -> &[AnalogArray] {
        &self.arrays
    }
}

impl Algorithm for AnalogSgd {
    fn name(&self) -> &'static str {
        "analog_sgd"
    }

    fn step(&mut self, obj: &mut dyn Objective, streams: &mut RunStreams) -> Result<f64> {
        let weights: Vec<Array2<f64>> =
            self.arrays.iter().map(|a| a.read_noiseless()).collect();
        let (loss, grads) = obj.stochastic_loss_grad(&weights, &mut streams.grad);
        self.step_with_grads(&grads, &mut streams.device)?;
        Ok(loss)
    }

    fn logical_weights(&self) -> Vec<Array2<f64>> {
        self.arrays.iter().map(|a| a.read_noiseless()).collect()
    }

    fn main_weights(&self) -> Vec<Array2<f64>> {
        self.logical_weights()
    }

    fn amp_w(&self) -> Option<f64> {
        Some(
            self.arrays
                .iter()
                .map(|a| a.amp_factor_sq_inf())
                .fold(0.0, f64::max),
        )
    }

    fn iterations(&self) -> u64 {
        self.k
    }
}
