//! Reference digital SGD: `W ← W - alpha * grad`, no analog effects.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::optim::{effective_alpha, Algorithm, BuildArgs};
use crate::problems::Objective;
use crate::rng::RunStreams;

pub struct DigitalSgd {
    weights: Vec<Array2<f64>>,
    alpha: f64,
    lr_decay_t0: Option<f64>,
    k: u64,
}

impl DigitalSgd {
    pub fn new(init: Vec<Array2<f64>>, alpha: f64) -> Self {
        DigitalSgd {
            weights: init,
            alpha,
            lr_decay_t0: None,
            k: 0,
        }
    }

    pub(crate) fn build(args: &mut BuildArgs) -> Result<Self> {
        Ok(DigitalSgd {
            weights: args.init.to_vec(),
            alpha: args.hp.alpha,
            lr_decay_t0: args.hp.lr_decay_t0,
            k: 0,
        })
    }

    /// Exact descent step with the supplied gradients.
    pub fn step_with_grads(&mut self, grads: &[Array2<f64>]) -> Result<()> {
        if grads.len() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: (self.weights.len(), 0),
                got: (grads.len(), 0),
            });
        }
        let alpha = effective_alpha(self.alpha, self.k, self.lr_decay_t0);
        for (w, g) in self.weights.iter_mut().zip(grads) {
            if w.dim() != g.dim() {
                return Err(Error::ShapeMismatch {
                    expected: w.dim(),
                    got: g.dim(),
                });
            }
            *w -= &(g * alpha);
        }
        self.k += 1;
        Ok(())
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }
}

impl Algorithm for DigitalSgd {
    fn name(&self) -> &'static str {
        "digital_sgd"
    }

    fn step(&mut self, obj: &mut dyn Objective, streams: &mut RunStreams) -> Result<f64> {
        let (loss, grads) = obj.stochastic_loss_grad(&self.weights, &mut streams.grad);
        self.step_with_grads(&grads)?;
        Ok(loss)
    }

    fn logical_weights(&self) -> Vec<Array2<f64>> {
        self.weights.clone()
    }

    fn main_weights(&self) -> Vec<Array2<f64>> {
        self.weights.clone()
    }

    fn iterations(&self) -> u64 {
        self.k
    }
}
