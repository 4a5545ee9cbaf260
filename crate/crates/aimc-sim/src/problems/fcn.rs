//! Fully connected classifier with hand-derived backpropagation:
//! sigmoid hidden layers, linear output into softmax cross-entropy.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::problems::{MnistDataset, Objective};

/// Uniform init range per layer.
const INIT_RANGE: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct FcnClassifier {
    sizes: Vec<usize>,
}

impl FcnClassifier {
    /// `sizes[0]` inputs, hidden sigmoid layers, `sizes.last()` classes.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Other("classifier needs at least two layer sizes".into()));
        }
        Ok(FcnClassifier { sizes })
    }

    pub fn mnist_default() -> Self {
        FcnClassifier {
            sizes: vec![784, 256, 128, 10],
        }
    }

    /// Weight shapes, one `(fan_out, fan_in)` matrix per layer (no biases).
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.sizes
            .windows(2)
            .map(|pair| (pair[1], pair[0]))
            .collect()
    }

    pub fn init_weights(&self, rng: &mut ChaCha12Rng) -> Vec<Array2<f64>> {
        self.shapes()
            .into_iter()
            .map(|(r, c)| {
                let mut w = Array2::zeros((r, c));
                for v in w.iter_mut() {
                    *v = (rng.random::<f64>() * 2.0 - 1.0) * INIT_RANGE;
                }
                w
            })
            .collect()
    }

    fn forward(&self, weights: &[Array2<f64>], x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        // activations[0] = input batch; activations[l] after layer l.
        let mut acts = Vec::with_capacity(weights.len() + 1);
        acts.push(x.to_owned());
        for (l, w) in weights.iter().enumerate() {
            let z = acts[l].dot(&w.t());
            let last = l + 1 == weights.len();
            acts.push(if last { z } else { z.mapv(sigmoid) });
        }
        acts
    }

    /// Mean cross-entropy and exact per-layer gradients on a batch.
    pub fn forward_backward(
        &self,
        weights: &[Array2<f64>],
        images: ArrayView2<f64>,
        labels: &[u8],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let batch = images.nrows();
        if batch == 0 {
            return Err(Error::EmptyBatch);
        }
        if labels.len() != batch || images.ncols() != self.sizes[0] {
            return Err(Error::ShapeMismatch {
                expected: (batch, self.sizes[0]),
                got: (labels.len(), images.ncols()),
            });
        }
        let acts = self.forward(weights, images);
        let logits = acts.last().unwrap();
        let probs = softmax_rows(logits);
        let classes = *self.sizes.last().unwrap();

        let mut loss = 0.0;
        let mut delta = probs; // (p - onehot) / batch
        for (i, &y) in labels.iter().enumerate() {
            let y = y as usize;
            if y >= classes {
                return Err(Error::Other(format!("label {y} out of range 0..{classes}")));
            }
            loss -= delta[[i, y]].max(1e-300).ln();
            delta[[i, y]] -= 1.0;
        }
        loss /= batch as f64;
        delta /= batch as f64;

        let mut grads = vec![Array2::zeros((0, 0)); weights.len()];
        for l in (0..weights.len()).rev() {
            grads[l] = delta.t().dot(&acts[l]);
            if l > 0 {
                // Sigmoid derivative expressed through the activation itself.
                let back = delta.dot(&weights[l]);
                delta = back * &acts[l].mapv(|a| a * (1.0 - a));
            }
        }
        Ok((loss, grads))
    }

    /// Fraction of correctly classified examples.
    pub fn accuracy(&self, weights: &[Array2<f64>], images: ArrayView2<f64>, labels: &[u8]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let acts = self.forward(weights, images);
        let logits = acts.last().unwrap();
        let mut correct = 0usize;
        for (i, &y) in labels.iter().enumerate() {
            let row = logits.row(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            if best == y as usize {
                correct += 1;
            }
        }
        correct as f64 / labels.len() as f64
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Dataset-backed training objective: minibatches in shuffled epoch order,
/// held-out accuracy as the evaluation metric.
pub struct FcnProblem {
    net: FcnClassifier,
    train: MnistDataset,
    test: MnistDataset,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl FcnProblem {
    pub fn new(
        net: FcnClassifier,
        train: MnistDataset,
        test: MnistDataset,
        batch_size: usize,
    ) -> Result<Self> {
        if batch_size == 0 || train.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let order = (0..train.len()).collect();
        Ok(FcnProblem {
            net,
            train,
            test,
            batch_size,
            order,
            cursor: 0,
        })
    }

    pub fn net(&self) -> &FcnClassifier {
        &self.net
    }

    pub fn batches_per_epoch(&self) -> u64 {
        self.train.len().div_ceil(self.batch_size) as u64
    }

    fn next_batch(&mut self, rng: &mut ChaCha12Rng) -> (Array2<f64>, Vec<u8>) {
        if self.cursor >= self.order.len() {
            self.cursor = 0;
        }
        if self.cursor == 0 {
            // Fresh shuffle at each epoch boundary.
            for i in (1..self.order.len()).rev() {
                let j = rng.random_range(0..=i);
                self.order.swap(i, j);
            }
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let idx = &self.order[self.cursor..end];
        self.cursor = end;
        let mut images = Array2::zeros((idx.len(), self.train.pixels()));
        let mut labels = Vec::with_capacity(idx.len());
        for (row, &k) in idx.iter().enumerate() {
            images.row_mut(row).assign(&self.train.images.row(k));
            labels.push(self.train.labels[k]);
        }
        (images, labels)
    }
}

impl Objective for FcnProblem {
    fn shapes(&self) -> Vec<(usize, usize)> {
        self.net.shapes()
    }

    fn init_weights(&self, rng: &mut ChaCha12Rng) -> Vec<Array2<f64>> {
        self.net.init_weights(rng)
    }

    fn stochastic_loss_grad(
        &mut self,
        weights: &[Array2<f64>],
        rng: &mut ChaCha12Rng,
    ) -> (f64, Vec<Array2<f64>>) {
        let (images, labels) = self.next_batch(rng);
        self.net
            .forward_backward(weights, images.view(), &labels)
            .expect("batch shapes are consistent by construction")
    }

    fn full_loss_grad(&self, weights: &[Array2<f64>]) -> (f64, Vec<Array2<f64>>) {
        self.net
            .forward_backward(weights, self.train.images.view(), &self.train.labels)
            .expect("dataset shapes are consistent by construction")
    }

    fn full_metrics(&self, _weights: &[Array2<f64>]) -> Option<(f64, f64)> {
        // A full pass per log point would dominate the run.
        None
    }

    fn steps_per_epoch(&self) -> Option<u64> {
        Some(self.batches_per_epoch())
    }

    fn eval_metric(&self, weights: &[Array2<f64>]) -> Option<f64> {
        if self.test.is_empty() {
            return None;
        }
        Some(
            self.net
                .accuracy(weights, self.test.images.view(), &self.test.labels),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn tiny_net() -> FcnClassifier {
        FcnClassifier::new(vec![6, 5, 4, 10]).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_loss() {
        let net = tiny_net();
        let weights: Vec<Array2<f64>> = net
            .shapes()
            .into_iter()
            .map(|(r, c)| Array2::zeros((r, c)))
            .collect();
        let images = Array2::zeros((3, 6));
        let (loss, _) = net
            .forward_backward(&weights, images.view(), &[0, 5, 9])
            .unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_sample_equals_singleton_batch() {
        let net = tiny_net();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let weights = net.init_weights(&mut rng);
        let mut one = Array2::zeros((1, 6));
        for v in one.iter_mut() {
            *v = rng.random::<f64>();
        }
        let mut four = Array2::zeros((4, 6));
        for mut row in four.axis_iter_mut(Axis(0)) {
            row.assign(&one.row(0));
        }
        let (l1, g1) = net.forward_backward(&weights, one.view(), &[7]).unwrap();
        let (l4, g4) = net
            .forward_backward(&weights, four.view(), &[7, 7, 7, 7])
            .unwrap();
        assert!((l1 - l4).abs() < 1e-12);
        for (a, b) in g1.iter().zip(g4.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        // Finite-difference oracle on 20 sampled parameters, h = 1e-5.
        let net = tiny_net();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut weights = net.init_weights(&mut rng);
        let mut images = Array2::zeros((5, 6));
        for v in images.iter_mut() {
            *v = rng.random::<f64>();
        }
        let labels = [0u8, 3, 9, 1, 4];
        let (_, grads) = net
            .forward_backward(&weights, images.view(), &labels)
            .unwrap();

        let h = 1e-5;
        for probe in 0..20 {
            let layer = probe % weights.len();
            let (r, c) = weights[layer].dim();
            let i = (probe * 13 + 5) % r;
            let j = (probe * 29 + 3) % c;
            let orig = weights[layer][[i, j]];

            weights[layer][[i, j]] = orig + h;
            let (lp, _) = net
                .forward_backward(&weights, images.view(), &labels)
                .unwrap();
            weights[layer][[i, j]] = orig - h;
            let (lm, _) = net
                .forward_backward(&weights, images.view(), &labels)
                .unwrap();
            weights[layer][[i, j]] = orig;

            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads[layer][[i, j]];
            let rel = (analytic - numeric).abs() / (analytic.abs() + 1e-8);
            assert!(
                rel <= 1e-4,
                "layer {layer} ({i},{j}): analytic {analytic}, numeric {numeric}, rel {rel}"
            );
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let net = tiny_net();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let weights = net.init_weights(&mut rng);
        let images = Array2::zeros((2, 6));
        assert!(matches!(
            net.forward_backward(&weights, images.view(), &[1]),
            Err(Error::ShapeMismatch { .. })
        ));
        let empty = Array2::zeros((0, 6));
        assert!(matches!(
            net.forward_backward(&weights, empty.view(), &[]),
            Err(Error::EmptyBatch)
        ));
    }
}
