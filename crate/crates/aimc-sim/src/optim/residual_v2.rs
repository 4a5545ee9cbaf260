//! Residual learning with a digital buffer between the residual array and
//! the main array.
//!
//! The buffer filters read noise before anything reaches `W`:
//! `H ← (1-beta) H + beta (read(P))` (undamped `H ← H + beta read(P)` for
//! the TTv2 flavor, which also takes gradients at `W` instead of the mixed
//! weight). Transfers are threshold-gated: a coordinate fires exactly one
//! signed granularity-sized pulse into `W` when `|H| ≥ threshold`, and the
//! fired mass is debited from the buffer, so pulse mass and buffer
//! decrements agree exactly over a run.

use ndarray::Array2;
use rand_chacha::ChaCha12Rng;

use crate::device::AnalogArray;
use crate::error::{Error, Result};
use crate::optim::residual::GradFn;
use crate::optim::{Algorithm, BuildArgs, HyperParams};
use crate::problems::Objective;
use crate::rng::RunStreams;

/// Buffer ceiling for the undamped flavor; keeps persistent noise from
/// growing the buffer without bound.
const TTV2_H_CLIP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2Variant {
    Rlv2,
    Ttv2,
}

pub struct ResidualV2 {
    variant: V2Variant,
    w: Vec<AnalogArray>,
    p: Vec<AnalogArray>,
    h: Vec<Array2<f64>>,
    alpha: f64,
    beta: f64,
    gamma: f64,
    threshold: f64,
    mixing_read_noisy: bool,
    fired_mass: f64,
    buffer_decrement: f64,
    k: u64,
}

impl ResidualV2 {
    pub(crate) fn build(args: &mut BuildArgs, variant: V2Variant) -> Result<Self> {
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
        Self::new(variant, w, p, args.hp)
    }

    pub fn new(
        variant: V2Variant,
        w: Vec<AnalogArray>,
        p: Vec<AnalogArray>,
        hp: &HyperParams,
    ) -> Result<Self> {
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
        let h = w
            .iter()
            .map(|wi| {
                let (r, c) = wi.shape();
                Array2::zeros((r, c))
            })
            .collect();
        // The firing rule names the main array's granularity.
        let threshold = hp
            .transfer_threshold
            .unwrap_or(w[0].pulse_cfg().delta_w_min);
        if !(threshold > 0.0) {
            return Err(Error::Other(format!(
                "transfer threshold must be > 0, got {threshold}"
            )));
        }
        Ok(ResidualV2 {
            variant,
            w,
            p,
            h,
            alpha: hp.alpha,
            beta: hp.beta,
            gamma: hp.gamma,
            threshold,
            mixing_read_noisy: hp.mixing_read_noisy,
            fired_mass: 0.0,
            buffer_decrement: 0.0,
            k: 0,
        })
    }

    fn eval_weights(&self, read_rng: &mut ChaCha12Rng) -> Vec<Array2<f64>> {
        match self.variant {
            V2Variant::Ttv2 => self.w.iter().map(|a| a.read_noiseless()).collect(),
            V2Variant::Rlv2 => self
                .w
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
                .collect(),
        }
    }

    pub fn step_with_grad_fn(&mut self, grad_fn: GradFn, streams: &mut RunStreams) -> Result<f64> {
        let RunStreams {
            grad: grad_rng,
            device: device_rng,
            read: read_rng,
            ..
        } = streams;
        let eval = self.eval_weights(read_rng);
        let (loss, grads) = grad_fn(&eval, grad_rng);
        for (pi, g) in self.p.iter_mut().zip(&grads) {
            pi.apply_update(g, self.alpha, device_rng)?;
        }
        for idx in 0..self.w.len() {
            let p_read = self.p[idx].read(read_rng);
            let (rows, cols) = self.w[idx].shape();
            let delta_w_min = self.w[idx].pulse_cfg().delta_w_min;
            for i in 0..rows {
                for j in 0..cols {
                    let h_prev = self.h[idx][[i, j]];
                    let h_half = match self.variant {
                        V2Variant::Rlv2 => (1.0 - self.beta) * h_prev + self.beta * p_read[[i, j]],
                        V2Variant::Ttv2 => h_prev + self.beta * p_read[[i, j]],
                    };
                    let mut h_new = h_half;
                    if h_half.abs() >= self.threshold {
                        let delta = h_half.signum() * delta_w_min;
                        self.w[idx].apply_element_delta(i, j, delta, device_rng);
                        self.fired_mass += delta;
                        h_new = h_half - delta;
                        self.buffer_decrement += delta;
                    }
                    if self.variant == V2Variant::Ttv2 {
                        h_new = h_new.clamp(-TTV2_H_CLIP, TTV2_H_CLIP);
                    }
                    self.h[idx][[i, j]] = h_new;
                }
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

    pub fn buffers(&self) -> &[Array2<f64>] {
        &self.h
    }

    pub fn variant(&self) -> V2Variant {
        self.variant
    }
}

impl Algorithm for ResidualV2 {
    fn name(&self) -> &'static str {
        match self.variant {
            V2Variant::Rlv2 => "residual_learning_v2",
            V2Variant::Ttv2 => "tiki_taka_v2",
        }
    }

    fn step(&mut self, obj: &mut dyn Objective, streams: &mut RunStreams) -> Result<f64> {
        self.step_with_grad_fn(&mut |w, rng| obj.stochastic_loss_grad(w, rng), streams)
    }

    fn logical_weights(&self) -> Vec<Array2<f64>> {
        match self.variant {
            V2Variant::Ttv2 => self.main_weights(),
            V2Variant::Rlv2 => self
                .w
                .iter()
                .zip(&self.p)
                .map(|(wi, pi)| wi.read_noiseless() + pi.read_noiseless() * self.gamma)
                .collect(),
        }
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

    fn transfer_ledger(&self) -> Option<(f64, f64)> {
        Some((self.fired_mass, self.buffer_decrement))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{ResponseGrid, UpdateBackend};
    use crate::pulse::PulseConfig;
    use crate::response::ResponseModel;
    use crate::rng::SeedSplitter;
    use ndarray::array;

    const DWMIN: f64 = 1e-3;

    fn scalar(w0: f64, model: &ResponseModel, sigma_read: f64) -> AnalogArray {
        AnalogArray::new(
            array![[w0]],
            ResponseGrid::Shared(model.clone()),
            PulseConfig::new(DWMIN, 32, 0.0).unwrap(),
            UpdateBackend::ClosedForm,
            sigma_read,
        )
        .unwrap()
    }

    fn streams() -> RunStreams {
        RunStreams::new(&SeedSplitter::new(0), 0)
    }

    fn make(variant: V2Variant, p0: f64, beta: f64) -> ResidualV2 {
        let ideal = ResponseModel::generic_linear(1e9, 0.0).unwrap();
        let hp = HyperParams {
            alpha: 0.0,
            beta,
            gamma: 0.0,
            ..HyperParams::default()
        };
        ResidualV2::new(
            variant,
            vec![scalar(0.0, &ideal, 0.0)],
            vec![scalar(p0, &ideal, 0.0)],
            &hp,
        )
        .unwrap()
    }

    #[test]
    fn buffer_converges_geometrically_to_frozen_residual() {
        // With P frozen at p and noiseless reads, |H_k - p| = (1-beta)^k |H_0 - p|
        // while H stays below the firing threshold.
        let p0 = 0.8 * DWMIN;
        let beta = 0.25;
        let mut opt = make(V2Variant::Rlv2, p0, beta);
        let mut st = streams();
        for k in 1..=10 {
            opt.step_with_grad_fn(&mut |_w, _r| (0.0, vec![array![[0.0]]]), &mut st)
                .unwrap();
            let h = opt.buffers()[0][[0, 0]];
            let expect = p0 * (1.0 - (1.0 - beta).powi(k));
            assert!(
                (h - expect).abs() < 1e-15,
                "step {k}: h = {h}, expected {expect}"
            );
        }
    }

    #[test]
    fn below_threshold_keeps_buffer() {
        let mut opt = make(V2Variant::Rlv2, 0.4 * DWMIN, 1.0);
        let mut st = streams();
        opt.step_with_grad_fn(&mut |_w, _r| (0.0, vec![array![[0.0]]]), &mut st)
            .unwrap();
        // beta = 1 makes H jump straight to P = 0.4 granularity: no firing.
        assert!((opt.buffers()[0][[0, 0]] - 0.4 * DWMIN).abs() < 1e-18);
        assert_eq!(opt.main_arrays()[0].physical_weights()[[0, 0]], 0.0);
        assert_eq!(opt.transfer_ledger().unwrap(), (0.0, 0.0));
    }

    #[test]
    fn above_threshold_fires_one_pulse_and_debits_buffer() {
        let mut opt = make(V2Variant::Rlv2, 1.3 * DWMIN, 1.0);
        let mut st = streams();
        opt.step_with_grad_fn(&mut |_w, _r| (0.0, vec![array![[0.0]]]), &mut st)
            .unwrap();
        let h = opt.buffers()[0][[0, 0]];
        assert!((h - 0.3 * DWMIN).abs() < 1e-18, "h = {h}");
        let w = opt.main_arrays()[0].physical_weights()[[0, 0]];
        assert!((w - DWMIN).abs() < 1e-12, "w = {w}");
        let (fired, debited) = opt.transfer_ledger().unwrap();
        assert_eq!(fired, debited);
        assert!((fired - DWMIN).abs() < 1e-18);
    }

    #[test]
    fn ledger_identity_is_exact_under_noise() {
        let lin = ResponseModel::generic_linear(2.0, 0.1).unwrap();
        let hp = HyperParams {
            alpha: 0.05,
            beta: 0.1,
            gamma: 0.3,
            ..HyperParams::default()
        };
        for variant in [V2Variant::Rlv2, V2Variant::Ttv2] {
            let mut opt = ResidualV2::new(
                variant,
                vec![scalar(0.0, &lin, 0.05)],
                vec![scalar(0.0, &lin, 0.05)],
                &hp,
            )
            .unwrap();
            let mut st = streams();
            for k in 0..500 {
                let g = (0.1 * k as f64).cos();
                opt.step_with_grad_fn(&mut |_w, _r| (0.0, vec![array![[g]]]), &mut st)
                    .unwrap();
            }
            let (fired, debited) = opt.transfer_ledger().unwrap();
            assert_eq!(fired, debited, "{variant:?} ledger out of balance");
            assert!(fired != 0.0, "{variant:?} never fired");
        }
    }

    #[test]
    fn ttv2_buffer_is_undamped_and_clipped() {
        let p0 = 0.3 * DWMIN;
        let mut opt = make(V2Variant::Ttv2, p0, 1.0);
        let mut st = streams();
        opt.step_with_grad_fn(&mut |_w, _r| (0.0, vec![array![[0.0]]]), &mut st)
            .unwrap();
        opt.step_with_grad_fn(&mut |_w, _r| (0.0, vec![array![[0.0]]]), &mut st)
            .unwrap();
        // Undamped: H accumulates 2 * beta * p, no decay.
        assert!((opt.buffers()[0][[0, 0]] - 2.0 * p0).abs() < 1e-18);
    }

    #[test]
    fn ttv2_evaluates_gradients_on_the_main_array() {
        let ideal = ResponseModel::generic_linear(1e9, 0.0).unwrap();
        let hp = HyperParams {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.7,
            ..HyperParams::default()
        };
        let mut opt = ResidualV2::new(
            V2Variant::Ttv2,
            vec![scalar(0.2, &ideal, 0.0)],
            vec![scalar(0.5, &ideal, 0.0)],
            &hp,
        )
        .unwrap();
        let mut st = streams();
        let mut seen = f64::NAN;
        opt.step_with_grad_fn(
            &mut |w, _r| {
                seen = w[0][[0, 0]];
                (0.0, vec![array![[0.0]]])
            },
            &mut st,
        )
        .unwrap();
        assert_eq!(seen, 0.2);
    }

    #[test]
    fn stationary_at_aligned_point() {
        let pow = ResponseModel::power(1.0, 1.0).unwrap();
        let hp = HyperParams {
            alpha: 0.1,
            beta: 0.2,
            gamma: 0.4,
            ..HyperParams::default()
        };
        for variant in [V2Variant::Rlv2, V2Variant::Ttv2] {
            let mut opt = ResidualV2::new(
                variant,
                vec![scalar(0.25, &pow, 0.0)],
                vec![scalar(0.0, &pow, 0.0)],
                &hp,
            )
            .unwrap();
            let mut st = streams();
            for _ in 0..10 {
                opt.step_with_grad_fn(&mut |_w, _r| (0.0, vec![array![[0.0]]]), &mut st)
                    .unwrap();
            }
            assert_eq!(opt.main_arrays()[0].physical_weights()[[0, 0]], 0.25);
            assert_eq!(opt.residual_arrays()[0].physical_weights()[[0, 0]], 0.0);
            assert_eq!(opt.buffers()[0][[0, 0]], 0.0);
        }
    }
}
