//! Weight matrices backed by arrays of resistive elements.
//!
//! An [`AnalogArray`] owns a dense weight matrix whose every element carries
//! a response model (shared, or per-element when fabrication spread is
//! modeled) and is mutated only through analog updates: either the
//! closed-form approximation or an explicit pulse train. Reads subtract an
//! optional zero-shift reference and add Gaussian read noise.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pulse::{self, PulseConfig};
use crate::response::ResponseModel;

/// How desired increments are written into the elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateBackend {
    /// One-shot update scaled by the response factor at the current state.
    ClosedForm,
    /// Explicit pulse train with granularity, pulse cap, and cycle noise.
    PulseTrain,
}

/// One response model shared by all elements, or one per element.
#[derive(Debug, Clone)]
pub enum ResponseGrid {
    Shared(ResponseModel),
    PerElement {
        rows: usize,
        cols: usize,
        models: Vec<ResponseModel>,
    },
}

impl ResponseGrid {
    pub fn at(&self, row: usize, col: usize) -> &ResponseModel {
        match self {
            ResponseGrid::Shared(m) => m,
            ResponseGrid::PerElement { cols, models, .. } => &models[row * cols + col],
        }
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        match self {
            ResponseGrid::Shared(_) => Ok(()),
            ResponseGrid::PerElement {
                rows: r, cols: c, ..
            } => {
                if (*r, *c) == (rows, cols) {
                    Ok(())
                } else {
                    Err(Error::ShapeMismatch {
                        expected: (rows, cols),
                        got: (*r, *c),
                    })
                }
            }
        }
    }
}

/// Per-element fabrication spread: each element gets a copy of `base` with
/// its scale parameters multiplied by `exp(spread * z)`, `z ~ N(0,1)`,
/// clamped to `[1 - 3 spread, 1 + 3 spread]` (floored away from zero).
/// Deterministic under a seeded `rng`; `spread = 0` reproduces `base`
/// everywhere.
pub fn with_element_variation(
    base: &ResponseModel,
    spread: f64,
    shape: (usize, usize),
    rng: &mut impl Rng,
) -> Result<ResponseGrid> {
    if !(0.0..1.0).contains(&spread) {
        return Err(Error::InvalidResponse(format!(
            "element-variation spread must be in [0, 1), got {spread}"
        )));
    }
    if spread == 0.0 {
        return Ok(ResponseGrid::Shared(base.clone()));
    }
    let (rows, cols) = shape;
    let lo = (1.0 - 3.0 * spread).max(0.01);
    let hi = 1.0 + 3.0 * spread;
    let mut models = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let zt: f64 = rng.sample(StandardNormal);
        let zg: f64 = rng.sample(StandardNormal);
        let tau_factor = (spread * zt).exp().clamp(lo, hi);
        let gamma_factor = (spread * zg).exp().clamp(lo, hi);
        models.push(base.perturbed(tau_factor, gamma_factor)?);
    }
    Ok(ResponseGrid::PerElement { rows, cols, models })
}

/// A weight tensor stored in resistive elements.
///
/// Single-writer: updates take `&mut self`; reads are side-effect free on
/// the array itself.
#[derive(Debug, Clone)]
pub struct AnalogArray {
    rows: usize,
    cols: usize,
    weights: Array2<f64>,
    response: ResponseGrid,
    pulse_cfg: PulseConfig,
    backend: UpdateBackend,
    read_noise_sigma: f64,
    reference: Option<Array2<f64>>,
}

impl AnalogArray {
    pub fn new(
        init: Array2<f64>,
        response: ResponseGrid,
        pulse_cfg: PulseConfig,
        backend: UpdateBackend,
        read_noise_sigma: f64,
    ) -> Result<Self> {
        let (rows, cols) = init.dim();
        response.check_shape(rows, cols)?;
        if !(read_noise_sigma >= 0.0) {
            return Err(Error::InvalidResponse(format!(
                "read_noise_sigma must be >= 0, got {read_noise_sigma}"
            )));
        }
        let mut arr = AnalogArray {
            rows,
            cols,
            weights: init,
            response,
            pulse_cfg,
            backend,
            read_noise_sigma,
            reference: None,
        };
        // Conductance states cannot sit outside the element's range.
        for i in 0..arr.rows {
            for j in 0..arr.cols {
                arr.weights[[i, j]] = arr.response.at(i, j).clamp(arr.weights[[i, j]]);
            }
        }
        Ok(arr)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Raw conductance-encoded states (no reference subtraction).
    pub fn physical_weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn response(&self) -> &ResponseGrid {
        &self.response
    }

    pub fn pulse_cfg(&self) -> &PulseConfig {
        &self.pulse_cfg
    }

    pub fn backend(&self) -> UpdateBackend {
        self.backend
    }

    pub fn read_noise_sigma(&self) -> f64 {
        self.read_noise_sigma
    }

    /// Noisy logical read: `weights - reference + sigma_read * N(0, 1)`.
    pub fn read(&self, rng: &mut impl Rng) -> Array2<f64> {
        let mut out = self.read_noiseless();
        if self.read_noise_sigma > 0.0 {
            for v in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += self.read_noise_sigma * z;
            }
        }
        out
    }

    /// Logical value without read noise: `weights - reference`.
    pub fn read_noiseless(&self) -> Array2<f64> {
        match &self.reference {
            Some(r) => &self.weights - r,
            None => self.weights.clone(),
        }
    }

    /// Noisy logical read of a single column.
    pub fn read_column(&self, col: usize, rng: &mut impl Rng) -> Array1<f64> {
        let mut out = Array1::zeros(self.rows);
        for i in 0..self.rows {
            let r = self.reference.as_ref().map_or(0.0, |r| r[[i, col]]);
            let noise = if self.read_noise_sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                self.read_noise_sigma * z
            } else {
                0.0
            };
            out[i] = self.weights[[i, col]] - r + noise;
        }
        out
    }

    /// Snapshots the current state as the zero reference, so subsequent
    /// reads report zero until the weights move again.
    pub fn zero_shift(&mut self) {
        self.reference = Some(self.weights.clone());
    }

    /// Moves every element to its own symmetric point and references it
    /// there, so the logical zero coincides with the symmetric point.
    pub fn zero_shift_to_symmetric(&mut self) -> Result<()> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.weights[[i, j]] = self.response.at(i, j).symmetric_point()?;
            }
        }
        self.zero_shift();
        Ok(())
    }

    pub fn reference(&self) -> Option<&Array2<f64>> {
        self.reference.as_ref()
    }

    /// Applies the backend update with per-element desired increment
    /// `-lr * desired[i, j]` (gradient-like semantics).
    pub fn apply_update(
        &mut self,
        desired: &Array2<f64>,
        lr: f64,
        rng: &mut impl Rng,
    ) -> Result<()> {
        if desired.dim() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch {
                expected: (self.rows, self.cols),
                got: desired.dim(),
            });
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                let dw = -lr * desired[[i, j]];
                self.apply_element_delta(i, j, dw, rng);
            }
        }
        Ok(())
    }

    /// Applies raw desired increments `delta[i, j]` through the backend.
    pub fn apply_delta(&mut self, delta: &Array2<f64>, rng: &mut impl Rng) -> Result<()> {
        if delta.dim() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch {
                expected: (self.rows, self.cols),
                got: delta.dim(),
            });
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.apply_element_delta(i, j, delta[[i, j]], rng);
            }
        }
        Ok(())
    }

    /// Applies desired increments to one column.
    pub fn apply_delta_column(
        &mut self,
        col: usize,
        delta: &Array1<f64>,
        rng: &mut impl Rng,
    ) -> Result<()> {
        if delta.len() != self.rows {
            return Err(Error::ShapeMismatch {
                expected: (self.rows, 1),
                got: (delta.len(), 1),
            });
        }
        for i in 0..self.rows {
            self.apply_element_delta(i, col, delta[i], rng);
        }
        Ok(())
    }

    /// Applies one desired increment to element `(i, j)` through the backend.
    pub fn apply_element_delta(&mut self, i: usize, j: usize, dw: f64, rng: &mut impl Rng) {
        if dw == 0.0 && self.backend == UpdateBackend::ClosedForm {
            return;
        }
        let model = self.response.at(i, j);
        let w = self.weights[[i, j]];
        self.weights[[i, j]] = match self.backend {
            UpdateBackend::ClosedForm => pulse::closed_form_update(model, w, dw),
            UpdateBackend::PulseTrain => pulse::pulse_train_update(model, &self.pulse_cfg, w, dw, rng),
        };
    }

    /// Max over elements of `G(w)² / F(w)` at the current physical states.
    pub fn amp_factor_sq_inf(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let (f, g) = self.response.at(i, j).decompose(self.weights[[i, j]]);
                if f > 0.0 {
                    best = best.max(g * g / f);
                }
            }
        }
        best
    }

    /// Min over elements of the saturation `q_plus(w) * q_minus(w)`.
    pub fn saturation_min(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let m = self.response.at(i, j);
                let w = self.weights[[i, j]];
                worst = worst.min(m.q_plus(w) * m.q_minus(w));
            }
        }
        worst
    }

    /// Writes the physical weights as flat row-major little-endian f64.
    pub fn write_weights_bin(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut fh = fs::File::create(path)?;
        for v in self.weights.iter() {
            fh.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Reads a flat row-major little-endian f64 snapshot with known shape.
pub fn read_weights_bin(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let need = rows * cols * 8;
    if bytes.len() != need {
        return Err(Error::TruncatedFile {
            path: path.display().to_string(),
            need,
            have: bytes.len(),
        });
    }
    let mut out = Array2::zeros((rows, cols));
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        out[[k / cols, k % cols]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn ideal_response() -> ResponseModel {
        ResponseModel::generic_linear(1e9, 0.0).unwrap()
    }

    fn cfg() -> PulseConfig {
        PulseConfig::new(1e-3, 32, 0.0).unwrap()
    }

    fn scalar_array(w0: f64, model: ResponseModel, backend: UpdateBackend) -> AnalogArray {
        AnalogArray::new(
            array![[w0]],
            ResponseGrid::Shared(model),
            cfg(),
            backend,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn apply_update_examples() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut a = scalar_array(0.0, ideal_response(), UpdateBackend::ClosedForm);
        a.apply_update(&array![[2.0]], 0.1, &mut rng).unwrap();
        assert!((a.physical_weights()[[0, 0]] + 0.2).abs() < 1e-9);

        let lin = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let mut a = scalar_array(0.5, lin, UpdateBackend::ClosedForm);
        a.apply_update(&array![[-1.0]], 0.1, &mut rng).unwrap();
        assert!((a.physical_weights()[[0, 0]] - 0.55).abs() < 1e-15);
    }

    #[test]
    fn backends_agree_for_small_steps() {
        // First-order mismatch between one-shot and pulsed updates is
        // ~delta² |q'| / 2, so a mild slope keeps |lr*desired| <= 0.1
        // within 1e-3.
        let lin = ResponseModel::generic_linear(10.0, 0.0).unwrap();
        let fine = PulseConfig::new(1e-5, u32::MAX, 0.0).unwrap();
        let init = array![[0.1, -0.2], [0.35, 0.0]];
        let desired = array![[1.0, -0.5], [0.9, -1.0]];
        let mut rng = ChaCha12Rng::seed_from_u64(0);

        let mut closed = AnalogArray::new(
            init.clone(),
            ResponseGrid::Shared(lin.clone()),
            fine,
            UpdateBackend::ClosedForm,
            0.0,
        )
        .unwrap();
        let mut pulsed = AnalogArray::new(
            init,
            ResponseGrid::Shared(lin),
            fine,
            UpdateBackend::PulseTrain,
            0.0,
        )
        .unwrap();
        closed.apply_update(&desired, 0.1, &mut rng).unwrap();
        pulsed.apply_update(&desired, 0.1, &mut rng).unwrap();
        for (a, b) in closed
            .physical_weights()
            .iter()
            .zip(pulsed.physical_weights().iter())
        {
            assert!((a - b).abs() <= 1e-3, "closed {a} vs pulsed {b}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut a = scalar_array(0.0, ideal_response(), UpdateBackend::ClosedForm);
        let err = a.apply_update(&array![[1.0, 2.0]], 0.1, &mut rng);
        assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn read_examples() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let a = scalar_array(0.25, ideal_response(), UpdateBackend::ClosedForm);
        assert_eq!(a.read(&mut rng)[[0, 0]], 0.25);

        let mut b = scalar_array(0.25, ideal_response(), UpdateBackend::ClosedForm);
        b.zero_shift();
        assert_eq!(b.read(&mut rng)[[0, 0]], 0.0);
    }

    #[test]
    fn read_noise_variance_matches_sigma() {
        // Monte-Carlo oracle: sample variance of 1e5 reads of a frozen
        // element should be sigma² = 0.0036 within 5%.
        let mut a = scalar_array(0.1, ideal_response(), UpdateBackend::ClosedForm);
        a.read_noise_sigma = 0.06;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let v = a.read(&mut rng)[[0, 0]];
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(
            (var - 0.0036).abs() <= 0.05 * 0.0036,
            "sample variance {var}"
        );
    }

    #[test]
    fn reads_are_side_effect_free() {
        let a = scalar_array(0.33, ideal_response(), UpdateBackend::ClosedForm);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let r1 = a.read(&mut rng);
        let r2 = a.read(&mut rng);
        assert_eq!(r1[[0, 0]].to_bits(), r2[[0, 0]].to_bits());
    }

    #[test]
    fn zero_shift_behavior() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let lin = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let mut a = scalar_array(0.4, lin, UpdateBackend::ClosedForm);
        a.zero_shift();
        assert_eq!(a.read(&mut rng)[[0, 0]], 0.0);
        a.zero_shift();
        assert_eq!(a.read(&mut rng)[[0, 0]], 0.0);

        // After shifting, an update shows up as its own effect only.
        a.apply_delta(&array![[0.05]], &mut rng).unwrap();
        let expect = pulse::closed_form_update(
            &ResponseModel::generic_linear(1.0, 0.0).unwrap(),
            0.4,
            0.05,
        ) - 0.4;
        assert!((a.read(&mut rng)[[0, 0]] - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_shift_to_symmetric_aligns_logical_zero() {
        let skewed = ResponseModel::generic_linear(2.0, 0.3).unwrap();
        let mut a = scalar_array(0.0, skewed, UpdateBackend::ClosedForm);
        a.zero_shift_to_symmetric().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert_eq!(a.read(&mut rng)[[0, 0]], 0.0);
        assert!((a.physical_weights()[[0, 0]] - 0.6).abs() < 1e-12);
        let m = a.response.at(0, 0);
        assert!(m.g_asym(a.physical_weights()[[0, 0]]).abs() < 1e-12);
    }

    #[test]
    fn element_variation_statistics() {
        let base = ResponseModel::generic_linear(2.0, 0.2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);

        let same = with_element_variation(&base, 0.0, (4, 4), &mut rng).unwrap();
        assert!(matches!(same, ResponseGrid::Shared(_)));

        let grid = with_element_variation(&base, 0.1, (10, 10), &mut rng).unwrap();
        let ResponseGrid::PerElement { models, .. } = &grid else {
            panic!("expected per-element grid");
        };
        // tau factor = tau / base tau; its sample std should be near 0.1.
        let factors: Vec<f64> = models
            .iter()
            .map(|m| {
                let (lo, hi) = m.dynamic_range();
                assert!(lo < 0.0 && hi > 0.0);
                hi / 2.0
            })
            .collect();
        let mean = factors.iter().sum::<f64>() / factors.len() as f64;
        let var = factors.iter().map(|f| (f - mean).powi(2)).sum::<f64>()
            / (factors.len() - 1) as f64;
        let std = var.sqrt();
        assert!(
            (std - 0.1).abs() <= 0.03,
            "tau-factor std {std} not within 30% of 0.1"
        );
        // Symmetric points scale with tau when c_lin != 0.
        let sps: Vec<f64> = models
            .iter()
            .map(|m| m.symmetric_point().unwrap())
            .collect();
        assert!(sps.iter().any(|s| (s - sps[0]).abs() > 1e-6));
    }

    #[test]
    fn noop_and_isolation() {
        let lin = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut a = AnalogArray::new(
            array![[0.1, 0.2], [0.3, 0.4]],
            ResponseGrid::Shared(lin),
            cfg(),
            UpdateBackend::ClosedForm,
            0.0,
        )
        .unwrap();
        let before = a.physical_weights().clone();
        a.apply_update(&Array2::zeros((2, 2)), 0.1, &mut rng).unwrap();
        assert_eq!(a.physical_weights(), &before);

        // Updating one element leaves the rest bit-identical.
        a.apply_element_delta(0, 1, 0.05, &mut rng);
        for (idx, (x, y)) in before.iter().zip(a.physical_weights().iter()).enumerate() {
            if idx == 1 {
                assert_ne!(x.to_bits(), y.to_bits());
            } else {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn weights_never_leave_range_under_update_storm() {
        let m = ResponseModel::power(0.5, 1.5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let mut a = AnalogArray::new(
            Array2::zeros((3, 3)),
            ResponseGrid::Shared(m),
            PulseConfig::new(1e-2, 32, 0.5).unwrap(),
            UpdateBackend::PulseTrain,
            0.0,
        )
        .unwrap();
        for k in 0..200 {
            let scale = if k % 3 == 0 { 5.0 } else { -3.0 };
            let desired = Array2::from_elem((3, 3), scale);
            a.apply_update(&desired, 0.7, &mut rng).unwrap();
            for v in a.physical_weights().iter() {
                assert!((-0.5..=0.5).contains(v));
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let a = AnalogArray::new(
            array![[0.1, -0.2], [0.3, 0.05]],
            ResponseGrid::Shared(ideal_response()),
            cfg(),
            UpdateBackend::ClosedForm,
            0.0,
        )
        .unwrap();
        a.write_weights_bin(&path).unwrap();
        let back = read_weights_bin(&path, 2, 2).unwrap();
        assert_eq!(&back, a.physical_weights());
        assert!(matches!(
            read_weights_bin(&path, 3, 2),
            Err(Error::TruncatedFile { .. })
        ));
    }
}
