//! Element-level stochastic pulse updates and their closed-form approximation.
//!
//! A desired weight increment `delta_w` is realized by firing
//! `BL = ceil(|delta_w| / delta_w_min)` pulses (capped at `max_bl`), each of
//! which moves the weight by `delta_w_min * (q_sign(w) + sigma_c * xi)` with
//! `xi` a standard-normal cycle-variation draw. For small granularity the
//! train is well approximated by the closed-form update
//! `w + delta_w * q_plus(w)` (or `q_minus` for negative increments).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::response::ResponseModel;

/// Element-level pulse parameters.
#[derive(Debug, Clone, Copy)]
pub struct PulseConfig {
    /// Response granularity: weight change per ideal pulse.
    pub delta_w_min: f64,
    /// Cap on pulses fired per update step.
    pub max_bl: u32,
    /// Cycle-variation noise magnitude, as a fraction of the response factor.
    pub sigma_c: f64,
}

impl PulseConfig {
    pub fn new(delta_w_min: f64, max_bl: u32, sigma_c: f64) -> Result<Self> {
        if !(delta_w_min > 0.0) {
            return Err(Error::InvalidPulseConfig(format!(
                "delta_w_min must be > 0, got {delta_w_min}"
            )));
        }
        if max_bl < 1 {
            return Err(Error::InvalidPulseConfig("max_bl must be >= 1".into()));
        }
        if !(sigma_c >= 0.0) {
            return Err(Error::InvalidPulseConfig(format!(
                "sigma_c must be >= 0, got {sigma_c}"
            )));
        }
        Ok(PulseConfig {
            delta_w_min,
            max_bl,
            sigma_c,
        })
    }
}

/// Pulse polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseSign {
    Up,
    Down,
}

impl PulseSign {
    pub fn from_delta(delta_w: f64) -> PulseSign {
        if delta_w >= 0.0 {
            PulseSign::Up
        } else {
            PulseSign::Down
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            PulseSign::Up => 1.0,
            PulseSign::Down => -1.0,
        }
    }
}

/// Number of pulses needed for `delta_w`: `min(ceil(|delta_w|/delta_w_min),
/// max_bl)`, and 0 iff `delta_w == 0`.
///
/// Ratios within 1e-9 relative of an integer count as that integer, so float
/// noise in callers (`0.1 / 0.001`) does not add a spurious pulse.
pub fn bit_length(cfg: &PulseConfig, delta_w: f64) -> u32 {
    if delta_w == 0.0 {
        return 0;
    }
    let ratio = delta_w.abs() / cfg.delta_w_min;
    let rounded = ratio.round();
    let bl = if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded.max(1.0)
    } else {
        ratio.ceil()
    };
    if bl >= cfg.max_bl as f64 {
        cfg.max_bl
    } else {
        bl as u32
    }
}

/// Applies a single pulse: `w ± delta_w_min * (q_sign(w) + sigma_c * xi)`,
/// clamped to the dynamic range.
pub fn pulse_update_once(
    model: &ResponseModel,
    cfg: &PulseConfig,
    w: f64,
    sign: PulseSign,
    rng: &mut impl Rng,
) -> f64 {
    let q = match sign {
        PulseSign::Up => model.q_plus(w),
        PulseSign::Down => model.q_minus(w),
    };
    let noise = if cfg.sigma_c > 0.0 {
        let xi: f64 = rng.sample(StandardNormal);
        cfg.sigma_c * xi
    } else {
        0.0
    };
    model.clamp(w + sign.as_f64() * cfg.delta_w_min * (q + noise))
}

/// Fires `bit_length(cfg, delta_w)` pulses with polarity `sign(delta_w)` and
/// returns the final clamped weight.
pub fn pulse_train_update(
    model: &ResponseModel,
    cfg: &PulseConfig,
    w: f64,
    delta_w: f64,
    rng: &mut impl Rng,
) -> f64 {
    let sign = PulseSign::from_delta(delta_w);
    let mut w = model.clamp(w);
    for _ in 0..bit_length(cfg, delta_w) {
        w = pulse_update_once(model, cfg, w, sign, rng);
    }
    w
}

/// Closed-form approximation of a pulse train:
/// `w + delta_w * q_plus(w)` for `delta_w >= 0`, else
/// `w + delta_w * q_minus(w)`, clamped to the dynamic range.
pub fn closed_form_update(model: &ResponseModel, w: f64, delta_w: f64) -> f64 {
    let w = model.clamp(w);
    let q = if delta_w >= 0.0 {
        model.q_plus(w)
    } else {
        model.q_minus(w)
    };
    model.clamp(w + delta_w * q)
}

/// Same update written through the symmetric/asymmetric decomposition:
/// `w + delta_w * F(w) - |delta_w| * G(w)`. Agrees with
/// [`closed_form_update`] to machine precision.
pub fn closed_form_update_compact(model: &ResponseModel, w: f64, delta_w: f64) -> f64 {
    let w = model.clamp(w);
    let (f, g) = model.decompose(w);
    model.clamp(w + delta_w * f - delta_w.abs() * g)
}

/// Relative pulse-train approximation error over a grid of increments.
///
/// For each `delta_w` the granularity is scaled as
/// `delta_w_min = coeff * delta_w²` (so granularity vanishes faster than the
/// increment), cycle variation is off, and the pulse count is uncapped. The
/// returned pairs are `(delta_w, |train - closed_form| / |train - w|)`;
/// grid points where the train does not move the weight are skipped.
pub fn approximation_error_sweep(
    model: &ResponseModel,
    w: f64,
    delta_w_grid: &[f64],
    coeff: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(delta_w_grid.len());
    // sigma_c = 0 makes the train deterministic; the rng is never consulted.
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
    for &dw in delta_w_grid {
        if dw == 0.0 {
            continue;
        }
        let cfg = PulseConfig {
            delta_w_min: coeff * dw * dw,
            max_bl: u32::MAX,
            sigma_c: 0.0,
        };
        let train = pulse_train_update(model, &cfg, w, dw, &mut rng);
        if train == w {
            continue;
        }
        let closed = closed_form_update(model, w, dw);
        out.push((dw, (train - closed).abs() / (train - w).abs()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn cfg(delta_w_min: f64, max_bl: u32, sigma_c: f64) -> PulseConfig {
        PulseConfig::new(delta_w_min, max_bl, sigma_c).unwrap()
    }

    #[test]
    fn bit_length_examples() {
        let c = cfg(1e-3, 32, 0.0);
        assert_eq!(bit_length(&c, 0.0025), 3);
        assert_eq!(bit_length(&c, 0.0), 0);
        assert_eq!(bit_length(&c, 1.0), 32);
        // Exactly divisible increments must not gain a pulse from float noise.
        assert_eq!(bit_length(&c, 0.1), 100.min(32));
        assert_eq!(bit_length(&cfg(1e-3, 1000, 0.0), 0.1), 100);
        assert_eq!(bit_length(&cfg(0.1, 1000, 0.0), 0.1), 1);
    }

    #[test]
    fn single_pulse_examples() {
        let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let c = cfg(0.01, 32, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let w1 = pulse_update_once(&m, &c, 0.0, PulseSign::Up, &mut rng);
        assert!((w1 - 0.01).abs() < 1e-15);
        let w2 = pulse_update_once(&m, &c, 0.5, PulseSign::Down, &mut rng);
        assert!((w2 - 0.485).abs() < 1e-15);
    }

    #[test]
    fn cycle_variation_has_zero_mean() {
        // Monte-Carlo oracle: mean normalized step equals q_plus(0) = 1
        // within 3 standard errors of sigma_c / sqrt(n).
        let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let c = cfg(0.01, 32, 0.1);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let w1 = pulse_update_once(&m, &c, 0.0, PulseSign::Up, &mut rng);
            acc += (w1 - 0.0) / c.delta_w_min;
        }
        let mean = acc / n as f64;
        let tol = 3.0 * c.sigma_c / (n as f64).sqrt();
        assert!((mean - 1.0).abs() <= tol, "mean {mean}, tol {tol}");
    }

    #[test]
    fn train_of_unit_steps_on_near_ideal_response() {
        let m = ResponseModel::generic_linear(1e9, 0.0).unwrap();
        let c = cfg(0.01, 1000, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let w = pulse_train_update(&m, &c, 0.0, 0.1, &mut rng);
        assert!((w - 0.1).abs() < 1e-9);
    }

    #[test]
    fn single_pulse_train_matches_response() {
        let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let c = cfg(0.1, 32, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let w = pulse_train_update(&m, &c, 0.0, 0.1, &mut rng);
        assert!((w - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hundred_step_train_matches_product_recursion() {
        // Exact oracle: each up-pulse of the plain linear response maps
        // (1 - w') = (1 - w)(1 - delta_w_min), so from w=0 the 100-step
        // train lands at 1 - 0.999^100.
        let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let c = cfg(0.001, 1000, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let train = pulse_train_update(&m, &c, 0.0, 0.1, &mut rng);
        let oracle = 1.0 - 0.999f64.powi(100);
        assert!((train - oracle).abs() < 1e-12);
        let closed = closed_form_update(&m, 0.0, 0.1);
        assert!((train - closed).abs() <= 5e-3);
        assert!((train - 0.0).abs() > 0.09);
    }

    #[test]
    fn closed_form_examples() {
        let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        assert!((closed_form_update(&m, 0.5, 0.1) - 0.55).abs() < 1e-15);
        assert!((closed_form_update(&m, 0.5, -0.1) - 0.35).abs() < 1e-15);
        assert_eq!(closed_form_update(&m, 0.3, 0.0), 0.3);
    }

    #[test]
    fn compact_form_identity() {
        let families = [
            ResponseModel::generic_linear(1.0, 0.0).unwrap(),
            ResponseModel::generic_linear(3.5, 0.3).unwrap(),
            ResponseModel::power(1.0, 0.5).unwrap(),
            ResponseModel::exponential(1.0, 4.0).unwrap(),
        ];
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for m in &families {
            let (lo, hi) = m.dynamic_range();
            for _ in 0..10_000 {
                let w = lo + (hi - lo) * rng.random::<f64>();
                let dw = (rng.random::<f64>() - 0.5) * 0.4;
                let a = closed_form_update(m, w, dw);
                let b = closed_form_update_compact(m, w, dw);
                assert!(
                    (a - b).abs() <= 1e-14 * (1.0 + a.abs()),
                    "direct {a} vs compact {b} at w={w}, dw={dw}"
                );
            }
        }
    }

    #[test]
    fn error_sweep_decreases_and_vanishes() {
        let grid = [0.2, 0.1, 0.05, 0.025];
        let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
        let errs = approximation_error_sweep(&m, 0.3, &grid, 1.0);
        assert_eq!(errs.len(), 4);
        for pair in errs.windows(2) {
            assert!(
                pair[1].1 < pair[0].1,
                "errors not decreasing: {:?}",
                errs
            );
        }
    }

    #[test]
    fn error_sweep_near_ideal_response_is_exact() {
        let m = ResponseModel::generic_linear(1e12, 0.0).unwrap();
        let errs = approximation_error_sweep(&m, 0.0, &[0.2, 0.1, 0.05], 1.0);
        for (_, e) in errs {
            assert!(e <= 1e-9, "relative error {e}");
        }
    }

    #[test]
    fn error_halving_step_for_all_families() {
        for m in [
            ResponseModel::generic_linear(1.0, 0.2).unwrap(),
            ResponseModel::power(1.0, 2.0).unwrap(),
            ResponseModel::exponential(1.0, 2.0).unwrap(),
        ] {
            let errs = approximation_error_sweep(&m, 0.25, &[0.1, 0.05], 1.0);
            assert_eq!(errs.len(), 2);
            assert!(errs[1].1 < errs[0].1, "{errs:?}");
        }
    }

    #[test]
    fn identical_seeds_reproduce_trajectories() {
        let m = ResponseModel::power(1.0, 0.5).unwrap();
        let c = cfg(1e-3, 32, 0.3);
        let run = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut w = 0.1;
            for k in 0..200 {
                let dw = if k % 2 == 0 { 0.01 } else { -0.007 };
                w = pulse_train_update(&m, &c, w, dw, &mut rng);
            }
            w
        };
        assert_eq!(run(5).to_bits(), run(5).to_bits());
        assert_ne!(run(5).to_bits(), run(6).to_bits());
    }

    proptest! {
        #[test]
        fn train_moves_with_the_sign_of_the_increment(
            x in -0.9f64..0.9,
            dw in prop::sample::select(vec![0.05f64, 0.01, -0.05, -0.01]),
        ) {
            let m = ResponseModel::generic_linear(1.0, 0.0).unwrap();
            let c = cfg(1e-3, 64, 0.0);
            let mut rng = ChaCha12Rng::seed_from_u64(0);
            let w1 = pulse_train_update(&m, &c, x, dw, &mut rng);
            // Interior weights have strictly positive response factors.
            prop_assert!((w1 - x).signum() == dw.signum() || w1 == x && (x + dw).abs() >= 1.0);
            prop_assert!((w1 - x) * dw >= 0.0);
        }

        #[test]
        fn outputs_stay_in_dynamic_range(
            x in -1.0f64..1.0,
            dw in -5.0f64..5.0,
            sigma in 0.0f64..0.5,
        ) {
            let m = ResponseModel::power(1.0, 1.5).unwrap();
            let c = cfg(0.05, 64, sigma);
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            let w1 = pulse_train_update(&m, &c, x, dw, &mut rng);
            prop_assert!((-1.0..=1.0).contains(&w1));
            let w2 = closed_form_update(&m, x, dw);
            prop_assert!((-1.0..=1.0).contains(&w2));
        }
    }
}
