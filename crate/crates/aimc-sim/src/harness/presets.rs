//! Named experiment presets covering the behaviors the simulator is built
//! to reproduce. Every preset is a full config; anything can still be
//! overridden with `--set`.

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SweepPoint};

pub const PRESET_NAMES: &[&str] = &[
    "fig2_counterexample",
    "implicit_penalty_scalar",
    "asgd_plateau_scaling",
    "rl_exact_convergence",
    "rlv2_noise_filter",
    "granularity_plateau",
    "cycle_variation_ablation",
    "mnist_fcn_reduced",
];

pub fn preset_names() -> &'static [&'static str] {
    PRESET_NAMES
}

/// Builds the named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig2_counterexample" => fig2_counterexample(),
        "implicit_penalty_scalar" => implicit_penalty_scalar(),
        "asgd_plateau_scaling" => asgd_plateau_scaling(),
        "rl_exact_convergence" => rl_exact_convergence(),
        "rlv2_noise_filter" => rlv2_noise_filter(),
        "granularity_plateau" => granularity_plateau(),
        "cycle_variation_ablation" => cycle_variation_ablation(),
        "mnist_fcn_reduced" => mnist_fcn_reduced(),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn least_squares_base() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.kind = "least_squares".into();
    cfg.problem.d = 50;
    cfg.problem.d_out = 100;
    cfg.problem.sigma_a = 1.0;
    cfg.problem.sigma_w_star = 0.5;
    cfg.problem.noise.mode = "subsample".into();
    cfg.problem.noise.batch = 10;
    cfg
}

/// Two-array training beats plain analog descent on a mildly skewed linear
/// device, then loses to it as the skew grows and the residual array's
/// natural zero stops being a symmetric point.
fn fig2_counterexample() -> ExperimentConfig {
    let mut cfg = least_squares_base();
    cfg.device.family = "generic_linear".into();
    cfg.device.tau = 3.5;
    cfg.device.c_lin = 0.0;
    cfg.device.delta_w_min = 1e-4;
    cfg.device.max_bl = 8;
    cfg.device.backend = "pulse_train".into();
    cfg.optimizer.algorithm = "residual_learning".into();
    cfg.optimizer.alpha = 4e-4;
    cfg.optimizer.beta = 0.05;
    cfg.optimizer.gamma = 0.0;
    cfg.run.iterations = 200_000;
    cfg.run.compare = vec!["analog_sgd".into()];
    cfg.sweep = [0.0, 0.1, 0.2, 0.3]
        .iter()
        .map(|c| SweepPoint {
            label: format!("c_lin={c}"),
            set: vec![format!("device.c_lin={c}")],
        })
        .collect();
    cfg
}

/// Scalar quadratic under additive gradient noise: the long-run iterate
/// settles at the minimizer of the noise-penalized objective instead of the
/// true optimum.
fn implicit_penalty_scalar() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.kind = "quadratic".into();
    cfg.problem.curvature = vec![1.0];
    cfg.problem.center = vec![1.0];
    cfg.problem.sigma = 0.5;
    cfg.device.family = "generic_linear".into();
    cfg.device.tau = 2.0;
    cfg.device.backend = "closed_form".into();
    cfg.optimizer.algorithm = "analog_sgd".into();
    cfg.optimizer.alpha = 1e-3;
    cfg.run.iterations = 500_000;
    cfg.run.log_interval = 100;
    cfg
}

/// Plain analog descent's gradient-norm plateau grows with the gradient
/// noise scale; digital descent with a decaying step keeps going down.
fn asgd_plateau_scaling() -> ExperimentConfig {
    let mut cfg = least_squares_base();
    cfg.problem.noise.mode = "additive".into();
    cfg.problem.noise.sigma = 0.1;
    cfg.device.family = "generic_linear".into();
    cfg.device.tau = 3.5;
    cfg.device.backend = "closed_form".into();
    cfg.optimizer.algorithm = "analog_sgd".into();
    cfg.optimizer.alpha = 3e-4;
    cfg.run.iterations = 20_000;
    cfg.sweep = [0.1, 0.2, 0.4]
        .iter()
        .map(|s| SweepPoint {
            label: format!("sigma={s}"),
            set: vec![format!("problem.noise.sigma={s}")],
        })
        .collect();
    cfg
}

/// Residual learning on a device whose symmetric point sits at zero:
/// the combined convergence metric keeps falling as the horizon grows.
fn rl_exact_convergence() -> ExperimentConfig {
    let mut cfg = least_squares_base();
    cfg.device.family = "power".into();
    cfg.device.tau = 6.0;
    cfg.device.gamma_res = 1.0;
    cfg.device.backend = "closed_form".into();
    cfg.optimizer.algorithm = "residual_learning".into();
    cfg.optimizer.alpha = 2e-4;
    cfg.optimizer.beta = 2e-4;
    cfg.optimizer.gamma = 0.4;
    cfg.run.iterations = 16_000;
    cfg.run.log_interval = 1;
    cfg
}

/// Read noise on the residual reads during transfer: the digital buffer
/// filters it, plain transfers do not.
fn rlv2_noise_filter() -> ExperimentConfig {
    let mut cfg = least_squares_base();
    cfg.device.family = "power".into();
    cfg.device.tau = 6.0;
    cfg.device.gamma_res = 1.0;
    cfg.device.delta_w_min = 1e-3;
    cfg.device.max_bl = 32;
    cfg.device.backend = "pulse_train".into();
    cfg.device.sigma_read = 0.06;
    cfg.optimizer.algorithm = "residual_learning_v2".into();
    cfg.optimizer.alpha = 3e-4;
    cfg.optimizer.beta = 0.05;
    cfg.optimizer.gamma = 0.4;
    cfg.run.iterations = 30_000;
    cfg.run.compare = vec!["residual_learning".into()];
    cfg
}

/// With exact gradients the only error floor left is the pulse
/// granularity; it scales linearly with the granularity itself.
fn granularity_plateau() -> ExperimentConfig {
    let mut cfg = least_squares_base();
    cfg.problem.noise.mode = "none".into();
    cfg.device.family = "generic_linear".into();
    cfg.device.tau = 3.5;
    cfg.device.delta_w_min = 1e-3;
    cfg.device.max_bl = 32;
    cfg.device.backend = "pulse_train".into();
    cfg.optimizer.algorithm = "analog_sgd".into();
    cfg.optimizer.alpha = 5e-4;
    cfg.run.iterations = 20_000;
    cfg.sweep = ["1e-3", "1e-4", "1e-5"]
        .iter()
        .map(|g| SweepPoint {
            label: format!("delta_w_min={g}"),
            set: vec![format!("device.delta_w_min={g}")],
        })
        .collect();
    cfg
}

/// Per-pulse cycle noise is a higher-order effect: the final error barely
/// moves while the noise magnitude spans an order of magnitude.
fn cycle_variation_ablation() -> ExperimentConfig {
    let mut cfg = least_squares_base();
    cfg.device.family = "power".into();
    cfg.device.tau = 6.0;
    cfg.device.gamma_res = 1.0;
    cfg.device.delta_w_min = 1e-3;
    cfg.device.max_bl = 32;
    cfg.device.backend = "pulse_train".into();
    cfg.optimizer.algorithm = "residual_learning".into();
    cfg.optimizer.alpha = 3e-4;
    cfg.optimizer.beta = 0.05;
    cfg.optimizer.gamma = 0.4;
    cfg.run.iterations = 20_000;
    cfg.sweep = [0.1, 0.6, 1.2]
        .iter()
        .map(|s| SweepPoint {
            label: format!("sigma_c={s}"),
            set: vec![format!("device.sigma_c={s}")],
        })
        .collect();
    cfg
}

/// Reduced-scale image classification: 10k training images, two epochs,
/// saturating power response.
fn mnist_fcn_reduced() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.problem.kind = "mnist_fcn".into();
    cfg.problem.train_limit = 10_000;
    cfg.problem.test_limit = 2_000;
    cfg.problem.batch_size = 10;
    cfg.problem.hidden = vec![256, 128];
    cfg.device.family = "power".into();
    cfg.device.tau = 0.6;
    cfg.device.gamma_res = 0.5;
    cfg.device.delta_w_min = 1e-3;
    cfg.device.max_bl = 32;
    cfg.device.backend = "pulse_train".into();
    cfg.device.sigma_read = 0.06;
    cfg.optimizer.algorithm = "residual_learning".into();
    cfg.optimizer.alpha = 0.05;
    cfg.optimizer.beta = 0.01;
    cfg.optimizer.gamma = 0.4;
    cfg.run.epochs = 2;
    cfg.run.iterations = 0;
    cfg
}
