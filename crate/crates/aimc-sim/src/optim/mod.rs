//! Training algorithms over analog weight arrays.
//!
//! Every algorithm is a strategy behind the [`Algorithm`] trait and is
//! registered by name in [`registry`]; the harness selects one at runtime
//! from config or CLI. All variants share the same step contract: query the
//! objective for a stochastic gradient at the weights the algorithm
//! evaluates, then write the update into the arrays through the device
//! backend.

pub mod analog;
pub mod digital;
pub mod residual;
pub mod residual_v2;

pub use analog::AnalogSgd;
pub use digital::DigitalSgd;
pub use residual::ResidualLearning;
pub use residual_v2::{ResidualV2, V2Variant};

use ndarray::Array2;

use crate::device::AnalogArray;
use crate::error::{Error, Result};
use crate::problems::Objective;
use crate::rng::RunStreams;

/// Hyper-parameters shared across the algorithm family. Each strategy reads
/// the fields it understands.
#[derive(Debug, Clone)]
pub struct HyperParams {
    /// Gradient-side learning rate.
    pub alpha: f64,
    /// Transfer learning rate and digital-buffer coefficient.
    pub beta: f64,
    /// Mixing coefficient: the working model is `W + gamma * P`.
    pub gamma: f64,
    /// Columns of the residual array transferred per step (round-robin).
    pub transfer_columns: usize,
    /// Buffer threshold for single-pulse transfers; defaults to the main
    /// array's pulse granularity.
    pub transfer_threshold: Option<f64>,
    /// Whether the mixing read of `P` carries read noise.
    pub mixing_read_noisy: bool,
    /// Re-reference the residual array at its symmetric points before
    /// training, so its logical zero responds symmetrically.
    pub zero_shift_p: bool,
    /// Optional step-size decay: `alpha_k = alpha / (1 + k / t0)`.
    pub lr_decay_t0: Option<f64>,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha: 0.01,
            beta: 0.01,
            gamma: 0.0,
            transfer_columns: 1,
            transfer_threshold: None,
            mixing_read_noisy: true,
            zero_shift_p: false,
            lr_decay_t0: None,
        }
    }
}

pub(crate) fn effective_alpha(alpha: f64, k: u64, decay_t0: Option<f64>) -> f64 {
    match decay_t0 {
        Some(t0) => alpha / (1.0 + k as f64 / t0),
        None => alpha,
    }
}

/// One interchangeable training strategy.
pub trait Algorithm {
    /// Canonical registered name.
    fn name(&self) -> &'static str;

    /// One training iteration; returns the minibatch loss the step saw.
    fn step(&mut self, obj: &mut dyn Objective, streams: &mut RunStreams) -> Result<f64>;

    /// The weights the algorithm is effectively training (the mixed weight
    /// for residual variants), read without noise.
    fn logical_weights(&self) -> Vec<Array2<f64>>;

    /// Logical main-array weights.
    fn main_weights(&self) -> Vec<Array2<f64>>;

    /// Logical residual-array weights, for variants that keep one.
    fn residual_weights(&self) -> Option<Vec<Array2<f64>>> {
        None
    }

    /// Worst-case squared asymmetry-to-symmetry ratio over the main arrays'
    /// current states; `None` for digital strategies.
    fn amp_w(&self) -> Option<f64> {
        None
    }

    /// Same for the residual arrays.
    fn amp_p(&self) -> Option<f64> {
        None
    }

    /// Completed iterations.
    fn iterations(&self) -> u64;

    /// `(pulse mass fired into W, total buffer decrement)` for variants with
    /// a threshold transfer; the two must agree exactly.
    fn transfer_ledger(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Everything a registered builder needs to assemble a strategy.
pub struct BuildArgs<'a> {
    /// Initial weight tensors.
    pub init: &'a [Array2<f64>],
    pub hp: &'a HyperParams,
    /// Builds an analog array holding the given initial weights; captures
    /// the device configuration.
    pub make_array: &'a mut dyn FnMut(&Array2<f64>) -> Result<AnalogArray>,
}

pub struct Registration {
    pub name: &'static str,
    pub aliases: &'static [&'static str],
    pub summary: &'static str,
    pub build: fn(&mut BuildArgs) -> Result<Box<dyn Algorithm>>,
}

pub fn registry() -> &'static [Registration] {
    &[
        Registration {
            name: "digital_sgd",
            aliases: &["dsgd"],
            summary: "plain SGD on digital weights (reference)",
            build: |args| Ok(Box::new(DigitalSgd::build(args)?)),
        },
        Registration {
            name: "analog_sgd",
            aliases: &["asgd"],
            summary: "SGD written through the asymmetric analog update",
            build: |args| Ok(Box::new(AnalogSgd::build(args)?)),
        },
        Registration {
            name: "residual_learning",
            aliases: &["rl", "tiki_taka", "tt"],
            summary: "residual array tracking the weight residual, periodically transferred",
            build: |args| Ok(Box::new(ResidualLearning::build(args)?)),
        },
        Registration {
            name: "residual_learning_v2",
            aliases: &["rlv2"],
            summary: "residual learning with a decayed digital buffer and threshold transfer",
            build: |args| Ok(Box::new(ResidualV2::build(args, V2Variant::Rlv2)?)),
        },
        Registration {
            name: "tiki_taka_v2",
            aliases: &["ttv2"],
            summary: "undamped digital buffer, gradients on the main array only",
            build: |args| Ok(Box::new(ResidualV2::build(args, V2Variant::Ttv2)?)),
        },
    ]
}

pub fn canonical_names() -> Vec<&'static str> {
    registry().iter().map(|r| r.name).collect()
}

/// Resolves a name or alias and builds the strategy.
pub fn build(name: &str, args: &mut BuildArgs) -> Result<Box<dyn Algorithm>> {
    let wanted = name.to_ascii_lowercase();
    for reg in registry() {
        if reg.name == wanted || reg.aliases.contains(&wanted.as_str()) {
            return (reg.build)(args);
        }
    }
    Err(Error::UnknownAlgorithm {
        name: name.to_string(),
        known: canonical_names().join(", "),
    })
}
