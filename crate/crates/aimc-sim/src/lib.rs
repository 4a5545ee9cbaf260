//! Desk-scale simulator for gradient-based training on analog in-memory
//! computing hardware with non-ideal resistive elements.
//!
//! Weight updates on such hardware are realized by trains of electrical
//! pulses whose effect is scaled by state-dependent, asymmetric response
//! functions. This crate models that element-level physics ([`response`],
//! [`pulse`], [`device`]), implements the training algorithms that run on
//! top of it ([`optim`]), supplies objectives with exact stochastic
//! gradients ([`problems`]), computes the diagnostic quantities that
//! characterize convergence ([`analysis`]), and wires everything into
//! reproducible, seeded experiments ([`harness`]).
//!
//! Training algorithms are interchangeable strategies behind the
//! [`optim::Algorithm`] trait, registered by name and selected at runtime
//! via config or the `aimc-sim` CLI.

pub mod analysis;
pub mod device;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod problems;
pub mod pulse;
pub mod response;
pub mod rng;

pub use error::{Error, Result};
