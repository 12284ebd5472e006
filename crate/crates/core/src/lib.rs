//! Numerical laboratory for weak measurements: improper amplitude distributions,
//! classical and quantum meters, weak values, scattering-time observables, the
//! local angular momentum decomposition and grouped-path probabilities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod dist;
pub mod error;
pub mod lam;
pub mod linalg;
pub mod numerics;
pub mod pathways;
pub mod quantum;
pub mod readout;
pub mod scattering;

pub use dist::{HybridDistribution, MomentReport, Spike, VarianceLocus};
pub use error::{Error, Result};
pub use numerics::C64;
