//! Sensitivity and transient analysis of a delayed ACTH-cortisol feedback
//! oscillator through three linearizations: a pointwise delay pencil along
//! the orbit, the monodromy (period) map of the limit cycle, and a
//! data-driven Koopman operator with residual-certified pseudospectra.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod numerics;

pub mod dde;
pub mod jacobian;
pub mod floquet;
pub mod koopman;

/// Version of this library, recorded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
