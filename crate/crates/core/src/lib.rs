//! Time-bin entangled photon pairs from a quantum-dot cavity driven by
//! stimulated Raman adiabatic passage.
//!
//! The crate is organised bottom-up: [`model`] builds the operators,
//! [`propagator`] integrates the master equation, [`regression`] evaluates
//! multi-time correlators and [`analysis`] turns them into coincidence
//! probabilities and visibilities. [`config`] reads run files and
//! [`validate`] cross-checks the independent propagation paths.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod model;
pub mod propagator;
pub mod quadrature;
pub mod regression;
pub mod validate;

pub use error::{Error, Result};
