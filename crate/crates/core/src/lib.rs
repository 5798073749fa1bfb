//! Time-of-flow (TF) timing distributions for projective measurements on
//! closed quantum systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`quantum`]: validated operators and exact unitary evolution.
//! - [`tf`]: TF distributions on a time grid, their moments, and bound audits.
//! - [`protocol`]: shot-based reconstruction from ensemble measurements.
//! - [`three_level`]: the detuned three-level system and its parameter sweeps.
//! - [`matterwave`]: time of arrival for a free-falling Gaussian packet.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod matterwave;
pub mod protocol;
pub mod quadrature;
pub mod quantum;
pub mod rng;
pub mod tf;
pub mod three_level;

pub use error::{Error, Result};
