//! Simulation toolkit for adiabatic Rydberg-dressing two-qubit gates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod forces;
pub mod gate;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod pulses;
pub mod spectrum;

pub use error::{Error, Result};
