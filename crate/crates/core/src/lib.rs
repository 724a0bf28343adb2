//! Concentrating solutions of `-ε²Δv + V(x)v = f(v)` by penalized gradient
//! flow and a min-max over translated ground states.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cutoff;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod grid;
pub mod limit;
pub mod linalg;
pub mod localization;
pub mod minmax;
pub mod nonlinearity;
pub(crate) mod ode;
pub mod potential;
pub mod problem;
pub mod snapshot;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
