// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod action;
pub mod certify;
pub mod conditions;
pub mod config;
pub mod convex;
pub mod error;
pub mod hamiltonian;
pub mod legendre;
pub mod minimize;
pub mod path;
pub mod problem;
pub mod regularize;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
