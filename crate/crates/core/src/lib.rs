// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cli;
pub mod config;
pub mod cost_model;
pub mod error;
pub mod pde_engine;
pub mod postproc;

pub use error::{Error, Result};
