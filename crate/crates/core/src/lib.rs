// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod expr;
pub mod fast;
pub mod limit;
pub mod matrix_forms;
pub mod model;
pub mod noise;
pub mod ou;
pub mod rng;
pub mod sdde;
pub mod trajectory;
pub mod wiener;

pub use error::{Error, Result};
