//! Heavy-tailed first-exceedance models for random walks and regenerative
//! processes: tail catalog, cycle-path models, exceedance records,
//! crude and big-jump samplers, and limit laws with goodness-of-fit checks.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dists;
pub mod error;
pub mod exceed;
pub mod limits;
pub mod math;
pub mod mc;
pub mod models;

pub use dists::{LimitLawG, ScaleFunction, TailModel};
pub use error::{Error, Result};
