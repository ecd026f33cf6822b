// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod config;
pub mod error;
pub mod experiments;
mod fft;
pub mod fibering;
pub mod functionals;
pub mod grid;
pub mod optim;
pub mod output;
pub mod riesz;

pub use catalog::{NonlinSpec, NonlinVariant, PotentialSpec, PotentialVariant};
pub use config::Config;
pub use error::{Error, Result};
pub use grid::{Field, GridSpec};
pub use riesz::RieszPlan;
