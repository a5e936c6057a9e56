// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod gamma;
pub mod inference;
pub mod io;
pub mod model;
pub mod optim;
pub mod poisson;
pub mod simulation;
pub mod spline;

pub use error::{Error, Result};
