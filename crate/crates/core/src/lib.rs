// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiment;
pub mod manifold;
pub mod model;
pub mod modes;
pub mod oracle;
pub mod parallel;
pub mod power_min;
pub mod sumrate;

pub use error::{Error, Result};
