//! Nested polar codes over finite Abelian groups for lossy compression and
//! channel coding. The negated float comparisons in this crate also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_codec;
mod codec;
pub mod construction;
pub mod dmc;
pub mod error;
pub mod group;
pub mod harness;
pub mod lossy_codec;
pub mod polar;
pub mod rng;

pub use error::{Error, Result};
