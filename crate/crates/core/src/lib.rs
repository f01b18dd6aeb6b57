// NaN-rejecting `!(x > 0.0)` checks and index loops over small group tables are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod codes;
pub mod decoder;
pub mod design;
pub mod encoder;
pub mod error;
pub mod group;
pub mod lattice;
pub mod limits;
pub mod message;
pub mod rng;
pub mod sim;
pub mod source;

pub use error::{Error, Result};
