#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod align;
pub mod compose;
pub mod error;
pub mod geometry;
pub mod io;
pub mod navmesh;
pub mod pipeline;
pub mod planner;
pub mod resolution;
pub mod stats;

pub use error::{Error, Result};
