#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod formulation;
pub mod geometry;
pub mod imaging;
pub mod lab;
pub mod optimizer;
pub mod orchestrator;
pub mod scalar;

pub use scalar::Real;
