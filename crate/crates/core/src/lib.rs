// Numeric kernels index several parallel buffers per loop, `!(x > 0.0)` is
// used on purpose so NaN fails validation, and `Var` arithmetic returns
// `Result` so it cannot implement the operator traits.
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::should_implement_trait
)]

pub mod dsp;
pub mod error;
pub mod geom;
pub mod kernels;
pub mod numerics;
pub mod render;
pub mod segment;

pub use error::{Error, Result};
