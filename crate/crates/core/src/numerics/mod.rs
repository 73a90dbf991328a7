//! Dense tensors, a reverse-mode gradient engine and the normalization /
//! attention primitives used by the generative kernels.

mod gradcheck;
mod layers;
mod optim;
mod params;
mod rng;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_many, GradCheckReport, DEFAULT_STEP};
pub use layers::{
    attention, eval_plain, layer_norm, rmsnorm, rope_apply, AdaLn, GatedCrossAttention, Init, Linear,
    NORM_EPS, ROPE_BASE,
};
pub use optim::Adam;
pub use params::{Bound, ParamId, ParamStore};
pub use rng::Rng;
pub use tape::{gelu, Tape, Var};
pub use tensor::Tensor;
