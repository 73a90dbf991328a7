//! Normalization, positional encoding and attention building blocks.

use super::params::{Bound, ParamId, ParamStore};
use super::rng::Rng;
use super::tape::{rope_rotate, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Stabilizer inside RMSNorm and LayerNorm.
pub const NORM_EPS: f64 = 1e-6;

pub const ROPE_BASE: f64 = 10_000.0;

/// How a weight matrix starts out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Normal with standard deviation `gain / sqrt(fan_in)`.
    Scaled(f64),
}

/// `y = x · W + b` with `W: [in, out]`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        rng: &mut Rng,
        in_dim: usize,
        out_dim: usize,
        init: Init,
        bias: bool,
    ) -> Self {
        let w = match init {
            Init::Zeros => Tensor::zeros(&[in_dim, out_dim]),
            Init::Scaled(g) => rng.normal_tensor(&[in_dim, out_dim], g / (in_dim as f64).sqrt()),
        };
        let weight = store.add(format!("{name}.weight"), w);
        let bias = bias.then(|| store.add(format!("{name}.bias"), Tensor::zeros(&[out_dim])));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let y = x.matmul(p[self.weight])?;
        match self.bias {
            Some(b) => y.add(p[b]),
            None => Ok(y),
        }
    }
}

/// `x / sqrt(mean(x²) + δ) · gain`, over the last dimension.
pub fn rmsnorm<'t>(x: Var<'t>, gain: Var<'t>) -> Result<Var<'t>> {
    let rms = x.square().mean_last().add_scalar(NORM_EPS).sqrt();
    x.div(rms)?.mul(gain)
}

/// LayerNorm over the last dimension without a learned affine.
pub fn layer_norm(x: Var<'_>) -> Result<Var<'_>> {
    let centered = x.sub(x.mean_last())?;
    let std = centered.square().mean_last().add_scalar(NORM_EPS).sqrt();
    centered.div(std)
}

/// Rotary embedding of a plain `[T, d]` tensor; see [`Var::rope`].
pub fn rope_apply(x: &Tensor, base: f64) -> Result<Tensor> {
    let shape = x.shape();
    if shape.len() != 2 {
        return Err(Error::input(format!("rope expects [T, d], got {shape:?}")));
    }
    if !shape[1].is_multiple_of(2) {
        return Err(Error::Config(format!(
            "rope needs an even feature dimension, got {}",
            shape[1]
        )));
    }
    Tensor::new(shape, rope_rotate(x.data(), shape, base, 1.0))
}

/// Scaled dot-product attention `softmax(q kᵀ / √d) v`.
pub fn attention<'t>(q: Var<'t>, k: Var<'t>, v: Var<'t>) -> Result<Var<'t>> {
    let d = *q.shape().last().unwrap_or(&1);
    let k_dim = *k.shape().last().unwrap_or(&0);
    if d != k_dim {
        return Err(Error::input(format!(
            "query dim {d} does not match key dim {k_dim}"
        )));
    }
    let scores = q.matmul(k.transpose()?)?.scale(1.0 / (d as f64).sqrt());
    scores.softmax().matmul(v)
}

/// Adaptive LayerNorm: `γ(c) ⊙ LayerNorm(h) + β(c)`, with `γ` and `β`
/// linear in the condition. The `γ` projection starts at zero.
#[derive(Debug, Clone, Copy)]
pub struct AdaLn {
    pub gamma: Linear,
    pub beta: Linear,
}

impl AdaLn {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, cond_dim: usize, dim: usize) -> Self {
        Self {
            gamma: Linear::new(
                store,
                &format!("{name}.gamma"),
                rng,
                cond_dim,
                dim,
                Init::Zeros,
                true,
            ),
            beta: Linear::new(
                store,
                &format!("{name}.beta"),
                rng,
                cond_dim,
                dim,
                Init::Scaled(1.0),
                true,
            ),
        }
    }

    /// Both projections zero: the block outputs zero until trained.
    pub fn zeros(store: &mut ParamStore, name: &str, cond_dim: usize, dim: usize) -> Self {
        let mut rng = Rng::seeded(0);
        Self {
            gamma: Linear::new(
                store,
                &format!("{name}.gamma"),
                &mut rng,
                cond_dim,
                dim,
                Init::Zeros,
                true,
            ),
            beta: Linear::new(
                store,
                &format!("{name}.beta"),
                &mut rng,
                cond_dim,
                dim,
                Init::Zeros,
                true,
            ),
        }
    }

    /// `h: [T, d]`, `cond: [1, c]` (broadcast over T) or `[T, c]`.
    pub fn forward<'t>(&self, p: &Bound<'t>, h: Var<'t>, cond: Var<'t>) -> Result<Var<'t>> {
        let gamma = self.gamma.forward(p, cond)?;
        let beta = self.beta.forward(p, cond)?;
        layer_norm(h)?.mul(gamma)?.add(beta)
    }
}

/// Self-attention with RoPE plus a `tanh(α)`-gated cross-attention onto
/// scene keys and values. `α` starts at zero.
#[derive(Debug, Clone, Copy)]
pub struct GatedCrossAttention {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub alpha: ParamId,
    pub dim: usize,
    pub rope_base: f64,
}

impl GatedCrossAttention {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, dim: usize) -> Self {
        let std = 1.0 / (dim as f64).sqrt();
        Self {
            w_q: store.add(format!("{name}.w_q"), rng.normal_tensor(&[dim, dim], std)),
            w_k: store.add(format!("{name}.w_k"), rng.normal_tensor(&[dim, dim], std)),
            w_v: store.add(format!("{name}.w_v"), rng.normal_tensor(&[dim, dim], std)),
            alpha: store.add(format!("{name}.alpha"), Tensor::scalar(0.0)),
            dim,
            rope_base: ROPE_BASE,
        }
    }

    /// `h: [T, d]`; `scene_k`, `scene_v`: `[S, d]`.
    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        h: Var<'t>,
        scene_k: Var<'t>,
        scene_v: Var<'t>,
    ) -> Result<Var<'t>> {
        for (what, v) in [("hidden", h), ("scene keys", scene_k), ("scene values", scene_v)] {
            let shape = v.shape();
            if shape.len() != 2 || shape[1] != self.dim {
                return Err(Error::input(format!(
                    "{what} must be [_, {}], got {shape:?}",
                    self.dim
                )));
            }
        }
        if scene_k.shape()[0] != scene_v.shape()[0] {
            return Err(Error::input("scene keys and values differ in length"));
        }
        let q = h.matmul(p[self.w_q])?.rope(self.rope_base)?;
        let k = h.matmul(p[self.w_k])?.rope(self.rope_base)?;
        let v = h.matmul(p[self.w_v])?;
        let own = attention(q, k, v)?;
        let cross = attention(q, scene_k, scene_v)?;
        own.add(cross.mul(p[self.alpha].tanh())?)
    }

    /// The self-attention term alone.
    pub fn self_attention<'t>(&self, p: &Bound<'t>, h: Var<'t>) -> Result<Var<'t>> {
        let q = h.matmul(p[self.w_q])?.rope(self.rope_base)?;
        let k = h.matmul(p[self.w_k])?.rope(self.rope_base)?;
        let v = h.matmul(p[self.w_v])?;
        attention(q, k, v)
    }
}

/// Evaluates `f` on a throwaway tape and returns the plain value.
pub fn eval_plain(f: impl for<'t> FnOnce(&'t Tape) -> Result<Var<'t>>) -> Result<Tensor> {
    let tape = Tape::new();
    Ok(f(&tape)?.value())
}
