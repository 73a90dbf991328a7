//! Two-stage mixture of FAN experts: a prosodic group routed on prompt audio
//! aligned to the pose sequence, followed by a spatial group routed on pose.

use crate::error::{Error, Result};
use crate::numerics::{attention, Bound, Init, Linear, ParamId, ParamStore, Rng, Tensor, Var};

use super::fan::FanParams;
use super::router::{hard_gates, soft_gates};

/// Residual expert `x + W_out · fan(x) + b_out`.
///
/// `W_out` starts at zero so every expert is the identity plus its own
/// small bias; the biases keep experts distinguishable, which is what lets
/// routing gradients flow from the first step.
#[derive(Debug, Clone, Copy)]
pub struct FanExpert {
    pub fan: FanParams,
    pub out: Linear,
}

impl FanExpert {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        rng: &mut Rng,
        dim: usize,
        d_p: usize,
        d_pbar: usize,
    ) -> Self {
        let fan = FanParams::new(store, &format!("{name}.fan"), rng, dim, d_p, d_pbar);
        let out = Linear::new(
            store,
            &format!("{name}.out"),
            rng,
            fan.out_dim(),
            dim,
            Init::Zeros,
            true,
        );
        if let Some(b) = out.bias {
            *store.get_mut(b) = rng.normal_tensor(&[dim], 0.1);
        }
        Self { fan, out }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        x.add(self.out.forward(p, self.fan.forward(p, x)?)?)
    }
}

/// Sizes of a [`DramaMoe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoeDims {
    pub dim: usize,
    pub prosodic_experts: usize,
    pub spatial_experts: usize,
    pub d_p: usize,
    pub d_pbar: usize,
}

/// How gates are formed for one forward pass.
#[derive(Debug, Clone)]
pub enum Routing {
    /// `softmax((logits + ζ)/τ)`; noise tensors are `[T, N]` or absent.
    Soft {
        tau: f64,
        noise_prosodic: Option<Tensor>,
        noise_spatial: Option<Tensor>,
    },
    /// One-hot argmax, lowest index on ties.
    Deterministic,
}

impl Routing {
    /// Soft routing with fresh Gumbel noise for `tokens` rows.
    pub fn gumbel(rng: &mut Rng, tokens: usize, dims: &MoeDims, tau: f64) -> Self {
        Routing::Soft {
            tau,
            noise_prosodic: Some(rng.gumbel_tensor(&[tokens, dims.prosodic_experts])),
            noise_spatial: Some(rng.gumbel_tensor(&[tokens, dims.spatial_experts])),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MoeOutput<'t> {
    pub output: Var<'t>,
    pub gates_prosodic: Var<'t>,
    pub gates_spatial: Var<'t>,
}

#[derive(Debug, Clone)]
pub struct DramaMoe {
    pub dims: MoeDims,
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub router_prosodic: ParamId,
    pub router_spatial: ParamId,
    pub prosodic: Vec<FanExpert>,
    pub spatial: Vec<FanExpert>,
}

impl DramaMoe {
    pub fn new(store: &mut ParamStore, name: &str, rng: &mut Rng, dims: MoeDims) -> Result<Self> {
        if dims.dim == 0 || dims.prosodic_experts == 0 || dims.spatial_experts == 0 {
            return Err(Error::input(format!("degenerate mixture sizes {dims:?}")));
        }
        let d = dims.dim;
        let std = 1.0 / (d as f64).sqrt();
        let mut mat = |store: &mut ParamStore, suffix: &str, cols: usize| {
            store.add(format!("{name}.{suffix}"), rng.normal_tensor(&[d, cols], std))
        };
        let w_q = mat(store, "w_q", d);
        let w_k = mat(store, "w_k", d);
        let w_v = mat(store, "w_v", d);
        let router_prosodic = mat(store, "router_prosodic", dims.prosodic_experts);
        let router_spatial = mat(store, "router_spatial", dims.spatial_experts);
        let prosodic = (0..dims.prosodic_experts)
            .map(|i| {
                FanExpert::new(
                    store,
                    &format!("{name}.prosodic{i}"),
                    rng,
                    d,
                    dims.d_p,
                    dims.d_pbar,
                )
            })
            .collect();
        let spatial = (0..dims.spatial_experts)
            .map(|i| {
                FanExpert::new(
                    store,
                    &format!("{name}.spatial{i}"),
                    rng,
                    d,
                    dims.d_p,
                    dims.d_pbar,
                )
            })
            .collect();
        Ok(Self {
            dims,
            w_q,
            w_k,
            w_v,
            router_prosodic,
            router_spatial,
            prosodic,
            spatial,
        })
    }

    /// `h, z_c, z_p: [T, d]`, `z_a: [S, d]`.
    ///
    /// The aligned prosody `z_pro = Attn(z_p W_q, z_a W_k, z_a W_v)` plus the
    /// content embedding drives the prosodic router; the pose drives the
    /// spatial router, which mixes experts applied to the prosodic output.
    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        h: Var<'t>,
        z_c: Var<'t>,
        z_a: Var<'t>,
        z_p: Var<'t>,
        routing: &Routing,
    ) -> Result<MoeOutput<'t>> {
        let d = self.dims.dim;
        let t = h.shape().first().copied().unwrap_or(0);
        for (name, v, rows) in [
            ("h", h, Some(t)),
            ("z_c", z_c, Some(t)),
            ("z_p", z_p, Some(t)),
            ("z_a", z_a, None),
        ] {
            let s = v.shape();
            if s.len() != 2 || s[1] != d || rows.is_some_and(|r| s[0] != r) || s[0] == 0 {
                return Err(Error::input(format!(
                    "{name} has shape {s:?}, expected [{t}, {d}]"
                )));
            }
        }
        let q = z_p.matmul(p[self.w_q])?;
        let k = z_a.matmul(p[self.w_k])?;
        let v = z_a.matmul(p[self.w_v])?;
        let z_pro = attention(q, k, v)?;

        let logits_pros = z_pro.add(z_c)?.matmul(p[self.router_prosodic])?;
        let logits_spat = z_p.matmul(p[self.router_spatial])?;
        let (gates_prosodic, gates_spatial) = match routing {
            Routing::Soft {
                tau,
                noise_prosodic,
                noise_spatial,
            } => {
                if !(*tau > 0.0) {
                    return Err(Error::input(format!("temperature {tau} must be positive")));
                }
                (
                    soft_gates(logits_pros, noise_prosodic.as_ref(), *tau)?,
                    soft_gates(logits_spat, noise_spatial.as_ref(), *tau)?,
                )
            }
            Routing::Deterministic => {
                let tape = h.tape();
                (
                    tape.leaf(hard_gates(&logits_pros.value()).0),
                    tape.leaf(hard_gates(&logits_spat.value()).0),
                )
            }
        };
        let o_pros = mix(p, &self.prosodic, gates_prosodic, h)?;
        let output = mix(p, &self.spatial, gates_spatial, o_pros)?;
        Ok(MoeOutput {
            output,
            gates_prosodic,
            gates_spatial,
        })
    }
}

fn mix<'t>(p: &Bound<'t>, experts: &[FanExpert], gates: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
    let mut acc: Option<Var<'t>> = None;
    for (i, e) in experts.iter().enumerate() {
        let term = gates.slice_last(i, 1)?.mul(e.forward(p, x)?)?;
        acc = Some(match acc {
            Some(a) => a.add(term)?,
            None => term,
        });
    }
    acc.ok_or_else(|| Error::input("expert group is empty"))
}
