use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Bound, ParamId, ParamStore, Rng, Tape, Tensor, Var};

/// Nonlinearity of the aperiodic branch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Tanh-approximated GELU.
    #[default]
    Gelu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: Var<'_>) -> Var<'_> {
        match self {
            Activation::Gelu => x.gelu(),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => x.sigmoid(),
        }
    }
}

/// Fourier-analysis layer `[cos(x W_p) ‖ sin(x W_p) ‖ σ(B + x W_p̄)]`.
#[derive(Debug, Clone, Copy)]
pub struct FanParams {
    pub w_p: ParamId,
    pub w_pbar: ParamId,
    pub b_pbar: ParamId,
    pub d_in: usize,
    pub d_p: usize,
    pub d_pbar: usize,
    pub activation: Activation,
}

impl FanParams {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        rng: &mut Rng,
        d_in: usize,
        d_p: usize,
        d_pbar: usize,
    ) -> Self {
        let std = 1.0 / (d_in as f64).sqrt();
        Self {
            w_p: store.add(format!("{name}.w_p"), rng.normal_tensor(&[d_in, d_p], std)),
            w_pbar: store.add(format!("{name}.w_pbar"), rng.normal_tensor(&[d_in, d_pbar], std)),
            b_pbar: store.add(format!("{name}.b_pbar"), rng.normal_tensor(&[d_pbar], 0.1)),
            d_in,
            d_p,
            d_pbar,
            activation: Activation::Gelu,
        }
    }

    pub fn out_dim(&self) -> usize {
        2 * self.d_p + self.d_pbar
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        fan_layer(x, p[self.w_p], p[self.w_pbar], p[self.b_pbar], self.activation)
    }
}

/// FAN layer on recorded values. `x: [.., d_in]`, `w_p: [d_in, d_p]`,
/// `w_pbar: [d_in, d_pbar]`, `b_pbar: [d_pbar]`; output `[.., 2 d_p + d_pbar]`
/// in the order cos, sin, activation branch.
pub fn fan_layer<'t>(
    x: Var<'t>,
    w_p: Var<'t>,
    w_pbar: Var<'t>,
    b_pbar: Var<'t>,
    activation: Activation,
) -> Result<Var<'t>> {
    let xs = x.shape();
    let (wp, wq) = (w_p.shape(), w_pbar.shape());
    let d_in = *xs.last().unwrap_or(&0);
    if wp.len() != 2 || wq.len() != 2 || wp[0] != d_in || wq[0] != d_in {
        return Err(Error::input(format!(
            "FAN input dim {d_in} does not match weights {wp:?} / {wq:?}"
        )));
    }
    let phase = x.matmul(w_p)?;
    let aperiodic = activation.apply(x.matmul(w_pbar)?.add(b_pbar)?);
    Var::concat(&[phase.cos(), phase.sin(), aperiodic])
}

/// [`fan_layer`] on plain tensors.
pub fn fan_layer_plain(
    x: &Tensor,
    w_p: &Tensor,
    w_pbar: &Tensor,
    b_pbar: &Tensor,
    activation: Activation,
) -> Result<Tensor> {
    let tape = Tape::new();
    let y = fan_layer(
        tape.leaf(x.clone()),
        tape.leaf(w_p.clone()),
        tape.leaf(w_pbar.clone()),
        tape.leaf(b_pbar.clone()),
        activation,
    )?;
    Ok(y.value())
}
