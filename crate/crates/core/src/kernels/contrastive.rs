//! Symmetric InfoNCE between paired embedding batches.

use crate::error::{Error, Result};
use crate::numerics::{Tensor, Var};

fn unit_rows<'t>(z: Var<'t>, name: &str) -> Result<Var<'t>> {
    let value = z.value();
    if value.shape().len() != 2 || value.rows() == 0 {
        return Err(Error::input(format!(
            "{name} must be a non-empty [N, d] batch, got {:?}",
            value.shape()
        )));
    }
    for r in 0..value.rows() {
        let n2: f64 = value.row(r).iter().map(|v| v * v).sum();
        if !(n2 > 0.0) {
            return Err(Error::input(format!("{name} row {r} has zero norm")));
        }
    }
    z.div(z.square().sum_last().sqrt())
}

/// `−(1/2N) Σ_i [log softmax_j(s_ij/τ) + log softmax_j(s_ji/τ)]` at `j = i`,
/// with `s` the cosine similarity between rows of `z1` and `z2`.
pub fn contrastive_pair_loss<'t>(z1: Var<'t>, z2: Var<'t>, tau: f64) -> Result<Var<'t>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::input(format!("temperature {tau} must be positive")));
    }
    let (s1, s2) = (z1.shape(), z2.shape());
    if s1 != s2 {
        return Err(Error::input(format!(
            "paired batches {s1:?} and {s2:?} differ in shape"
        )));
    }
    let n = s1.first().copied().unwrap_or(0);
    let a = unit_rows(z1, "first batch")?;
    let b = unit_rows(z2, "second batch")?;
    let logits = a.matmul(b.transpose()?)?.scale(1.0 / tau);
    let eye = z1.tape().leaf(Tensor::eye(n));
    let forward = logits.log_softmax().mul(eye)?.sum();
    let backward = logits.transpose()?.log_softmax().mul(eye)?.sum();
    // adding +0 turns a −0 result (N = 1) into +0
    Ok(forward.add(backward)?.scale(-0.5 / n as f64).add_scalar(0.0))
}

/// Sum of the three pairwise losses between geometry, video and text embeddings.
pub fn total_contrastive<'t>(geo: Var<'t>, vid: Var<'t>, txt: Var<'t>, tau: f64) -> Result<Var<'t>> {
    contrastive_pair_loss(geo, vid, tau)?
        .add(contrastive_pair_loss(geo, txt, tau)?)?
        .add(contrastive_pair_loss(vid, txt, tau)?)
}
