use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tape, Tensor, Var};

pub const TAU_START: f64 = 2.0;
pub const TAU_END: f64 = 0.3;
pub const DEFAULT_BALANCE_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingMode {
    /// Gumbel-softmax with temperature τ.
    #[default]
    Stochastic,
    /// One-hot argmax of the logits, no noise.
    Deterministic,
}

/// Exponential decay of the routing temperature over `steps` updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TemperatureSchedule {
    pub fn new(steps: usize) -> Self {
        Self {
            start: TAU_START,
            end: TAU_END,
            steps,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.end;
        }
        let frac = (step.min(self.steps - 1)) as f64 / (self.steps - 1) as f64;
        (self.start * (self.end / self.start).powf(frac))
            .clamp(self.end.min(self.start), self.start.max(self.end))
    }
}

/// Standalone router: gating matrix `W_g: [d, N]` plus routing settings.
#[derive(Debug, Clone)]
pub struct RouterState {
    pub w_g: Tensor,
    pub tau: f64,
    pub mode: RoutingMode,
    pub balance_alpha: f64,
    pub dispatch_counts: Vec<u64>,
}

impl RouterState {
    pub fn new(w_g: Tensor, tau: f64, mode: RoutingMode) -> Result<Self> {
        if w_g.shape().len() != 2 {
            return Err(Error::input(format!(
                "gating matrix must be 2-D, got {:?}",
                w_g.shape()
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::input(format!("temperature {tau} must be positive")));
        }
        let n = w_g.shape()[1];
        Ok(Self {
            w_g,
            tau,
            mode,
            balance_alpha: DEFAULT_BALANCE_ALPHA,
            dispatch_counts: vec![0; n],
        })
    }

    pub fn experts(&self) -> usize {
        self.dispatch_counts.len()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise one-hot argmax of `[B, N]` logits, with the chosen indices.
pub fn hard_gates(logits: &Tensor) -> (Tensor, Vec<usize>) {
    let n = logits.last_dim();
    let mut out = Tensor::zeros(logits.shape());
    let picks: Vec<usize> = (0..logits.rows()).map(|r| argmax(logits.row(r))).collect();
    for (r, &i) in picks.iter().enumerate() {
        out.data_mut()[r * n + i] = 1.0;
    }
    (out, picks)
}

/// `softmax((logits + ζ) / τ)` on recorded values; `noise` is ζ (same shape).
pub fn soft_gates<'t>(logits: Var<'t>, noise: Option<&Tensor>, tau: f64) -> Result<Var<'t>> {
    let noisy = match noise {
        Some(z) => logits.add(logits.tape().leaf(z.clone()))?,
        None => logits,
    };
    Ok(noisy.scale(1.0 / tau).softmax())
}

/// Routes each row of `h: [B, d]` to a distribution over the router's experts
/// and records the argmax dispatch.
pub fn gumbel_route(h: &Tensor, r: &mut RouterState, rng: &mut Rng) -> Result<Tensor> {
    let logits = h.matmul(&r.w_g)?;
    let gates = match r.mode {
        RoutingMode::Deterministic => hard_gates(&logits).0,
        RoutingMode::Stochastic => {
            if !(r.tau > 0.0) {
                return Err(Error::input(format!("temperature {} must be positive", r.tau)));
            }
            let noise = rng.gumbel_tensor(logits.shape());
            let tape = Tape::new();
            soft_gates(tape.leaf(logits), Some(&noise), r.tau)?.value()
        }
    };
    for pick in hard_gates(&gates).1 {
        r.dispatch_counts[pick] += 1;
    }
    Ok(gates)
}

/// Dispatch-weighted balance loss `α N Σ_i f_i P_i`, where `f_i` is the
/// fraction of rows hard-assigned to expert `i` and `P_i` the mean gate.
pub fn load_balance_loss<'t>(gates: Var<'t>, assignments: &[usize], alpha: f64) -> Result<Var<'t>> {
    let shape = gates.shape();
    if shape.len() != 2 || shape[0] != assignments.len() || shape[0] == 0 {
        return Err(Error::input(format!(
            "gates {shape:?} do not match {} assignments",
            assignments.len()
        )));
    }
    let (b, n) = (shape[0], shape[1]);
    let mut frac = vec![0.0; n];
    for &a in assignments {
        if a >= n {
            return Err(Error::input(format!(
                "assignment {a} out of range for {n} experts"
            )));
        }
        frac[a] += 1.0 / b as f64;
    }
    let tape = gates.tape();
    let mean_gate = tape.leaf(Tensor::full(&[1, b], 1.0 / b as f64)).matmul(gates)?;
    let f = tape.leaf(Tensor::new(&[1, n], frac)?);
    Ok(mean_gate.mul(f)?.sum().scale(alpha * n as f64))
}

/// The balance term with the dispatch fraction omitted, `α N Σ_i P_i`.
/// For softmax gates this is the constant `α N`; kept for reference.
pub fn literal_balance_loss(gates: Var<'_>, alpha: f64) -> Result<Var<'_>> {
    let shape = gates.shape();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(Error::input(format!("gates must be [B, N], got {shape:?}")));
    }
    Ok(gates.sum().scale(alpha * shape[1] as f64 / shape[0] as f64))
}
