//! Rectified flow: straight-line interpolation, its regression loss and
//! explicit Euler integration of a learned or analytic vector field.

use crate::error::{Error, Result};
use crate::numerics::{Tensor, Var};

pub const DEFAULT_EULER_STEPS: usize = 25;

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Range {
            value: t,
            min: 0.0,
            max: 1.0,
        })
    }
}

fn check_shapes(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::input(format!(
            "shape {:?} does not match {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

/// `x_t = (1 − t) x0 + t x1`.
pub fn flow_interpolate(x0: &Tensor, x1: &Tensor, t: f64) -> Result<Tensor> {
    check_time(t)?;
    check_shapes(x0, x1)?;
    let data = x0
        .data()
        .iter()
        .zip(x1.data())
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    Tensor::new(x0.shape(), data)
}

/// Mean over all elements of `(v − (x1 − x0))²`.
pub fn rfm_loss<'t>(v_pred: Var<'t>, x0: Var<'t>, x1: Var<'t>) -> Result<Var<'t>> {
    if v_pred.shape() != x0.shape() || x0.shape() != x1.shape() {
        return Err(Error::input(format!(
            "field {:?}, source {:?} and target {:?} must share a shape",
            v_pred.shape(),
            x0.shape(),
            x1.shape()
        )));
    }
    Ok(v_pred.sub(x1.sub(x0)?)?.square().mean())
}

/// Position on a flow path.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    t: f64,
    x_t: Tensor,
}

impl FlowState {
    pub fn new(x_t: Tensor, t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(Self { t, x_t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &Tensor {
        &self.x_t
    }

    pub fn into_x(self) -> Tensor {
        self.x_t
    }

    /// One explicit Euler step `x ← x + ε v(x, t)`; `t` is clamped to 1.
    pub fn step<F>(&mut self, field: &mut F, eps: f64) -> Result<()>
    where
        F: FnMut(&Tensor, f64) -> Result<Tensor>,
    {
        let v = field(&self.x_t, self.t)?;
        check_shapes(&self.x_t, &v)?;
        for (x, dv) in self.x_t.data_mut().iter_mut().zip(v.data()) {
            *x += eps * dv;
        }
        self.t = (self.t + eps).min(1.0);
        Ok(())
    }
}

/// Integrates `dx/dt = v(x, t)` from `t = 0` to `1` in `steps` equal steps.
/// Conditioning inputs are captured by the closure.
pub fn euler_solve<F>(mut field: F, x0: &Tensor, steps: usize) -> Result<Tensor>
where
    F: FnMut(&Tensor, f64) -> Result<Tensor>,
{
    if steps == 0 {
        return Err(Error::input("Euler solver needs at least one step"));
    }
    let eps = 1.0 / steps as f64;
    let mut state = FlowState::new(x0.clone(), 0.0)?;
    for k in 0..steps {
        state.t = k as f64 * eps;
        state.step(&mut field, eps)?;
        if !state.x_t.is_finite() {
            return Err(Error::NonFinite {
                step: k,
                what: "Euler state".into(),
            });
        }
    }
    Ok(state.into_x())
}

/// Marginal velocity of the independent coupling between `N(0, I)` and
/// `N(μ, σ² I)` under straight-line interpolation.
///
/// Per coordinate, `x_t ~ N(tμ, (1−t)² + t²σ²)` and
/// `Cov(x1 − x0, x_t) = tσ² − (1 − t)`, so
/// `E[x1 − x0 | x_t] = μ + k(t)(x_t − tμ)` with
/// `k(t) = (tσ² − (1 − t)) / ((1 − t)² + t²σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTransport {
    pub mean: Vec<f64>,
    pub std: f64,
}

impl GaussianTransport {
    pub fn new(mean: Vec<f64>, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::input(format!(
                "invalid Gaussian target mean {mean:?}, std {std}"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn gain(&self, t: f64) -> f64 {
        let s2 = self.std * self.std;
        (t * s2 - (1.0 - t)) / ((1.0 - t).powi(2) + t * t * s2)
    }

    /// Field on `[n, d]` row samples.
    pub fn velocity(&self, x: &Tensor, t: f64) -> Result<Tensor> {
        let d = self.mean.len();
        if x.last_dim() != d {
            return Err(Error::input(format!(
                "samples have dim {}, target has {d}",
                x.last_dim()
            )));
        }
        let k = self.gain(t);
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let m = self.mean[i % d];
                m + k * (xi - t * m)
            })
            .collect();
        Tensor::new(x.shape(), data)
    }
}
