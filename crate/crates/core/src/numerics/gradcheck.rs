use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Where the largest disagreement between analytic and numeric gradients
/// was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(1, |analytic|)` over all coordinates.
    pub max_rel_error: f64,
    pub input: usize,
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

fn eval<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let y = f(&tape, &vars)?;
    if y.shape().iter().product::<usize>() != 1 {
        return Err(Error::input("grad_check function must return a scalar"));
    }
    let v = y.item();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("function value {v} is not finite")));
    }
    Ok(v)
}

/// Compares reverse-mode gradients of the scalar function `f` against
/// central differences with step `h`, for every coordinate of every input.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(h > 0.0) {
        return Err(Error::Config(format!(
            "finite-difference step {h} must be positive"
        )));
    }
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let y = f(&tape, &vars)?;
    if !y.item().is_finite() {
        return Err(Error::Numeric(format!(
            "function value {} is not finite",
            y.item()
        )));
    }
    tape.backward(y)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| v.grad().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        input: 0,
        coordinate: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = inputs.to_vec();
    for (i, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let x0 = inputs[i].data()[j];
            probe[i].data_mut()[j] = x0 + h;
            let plus = eval(&f, &probe)?;
            probe[i].data_mut()[j] = x0 - h;
            let minus = eval(&f, &probe)?;
            probe[i].data_mut()[j] = x0;
            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[j];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if err >= report.max_rel_error {
                report = GradCheckReport {
                    max_rel_error: err,
                    input: i,
                    coordinate: j,
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}

/// Single-input form of [`grad_check_many`]; returns the max relative error.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let report = grad_check_many(|tape, v| f(tape, v[0]), std::slice::from_ref(x), h)?;
    Ok(report.max_rel_error)
}
