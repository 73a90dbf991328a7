//! Context-consistent classifier-free guidance over three vector fields.

use std::ops::{Mul, Sub};

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfgWeights {
    /// Guidance scale γ.
    pub gamma: f64,
    /// Mix α between the current condition and the previous line's context.
    pub alpha: f64,
}

impl Default for CfgWeights {
    fn default() -> Self {
        Self {
            gamma: 3.0,
            alpha: 0.4,
        }
    }
}

/// `(γα, γ(1 − α), 1 − γ)` in any ring, so the identity can be checked
/// in exact arithmetic as well as in `f64`.
pub fn cfg_coefficients<T>(gamma: T, alpha: T) -> (T, T, T)
where
    T: Copy + One + Sub<Output = T> + Mul<Output = T>,
{
    (gamma * alpha, gamma * (T::one() - alpha), T::one() - gamma)
}

impl CfgWeights {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !gamma.is_finite() || !alpha.is_finite() {
            return Err(Error::input(format!(
                "guidance weights ({gamma}, {alpha}) must be finite"
            )));
        }
        Ok(Self { gamma, alpha })
    }

    /// Outside `[1, 5] × [0, 1]` the combination is legal but unusual.
    pub fn is_typical(&self) -> bool {
        (1.0..=5.0).contains(&self.gamma) && (0.0..=1.0).contains(&self.alpha)
    }

    pub fn coefficients(&self) -> (f64, f64, f64) {
        cfg_coefficients(self.gamma, self.alpha)
    }
}

/// `γα v_a + γ(1−α) v_last + (1−γ) v_null`.
///
/// Evaluated as `v_a + γ(1−α)(v_last − v_a) + (1−γ)(v_null − v_a)`, which
/// is the same affine combination but returns `v_a` unchanged when the
/// other two weights vanish and returns `v` unchanged when all three
/// fields equal `v`.
pub fn cfg_field(v_a: &Tensor, v_last: &Tensor, v_null: &Tensor, w: CfgWeights) -> Result<Tensor> {
    if v_a.shape() != v_last.shape() || v_a.shape() != v_null.shape() {
        return Err(Error::input(format!(
            "fields {:?}, {:?}, {:?} must share a shape",
            v_a.shape(),
            v_last.shape(),
            v_null.shape()
        )));
    }
    let (_, w_last, w_null) = w.coefficients();
    let mut out = v_a.clone();
    for (o, (&a, (&l, &n))) in out
        .data_mut()
        .iter_mut()
        .zip(v_a.data().iter().zip(v_last.data().iter().zip(v_null.data())))
    {
        if w_last != 0.0 {
            *o += w_last * (l - a);
        }
        if w_null != 0.0 {
            *o += w_null * (n - a);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_setting_returns_v_a() {
        let v_a = Tensor::from_vec(vec![-0.0, 1e-300, 3.7, f64::MAX]);
        let v_l = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let v_n = Tensor::from_vec(vec![9.0, 8.0, 7.0, 6.0]);
        let out = cfg_field(&v_a, &v_l, &v_n, CfgWeights::new(1.0, 1.0).unwrap()).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out), bits(&v_a));
    }

    #[test]
    fn default_example() {
        let w = CfgWeights::default();
        let (a, l, n) = w.coefficients();
        assert!((a - 1.2).abs() <= f64::EPSILON * 2.0);
        assert!((l - 1.8).abs() <= f64::EPSILON * 2.0);
        assert_eq!(n, -2.0);
        let out = cfg_field(
            &Tensor::from_vec(vec![1.0, 0.0]),
            &Tensor::from_vec(vec![0.0, 1.0]),
            &Tensor::from_vec(vec![1.0, 1.0]),
            w,
        )
        .unwrap();
        assert!((out.data()[0] + 0.8).abs() < 1e-15);
        assert!((out.data()[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn typical_range() {
        assert!(CfgWeights::default().is_typical());
        assert!(!CfgWeights::new(7.0, 0.4).unwrap().is_typical());
        assert!(CfgWeights::new(f64::NAN, 0.4).is_err());
        let t = Tensor::zeros(&[2]);
        assert!(cfg_field(&t, &t, &Tensor::zeros(&[3]), CfgWeights::default()).is_err());
    }
}
