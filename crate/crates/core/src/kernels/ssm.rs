//! Linear time-invariant state-space model: zero-order-hold discretization
//! and the two equivalent evaluations (recurrent scan and causal
//! convolution with the unrolled kernel).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this infinity-norm of `ΔA` the input matrix uses the power series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::input(format!(
                "{n}x{n} matrix needs {} values, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn add(&self, other: &Self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    out[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Self { n, data: out }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .map(|v| v.abs())
                    .sum()
            })
            .fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// LU factorization with partial pivoting.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// `None` if a pivot is (numerically) zero.
    fn factor(m: &Mat) -> Option<Self> {
        let n = m.n;
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.norm_inf().max(f64::MIN_POSITIVE);
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| lu[i * n + c].abs().total_cmp(&lu[j * n + c].abs()))?;
            if lu[p * n + c].abs() <= 1e-13 * scale {
                return None;
            }
            if p != c {
                for k in 0..n {
                    lu.swap(c * n + k, p * n + k);
                }
                perm.swap(c, p);
            }
            for r in c + 1..n {
                let f = lu[r * n + c] / lu[c * n + c];
                lu[r * n + c] = f;
                for k in c + 1..n {
                    lu[r * n + k] -= f * lu[c * n + k];
                }
            }
        }
        Some(Self { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    fn solve_mat(&self, b: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| b.get(i, j)).collect();
            for (i, v) in self.solve(&col).into_iter().enumerate() {
                out.data[i * n + j] = v;
            }
        }
        out
    }
}

const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Matrix exponential by scaling and squaring with a degree-6 Padé approximant.
pub fn expm(a: &Mat) -> Result<Mat> {
    let n = a.n;
    let norm = a.norm_inf();
    if !norm.is_finite() {
        return Err(Error::Numeric("matrix exponential of a non-finite matrix".into()));
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let x = a.scaled(0.5f64.powi(squarings as i32));
    let mut num = Mat::identity(n);
    let mut den = Mat::identity(n);
    let mut power = Mat::identity(n);
    for (j, &c) in PADE6.iter().enumerate().skip(1) {
        power = power.matmul(&x);
        num = num.add(&power, c);
        den = den.add(&power, if j % 2 == 0 { c } else { -c });
    }
    let lu = Lu::factor(&den).ok_or_else(|| Error::Numeric("singular Padé denominator".into()))?;
    let mut e = lu.solve_mat(&num);
    for _ in 0..squarings {
        e = e.matmul(&e);
    }
    if !e.is_finite() {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok(e)
}

/// Continuous single-input single-output SSM `h' = A h + B x`, `y = C h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmParams {
    pub a: Mat,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Timescale Δ > 0.
    pub delta: f64,
}

impl SsmParams {
    pub fn new(a: Mat, b: Vec<f64>, c: Vec<f64>, delta: f64) -> Result<Self> {
        let n = a.dim();
        if b.len() != n || c.len() != n {
            return Err(Error::input(format!(
                "state dim {n} but B has {} and C has {} entries",
                b.len(),
                c.len()
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::input(format!("timescale {delta} must be positive")));
        }
        Ok(Self { a, b, c, delta })
    }

    pub fn state_dim(&self) -> usize {
        self.a.dim()
    }
}

/// Discrete-time parameters after zero-order hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSsm {
    pub a_bar: Mat,
    pub b_bar: Vec<f64>,
    pub c: Vec<f64>,
}

/// `Ā = exp(ΔA)`, `B̄ = (ΔA)⁻¹(exp(ΔA) − I) ΔB`.
///
/// For small `‖ΔA‖` the input matrix is the series `Σ (ΔA)^k/(k+1)! ΔB`;
/// if `ΔA` is singular it comes from the exponential of the augmented
/// matrix `[[ΔA, ΔB], [0, 0]]`, whose top-right block is the same quantity.
pub fn zoh_discretize(p: &SsmParams) -> Result<DiscreteSsm> {
    let n = p.state_dim();
    let da = p.a.scaled(p.delta);
    let db: Vec<f64> = p.b.iter().map(|v| v * p.delta).collect();
    let a_bar = expm(&da)?;
    let b_bar = if da.norm_inf() < SERIES_THRESHOLD {
        phi1_series(&da, &db)
    } else {
        let rhs = a_bar.add(&Mat::identity(n), -1.0).matvec(&db);
        match Lu::factor(&da) {
            Some(lu) => lu.solve(&rhs),
            None => phi1_augmented(&da, &db)?,
        }
    };
    if !b_bar.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("discretized input matrix is not finite".into()));
    }
    Ok(DiscreteSsm {
        a_bar,
        b_bar,
        c: p.c.clone(),
    })
}

fn phi1_series(da: &Mat, db: &[f64]) -> Vec<f64> {
    let mut term = db.to_vec();
    let mut sum = db.to_vec();
    for k in 1..30 {
        term = da.matvec(&term).into_iter().map(|v| v / (k + 1) as f64).collect();
        let mut small = true;
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
            small &= t.abs() <= f64::EPSILON * s.abs();
        }
        if small {
            break;
        }
    }
    sum
}

fn phi1_augmented(da: &Mat, db: &[f64]) -> Result<Vec<f64>> {
    let n = da.dim();
    let mut aug = Mat::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            aug.data[i * (n + 1) + j] = da.get(i, j);
        }
        aug.data[i * (n + 1) + n] = db[i];
    }
    let e = expm(&aug)?;
    Ok((0..n).map(|i| e.get(i, n)).collect())
}

/// Recurrence `h_t = Ā h_{t−1} + B̄ x_t`, `y_t = C h_t`, with `h_0 = 0`.
pub fn ssm_scan(d: &DiscreteSsm, x: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; d.b_bar.len()];
    x.iter()
        .map(|&xt| {
            let ah = d.a_bar.matvec(&h);
            for ((hi, a), b) in h.iter_mut().zip(ah).zip(&d.b_bar) {
                *hi = a + b * xt;
            }
            h.iter().zip(&d.c).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Convolution kernel `K̄[j] = C Ā^j B̄` for `j < len`.
pub fn ssm_kernel(d: &DiscreteSsm, len: usize) -> Vec<f64> {
    let mut v = d.b_bar.clone();
    (0..len)
        .map(|_| {
            let k = v.iter().zip(&d.c).map(|(a, b)| a * b).sum();
            v = d.a_bar.matvec(&v);
            k
        })
        .collect()
}

/// Causal convolution `y_t = Σ_{j ≤ t} K̄[j] x_{t−j}`, truncated to `x.len()`.
pub fn conv_apply(kernel: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|t| {
            (0..=t.min(kernel.len().saturating_sub(1)))
                .filter(|&j| j < kernel.len())
                .map(|j| kernel[j] * x[t - j])
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, delta: f64) -> SsmParams {
        SsmParams::new(Mat::new(1, vec![a]).unwrap(), vec![b], vec![c], delta).unwrap()
    }

    #[test]
    fn zero_a_series_limit() {
        let d = zoh_discretize(&scalar(0.0, 2.0, 1.0, 0.3)).unwrap();
        assert_eq!(d.a_bar.get(0, 0), 1.0);
        assert!((d.b_bar[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn half_decay_spot_value() {
        let d = zoh_discretize(&scalar(-1.0, 1.0, 1.0, 2f64.ln())).unwrap();
        assert!((d.a_bar.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((d.b_bar[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn diagonal_a_exponentiates_entrywise() {
        let diag = [-0.5, -2.0, 0.3, -7.0];
        let p = SsmParams::new(Mat::diagonal(&diag), vec![1.0, 0.5, -1.0, 2.0], vec![1.0; 4], 0.7).unwrap();
        let d = zoh_discretize(&p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { (0.7 * diag[i]).exp() } else { 0.0 };
                assert!((d.a_bar.get(i, j) - expected).abs() < 1e-13, "{i},{j}");
            }
            // scalar ZOH oracle per channel
            let z = 0.7 * diag[i];
            let expected_b = (z.exp() - 1.0) / z * 0.7 * p.b[i];
            assert!((d.b_bar[i] - expected_b).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_a_uses_augmented_exponential() {
        let p = SsmParams::new(Mat::diagonal(&[0.0, -1.0]), vec![1.0, 1.0], vec![1.0, 1.0], 0.5).unwrap();
        let d = zoh_discretize(&p).unwrap();
        assert!((d.b_bar[0] - 0.5).abs() < 1e-13);
        assert!((d.b_bar[1] - (1.0 - (-0.5f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let theta = 1.3;
        let a = Mat::new(2, vec![0.0, -theta, theta, 0.0]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e.get(0, 0) - theta.cos()).abs() < 1e-14);
        assert!((e.get(1, 0) - theta.sin()).abs() < 1e-14);
        let big = Mat::new(1, vec![40.0]).unwrap();
        assert!((expm(&big).unwrap().get(0, 0) / 40f64.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scan_examples() {
        let d = DiscreteSsm {
            a_bar: Mat::new(1, vec![0.5]).unwrap(),
            b_bar: vec![1.0],
            c: vec![1.0],
        };
        assert_eq!(ssm_scan(&d, &[1.0, 0.0, 0.0]), vec![1.0, 0.5, 0.25]);
        assert_eq!(ssm_scan(&d, &[0.0; 4]), vec![0.0; 4]);
        assert_eq!(ssm_kernel(&d, 3), vec![1.0, 0.5, 0.25]);
        assert_eq!(
            conv_apply(&[1.0, 0.5, 0.25], &[1.0, 0.0, 0.0]),
            vec![1.0, 0.5, 0.25]
        );
    }

    #[test]
    fn first_output_is_cb_x() {
        let p = SsmParams::new(
            Mat::new(2, vec![-1.0, 0.2, 0.1, -0.5]).unwrap(),
            vec![0.3, -0.7],
            vec![1.5, 2.0],
            0.1,
        )
        .unwrap();
        let d = zoh_discretize(&p).unwrap();
        let y = ssm_scan(&d, &[2.0, 1.0]);
        let cb: f64 = d.c.iter().zip(&d.b_bar).map(|(a, b)| a * b).sum();
        assert_eq!(y[0], cb * 2.0);
    }

    #[test]
    fn bad_params() {
        assert!(SsmParams::new(Mat::zeros(2), vec![1.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(SsmParams::new(Mat::zeros(1), vec![1.0], vec![1.0], 0.0).is_err());
        assert!(Mat::new(2, vec![0.0; 3]).is_err());
        let huge = SsmParams::new(Mat::new(1, vec![1e6]).unwrap(), vec![1.0], vec![1.0], 1.0).unwrap();
        assert!(matches!(zoh_discretize(&huge), Err(Error::Numeric(_))));
    }
}
