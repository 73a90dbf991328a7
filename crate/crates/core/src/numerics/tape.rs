//! Tape-based reverse-mode differentiation.
//!
//! Every operation on a [`Var`] appends a node holding its value and the
//! information its backward rule needs. [`Tape::backward`] walks the nodes
//! in reverse from a scalar root and leaves the gradient of every node in
//! its tensor's `grad` slot. First derivatives only.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::rc::Rc;

use super::tensor::{matmul_dims, matmul_into, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unary {
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Sigmoid,
    Sqrt,
    Square,
    Gelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

/// Flat input index for every output element; `None` when shapes match.
type IndexMap = Option<Rc<Vec<usize>>>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Unary(usize, Unary),
    Scale(usize, f64),
    AddScalar(usize),
    Binary(usize, usize, Binary, IndexMap, IndexMap),
    MatMul(usize, usize),
    Transpose(usize),
    Sum(usize),
    Mean(usize),
    SumLast(usize),
    MeanLast(usize),
    Softmax(usize),
    LogSoftmax(usize),
    Concat(Vec<usize>),
    Slice(usize, usize),
    Reshape(usize),
    Rope(usize, f64),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recording of one forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&self, mut value: Tensor) -> Var<'_> {
        value.grad = None;
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.leaf(Tensor::scalar(value))
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn with<R>(&self, id: usize, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[id].value)
    }

    /// Back-propagates from `root`, which must hold exactly one element.
    /// Gradients from earlier calls are overwritten.
    pub fn backward(&self, root: Var<'_>) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        if nodes[root.id].value.len() != 1 {
            return Err(Error::input(format!(
                "backward root must be a scalar, got shape {:?}",
                nodes[root.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.id + 1];
        grads[root.id] = Some(vec![1.0]);
        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            backprop(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        let mut grads = grads.into_iter();
        for node in nodes.iter_mut() {
            node.value.grad = grads.next().flatten();
        }
        Ok(())
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut Vec<f64> {
    grads[id].get_or_insert_with(|| vec![0.0; len])
}

fn backprop(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let y = &nodes[id].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Unary(a, kind) => {
            let x = nodes[*a].value.data();
            let yd = y.data();
            let ga = acc(grads, *a, x.len());
            for i in 0..x.len() {
                let d = match kind {
                    Unary::Exp => yd[i],
                    Unary::Ln => 1.0 / x[i],
                    Unary::Sin => x[i].cos(),
                    Unary::Cos => -x[i].sin(),
                    Unary::Tanh => 1.0 - yd[i] * yd[i],
                    Unary::Sigmoid => yd[i] * (1.0 - yd[i]),
                    Unary::Sqrt => 0.5 / yd[i],
                    Unary::Square => 2.0 * x[i],
                    Unary::Gelu => gelu_grad(x[i]),
                };
                ga[i] += g[i] * d;
            }
        }
        Op::Scale(a, c) => {
            let ga = acc(grads, *a, g.len());
            for (o, gi) in ga.iter_mut().zip(g) {
                *o += gi * c;
            }
        }
        Op::AddScalar(a) | Op::Reshape(a) => {
            let ga = acc(grads, *a, g.len());
            for (o, gi) in ga.iter_mut().zip(g) {
                *o += gi;
            }
        }
        Op::Binary(a, b, kind, ia, ib) => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            let ix = |map: &IndexMap, i: usize| map.as_ref().map_or(i, |m| m[i]);
            let mut da = vec![0.0; av.len()];
            let mut db = vec![0.0; bv.len()];
            for (i, &gi) in g.iter().enumerate() {
                let (p, q) = (ix(ia, i), ix(ib, i));
                match kind {
                    Binary::Add => {
                        da[p] += gi;
                        db[q] += gi;
                    }
                    Binary::Sub => {
                        da[p] += gi;
                        db[q] -= gi;
                    }
                    Binary::Mul => {
                        da[p] += gi * bv[q];
                        db[q] += gi * av[p];
                    }
                    Binary::Div => {
                        da[p] += gi / bv[q];
                        db[q] -= gi * av[p] / (bv[q] * bv[q]);
                    }
                }
            }
            for (o, d) in acc(grads, *a, av.len()).iter_mut().zip(&da) {
                *o += d;
            }
            for (o, d) in acc(grads, *b, bv.len()).iter_mut().zip(&db) {
                *o += d;
            }
        }
        Op::MatMul(a, b) => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let (m, k, n) = matmul_dims(av.shape(), bv.shape()).expect("checked in forward");
            let bt = transpose_data(bv.data(), k, n);
            let at = transpose_data(av.data(), m, k);
            let mut da = vec![0.0; m * k];
            let mut db = vec![0.0; k * n];
            matmul_into(g, &bt, &mut da, m, n, k);
            matmul_into(&at, g, &mut db, k, m, n);
            for (o, d) in acc(grads, *a, m * k).iter_mut().zip(&da) {
                *o += d;
            }
            for (o, d) in acc(grads, *b, k * n).iter_mut().zip(&db) {
                *o += d;
            }
        }
        Op::Transpose(a) => {
            let (r, c) = (y.shape()[0], y.shape()[1]);
            let gt = transpose_data(g, r, c);
            for (o, d) in acc(grads, *a, g.len()).iter_mut().zip(&gt) {
                *o += d;
            }
        }
        Op::Sum(a) | Op::Mean(a) => {
            let n = nodes[*a].value.len();
            let scale = if matches!(nodes[id].op, Op::Mean(_)) {
                1.0 / n as f64
            } else {
                1.0
            };
            for o in acc(grads, *a, n).iter_mut() {
                *o += g[0] * scale;
            }
        }
        Op::SumLast(a) | Op::MeanLast(a) => {
            let x = &nodes[*a].value;
            let d = x.last_dim();
            let scale = if matches!(nodes[id].op, Op::MeanLast(_)) {
                1.0 / d as f64
            } else {
                1.0
            };
            let ga = acc(grads, *a, x.len());
            for (i, o) in ga.iter_mut().enumerate() {
                *o += g[i / d] * scale;
            }
        }
        Op::Softmax(a) => {
            let d = y.last_dim();
            let yd = y.data();
            let ga = acc(grads, *a, yd.len());
            for r in 0..yd.len() / d {
                let s = r * d..(r + 1) * d;
                let dot: f64 = g[s.clone()].iter().zip(&yd[s.clone()]).map(|(a, b)| a * b).sum();
                for i in s {
                    ga[i] += yd[i] * (g[i] - dot);
                }
            }
        }
        Op::LogSoftmax(a) => {
            let d = y.last_dim();
            let yd = y.data();
            let ga = acc(grads, *a, yd.len());
            for r in 0..yd.len() / d {
                let s = r * d..(r + 1) * d;
                let total: f64 = g[s.clone()].iter().sum();
                for i in s {
                    ga[i] += g[i] - yd[i].exp() * total;
                }
            }
        }
        Op::Concat(parts) => {
            let d_out = y.last_dim();
            let rows = y.rows();
            let mut offset = 0;
            for &p in parts {
                let d = nodes[p].value.last_dim();
                let gp = acc(grads, p, rows * d);
                for r in 0..rows {
                    for j in 0..d {
                        gp[r * d + j] += g[r * d_out + offset + j];
                    }
                }
                offset += d;
            }
        }
        Op::Slice(a, start) => {
            let x = &nodes[*a].value;
            let d_in = x.last_dim();
            let d = y.last_dim();
            let ga = acc(grads, *a, x.len());
            for r in 0..y.rows() {
                for j in 0..d {
                    ga[r * d_in + start + j] += g[r * d + j];
                }
            }
        }
        Op::Rope(a, base) => {
            let ga = acc(grads, *a, g.len());
            let back = rope_rotate(g, y.shape(), *base, -1.0);
            for (o, d) in ga.iter_mut().zip(&back) {
                *o += d;
            }
        }
    }
}

fn transpose_data(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = x[i * cols + j];
        }
    }
    out
}

const GELU_C: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    0.5 * x * (1.0 + (k * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    let t = (k * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_C * x * x)
}

/// Rotates consecutive pairs of each row `t` of a `[T, d]` buffer by
/// `sign · t · base^(−2j/d)`.
pub(crate) fn rope_rotate(x: &[f64], shape: &[usize], base: f64, sign: f64) -> Vec<f64> {
    let d = shape[shape.len() - 1];
    let rows = x.len() / d;
    let mut out = x.to_vec();
    for t in 0..rows {
        for j in 0..d / 2 {
            let theta = base.powf(-2.0 * j as f64 / d as f64);
            let (s, c) = (sign * t as f64 * theta).sin_cos();
            let (a, b) = (x[t * d + 2 * j], x[t * d + 2 * j + 1]);
            out[t * d + 2 * j] = a * c - b * s;
            out[t * d + 2 * j + 1] = a * s + b * c;
        }
    }
    out
}

fn broadcast(a: &[usize], b: &[usize]) -> Result<(Vec<usize>, IndexMap, IndexMap)> {
    if a == b {
        return Ok((a.to_vec(), None, None));
    }
    let rank = a.len().max(b.len());
    let pad = |s: &[usize]| {
        let mut v = vec![1; rank - s.len()];
        v.extend_from_slice(s);
        v
    };
    let (pa, pb) = (pad(a), pad(b));
    let mut out = Vec::with_capacity(rank);
    for (&x, &y) in pa.iter().zip(&pb) {
        out.push(match (x, y) {
            _ if x == y => x,
            (1, _) => y,
            (_, 1) => x,
            _ => return Err(Error::input(format!("shapes {a:?} and {b:?} do not broadcast"))),
        });
    }
    let strides = |s: &[usize]| {
        let mut st = vec![0; rank];
        let mut acc = 1;
        for i in (0..rank).rev() {
            st[i] = if s[i] == 1 { 0 } else { acc };
            acc *= s[i];
        }
        st
    };
    let (sa, sb) = (strides(&pa), strides(&pb));
    let total: usize = out.iter().product();
    let mut ia = Vec::with_capacity(total);
    let mut ib = Vec::with_capacity(total);
    let mut idx = vec![0; rank];
    for _ in 0..total {
        ia.push(idx.iter().zip(&sa).map(|(i, s)| i * s).sum());
        ib.push(idx.iter().zip(&sb).map(|(i, s)| i * s).sum());
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    let keep = |m: Vec<usize>, s: &[usize]| (s != out.as_slice()).then(|| Rc::new(m));
    let (ka, kb) = (keep(ia, a), keep(ib, b));
    Ok((out, ka, kb))
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Copy of the forward value (without gradient).
    pub fn value(&self) -> Tensor {
        self.tape.with(self.id, |t| {
            let mut v = t.clone();
            v.grad = None;
            v
        })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.with(self.id, |t| t.shape().to_vec())
    }

    pub fn item(&self) -> f64 {
        self.tape.with(self.id, Tensor::item)
    }

    /// Gradient left by the last [`Tape::backward`], if this node was reached.
    pub fn grad(&self) -> Option<Tensor> {
        self.tape.with(self.id, |t| {
            t.grad
                .clone()
                .map(|g| Tensor::new(t.shape(), g).expect("grad matches shape"))
        })
    }

    fn unary(self, kind: Unary, f: impl Fn(f64) -> f64) -> Var<'t> {
        let v = self.tape.with(self.id, |t| t.map(&f));
        self.tape.push(v, Op::Unary(self.id, kind))
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Unary::Exp, f64::exp)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(Unary::Ln, f64::ln)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Unary::Sin, f64::sin)
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Unary::Cos, f64::cos)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Unary::Tanh, f64::tanh)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Unary::Sigmoid, |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(Unary::Sqrt, f64::sqrt)
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Unary::Square, |x| x * x)
    }

    pub fn gelu(self) -> Var<'t> {
        self.unary(Unary::Gelu, gelu)
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let v = self.tape.with(self.id, |t| t.map(|x| x * c));
        self.tape.push(v, Op::Scale(self.id, c))
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let v = self.tape.with(self.id, |t| t.map(|x| x + c));
        self.tape.push(v, Op::AddScalar(self.id))
    }

    fn binary(self, other: Var<'t>, kind: Binary) -> Result<Var<'t>> {
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
        let (shape, ia, ib) = broadcast(a.shape(), b.shape())?;
        let n: usize = shape.iter().product();
        let f = |x: f64, y: f64| match kind {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
            Binary::Div => x / y,
        };
        let data = (0..n)
            .map(|i| {
                let p = ia.as_ref().map_or(i, |m| m[i]);
                let q = ib.as_ref().map_or(i, |m| m[i]);
                f(a.data()[p], b.data()[q])
            })
            .collect();
        let value = Tensor::new(&shape, data)?;
        drop(nodes);
        Ok(self.tape.push(value, Op::Binary(self.id, other.id, kind, ia, ib)))
    }

    /// Elementwise sum with broadcasting.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Add)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Sub)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Mul)
    }

    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Div)
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.id].value.matmul(&nodes[other.id].value)?
        };
        Ok(self.tape.push(value, Op::MatMul(self.id, other.id)))
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let value = self.tape.with(self.id, |t| match t.shape() {
            &[r, c] => Tensor::new(&[c, r], transpose_data(t.data(), r, c)),
            s => Err(Error::input(format!("transpose needs a matrix, got {s:?}"))),
        })?;
        Ok(self.tape.push(value, Op::Transpose(self.id)))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(self) -> Var<'t> {
        let v = self.tape.with(self.id, |t| t.data().iter().sum::<f64>());
        self.tape.push(Tensor::scalar(v), Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        let v = self
            .tape
            .with(self.id, |t| t.data().iter().sum::<f64>() / t.len() as f64);
        self.tape.push(Tensor::scalar(v), Op::Mean(self.id))
    }

    fn reduce_last(self, mean: bool) -> Var<'t> {
        let value = self.tape.with(self.id, |t| {
            let d = t.last_dim();
            let data = (0..t.rows())
                .map(|r| {
                    let s: f64 = t.row(r).iter().sum();
                    if mean {
                        s / d as f64
                    } else {
                        s
                    }
                })
                .collect();
            let mut shape = t.shape().to_vec();
            match shape.last_mut() {
                Some(l) => *l = 1,
                None => shape.push(1),
            }
            Tensor::new(&shape, data).expect("one value per row")
        });
        let op = if mean {
            Op::MeanLast(self.id)
        } else {
            Op::SumLast(self.id)
        };
        self.tape.push(value, op)
    }

    /// Sum over the last dimension, keeping it with size 1.
    pub fn sum_last(self) -> Var<'t> {
        self.reduce_last(false)
    }

    pub fn mean_last(self) -> Var<'t> {
        self.reduce_last(true)
    }

    fn rowwise(self, log: bool) -> Var<'t> {
        let value = self.tape.with(self.id, |t| {
            let mut data = Vec::with_capacity(t.len());
            for r in 0..t.rows() {
                let row = t.row(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = row.iter().map(|x| (x - max).exp()).sum();
                if log {
                    let lse = max + sum.ln();
                    data.extend(row.iter().map(|x| x - lse));
                } else {
                    data.extend(row.iter().map(|x| (x - max).exp() / sum));
                }
            }
            Tensor::new(t.shape(), data).expect("same shape")
        });
        let op = if log {
            Op::LogSoftmax(self.id)
        } else {
            Op::Softmax(self.id)
        };
        self.tape.push(value, op)
    }

    /// Softmax over the last dimension.
    pub fn softmax(self) -> Var<'t> {
        self.rowwise(false)
    }

    pub fn log_softmax(self) -> Var<'t> {
        self.rowwise(true)
    }

    /// Concatenates along the last dimension; leading dimensions must agree.
    pub fn concat(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| Error::input("concat of nothing"))?;
        let tape = first.tape;
        let value = {
            let nodes = tape.nodes.borrow();
            let vals: Vec<&Tensor> = parts.iter().map(|p| &nodes[p.id].value).collect();
            let lead = &vals[0].shape()[..vals[0].shape().len() - 1];
            if vals
                .iter()
                .any(|v| v.shape().is_empty() || &v.shape()[..v.shape().len() - 1] != lead)
            {
                return Err(Error::input("concat: leading dimensions differ"));
            }
            let rows = vals[0].rows();
            let width: usize = vals.iter().map(|v| v.last_dim()).sum();
            let mut data = Vec::with_capacity(rows * width);
            for r in 0..rows {
                for v in &vals {
                    data.extend_from_slice(v.row(r));
                }
            }
            let mut shape = lead.to_vec();
            shape.push(width);
            Tensor::new(&shape, data)?
        };
        Ok(tape.push(value, Op::Concat(parts.iter().map(|p| p.id).collect())))
    }

    /// Columns `start..start + len` of the last dimension.
    pub fn slice_last(self, start: usize, len: usize) -> Result<Var<'t>> {
        let value = self.tape.with(self.id, |t| {
            let d = t.last_dim();
            if t.shape().is_empty() || start + len > d {
                return Err(Error::input(format!(
                    "slice {start}..{} out of last dim {d}",
                    start + len
                )));
            }
            let data = (0..t.rows())
                .flat_map(|r| t.row(r)[start..start + len].to_vec())
                .collect();
            let mut shape = t.shape().to_vec();
            *shape.last_mut().expect("non-scalar") = len;
            Tensor::new(&shape, data)
        })?;
        Ok(self.tape.push(value, Op::Slice(self.id, start)))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.value().reshape(shape)?;
        Ok(self.tape.push(value, Op::Reshape(self.id)))
    }

    /// Rotary position embedding on a `[T, d]` matrix; row `t` is position `t`.
    pub fn rope(self, base: f64) -> Result<Var<'t>> {
        let value = self.tape.with(self.id, |t| {
            let shape = t.shape();
            if shape.len() != 2 {
                return Err(Error::input(format!("rope expects [T, d], got {shape:?}")));
            }
            if shape[1] % 2 != 0 {
                return Err(Error::Config(format!(
                    "rope needs an even feature dimension, got {}",
                    shape[1]
                )));
            }
            Tensor::new(shape, rope_rotate(t.data(), shape, base, 1.0))
        })?;
        Ok(self.tape.push(value, Op::Rope(self.id, base)))
    }
}
