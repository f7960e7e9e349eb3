//! Reverse-mode differentiation over a linear record of operations.
//!
//! A [`Tape`] lives for one forward/backward pass. Parameters enter through
//! [`Tape::param`], which snapshots their current value; [`Tape::backward`]
//! returns one gradient per parameter in the store.

use std::collections::HashMap;

use rand::Rng;

use super::kernels;
use super::params::{Gradients, ParamId, ParamStore};
use super::rng::StreamRng;
use super::tensor::Tensor;
use crate::error::{shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    Transpose(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LogSumExpRows(Var),
    LayerNorm(Var, Vec<f64>),
    Dropout(Var, Vec<f64>),
    Sum(Var),
    PickSum(Var, Vec<(usize, usize)>),
    /// Scalar output with caller-supplied partials w.r.t. each input.
    ScalarCustom(Vec<(Var, Tensor)>),
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    mode: Mode,
    rng: Option<StreamRng>,
}

impl Tape {
    /// Evaluation tape: dropout is the identity.
    pub fn eval() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            mode: Mode::Eval,
            rng: None,
        }
    }

    /// Training tape; dropout masks are drawn from `rng`.
    pub fn train(rng: StreamRng) -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            mode: Mode::Train,
            rng: Some(rng),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = kernels::matmul(self.value(a), self.value(b))?;
        Ok(self.push(y, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = kernels::add(self.value(a), self.value(b))?;
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.value(b).map(|v| -v);
        let y = kernels::add(self.value(a), &nb)?;
        Ok(self.push(y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = kernels::mul(self.value(a), self.value(b))?;
        Ok(self.push(y, Op::Mul(a, b)))
    }

    /// `a + row`, broadcasting a `1 x n` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let y = kernels::add_row(self.value(a), self.value(row))?;
        Ok(self.push(y, Op::AddRow(a, row)))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let y = kernels::mul_row(self.value(a), self.value(row))?;
        Ok(self.push(y, Op::MulRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let y = self.value(a).map(|v| v * c);
        self.push(y, Op::Scale(a, c))
    }

    /// Adds a non-trainable tensor (e.g. an attention mask).
    pub fn add_const(&mut self, a: Var, c: &Tensor) -> Result<Var> {
        let y = kernels::add(self.value(a), c)?;
        Ok(self.push(y, Op::AddConst(a)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.value(a).map(f64::tanh);
        self.push(y, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let y = self.value(a).map(kernels::sigmoid);
        self.push(y, Op::Sigmoid(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let y = self.value(a).map(kernels::gelu);
        self.push(y, Op::Gelu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let ts: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = kernels::concat_cols(&ts)?;
        Ok(self.push(y, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let ts: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = kernels::concat_rows(&ts)?;
        Ok(self.push(y, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let y = kernels::slice_cols(self.value(a), start, end)?;
        Ok(self.push(y, Op::SliceCols(a, start)))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = t.dims2()?;
        if start > end || end > r {
            return Err(shape_err(
                "slice_rows",
                format!("[{}, {}) of {:?}", start, end, t.shape()),
            ));
        }
        let y = Tensor::new(vec![end - start, c], t.data()[start * c..end * c].to_vec())?;
        Ok(self.push(y, Op::SliceRows(a, start)))
    }

    /// Row lookup; this is the embedding kernel.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let y = kernels::gather_rows(self.value(a), idx)?;
        Ok(self.push(y, Op::GatherRows(a, idx.to_vec())))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let y = kernels::transpose(self.value(a))?;
        Ok(self.push(y, Op::Transpose(a)))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let y = kernels::softmax_rows(self.value(a))?;
        Ok(self.push(y, Op::Softmax(a)))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let y = kernels::log_softmax_rows(self.value(a))?;
        Ok(self.push(y, Op::LogSoftmax(a)))
    }

    pub fn log_sum_exp_rows(&mut self, a: Var) -> Result<Var> {
        let y = kernels::log_sum_exp_rows(self.value(a))?;
        Ok(self.push(y, Op::LogSumExpRows(a)))
    }

    /// Row standardization without the affine part.
    pub fn layer_norm_rows(&mut self, a: Var, eps: f64) -> Result<Var> {
        let (y, inv_std) = kernels::layer_norm_rows(self.value(a), eps)?;
        Ok(self.push(y, Op::LayerNorm(a, inv_std)))
    }

    /// Inverted dropout: in training, zeroes each entry with probability `p`
    /// and scales survivors by `1 / (1 - p)`. Identity in eval mode.
    pub fn dropout(&mut self, a: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("dropout p = {p}")));
        }
        if self.mode == Mode::Eval || p == 0.0 {
            return Ok(a);
        }
        let n = self.value(a).len();
        let keep = 1.0 / (1.0 - p);
        let rng = self.rng.as_mut().expect("training tape has an rng");
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let x = self.value(a);
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let y = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(y, Op::Dropout(a, mask)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Sum of selected `(row, col)` entries.
    pub fn pick_sum(&mut self, a: Var, picks: &[(usize, usize)]) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = t.dims2()?;
        let mut s = 0.0;
        for &(i, j) in picks {
            if i >= r || j >= c {
                return Err(shape_err(
                    "pick_sum",
                    format!("({i}, {j}) of {:?}", t.shape()),
                ));
            }
            s += t.get(i, j);
        }
        Ok(self.push(Tensor::scalar(s), Op::PickSum(a, picks.to_vec())))
    }

    /// Records a scalar computed outside the tape together with its partial
    /// derivatives w.r.t. each input.
    pub fn scalar_custom(&mut self, value: f64, partials: Vec<(Var, Tensor)>) -> Result<Var> {
        for (v, g) in &partials {
            if g.shape() != self.value(*v).shape() {
                return Err(shape_err(
                    "scalar_custom",
                    format!("partial {:?} for input {:?}", g.shape(), self.value(*v).shape()),
                ));
            }
        }
        Ok(self.push(Tensor::scalar(value), Op::ScalarCustom(partials)))
    }

    /// Gradient of the scalar `loss` w.r.t. every parameter in `store`.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidArgument(
                "backward called before any forward operation".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(shape_err(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::zeros_like(store);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.accumulate(*id, &g),
                Op::MatMul(a, b) => {
                    let ga = kernels::matmul_nt(&g, self.value(*b))?;
                    let gb = kernels::matmul_tn(self.value(*a), &g)?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|v| -v));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = kernels::mul(&g, self.value(*b))?;
                    let gb = kernels::mul(&g, self.value(*a))?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, col_sums(&g)?);
                    acc(&mut grads, *a, g);
                }
                Op::MulRow(a, row) => {
                    let ga = kernels::mul_row(&g, self.value(*row))?;
                    let prod = kernels::mul(&g, self.value(*a))?;
                    acc(&mut grads, *row, col_sums(&prod)?);
                    acc(&mut grads, *a, ga);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g.map(|v| v * c)),
                Op::AddConst(a) => acc(&mut grads, *a, g),
                Op::Tanh(a) => {
                    let d = zip_map(&g, y, |g, y| g * (1.0 - y * y));
                    acc(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = zip_map(&g, y, |g, y| g * y * (1.0 - y));
                    acc(&mut grads, *a, d);
                }
                Op::Gelu(a) => {
                    let d = zip_map(&g, self.value(*a), |g, x| g * kernels::gelu_grad(x));
                    acc(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        acc(&mut grads, *p, kernels::slice_cols(&g, start, start + w)?);
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let c = g.cols();
                    let mut start = 0;
                    for p in parts {
                        let r = self.value(*p).rows();
                        let part = Tensor::new(
                            vec![r, c],
                            g.data()[start * c..(start + r) * c].to_vec(),
                        )?;
                        acc(&mut grads, *p, part);
                        start += r;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(src.rows(), src.cols());
                    let w = g.cols();
                    for i in 0..g.rows() {
                        for j in 0..w {
                            d.set(i, start + j, g.get(i, j));
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SliceRows(a, start) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(src.rows(), src.cols());
                    let c = src.cols();
                    d.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    acc(&mut grads, *a, d);
                }
                Op::GatherRows(a, idx) => {
                    let src = self.value(*a);
                    let c = src.cols();
                    let mut d = Tensor::zeros(src.rows(), c);
                    for (k, &i) in idx.iter().enumerate() {
                        for j in 0..c {
                            d.data_mut()[i * c + j] += g.data()[k * c + j];
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Transpose(a) => acc(&mut grads, *a, kernels::transpose(&g)?),
                Op::Softmax(a) => {
                    let (r, c) = y.dims2()?;
                    let mut d = Tensor::zeros(r, c);
                    for i in 0..r {
                        let (yr, gr) = (y.row_slice(i), g.row_slice(i));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            d.set(i, j, yr[j] * (gr[j] - dot));
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::LogSoftmax(a) => {
                    let (r, c) = y.dims2()?;
                    let mut d = Tensor::zeros(r, c);
                    for i in 0..r {
                        let (yr, gr) = (y.row_slice(i), g.row_slice(i));
                        let gs: f64 = gr.iter().sum();
                        for j in 0..c {
                            d.set(i, j, gr[j] - yr[j].exp() * gs);
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::LogSumExpRows(a) => {
                    let x = self.value(*a);
                    let (r, c) = x.dims2()?;
                    let mut d = Tensor::zeros(r, c);
                    for i in 0..r {
                        for j in 0..c {
                            d.set(i, j, g.get(i, 0) * (x.get(i, j) - y.get(i, 0)).exp());
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::LayerNorm(a, inv_std) => {
                    let (r, c) = y.dims2()?;
                    let n = c as f64;
                    let mut d = Tensor::zeros(r, c);
                    for i in 0..r {
                        let (yr, gr) = (y.row_slice(i), g.row_slice(i));
                        let gs: f64 = gr.iter().sum();
                        let gy: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            d.set(i, j, inv_std[i] / n * (n * gr[j] - gs - yr[j] * gy));
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::Dropout(a, mask) => {
                    let data = g.data().iter().zip(mask).map(|(g, m)| g * m).collect();
                    acc(&mut grads, *a, Tensor::new(g.shape().to_vec(), data)?);
                }
                Op::Sum(a) => {
                    let src = self.value(*a);
                    let d = Tensor::new(src.shape().to_vec(), vec![g.data()[0]; src.len()])?;
                    acc(&mut grads, *a, d);
                }
                Op::PickSum(a, picks) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(src.rows(), src.cols());
                    for &(i, j) in picks {
                        let cur = d.get(i, j);
                        d.set(i, j, cur + g.data()[0]);
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ScalarCustom(partials) => {
                    let s = g.data()[0];
                    for (v, p) in partials {
                        acc(&mut grads, *v, p.map(|x| x * s));
                    }
                }
            }
        }
        Ok(out)
    }
}

fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn col_sums(g: &Tensor) -> Result<Tensor> {
    let (r, c) = g.dims2()?;
    let mut s = vec![0.0; c];
    for i in 0..r {
        for (acc, v) in s.iter_mut().zip(g.row_slice(i)) {
            *acc += v;
        }
    }
    Tensor::new(vec![1, c], s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(t: Tensor) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("p", t).unwrap();
        (s, id)
    }

    #[test]
    fn sum_gives_ones() {
        let (store, id) = store_with(Tensor::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.5]]).unwrap());
        let mut tape = Tape::eval();
        let p = tape.param(&store, id);
        let loss = tape.sum(p);
        let g = tape.backward(loss, &store).unwrap();
        assert_eq!(g.get(id).data(), &[1.0; 4]);
    }

    #[test]
    fn tanh_slope_at_zero() {
        let (store, id) = store_with(Tensor::scalar(0.0));
        let mut tape = Tape::eval();
        let p = tape.param(&store, id);
        let t = tape.tanh(p);
        let g = tape.backward(t, &store).unwrap();
        assert_eq!(g.get(id).data(), &[1.0]);
    }

    #[test]
    fn unused_param_gets_zero_gradient() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::row(&[2.0])).unwrap();
        let b = store.add("b", Tensor::row(&[5.0, 6.0])).unwrap();
        let mut tape = Tape::eval();
        let pa = tape.param(&store, a);
        let sq = tape.mul(pa, pa).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss, &store).unwrap();
        assert_eq!(g.get(a).data(), &[4.0]);
        assert_eq!(g.get(b).data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_on_empty_tape_fails() {
        let store = ParamStore::new();
        let tape = Tape::eval();
        assert!(tape.backward(Var(0), &store).is_err());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let (store, id) = store_with(Tensor::row(&[1.0, 2.0]));
        let mut tape = Tape::eval();
        let p = tape.param(&store, id);
        assert!(tape.backward(p, &store).is_err());
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut tape = Tape::train(super::super::rng::stream(3, "d"));
        let x = tape.constant(Tensor::filled(1, 1000, 1.0));
        let y = tape.dropout(x, 0.25).unwrap();
        let vals = tape.value(y).data();
        assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
        let kept = vals.iter().filter(|&&v| v > 0.0).count();
        assert!((650..850).contains(&kept), "{kept}");

        let mut eval = Tape::eval();
        let x = eval.constant(Tensor::filled(1, 4, 1.0));
        let y = eval.dropout(x, 0.25).unwrap();
        assert_eq!(x, y);
    }
}
