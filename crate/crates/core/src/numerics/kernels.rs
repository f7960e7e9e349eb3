//! Forward kernels on plain tensors. The tape calls these and adds the
//! matching adjoints; they are also usable on their own for inference.

use super::tensor::Tensor;
use crate::error::{shape_err, Result};

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(shape_err(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `a^T b`
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (k, m) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(shape_err(
            "matmul_tn",
            format!("{:?}^T x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for p in 0..k {
        let brow = &bd[p * n..(p + 1) * n];
        for i in 0..m {
            let av = ad[p * m + i];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// `a b^T`
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (n, k2) = b.dims2()?;
    if k != k2 {
        return Err(shape_err(
            "matmul_nt",
            format!("{:?} x {:?}^T", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &bd[j * k..(j + 1) * k];
            out[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a.data()[i * c + j];
        }
    }
    Tensor::new(vec![c, r], out)
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("add", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("mul", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Adds a `1 x n` row to every row of `a`.
pub fn add_row(a: &Tensor, row: &Tensor) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    if row.shape() != [1, c] {
        return Err(shape_err(
            "add_row",
            format!("{:?} + row {:?}", a.shape(), row.shape()),
        ));
    }
    let mut out = a.clone();
    for i in 0..r {
        for (o, b) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(row.data()) {
            *o += b;
        }
    }
    Ok(out)
}

/// Multiplies every row of `a` elementwise by a `1 x n` row.
pub fn mul_row(a: &Tensor, row: &Tensor) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    if row.shape() != [1, c] {
        return Err(shape_err(
            "mul_row",
            format!("{:?} * row {:?}", a.shape(), row.shape()),
        ));
    }
    let mut out = a.clone();
    for i in 0..r {
        for (o, b) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(row.data()) {
            *o *= b;
        }
    }
    Ok(out)
}

pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    let rows = parts.first().map_or(Ok(0), |p| p.dims2().map(|d| d.0))?;
    let mut total = 0;
    for p in parts {
        let (r, c) = p.dims2()?;
        if r != rows {
            return Err(shape_err(
                "concat_cols",
                format!("row counts {} and {}", rows, r),
            ));
        }
        total += c;
    }
    let mut out = Vec::with_capacity(rows * total);
    for i in 0..rows {
        for p in parts {
            out.extend_from_slice(p.row_slice(i));
        }
    }
    Tensor::new(vec![rows, total], out)
}

pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
    let cols = parts.first().map_or(Ok(0), |p| p.dims2().map(|d| d.1))?;
    let mut rows = 0;
    let mut out = Vec::new();
    for p in parts {
        let (r, c) = p.dims2()?;
        if c != cols {
            return Err(shape_err(
                "concat_rows",
                format!("column counts {} and {}", cols, c),
            ));
        }
        rows += r;
        out.extend_from_slice(p.data());
    }
    Tensor::new(vec![rows, cols], out)
}

pub fn slice_cols(a: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    if start > end || end > c {
        return Err(shape_err(
            "slice_cols",
            format!("[{}, {}) of {:?}", start, end, a.shape()),
        ));
    }
    let mut out = Vec::with_capacity(r * (end - start));
    for i in 0..r {
        out.extend_from_slice(&a.row_slice(i)[start..end]);
    }
    Tensor::new(vec![r, end - start], out)
}

pub fn gather_rows(a: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    let mut out = Vec::with_capacity(idx.len() * c);
    for &i in idx {
        if i >= r {
            return Err(shape_err(
                "gather_rows",
                format!("row {} of {:?}", i, a.shape()),
            ));
        }
        out.extend_from_slice(a.row_slice(i));
    }
    Tensor::new(vec![idx.len(), c], out)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Numerically stable `ln(sum(exp(xs)))`. Empty input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax_rows(a: &Tensor) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    let mut out = a.clone();
    for i in 0..r {
        let row = &mut out.data_mut()[i * c..(i + 1) * c];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    Ok(out)
}

pub fn log_softmax_rows(a: &Tensor) -> Result<Tensor> {
    let (r, c) = a.dims2()?;
    let mut out = a.clone();
    for i in 0..r {
        let row = &mut out.data_mut()[i * c..(i + 1) * c];
        let lse = log_sum_exp(row);
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    Ok(out)
}

/// Row-wise log-sum-exp, giving an `r x 1` column.
pub fn log_sum_exp_rows(a: &Tensor) -> Result<Tensor> {
    let (r, _) = a.dims2()?;
    let data = (0..r).map(|i| log_sum_exp(a.row_slice(i))).collect();
    Tensor::new(vec![r, 1], data)
}

/// Row-wise standardization (no affine part). Returns the normalized
/// tensor and the per-row inverse standard deviations.
pub fn layer_norm_rows(a: &Tensor, eps: f64) -> Result<(Tensor, Vec<f64>)> {
    let (r, c) = a.dims2()?;
    let mut out = a.clone();
    let mut inv_std = Vec::with_capacity(r);
    for i in 0..r {
        let row = &mut out.data_mut()[i * c..(i + 1) * c];
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let is = 1.0 / (var + eps).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) * is;
        }
        inv_std.push(is);
    }
    Ok((out, inv_std))
}
