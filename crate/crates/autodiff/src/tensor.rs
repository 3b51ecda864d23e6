//! Dense row-major matrices and the kernels shared by the tape and tape-free inference.

use serde::{Deserialize, Serialize};

use crate::error::{AutodiffError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(AutodiffError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn row(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    /// Stacks equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(AutodiffError::ShapeMismatch("rows have different lengths".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
    }
}

/// `op(a) · op(b)` where `op` optionally transposes; strides avoid materialising transposes.
pub fn matmul(a: &Tensor, ta: bool, b: &Tensor, tb: bool) -> Result<Tensor> {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    if k != k2 {
        return Err(AutodiffError::ShapeMismatch(format!(
            "matmul of {m}x{k} by {k2}x{n}"
        )));
    }
    if m == 0 || n == 0 || k == 0 {
        return Ok(Tensor::zeros(m, n));
    }
    if n <= NARROW {
        return Ok(matmul_narrow_output(a, ta, b, tb, m, k, n));
    }
    if k <= NARROW {
        return Ok(matmul_narrow_inner(a, ta, b, tb, m, k, n));
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    let mut data: Vec<f64> = Vec::with_capacity(m * n);
    // SAFETY: every pointer addresses a live buffer whose extent matches the given
    // dimensions and strides, and the output does not alias either input. With β = 0 the
    // kernel writes every output entry without reading it, so the buffer may start
    // uninitialised and is fully initialised afterwards.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            data.as_mut_ptr(),
            n as isize,
            1,
        );
        data.set_len(m * n);
    }
    let out = Tensor { rows: m, cols: n, data };
    Ok(out)
}

/// Inner or output width at or below which the product skips the packed kernel, whose
/// packing and edge tiles dominate for such skinny operands.
const NARROW: usize = 16;

/// `n` small: dot products against contiguous columns of `op(b)`, or row updates when `a`
/// is stored transposed.
fn matmul_narrow_output(a: &Tensor, ta: bool, b: &Tensor, tb: bool, m: usize, k: usize, n: usize) -> Tensor {
    let b_at = |p: usize, j: usize| if tb { b.data[j * b.cols + p] } else { b.data[p * b.cols + j] };
    if ta {
        // `a` is stored k×m, so its rows are the columns of op(a).
        let mut out_t = vec![0.0; n * m];
        for p in 0..k {
            let row = a.row_slice(p);
            for j in 0..n {
                let coeff = b_at(p, j);
                for (o, x) in out_t[j * m..(j + 1) * m].iter_mut().zip(row) {
                    *o += coeff * x;
                }
            }
        }
        return Tensor { rows: n, cols: m, data: out_t }.transpose();
    }
    let b_cols = if tb { None } else { Some(b.transpose()) };
    let column = |j: usize| match &b_cols {
        Some(t) => t.row_slice(j),
        None => b.row_slice(j),
    };
    let mut data = Vec::with_capacity(m * n);
    for i in 0..m {
        let row = a.row_slice(i);
        data.extend((0..n).map(|j| dot(row, column(j))));
    }
    Tensor { rows: m, cols: n, data }
}

/// Dot product with independent partial sums so the loop vectorises.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (xc, yc) = (x.chunks_exact(8), y.chunks_exact(8));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for l in 0..8 {
            acc[l] += a[l] * b[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `k` small: each output row is a combination of the contiguous rows of `op(b)`.
fn matmul_narrow_inner(a: &Tensor, ta: bool, b: &Tensor, tb: bool, m: usize, k: usize, n: usize) -> Tensor {
    let b_rows = if tb { Some(b.transpose()) } else { None };
    let b_row = |p: usize| match &b_rows {
        Some(t) => t.row_slice(p),
        None => b.row_slice(p),
    };
    let a_at = |i: usize, p: usize| if ta { a.data[p * a.cols + i] } else { a.data[i * a.cols + p] };
    let mut data = Vec::with_capacity(m * n);
    for i in 0..m {
        let first = a_at(i, 0);
        data.extend(b_row(0).iter().map(|y| first * y));
        let out = &mut data[i * n..];
        for p in 1..k {
            let coeff = a_at(i, p);
            for (o, y) in out.iter_mut().zip(b_row(p)) {
                *o += coeff * y;
            }
        }
    }
    Tensor { rows: m, cols: n, data }
}

/// Output shape of an elementwise op where either operand may have a unit dimension.
pub fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else {
            None
        }
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(AutodiffError::ShapeMismatch(format!(
            "cannot broadcast {}x{} with {}x{}",
            a.0, a.1, b.0, b.1
        ))),
    }
}

pub fn broadcast_zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    let (rows, cols) = broadcast_shape(a.shape(), b.shape())?;
    if a.shape() == b.shape() {
        let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
        return Ok(Tensor { rows, cols, data });
    }
    let mut data = Vec::with_capacity(rows * cols);
    if a.rows == rows && a.cols == cols && b.rows == 1 && b.cols == cols {
        for r in 0..rows {
            data.extend(a.row_slice(r).iter().zip(&b.data).map(|(&x, &y)| f(x, y)));
        }
    } else if a.rows == rows && a.cols == cols && b.cols == 1 && b.rows == rows {
        for r in 0..rows {
            let y = b.data[r];
            data.extend(a.row_slice(r).iter().map(|&x| f(x, y)));
        }
    } else {
        for r in 0..rows {
            let ra = if a.rows == 1 { 0 } else { r };
            let rb = if b.rows == 1 { 0 } else { r };
            for c in 0..cols {
                let ca = if a.cols == 1 { 0 } else { c };
                let cb = if b.cols == 1 { 0 } else { c };
                data.push(f(a.data[ra * a.cols + ca], b.data[rb * b.cols + cb]));
            }
        }
    }
    Ok(Tensor { rows, cols, data })
}

/// Sums `grad` down to `shape` along broadcast dimensions.
pub fn reduce_to(grad: &Tensor, shape: (usize, usize)) -> Tensor {
    if grad.shape() == shape {
        return grad.clone();
    }
    let mut out = Tensor::zeros(shape.0, shape.1);
    for r in 0..grad.rows {
        let ro = if shape.0 == 1 { 0 } else { r };
        for c in 0..grad.cols {
            let co = if shape.1 == 1 { 0 } else { c };
            out.data[ro * shape.1 + co] += grad.data[r * grad.cols + c];
        }
    }
    out
}

/// Copies `grad` up to `shape`, the inverse of [`reduce_to`] for a unit-dimension operand.
pub fn expand_to(value: &Tensor, shape: (usize, usize)) -> Tensor {
    let (rows, cols) = shape;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let src = if value.rows == 1 { 0 } else { r };
        if value.cols == 1 {
            data.extend(std::iter::repeat_n(value.data[src], cols));
        } else {
            data.extend_from_slice(value.row_slice(src));
        }
    }
    Tensor { rows, cols, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_naive_product_with_transposes() {
        let a = Tensor::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::new(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let ab = matmul(&a, false, &b, false).unwrap();
        assert_eq!(ab.data, vec![58.0, 64.0, 139.0, 154.0]);
        let at_bt = matmul(&a.transpose(), true, &b.transpose(), true).unwrap();
        assert_eq!(at_bt, ab);
        assert!(matmul(&a, false, &a, false).is_err());
    }

    #[test]
    fn every_matmul_path_matches_a_triple_loop() {
        let fill = |rows: usize, cols: usize, salt: usize| {
            let data = (0..rows * cols).map(|i| ((i * 7 + salt * 13) % 11) as f64 - 5.0).collect();
            Tensor::new(rows, cols, data).unwrap()
        };
        for &(m, k, n) in &[(5, 3, 40), (40, 3, 5), (40, 30, 2), (3, 40, 1), (20, 20, 20), (1, 1, 1)] {
            let a = fill(m, k, 1);
            let b = fill(k, n, 2);
            let mut expected = Tensor::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    expected.data[i * n + j] = (0..k).map(|p| a.get(i, p) * b.get(p, j)).sum();
                }
            }
            for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
                let lhs = if ta { a.transpose() } else { a.clone() };
                let rhs = if tb { b.transpose() } else { b.clone() };
                assert_eq!(matmul(&lhs, ta, &rhs, tb).unwrap(), expected, "{m}x{k}x{n} {ta} {tb}");
            }
        }
    }

    #[test]
    fn broadcasting_rows_and_columns() {
        let a = Tensor::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let row = Tensor::row(&[10.0, 20.0]);
        let col = Tensor::new(2, 1, vec![100.0, 200.0]).unwrap();
        assert_eq!(broadcast_zip(&a, &row, |x, y| x + y).unwrap().data, vec![11.0, 22.0, 13.0, 24.0]);
        assert_eq!(broadcast_zip(&col, &a, |x, y| x + y).unwrap().data, vec![101.0, 102.0, 203.0, 204.0]);
        assert_eq!(reduce_to(&a, (1, 2)).data, vec![4.0, 6.0]);
        assert_eq!(reduce_to(&a, (2, 1)).data, vec![3.0, 7.0]);
        assert_eq!(reduce_to(&a, (1, 1)).data, vec![10.0]);
        assert!(broadcast_shape((2, 3), (3, 2)).is_err());
    }
}
