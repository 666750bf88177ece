//! Dense K-mode tensors and the multilinear primitives everything else is
//! built on: unfolding, mode products, inner products and Kronecker chains.
//!
//! Storage follows one canonical linearization: the mode-1 index varies
//! fastest (column-major over modes), so the flat offset of the 0-based
//! multi-index `(i_1, …, i_K)` is `Σ_k i_k · stride_k` with `stride_1 = 1`
//! and `stride_k = I_1 · … · I_{k-1}`. The mode-k unfolding maps entry
//! `(i_1, …, i_K)` to row `i_k` and column `j = Σ_{q≠k} i_q · J_q`,
//! `J_q = ∏_{m<q, m≠k} I_m`, which makes the mode-1 unfolding a plain
//! reshape of the buffer. The same linearization is what the PTEN file
//! format stores on disk.

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
///
/// This is the carrier for unfoldings, Gram matrices and factor updates. It
/// is immutable after construction as far as the public API is concerned;
/// all operations return new matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::arg(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self · rhs`. Panics on inner-dimension mismatch; shape checking for
    /// user-facing operations happens at the tensor level.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimensions");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        gemm(
            self.rows, self.cols, rhs.cols,
            &self.data, self.cols as isize, 1,
            &rhs.data, rhs.cols as isize, 1,
            &mut out.data,
        );
        out
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "matmul_nt inner dimensions");
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        gemm(
            self.rows, self.cols, rhs.rows,
            &self.data, self.cols as isize, 1,
            &rhs.data, 1, rhs.cols as isize,
            &mut out.data,
        );
        out
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn matmul_tn(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "matmul_tn inner dimensions");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        gemm(
            self.cols, self.rows, rhs.cols,
            &self.data, 1, self.cols as isize,
            &rhs.data, rhs.cols as isize, 1,
            &mut out.data,
        );
        out
    }

    /// Gram matrix `self · selfᵀ`.
    pub fn gram(&self) -> Matrix {
        self.matmul_nt(self)
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * alpha).collect(),
        }
    }

    /// `self + alpha · other`, shapes must agree.
    pub fn add_scaled(&self, alpha: f64, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// In-place `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                if a == 0.0 {
                    continue;
                }
                for r in 0..other.rows {
                    let dst = (i * other.rows + r) * cols + j * other.cols;
                    let src = r * other.cols;
                    for s in 0..other.cols {
                        out.data[dst + s] = a * other.data[src + s];
                    }
                }
            }
        }
        out
    }
}

/// Row-major gemm helper over `matrixmultiply`, tolerant of empty operands.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize, k: usize, n: usize,
    a: &[f64], rsa: isize, csa: isize,
    b: &[f64], rsb: isize, csb: isize,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.fill(0.0);
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m, k, n,
            1.0, a.as_ptr(), rsa, csa,
            b.as_ptr(), rsb, csb,
            0.0, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Kronecker product accumulated left-to-right over `ms`.
///
/// Only used by tests, metrics and the clustering head; the fitting loop
/// works with sequential mode products instead of materialized chains.
pub fn kron_chain(ms: &[&Matrix]) -> Result<Matrix> {
    let (first, rest) = ms
        .split_first()
        .ok_or_else(|| Error::arg("kron_chain of an empty list"))?;
    let mut acc = (*first).clone();
    for m in rest {
        acc = acc.kron(m);
    }
    Ok(acc)
}

/// Dense K-mode tensor of `f64` in the canonical linearization.
///
/// Invariants enforced at construction: at least one mode, data length equal
/// to the product of the dimensions, and all entries finite. Zero-length
/// modes are allowed; they show up as the cores and factors of rank-0 local
/// components and behave like empty sums everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::arg("tensor must have at least one mode"));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::arg(format!(
                "tensor data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tensor entries must be finite".into()));
        }
        Ok(Tensor { dims, data })
    }

    /// Internal constructor for results of arithmetic on already-validated
    /// tensors; skips the finiteness scan.
    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Tensor { dims, data }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Tensor {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::arg(format!(
                "mode {} out of range for a {}-mode tensor",
                mode,
                self.dims.len()
            )));
        }
        Ok(())
    }

    /// Mode-k unfolding as an `I_k × ∏_{q≠k} I_q` matrix.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let ik = self.dims[mode];
        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        let cols = left * right;
        let mut m = Matrix::zeros(ik, cols);
        // offset = l + i_k·left + r·left·I_k ; column = l + r·left
        for r in 0..right {
            for i in 0..ik {
                let src = (r * ik + i) * left;
                let dst = i * cols + r * left;
                m.data[dst..dst + left].copy_from_slice(&self.data[src..src + left]);
            }
        }
        Ok(m)
    }

    /// Inverse of [`Tensor::unfold`]; bit-exact round trip.
    pub fn fold(m: &Matrix, dims: &[usize], mode: usize) -> Result<Tensor> {
        if mode >= dims.len() {
            return Err(Error::arg(format!(
                "mode {} out of range for dims {:?}",
                mode, dims
            )));
        }
        let ik = dims[mode];
        let left: usize = dims[..mode].iter().product();
        let right: usize = dims[mode + 1..].iter().product();
        if m.rows() != ik || m.cols() != left * right {
            return Err(Error::arg(format!(
                "matrix {}x{} does not match mode-{} unfolding of dims {:?}",
                m.rows(),
                m.cols(),
                mode,
                dims
            )));
        }
        let mut data = vec![0.0; left * ik * right];
        let cols = m.cols();
        for r in 0..right {
            for i in 0..ik {
                let dst = (r * ik + i) * left;
                let src = i * cols + r * left;
                data[dst..dst + left].copy_from_slice(&m.data[src..src + left]);
            }
        }
        Ok(Tensor::from_parts(dims.to_vec(), data))
    }

    /// Mode-k product with `v` (`v.cols` must equal `I_k`); mode k of the
    /// result has `v.rows` entries.
    pub fn mode_product(&self, v: &Matrix, mode: usize) -> Result<Tensor> {
        self.check_mode(mode)?;
        if v.cols() != self.dims[mode] {
            return Err(Error::arg(format!(
                "mode-{} product needs a matrix with {} columns, got {}",
                mode, self.dims[mode], v.cols()
            )));
        }
        let unfolded = self.unfold(mode)?;
        let prod = v.matmul(&unfolded);
        let mut dims = self.dims.clone();
        dims[mode] = v.rows();
        Tensor::fold(&prod, &dims, mode)
    }

    /// Sequential mode products along distinct modes.
    pub fn multi_mode_product(&self, factors: &[(&Matrix, usize)]) -> Result<Tensor> {
        let mut seen = vec![false; self.dims.len()];
        for (_, mode) in factors {
            self.check_mode(*mode)?;
            if seen[*mode] {
                return Err(Error::arg(format!("repeated mode {} in product", mode)));
            }
            seen[*mode] = true;
        }
        let mut acc = self.clone();
        for (m, mode) in factors {
            acc = acc.mode_product(m, *mode)?;
        }
        Ok(acc)
    }

    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::arg(format!(
                "inner product dims mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        if self.dims != other.dims {
            return Err(Error::arg("subtraction dims mismatch".to_string()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor::from_parts(self.dims.clone(), data))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.dims != other.dims {
            return Err(Error::arg("addition dims mismatch".to_string()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor::from_parts(self.dims.clone(), data))
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        Tensor::from_parts(self.dims.clone(), self.data.iter().map(|v| v * alpha).collect())
    }

    /// Concatenate along the last mode. Because the last mode varies slowest
    /// in the canonical linearization this is a buffer concatenation.
    pub fn concat_last(tensors: &[&Tensor]) -> Result<Tensor> {
        let (first, rest) = tensors
            .split_first()
            .ok_or_else(|| Error::arg("concat of an empty list"))?;
        let lead = &first.dims[..first.dims.len() - 1];
        let mut last = first.dims[first.dims.len() - 1];
        for t in rest {
            if t.dims.len() != first.dims.len() || &t.dims[..t.dims.len() - 1] != lead {
                return Err(Error::arg("concat requires matching leading dims"));
            }
            last += t.dims[t.dims.len() - 1];
        }
        let mut dims = lead.to_vec();
        dims.push(last);
        let mut data = Vec::with_capacity(dims.iter().product());
        for t in tensors {
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor::from_parts(dims, data))
    }

    /// Slice `index` of the last mode, dropping that mode.
    pub fn slice_last(&self, index: usize) -> Result<Tensor> {
        let k = self.dims.len();
        if k < 2 {
            return Err(Error::arg("slice_last needs at least two modes"));
        }
        let last = self.dims[k - 1];
        if index >= last {
            return Err(Error::arg(format!(
                "slice index {} out of range for last dim {}",
                index, last
            )));
        }
        let chunk: usize = self.dims[..k - 1].iter().product();
        let data = self.data[index * chunk..(index + 1) * chunk].to_vec();
        Ok(Tensor::from_parts(self.dims[..k - 1].to_vec(), data))
    }

    /// Stack K-mode tensors of identical dims into a (K+1)-mode tensor whose
    /// last mode indexes the inputs.
    pub fn stack_last(tensors: &[&Tensor]) -> Result<Tensor> {
        let (first, rest) = tensors
            .split_first()
            .ok_or_else(|| Error::arg("stack of an empty list"))?;
        for t in rest {
            if t.dims != first.dims {
                return Err(Error::arg("stack requires identical dims"));
            }
        }
        let mut dims = first.dims.clone();
        dims.push(tensors.len());
        let mut data = Vec::with_capacity(dims.iter().product());
        for t in tensors {
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor::from_parts(dims, data))
    }

    /// Drop a trailing mode of length 1.
    pub fn squeeze_last(&self) -> Result<Tensor> {
        let k = self.dims.len();
        if k < 2 || self.dims[k - 1] != 1 {
            return Err(Error::arg("squeeze_last requires a trailing dim of 1"));
        }
        Ok(Tensor::from_parts(
            self.dims[..k - 1].to_vec(),
            self.data.clone(),
        ))
    }
}
