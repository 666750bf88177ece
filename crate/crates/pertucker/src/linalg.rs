//! Symmetric eigendecomposition, orthonormalization, projections and
//! subspace distances. Every factor update in the solver reduces to
//! [`top_eigvecs`] on some Gram matrix.
//!
//! Outputs are deterministic: eigenpairs are sorted by nonincreasing
//! eigenvalue with a stable tie order, and every returned basis column is
//! sign-fixed so that its largest-magnitude entry is positive (lowest index
//! wins ties). Degenerate spectra still give a well-defined matrix, but only
//! residual/trace contracts are meaningful there, not the basis itself.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Tolerance on ‖UᵀU − I‖_F for a matrix to count as column-orthonormal.
pub const ORTHO_TOL: f64 = 1e-10;

/// Column-orthonormal matrix spanning a mode subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    m: Matrix,
}

impl FactorMatrix {
    /// Validates `cols ≤ rows` and ‖UᵀU − I‖_F ≤ 1e-10.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.cols() > m.rows() {
            return Err(Error::arg(format!(
                "factor matrix must be tall: {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let f = FactorMatrix { m };
        let res = f.orthonormality_residual();
        if !res.is_finite() || res > ORTHO_TOL {
            return Err(Error::arg(format!(
                "matrix is not column-orthonormal (residual {:.3e})",
                res
            )));
        }
        Ok(f)
    }

    /// First `cols` columns of the identity.
    pub fn identity(rows: usize, cols: usize) -> Result<Self> {
        if cols > rows {
            return Err(Error::arg("identity factor needs cols <= rows"));
        }
        let m = Matrix::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 });
        Ok(FactorMatrix { m })
    }

    /// Factor with zero columns (a rank-0 subspace).
    pub fn empty(rows: usize) -> Self {
        FactorMatrix {
            m: Matrix::zeros(rows, 0),
        }
    }

    pub fn rows(&self) -> usize {
        self.m.rows()
    }

    pub fn cols(&self) -> usize {
        self.m.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    /// Transposed copy, the `Uᵀ` used to project tensors onto the subspace.
    pub fn t(&self) -> Matrix {
        self.m.transpose()
    }

    /// Orthogonal projector U·Uᵀ. Used by tests and metrics; the solver works
    /// with the factors directly.
    pub fn projector(&self) -> Matrix {
        self.m.matmul_nt(&self.m)
    }

    pub fn orthonormality_residual(&self) -> f64 {
        let g = self.m.matmul_tn(&self.m);
        let mut res = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                let d = g.get(i, j) - expect;
                res += d * d;
            }
        }
        res.sqrt()
    }
}

/// Top-`r` eigenpairs of a symmetric matrix, eigenvalues in nonincreasing
/// order. The input is symmetrized as (S+Sᵀ)/2 before decomposition since
/// accumulated Gram matrices drift slightly from symmetry.
pub fn top_eigvecs(s: &Matrix, r: usize) -> Result<(FactorMatrix, Vec<f64>)> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::arg(format!("matrix {}x{} is not square", n, s.cols())));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    if r == 0 || r > n {
        return Err(Error::arg(format!(
            "requested rank {} out of range 1..={}",
            r, n
        )));
    }
    let scale = s.max_abs().max(1.0);
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if asym > 1e-8 * scale {
        return Err(Error::arg(format!(
            "matrix is not symmetric (max asymmetry {:.3e})",
            asym
        )));
    }

    let mut dm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            dm[(i, j)] = 0.5 * (s.get(i, j) + s.get(j, i));
        }
    }
    let eig = dm.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the solver's original order on exact ties
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut basis = Matrix::zeros(n, r);
    let mut values = Vec::with_capacity(r);
    for (col, &idx) in order[..r].iter().enumerate() {
        values.push(eig.eigenvalues[idx]);
        let v = eig.eigenvectors.column(idx);
        // sign convention: largest-magnitude entry positive, lowest index wins
        let mut pivot = 0;
        let mut best = v[0].abs();
        for (i, &x) in v.iter().enumerate().skip(1) {
            if x.abs() > best {
                best = x.abs();
                pivot = i;
            }
        }
        let flip = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            basis.set(i, col, flip * v[i]);
        }
    }
    Ok((FactorMatrix::new(basis)?, values))
}

/// Squared Frobenius distance between the orthogonal projectors of two
/// subspaces, ‖UUᵀ − VVᵀ‖_F².
///
/// For orthonormal inputs this equals r_U + r_V − 2‖UᵀV‖_F², which is what
/// is evaluated here; with equal column counts r it reduces to
/// 2r − 2·Tr(UᵀVVᵀU). Note the constant is the *column* count: the trace of
/// UᵀU·UᵀU is the r×r identity's, regardless of the ambient dimension.
pub fn subspace_error(u: &FactorMatrix, v: &FactorMatrix) -> Result<f64> {
    if u.rows() != v.rows() {
        return Err(Error::arg(format!(
            "ambient dimension mismatch: {} vs {}",
            u.rows(),
            v.rows()
        )));
    }
    let cross = u.matrix().matmul_tn(v.matrix());
    let val = u.cols() as f64 + v.cols() as f64 - 2.0 * cross.frob_norm_sq();
    Ok(val.max(0.0))
}

/// (I − UUᵀ) · S · (I − UUᵀ): restriction of a symmetric matrix to the
/// orthogonal complement of span(U). Eigenvectors of the result for nonzero
/// eigenvalues satisfy Uᵀx = 0.
pub fn project_out(s: &Matrix, u: &FactorMatrix) -> Result<Matrix> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::arg("project_out needs a square matrix"));
    }
    if u.rows() != n {
        return Err(Error::arg(format!(
            "projector ambient dimension {} does not match matrix {}",
            u.rows(),
            n
        )));
    }
    if u.cols() == 0 {
        return Ok(s.clone());
    }
    // P = I - UUᵀ applied from both sides
    let mut p = Matrix::identity(n);
    p.axpy(-1.0, &u.projector());
    Ok(p.matmul(&s.matmul(&p)))
}

/// Top-`r` eigenpairs of (I − UUᵀ)·S·(I − UUᵀ) restricted to span(U)⊥, the
/// solution of the orthogonality-constrained trace maximization
/// max Tr(VᵀSV) s.t. VᵀV = I, VᵀU = 0.
///
/// Plain `top_eigvecs(project_out(s, u), r)` is the same thing whenever the
/// r-th complement eigenvalue is positive, but its zero eigenspace contains
/// span(U) itself, so with a deficient or indefinite spectrum the returned
/// basis may leak into span(U). Shifting span(U) below the complement
/// spectrum keeps every selected eigenvector feasible.
pub fn top_eigvecs_orthogonal_to(
    s: &Matrix,
    u: &FactorMatrix,
    r: usize,
) -> Result<(FactorMatrix, Vec<f64>)> {
    if r + u.cols() > s.rows() {
        return Err(Error::arg(format!(
            "no rank-{} subspace orthogonal to {} columns in dimension {}",
            r,
            u.cols(),
            s.rows()
        )));
    }
    let sp = project_out(s, u)?;
    if u.cols() == 0 {
        return top_eigvecs(&sp, r);
    }
    let shift = sp.frob_norm() + 1.0;
    let deflated = sp.add_scaled(-shift, &u.projector());
    // complement eigenpairs are untouched by the shift
    top_eigvecs(&deflated, r)
}

/// Orthonormal basis of the column space of `m`, via SVD.
///
/// Rejects rank-deficient input (smallest singular value ≤ 1e-12).
pub fn orthonormalize(m: &Matrix) -> Result<FactorMatrix> {
    if m.cols() > m.rows() {
        return Err(Error::arg("orthonormalize needs a tall matrix"));
    }
    if m.cols() == 0 {
        return Ok(FactorMatrix::empty(m.rows()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("orthonormalize input".into()));
    }
    let dm = DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j));
    let svd = dm.svd(true, false);
    let min_sv = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min_sv > 1e-12) {
        return Err(Error::Degenerate(format!(
            "column space is rank deficient (smallest singular value {:.3e})",
            min_sv
        )));
    }
    let u = svd.u.expect("requested U");
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for j in 0..m.cols() {
        let col = u.column(j);
        let mut pivot = 0;
        let mut best = col[0].abs();
        for (i, &x) in col.iter().enumerate().skip(1) {
            if x.abs() > best {
                best = x.abs();
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m.rows() {
            out.set(i, j, flip * col[i]);
        }
    }
    FactorMatrix::new(out)
}
