//! Dense linear-algebra kernels shared by the rest of the crate.
//!
//! Every routine here is a pure function of its inputs. Eigen- and singular
//! vector bases are canonicalized (descending order, fixed signs, canonical
//! bases inside repeated eigenvalues) so downstream results are bit-stable
//! from run to run.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{bail_validation, Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative cutoff for pseudoinverse singular values.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-9;
const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// Symmetric vectorization of a `d x d` symmetric matrix.
///
/// Columns of the lower triangle are stacked; off-diagonal entries appear once,
/// scaled by `sqrt(2)`, so the Euclidean norm equals the Frobenius norm of the
/// source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec {
    data: Vector,
    dim: usize,
}

impl SymVec {
    /// Wraps a raw vector, checking that its length is a triangular number.
    pub fn new(data: Vector) -> Result<Self> {
        match triangular_root(data.len()) {
            Some(dim) => Ok(Self { data, dim }),
            None => bail_validation!("length {} is not a triangular number", data.len()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_vector(&self) -> &Vector {
        &self.data
    }

    pub fn into_vector(self) -> Vector {
        self.data
    }
}

/// Returns `d` such that `d(d+1)/2 == len`, or `None`. Zero length is rejected.
pub fn triangular_root(len: usize) -> Option<usize> {
    if len == 0 {
        return None;
    }
    let d = libm::round((libm::sqrt(8.0 * len as f64 + 1.0) - 1.0) / 2.0) as usize;
    (d * (d + 1) / 2 == len).then_some(d)
}

/// Number of svec entries for a `d x d` symmetric matrix.
pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

fn max_asymmetry(s: &Matrix) -> f64 {
    let d = s.nrows();
    let mut worst = 0.0f64;
    for j in 0..d {
        for i in (j + 1)..d {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(s: &Matrix, what: &str) -> Result<()> {
    if s.nrows() != s.ncols() {
        bail_validation!("{what}: expected a square matrix, got {}x{}", s.nrows(), s.ncols());
    }
    let scale = s.amax().max(1.0);
    let dev = max_asymmetry(s);
    if dev > SYMMETRY_TOL * scale {
        bail_validation!("{what}: matrix is not symmetric (max deviation {dev:e})");
    }
    Ok(())
}

/// Symmetric part `(S + S^T) / 2`.
pub fn symmetrize(s: &Matrix) -> Matrix {
    (s + s.transpose()) * 0.5
}

pub fn svec(s: &Matrix) -> Result<SymVec> {
    check_symmetric(s, "svec")?;
    let d = s.nrows();
    let mut data = Vector::zeros(svec_len(d));
    let mut k = 0;
    for j in 0..d {
        data[k] = s[(j, j)];
        k += 1;
        for i in (j + 1)..d {
            data[k] = SQRT_2 * 0.5 * (s[(i, j)] + s[(j, i)]);
            k += 1;
        }
    }
    Ok(SymVec { data, dim: d })
}

pub fn smat(v: &SymVec) -> Matrix {
    let d = v.dim;
    let mut s = Matrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        s[(j, j)] = v.data[k];
        k += 1;
        for i in (j + 1)..d {
            let x = v.data[k] / SQRT_2;
            s[(i, j)] = x;
            s[(j, i)] = x;
            k += 1;
        }
    }
    s
}

/// Writes `svec(h h^T)` into `out` without forming the outer product.
pub fn svec_outer_into(h: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), svec_len(h.len()));
    let mut k = 0;
    for j in 0..h.len() {
        out[k] = h[j] * h[j];
        k += 1;
        let hj = SQRT_2 * h[j];
        for &hi in &h[(j + 1)..] {
            out[k] = hj * hi;
            k += 1;
        }
    }
}

/// Eigendecomposition of a symmetric matrix with a canonical basis.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues in descending order.
    pub values: Vector,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: Matrix,
}

impl SymEig {
    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }

    /// `U f(Lambda) U^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is nonnegative.
fn fix_sign(v: &mut [f64]) -> bool {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

fn lex_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-12 {
            return y.partial_cmp(x).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Replaces the columns of `basis` (an orthonormal basis of some subspace) by a
/// basis that depends only on the subspace: pivoted Gram-Schmidt over the
/// columns of the orthogonal projector.
fn canonical_subspace_basis(basis: &Matrix) -> Vec<Vec<f64>> {
    let d = basis.nrows();
    let k = basis.ncols();
    let proj = basis * basis.transpose();
    let mut candidates: Vec<Vec<f64>> = (0..d).map(|j| proj.column(j).iter().copied().collect()).collect();
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = 0usize;
        let mut best_norm = -1.0;
        for (j, c) in candidates.iter().enumerate() {
            let nrm: f64 = c.iter().map(|x| x * x).sum();
            if nrm > best_norm * (1.0 + 1e-12) {
                best = j;
                best_norm = nrm;
            }
        }
        let nrm = libm::sqrt(best_norm.max(0.0));
        if nrm <= 1e-300 {
            break;
        }
        let q: Vec<f64> = candidates[best].iter().map(|x| x / nrm).collect();
        for c in candidates.iter_mut() {
            let dot: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
            c.iter_mut().zip(&q).for_each(|(a, b)| *a -= dot * b);
        }
        chosen.push(q);
    }
    chosen
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
///
/// Sign convention: each eigenvector's largest-magnitude entry is nonnegative.
/// Within a cluster of (numerically) equal eigenvalues the basis is rebuilt
/// from the cluster's projector and ordered lexicographically, so e.g. the
/// identity yields the standard basis.
pub fn eig_sym_desc(s: &Matrix) -> Result<SymEig> {
    check_symmetric(s, "eig_sym_desc")?;
    let d = s.nrows();
    if d == 0 {
        return Ok(SymEig {
            values: Vector::zeros(0),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(symmetrize(s));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();

    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tie_tol = 1e-10 * scale;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (values[end - 1] - values[end]).abs() <= tie_tol {
            end += 1;
        }
        if end - start > 1 {
            let block = Matrix::from_fn(d, end - start, |i, j| vecs[start + j][i]);
            let mut canon = canonical_subspace_basis(&block);
            if canon.len() == end - start {
                canon.iter_mut().for_each(|v| {
                    fix_sign(v);
                });
                canon.sort_by(|a, b| lex_desc(a, b));
                for (j, v) in canon.into_iter().enumerate() {
                    vecs[start + j] = v;
                }
            }
        }
        start = end;
    }
    for v in vecs.iter_mut() {
        fix_sign(v);
    }
    Ok(SymEig {
        values: Vector::from_vec(values),
        vectors: Matrix::from_fn(d, d, |i, j| vecs[j][i]),
    })
}

/// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
pub fn psd_project(s: &Matrix) -> Result<Matrix> {
    Ok(eig_sym_desc(s)?.reconstruct_with(|l| l.max(0.0)))
}

/// Unique symmetric PSD square root.
pub fn psd_sqrt(s: &Matrix) -> Result<Matrix> {
    let eig = eig_sym_desc(s)?;
    let top = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(&min) = eig.values.as_slice().last() {
        if min < -1e-9 * top.max(1.0) {
            bail_validation!("psd_sqrt: matrix has negative eigenvalue {min:e}");
        }
    }
    Ok(eig.reconstruct_with(|l| libm::sqrt(l.max(0.0))))
}

/// Symmetric inverse square root of a positive definite matrix.
///
/// Fails when the smallest eigenvalue is not above `rel_tol` times the largest.
pub fn psd_inv_sqrt(s: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let eig = eig_sym_desc(s)?;
    let n = eig.values.len();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let max = eig.values[0];
    let min = eig.values[n - 1];
    if !(min > rel_tol * max.max(0.0)) || min <= 0.0 {
        return Err(Error::conditioning("psd_inv_sqrt: minimum eigenvalue too small", min));
    }
    Ok(eig.reconstruct_with(|l| 1.0 / libm::sqrt(l)))
}

/// Result of the rank-`r` PSD factorization `N ~ F^T F`.
#[derive(Debug, Clone)]
pub struct FactorResult {
    /// `r x d` factor.
    pub factor: Matrix,
    /// `|| F^T F - N ||_F`.
    pub residual_fro: f64,
}

/// Best rank-`r` PSD factorization: clip negative eigenvalues, keep the top
/// `r` eigenpairs, return `Sigma_r^{1/2} U_r^T` (zero rows pad when `d <= r`).
pub fn low_rank_factor(n: &Matrix, r: usize) -> Result<FactorResult> {
    if r < 1 {
        bail_validation!("low_rank_factor: target rank must be at least 1");
    }
    let eig = eig_sym_desc(n)?;
    let d = n.nrows();
    let kept = d.min(r);
    let mut factor = Matrix::zeros(r, d);
    for i in 0..kept {
        let s = libm::sqrt(eig.values[i].max(0.0));
        for j in 0..d {
            factor[(i, j)] = s * eig.vectors[(j, i)];
        }
    }
    let residual_fro = (factor.transpose() * &factor - n).norm();
    Ok(FactorResult {
        factor,
        residual_fro,
    })
}

/// Thin singular value decomposition with descending singular values.
#[derive(Debug, Clone)]
pub struct SvdDesc {
    /// `m x k` left singular vectors, `k = min(m, n)`.
    pub u: Matrix,
    pub singular_values: Vector,
    /// `k x n` right singular vectors (transposed).
    pub v_t: Matrix,
}

impl SvdDesc {
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut scaled = self.u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.singular_values[j]);
        }
        scaled * &self.v_t
    }
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Thin SVD `(U, values, V)` of a matrix with `rows >= cols`, values unsorted.
///
/// nalgebra's bidiagonal SVD (0.35) returns wrong factors for some matrices with
/// exactly zero singular values, which the minimum-norm solvers hit routinely.
/// Its result is therefore verified and replaced by a Jacobi SVD when the check
/// fails.
fn thin_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    const RECON_TOL: f64 = 1e-8;
    const ORTHO_TOL: f64 = 1e-10;
    let svd = SVD::new(m.clone(), true, true);
    if let (Some(u), Some(v_t)) = (svd.u, svd.v_t) {
        let values: Vec<f64> = svd.singular_values.iter().copied().collect();
        let k = values.len();
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let mut us = u.clone();
        for (j, &s) in values.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        let eye = Matrix::identity(k, k);
        let ok = values.iter().all(|s| s.is_finite() && *s >= 0.0)
            && (&us * &v_t - m).norm() <= RECON_TOL * scale
            && (u.transpose() * &u - &eye).amax() <= ORTHO_TOL
            && (&v_t * v_t.transpose() - &eye).amax() <= ORTHO_TOL;
        if ok {
            return (u, values, v_t.transpose());
        }
    }
    jacobi_svd(m)
}

/// One-sided Jacobi SVD of a matrix with `rows >= cols`: returns `U` (rows x cols,
/// orthonormal columns), the unsorted singular values and `V` (cols x cols).
fn jacobi_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    const MAX_SWEEPS: usize = 80;
    let (rows, cols) = m.shape();
    let mut u = m.clone();
    let mut v = Matrix::identity(cols, cols);
    let mut sq_norms = vec![0.0; cols];
    for _ in 0..MAX_SWEEPS {
        let ud = u.as_mut_slice();
        for (j, n) in sq_norms.iter_mut().enumerate() {
            *n = ud[j * rows..(j + 1) * rows].iter().map(|x| x * x).sum();
        }
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta) = (sq_norms[p], sq_norms[q]);
                let (head, tail) = ud.split_at_mut(q * rows);
                let col_p = &mut head[p * rows..(p + 1) * rows];
                let col_q = &mut tail[..rows];
                let gamma: f64 = col_p.iter().zip(col_q.iter()).map(|(a, b)| a * b).sum();
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(col_p, col_q, c, s);
                sq_norms[p] = alpha - t * gamma;
                sq_norms[q] = beta + t * gamma;
                let vd = v.as_mut_slice();
                let (vh, vt) = vd.split_at_mut(q * cols);
                rotate(&mut vh[p * cols..(p + 1) * cols], &mut vt[..cols], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut values = vec![0.0; cols];
    let mut null_cols = Vec::new();
    for j in 0..cols {
        let norm = u.column(j).norm();
        values[j] = norm;
        if norm > 0.0 {
            u.column_mut(j).unscale_mut(norm);
        } else {
            null_cols.push(j);
        }
    }
    // Columns of zero singular values get an orthonormal completion from the
    // standard basis.
    let mut basis = 0;
    for j in null_cols {
        while basis < rows {
            let mut cand = Vector::zeros(rows);
            cand[basis] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for k in 0..cols {
                    if k != j {
                        let proj = u.column(k).dot(&cand);
                        cand.axpy(-proj, &u.column(k).into_owned(), 1.0);
                    }
                }
            }
            let norm = cand.norm();
            if norm > 0.5 {
                u.set_column(j, &(cand / norm));
                break;
            }
        }
    }
    (u, values, v)
}

/// SVD sorted by descending singular value; each left singular vector has its
/// largest-magnitude entry nonnegative (the right vector flips with it).
pub fn svd_desc(m: &Matrix) -> SvdDesc {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SvdDesc {
            u: Matrix::zeros(rows, 0),
            singular_values: Vector::zeros(0),
            v_t: Matrix::zeros(0, cols),
        };
    }
    let (u_raw, raw_values, v_t_raw) = if rows >= cols {
        let (u, s, v) = thin_svd(m);
        (u, s, v.transpose())
    } else {
        let (u, s, v) = thin_svd(&m.transpose());
        (v, s, u.transpose())
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        raw_values[b]
            .partial_cmp(&raw_values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut u = Matrix::zeros(rows, k);
    let mut v_t = Matrix::zeros(k, cols);
    let mut sv = Vector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol: Vec<f64> = u_raw.column(src).iter().copied().collect();
        let flip = fix_sign(&mut ucol);
        let sign = if flip { -1.0 } else { 1.0 };
        for i in 0..rows {
            u[(i, dst)] = ucol[i];
        }
        for j in 0..cols {
            v_t[(dst, j)] = sign * v_t_raw[(src, j)];
        }
        sv[dst] = raw_values[src];
    }
    SvdDesc {
        u,
        singular_values: sv,
        v_t,
    }
}

/// Operator (spectral) norm.
pub fn op_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd_desc(m).singular_values[0]
}

/// Minimum positive singular value, using a relative cutoff for "positive".
pub fn min_positive_singular_value(m: &Matrix, rel_tol: f64) -> Option<f64> {
    let sv = svd_desc(m).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter()
        .copied()
        .filter(|&s| s > rel_tol * top && s > 0.0)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s))))
}

/// Zeroes singular values strictly below `theta`; keeps the singular vectors.
pub fn trunc_sv(m: &Matrix, theta: f64) -> Result<Matrix> {
    if !(theta >= 0.0) {
        bail_validation!("trunc_sv: threshold must be nonnegative, got {theta}");
    }
    let svd = svd_desc(m);
    if svd.singular_values.iter().all(|&s| s >= theta) {
        return Ok(m.clone());
    }
    if svd.singular_values.iter().all(|&s| s < theta) {
        return Ok(Matrix::zeros(m.nrows(), m.ncols()));
    }
    Ok(svd.reconstruct_with(|s| if s < theta { 0.0 } else { s }))
}

/// Orthonormal `S` minimizing `||S A - B||_F`: `S = U V^T` for `B A^T = U Sigma V^T`.
pub fn procrustes_align(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        bail_validation!(
            "procrustes_align: shape mismatch {:?} vs {:?}",
            a.shape(),
            b.shape()
        );
    }
    let m = a.nrows();
    if m == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let cross = b * a.transpose();
    let svd = svd_desc(&cross);
    Ok(&svd.u * &svd.v_t)
}

/// Householder triangularization returning only the `min(n, c) x c` factor `R`.
fn householder_r(mut a: Matrix) -> Matrix {
    let (n, c) = a.shape();
    let steps = n.min(c);
    let mut v = vec![0.0; n];
    {
        let data = a.as_mut_slice();
        for j in 0..steps {
            let col = &data[j * n + j..(j + 1) * n];
            let norm_sq: f64 = col.iter().map(|x| x * x).sum();
            if norm_sq == 0.0 {
                continue;
            }
            let norm = libm::sqrt(norm_sq);
            let alpha = if col[0] > 0.0 { -norm } else { norm };
            let len = n - j;
            let vj = &mut v[..len];
            vj.copy_from_slice(col);
            vj[0] -= alpha;
            let vtv: f64 = vj.iter().map(|x| x * x).sum();
            if vtv == 0.0 {
                continue;
            }
            let scale = 2.0 / vtv;
            for k in (j + 1)..c {
                let target = &mut data[k * n + j..(k + 1) * n];
                let dot: f64 = target.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
                let f = scale * dot;
                target.iter_mut().zip(vj.iter()).for_each(|(t, vi)| *t -= f * vi);
            }
            let colm = &mut data[j * n + j..(j + 1) * n];
            colm[0] = alpha;
            colm[1..].iter_mut().for_each(|x| *x = 0.0);
        }
    }
    a.rows(0, steps).into_owned()
}

/// Row-streaming reduction of an augmented system `[X Y]` to its triangular
/// factor. Rows are absorbed in blocks, so memory stays at one block plus
/// the factor regardless of how many rows are pushed.
#[derive(Debug, Clone)]
pub struct TriangularAccumulator {
    regressors: usize,
    factor: Matrix,
    rows_seen: usize,
}

impl TriangularAccumulator {
    /// `regressors` is the column count of `X`; `targets` that of `Y`.
    pub fn new(regressors: usize, targets: usize) -> Self {
        Self {
            regressors,
            factor: Matrix::zeros(0, regressors + targets),
            rows_seen: 0,
        }
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    /// Absorbs a block of rows of `[X Y]`.
    pub fn push(&mut self, block: &Matrix) -> Result<()> {
        let cols = self.factor.ncols();
        if block.ncols() != cols {
            bail_validation!("block has {} columns, expected {cols}", block.ncols());
        }
        let top = self.factor.nrows();
        let mut stacked = Matrix::zeros(top + block.nrows(), cols);
        stacked.rows_mut(0, top).copy_from(&self.factor);
        stacked.rows_mut(top, block.nrows()).copy_from(block);
        self.factor = householder_r(stacked);
        self.rows_seen += block.nrows();
        Ok(())
    }

    /// Minimum-norm solution of the accumulated problem.
    pub fn solve(&self, rel_tol: f64) -> Result<Matrix> {
        if self.rows_seen == 0 {
            bail_validation!("least squares: need at least one row");
        }
        let p = self.regressors;
        let q = self.factor.ncols() - p;
        let coef = self.factor.columns(0, p).into_owned();
        let rhs = self.factor.columns(p, q).into_owned();
        Ok(pinv_apply(&coef, &rhs, rel_tol))
    }
}

/// Minimum-norm least squares `argmin ||X W - Y||_F` via SVD.
///
/// Tall problems are first reduced by a Householder QR of `[X Y]`, which
/// preserves singular values and the row space of `X`. Singular values below
/// `rel_tol * sigma_max` are treated as zero.
pub fn min_norm_lstsq(x: &Matrix, y: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let (n, p) = x.shape();
    let q = y.ncols();
    if n < 1 {
        bail_validation!("min_norm_lstsq: need at least one row");
    }
    if y.nrows() != n {
        bail_validation!("min_norm_lstsq: X has {n} rows but Y has {}", y.nrows());
    }
    if p == 0 {
        return Ok(Matrix::zeros(0, q));
    }
    if n > p + q {
        let mut aug = Matrix::zeros(n, p + q);
        aug.columns_mut(0, p).copy_from(x);
        aug.columns_mut(p, q).copy_from(y);
        let mut acc = TriangularAccumulator::new(p, q);
        acc.push(&aug)?;
        return acc.solve(rel_tol);
    }
    Ok(pinv_apply(x, y, rel_tol))
}

/// `pinv(coef) * rhs` with a relative singular-value cutoff.
fn pinv_apply(coef: &Matrix, rhs: &Matrix, rel_tol: f64) -> Matrix {
    let p = coef.ncols();
    let q = rhs.ncols();
    let svd = svd_desc(coef);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut w = Matrix::zeros(p, q);
    if top == 0.0 {
        return w;
    }
    let ut_rhs = svd.u.transpose() * rhs;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= rel_tol * top {
            continue;
        }
        let row = ut_rhs.row(i) / s;
        w += svd.v_t.row(i).transpose() * row;
    }
    w
}

/// Inverse of a symmetric positive definite matrix via Cholesky, refusing
/// matrices whose condition number exceeds `max_condition`.
pub fn spd_inverse(m: &Matrix, max_condition: f64, what: &str) -> Result<Matrix> {
    let eig = eig_sym_desc(&symmetrize(m))?;
    let n = eig.values.len();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let max = eig.values[0];
    let min = eig.values[n - 1];
    if !(min > 0.0) || max / min > max_condition {
        return Err(Error::conditioning(alloc::format!("{what}: not safely invertible"), min));
    }
    match symmetrize(m).cholesky() {
        Some(ch) => Ok(symmetrize(&ch.inverse())),
        None => Err(Error::conditioning(alloc::format!("{what}: Cholesky failed"), min)),
    }
}

/// `x^T P x`.
pub fn quad_form(x: &Vector, p: &Matrix) -> f64 {
    (x.transpose() * p * x)[(0, 0)]
}

/// Frobenius inner product.
pub fn frob_inner(a: &Matrix, b: &Matrix) -> f64 {
    a.component_mul(b).sum()
}

/// Pairwise (cascade) summation; result independent of how callers chunk work.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
