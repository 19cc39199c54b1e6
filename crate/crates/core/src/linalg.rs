//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Determinant through partially pivoted LU.
pub fn det(m: &CMatrix) -> Complex64 {
    if m.nrows() == 0 {
        return ONE;
    }
    m.clone().lu().determinant()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: singular values above `tol * max(1, σ_max)`.
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
    sv.iter().filter(|&&s| s > tol * scale).count()
}

/// Rank with an absolute singular-value threshold.
pub fn rank_abs(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// 2-norm condition number; infinite for singular input.
pub fn cond2(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let (rows, cols) = m.shape();
    let size = rows.max(cols);
    let mut padded = CMatrix::zeros(size, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let scale = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s)).max(1.0);
    let picked: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol * scale)
        .collect();
    let mut basis = CMatrix::zeros(cols, picked.len());
    for (c, &i) in picked.iter().enumerate() {
        for r in 0..cols {
            basis[(r, c)] = v_t[(i, r)].conj();
        }
    }
    basis
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Solves `a x = b` by LU with two rounds of iterative refinement.
/// Returns the solution and the final residual norm `‖a x − b‖₂`.
pub fn solve_refined(a: &CMatrix, b: &CVector) -> Result<(CVector, f64)> {
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| Error::Singular("LU solve failed".into()))?;
    for _ in 0..2 {
        let r = b - a * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    let residual = (a * &x - b).norm();
    if !residual.is_finite() {
        return Err(Error::Singular("non-finite solution".into()));
    }
    Ok((x, residual))
}

/// Product of Euclidean row norms; the Hadamard bound on `|det m|`.
pub fn row_norm_product(m: &CMatrix) -> f64 {
    m.row_iter().map(|r| r.norm()).product()
}

pub fn column_norm_product(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.norm()).product()
}

/// Largest singular value by power iteration on `mᴴm`; used for large
/// Nyström matrices where a full SVD is too slow.
pub fn power_norm(m: &CMatrix, rel_tol: f64, max_iter: usize) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, non-degenerate start vector.
    let mut v = CVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.618).fract(), 0.1 * (i % 7) as f64));
    let mut nv = v.norm();
    v /= Complex64::new(nv, 0.0);
    let adj = m.adjoint();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = m * &v;
        let next = w.norm();
        let mut u = &adj * w;
        nv = u.norm();
        if nv == 0.0 {
            return 0.0;
        }
        u /= Complex64::new(nv, 0.0);
        v = u;
        if (next - estimate).abs() <= rel_tol * next {
            return next;
        }
        estimate = next;
    }
    estimate
}
