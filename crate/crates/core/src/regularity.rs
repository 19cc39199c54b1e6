//! Regularity determinants `Θ_p` and the strong-regularity polynomial.

use num_complex::Complex64;
use serde::Serialize;

use crate::complex::{root, Cx};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ZERO};
use crate::model::BoundaryConditionSet;

/// Default threshold on the normalized margin `|Θ| / Π‖column‖`.
pub const TOL_THETA: f64 = 1e-8;

/// Column `B_k^i = (b_j^i ε_k^j)` stacked over the rows of every block.
pub fn build_b_column(bc: &BoundaryConditionSet, superscript: usize, k: usize) -> Result<CVector> {
    let n = bc.order();
    if k >= n {
        return Err(Error::OutOfRange { index: k, n });
    }
    if superscript > 1 {
        return Err(Error::OutOfRange { index: superscript, n: 2 });
    }
    let entries: Vec<Complex64> = bc
        .rows()
        .map(|(j, row)| {
            let b = if superscript == 0 { row.b0 } else { row.b1 };
            b * root(n, (j * k) as i64)
        })
        .collect();
    Ok(CVector::from_vec(entries))
}

/// `Q^i = (B_0^i, …, B_{n−1}^i)`.
pub fn q_matrix(bc: &BoundaryConditionSet, superscript: usize) -> Result<CMatrix> {
    let n = bc.order();
    let mut q = CMatrix::zeros(bc.row_count(), n);
    for k in 0..n {
        q.set_column(k, &build_b_column(bc, superscript, k)?);
    }
    Ok(q)
}

#[derive(Clone, Debug, Serialize)]
pub struct ColumnLabel {
    pub k: usize,
    pub superscript: usize,
}

#[derive(Clone, Debug)]
pub struct ThetaMatrix {
    pub entries: CMatrix,
    pub column_labels: Vec<ColumnLabel>,
}

impl ThetaMatrix {
    /// `|det| / Π‖column‖`, zero when a column vanishes.
    pub fn normalized_margin(&self, det: Complex64) -> f64 {
        normalized_margin(&self.entries, det)
    }
}

pub fn normalized_margin(m: &CMatrix, det: Complex64) -> f64 {
    let norms = linalg::column_norm_product(m);
    if norms == 0.0 {
        0.0
    } else {
        det.norm() / norms
    }
}

/// The matrix `𝚯_p`: columns `B_k^0` for `k < p` and `B_k^1` for `k ≥ p`,
/// superscripts exchanged when `swapped`.
pub fn theta_matrix(bc: &BoundaryConditionSet, p: usize, swapped: bool) -> Result<ThetaMatrix> {
    let n = bc.order();
    if p > n {
        return Err(Error::OutOfRange { index: p, n: n + 1 });
    }
    let (lo, hi) = if swapped { (1, 0) } else { (0, 1) };
    let mut entries = CMatrix::zeros(bc.row_count(), n);
    let mut column_labels = Vec::with_capacity(n);
    for k in 0..n {
        let s = if k < p { lo } else { hi };
        entries.set_column(k, &build_b_column(bc, s, k)?);
        column_labels.push(ColumnLabel { k, superscript: s });
    }
    Ok(ThetaMatrix { entries, column_labels })
}

pub fn theta(bc: &BoundaryConditionSet, p: usize, swapped: bool) -> Result<(Complex64, ThetaMatrix)> {
    let m = theta_matrix(bc, p, swapped)?;
    if m.entries.nrows() != m.entries.ncols() {
        return Ok((ZERO, m));
    }
    Ok((linalg::det(&m.entries), m))
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticRoots {
    pub c2: Cx,
    pub c1: Cx,
    pub c0: Cx,
    pub roots: Vec<Cx>,
    pub simple: Vec<bool>,
    pub degree: usize,
}

impl QuadraticRoots {
    pub fn two_simple_roots(&self) -> bool {
        self.degree == 2 && self.simple.iter().all(|&s| s)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (self.c2.0 * s + self.c1.0) * s + self.c0.0
    }
}

fn f_matrix(bc: &BoundaryConditionSet, s: Complex64) -> Result<CMatrix> {
    let n = bc.order();
    let q = n / 2;
    let mut m = CMatrix::zeros(bc.row_count(), n);
    for k in 0..n {
        let col = if k == 0 {
            build_b_column(bc, 0, 0)? + build_b_column(bc, 1, 0)? * s
        } else if k < q {
            build_b_column(bc, 0, k)?
        } else if k == q {
            build_b_column(bc, 1, q)? + build_b_column(bc, 0, q)? * s
        } else {
            build_b_column(bc, 1, k)?
        };
        m.set_column(k, &col);
    }
    Ok(m)
}

/// `F(s)` for even `n`, with coefficients recovered from `F(0), F(±1)`.
pub fn strong_regularity_polynomial(bc: &BoundaryConditionSet) -> Result<QuadraticRoots> {
    let n = bc.order();
    if n % 2 == 1 {
        return Err(Error::OddOrder);
    }
    if bc.row_count() != n {
        return Err(Error::DegenerateConditions { rank: bc.row_count(), n });
    }
    let one = Complex64::new(1.0, 0.0);
    let f0 = linalg::det(&f_matrix(bc, ZERO)?);
    let f1 = linalg::det(&f_matrix(bc, one)?);
    let fm = linalg::det(&f_matrix(bc, -one)?);
    let c0 = f0;
    let c1 = (f1 - fm) * 0.5;
    let c2 = (f1 + fm) * 0.5 - f0;
    let scale = c0.norm().max(c1.norm()).max(c2.norm());
    if scale == 0.0 {
        return Err(Error::ZeroPolynomial);
    }
    let negligible = |c: Complex64| c.norm() <= 1e-12 * scale;
    let (roots, degree) = if !negligible(c2) {
        let disc = (c1 * c1 - c2 * c0 * 4.0).sqrt();
        // Pick the sign that avoids cancellation.
        let qv = if (c1.conj() * disc).re >= 0.0 { -(c1 + disc) * 0.5 } else { -(c1 - disc) * 0.5 };
        let r1 = qv / c2;
        let r2 = if qv.norm() == 0.0 { r1 } else { c0 / qv };
        (vec![r1, r2], 2)
    } else if !negligible(c1) {
        (vec![-c0 / c1], 1)
    } else {
        (vec![], 0)
    };
    let simple = if roots.len() == 2 {
        let tol = 1e-8 * (1.0 + roots[0].norm().max(roots[1].norm()));
        let s = (roots[0] - roots[1]).norm() > tol;
        vec![s, s]
    } else {
        vec![true; roots.len()]
    };
    Ok(QuadraticRoots {
        c2: Cx(if negligible(c2) { ZERO } else { c2 }),
        c1: Cx(c1),
        c0: Cx(c0),
        roots: roots.into_iter().map(Cx).collect(),
        simple,
        degree,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    StronglyRegular,
    Regular,
    HalfRegularOnly,
    Irregular,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::StronglyRegular => "strongly-regular",
            Classification::Regular => "regular",
            Classification::HalfRegularOnly => "half-regular-only",
            Classification::Irregular => "irregular",
        }
    }

    pub fn is_regular(&self) -> bool {
        matches!(self, Classification::StronglyRegular | Classification::Regular)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaEntry {
    pub p: usize,
    pub forward: Cx,
    pub swapped: Cx,
    pub forward_margin: f64,
    pub swapped_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub n: usize,
    pub q: usize,
    pub theta_forward: Cx,
    pub theta_swapped: Cx,
    pub forward_margin: f64,
    pub swapped_margin: f64,
    pub theta_by_p: Vec<ThetaEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong_polynomial: Option<QuadraticRoots>,
    pub classification: Classification,
    /// `Θ(b⁰,b¹) ≠ 0` alone.
    pub half_regular: bool,
    /// `Θ_q(b⁰,b¹) / Θ_q(b¹,b⁰)` when the denominator is nonzero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward_to_swapped: Option<Cx>,
    /// Odd n: `Θ_{q+1}(b⁰,b¹) / Θ_q(b¹,b⁰)`, unimodular whenever defined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifted_to_swapped: Option<Cx>,
    pub tol_theta: f64,
}

pub fn classify(bc: &BoundaryConditionSet) -> Result<RegularityReport> {
    classify_with(bc, TOL_THETA)
}

pub fn classify_with(bc: &BoundaryConditionSet, tol_theta: f64) -> Result<RegularityReport> {
    let n = bc.order();
    let q = n / 2;
    let mut theta_by_p = Vec::with_capacity(n + 1);
    for p in 0..=n {
        let (f, fm) = theta(bc, p, false)?;
        let (s, sm) = theta(bc, p, true)?;
        theta_by_p.push(ThetaEntry {
            p,
            forward: Cx(f),
            swapped: Cx(s),
            forward_margin: fm.normalized_margin(f),
            swapped_margin: sm.normalized_margin(s),
        });
    }
    let fwd = theta_by_p[q].clone();
    let forward_ok = fwd.forward_margin > tol_theta;
    let swapped_ok = fwd.swapped_margin > tol_theta;

    let (classification, strong_polynomial) = if n % 2 == 0 {
        let poly = match strong_regularity_polynomial(bc) {
            Ok(p) => Some(p),
            Err(Error::ZeroPolynomial) => None,
            Err(e) => return Err(e),
        };
        let class = if !forward_ok {
            Classification::Irregular
        } else if poly.as_ref().is_some_and(QuadraticRoots::two_simple_roots) {
            Classification::StronglyRegular
        } else {
            Classification::Regular
        };
        (class, poly)
    } else {
        let class = match (forward_ok, swapped_ok) {
            (true, true) => Classification::StronglyRegular,
            (false, false) => Classification::Irregular,
            _ => Classification::HalfRegularOnly,
        };
        (class, None)
    };
    let forward_to_swapped = (fwd.swapped.0.norm() > 0.0 && swapped_ok).then(|| Cx(fwd.forward.0 / fwd.swapped.0));
    let shifted_to_swapped = (n % 2 == 1 && swapped_ok).then(|| Cx(theta_by_p[q + 1].forward.0 / fwd.swapped.0));
    Ok(RegularityReport {
        n,
        q,
        theta_forward: fwd.forward,
        theta_swapped: fwd.swapped,
        forward_margin: fwd.forward_margin,
        swapped_margin: fwd.swapped_margin,
        theta_by_p,
        strong_polynomial,
        classification,
        half_regular: forward_ok,
        forward_to_swapped,
        shifted_to_swapped,
        tol_theta,
    })
}

/// Block matrix `B` (n × 2n) with `b_j⁰` in column `j` and `b_j¹` in column
/// `n + j` of each row.
pub fn leading_block_matrix(bc: &BoundaryConditionSet) -> CMatrix {
    let n = bc.order();
    let mut b = CMatrix::zeros(bc.row_count(), 2 * n);
    for (r, (j, row)) in bc.rows().enumerate() {
        b[(r, j)] = row.b0;
        b[(r, n + j)] = row.b1;
    }
    b
}

/// `Ψ = (ε_j^k)`.
pub fn psi_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |j, k| root(n, (j * k) as i64))
}

/// `max |(1/n)(Q⁰Ψ*, Q¹Ψ*) − B|`; vanishes identically in exact arithmetic.
pub fn fourier_factor_residual(bc: &BoundaryConditionSet) -> Result<f64> {
    let n = bc.order();
    let psi_adj = psi_matrix(n).adjoint();
    let scale = Complex64::new(1.0 / n as f64, 0.0);
    let left = q_matrix(bc, 0)? * &psi_adj * scale;
    let right = q_matrix(bc, 1)? * &psi_adj * scale;
    let b = leading_block_matrix(bc);
    let mut worst = 0.0f64;
    for r in 0..b.nrows() {
        for c in 0..n {
            worst = worst.max((left[(r, c)] - b[(r, c)]).norm());
            worst = worst.max((right[(r, c)] - b[(r, n + c)]).norm());
        }
    }
    Ok(worst)
}

/// Rank of `Q = (Q⁰, Q¹)`.
pub fn q_rank(bc: &BoundaryConditionSet) -> Result<usize> {
    let n = bc.order();
    let mut q = CMatrix::zeros(bc.row_count(), 2 * n);
    q.view_mut((0, 0), (bc.row_count(), n)).copy_from(&q_matrix(bc, 0)?);
    q.view_mut((0, n), (bc.row_count(), n)).copy_from(&q_matrix(bc, 1)?);
    Ok(linalg::rank(&q, 1e-10))
}
