//! Characteristic determinant `Δ(ρ)` and characteristic matrix `A(ρ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::complex::{root, Cx};
use crate::error::{Error, Result};
use crate::fss::FundamentalSystem;
use crate::linalg::{self, CMatrix, CVector, ZERO};
use crate::model::{BoundaryConditionSet, End};
use crate::regularity::{theta, TOL_THETA};
use crate::spectral::SpectralPoint;

/// Relative threshold of the near-eigenvalue guard.
pub const NEAR_EIGEN_TOL: f64 = 1e-8;

/// Boundary data of one condition row: leading order and terms.
pub(crate) type RowTerms = (usize, Vec<(End, usize, Complex64)>);

#[derive(Clone, Debug)]
pub struct CharacteristicData {
    pub point: SpectralPoint,
    pub decaying: Vec<bool>,
    pub p: usize,
    /// Rows `ρ^{−j} U_j(z_k)`.
    pub delta_matrix: CMatrix,
    pub delta_value: Complex64,
    /// `𝚯_p(b⁰, b¹)` when the decaying indices form a prefix.
    pub limit_matrix: Option<CMatrix>,
    /// `‖𝚫(ρ) − 𝚯_p‖_max`.
    pub deviation: Option<f64>,
    /// Column t: `[B_t¹]` for decaying t, `[B_t⁰]` otherwise.
    pub brackets: CMatrix,
    pub frame0: CMatrix,
    pub frame1: CMatrix,
    pub(crate) terms: Vec<RowTerms>,
}

impl CharacteristicData {
    /// Product of the Euclidean row norms of `𝚫(ρ)`.
    pub fn scale(&self) -> f64 {
        linalg::row_norm_product(&self.delta_matrix)
    }

    pub fn near_eigenvalue(&self) -> bool {
        self.delta_value.norm() < NEAR_EIGEN_TOL * self.scale()
    }

    pub fn guard(&self) -> Result<()> {
        if self.near_eigenvalue() {
            return Err(Error::NearEigenvalue {
                det: self.delta_value.norm(),
                scale: self.scale(),
            });
        }
        Ok(())
    }
}

fn prefix_count(decaying: &[bool]) -> Option<usize> {
    let p = decaying.iter().filter(|&&d| d).count();
    decaying.iter().enumerate().all(|(k, &d)| d == (k < p)).then_some(p)
}

/// Assembles `𝚫(ρ)` and the bracketed columns from one evaluation of the
/// fundamental system at both ends.
pub fn delta_matrix(bc: &BoundaryConditionSet, fss: &FundamentalSystem, decaying: &[bool]) -> Result<CharacteristicData> {
    let n = bc.order();
    if bc.row_count() != n {
        return Err(Error::DegenerateConditions { rank: bc.row_count(), n });
    }
    if decaying.len() != n {
        return Err(Error::Config(format!("split of length {} for order {n}", decaying.len())));
    }
    let frame0 = fss.frame(0.0)?;
    let frame1 = fss.frame(1.0)?;
    let rho = fss.rho();
    let eps = fss.eps();
    let i = Complex64::new(0.0, 1.0);
    let terms = bc.row_terms();

    let mut delta = CMatrix::zeros(n, n);
    let mut brackets = CMatrix::zeros(n, n);
    for (r, (j, row)) in terms.iter().enumerate() {
        for k in 0..n {
            let s = if decaying[k] { 0.0 } else { 1.0 };
            let mut entry = ZERO;
            let mut bracket = ZERO;
            for &(e, m, c) in row {
                let frame = if e == 0 { &frame0 } else { &frame1 };
                let v = c * rho.powi(m as i32 - *j as i32) * frame[(m, k)];
                entry += v * (i * rho * eps[k] * (e as f64 - s)).exp();
                if (e == 1) == decaying[k] {
                    bracket += v;
                }
            }
            delta[(r, k)] = entry;
            brackets[(r, k)] = bracket;
        }
    }
    let delta_value = linalg::det(&delta);
    let p_prefix = prefix_count(decaying);
    let limit_matrix = match p_prefix {
        Some(p) => Some(theta(bc, p, false)?.1.entries),
        None => None,
    };
    let deviation = limit_matrix.as_ref().map(|l| linalg::max_abs(&(&delta - l)));
    Ok(CharacteristicData {
        point: *fss.point(),
        decaying: decaying.to_vec(),
        p: decaying.iter().filter(|&&d| d).count(),
        delta_matrix: delta,
        delta_value,
        limit_matrix,
        deviation,
        brackets,
        frame0,
        frame1,
        terms,
    })
}

#[derive(Clone, Debug)]
pub struct CharMatrix {
    /// `entries[(k, t)] = a_tk`; column t solves `𝚫 A_t = ±(ε_t/2π)[B_t^#]`.
    pub entries: CMatrix,
    pub rhs: CMatrix,
    pub residuals: Vec<f64>,
    /// `‖𝚫‖₂‖A_t‖₂ + ‖rhs_t‖₂` per column; residuals are judged against it.
    pub conditioning: Vec<f64>,
}

impl CharMatrix {
    pub fn frobenius(&self) -> f64 {
        self.entries.norm()
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.conditioning)
            .map(|(r, c)| if *c > 0.0 { r / c } else { *r })
            .fold(0.0, f64::max)
    }
}

fn char_rhs(data: &CharacteristicData, eps: &[Complex64]) -> CMatrix {
    let n = data.delta_matrix.nrows();
    CMatrix::from_fn(n, n, |r, t| {
        let sign = if data.decaying[t] { 1.0 } else { -1.0 };
        data.brackets[(r, t)] * eps[t] * (sign / (2.0 * PI))
    })
}

pub fn char_matrix(data: &CharacteristicData) -> Result<CharMatrix> {
    data.guard()?;
    let n = data.delta_matrix.nrows();
    let eps: Vec<Complex64> = (0..n).map(|t| root(n, t as i64)).collect();
    let rhs = char_rhs(data, &eps);
    let dnorm = linalg::spectral_norm(&data.delta_matrix);
    let mut entries = CMatrix::zeros(n, n);
    let mut residuals = Vec::with_capacity(n);
    let mut conditioning = Vec::with_capacity(n);
    for t in 0..n {
        let b: CVector = rhs.column(t).into_owned();
        let (x, res) = linalg::solve_refined(&data.delta_matrix, &b)?;
        conditioning.push(dnorm * x.norm() + b.norm());
        residuals.push(res);
        entries.set_column(t, &x);
    }
    Ok(CharMatrix {
        entries,
        rhs,
        residuals,
        conditioning,
    })
}

/// Column-replacement (Cramer) evaluation of `A(ρ)`; cross-check path.
pub fn char_matrix_cramer(data: &CharacteristicData) -> Result<CMatrix> {
    data.guard()?;
    let n = data.delta_matrix.nrows();
    let eps: Vec<Complex64> = (0..n).map(|t| root(n, t as i64)).collect();
    let rhs = char_rhs(data, &eps);
    let det = data.delta_value;
    Ok(CMatrix::from_fn(n, n, |k, t| {
        let mut m = data.delta_matrix.clone();
        m.set_column(k, &rhs.column(t));
        linalg::det(&m) / det
    }))
}

/// `A_∞ = 𝚯_p(b⁰,b¹)⁻¹ 𝚯_p(b¹,b⁰) D`, `D = diag(ε_0..ε_{p−1}, −ε_p..−ε_{n−1}) / 2π`.
pub fn char_matrix_limit(bc: &BoundaryConditionSet, p: usize) -> Result<CMatrix> {
    let n = bc.order();
    let (fwd, fm) = theta(bc, p, false)?;
    if fm.normalized_margin(fwd) <= TOL_THETA {
        return Err(Error::NotRegular { p });
    }
    let (_, sm) = theta(bc, p, true)?;
    let d = CMatrix::from_fn(n, n, |a, b| {
        if a != b {
            ZERO
        } else {
            let sign = if a < p { 1.0 } else { -1.0 };
            root(n, a as i64) * (sign / (2.0 * PI))
        }
    });
    let inv = fm
        .entries
        .clone()
        .try_inverse()
        .ok_or(Error::NotRegular { p })?;
    Ok(inv * sm.entries * d)
}

#[derive(Clone, Debug, Serialize)]
pub struct CharMatrixView {
    pub rho: Cx,
    pub entries: Vec<Vec<Cx>>,
    pub residuals: Vec<f64>,
}

impl CharMatrixView {
    pub fn new(rho: Complex64, a: &CharMatrix) -> Self {
        CharMatrixView {
            rho: Cx(rho),
            entries: matrix_rows(&a.entries),
            residuals: a.residuals.clone(),
        }
    }
}

pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<Cx>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| Cx(m[(r, c)])).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_conditions, presets};
    use crate::spectral::decay_profile;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn data_for(raw: &[crate::model::RawCondition], sp: SpectralPoint) -> CharacteristicData {
        let bc = normalize_conditions(2, raw).unwrap();
        let fss = FundamentalSystem::exact(2, sp);
        let prof = decay_profile(&sp, 1e-6);
        delta_matrix(&bc, &fss, &prof.decaying).unwrap()
    }

    /// With the decaying/growing split of the ray, Dirichlet gives
    /// `Δ(ρ) = −(1 − e^{2iρ}) e^{−iρ} ... ∝ sin ρ`; the zeros sit at `ρ = kπ`.
    #[test]
    fn dirichlet_delta_is_sine() {
        for &r in &[0.7, 2.3, 5.0] {
            let sp = SpectralPoint::from_rho(c(r, 0.3), 2).unwrap();
            let d = data_for(&presets::dirichlet(), sp);
            // Columns: k = 0 decaying (s = 0), k = 1 growing (s = 1):
            // det [[1, e^{iρ}], [e^{iρ}, 1]] = 1 − e^{2iρ} = −2i e^{iρ} sin ρ.
            let rho = sp.rho;
            let want = c(0.0, -2.0) * (c(0.0, 1.0) * rho).exp() * rho.sin();
            assert!((d.delta_value - want).norm() < 1e-13 * want.norm().max(1.0));
        }
    }

    #[test]
    fn dirichlet_delta_converges_exponentially() {
        let sp = SpectralPoint::on_ray(1.5 * PI, 100.0, 2).unwrap();
        let d = data_for(&presets::dirichlet(), sp);
        let bound = (-(PI / 4.0).sin() / 2.0 * 100.0).exp();
        assert!(d.deviation.unwrap() <= bound);
    }

    #[test]
    fn dirichlet_char_matrix_near_limit() {
        let sp = SpectralPoint::on_ray(1.5 * PI, 200.0, 2).unwrap();
        let d = data_for(&presets::dirichlet(), sp);
        let a = char_matrix(&d).unwrap();
        let want = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]) / c(2.0 * PI, 0.0);
        assert!(linalg::max_abs(&(&a.entries - &want)) <= 1e-2);
        assert!(a.max_relative_residual() <= 1e-10);
        let cramer = char_matrix_cramer(&d).unwrap();
        assert!(linalg::max_abs(&(&cramer - &a.entries)) <= 1e-12);
        let bc = normalize_conditions(2, &presets::dirichlet()).unwrap();
        let lim = char_matrix_limit(&bc, 1).unwrap();
        assert!(linalg::max_abs(&(&lim - &want)) <= 1e-15);
    }

    #[test]
    fn near_eigenvalue_is_refused() {
        let sp = SpectralPoint::from_rho(c(PI, 1e-12), 2).unwrap();
        let d = data_for(&presets::dirichlet(), sp);
        assert!(matches!(char_matrix(&d), Err(Error::NearEigenvalue { .. })));
    }

    #[test]
    fn cauchy_limit_is_singular() {
        let bc = normalize_conditions(2, &presets::cauchy_at_zero()).unwrap();
        assert!(matches!(char_matrix_limit(&bc, 1), Err(Error::NotRegular { p: 1 })));
        let sp = SpectralPoint::on_ray(1.5 * PI, 30.0, 2).unwrap();
        let d = data_for(&presets::cauchy_at_zero(), sp);
        assert!(d.deviation.unwrap() < (-0.5 * 30.0 * (PI / 4.0).sin()).exp());
        assert!(d.delta_value.norm() <= 1e-12 * d.scale().max(1.0) + (-(30.0f64) * 0.7).exp() * 10.0);
    }
}
