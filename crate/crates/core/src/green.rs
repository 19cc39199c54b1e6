//! Green's function of `l − λ` under the boundary conditions.
//!
//! `G = g₀ − (2πi / (nρ^{n−1})) Σ_{t,k} a_tk z_k(x) u_t(ξ)`, where `g₀` is the
//! split fundamental solution and `a_tk` the characteristic matrix.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::characteristic::{char_matrix, delta_matrix, CharMatrix, CharacteristicData};
use crate::error::{Error, Result};
use crate::fss::{FssOptions, FundamentalSystem};
use crate::linalg::{self, CMatrix, CVector, I, ZERO};
use crate::model::{BoundaryConditionSet, DifferentialExpression};
use crate::quadrature::CompositeRule;
use crate::spectral::{decay_profile, SpectralPoint};

/// Frame and dual coefficients at one point.
#[derive(Clone, Debug)]
pub struct Sample {
    pub x: f64,
    pub frame: CMatrix,
    pub d: CVector,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct GreenEvaluation {
    pub x: f64,
    pub xi: f64,
    #[serde(with = "cx_ser")]
    pub g0: Complex64,
    #[serde(with = "cx_ser")]
    pub correction: Complex64,
    #[serde(with = "cx_ser")]
    pub value: Complex64,
}

mod cx_ser {
    use num_complex::Complex64;
    use serde::Serialize;

    pub fn serialize<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        crate::complex::Cx(*z).serialize(s)
    }
}

#[derive(Clone, Debug)]
pub struct GreenFunction {
    fss: FundamentalSystem,
    data: CharacteristicData,
    a: CharMatrix,
    /// `−2πi / (nρ^{n−1})`.
    prefactor: Complex64,
}

impl GreenFunction {
    pub fn new(bc: &BoundaryConditionSet, expr: &DifferentialExpression, lambda: Complex64, opts: &FssOptions) -> Result<Self> {
        let point = SpectralPoint::new(lambda, expr.order())?;
        let fss = FundamentalSystem::new(expr, point, opts)?;
        Self::from_system(bc, fss)
    }

    pub fn from_system(bc: &BoundaryConditionSet, fss: FundamentalSystem) -> Result<Self> {
        let n = fss.order();
        let profile = decay_profile(fss.point(), 0.0);
        let data = delta_matrix(bc, &fss, &profile.decaying)?;
        let a = char_matrix(&data)?;
        let prefactor = Complex64::new(0.0, -2.0 * PI) / (fss.rho().powi(n as i32 - 1) * n as f64);
        Ok(GreenFunction { fss, data, a, prefactor })
    }

    pub fn system(&self) -> &FundamentalSystem {
        &self.fss
    }

    pub fn characteristic(&self) -> &CharacteristicData {
        &self.data
    }

    pub fn char_matrix(&self) -> &CharMatrix {
        &self.a
    }

    pub fn sample(&self, x: f64) -> Result<Sample> {
        let frame = self.fss.frame(x)?;
        let d = FundamentalSystem::dual_frame(&frame)?;
        Ok(Sample { x, frame, d })
    }

    pub fn samples(&self, xs: &[f64]) -> Result<Vec<Sample>> {
        let frames = self.fss.frames(xs)?;
        xs.iter()
            .zip(frames)
            .map(|(&x, frame)| {
                let d = FundamentalSystem::dual_frame(&frame)?;
                Ok(Sample { x, frame, d })
            })
            .collect()
    }

    fn phase(&self, k: usize, t: f64) -> Complex64 {
        (I * self.fss.rho() * self.fss.eps()[k] * t).exp()
    }

    fn rho_pow(&self, m: i32) -> Complex64 {
        self.fss.rho().powi(m)
    }

    /// Split fundamental solution; the decaying branch is used on `x ≥ ξ`.
    pub fn g0(&self, sx: &Sample, sxi: &Sample) -> Complex64 {
        let n = self.fss.order();
        let forward = sx.x >= sxi.x;
        let mut acc = ZERO;
        for k in 0..n {
            if self.data.decaying[k] == forward {
                acc += sx.frame[(0, k)] * sxi.d[k] * self.phase(k, sx.x - sxi.x);
            }
        }
        let sign = if forward { I } else { -I };
        sign * acc / self.rho_pow(n as i32 - 1)
    }

    /// `z_k(x) = y_k(x) e^{−iρε_k s_k}`.
    pub fn z(&self, s: &Sample) -> CVector {
        let n = self.fss.order();
        CVector::from_fn(n, |k, _| {
            let shift = if self.data.decaying[k] { 0.0 } else { 1.0 };
            s.frame[(0, k)] * self.phase(k, s.x - shift)
        })
    }

    /// `u_t(ξ) = n ε_t^{n−1} d_t e^{iρε_t(s'_t − ξ)}`.
    pub fn u(&self, s: &Sample) -> CVector {
        let n = self.fss.order();
        let eps = self.fss.eps();
        CVector::from_fn(n, |t, _| {
            let shift = if self.data.decaying[t] { 1.0 } else { 0.0 };
            eps[t].powi(n as i32 - 1) * n as f64 * s.d[t] * self.phase(t, shift - s.x)
        })
    }

    /// Coefficients `c_k(ξ)` of `z_k` in the correction term.
    fn correction_coefficients(&self, sxi: &Sample) -> CVector {
        &self.a.entries * self.u(sxi) * self.prefactor
    }

    pub fn evaluate_samples(&self, sx: &Sample, sxi: &Sample) -> GreenEvaluation {
        let g0 = self.g0(sx, sxi);
        let correction = self.z(sx).dot(&self.correction_coefficients(sxi));
        GreenEvaluation {
            x: sx.x,
            xi: sxi.x,
            g0,
            correction,
            value: g0 + correction,
        }
    }

    pub fn evaluate(&self, x: f64, xi: f64) -> Result<GreenEvaluation> {
        check_unit(x)?;
        check_unit(xi)?;
        Ok(self.evaluate_samples(&self.sample(x)?, &self.sample(xi)?))
    }

    /// `ρ^{−j} U_j` applied to `g₀(·, ξ)`, computed from the end frames.
    pub fn g0_boundary(&self, sxi: &Sample) -> CVector {
        let n = self.fss.order();
        let frames = [&self.data.frame0, &self.data.frame1];
        let mut out = CVector::zeros(n);
        for (r, (j, row)) in self.data.terms.iter().enumerate() {
            let mut acc = ZERO;
            for &(e, m, c) in row {
                let forward = e as f64 >= sxi.x;
                let mut sum = ZERO;
                for k in 0..n {
                    if self.data.decaying[k] == forward {
                        sum += frames[e][(m, k)] * sxi.d[k] * self.phase(k, e as f64 - sxi.x);
                    }
                }
                let sign = if forward { I } else { -I };
                acc += c * sign * sum * self.rho_pow(m as i32 - *j as i32 - (n as i32 - 1));
            }
            out[r] = acc;
        }
        out
    }

    /// `ρ^{−j} U_j(G(·, ξ))`; vanishes up to round-off.
    pub fn boundary_values(&self, sxi: &Sample) -> CVector {
        self.g0_boundary(sxi) + &self.data.delta_matrix * self.correction_coefficients(sxi)
    }

    /// `G = det[[g₀, zᵀ], [V, 𝚫]] / det 𝚫` with `V = ρ^{−j} U_j(g₀(·, ξ))`.
    pub fn ratio_form(&self, sx: &Sample, sxi: &Sample) -> Complex64 {
        let n = self.fss.order();
        let z = self.z(sx);
        let v = self.g0_boundary(sxi);
        let mut m = CMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = self.g0(sx, sxi);
        for k in 0..n {
            m[(0, k + 1)] = z[k];
            m[(k + 1, 0)] = v[k];
            for c in 0..n {
                m[(k + 1, c + 1)] = self.data.delta_matrix[(k, c)];
            }
        }
        linalg::det(&m) / self.data.delta_value
    }

    /// Kernel matrix `G(x_a, x_b)` on a node set.
    pub fn kernel(&self, xs: &[f64]) -> Result<CMatrix> {
        let samples = self.samples(xs)?;
        let coeffs: Vec<CVector> = samples.iter().map(|s| self.correction_coefficients(s)).collect();
        let zs: Vec<CVector> = samples.iter().map(|s| self.z(s)).collect();
        let m = xs.len();
        let rows: Vec<Vec<Complex64>> = (0..m)
            .into_par_iter()
            .map(|a| (0..m).map(|b| self.g0(&samples[a], &samples[b]) + zs[a].dot(&coeffs[b])).collect())
            .collect();
        Ok(CMatrix::from_fn(m, m, |a, b| rows[a][b]))
    }

    fn panels_for(&self, len: f64) -> usize {
        let r = self.fss.rho().norm();
        ((len * (r / PI + 4.0)).ceil() as usize).max(2)
    }

    /// `(Gf)(x)` by Gauss–Legendre quadrature split at `x`.
    pub fn apply<F>(&self, f: F, xs: &[f64]) -> Result<Vec<Complex64>>
    where
        F: Fn(f64) -> Complex64 + Sync,
    {
        for &x in xs {
            check_unit(x)?;
        }
        xs.par_iter()
            .map(|&x| {
                let sx = self.sample(x)?;
                let mut acc = ZERO;
                for (a, b) in [(0.0, x), (x, 1.0)] {
                    if b - a <= 0.0 {
                        continue;
                    }
                    let rule = CompositeRule::new(a, b, self.panels_for(b - a), 16);
                    for (xi, w) in rule.nodes.iter().zip(&rule.weights) {
                        let sxi = self.sample(*xi)?;
                        acc += self.evaluate_samples(&sx, &sxi).value * f(*xi) * *w;
                    }
                }
                Ok(acc)
            })
            .collect()
    }

    /// `U_j(Gf)` in the normalized condition rows.
    pub fn boundary_of_apply<F>(&self, f: F) -> Result<CVector>
    where
        F: Fn(f64) -> Complex64 + Sync,
    {
        let n = self.fss.order();
        let rule = CompositeRule::new(0.0, 1.0, self.panels_for(1.0), 16);
        let samples = self.samples(&rule.nodes)?;
        let mut acc = CVector::zeros(n);
        for (s, w) in samples.iter().zip(&rule.weights) {
            acc += self.boundary_values(s) * (f(s.x) * *w);
        }
        for (r, (j, _)) in self.data.terms.iter().enumerate() {
            acc[r] *= self.rho_pow(*j as i32);
        }
        Ok(acc)
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Config(format!("point {x} outside [0, 1]")));
    }
    Ok(())
}
