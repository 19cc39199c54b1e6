//! Fundamental systems of `l(y) = λy` with exponential asymptotics.
//!
//! Every backend is represented through the O(1) frame
//! `N(x)[k][j] = Dᵏy_j(x) / (ρᵏ e^{iρε_j x})`, so `Dᵏy_j = ρᵏ N[k][j] e^{iρε_j x}`.
//! For `Dⁿ` the frame is the constant matrix `(ε_jᵏ)`.
//!
//! With nonzero coefficients the system is fixed by a decoupled multiple
//! shooting scheme: on each of `K ≈ 2|ρ|` segments the scaled system
//! `σ_k = Dᵏy / ρᵏ` is propagated, and solution `j` is pinned by
//! `a_j(0) = 1`, zero initial data for every faster-decaying exponential and
//! zero terminal data for every slower one. This keeps every column of the
//! frame bounded uniformly in ρ.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::banded::ProfileSystem;
use crate::complex::{root, unity_roots};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ZERO};
use crate::model::DifferentialExpression;
use crate::ode::{integrate, OdeOptions};
use crate::quadrature::CompositeRule;
use crate::spectral::SpectralPoint;

#[derive(Clone, Copy, Debug)]
pub struct FssOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Radius beyond which asymptotic statements are asserted.
    pub r0: f64,
}

impl Default for FssOptions {
    fn default() -> Self {
        FssOptions {
            rtol: 1e-10,
            atol: 1e-12,
            r0: 10.0,
        }
    }
}

impl FssOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    ExactExponential,
    NumericIvp,
}

#[derive(Clone, Debug)]
struct Shooting {
    h: f64,
    frames: Vec<CMatrix>,
}

#[derive(Clone, Debug)]
pub struct FundamentalSystem {
    expr: DifferentialExpression,
    point: SpectralPoint,
    eps: Vec<Complex64>,
    e0: CMatrix,
    shooting: Option<Shooting>,
    opts: FssOptions,
}

/// `(ε_mᵏ)` with rows k and columns m.
pub fn exponential_frame(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |k, m| root(n, (k * m) as i64))
}

/// Right-hand side of the scaled system for several columns at once.
/// Column `c` is rescaled by `e^{−i shift_c x}`.
struct ScaledSystem<'a> {
    expr: &'a DifferentialExpression,
    n: usize,
    irho: Complex64,
    /// `i ρ^{k−n+1}`, k = 0..n−2.
    weights: Vec<Complex64>,
    shifts: Vec<Complex64>,
}

impl<'a> ScaledSystem<'a> {
    fn new(expr: &'a DifferentialExpression, rho: Complex64, shifts: Vec<Complex64>) -> Self {
        let n = expr.order();
        let i = Complex64::new(0.0, 1.0);
        let weights = (0..n.saturating_sub(1))
            .map(|k| i * rho.powi(k as i32 - n as i32 + 1))
            .collect();
        ScaledSystem {
            expr,
            n,
            irho: i * rho,
            weights,
            shifts,
        }
    }

    fn rhs(&self, x: f64, w: &[Complex64], dw: &mut [Complex64], p: &mut [Complex64]) {
        let n = self.n;
        self.expr.eval(x, p);
        let i = Complex64::new(0.0, 1.0);
        for (c, shift) in self.shifts.iter().enumerate() {
            let wc = &w[c * n..(c + 1) * n];
            let dc = &mut dw[c * n..(c + 1) * n];
            let is = i * shift;
            for k in 0..n - 1 {
                dc[k] = self.irho * wc[k + 1] - is * wc[k];
            }
            let mut last = self.irho * wc[0] - is * wc[n - 1];
            for k in 0..n - 1 {
                if p[k] != ZERO {
                    last -= self.weights[k] * p[k] * wc[k];
                }
            }
            dc[n - 1] = last;
        }
    }

    fn propagate(&self, x0: f64, x1: f64, state: &mut [Complex64], opts: &OdeOptions) -> Result<()> {
        let mut p = vec![ZERO; self.n.saturating_sub(1)];
        integrate(|x, w, dw| self.rhs(x, w, dw, &mut p), x0, x1, state, opts).map(|_| ())
    }
}

impl FundamentalSystem {
    /// Exact exponentials for `Dⁿ`, numeric shooting otherwise.
    pub fn new(expr: &DifferentialExpression, point: SpectralPoint, opts: &FssOptions) -> Result<Self> {
        if point.n != expr.order() {
            return Err(Error::Config(format!("spectral point of order {} for expression of order {}", point.n, expr.order())));
        }
        let n = expr.order();
        let mut fss = FundamentalSystem {
            expr: expr.clone(),
            point,
            eps: unity_roots(n),
            e0: exponential_frame(n),
            shooting: None,
            opts: *opts,
        };
        if !expr.is_essential() {
            fss.shooting = Some(fss.shoot()?);
        }
        Ok(fss)
    }

    pub fn exact(n: usize, point: SpectralPoint) -> Self {
        FundamentalSystem {
            expr: DifferentialExpression::essential(n),
            point,
            eps: unity_roots(n),
            e0: exponential_frame(n),
            shooting: None,
            opts: FssOptions::default(),
        }
    }

    pub fn backend(&self) -> Backend {
        if self.shooting.is_some() {
            Backend::NumericIvp
        } else {
            Backend::ExactExponential
        }
    }

    pub fn point(&self) -> &SpectralPoint {
        &self.point
    }

    pub fn order(&self) -> usize {
        self.point.n
    }

    pub fn rho(&self) -> Complex64 {
        self.point.rho
    }

    pub fn eps(&self) -> &[Complex64] {
        &self.eps
    }

    pub fn expression(&self) -> &DifferentialExpression {
        &self.expr
    }

    /// Asymptotic statements hold only beyond `R₀`.
    pub fn asymptotic(&self) -> bool {
        self.point.rho.norm() >= self.opts.r0
    }

    fn shoot(&self) -> Result<Shooting> {
        let n = self.order();
        let rho = self.rho();
        let segments = ((2.0 * rho.norm()).ceil() as usize).max(8);
        let h = 1.0 / segments as f64;
        let ode = self.opts.ode();
        let e0_adj = self.e0.adjoint() / Complex64::new(n as f64, 0.0);
        let i = Complex64::new(0.0, 1.0);

        // Segment transfer matrices in exponential coordinates, each column
        // m integrated relative to its own exponential.
        let transfers: Vec<Result<CMatrix>> = (0..segments)
            .into_par_iter()
            .map(|s| {
                let x0 = s as f64 * h;
                let x1 = if s + 1 == segments { 1.0 } else { (s + 1) as f64 * h };
                let shifts: Vec<Complex64> = self.eps.iter().map(|e| rho * e).collect();
                let sys = ScaledSystem::new(&self.expr, rho, shifts);
                let mut state: Vec<Complex64> = self.e0.iter().copied().collect();
                sys.propagate(x0, x1, &mut state, &ode)?;
                let w = CMatrix::from_column_slice(n, n, &state);
                Ok(&e0_adj * w)
            })
            .collect();
        let transfers: Vec<CMatrix> = transfers.into_iter().collect::<Result<_>>()?;

        let im: Vec<f64> = self.eps.iter().map(|e| (rho * e).im).collect();
        let tie = 1e-12 * rho.norm().max(1.0);
        let size = n * (segments + 1);

        let columns: Vec<Result<Vec<Complex64>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let forward: Vec<usize> = (0..n).filter(|&m| im[m] >= im[j] - tie).collect();
                let backward: Vec<usize> = (0..n).filter(|&m| im[m] < im[j] - tie).collect();
                let mut sys = ProfileSystem::new(size);
                for &m in &forward {
                    let mut row = vec![ZERO; m + 1];
                    row[m] = Complex64::new(1.0, 0.0);
                    sys.push_row(0, row, if m == j { Complex64::new(1.0, 0.0) } else { ZERO });
                }
                for (s, t) in transfers.iter().enumerate() {
                    let x0 = s as f64 * h;
                    let x1 = if s + 1 == segments { 1.0 } else { (s + 1) as f64 * h };
                    let len = x1 - x0;
                    for l in 0..n {
                        let mut row = vec![ZERO; 2 * n];
                        for m in 0..n {
                            row[m] = -t[(l, m)] * (i * rho * (self.eps[m] - self.eps[j]) * len).exp();
                        }
                        row[n + l] = Complex64::new(1.0, 0.0);
                        sys.push_row(s * n, row, ZERO);
                    }
                }
                for &m in &backward {
                    let mut row = vec![ZERO; n];
                    row[m] = Complex64::new(1.0, 0.0);
                    sys.push_row(segments * n, row, ZERO);
                }
                sys.solve()
            })
            .collect();

        let mut frames = vec![CMatrix::zeros(n, n); segments + 1];
        for (j, col) in columns.into_iter().enumerate() {
            let a = col?;
            for (s, frame) in frames.iter_mut().enumerate() {
                let coords = CVector::from_column_slice(&a[s * n..(s + 1) * n]);
                frame.set_column(j, &(&self.e0 * coords));
            }
        }
        Ok(Shooting { h, frames })
    }

    /// The frame `N(x)`.
    pub fn frame(&self, x: f64) -> Result<CMatrix> {
        let Some(sh) = &self.shooting else {
            return Ok(self.e0.clone());
        };
        let n = self.order();
        let last = sh.frames.len() - 1;
        let node = ((x / sh.h).round() as isize).clamp(0, last as isize) as usize;
        let xn = if node == last { 1.0 } else { node as f64 * sh.h };
        if (x - xn).abs() < 1e-15 {
            return Ok(sh.frames[node].clone());
        }
        let rho = self.rho();
        let shifts: Vec<Complex64> = self.eps.iter().map(|e| rho * e).collect();
        let sys = ScaledSystem::new(&self.expr, rho, shifts);
        let mut state: Vec<Complex64> = sh.frames[node].iter().copied().collect();
        sys.propagate(xn, x, &mut state, &self.opts.ode())?;
        Ok(CMatrix::from_column_slice(n, n, &state))
    }

    pub fn frames(&self, xs: &[f64]) -> Result<Vec<CMatrix>> {
        if self.shooting.is_none() {
            return Ok(vec![self.e0.clone(); xs.len()]);
        }
        xs.par_iter().map(|&x| self.frame(x)).collect()
    }

    /// `M(x)[k][j] = Dᵏy_j(x)`.
    pub fn evaluate(&self, x: f64) -> Result<CMatrix> {
        let frame = self.frame(x)?;
        Ok(self.unscale(&frame, x))
    }

    fn unscale(&self, frame: &CMatrix, x: f64) -> CMatrix {
        let rho = self.rho();
        let i = Complex64::new(0.0, 1.0);
        CMatrix::from_fn(frame.nrows(), frame.ncols(), |k, j| {
            frame[(k, j)] * rho.powi(k as i32) * (i * rho * self.eps[j] * x).exp()
        })
    }

    /// `d = N(x)⁻¹ e_{n−1}`, the O(1) part of the dual system.
    pub fn dual_frame(frame: &CMatrix) -> Result<CVector> {
        let n = frame.nrows();
        let mut e = CVector::zeros(n);
        e[n - 1] = Complex64::new(1.0, 0.0);
        frame
            .clone()
            .lu()
            .solve(&e)
            .ok_or_else(|| Error::Singular("fundamental matrix is singular".into()))
    }

    /// `ỹ_j(x) = (M(x)⁻¹)[j][n−1] = e^{−iρε_j x} d_j / ρ^{n−1}`.
    pub fn dual(&self, x: f64) -> Result<CVector> {
        let n = self.order();
        let d = Self::dual_frame(&self.frame(x)?)?;
        let rho = self.rho();
        let i = Complex64::new(0.0, 1.0);
        let scale = rho.powi(-(n as i32 - 1));
        Ok(CVector::from_fn(n, |j, _| (-i * rho * self.eps[j] * x).exp() * d[j] * scale))
    }

    /// `max |N(x)[k][j] / ε_jᵏ − 1|`.
    pub fn bracket_deviation(&self, x: f64) -> Result<f64> {
        Ok(frame_deviation(&self.frame(x)?, &self.eps))
    }

    /// `ρ^{n(n−1)/2} det N(x)`, the Wronskian `det M(x)` (constant in x).
    pub fn wronskian(&self, x: f64) -> Result<Complex64> {
        let n = self.order() as i32;
        Ok(self.rho().powi(n * (n - 1) / 2) * linalg::det(&self.frame(x)?))
    }
}

pub fn frame_deviation(frame: &CMatrix, eps: &[Complex64]) -> f64 {
    let n = eps.len();
    let mut worst = 0.0f64;
    for k in 0..n {
        for j in 0..n {
            worst = worst.max((frame[(k, j)] / eps[j].powi(k as i32) - 1.0).norm());
        }
    }
    worst
}

/// Frame at x = 1 of the system with Cauchy data `Dᵏy_j(0) = (ρε_j)ᵏ`.
/// Entire in ρ, which makes it the right object for zero counting.
pub fn cauchy_end_frame(expr: &DifferentialExpression, rho: Complex64, opts: &FssOptions) -> Result<CMatrix> {
    let n = expr.order();
    let e0 = exponential_frame(n);
    if expr.is_essential() {
        return Ok(e0);
    }
    let eps = unity_roots(n);
    let sys = ScaledSystem::new(expr, rho, eps.iter().map(|e| rho * e).collect());
    let mut state: Vec<Complex64> = e0.iter().copied().collect();
    sys.propagate(0.0, 1.0, &mut state, &opts.ode())?;
    Ok(CMatrix::from_column_slice(n, n, &state))
}

/// Rescaled solutions `z_k(x) = y_k(x) e^{−iρε_k s_k}` and
/// `u_k(ξ) = n(ρε_k)^{n−1} ỹ_k(ξ) e^{iρε_k s'_k}` with `s_k = 0, s'_k = 1`
/// for decaying k and `s_k = 1, s'_k = 0` otherwise.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub z: Vec<Complex64>,
    pub u: Vec<Complex64>,
}

pub fn rescaled_from_frame(fss: &FundamentalSystem, decaying: &[bool], frame: &CMatrix, x: f64) -> Result<Rescaled> {
    let n = fss.order();
    let rho = fss.rho();
    let eps = fss.eps();
    let i = Complex64::new(0.0, 1.0);
    let d = FundamentalSystem::dual_frame(frame)?;
    let mut z = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for k in 0..n {
        let (s, s_dual) = if decaying[k] { (0.0, 1.0) } else { (1.0, 0.0) };
        z.push(frame[(0, k)] * (i * rho * eps[k] * (x - s)).exp());
        u.push(eps[k].powi(n as i32 - 1) * n as f64 * d[k] * (i * rho * eps[k] * (s_dual - x)).exp());
    }
    Ok(Rescaled { z, u })
}

pub fn rescaled_systems(fss: &FundamentalSystem, decaying: &[bool], x: f64) -> Result<Rescaled> {
    rescaled_from_frame(fss, decaying, &fss.frame(x)?, x)
}

/// Nodes per oscillation wavelength required by [`gram_condition`].
pub const GRAM_NODES_PER_WAVELENGTH: usize = 20;

/// Condition number of the Gram matrix of `{z_k / ‖z_k‖}` in `L²(0, 1)`.
pub fn gram_condition(fss: &FundamentalSystem, decaying: &[bool]) -> Result<f64> {
    let r = fss.rho().norm();
    let panels = ((r / std::f64::consts::TAU).ceil() as usize).max(4);
    gram_condition_with(fss, decaying, panels, GRAM_NODES_PER_WAVELENGTH)
}

pub fn gram_condition_with(fss: &FundamentalSystem, decaying: &[bool], panels: usize, order: usize) -> Result<f64> {
    let r = fss.rho().norm();
    let required = ((r / std::f64::consts::TAU).ceil() as usize).max(1) * GRAM_NODES_PER_WAVELENGTH;
    let nodes = panels * order;
    if nodes < required {
        return Err(Error::UnderResolved { nodes, required });
    }
    let rule = CompositeRule::new(0.0, 1.0, panels, order);
    let frames = fss.frames(&rule.nodes)?;
    let n = fss.order();
    let mut values = vec![Vec::with_capacity(rule.len()); n];
    for (x, frame) in rule.nodes.iter().zip(&frames) {
        let rs = rescaled_from_frame(fss, decaying, frame, *x)?;
        for k in 0..n {
            values[k].push(rs.z[k]);
        }
    }
    Ok(normalized_gram_condition(&values, &rule.weights))
}

/// Condition number of the normalized Gram matrix of sampled functions.
pub fn normalized_gram_condition(values: &[Vec<Complex64>], weights: &[f64]) -> f64 {
    let m = values.len();
    let mut g = CMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            g[(a, b)] = values[a]
                .iter()
                .zip(&values[b])
                .zip(weights)
                .map(|((x, y), w)| x * y.conj() * *w)
                .sum();
        }
    }
    let diag: Vec<f64> = (0..m).map(|a| g[(a, a)].re.sqrt()).collect();
    let gn = CMatrix::from_fn(m, m, |a, b| g[(a, b)] / (diag[a] * diag[b]));
    let ev = linalg::hermitian_eigenvalues(&gn);
    let lo = ev.first().copied().unwrap_or(1.0);
    let hi = ev.last().copied().unwrap_or(1.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coefficient;
    use crate::spectral::decay_profile;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exact_values_at_the_ends() {
        let sp = SpectralPoint::new(c(0.0, -4.0), 2).unwrap();
        let fss = FundamentalSystem::exact(2, sp);
        let m0 = fss.evaluate(0.0).unwrap();
        let rho = sp.rho;
        assert!((m0[(0, 0)] - 1.0).norm() < 1e-15 && (m0[(0, 1)] - 1.0).norm() < 1e-15);
        assert!((m0[(1, 0)] - rho).norm() < 1e-14 && (m0[(1, 1)] + rho).norm() < 1e-14);
        let m1 = fss.evaluate(1.0).unwrap();
        for (j, e) in [c(1.0, 0.0), c(-1.0, 0.0)].iter().enumerate() {
            let ex = (c(0.0, 1.0) * rho * e).exp();
            assert!((m1[(0, j)] - ex).norm() < 1e-13 * ex.norm());
            assert!((m1[(1, j)] - rho * e * ex).norm() < 1e-13 * (rho * ex).norm());
        }
    }

    #[test]
    fn exact_dual_matches_inverse() {
        let sp = SpectralPoint::new(c(9.0, 0.0), 2).unwrap();
        let fss = FundamentalSystem::exact(2, sp);
        let d = fss.dual(0.0).unwrap();
        assert!((d[0] - 1.0 / 6.0).norm() < 1e-15);
        assert!((d[1] + 1.0 / 6.0).norm() < 1e-15);
        for &x in &[0.0, 0.3, 1.0] {
            let m = fss.evaluate(x).unwrap();
            let d = fss.dual(x).unwrap();
            for k in 0..2 {
                let s: Complex64 = (0..2).map(|j| d[j] * m[(k, j)]).sum();
                let want = if k == 1 { 1.0 } else { 0.0 };
                assert!((s - want).norm() < 1e-13);
            }
        }
    }

    /// Constant coefficient `p₀` has the closed-form propagator built from
    /// `e^{iμε_j x}`, `μ² = λ − p₀`. Decaying columns are propagated backwards
    /// and growing ones forwards so the comparison is well conditioned.
    #[test]
    fn numeric_backend_against_closed_form() {
        let p0 = c(0.1, 0.0);
        let expr = DifferentialExpression::new(2, vec![Coefficient::Constant(p0)]).unwrap();
        let sp = SpectralPoint::on_ray(3.0 * PI / 2.0, 50.0, 2).unwrap();
        let fss = FundamentalSystem::new(&expr, sp, &FssOptions::default()).unwrap();
        assert_eq!(fss.backend(), Backend::NumericIvp);
        let mu = (sp.lambda - p0).sqrt();
        let e = CMatrix::from_fn(2, 2, |k, j| (mu * if j == 0 { 1.0 } else { -1.0 }).powi(k as i32));
        let e_inv = e.clone().try_inverse().unwrap();
        let propagator = |t: f64| {
            let d = CMatrix::from_diagonal(&CVector::from_vec(vec![
                (c(0.0, 1.0) * mu * t).exp(),
                (c(0.0, -1.0) * mu * t).exp(),
            ]));
            &e * d * &e_inv
        };
        let prof = crate::spectral::decay_profile(&sp, 1e-6);
        let xs = [0.0, 0.25, 0.5, 0.9, 1.0];
        let ms: Vec<CMatrix> = xs.iter().map(|&x| fss.evaluate(x).unwrap()).collect();
        for w in 0..xs.len() - 1 {
            for j in 0..2 {
                let (from, to) = if prof.decaying[j] { (w + 1, w) } else { (w, w + 1) };
                let predicted = propagator(xs[to] - xs[from]) * ms[from].column(j);
                let err = (ms[to].column(j) - &predicted).norm() / ms[to].column(j).norm();
                assert!(err < 1e-7, "column {j} between {} and {}: {err:e}", xs[from], xs[to]);
            }
        }
        for &x in &xs {
            let dev = fss.bracket_deviation(x).unwrap();
            assert!(dev <= 2.0 * 0.1 / 50.0, "deviation {dev}");
        }
    }

    #[test]
    fn wronskian_is_constant_for_numeric_backend() {
        let expr = DifferentialExpression::new(
            3,
            vec![Coefficient::Poly(vec![c(1.0, 0.5), c(-2.0, 0.0)]), Coefficient::Constant(c(0.0, 0.7))],
        )
        .unwrap();
        let sp = SpectralPoint::on_ray(3.0 * PI / 2.0, 15.0, 3).unwrap();
        let fss = FundamentalSystem::new(&expr, sp, &FssOptions::default()).unwrap();
        let w0 = fss.wronskian(0.0).unwrap();
        for &x in &[0.13, 0.5, 1.0] {
            let w = fss.wronskian(x).unwrap();
            assert!((w - w0).norm() <= 1e-8 * w0.norm());
        }
    }

    #[test]
    fn rescaled_values_are_bounded() {
        let sp = SpectralPoint::on_ray(3.0 * PI / 2.0, 50.0, 2).unwrap();
        let fss = FundamentalSystem::exact(2, sp);
        let prof = decay_profile(&sp, 1e-6);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let r = rescaled_systems(&fss, &prof.decaying, x).unwrap();
            for k in 0..2 {
                assert!(r.z[k].norm() <= 1.0 + 1e-10 && r.u[k].norm() <= 1.0 + 1e-10);
            }
            let want = (c(0.0, 1.0) * sp.rho * (1.0 - x)).exp();
            assert!((r.u[0] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn gram_examples() {
        let one = vec![vec![c(1.0, 0.0), c(2.0, 0.0)]];
        assert!((normalized_gram_condition(&one, &[0.5, 0.5]) - 1.0).abs() < 1e-14);
        let sp = SpectralPoint::on_ray(3.0 * PI / 2.0, 100.0, 2).unwrap();
        let fss = FundamentalSystem::exact(2, sp);
        let prof = decay_profile(&sp, 1e-6);
        let k = gram_condition(&fss, &prof.decaying).unwrap();
        assert!(k >= 1.0 && k <= 100.0, "{k}");
        assert!(matches!(gram_condition_with(&fss, &prof.decaying, 1, 5), Err(Error::UnderResolved { .. })));
    }
}
