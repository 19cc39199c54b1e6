//! Eigenvalues as zeros of the characteristic determinant in the ρ-plane,
//! counted by the argument principle and polished by Newton's method.

use num_complex::Complex64;
use serde::Serialize;

use crate::complex::{unity_roots, Cx};
use crate::error::{Error, Result};
use crate::fss::{cauchy_end_frame, exponential_frame, FssOptions};
use crate::linalg::{self, CMatrix, I, ZERO};
use crate::model::{BoundaryConditionSet, DifferentialExpression};

/// Search region in the ρ-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Rect { re: (f64, f64), im: (f64, f64) },
    /// `r0 ≤ |ρ| ≤ r1`, `a0 ≤ arg ρ ≤ a1`.
    Sector { r: (f64, f64), arg: (f64, f64) },
}

#[derive(Clone, Copy, Debug)]
enum Edge {
    Line(Complex64, Complex64),
    Arc { r: f64, a0: f64, a1: f64 },
}

impl Edge {
    fn at(&self, t: f64) -> Complex64 {
        match *self {
            Edge::Line(p, q) => p + (q - p) * t,
            Edge::Arc { r, a0, a1 } => Complex64::from_polar(r, a0 + (a1 - a0) * t),
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Edge::Line(p, q) => (q - p).norm(),
            Edge::Arc { r, a0, a1 } => r * (a1 - a0).abs(),
        }
    }
}

impl Region {
    /// The default search region: `1 ≤ |ρ| ≤ r_max` over one branch of `λ^{1/n}`,
    /// rotated slightly so that the real axis lies inside.
    pub fn branch(n: usize, r_max: f64) -> Region {
        let tilt = 0.1;
        Region::Sector {
            r: (1.0, r_max),
            arg: (-tilt, std::f64::consts::TAU / n as f64 - tilt),
        }
    }

    fn edges(&self) -> Vec<Edge> {
        match *self {
            Region::Rect { re, im } => {
                let c = |x: f64, y: f64| Complex64::new(x, y);
                vec![
                    Edge::Line(c(re.0, im.0), c(re.1, im.0)),
                    Edge::Line(c(re.1, im.0), c(re.1, im.1)),
                    Edge::Line(c(re.1, im.1), c(re.0, im.1)),
                    Edge::Line(c(re.0, im.1), c(re.0, im.0)),
                ]
            }
            Region::Sector { r, arg } => vec![
                Edge::Line(Complex64::from_polar(r.0, arg.0), Complex64::from_polar(r.1, arg.0)),
                Edge::Arc { r: r.1, a0: arg.0, a1: arg.1 },
                Edge::Line(Complex64::from_polar(r.1, arg.1), Complex64::from_polar(r.0, arg.1)),
                Edge::Arc { r: r.0, a0: arg.1, a1: arg.0 },
            ],
        }
    }

    pub fn center(&self) -> Complex64 {
        match *self {
            Region::Rect { re, im } => Complex64::new(0.5 * (re.0 + re.1), 0.5 * (im.0 + im.1)),
            Region::Sector { r, arg } => Complex64::from_polar(0.5 * (r.0 + r.1), 0.5 * (arg.0 + arg.1)),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Region::Rect { re, im } => (re.1 - re.0).hypot(im.1 - im.0),
            Region::Sector { r, arg } => (r.1 - r.0).hypot(r.1 * (arg.1 - arg.0)),
        }
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        match *self {
            Region::Rect { re, im } => {
                z.re >= re.0 - slack && z.re <= re.1 + slack && z.im >= im.0 - slack && z.im <= im.1 + slack
            }
            Region::Sector { r, arg } => {
                let m = z.norm();
                if m < r.0 - slack || m > r.1 + slack {
                    return false;
                }
                let mid = 0.5 * (arg.0 + arg.1);
                let a = mid + (z * Complex64::from_polar(1.0, -mid)).arg();
                let s = slack / m.max(1e-300);
                a >= arg.0 - s && a <= arg.1 + s
            }
        }
    }

    fn split(&self, frac: f64) -> [Region; 4] {
        match *self {
            Region::Rect { re, im } => {
                let x = re.0 + frac * (re.1 - re.0);
                let y = im.0 + (1.0 - frac) * (im.1 - im.0);
                [
                    Region::Rect { re: (re.0, x), im: (im.0, y) },
                    Region::Rect { re: (x, re.1), im: (im.0, y) },
                    Region::Rect { re: (re.0, x), im: (y, im.1) },
                    Region::Rect { re: (x, re.1), im: (y, im.1) },
                ]
            }
            Region::Sector { r, arg } => {
                let m = r.0 + frac * (r.1 - r.0);
                let a = arg.0 + (1.0 - frac) * (arg.1 - arg.0);
                [
                    Region::Sector { r: (r.0, m), arg: (arg.0, a) },
                    Region::Sector { r: (m, r.1), arg: (arg.0, a) },
                    Region::Sector { r: (r.0, m), arg: (a, arg.1) },
                    Region::Sector { r: (m, r.1), arg: (a, arg.1) },
                ]
            }
        }
    }

    /// Moves every side outward by `delta` (inward when negative).
    fn perturbed(&self, delta: f64) -> Region {
        match *self {
            Region::Rect { re, im } => Region::Rect {
                re: (re.0 - delta, re.1 + delta),
                im: (im.0 - delta, im.1 + delta),
            },
            Region::Sector { r, arg } => {
                let da = delta / r.1.max(1.0);
                Region::Sector {
                    r: ((r.0 - delta).max(1e-3), r.1 + delta),
                    arg: (arg.0 - da, arg.1 + da),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub fss: FssOptions,
    /// Contour perturbations tried when a zero sits on the contour.
    pub max_attempts: usize,
    pub max_depth: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            fss: FssOptions::default(),
            max_attempts: 5,
            max_depth: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Eigenvalue {
    pub lambda: Cx,
    pub rho: Cx,
    pub multiplicity: usize,
    /// `|χ(ρ)|` relative to the row-norm product.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenSearch {
    pub region: Region,
    pub winding: i64,
    pub attempts: usize,
    pub eigenvalues: Vec<Eigenvalue>,
}

/// `χ(ρ) = det[ρ^{−j} U_j(y_k) e^{−iρε_k s_k}]` with Cauchy-normalized `y_k`.
struct CharFunction<'a> {
    terms: Vec<crate::characteristic::RowTerms>,
    expr: &'a DifferentialExpression,
    opts: FssOptions,
    eps: Vec<Complex64>,
    e0: CMatrix,
}

impl CharFunction<'_> {
    /// Matrix and the product over rows of the Euclidean norm of the
    /// term-wise magnitudes, which stays O(1) when a whole row cancels.
    fn matrix(&self, rho: Complex64, decaying: &[bool]) -> Result<(CMatrix, f64)> {
        let n = self.eps.len();
        let end = cauchy_end_frame(self.expr, rho, &self.opts)?;
        let mut m = CMatrix::zeros(n, n);
        let mut scale = 1.0;
        for (r, (j, row)) in self.terms.iter().enumerate() {
            let mut row_sq = 0.0;
            for k in 0..n {
                let s = if decaying[k] { 0.0 } else { 1.0 };
                let mut acc = ZERO;
                let mut mag = 0.0;
                for &(e, order, c) in row {
                    let frame = if e == 0 { &self.e0 } else { &end };
                    let v = c
                        * rho.powi(order as i32 - *j as i32)
                        * frame[(order, k)]
                        * (I * rho * self.eps[k] * (e as f64 - s)).exp();
                    acc += v;
                    mag += v.norm();
                }
                m[(r, k)] = acc;
                row_sq += mag * mag;
            }
            scale *= row_sq.sqrt();
        }
        Ok((m, scale))
    }

    /// Value and reference scale.
    fn eval(&self, rho: Complex64, decaying: &[bool]) -> Result<(Complex64, f64)> {
        let (m, scale) = self.matrix(rho, decaying)?;
        Ok((linalg::det(&m), scale))
    }

    fn split(&self, center: Complex64) -> Vec<bool> {
        self.eps.iter().map(|e| (center * e).im > 0.0).collect()
    }
}

const ZERO_ON_CONTOUR: f64 = 1e-11;
const MAX_PHASE_STEP: f64 = 0.6;
const NEWTON_ACCEPT: f64 = 1e-8;
const SPLITS: [f64; 4] = [0.5123, 0.4671, 0.5389, 0.4417];

impl CharFunction<'_> {
    /// Winding number of χ around the region boundary.
    fn winding(&self, region: &Region) -> Result<i64> {
        let split = self.split(region.center());
        let mut total = 0.0;
        for edge in region.edges() {
            total += self.edge_phase(&edge, &split)?;
        }
        let w = total / std::f64::consts::TAU;
        let r = w.round();
        if (w - r).abs() > 0.2 {
            return Err(Error::WindingMismatch { parent: r as i64, children: 0 });
        }
        Ok(r as i64)
    }

    fn edge_phase(&self, edge: &Edge, split: &[bool]) -> Result<f64> {
        let pieces = ((edge.length() * 4.0).ceil() as usize).max(8);
        let value = |t: f64| -> Result<Complex64> {
            let (v, scale) = self.eval(edge.at(t), split)?;
            if v.norm() <= ZERO_ON_CONTOUR * scale {
                return Err(Error::ZeroOnContour { attempts: 0 });
            }
            Ok(v)
        };
        let mut total = 0.0;
        let mut t0 = 0.0;
        let mut v0 = value(0.0)?;
        for p in 1..=pieces {
            let t1 = p as f64 / pieces as f64;
            let v1 = value(t1)?;
            total += self.unwrap(&value, t0, v0, t1, v1, 0)?;
            t0 = t1;
            v0 = v1;
        }
        Ok(total)
    }

    fn unwrap(
        &self,
        value: &dyn Fn(f64) -> Result<Complex64>,
        t0: f64,
        v0: Complex64,
        t1: f64,
        v1: Complex64,
        depth: usize,
    ) -> Result<f64> {
        let step = (v1 / v0).arg();
        if step.abs() <= MAX_PHASE_STEP {
            return Ok(step);
        }
        if depth > 30 {
            return Err(Error::ZeroOnContour { attempts: 0 });
        }
        let tm = 0.5 * (t0 + t1);
        let vm = value(tm)?;
        Ok(self.unwrap(value, t0, v0, tm, vm, depth + 1)? + self.unwrap(value, tm, vm, t1, v1, depth + 1)?)
    }

    fn newton(&self, start: Complex64, multiplicity: usize, split: &[bool], reach: f64) -> Result<(Complex64, f64)> {
        let mut z = start;
        for _ in 0..60 {
            let h = 1e-6 * z.norm().max(1.0);
            let (f, _) = self.eval(z, split)?;
            let (fp, _) = self.eval(z + h, split)?;
            let (fm, _) = self.eval(z - h, split)?;
            let d = (fp - fm) / (2.0 * h);
            if d.norm() == 0.0 || !d.is_finite() {
                break;
            }
            let step = f / d * multiplicity as f64;
            if !step.is_finite() || (z - step - start).norm() > reach {
                break;
            }
            z -= step;
            if step.norm() <= 1e-15 * z.norm().max(1.0) {
                break;
            }
        }
        let (f, scale) = self.eval(z, split)?;
        Ok((z, f.norm() / scale.max(f64::MIN_POSITIVE)))
    }

    fn isolate(&self, region: &Region, winding: i64, depth: usize, max_depth: usize, out: &mut Vec<(Complex64, usize, f64)>) -> Result<()> {
        if winding <= 0 {
            return Ok(());
        }
        let tiny = region.diameter() <= 1e-9 * region.center().norm().max(1.0);
        let split = self.split(region.center());
        let (z, res) = self.newton(region.center(), winding as usize, &split, 2.0 * region.diameter())?;
        if (res <= NEWTON_ACCEPT && region.contains(z, 1e-9 * z.norm().max(1.0))) || tiny || depth >= max_depth {
            let z = if region.contains(z, region.diameter()) { z } else { region.center() };
            out.push((z, winding as usize, res));
            return Ok(());
        }
        let mut last = Error::WindingMismatch { parent: winding, children: 0 };
        for frac in SPLITS {
            let children = region.split(frac);
            let windings: Result<Vec<i64>> = children.iter().map(|c| self.winding(c)).collect();
            match windings {
                Ok(ws) if ws.iter().sum::<i64>() == winding => {
                    for (c, w) in children.iter().zip(ws) {
                        self.isolate(c, w, depth + 1, max_depth, out)?;
                    }
                    return Ok(());
                }
                Err(Error::ZeroOnContour { .. }) if region.diameter() <= 1e-6 * region.center().norm().max(1.0) => {
                    out.push((region.center(), winding as usize, f64::NAN));
                    return Ok(());
                }
                Ok(ws) => last = Error::WindingMismatch { parent: winding, children: ws.iter().sum() },
                Err(e) => last = e,
            }
        }
        Err(last)
    }
}

/// Eigenvalues whose ρ lies in `region`. Zeros with `|ρ| < 1` are not sought.
pub fn eigenvalues_in(
    bc: &BoundaryConditionSet,
    expr: &DifferentialExpression,
    region: Region,
    opts: &EigenOptions,
) -> Result<EigenSearch> {
    let n = expr.order();
    if bc.order() != n || bc.row_count() != n {
        return Err(Error::DegenerateConditions { rank: bc.row_count(), n });
    }
    let f = CharFunction {
        terms: bc.row_terms(),
        expr,
        opts: opts.fss,
        eps: unity_roots(n),
        e0: exponential_frame(n),
    };
    let size = region.diameter();
    let mut attempts = 0;
    loop {
        let k = attempts as f64;
        let delta = if attempts == 0 {
            0.0
        } else {
            let sign = if attempts % 2 == 1 { 1.0 } else { -1.0 };
            sign * (k / 2.0).ceil() * 7e-3 * size
        };
        let current = region.perturbed(delta);
        let outcome = f.winding(&current).and_then(|w| {
            let mut found = Vec::new();
            f.isolate(&current, w, 0, opts.max_depth, &mut found)?;
            Ok((w, found))
        });
        match outcome {
            Ok((w, found)) => {
                let mut eigenvalues: Vec<Eigenvalue> = found
                    .into_iter()
                    .map(|(rho, multiplicity, residual)| Eigenvalue {
                        lambda: Cx(rho.powu(n as u32)),
                        rho: Cx(rho),
                        multiplicity,
                        residual,
                    })
                    .collect();
                eigenvalues.sort_by(|a, b| {
                    a.lambda.0.norm().total_cmp(&b.lambda.0.norm()).then(a.lambda.0.arg().total_cmp(&b.lambda.0.arg()))
                });
                return Ok(EigenSearch {
                    region: current,
                    winding: w,
                    attempts: attempts + 1,
                    eigenvalues,
                });
            }
            Err(Error::ZeroOnContour { .. }) | Err(Error::WindingMismatch { .. }) if attempts + 1 < opts.max_attempts => {
                attempts += 1;
            }
            Err(Error::ZeroOnContour { .. }) => return Err(Error::ZeroOnContour { attempts: attempts + 1 }),
            Err(e) => return Err(e),
        }
    }
}
