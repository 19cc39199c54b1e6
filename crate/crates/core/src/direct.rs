//! Direct solution of `(l − λ)u = f` with the boundary conditions, by
//! superposition shooting. Independent of the Green's function machinery.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ZERO};
use crate::model::{BoundaryConditionSet, DifferentialExpression};
use crate::ode::{integrate, OdeOptions};

#[derive(Clone, Debug)]
pub struct DirectSolution {
    pub xs: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Residual of the boundary system `M c = r`.
    pub residual: f64,
    pub condition: f64,
}

/// Solves on the points `xs` (any order, inside [0, 1]). `λ = 0` is allowed.
pub fn solve_bvp_direct<F>(
    bc: &BoundaryConditionSet,
    expr: &DifferentialExpression,
    lambda: Complex64,
    f: F,
    xs: &[f64],
    opts: &OdeOptions,
) -> Result<DirectSolution>
where
    F: Fn(f64) -> Complex64,
{
    let n = expr.order();
    if bc.order() != n {
        return Err(Error::Config(format!("conditions of order {} for expression of order {n}", bc.order())));
    }
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Config("evaluation points must lie in [0, 1]".into()));
    }
    // σ_k = Dᵏu / sᵏ keeps the state O(1) per unit of |ρ|.
    let s = lambda.norm().powf(1.0 / n as f64).max(1.0);
    let i = Complex64::new(0.0, 1.0);
    let cols = n + 1;
    let mut p = vec![ZERO; n.saturating_sub(1)];
    let rhs = |x: f64, y: &[Complex64], dy: &mut [Complex64], p: &mut [Complex64]| {
        expr.eval(x, p);
        for col in 0..cols {
            let v = &y[col * n..(col + 1) * n];
            let out = &mut dy[col * n..(col + 1) * n];
            for k in 0..n - 1 {
                out[k] = i * s * v[k + 1];
            }
            let mut top = lambda * v[0];
            for (k, pk) in p.iter().enumerate() {
                top -= pk * s.powi(k as i32) * v[k];
            }
            if col == n {
                top += f(x);
            }
            out[n - 1] = i * top / s.powi(n as i32 - 1);
        }
    };

    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
    let mut state = vec![ZERO; n * cols];
    for k in 0..n {
        state[k * n + k] = Complex64::new(1.0, 0.0);
    }
    let mut stored = vec![Vec::new(); xs.len()];
    let mut t = 0.0;
    for &idx in &order {
        integrate(|x, y, dy| rhs(x, y, dy, &mut p), t, xs[idx], &mut state, opts)?;
        t = xs[idx];
        stored[idx] = state.clone();
    }
    integrate(|x, y, dy| rhs(x, y, dy, &mut p), t, 1.0, &mut state, opts)?;

    let terms = bc.row_terms();
    let mut m = CMatrix::zeros(n, n);
    let mut r = CVector::zeros(n);
    for (row, (_, list)) in terms.iter().enumerate() {
        for &(e, order_m, c) in list {
            let w = c * s.powi(order_m as i32);
            if e == 0 {
                m[(row, order_m)] += w;
            } else {
                for col in 0..n {
                    m[(row, col)] += w * state[col * n + order_m];
                }
                r[row] -= w * state[n * n + order_m];
            }
        }
    }
    let (coef, residual) = linalg::solve_refined(&m, &r)?;
    let values = stored
        .iter()
        .map(|st| {
            let mut v = st[n * n];
            for col in 0..n {
                v += coef[col] * st[col * n];
            }
            v
        })
        .collect();
    Ok(DirectSolution {
        xs: xs.to_vec(),
        values,
        residual,
        condition: linalg::cond2(&m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_conditions, presets};

    #[test]
    fn dirichlet_polynomial_solution() {
        let bc = normalize_conditions(2, &presets::dirichlet()).unwrap();
        let opts = OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..OdeOptions::default()
        };
        let xs = [0.9, 0.1, 0.5];
        let sol = solve_bvp_direct(
            &bc,
            &DifferentialExpression::essential(2),
            Complex64::new(-1.0, 0.0),
            |x| Complex64::new(2.0 + x - x * x, 0.0),
            &xs,
            &opts,
        )
        .unwrap();
        for (x, v) in xs.iter().zip(&sol.values) {
            assert!((v - x * (1.0 - x)).norm() < 1e-10);
        }
        // λ = 0: −u'' = 2 gives the same u.
        let sol = solve_bvp_direct(&bc, &DifferentialExpression::essential(2), ZERO, |_| Complex64::new(2.0, 0.0), &xs, &opts).unwrap();
        for (x, v) in xs.iter().zip(&sol.values) {
            assert!((v - x * (1.0 - x)).norm() < 1e-10);
        }
    }
}
