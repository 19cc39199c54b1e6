//! Norm of the resolvent `(L − λ)⁻¹` from a Nyström discretization of `G`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::fss::FssOptions;
use crate::green::GreenFunction;
use crate::linalg::{self, CMatrix};
use crate::model::{BoundaryConditionSet, DifferentialExpression};
use crate::quadrature::CompositeRule;

/// Above this size the largest singular value comes from power iteration.
const DENSE_LIMIT: usize = 600;
const ORDER: usize = 16;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResolventEstimate {
    pub norm: f64,
    pub nodes: usize,
    /// `1/|Im λ|` when `Im λ < 0`.
    pub dissipative_bound: Option<f64>,
}

/// `max(64, 8|ρ|)` rounded up to whole panels.
pub fn default_nodes(rho_modulus: f64) -> usize {
    let m = (8.0 * rho_modulus).ceil().max(64.0) as usize;
    m.div_ceil(ORDER) * ORDER
}

/// `K_ab = √w_a G(x_a, x_b) √w_b`.
pub fn nystrom_matrix(g: &GreenFunction, nodes: usize) -> Result<CMatrix> {
    let panels = nodes.div_ceil(ORDER).max(1);
    let rule = CompositeRule::new(0.0, 1.0, panels, ORDER);
    let mut k = g.kernel(&rule.nodes)?;
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    for a in 0..k.nrows() {
        for b in 0..k.ncols() {
            k[(a, b)] *= sw[a] * sw[b];
        }
    }
    Ok(k)
}

pub fn operator_norm(k: &CMatrix) -> f64 {
    if k.nrows() <= DENSE_LIMIT {
        linalg::spectral_norm(k)
    } else {
        linalg::power_norm(k, 1e-10, 2000)
    }
}

pub fn resolvent_norm_estimate(
    bc: &BoundaryConditionSet,
    expr: &DifferentialExpression,
    lambda: Complex64,
    nodes: Option<usize>,
    opts: &FssOptions,
) -> Result<ResolventEstimate> {
    let g = GreenFunction::new(bc, expr, lambda, opts)?;
    let m = nodes.unwrap_or_else(|| default_nodes(g.system().rho().norm()));
    let k = nystrom_matrix(&g, m)?;
    Ok(ResolventEstimate {
        norm: operator_norm(&k),
        nodes: k.nrows(),
        dissipative_bound: (lambda.im < 0.0).then(|| 1.0 / lambda.im.abs()),
    })
}
