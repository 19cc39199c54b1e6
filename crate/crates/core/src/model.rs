//! Differential expressions `l(y) = Dⁿy + Σ_{k≤n−2} p_k Dᵏy` on [0, 1] with
//! `D = −i d/dx`, and two-point boundary conditions in normalized form.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complex::Cx;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};

/// Singular-value threshold for rank decisions on condition blocks.
pub const RANK_TOL: f64 = 1e-10;

/// One coefficient function `p_k`.
#[derive(Clone)]
pub enum Coefficient {
    Zero,
    Constant(Complex64),
    /// Samples `(x_i, p(x_i))` with strictly increasing `x_i`; linear
    /// interpolation between samples, constant extrapolation outside.
    Grid { xs: Vec<f64>, values: Vec<Complex64> },
    /// `Σ c_i xⁱ`, lowest degree first.
    Poly(Vec<Complex64>),
    Function(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Zero => f.write_str("Zero"),
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Grid { xs, .. } => write!(f, "Grid({} samples)", xs.len()),
            Coefficient::Poly(c) => write!(f, "Poly(degree {})", c.len().saturating_sub(1)),
            Coefficient::Function(_) => f.write_str("Function"),
        }
    }
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Coefficient::Zero => ZERO,
            Coefficient::Constant(c) => *c,
            Coefficient::Grid { xs, values } => interpolate(xs, values, x),
            Coefficient::Poly(c) => c.iter().rev().fold(ZERO, |acc, &a| acc * x + a),
            Coefficient::Function(g) => g(x),
        }
    }

    /// True when the coefficient is known to vanish identically.
    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Zero => true,
            Coefficient::Constant(c) => *c == ZERO,
            Coefficient::Grid { values, .. } => values.iter().all(|v| *v == ZERO),
            Coefficient::Poly(c) => c.iter().all(|v| *v == ZERO),
            Coefficient::Function(_) => false,
        }
    }

    pub fn grid(xs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if xs.len() != values.len() || xs.is_empty() {
            return Err(Error::invalid("coefficients", "grid needs matching, nonempty x and value lists"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("coefficients", "grid abscissae must be strictly increasing"));
        }
        Ok(Coefficient::Grid { xs, values })
    }
}

fn interpolate(xs: &[f64], values: &[Complex64], x: f64) -> Complex64 {
    if x <= xs[0] {
        return values[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return values[last];
    }
    let i = xs.partition_point(|&s| s <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    values[i] * (1.0 - t) + values[i + 1] * t
}

#[derive(Clone, Debug)]
pub struct DifferentialExpression {
    n: usize,
    coefficients: Vec<Coefficient>,
}

impl DifferentialExpression {
    /// `coefficients[k]` is `p_k`, `k = 0..n−2`.
    pub fn new(n: usize, coefficients: Vec<Coefficient>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("order must be at least 2, got {n}")));
        }
        if coefficients.len() != n - 1 {
            return Err(Error::invalid(
                "coefficients",
                format!("expected {} coefficient functions p_0..p_{}, got {}", n - 1, n - 2, coefficients.len()),
            ));
        }
        let expr = DifferentialExpression { n, coefficients };
        for k in 0..n - 1 {
            for i in 0..=64 {
                let x = i as f64 / 64.0;
                let v = expr.coefficients[k].eval(x);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::invalid(format!("coefficients[{k}]"), format!("non-finite value at x = {x}")));
                }
            }
        }
        Ok(expr)
    }

    /// The bare expression `Dⁿ`.
    pub fn essential(n: usize) -> Self {
        DifferentialExpression {
            n,
            coefficients: vec![Coefficient::Zero; n.saturating_sub(1)],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn coefficient(&self, k: usize) -> &Coefficient {
        &self.coefficients[k]
    }

    pub fn coefficients(&self) -> &[Coefficient] {
        &self.coefficients
    }

    /// Values `p_0(x), …, p_{n−2}(x)`.
    pub fn eval(&self, x: f64, out: &mut [Complex64]) {
        for (o, c) in out.iter_mut().zip(&self.coefficients) {
            *o = c.eval(x);
        }
    }

    pub fn is_essential(&self) -> bool {
        self.coefficients.iter().all(Coefficient::is_zero)
    }
}

/// `0` for x = 0, `1` for x = 1.
pub type End = usize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub end: End,
    pub order: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Term {
    pub fn new(end: End, order: usize, coeff: Complex64) -> Self {
        Term { end, order, re: coeff.re, im: coeff.im }
    }

    pub fn coeff(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A boundary form `Σ c · D^order y(end)` before normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCondition {
    pub terms: Vec<Term>,
}

impl RawCondition {
    pub fn new(terms: Vec<Term>) -> Self {
        RawCondition { terms }
    }

    /// Row of length 2n indexed by `order + n·end`.
    pub fn row(&self, n: usize) -> Result<Vec<Complex64>> {
        let mut row = vec![ZERO; 2 * n];
        for (i, t) in self.terms.iter().enumerate() {
            if t.end > 1 {
                return Err(Error::invalid(format!("terms[{i}].end"), format!("end must be 0 or 1, got {}", t.end)));
            }
            if t.order >= n {
                return Err(Error::invalid(
                    format!("terms[{i}].order"),
                    format!("order exceeds n−1 (order {}, n = {n})", t.order),
                ));
            }
            row[t.order + n * t.end] += t.coeff();
        }
        if row.iter().all(|v| *v == ZERO) {
            return Err(Error::invalid("terms", "condition has no nonzero coefficient"));
        }
        Ok(row)
    }
}

/// One row of an order-j block: leading coefficients and lower-order tails.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionRow {
    pub b0: Complex64,
    pub b1: Complex64,
    /// Coefficients of `Dᵏy(0)`, `k < j`.
    pub tail0: Vec<Complex64>,
    /// Coefficients of `Dᵏy(1)`, `k < j`.
    pub tail1: Vec<Complex64>,
}

impl ConditionRow {
    pub fn has_tail(&self) -> bool {
        self.tail0.iter().chain(&self.tail1).any(|v| *v != ZERO)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionBlock {
    pub order: usize,
    pub rows: Vec<ConditionRow>,
}

impl ConditionBlock {
    pub fn rank(&self) -> usize {
        self.rows.len()
    }
}

/// Normalized two-point conditions grouped by leading order `j = 0..n−1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditionSet {
    n: usize,
    blocks: Vec<ConditionBlock>,
}

impl BoundaryConditionSet {
    /// Builds a set from explicit blocks without normalizing; `validate`
    /// reports whether the invariants hold.
    pub fn from_blocks(n: usize, blocks: Vec<ConditionBlock>) -> Result<Self> {
        if blocks.len() != n {
            return Err(Error::invalid("blocks", format!("expected {n} blocks, got {}", blocks.len())));
        }
        for (j, b) in blocks.iter().enumerate() {
            if b.order != j {
                return Err(Error::invalid(format!("blocks[{j}]"), "blocks must be listed by order"));
            }
            for r in &b.rows {
                if r.tail0.len() != j || r.tail1.len() != j {
                    return Err(Error::invalid(format!("blocks[{j}]"), "tail length must equal the block order"));
                }
            }
        }
        Ok(BoundaryConditionSet { n, blocks })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[ConditionBlock] {
        &self.blocks
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.blocks.iter().map(ConditionBlock::rank).collect()
    }

    /// Rows in block order together with their leading order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &ConditionRow)> {
        self.blocks.iter().flat_map(|b| b.rows.iter().map(move |r| (b.order, r)))
    }

    pub fn row_count(&self) -> usize {
        self.blocks.iter().map(ConditionBlock::rank).sum()
    }

    pub fn has_tails(&self) -> bool {
        self.rows().any(|(_, r)| r.has_tail())
    }

    /// Condition matrix with one row per condition and columns `order + n·end`.
    pub fn matrix(&self) -> CMatrix {
        let n = self.n;
        let rows: Vec<(usize, &ConditionRow)> = self.rows().collect();
        let mut m = CMatrix::zeros(rows.len(), 2 * n);
        for (r, (j, row)) in rows.iter().enumerate() {
            m[(r, *j)] = row.b0;
            m[(r, n + *j)] = row.b1;
            for k in 0..*j {
                m[(r, k)] = row.tail0[k];
                m[(r, n + k)] = row.tail1[k];
            }
        }
        m
    }

    /// Terms `(end, order, coefficient)` of each row, leading term included.
    pub fn row_terms(&self) -> Vec<(usize, Vec<(End, usize, Complex64)>)> {
        self.rows()
            .map(|(j, row)| {
                let mut terms = Vec::new();
                for k in 0..j {
                    if row.tail0[k] != ZERO {
                        terms.push((0, k, row.tail0[k]));
                    }
                    if row.tail1[k] != ZERO {
                        terms.push((1, k, row.tail1[k]));
                    }
                }
                if row.b0 != ZERO {
                    terms.push((0, j, row.b0));
                }
                if row.b1 != ZERO {
                    terms.push((1, j, row.b1));
                }
                (j, terms)
            })
            .collect()
    }

    /// The set as raw conditions, one per row.
    pub fn to_raw(&self) -> Vec<RawCondition> {
        self.row_terms()
            .into_iter()
            .map(|(_, terms)| RawCondition::new(terms.into_iter().map(|(e, k, c)| Term::new(e, k, c)).collect()))
            .collect()
    }

    /// Same leading blocks with every tail removed.
    pub fn without_tails(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| ConditionBlock {
                order: b.order,
                rows: b
                    .rows
                    .iter()
                    .map(|r| ConditionRow {
                        b0: r.b0,
                        b1: r.b1,
                        tail0: vec![ZERO; b.order],
                        tail1: vec![ZERO; b.order],
                    })
                    .collect(),
            })
            .collect();
        BoundaryConditionSet { n: self.n, blocks }
    }
}

/// Normalizes raw conditions; see [`normalize_matrix`].
pub fn normalize_conditions(n: usize, raw: &[RawCondition]) -> Result<BoundaryConditionSet> {
    if n < 2 {
        return Err(Error::invalid("n", format!("order must be at least 2, got {n}")));
    }
    if raw.len() != n {
        return Err(Error::invalid("conditions", format!("expected {n} conditions, got {}", raw.len())));
    }
    let mut m = CMatrix::zeros(n, 2 * n);
    for (r, cond) in raw.iter().enumerate() {
        let row = cond.row(n).map_err(|e| match e {
            Error::Invalid { location, message } => Error::invalid(format!("conditions[{r}].{location}"), message),
            other => other,
        })?;
        for (c, v) in row.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    normalize_matrix(&m)
}

/// Row-reduces an `n × 2n` condition matrix to normalized form.
///
/// Orders are processed from `n−1` down to `0`. Within an order the pivot is
/// the largest leading entry among the unused rows; the pivot row is scaled
/// so that entry is exactly 1 and the column is cleared from the other unused
/// rows. A rank-2 order takes a second pivot in the other end's column and is
/// reduced to the identity block with the end-0 row first.
pub fn normalize_matrix(u: &CMatrix) -> Result<BoundaryConditionSet> {
    let (rows, cols) = u.shape();
    if cols % 2 != 0 || rows * 2 != cols {
        return Err(Error::invalid("conditions", format!("condition matrix must be n×2n, got {rows}×{cols}")));
    }
    let n = rows;
    let rank = linalg::rank(u, RANK_TOL);
    if rank < n {
        return Err(Error::DegenerateConditions { rank, n });
    }
    let mut work: Vec<Vec<Complex64>> = (0..n)
        .map(|r| {
            let row: Vec<Complex64> = u.row(r).iter().copied().collect();
            let norm = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            row.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let mut unused: Vec<usize> = (0..n).collect();
    let mut blocks: Vec<ConditionBlock> = Vec::with_capacity(n);

    for j in (0..n).rev() {
        let cj = [j, n + j];
        let mut picked: Vec<(usize, usize)> = Vec::new();
        for _ in 0..2 {
            let mut best: Option<(usize, usize, f64)> = None;
            for (pos, &r) in unused.iter().enumerate() {
                for &c in &cj {
                    if picked.iter().any(|&(_, pc)| pc == c) {
                        continue;
                    }
                    let v = work[r][c].norm();
                    if best.is_none_or(|(_, _, b)| v > b) {
                        best = Some((pos, c, v));
                    }
                }
            }
            let Some((pos, c, v)) = best else { break };
            if v <= RANK_TOL {
                break;
            }
            let r = unused.remove(pos);
            let pv = work[r][c];
            for x in work[r].iter_mut() {
                *x /= pv;
            }
            work[r][c] = Complex64::new(1.0, 0.0);
            let pivot = work[r].clone();
            let others: Vec<usize> = unused.iter().copied().chain(picked.iter().map(|&(pr, _)| pr)).collect();
            for o in others {
                let f = work[o][c];
                if f != ZERO {
                    for (x, p) in work[o].iter_mut().zip(&pivot) {
                        *x -= f * p;
                    }
                }
                work[o][c] = ZERO;
            }
            picked.push((r, c));
        }
        // Whatever is left in this order's columns is below tolerance.
        for &r in &unused {
            work[r][j] = ZERO;
            work[r][n + j] = ZERO;
        }
        picked.sort_by_key(|&(_, c)| c);
        let rows = picked
            .iter()
            .map(|&(r, _)| ConditionRow {
                b0: work[r][j],
                b1: work[r][n + j],
                tail0: work[r][..j].to_vec(),
                tail1: work[r][n..n + j].to_vec(),
            })
            .collect();
        blocks.push(ConditionBlock { order: j, rows });
    }
    if !unused.is_empty() {
        return Err(Error::DegenerateConditions { rank: n - unused.len(), n });
    }
    blocks.reverse();
    Ok(BoundaryConditionSet { n, blocks })
}

/// `(Dⁿ, conditions without tails)`.
pub fn essential_part(
    expr: &DifferentialExpression,
    bc: &BoundaryConditionSet,
) -> (DifferentialExpression, BoundaryConditionSet) {
    (DifferentialExpression::essential(expr.order()), bc.without_tails())
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub rank_sum: usize,
    pub block_ranks: Vec<usize>,
    pub checks: Vec<InvariantCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.detail.as_str()).collect()
    }
}

pub fn validate(bc: &BoundaryConditionSet) -> ValidationReport {
    let n = bc.order();
    let mut checks = Vec::new();
    let mut block_ranks = Vec::with_capacity(n);
    for b in bc.blocks() {
        let r = b.rank();
        let lead = CMatrix::from_fn(r, 2, |i, c| if c == 0 { b.rows[i].b0 } else { b.rows[i].b1 });
        let computed = if r == 0 { 0 } else { linalg::rank_abs(&lead, RANK_TOL) };
        block_ranks.push(computed);
        checks.push(InvariantCheck {
            name: format!("block-rank-{}", b.order),
            passed: computed == r && r <= 2,
            detail: if computed == r && r <= 2 {
                format!("order {} has rank {r}", b.order)
            } else {
                format!("rank deficiency in order {}", b.order)
            },
        });
        if r == 2 {
            let identity = (b.rows[0].b0 - 1.0).norm() <= RANK_TOL
                && b.rows[0].b1.norm() <= RANK_TOL
                && b.rows[1].b0.norm() <= RANK_TOL
                && (b.rows[1].b1 - 1.0).norm() <= RANK_TOL;
            checks.push(InvariantCheck {
                name: format!("identity-block-{}", b.order),
                passed: identity,
                detail: if identity {
                    format!("order {} block is the identity", b.order)
                } else {
                    format!("rank-2 block of order {} is not the identity", b.order)
                },
            });
        }
    }
    let rank_sum = bc.row_count();
    checks.push(InvariantCheck {
        name: "rank-sum".into(),
        passed: rank_sum == n,
        detail: if rank_sum == n {
            format!("rank sum {rank_sum} = n")
        } else {
            format!("rank sum {rank_sum} differs from n = {n}")
        },
    });
    ValidationReport { n, rank_sum, block_ranks, checks }
}

/// Serializable view of a normalized set.
#[derive(Clone, Debug, Serialize)]
pub struct BlockView {
    pub order: usize,
    pub rank: usize,
    pub b0: Vec<Cx>,
    pub b1: Vec<Cx>,
    pub tails: Vec<Vec<Cx>>,
}

impl BoundaryConditionSet {
    pub fn view(&self) -> Vec<BlockView> {
        self.blocks
            .iter()
            .map(|b| BlockView {
                order: b.order,
                rank: b.rank(),
                b0: b.rows.iter().map(|r| Cx(r.b0)).collect(),
                b1: b.rows.iter().map(|r| Cx(r.b1)).collect(),
                tails: b
                    .rows
                    .iter()
                    .map(|r| r.tail0.iter().chain(&r.tail1).map(|v| Cx(*v)).collect())
                    .collect(),
            })
            .collect()
    }
}

/// Ready-made condition sets used throughout the tests and the CLI.
pub mod presets {
    use super::*;

    fn t(end: End, order: usize, re: f64) -> Term {
        Term::new(end, order, Complex64::new(re, 0.0))
    }

    /// `y(0) = 0, y(1) = 0`, n = 2.
    pub fn dirichlet() -> Vec<RawCondition> {
        vec![RawCondition::new(vec![t(0, 0, 1.0)]), RawCondition::new(vec![t(1, 0, 1.0)])]
    }

    /// `y(0) = 0, Dy(0) = 0`, n = 2.
    pub fn cauchy_at_zero() -> Vec<RawCondition> {
        vec![RawCondition::new(vec![t(0, 0, 1.0)]), RawCondition::new(vec![t(0, 1, 1.0)])]
    }

    /// `y(0) = y(1), Dy(0) = Dy(1)`, n = 2.
    pub fn periodic() -> Vec<RawCondition> {
        vec![
            RawCondition::new(vec![t(0, 0, 1.0), t(1, 0, -1.0)]),
            RawCondition::new(vec![t(0, 1, 1.0), t(1, 1, -1.0)]),
        ]
    }
}
