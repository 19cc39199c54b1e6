//! Seeded sampling campaigns and ray sweeps.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::{char_matrix, char_matrix_limit, delta_matrix, matrix_rows};
use crate::complex::Cx;
use crate::dissipativity::{derive_seed, dissipativity_test_with, sample_dissipative_bc, sample_selfadjoint_bc, Verdict, TOL_VERDICT};
use crate::error::{Error, Result};
use crate::fss::{frame_deviation, gram_condition, FssOptions, FundamentalSystem};
use crate::green::GreenFunction;
use crate::linalg::CMatrix;
use crate::model::{BoundaryConditionSet, DifferentialExpression};
use crate::problem::ProblemDocument;
use crate::regularity::{classify_with, Classification, TOL_THETA};
use crate::resolvent::{default_nodes, nystrom_matrix, operator_norm};
use crate::spectral::{decay_profile, SpectralPoint, DECAY_MARGIN};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaDistribution {
    Uniform { lo: f64, hi: f64 },
    Fixed { value: f64 },
}

impl Default for SigmaDistribution {
    fn default() -> Self {
        SigmaDistribution::Uniform { lo: 0.0, hi: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub orders: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub sigma: SigmaDistribution,
    pub arg_lambda: f64,
    pub rho_grid: Vec<f64>,
    pub tol_theta: f64,
    pub tol_verdict: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            orders: vec![2, 4],
            samples: 200,
            seed: 1,
            sigma: SigmaDistribution::default(),
            arg_lambda: 1.5 * std::f64::consts::PI,
            rho_grid: vec![20.0, 40.0, 80.0, 160.0, 320.0],
            tol_theta: TOL_THETA,
            tol_verdict: TOL_VERDICT,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, even_orders: bool) -> Result<()> {
        if self.orders.is_empty() {
            return Err(Error::Config("no orders given".into()));
        }
        for &n in &self.orders {
            if n < 2 {
                return Err(Error::Config(format!("order {n} is below 2")));
            }
            if even_orders && n % 2 == 1 {
                return Err(Error::Config(format!("order {n} is odd; the campaign takes even orders")));
            }
        }
        if self.rho_grid.windows(2).any(|w| w[1] <= w[0]) || self.rho_grid.iter().any(|r| *r <= 0.0) {
            return Err(Error::Config("|ρ| grid must be positive and increasing".into()));
        }
        match self.sigma {
            SigmaDistribution::Uniform { lo, hi } if !(0.0 <= lo && lo <= hi && hi <= 1.0) => {
                Err(Error::Config(format!("σ range [{lo}, {hi}] outside [0, 1]")))
            }
            SigmaDistribution::Fixed { value } if !(0.0..=1.0).contains(&value) => {
                Err(Error::Config(format!("σ = {value} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignMode {
    Dissipative,
    SelfAdjoint,
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignSample {
    pub n: usize,
    pub index: usize,
    pub seed: u64,
    pub sigma: f64,
    pub classification: Classification,
    pub margin: f64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub document: ProblemDocument,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramBin {
    /// Bin `[10^lo, 10^(lo+1))` of the normalized margin.
    pub lo: i32,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderSummary {
    pub n: usize,
    pub samples: usize,
    pub irregular: usize,
    pub min_margin: f64,
    pub classifications: Vec<(String, usize)>,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignSummary {
    pub mode: CampaignMode,
    pub seed: u64,
    pub orders: Vec<OrderSummary>,
    /// Offending problem documents, if any.
    pub irregular: Vec<ProblemDocument>,
}

impl CampaignSummary {
    pub fn total_irregular(&self) -> usize {
        self.orders.iter().map(|o| o.irregular).sum()
    }
}

fn draw_sigma(dist: SigmaDistribution, seed: u64) -> f64 {
    match dist {
        SigmaDistribution::Fixed { value } => value,
        SigmaDistribution::Uniform { lo, hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5167, 0));
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        }
    }
}

pub fn run_sample(config: &ExperimentConfig, mode: CampaignMode, n: usize, index: usize) -> Result<CampaignSample> {
    let seed = derive_seed(config.seed, n as u64, index as u64);
    let sampled = match mode {
        CampaignMode::Dissipative => sample_dissipative_bc(n, seed, draw_sigma(config.sigma, seed))?,
        CampaignMode::SelfAdjoint => sample_selfadjoint_bc(n, seed)?,
    };
    let report = classify_with(&sampled.bc, config.tol_theta)?;
    let verdict = dissipativity_test_with(&sampled.bc, config.tol_verdict)?.verdict;
    Ok(CampaignSample {
        n,
        index,
        seed,
        sigma: sampled.sigma,
        classification: report.classification,
        margin: report.forward_margin,
        verdict,
        document: sampled.document(),
    })
}

pub fn run_campaign(config: &ExperimentConfig, mode: CampaignMode) -> Result<CampaignSummary> {
    config.validate(mode == CampaignMode::Dissipative)?;
    let tasks: Vec<(usize, usize)> = config
        .orders
        .iter()
        .flat_map(|&n| (0..config.samples).map(move |i| (n, i)))
        .collect();
    let mut samples: Vec<CampaignSample> = tasks
        .par_iter()
        .map(|&(n, i)| run_sample(config, mode, n, i))
        .collect::<Result<_>>()?;
    samples.sort_by_key(|s| (s.n, s.index));

    let mut orders: Vec<usize> = config.orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let mut summaries = Vec::new();
    let mut irregular = Vec::new();
    for n in orders {
        let group: Vec<&CampaignSample> = samples.iter().filter(|s| s.n == n).collect();
        let bad: Vec<&&CampaignSample> = group.iter().filter(|s| s.classification == Classification::Irregular).collect();
        irregular.extend(bad.iter().map(|s| s.document.clone()));
        let mut counts: Vec<(String, usize)> = Vec::new();
        for s in &group {
            let name = s.classification.as_str().to_string();
            match counts.iter_mut().find(|(c, _)| *c == name) {
                Some(entry) => entry.1 += 1,
                None => counts.push((name, 1)),
            }
        }
        counts.sort();
        summaries.push(OrderSummary {
            n,
            samples: group.len(),
            irregular: bad.len(),
            min_margin: group.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min),
            classifications: counts,
            histogram: histogram(group.iter().map(|s| s.margin)),
        });
    }
    Ok(CampaignSummary {
        mode,
        seed: config.seed,
        orders: summaries,
        irregular,
    })
}

fn histogram(values: impl Iterator<Item = f64>) -> Vec<HistogramBin> {
    let mut bins: Vec<HistogramBin> = Vec::new();
    for v in values {
        let lo = if v > 0.0 { v.log10().floor().clamp(-17.0, 0.0) as i32 } else { -17 };
        match bins.iter_mut().find(|b| b.lo == lo) {
            Some(b) => b.count += 1,
            None => bins.push(HistogramBin { lo, count: 1 }),
        }
    }
    bins.sort_by_key(|b| b.lo);
    bins
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub fss: FssOptions,
    pub gram: bool,
    pub resolvent: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            fss: FssOptions::default(),
            gram: true,
            resolvent: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub rho_modulus: f64,
    pub arg_rho: f64,
    pub margins: Vec<f64>,
    /// Per column j: `max_{k, x∈{0,1}} |N(x)[k][j]/ε_jᵏ − 1|`.
    pub bracket_deviations: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<Cx>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gram_condition: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolvent: Option<f64>,
    pub near_eigenvalue: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RaySweep {
    pub n: usize,
    pub arg_lambda: f64,
    pub p: usize,
    pub a_limit: Vec<Vec<Cx>>,
    pub a_limit_norm: f64,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `−log‖A − A_∞‖` against `log|ρ|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_order: Option<f64>,
}

fn bracket_deviations(f0: &CMatrix, f1: &CMatrix, eps: &[Complex64]) -> Vec<f64> {
    (0..eps.len())
        .map(|j| {
            let e = [eps[j]];
            let c0 = f0.columns(j, 1).into_owned();
            let c1 = f1.columns(j, 1).into_owned();
            frame_deviation(&c0, &e).max(frame_deviation(&c1, &e))
        })
        .collect()
}

fn sweep_row(
    bc: &BoundaryConditionSet,
    expr: &DifferentialExpression,
    arg_lambda: f64,
    r: f64,
    a_limit: &CMatrix,
    opts: &SweepOptions,
) -> Result<SweepRow> {
    let n = expr.order();
    let sp = SpectralPoint::on_ray(arg_lambda, r, n)?;
    let profile = decay_profile(&sp, DECAY_MARGIN);
    let fss = FundamentalSystem::new(expr, sp, &opts.fss)?;
    let data = delta_matrix(bc, &fss, &profile.decaying)?;
    let mut row = SweepRow {
        rho_modulus: r,
        arg_rho: sp.arg_rho(),
        margins: profile.margins.clone(),
        bracket_deviations: bracket_deviations(&data.frame0, &data.frame1, fss.eps()),
        a: None,
        a_deviation: None,
        delta_deviation: data.deviation,
        gram_condition: None,
        resolvent: None,
        near_eigenvalue: data.near_eigenvalue(),
        note: profile.warning.clone(),
    };
    if opts.gram {
        row.gram_condition = Some(gram_condition(&fss, &profile.decaying)?);
    }
    match char_matrix(&data) {
        Ok(a) => {
            row.a_deviation = Some((&a.entries - a_limit).norm());
            row.a = Some(matrix_rows(&a.entries));
            if opts.resolvent {
                let g = GreenFunction::from_system(bc, fss)?;
                let k = nystrom_matrix(&g, default_nodes(r))?;
                row.resolvent = Some(operator_norm(&k));
            }
        }
        Err(Error::NearEigenvalue { .. }) => {
            row.note = Some("near eigenvalue; characteristic matrix skipped".into());
        }
        Err(e) => return Err(e),
    }
    Ok(row)
}

/// `A(ρ)` and related quantities along the ray `arg λ = arg_lambda`.
pub fn ray_sweep(
    bc: &BoundaryConditionSet,
    expr: &DifferentialExpression,
    arg_lambda: f64,
    grid: &[f64],
    opts: &SweepOptions,
) -> Result<RaySweep> {
    let n = expr.order();
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(Error::Config("|ρ| grid must be positive and increasing".into()));
    }
    let probe = SpectralPoint::on_ray(arg_lambda, 1.0, n)?;
    let profile = decay_profile(&probe, DECAY_MARGIN);
    if !profile.prefix_ok || profile.neutral {
        return Err(Error::Config(format!("ray arg λ = {arg_lambda} has no clean decay split")));
    }
    let p = profile.p;
    let a_limit = char_matrix_limit(bc, p)?;
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&r| sweep_row(bc, expr, arg_lambda, r, &a_limit, opts))
        .collect::<Result<_>>()?;
    let fitted_order = fit_order(&rows);
    Ok(RaySweep {
        n,
        arg_lambda,
        p,
        a_limit_norm: a_limit.norm(),
        a_limit: matrix_rows(&a_limit),
        rows,
        fitted_order,
    })
}

fn fit_order(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.a_deviation.filter(|d| *d > 0.0).map(|d| (r.rho_modulus.ln(), d.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

impl RaySweep {
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["rho_modulus".to_string(), "arg_rho".to_string()];
        cols.extend((0..self.n).map(|k| format!("margin_{k}")));
        cols.extend((0..self.n).map(|k| format!("bracket_dev_{k}")));
        for t in 0..self.n {
            for k in 0..self.n {
                cols.push(format!("a_{t}{k}_re"));
                cols.push(format!("a_{t}{k}_im"));
            }
        }
        cols.extend(["a_deviation", "delta_deviation", "gram_condition", "resolvent", "near_eigenvalue"].map(String::from));
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        let mut out = self.csv_header();
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![f(row.rho_modulus), f(row.arg_rho)];
            cells.extend(row.margins.iter().map(|&v| f(v)));
            cells.extend(row.bracket_deviations.iter().map(|&v| f(v)));
            for t in 0..self.n {
                for k in 0..self.n {
                    // a_tk is entry (k, t).
                    match &row.a {
                        Some(a) => {
                            cells.push(f(a[k][t].0.re));
                            cells.push(f(a[k][t].0.im));
                        }
                        None => cells.extend([String::new(), String::new()]),
                    }
                }
            }
            cells.push(opt(row.a_deviation));
            cells.push(opt(row.delta_deviation));
            cells.push(opt(row.gram_condition));
            cells.push(opt(row.resolvent));
            cells.push(row.near_eigenvalue.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        match self.fitted_order {
            Some(o) => out.push_str(&format!("# fitted_order,{}\n", f(o))),
            None => out.push_str("# fitted_order,\n"),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_conditions, presets};

    #[test]
    fn campaign_is_deterministic() {
        let config = ExperimentConfig {
            samples: 6,
            ..ExperimentConfig::default()
        };
        let a = run_campaign(&config, CampaignMode::Dissipative).unwrap();
        let b = run_campaign(&config, CampaignMode::Dissipative).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.total_irregular(), 0);
        let odd = ExperimentConfig {
            orders: vec![3],
            ..config
        };
        assert!(run_campaign(&odd, CampaignMode::Dissipative).is_err());
    }

    #[test]
    fn dirichlet_sweep_rows() {
        let bc = normalize_conditions(2, &presets::dirichlet()).unwrap();
        let opts = SweepOptions {
            resolvent: false,
            ..SweepOptions::default()
        };
        let s = ray_sweep(&bc, &DifferentialExpression::essential(2), 1.5 * std::f64::consts::PI, &[20.0], &opts).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert!(s.fitted_order.is_none());
        assert_eq!(s.to_csv().lines().count(), 3);
        let cauchy = normalize_conditions(2, &presets::cauchy_at_zero()).unwrap();
        assert!(matches!(
            ray_sweep(&cauchy, &DifferentialExpression::essential(2), 1.5 * std::f64::consts::PI, &[20.0], &opts),
            Err(Error::NotRegular { .. })
        ));
    }
}
