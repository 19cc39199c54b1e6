//! The ρ-plane: branch of `λ^{1/n}`, sectors, and decay classification.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::complex::{root, Cx};
use crate::error::{Error, Result};

/// Default margin for counting decaying exponentials.
pub const DECAY_MARGIN: f64 = 1e-6;

const ROUNDOFF_MARGIN: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub rho: Complex64,
    /// `k` with `πk/n ≤ arg ρ < π(k+1)/n`.
    pub sector: usize,
    pub n: usize,
}

fn arg_0_2pi(z: Complex64) -> f64 {
    let mut a = z.im.atan2(z.re);
    if a < 0.0 {
        a += TAU;
    }
    if a >= TAU {
        a -= TAU;
    }
    a
}

fn sector_of(arg_rho: f64, n: usize) -> usize {
    let s = (arg_rho * n as f64 / PI).floor();
    s.max(0.0) as usize
}

impl SpectralPoint {
    /// `arg ρ = arg λ / n` with `0 ≤ arg λ < 2π`, `|ρ| = |λ|^{1/n}`.
    pub fn new(lambda: Complex64, n: usize) -> Result<Self> {
        if lambda.norm() == 0.0 {
            return Err(Error::ZeroLambda);
        }
        let a = arg_0_2pi(lambda) / n as f64;
        let r = lambda.norm().powf(1.0 / n as f64);
        Ok(SpectralPoint {
            lambda,
            rho: Complex64::from_polar(r, a),
            sector: sector_of(a, n),
            n,
        })
    }

    /// Point with the given ρ and `λ = ρⁿ`; ρ may lie off the principal branch.
    pub fn from_rho(rho: Complex64, n: usize) -> Result<Self> {
        if rho.norm() == 0.0 {
            return Err(Error::ZeroLambda);
        }
        Ok(SpectralPoint {
            lambda: rho.powu(n as u32),
            rho,
            sector: sector_of(arg_0_2pi(rho), n),
            n,
        })
    }

    /// Point on the ray `arg λ = arg_lambda` with `|ρ| = modulus`.
    pub fn on_ray(arg_lambda: f64, modulus: f64, n: usize) -> Result<Self> {
        if modulus <= 0.0 {
            return Err(Error::ZeroLambda);
        }
        let a = arg_lambda.rem_euclid(TAU);
        let rho = Complex64::from_polar(modulus, a / n as f64);
        Ok(SpectralPoint {
            lambda: Complex64::from_polar(modulus.powi(n as i32), a),
            rho,
            sector: sector_of(a / n as f64, n),
            n,
        })
    }

    pub fn arg_rho(&self) -> f64 {
        arg_0_2pi(self.rho)
    }

    /// `Im(ρ ε_k)` for every k.
    pub fn exponents_im(&self) -> Vec<f64> {
        (0..self.n).map(|k| (self.rho * root(self.n, k as i64)).im).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayProfile {
    pub n: usize,
    pub sector: usize,
    /// Number of indices with `Im(ρε_k)/|ρ| > δ`.
    pub p: usize,
    /// `Im(ρε_k)/|ρ| = sin(arg ρ + 2πk/n)`.
    pub margins: Vec<f64>,
    pub decaying: Vec<bool>,
    /// Tabulated value for the sector and parity (off by one from `p`).
    pub table_p: Option<usize>,
    /// Decaying indices are exactly `0..p`.
    pub prefix_ok: bool,
    /// Some `|Im(ρε_k)|/|ρ| ≤ δ`.
    pub neutral: bool,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Tabulated decay value by sector and parity of n.
pub fn table_p(sector: usize, n: usize) -> Option<usize> {
    let q = n / 2;
    match (sector, n % 2) {
        (0, 0) => q.checked_sub(1),
        (0, _) => Some(q),
        (1, _) => q.checked_sub(1),
        _ => None,
    }
}

pub fn decay_profile(sp: &SpectralPoint, delta: f64) -> DecayProfile {
    let n = sp.n;
    let r = sp.rho.norm();
    let margins: Vec<f64> = sp.exponents_im().into_iter().map(|v| v / r).collect();
    // Margins of order round-off count as zero even when δ = 0.
    let eff = delta.max(ROUNDOFF_MARGIN);
    let decaying: Vec<bool> = margins.iter().map(|&m| m > eff).collect();
    let p = decaying.iter().filter(|&&d| d).count();
    let prefix_ok = decaying.iter().enumerate().all(|(k, &d)| d == (k < p));
    let neutral = margins.iter().any(|m| m.abs() <= eff);
    let table = table_p(sp.sector, n);
    let mut notes = Vec::new();
    if table.is_some_and(|t| p != t + 1) {
        notes.push(format!("decay count {p} differs from tabulated value {} plus one", table.unwrap_or(0)));
    }
    if neutral {
        notes.push("neutral exponential present".to_string());
    }
    DecayProfile {
        n,
        sector: sp.sector,
        p,
        margins,
        decaying,
        table_p: table,
        prefix_ok,
        neutral,
        delta,
        warning: (!notes.is_empty()).then(|| notes.join("; ")),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralPointView {
    pub lambda: Cx,
    pub rho: Cx,
    pub sector: usize,
    pub n: usize,
}

impl From<&SpectralPoint> for SpectralPointView {
    fn from(sp: &SpectralPoint) -> Self {
        SpectralPointView {
            lambda: Cx(sp.lambda),
            rho: Cx(sp.rho),
            sector: sp.sector,
            n: sp.n,
        }
    }
}
