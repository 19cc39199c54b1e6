//! Dissipativity of boundary conditions for `Dⁿ` via the Lagrange boundary
//! form, and seeded samplers of dissipative and self-adjoint condition sets.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};
use crate::model::{normalize_matrix, BoundaryConditionSet};
use crate::problem::{essential_document, ProblemDocument};

/// Verdict threshold on the restricted form.
pub const TOL_VERDICT: f64 = 1e-10;

const MAX_ATTEMPTS: usize = 10;

/// `H` with `Im⟨Dⁿu, u⟩ = Y*HY`, `Y = (Dᵏu(0), Dᵏu(1))`.
#[derive(Clone, Debug)]
pub struct LagrangeForm {
    pub n: usize,
    pub h: CMatrix,
}

/// `H = ½ blockdiag(J, −J)` with `J` the exchange matrix.
pub fn lagrange_form(n: usize) -> LagrangeForm {
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        h[(k, n - 1 - k)] = Complex64::new(0.5, 0.0);
        h[(n + k, 2 * n - 1 - k)] = Complex64::new(-0.5, 0.0);
    }
    LagrangeForm { n, h }
}

impl LagrangeForm {
    pub fn value(&self, y: &[Complex64]) -> f64 {
        let mut acc = ZERO;
        for a in 0..2 * self.n {
            for b in 0..2 * self.n {
                acc += y[a].conj() * self.h[(a, b)] * y[b];
            }
        }
        acc.re
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SelfAdjoint,
    Dissipative,
    NotDissipative,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::SelfAdjoint => "self-adjoint",
            Verdict::Dissipative => "dissipative",
            Verdict::NotDissipative => "not-dissipative",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipativityReport {
    pub verdict: Verdict,
    /// Eigenvalues of `K*HK`, ascending.
    pub restricted_eigenvalues: Vec<f64>,
    pub margin: f64,
}

/// Restricts `H` to the null space of the full boundary map (tails
/// included). The coefficients `p_k` play no part: the form is that of `Dⁿ`.
pub fn dissipativity_test(bc: &BoundaryConditionSet) -> Result<DissipativityReport> {
    dissipativity_test_with(bc, TOL_VERDICT)
}

pub fn dissipativity_test_with(bc: &BoundaryConditionSet, tol: f64) -> Result<DissipativityReport> {
    let n = bc.order();
    let u = bc.matrix();
    let k = linalg::null_space(&u, 1e-10);
    if k.ncols() != n {
        return Err(Error::DegenerateConditions { rank: 2 * n - k.ncols(), n });
    }
    let form = lagrange_form(n);
    let restricted = k.adjoint() * &form.h * &k;
    let ev = linalg::hermitian_eigenvalues(&restricted);
    let verdict = if ev.iter().all(|e| e.abs() <= tol) {
        Verdict::SelfAdjoint
    } else if ev.iter().all(|&e| e >= -tol) {
        Verdict::Dissipative
    } else {
        Verdict::NotDissipative
    };
    Ok(DissipativityReport {
        verdict,
        margin: ev.first().copied().unwrap_or(0.0),
        restricted_eigenvalues: ev,
    })
}

/// SplitMix64 finalizer; derives independent task seeds from a base seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn ginibre(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of `R`'s
/// diagonal moved into `Q`.
fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let qr = ginibre(n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `E⁻¹` with `H = E* diag(I, −I) E`, positive eigenvectors first.
fn congruence_inverse(n: usize) -> CMatrix {
    let h = lagrange_form(n).h;
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    CMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let idx = order[c];
        eig.eigenvectors[(r, idx)] / eig.eigenvalues[idx].abs().sqrt()
    })
}

/// Conditions whose solution space is `E⁻¹{(ξ, Cξ)}`.
pub fn conditions_from_contraction(c: &CMatrix) -> Result<BoundaryConditionSet> {
    let n = c.nrows();
    let einv = congruence_inverse(n);
    let mut stacked = CMatrix::zeros(2 * n, n);
    for i in 0..n {
        stacked[(i, i)] = Complex64::new(1.0, 0.0);
    }
    stacked.view_mut((n, 0), (n, n)).copy_from(c);
    let w = einv * stacked;
    let comp = linalg::null_space(&w.adjoint(), 1e-10);
    if comp.ncols() != n {
        return Err(Error::DegenerateConditions { rank: comp.ncols(), n });
    }
    normalize_matrix(&comp.adjoint())
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledConditions {
    #[serde(skip)]
    pub bc: BoundaryConditionSet,
    pub seed: u64,
    pub sigma: f64,
    pub attempts: usize,
    pub report: DissipativityReport,
}

impl SampledConditions {
    pub fn document(&self) -> ProblemDocument {
        let mut doc = essential_document(self.bc.order(), self.bc.to_raw());
        doc.meta = Some(serde_json::json!({ "seed": self.seed, "sigma": self.sigma }));
        doc
    }
}

fn sample_with<F>(n: usize, seed: u64, sigma: f64, want_selfadjoint: bool, draw: F) -> Result<SampledConditions>
where
    F: Fn(&mut ChaCha8Rng) -> CMatrix,
{
    if n == 0 {
        return Err(Error::Config("order must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let c = draw(&mut rng);
        let bc = match conditions_from_contraction(&c) {
            Ok(bc) => bc,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let report = dissipativity_test(&bc)?;
        let ok = if want_selfadjoint {
            report.verdict == Verdict::SelfAdjoint
        } else {
            report.verdict != Verdict::NotDissipative
        };
        if ok {
            return Ok(SampledConditions {
                bc,
                seed,
                sigma,
                attempts: attempt,
                report,
            });
        }
        last = format!("verification gave {}", report.verdict.as_str());
    }
    Err(Error::Sampling {
        attempts: MAX_ATTEMPTS,
        reason: last,
    })
}

/// Dissipative conditions from a Ginibre contraction of operator norm `σ`.
pub fn sample_dissipative_bc(n: usize, seed: u64, sigma: f64) -> Result<SampledConditions> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::Config(format!("contraction scale {sigma} outside [0, 1]")));
    }
    sample_with(n, seed, sigma, false, |rng| {
        let g = ginibre(n, rng);
        let norm = linalg::spectral_norm(&g);
        if norm > 0.0 {
            g * Complex64::new(sigma / norm, 0.0)
        } else {
            g
        }
    })
}

/// Self-adjoint conditions from a Haar-random unitary.
pub fn sample_selfadjoint_bc(n: usize, seed: u64) -> Result<SampledConditions> {
    sample_with(n, seed, 1.0, true, |rng| haar_unitary(n, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_conditions, presets, RawCondition, Term};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn closed_forms() {
        let f = lagrange_form(1);
        assert_eq!(f.h[(0, 0)], c(0.5, 0.0));
        assert_eq!(f.h[(1, 1)], c(-0.5, 0.0));
        // n = 2: Re(ū(0)Du(0)) − Re(ū(1)Du(1)).
        let f = lagrange_form(2);
        let y = [c(1.0, 2.0), c(-0.5, 0.3), c(0.7, -1.0), c(2.0, 0.1)];
        let want = (y[0].conj() * y[1]).re - (y[2].conj() * y[3]).re;
        assert!((f.value(&y) - want).abs() < 1e-15);
    }

    #[test]
    fn classical_examples() {
        let bc = normalize_conditions(2, &presets::dirichlet()).unwrap();
        assert_eq!(dissipativity_test(&bc).unwrap().verdict, Verdict::SelfAdjoint);
        let bc = normalize_conditions(2, &presets::cauchy_at_zero()).unwrap();
        assert_eq!(dissipativity_test(&bc).unwrap().verdict, Verdict::NotDissipative);
        // u(0) = 0, Du(1) = i u(1): the form −Re(ū(1) i u(1)) vanishes.
        let raw = vec![
            RawCondition::new(vec![Term::new(0, 0, c(1.0, 0.0))]),
            RawCondition::new(vec![Term::new(1, 1, c(1.0, 0.0)), Term::new(1, 0, c(0.0, -1.0))]),
        ];
        let bc = normalize_conditions(2, &raw).unwrap();
        assert_eq!(dissipativity_test(&bc).unwrap().verdict, Verdict::SelfAdjoint);
        // u(0) = 0, Du(1) = −u(1): the form is |u(1)|².
        let raw = vec![
            RawCondition::new(vec![Term::new(0, 0, c(1.0, 0.0))]),
            RawCondition::new(vec![Term::new(1, 1, c(1.0, 0.0)), Term::new(1, 0, c(1.0, 0.0))]),
        ];
        let bc = normalize_conditions(2, &raw).unwrap();
        let r = dissipativity_test(&bc).unwrap();
        assert_eq!(r.verdict, Verdict::Dissipative);
    }

    #[test]
    fn samplers() {
        for seed in 0..10 {
            let s = sample_dissipative_bc(4, seed, 0.0).unwrap();
            assert_eq!(s.report.verdict, Verdict::Dissipative);
            assert!(s.report.margin > 0.0);
            let s = sample_selfadjoint_bc(2, seed).unwrap();
            assert_eq!(s.report.verdict, Verdict::SelfAdjoint);
            assert!(s.report.restricted_eigenvalues.iter().all(|e| e.abs() <= 1e-10));
        }
        let a = sample_dissipative_bc(4, 7, 0.5).unwrap();
        let b = sample_dissipative_bc(4, 7, 0.5).unwrap();
        assert_eq!(a.bc.matrix(), b.bc.matrix());
    }
}
