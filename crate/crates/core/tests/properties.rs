use std::f64::consts::PI;

use bspec_core::dissipativity::{dissipativity_test, lagrange_form, sample_dissipative_bc, sample_selfadjoint_bc, Verdict};
use bspec_core::fss::FssOptions;
use bspec_core::green::GreenFunction;
use bspec_core::linalg::{self, CMatrix};
use bspec_core::quadrature::GaussLegendre;
use bspec_core::regularity::{
    classify, fourier_factor_residual, q_rank, strong_regularity_polynomial, theta, theta_matrix, Classification,
};
use bspec_core::spectral::{decay_profile, SpectralPoint};
use bspec_core::{normalize_conditions, normalize_matrix, BoundaryConditionSet, ConditionBlock, ConditionRow, DifferentialExpression};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random `rows × cols` matrix; each entry is zeroed with probability `sparsity`.
fn random_matrix(rows: usize, cols: usize, sparsity: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < sparsity {
            c(0.0, 0.0)
        } else {
            gaussian(rng)
        }
    })
}

fn random_bc(n: usize, seed: u64, sparsity: f64) -> Option<BoundaryConditionSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normalize_matrix(&random_matrix(n, 2 * n, sparsity, &mut rng)).ok()
}

fn invertible(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    loop {
        let m = random_matrix(n, n, 0.0, rng);
        if linalg::cond2(&m) < 1e4 {
            return m;
        }
    }
}

/// Orthogonal projector onto the null space of the full condition matrix.
fn null_projector(bc: &BoundaryConditionSet) -> CMatrix {
    let k = linalg::null_space(&bc.matrix(), 1e-10);
    &k * k.adjoint()
}

fn scaled_block(bc: &BoundaryConditionSet, order: usize, t: Complex64) -> BoundaryConditionSet {
    let blocks = bc
        .blocks()
        .iter()
        .map(|b| {
            if b.order != order {
                return b.clone();
            }
            ConditionBlock {
                order: b.order,
                rows: b
                    .rows
                    .iter()
                    .map(|r| ConditionRow {
                        b0: r.b0 * t,
                        b1: r.b1 * t,
                        tail0: r.tail0.iter().map(|v| v * t).collect(),
                        tail1: r.tail1.iter().map(|v| v * t).collect(),
                    })
                    .collect(),
            }
        })
        .collect();
    BoundaryConditionSet::from_blocks(bc.order(), blocks).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(cases)
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn normalization_is_projectively_stable(n in 1usize..=6, seed in any::<u64>(), sparsity in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_matrix(n, 2 * n, sparsity, &mut rng);
        let Ok(a) = normalize_matrix(&u) else { return Ok(()) };
        let m = invertible(n, &mut rng);
        let b = normalize_matrix(&(&m * &u)).unwrap();
        prop_assert_eq!(a.ranks(), b.ranks());
        let diff = linalg::max_abs(&(null_projector(&a) - null_projector(&b)));
        prop_assert!(diff < 1e-8, "null spaces differ by {}", diff);
        let (ra, rb) = (classify(&a).unwrap(), classify(&b).unwrap());
        prop_assert_eq!(ra.classification, rb.classification);
        prop_assert_eq!(ra.forward_margin > 1e-8, rb.forward_margin > 1e-8);
    }

    #[test]
    fn normalization_is_idempotent(n in 2usize..=6, seed in any::<u64>(), sparsity in 0.0f64..0.5) {
        let Some(bc) = random_bc(n, seed, sparsity) else { return Ok(()) };
        let again = normalize_matrix(&bc.matrix()).unwrap();
        prop_assert!(linalg::max_abs(&(again.matrix() - bc.matrix())) < 1e-12);
        let from_raw = normalize_conditions(n, &bc.to_raw()).unwrap();
        prop_assert!(linalg::max_abs(&(from_raw.matrix() - bc.matrix())) < 1e-12);
    }

    #[test]
    fn theta_is_multilinear_in_blocks(n in 1usize..=6, seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let t = c(re, im);
        prop_assume!(t.norm() > 0.1);
        let Some(bc) = random_bc(n, seed, 0.3) else { return Ok(()) };
        let order = bc.blocks()[seed as usize % bc.blocks().len()].order;
        let rank = bc.blocks().iter().find(|b| b.order == order).unwrap().rank();
        let scaled = scaled_block(&bc, order, t);
        let factor = t.powu(rank as u32);
        for p in 0..=n {
            for swapped in [false, true] {
                let (before, _) = theta(&bc, p, swapped).unwrap();
                let (after, _) = theta(&scaled, p, swapped).unwrap();
                prop_assert!((after - before * factor).norm() <= 1e-11 * (1.0 + after.norm()));
            }
        }
        prop_assert_eq!(classify(&bc).unwrap().classification, classify(&scaled).unwrap().classification);
    }

    #[test]
    fn theta_flips_sign_under_column_swap(n in 2usize..=6, seed in any::<u64>(), p in 0usize..=6, a in 0usize..6, b in 0usize..6) {
        let (p, a, b) = (p.min(n), a % n, b % n);
        prop_assume!(a != b);
        let Some(bc) = random_bc(n, seed, 0.2) else { return Ok(()) };
        let m = theta_matrix(&bc, p, false).unwrap().entries;
        let mut swapped = m.clone();
        swapped.swap_columns(a, b);
        let (d, ds) = (linalg::det(&m), linalg::det(&swapped));
        prop_assert!((d + ds).norm() <= 1e-12 * (1.0 + d.norm()));
    }

    #[test]
    fn strong_polynomial_at_zero_matches_theta(half in 1usize..=4, seed in any::<u64>(), sparsity in 0.0f64..0.4) {
        let n = 2 * half;
        let Some(bc) = random_bc(n, seed, sparsity) else { return Ok(()) };
        let r = classify(&bc).unwrap();
        let f = strong_regularity_polynomial(&bc).unwrap();
        let (f0, th) = (f.c0.0.norm(), r.theta_forward.0.norm());
        prop_assert!((f0 - th).abs() <= 1e-11 * (1.0 + th), "|F(0)| = {} |Θ| = {}", f0, th);
    }

    #[test]
    fn forward_and_swapped_theta_agree_in_modulus(n in 1usize..=8, seed in any::<u64>(), sparsity in 0.0f64..0.4) {
        let Some(bc) = random_bc(n, seed, sparsity) else { return Ok(()) };
        let r = classify(&bc).unwrap();
        let q = r.q;
        let (fwd, swp) = if n % 2 == 1 {
            (r.theta_by_p[q + 1].forward.0, r.theta_by_p[q].swapped.0)
        } else {
            (r.theta_by_p[q].forward.0, r.theta_by_p[q].swapped.0)
        };
        prop_assert!((fwd.norm() - swp.norm()).abs() <= 1e-10 * (1.0 + fwd.norm()), "{} vs {}", fwd.norm(), swp.norm());
    }

    #[test]
    fn fourier_identity_and_full_rank(n in 1usize..=8, seed in any::<u64>(), sparsity in 0.0f64..0.5) {
        let Some(bc) = random_bc(n, seed, sparsity) else { return Ok(()) };
        prop_assert!(fourier_factor_residual(&bc).unwrap() <= 1e-12);
        prop_assert_eq!(q_rank(&bc).unwrap(), n);
    }

    #[test]
    fn verdict_survives_row_recombination(n in 1usize..=6, seed in any::<u64>(), kind in 0u8..3) {
        let bc = match kind {
            0 => sample_dissipative_bc(n, seed, 0.7).unwrap().bc,
            1 => sample_selfadjoint_bc(n, seed).unwrap().bc,
            _ => match random_bc(n, seed, 0.0) { Some(bc) => bc, None => return Ok(()) },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let m = invertible(n, &mut rng);
        let mixed = normalize_matrix(&(m * bc.matrix())).unwrap();
        prop_assert_eq!(dissipativity_test(&bc).unwrap().verdict, dissipativity_test(&mixed).unwrap().verdict);
    }

    #[test]
    fn samplers_are_sound(n in 1usize..=8, seed in any::<u64>(), sigma in 0.0f64..=1.0) {
        let d = sample_dissipative_bc(n, seed, sigma).unwrap();
        prop_assert_ne!(dissipativity_test(&d.bc).unwrap().verdict, Verdict::NotDissipative);
        let s = sample_selfadjoint_bc(n, seed).unwrap();
        prop_assert_eq!(dissipativity_test(&s.bc).unwrap().verdict, Verdict::SelfAdjoint);
    }

    #[test]
    fn even_order_dissipative_conditions_are_regular(half in 1usize..=4, seed in any::<u64>(), sigma in 0.0f64..=1.0) {
        let d = sample_dissipative_bc(2 * half, seed, sigma).unwrap();
        prop_assert_ne!(classify(&d.bc).unwrap().classification, Classification::Irregular);
    }

    #[test]
    fn branch_is_consistent(n in 1usize..=8, re in -1e3f64..1e3, im in -1e3f64..1e3) {
        let lambda = c(re, im);
        prop_assume!(lambda.norm() > 1e-6);
        let sp = SpectralPoint::new(lambda, n).unwrap();
        prop_assert!((sp.rho.powu(n as u32) - lambda).norm() <= 1e-12 * lambda.norm());
        prop_assert!(sp.sector <= 1);
        prop_assert!(sp.arg_rho() < 2.0 * PI / n as f64 + 1e-15);
    }

    #[test]
    fn interior_rays_have_a_decay_prefix(n in 1usize..=8, sector in 0usize..2, t in 0.01f64..0.99, r in 1.0f64..500.0) {
        let arg_rho = (sector as f64 + t) * PI / n as f64;
        let sp = SpectralPoint::from_rho(Complex64::from_polar(r, arg_rho), n).unwrap();
        let profile = decay_profile(&sp, 0.0);
        prop_assert!(profile.prefix_ok, "arg ρ = {} n = {}", arg_rho, n);
    }
}

/// Exact derivatives of `Σ a_m x^m`.
fn poly_derivative(a: &[Complex64], k: usize, x: f64) -> Complex64 {
    let mut acc = c(0.0, 0.0);
    for (m, &am) in a.iter().enumerate().skip(k) {
        let falling: f64 = ((m - k + 1)..=m).map(|v| v as f64).product();
        acc += am * falling * x.powi((m - k) as i32);
    }
    acc
}

fn d_power(k: usize) -> Complex64 {
    c(0.0, -1.0).powu(k as u32)
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn lagrange_form_matches_quadrature(n in 1usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Complex64> = (0..n + 4).map(|_| gaussian(&mut rng)).collect();
        let gl = GaussLegendre::new(32);
        let mut inner = c(0.0, 0.0);
        for (&t, &w) in gl.nodes.iter().zip(&gl.weights) {
            let x = 0.5 * (t + 1.0);
            let dn = d_power(n) * poly_derivative(&a, n, x);
            inner += 0.5 * w * dn * poly_derivative(&a, 0, x).conj();
        }
        let mut y = Vec::with_capacity(2 * n);
        for end in [0.0, 1.0] {
            for k in 0..n {
                y.push(d_power(k) * poly_derivative(&a, k, end));
            }
        }
        let form = lagrange_form(n).value(&y);
        let scale = 1.0 + y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        prop_assert!((inner.im - form).abs() <= 1e-8 * scale, "{} vs {}", inner.im, form);
    }
}

fn green_problem(n: usize, seed: u64) -> (BoundaryConditionSet, DifferentialExpression, Complex64) {
    let bc = sample_dissipative_bc(n, seed, 0.5).unwrap().bc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = c(rng.random_range(-20.0..20.0), rng.random_range(-20.0..-2.0));
    (bc, DifferentialExpression::essential(n), lambda)
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn ratio_form_matches_expansion(n in 2usize..=4, seed in any::<u64>(), x in 0.0f64..=1.0, xi in 0.0f64..=1.0) {
        let (bc, expr, lambda) = green_problem(n, seed);
        let g = GreenFunction::new(&bc, &expr, lambda, &FssOptions::default()).unwrap();
        let (sx, sxi) = (g.sample(x).unwrap(), g.sample(xi).unwrap());
        let expanded = g.evaluate_samples(&sx, &sxi).value;
        let ratio = g.ratio_form(&sx, &sxi);
        prop_assert!((expanded - ratio).norm() <= 1e-9 * (1.0 + expanded.norm()), "{} vs {}", expanded, ratio);
        let bv = g.boundary_values(&sxi);
        prop_assert!(bv.iter().all(|v| v.norm() <= 1e-10));
    }
}

/// Weights `w_j` with `Σ w_j f(ξ + s·j·h) ≈ f^{(m)}(ξ)` (one-sided, j = 0..len).
fn one_sided_weights(m: usize, len: usize, h: f64, s: f64) -> Vec<f64> {
    let pts: Vec<f64> = (0..len).map(|j| s * j as f64 * h).collect();
    let v = nalgebra::DMatrix::from_fn(len, len, |r, col| pts[col].powi(r as i32));
    let mut rhs = nalgebra::DVector::zeros(len);
    rhs[m] = (1..=m).map(|v| v as f64).product::<f64>();
    v.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn green_derivative_jumps_by_i_at_the_diagonal() {
    for (n, seed) in [(2usize, 1u64), (2, 2), (3, 3), (3, 4)] {
        let (bc, expr, lambda) = green_problem(n, seed);
        let g = GreenFunction::new(&bc, &expr, lambda, &FssOptions::default()).unwrap();
        let xi = 0.43;
        let (h, len) = (0.01, 9);
        let sxi = g.sample(xi).unwrap();
        let side = |s: f64| -> Vec<Complex64> {
            (0..len)
                .map(|j| {
                    // The diagonal value itself belongs to the x ≥ ξ branch; the
                    // left limit comes from continuity of G when n ≥ 2.
                    let x = xi + s * j as f64 * h;
                    g.evaluate_samples(&g.sample(x).unwrap(), &sxi).value
                })
                .collect()
        };
        let (right, left) = (side(1.0), side(-1.0));
        for m in 0..n {
            let wr = one_sided_weights(m, len, h, 1.0);
            let wl = one_sided_weights(m, len, h, -1.0);
            let dr: Complex64 = right.iter().zip(&wr).map(|(v, w)| v * w).sum();
            let dl: Complex64 = left.iter().zip(&wl).map(|(v, w)| v * w).sum();
            let jump = d_power(m) * (dr - dl);
            let want = if m == n - 1 { c(0.0, 1.0) } else { c(0.0, 0.0) };
            assert!((jump - want).norm() < 1e-5, "n = {n}, m = {m}: jump {jump}");
        }
    }
}

#[test]
fn z_and_u_norms_scale_like_inverse_modulus() {
    let problems = [
        (2usize, normalize_conditions(2, &bspec_core::model::presets::dirichlet()).unwrap()),
        (2, sample_dissipative_bc(2, 11, 0.5).unwrap().bc),
        (4, sample_dissipative_bc(4, 12, 0.5).unwrap().bc),
        (3, sample_dissipative_bc(3, 13, 0.5).unwrap().bc),
    ];
    for (n, bc) in &problems {
        for r in [20.0, 80.0, 320.0] {
            let sp = SpectralPoint::on_ray(1.5 * PI, r, *n).unwrap();
            let g = GreenFunction::new(bc, &DifferentialExpression::essential(*n), sp.lambda, &FssOptions::default()).unwrap();
            let rule = bspec_core::quadrature::CompositeRule::new(0.0, 1.0, 64, 16);
            let samples = g.samples(&rule.nodes).unwrap();
            let mut zn = vec![0.0; *n];
            let mut un = vec![0.0; *n];
            for (s, w) in samples.iter().zip(&rule.weights) {
                let (z, u) = (g.z(s), g.u(s));
                for k in 0..*n {
                    zn[k] += w * z[k].norm_sqr();
                    un[k] += w * u[k].norm_sqr();
                }
            }
            for k in 0..*n {
                for v in [zn[k] * r, un[k] * r] {
                    assert!((0.1..=10.0).contains(&v), "n = {n}, |ρ| = {r}, k = {k}: r‖·‖² = {v}");
                }
            }
        }
    }
}
