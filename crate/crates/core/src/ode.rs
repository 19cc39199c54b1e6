//! Adaptive Dormand–Prince 5(4) integrator for complex first-order systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step size; zero means unbounded.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
            max_step: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` in place. `t1 < t0` is allowed.
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y: &mut [Complex64], opts: &OdeOptions) -> Result<OdeStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(stats);
    }
    let dir = span.signum();
    let dim = y.len();
    let z = Complex64::new(0.0, 0.0);
    let mut k1 = vec![z; dim];
    let mut k2 = vec![z; dim];
    let mut k3 = vec![z; dim];
    let mut k4 = vec![z; dim];
    let mut k5 = vec![z; dim];
    let mut k6 = vec![z; dim];
    let mut k7 = vec![z; dim];
    let mut tmp = vec![z; dim];
    let mut ynew = vec![z; dim];

    let mut t = t0;
    f(t, y, &mut k1);
    let max_step = if opts.max_step > 0.0 { opts.max_step } else { span.abs() };
    let mut h = initial_step(&mut f, t, y, &k1, dir, opts).min(max_step).min(span.abs());
    let scale = |a: Complex64, b: Complex64| opts.atol + opts.rtol * a.norm().max(b.norm());

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 1e-14 * span.abs() {
            break;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integrator(format!("step limit reached at t = {t}")));
        }
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = h * dir;

        for i in 0..dim {
            tmp[i] = y[i] + k1[i] * (hs * A21);
        }
        f(t + C2 * hs, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * hs;
        }
        f(t + C3 * hs, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * hs;
        }
        f(t + C4 * hs, &tmp, &mut k4);
        for i in 0..dim {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * hs;
        }
        f(t + C5 * hs, &tmp, &mut k5);
        for i in 0..dim {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * hs;
        }
        f(t + hs, &tmp, &mut k6);
        for i in 0..dim {
            ynew[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * hs;
        }
        let tnew = if last { t1 } else { t + hs };
        f(tnew, &ynew, &mut k7);

        let mut err = 0.0;
        for i in 0..dim {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
            let s = scale(y[i], ynew[i]);
            err += (e.norm() / s).powi(2);
        }
        let err = (err / dim.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Integrator(format!("non-finite state near t = {t}")));
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = tnew;
            y.copy_from_slice(&ynew);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(max_step);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if h < 1e-15 * span.abs().max(t.abs()) {
            return Err(Error::Integrator(format!("step size underflow at t = {t}")));
        }
    }
    Ok(stats)
}

fn initial_step<F>(f: &mut F, t: f64, y: &[Complex64], f0: &[Complex64], dir: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let dim = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.norm()).collect();
    let rms = |v: &[Complex64]| {
        (v.iter().zip(&sc).map(|(a, s)| (a.norm() / s).powi(2)).sum::<f64>() / dim.max(1) as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<Complex64> = y.iter().zip(f0).map(|(a, b)| a + b * (h0 * dir)).collect();
    let mut f1 = vec![Complex64::new(0.0, 0.0); dim];
    f(t + h0 * dir, &y1, &mut f1);
    let diff: Vec<Complex64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}
