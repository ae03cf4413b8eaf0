use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

/// `psi = a phi + b phi^n` with `b = 1 - a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub a: f64,
    #[serde(default = "default_power")]
    pub n: u32,
}

fn default_power() -> u32 {
    3
}

impl TestFunction {
    pub fn cubic(a: f64) -> Self {
        TestFunction { a, n: 3 }
    }

    pub fn b(&self) -> f64 {
        1.0 - self.a
    }
}

/// Outcome of the two test-function inequalities, clause by clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionVerdict {
    pub holds: bool,
    /// `a > 1/(tau + 1)`.
    pub i2a_left: bool,
    /// `a` below the upper bound.
    pub i2a_right: bool,
    pub i2a_upper: f64,
    /// `P4 > 0` on `(0, 1)`.
    pub inok: bool,
    /// A point of `[0, 1]` where `P4` fails, when `inok` does.
    pub inok_witness: Option<f64>,
    pub p4_min: f64,
}

/// Open interval of admissible `a` from the first inequality; may be empty.
pub fn i2a_interval(gamma: f64, tau: f64) -> (f64, f64) {
    let s = (1.0 + gamma) / (4.0 * tau);
    let lo = 1.0 / (tau + 1.0);
    let hi = 1.5 - s - (s * s - s).max(0.0).sqrt();
    (lo, hi)
}

/// Coefficients `c0..c4` of `P4(x) = tau (a + 3bx^2)(1 + bx + bx^2) - b (1 + x)(1 + gamma (ax + bx^3))`.
pub fn p4_coefficients(gamma: f64, tau: f64, a: f64) -> [f64; 5] {
    let b = 1.0 - a;
    [
        tau * a - b,
        tau * a * b - b * (gamma * a + 1.0),
        tau * (a * b + 3.0 * b) - gamma * a * b,
        (3.0 * tau - gamma) * b * b,
        (3.0 * tau - gamma) * b * b,
    ]
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Real roots of `c0 + c1 x + c2 x^2 + c3 x^3`, in closed form, with degree drops.
pub(crate) fn cubic_real_roots(c: [f64; 4]) -> Vec<f64> {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let small = 1e-14 * scale;
    if c[3].abs() <= small {
        if c[2].abs() <= small {
            return if c[1].abs() <= small { Vec::new() } else { vec![-c[0] / c[1]] };
        }
        let (qa, qb, qc) = (c[2], c[1], c[0]);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return Vec::new();
        }
        // cancellation-free pair
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        let mut r = Vec::new();
        if q != 0.0 {
            r.push(qc / q);
        }
        r.push(q / qa);
        return r;
    }
    let (a, b, cc) = (c[2] / c[3], c[1] / c[3], c[0] / c[3]);
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * cc) / 54.0;
    let roots = if r * r < q * q * q {
        let th = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let tp = 2.0 * std::f64::consts::PI;
        vec![
            m * (th / 3.0).cos() - a / 3.0,
            m * ((th + tp) / 3.0).cos() - a / 3.0,
            m * ((th - tp) / 3.0).cos() - a / 3.0,
        ]
    } else {
        let big = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
        let small_b = if big == 0.0 { 0.0 } else { q / big };
        vec![big + small_b - a / 3.0]
    };
    // one Newton polish each
    roots
        .into_iter()
        .map(|x| {
            let f = horner(&c, x);
            let df = c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x;
            if df != 0.0 {
                x - f / df
            } else {
                x
            }
        })
        .collect()
}

/// Check both inequalities of the cubic test-function criterion.
pub fn test_function_check(gamma: f64, tau: f64, tf: TestFunction) -> Result<TestFunctionVerdict> {
    if tf.n != 3 {
        return Err(Error::Unsupported(format!("test function power n = {} (only n = 3)", tf.n)));
    }
    require(gamma > 1.0, || format!("gamma > 1 violated: gamma = {gamma}"))?;
    require(tau > 0.0, || format!("tau > 0 violated: tau = {tau}"))?;
    require(tau <= 0.25 * (1.0 + gamma), || format!("tau <= (1 + gamma)/4 violated: tau = {tau}"))?;
    require(tf.a > 0.0 && tf.a < 1.0, || format!("a must lie in (0, 1), got {}", tf.a))?;

    let (lo, hi) = i2a_interval(gamma, tau);
    let i2a_left = tf.a > lo;
    let i2a_right = tf.a < hi;

    let p = p4_coefficients(gamma, tau, tf.a);
    let dp = [p[1], 2.0 * p[2], 3.0 * p[3], 4.0 * p[4]];
    let mut candidates = vec![0.0, 1.0];
    candidates.extend(cubic_real_roots(dp).into_iter().filter(|x| *x > 0.0 && *x < 1.0));
    let mut inok = true;
    let mut witness = None;
    let mut p4_min = f64::INFINITY;
    for &x in &candidates {
        let v = horner(&p, x);
        let endpoint = x == 0.0 || x == 1.0;
        let ok = if endpoint { v >= 0.0 } else { v > 0.0 };
        if v < p4_min {
            p4_min = v;
        }
        if !ok && inok {
            inok = false;
            witness = Some(x);
        }
    }
    Ok(TestFunctionVerdict {
        holds: i2a_left && i2a_right && inok,
        i2a_left,
        i2a_right,
        i2a_upper: hi,
        inok,
        inok_witness: witness,
        p4_min,
    })
}

/// Number of `a` values scanned per delay by [`tau_star`].
pub const A_GRID: usize = 256;

fn window_has_admissible_a(gamma: f64, tau: f64) -> Result<bool> {
    let (lo, hi) = i2a_interval(gamma, tau);
    let (lo, hi) = (lo.max(0.0), hi.min(1.0));
    if hi <= lo {
        return Ok(false);
    }
    for k in 0..A_GRID {
        let a = lo + (hi - lo) * (k as f64 + 0.5) / A_GRID as f64;
        if test_function_check(gamma, tau, TestFunction::cubic(a))?.holds {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Left end of the delay interval on which some cubic test function certifies
/// a non-monotone non-oscillating heteroclinic.
pub fn tau_star(gamma: f64, tol: f64) -> Result<f64> {
    require(gamma > 1.0, || format!("tau_star needs gamma > 1, got {gamma}"))?;
    require(tol > 0.0, || "tolerance must be positive".into())?;
    let upper = 0.25 * (1.0 + gamma);
    let mut hi = upper - tol;
    if hi <= 0.0 || !window_has_admissible_a(gamma, hi)? {
        return Err(Error::NoWindow(format!("no cubic test function applies at gamma = {gamma}")));
    }
    // the left inequality alone fails for tau <= 1/a - 1 with a < 1/2, so tau = 1 never qualifies
    let mut lo = tol.min(1.0);
    if window_has_admissible_a(gamma, lo)? {
        return Ok(lo);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if window_has_admissible_a(gamma, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
