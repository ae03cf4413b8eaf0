//! Characteristic equations: real-root scans with tangency detection and the
//! closed-form node/focus classification of the planar limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::models::{moment_abscissae, Kernel, WaveParams};
use crate::numerics::{find_root, maximize_scalar};

const SCAN_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub mult: u32,
}

impl Root {
    pub fn real(x: f64, mult: u32) -> Self {
        Root { re: x, im: 0.0, mult }
    }

    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootClass {
    Node,
    Boundary,
    Focus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    pub roots: Vec<Root>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<RootClass>,
    pub real_negative_count: u32,
    pub real_positive_count: u32,
    pub has_complex_positive_real_part: bool,
    pub dominant_real: Option<f64>,
    /// The search interval was cut short where the moment transform diverges.
    #[serde(default)]
    pub truncated: bool,
}

impl RootReport {
    pub fn from_roots(mut roots: Vec<Root>, class: Option<RootClass>) -> Self {
        roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let count = |pred: &dyn Fn(&Root) -> bool| roots.iter().filter(|r| r.is_real() && pred(r)).map(|r| r.mult).sum();
        RootReport {
            real_negative_count: count(&|r| r.re < 0.0),
            real_positive_count: count(&|r| r.re > 0.0),
            has_complex_positive_real_part: roots.iter().any(|r| !r.is_real() && r.re > 0.0),
            dominant_real: roots.iter().find(|r| r.is_real()).map(|r| r.re),
            roots,
            class,
            truncated: false,
        }
    }

    pub fn real_roots(&self) -> Vec<f64> {
        self.roots.iter().filter(|r| r.is_real()).map(|r| r.re).collect()
    }
}

/// `lambda(c) <= mu(c)`, the roots of `z^2 - c z + G(0) = 0`.
pub fn kpp_roots(c: f64, g0: f64) -> Result<(f64, f64)> {
    let c_min = 2.0 * g0.sqrt();
    if c < c_min {
        return Err(Error::SubcriticalSpeed { c, c_min });
    }
    let d = (c * c - 4.0 * g0).max(0.0).sqrt();
    let mu = 0.5 * (c + d);
    // lambda from the product avoids cancellation in c - d
    Ok((g0 / mu, mu))
}

/// `z1 < 0 < z2`, the roots of `z^2 - c z - b = 0` for `b > 0`.
pub fn shifted_roots(c: f64, b: f64) -> (f64, f64) {
    let d = (c * c + 4.0 * b).sqrt();
    let z2 = 0.5 * (c + d);
    (-b / z2, z2)
}

/// Real roots of `f` on `[lo, hi]` with multiplicities: a 512-node sign scan,
/// Brent refinement of every sign change, and tangency checks at the local
/// extrema of `|f|` that show no sign change.
pub fn real_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Vec<(f64, u32)> {
    let xs: Vec<f64> = (0..SCAN_NODES).map(|i| lo + (hi - lo) * i as f64 / (SCAN_NODES - 1) as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let scale = fs.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let ftol = tol * scale;
    let xtol = (hi - lo) * 1e-15 + tol * 1e-3;
    let mut out: Vec<(f64, u32)> = Vec::new();
    for i in 0..SCAN_NODES {
        if fs[i] == 0.0 {
            out.push((xs[i], 1));
            continue;
        }
        if i + 1 < SCAN_NODES && fs[i + 1] != 0.0 && (fs[i] > 0.0) != (fs[i + 1] > 0.0) {
            if let Ok(r) = find_root(&f, xs[i], xs[i + 1], xtol) {
                out.push((r, 1));
            }
        }
        // interior extremum of |f| with no sign change across it
        if i > 0 && i + 1 < SCAN_NODES {
            let (a, b, c) = (fs[i - 1], fs[i], fs[i + 1]);
            let same = (a > 0.0) == (b > 0.0) && (b > 0.0) == (c > 0.0) && a != 0.0 && c != 0.0;
            if same && b.abs() <= a.abs() && b.abs() < c.abs() {
                let s = b.signum();
                let (xm, neg_fm) = maximize_scalar(|x| -s * f(x), xs[i - 1], xs[i + 1], xtol);
                let fm = -s * neg_fm;
                if fm.abs() <= ftol {
                    out.push((xm, 2));
                } else if (fm > 0.0) != (s > 0.0) {
                    for (a, b) in [(xs[i - 1], xm), (xm, xs[i + 1])] {
                        if let Ok(r) = find_root(&f, a, b, xtol) {
                            out.push((r, 1));
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    // a tangency flanked by near-zero scan values can be found twice
    out.dedup_by(|b, a| {
        if (a.0 - b.0).abs() <= 1e-9 * (1.0 + a.0.abs()) {
            a.1 = a.1.max(b.1);
            true
        } else {
            false
        }
    });
    out
}

fn classify_real(roots: &[(f64, u32)]) -> RootClass {
    match roots.iter().map(|r| r.1).sum::<u32>() {
        0 => RootClass::Focus,
        _ if roots.len() == 1 && roots[0].1 == 2 => RootClass::Boundary,
        _ => RootClass::Node,
    }
}

/// `chi_+(z) = z^2 - c z + G'(1) F_c(z)`.
pub fn chi_plus(params: &WaveParams, z: f64) -> f64 {
    z * z - params.c * z + params.growth.gp1() * params.moment_transform(z)
}

/// Default negative search window: `[-20/(c tau), 0)` for delay kernels, `[-20, 0)` otherwise.
pub fn chi_plus_window(params: &WaveParams) -> (f64, f64) {
    match params.kernel.tau() {
        Some(tau) if params.c > 0.0 => (-20.0 / (params.c * tau), 0.0),
        _ => (-20.0, 0.0),
    }
}

/// Real zeros of `chi_+` on `[lo, hi]`; the interval is cut back to where the
/// moment transform is finite and the report flagged.
pub fn chi_plus_roots(params: &WaveParams, lo: f64, hi: f64, tol: f64) -> Result<RootReport> {
    params.validate()?;
    require(lo < hi, || format!("empty search interval [{lo}, {hi}]"))?;
    let (l0, l1) = moment_abscissae(&params.kernel, params.c);
    let margin = |l: f64| 1e-9 * (1.0 + l.abs());
    let (a, b) = (lo.max(l0 + margin(l0)), hi.min(l1 - margin(l1)));
    let truncated = a > lo || b < hi;
    require(a < b, || format!("moment transform diverges on all of [{lo}, {hi}]"))?;
    // exclude a root exactly at the open end z = 0
    let roots: Vec<(f64, u32)> = real_roots(|z| chi_plus(params, z), a, b, tol)
        .into_iter()
        .filter(|r| !(hi == 0.0 && r.0 >= 0.0))
        .collect();
    let negatives: u32 = roots.iter().filter(|r| r.0 < 0.0).map(|r| r.1).sum();
    if negatives > 4 && matches!(params.kernel, Kernel::WeakGeneric { .. } | Kernel::DiscreteDelay { .. }) {
        return Err(Error::Precondition(format!("chi_+ reported {negatives} negative zeros, at most four are possible")));
    }
    let class = classify_real(&roots);
    let mut report = RootReport::from_roots(roots.into_iter().map(|(x, m)| Root::real(x, m)).collect(), Some(class));
    report.truncated = truncated;
    Ok(report)
}

/// `eps z^2 - z - e^{-z tau} / (1 + gamma)`.
pub fn ehe(gamma: f64, tau: f64, eps: f64, z: f64) -> f64 {
    eps * z * z - z - (-z * tau).exp() / (1.0 + gamma)
}

/// Real roots of the delay characteristic equation in `[-20/tau, 0)`.
pub fn ehe_roots(gamma: f64, tau: f64, eps: f64, tol: f64) -> Result<RootReport> {
    ehe_roots_in(gamma, tau, eps, -20.0 / tau, 0.0, tol)
}

pub fn ehe_roots_in(gamma: f64, tau: f64, eps: f64, lo: f64, hi: f64, tol: f64) -> Result<RootReport> {
    require(gamma >= 0.0 && tau > 0.0 && eps >= 0.0, || {
        format!("need gamma >= 0, tau > 0, eps >= 0; got {gamma}, {tau}, {eps}")
    })?;
    let roots: Vec<(f64, u32)> =
        real_roots(|z| ehe(gamma, tau, eps, z), lo, hi, tol).into_iter().filter(|r| r.0 < hi).collect();
    let class = classify_real(&roots);
    Ok(RootReport::from_roots(roots.into_iter().map(|(x, m)| Root::real(x, m)).collect(), Some(class)))
}

/// Roots of `(eps z^2 - z)^2 - (eps z^2 - z)/tau + 1/(tau (1 + gamma)) = 0`,
/// via `w = eps z^2 - z`. At `eps = 0` only the two roots `z = -w` exist.
pub fn chare_classify(gamma: f64, tau: f64, eps: f64) -> Result<RootReport> {
    require(gamma > 0.0 && tau > 0.0 && eps >= 0.0, || {
        format!("need gamma > 0, tau > 0, eps >= 0; got {gamma}, {tau}, {eps}")
    })?;
    let k = 1.0 / (tau * (1.0 + gamma));
    let dw = 1.0 / (tau * tau) - 4.0 * k;
    let class = if dw.abs() <= 1e-12 / (tau * tau) {
        RootClass::Boundary
    } else if dw > 0.0 {
        RootClass::Node
    } else {
        RootClass::Focus
    };
    let sq = Complex64::new(dw, 0.0).sqrt();
    let ws = [0.5 * (1.0 / tau - sq), 0.5 * (1.0 / tau + sq)];
    let mut roots = Vec::new();
    for w in ws {
        if eps == 0.0 {
            roots.push(-w);
        } else {
            let r = (Complex64::new(1.0, 0.0) + 4.0 * eps * w).sqrt();
            roots.push((1.0 - r) / (2.0 * eps));
            roots.push((1.0 + r) / (2.0 * eps));
        }
    }
    let mut out: Vec<Root> = Vec::new();
    if class == RootClass::Boundary {
        // merge the coincident w-branches
        let n = roots.len() / 2;
        for z in &roots[..n] {
            out.push(Root::real(z.re, 2));
        }
    } else {
        for z in roots {
            let im = if class == RootClass::Node { 0.0 } else { z.im };
            out.push(Root { re: z.re, im, mult: 1 });
        }
    }
    Ok(RootReport::from_roots(out, Some(class)))
}

/// Critical delays `((1 + gamma)/e, (1 + gamma)/4)`: real roots of the
/// discrete-delay and weak-generic limits exist below these values.
pub fn real_root_boundary(gamma: f64) -> Result<(f64, f64)> {
    require(gamma >= 0.0, || format!("gamma must be >= 0, got {gamma}"))?;
    Ok(((1.0 + gamma) / std::f64::consts::E, 0.25 * (1.0 + gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GrowthModel;
    use proptest::prelude::*;

    #[test]
    fn kpp_examples() {
        assert_eq!(kpp_roots(2.0, 1.0).unwrap(), (1.0, 1.0));
        let (l, m) = kpp_roots(2.5, 1.0).unwrap();
        assert!((l - 0.5).abs() < 1e-15 && (m - 2.0).abs() < 1e-15);
        assert!(matches!(kpp_roots(1.0, 1.0), Err(Error::SubcriticalSpeed { .. })));
    }

    #[test]
    fn ehe_tangency_is_a_double_root() {
        let tau = 10.0 / std::f64::consts::E;
        let r = ehe_roots(9.0, tau, 0.0, 1e-10).unwrap();
        assert_eq!(r.roots.len(), 1, "{:?}", r.roots);
        assert_eq!(r.roots[0].mult, 2);
        assert!((r.roots[0].re + 1.0 / tau).abs() < 1e-6);
        assert_eq!(r.class, Some(RootClass::Boundary));
    }

    #[test]
    fn ehe_two_roots_below_threshold() {
        let r = ehe_roots(9.0, 3.0, 0.0, 1e-10).unwrap();
        let z = r.real_roots();
        assert_eq!(z.len(), 2);
        // bisection oracle for the larger root on [-1/3, 0)
        let f = |z: f64| z + (-3.0 * z).exp() / 10.0;
        let (mut lo, mut hi) = (-1.0 / 3.0, -1e-300);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if (f(m) > 0.0) == (f(lo) > 0.0) {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((z[0] - lo).abs() < 1e-10);
        assert!(z[1] < -1.0 / 3.0);
        assert_eq!(ehe_roots(9.0, 4.0, 0.0, 1e-10).unwrap().real_negative_count, 0);
    }

    #[test]
    fn ehe_small_eps_continuation() {
        let z0 = ehe_roots(9.0, 3.0, 0.0, 1e-10).unwrap().real_roots();
        let z1 = ehe_roots(9.0, 3.0, 0.01, 1e-10).unwrap().real_roots();
        assert_eq!(z1.len(), 2);
        for (a, b) in z0.iter().zip(&z1) {
            assert!((a - b).abs() < 0.1 * a.abs());
        }
    }

    #[test]
    fn chare_examples() {
        let r = chare_classify(40.0, 10.0, 0.0).unwrap();
        assert_eq!(r.class, Some(RootClass::Node));
        let z = r.real_roots();
        // quadratic-formula oracle for z^2 + z/10 + 1/410 = 0
        let d = (0.01f64 - 4.0 / 410.0).sqrt();
        assert!((z[0] - (-0.1 + d) / 2.0).abs() < 1e-14);
        assert!((z[1] - (-0.1 - d) / 2.0).abs() < 1e-14);
        assert!((z[0] + 0.04219).abs() < 1e-5 && (z[1] + 0.05781).abs() < 1e-5);
        assert_eq!(chare_classify(40.0, 10.25, 0.0).unwrap().class, Some(RootClass::Boundary));
        let f = chare_classify(40.0, 11.0, 0.05).unwrap();
        assert_eq!(f.class, Some(RootClass::Focus));
        assert_eq!(f.roots.iter().filter(|r| r.re < 0.0 && r.im != 0.0).count(), 2);
        assert!(f.has_complex_positive_real_part);
    }

    #[test]
    fn boundary_values() {
        let (a, b) = real_root_boundary(9.0).unwrap();
        assert!((a - 3.67879).abs() < 1e-5 && b == 2.5);
        let (a, b) = real_root_boundary(40.0).unwrap();
        assert!((a - 15.083).abs() < 1e-3 && b == 10.25);
    }

    #[test]
    fn chi_plus_discrete_delay_matches_ehe_scaled() {
        let (gamma, tau, c) = (9.0, 3.0, 5.0);
        let p = WaveParams::new(GrowthModel::food_limited(gamma).unwrap(), Kernel::DiscreteDelay { tau }, c).unwrap();
        let (lo, hi) = chi_plus_window(&p);
        let chi = chi_plus_roots(&p, lo, hi, 1e-10).unwrap().real_roots();
        let eh = ehe_roots(gamma, tau, 1.0 / (c * c), 1e-10).unwrap().real_roots();
        assert_eq!(chi.len(), eh.len());
        for (a, b) in chi.iter().zip(&eh) {
            assert!((a - b / c).abs() < 1e-9);
        }
    }

    #[test]
    fn chi_plus_weak_generic_is_truncated_and_bounded() {
        let p = WaveParams::new(GrowthModel::food_limited(40.0).unwrap(), Kernel::WeakGeneric { tau: 5.0 }, 3.0).unwrap();
        let r = chi_plus_roots(&p, -5.0, 0.0, 1e-10).unwrap();
        assert!(r.truncated);
        assert!(r.real_negative_count <= 4);
        for z in r.real_roots() {
            assert!(chi_plus(&p, z).abs() < 1e-8);
        }
    }

    #[test]
    fn report_json_shape() {
        let r = chare_classify(40.0, 10.0, 0.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["class"], "node");
        assert!(v["roots"][0]["re"].is_f64() && v["roots"][0]["mult"] == 1);
    }

    proptest! {
        #[test]
        fn kpp_vieta(c in 2.0f64..20.0, g0 in 0.01f64..1.0) {
            let (l, m) = kpp_roots(c, g0).unwrap();
            prop_assert!(0.0 < l && l <= m);
            prop_assert!((l * m - g0).abs() <= 4.0 * f64::EPSILON * g0);
            prop_assert!((l + m - c).abs() <= 4.0 * f64::EPSILON * c);
        }

        #[test]
        fn ehe_roots_straddle_tangency(gamma in 0.0f64..50.0, frac in 0.05f64..0.95) {
            let tau = frac * (1.0 + gamma) / std::f64::consts::E;
            let z = ehe_roots(gamma, tau, 0.0, 1e-12).unwrap().real_roots();
            prop_assert_eq!(z.len(), 2);
            prop_assert!(z[1] < -1.0 / tau && -1.0 / tau < z[0] && z[0] < 0.0);
            prop_assert!(ehe(gamma, tau, 0.0, z[1]).abs() < 1e-9 / tau);
        }

        #[test]
        fn chare_vieta(gamma in 0.5f64..50.0, tau in 0.5f64..30.0, eps in 0.001f64..0.2) {
            let r = chare_classify(gamma, tau, eps).unwrap();
            let zs: Vec<Complex64> = r.roots.iter().flat_map(|q| {
                let z = Complex64::new(q.re, q.im);
                std::iter::repeat(z).take(q.mult as usize)
            }).collect();
            prop_assert_eq!(zs.len(), 4);
            let sum: Complex64 = zs.iter().sum();
            let prod: Complex64 = zs.iter().product();
            let k = 1.0 / (tau * (1.0 + gamma));
            prop_assert!((sum.re - 2.0 / eps).abs() < 1e-9 * (2.0 / eps));
            prop_assert!((prod.re - k / (eps * eps)).abs() < 1e-6 * (k / (eps * eps)));
        }
    }
}
