use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::numerics::quad_ladder;

/// Nonnegative density sampled on a strictly increasing grid, linear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub s: Vec<f64>,
    pub density: Vec<f64>,
}

/// `\int_0^d e^{-lambda v} (d0 + (d1 - d0) v / d) dv`.
fn exp_linear_cell(lambda: f64, d: f64, d0: f64, d1: f64) -> f64 {
    let x = lambda * d;
    let (i0, i1) = if x.abs() < 1e-2 {
        // 1/x^2 (1 - e^{-x}(1 + x)) = sum_{n>=2} (-1)^n (n - 1) x^{n-2} / n!
        let mut term = 0.5;
        let mut acc = 0.0;
        for n in 2..14 {
            acc += term * (n as f64 - 1.0);
            term *= -x / (n as f64 + 1.0);
        }
        let e0 = if x == 0.0 { 1.0 } else { -(-x).exp_m1() / x };
        (e0, acc)
    } else {
        (-(-x).exp_m1() / x, (1.0 - (-x).exp() * (1.0 + x)) / (x * x))
    };
    d * (d0 * i0 + (d1 - d0) * i1)
}

impl Table {
    pub fn validate(&self) -> Result<()> {
        require(self.s.len() >= 2 && self.s.len() == self.density.len(), || {
            format!("table needs >= 2 matching samples, got {} and {}", self.s.len(), self.density.len())
        })?;
        require(self.s.windows(2).all(|w| w[1] > w[0]) && self.s.iter().all(|v| v.is_finite()), || {
            "table abscissae must be finite and strictly increasing".into()
        })?;
        require(self.density.iter().all(|&d| d >= 0.0 && d.is_finite()), || {
            "table density must be finite and nonnegative".into()
        })?;
        require(self.mass() > 0.0, || "table has zero mass".into())
    }

    pub fn mass(&self) -> f64 {
        self.cells().map(|(a, b, da, db)| 0.5 * (da + db) * (b - a)).sum()
    }

    pub fn normalized(&self) -> Table {
        let m = self.mass();
        Table { s: self.s.clone(), density: self.density.iter().map(|d| d / m).collect() }
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.s.windows(2).zip(self.density.windows(2)).map(|(s, d)| (s[0], s[1], d[0], d[1]))
    }

    pub fn density_at(&self, s: f64) -> f64 {
        let n = self.s.len();
        if s < self.s[0] || s > self.s[n - 1] {
            return 0.0;
        }
        let i = self.s.partition_point(|&x| x <= s).clamp(1, n - 1);
        let (a, b) = (self.s[i - 1], self.s[i]);
        let w = (s - a) / (b - a);
        self.density[i - 1] * (1.0 - w) + self.density[i] * w
    }

    pub fn mean(&self) -> f64 {
        // exact for linear density on each cell
        self.cells()
            .map(|(a, b, da, db)| {
                let d = b - a;
                d * (da * (a / 2.0 + d / 6.0) + db * (a / 2.0 + d / 3.0))
            })
            .sum::<f64>()
            / self.mass()
    }

    /// `\int_lo^hi e^{-lambda s} N(s) ds`.
    pub fn laplace_on(&self, lambda: f64, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, _, _) in self.cells() {
            let (a2, b2) = (a.max(lo), b.min(hi));
            if b2 <= a2 {
                continue;
            }
            let (d0, d1) = (self.density_at(a2), self.density_at(b2));
            acc += (-lambda * a2).exp() * exp_linear_cell(lambda, b2 - a2, d0, d1);
        }
        acc
    }

    pub fn laplace(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 1.0;
        }
        self.laplace_on(lambda, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }
}

/// Space-time kernel `K(s, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    /// `K = K1(y) delta(s)`; `K1 = delta` when absent.
    DiracSpatial {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k1: Option<Table>,
    },
    /// `K = delta(s - tau) delta(y)`
    DiscreteDelay { tau: f64 },
    /// Heat kernel in `y` weighted by the exponential delay density `e^{-s/tau}/tau`.
    WeakGeneric { tau: f64 },
    /// `N_c` sampled directly.
    TabulatedN {
        #[serde(flatten)]
        table: Table,
    },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::DiracSpatial { k1: Some(t) } | Kernel::TabulatedN { table: t } => t.validate(),
            Kernel::DiracSpatial { k1: None } => Ok(()),
            Kernel::DiscreteDelay { tau } | Kernel::WeakGeneric { tau } => {
                require(*tau > 0.0 && tau.is_finite(), || format!("kernel delay must be positive, got {tau}"))
            }
        }
    }

    /// Mean delay `tau`, when the kernel has one.
    pub fn tau(&self) -> Option<f64> {
        match *self {
            Kernel::DiscreteDelay { tau } | Kernel::WeakGeneric { tau } => Some(tau),
            _ => None,
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, Kernel::DiracSpatial { k1: None })
    }
}

/// `N_c`, either a point mass or a tabulated density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EffectiveKernel {
    PointMass { at: f64 },
    Density(Table),
}

impl EffectiveKernel {
    pub fn mass(&self) -> f64 {
        match self {
            EffectiveKernel::PointMass { .. } => 1.0,
            EffectiveKernel::Density(t) => t.mass(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            EffectiveKernel::PointMass { at } => *at,
            EffectiveKernel::Density(t) => t.mean(),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            EffectiveKernel::PointMass { at } => (*at, *at),
            EffectiveKernel::Density(t) => t.support(),
        }
    }

    /// `\int_lo^hi e^{-lambda s} N_c(s) ds`; a point mass on the boundary counts.
    pub fn laplace_on(&self, lambda: f64, lo: f64, hi: f64) -> f64 {
        match self {
            EffectiveKernel::PointMass { at } => {
                if *at >= lo && *at <= hi {
                    (-lambda * at).exp()
                } else {
                    0.0
                }
            }
            EffectiveKernel::Density(t) => t.laplace_on(lambda, lo, hi),
        }
    }

    pub fn laplace(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 1.0;
        }
        self.laplace_on(lambda, f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Mass fraction below which the tabulated weak-generic tails are dropped.
const TAIL_MASS: f64 = 1e-8;

/// `N_c(s) = \int_0^inf K(v, s - c v) dv` for the weak-generic kernel, by quadrature
/// in `w = sqrt(v)` so the `v^{-1/2}` heat-kernel factor disappears.
fn weak_generic_projection(tau: f64, c: f64, s: f64) -> Result<f64> {
    let pref = 1.0 / (tau * std::f64::consts::PI.sqrt());
    let f = |w: f64| {
        if w == 0.0 {
            return if s == 0.0 { pref } else { 0.0 };
        }
        let y = s - c * w * w;
        pref * (-(y * y) / (4.0 * w * w) - w * w / tau).exp()
    };
    let scale = (0.25 * tau.sqrt()).min((s.abs() / c.max(1e-3)).sqrt().max(1e-3));
    quad_ladder(&f, 0.0, true, scale, 1e-11).map(|v| v.max(0.0))
}

fn tabulate_weak_generic(tau: f64, c: f64) -> Result<Table> {
    let eval = |s: f64| weak_generic_projection(tau, c, s);
    let n0 = eval(0.0)?;
    // march outward with geometrically growing steps until the remaining tail is negligible
    let extent = |dir: f64| -> Result<Vec<(f64, f64)>> {
        let mut pts = Vec::new();
        let mut s = 0.0;
        let mut ds = 0.02 * tau.sqrt().min(1.0 / c.max(1e-3));
        let mut prev = n0;
        loop {
            s += dir * ds;
            let v = eval(s)?;
            pts.push((s, v));
            if v < prev && v > 0.0 {
                let slope = (prev / v).ln() / ds;
                if v / slope < TAIL_MASS * 1e-2 {
                    break;
                }
            } else if v == 0.0 {
                break;
            }
            if pts.len() > 20_000 {
                return Err(Error::Quadrature("weak-generic kernel tail does not decay".into()));
            }
            prev = v;
            ds *= 1.15;
        }
        Ok(pts)
    };
    let mut pts: Vec<(f64, f64)> = extent(-1.0)?.into_iter().rev().collect();
    pts.push((0.0, n0));
    pts.extend(extent(1.0)?);

    // refine cells whose linear interpolation misses the midpoint
    let peak = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut out = vec![pts[0]];
    let mut stack: Vec<((f64, f64), (f64, f64), usize)> = Vec::new();
    for w in pts.windows(2).rev() {
        stack.push((w[0], w[1], 0));
    }
    while let Some((a, b, depth)) = stack.pop() {
        let m = 0.5 * (a.0 + b.0);
        let vm = eval(m)?;
        let err = (vm - 0.5 * (a.1 + b.1)).abs();
        if depth < 30 && err > 2e-7 * peak.max(vm) && err * (b.0 - a.0) > 1e-12 {
            stack.push(((m, vm), b, depth + 1));
            stack.push((a, (m, vm), depth + 1));
        } else {
            out.push((m, vm));
            out.push(b);
        }
    }

    let mut table = Table { s: out.iter().map(|p| p.0).collect(), density: out.iter().map(|p| p.1).collect() };
    trim_tails(&mut table);
    table.validate()?;
    Ok(table.normalized())
}

/// Drop outer cells carrying less than `TAIL_MASS / 2` mass on each side.
fn trim_tails(t: &mut Table) {
    let total = t.mass();
    let cell = |t: &Table, i: usize| 0.5 * (t.density[i] + t.density[i + 1]) * (t.s[i + 1] - t.s[i]);
    let n = t.s.len();
    let (mut lo, mut acc) = (0, 0.0);
    while lo + 2 < n && acc + cell(t, lo) < 0.5 * TAIL_MASS * total {
        acc += cell(t, lo);
        lo += 1;
    }
    let (mut hi, mut acc) = (n - 1, 0.0);
    while hi > lo + 1 && acc + cell(t, hi - 1) < 0.5 * TAIL_MASS * total {
        acc += cell(t, hi - 1);
        hi -= 1;
    }
    t.s = t.s[lo..=hi].to_vec();
    t.density = t.density[lo..=hi].to_vec();
}

/// Tabulate `N_c` for `kernel` at speed `c`, normalized to mass 1.
pub fn effective_kernel(kernel: &Kernel, c: f64) -> Result<EffectiveKernel> {
    kernel.validate()?;
    Ok(match kernel {
        Kernel::DiracSpatial { k1: None } => EffectiveKernel::PointMass { at: 0.0 },
        Kernel::DiracSpatial { k1: Some(t) } | Kernel::TabulatedN { table: t } => EffectiveKernel::Density(t.normalized()),
        Kernel::DiscreteDelay { tau } => EffectiveKernel::PointMass { at: c * tau },
        Kernel::WeakGeneric { tau } => {
            require(c > 0.0, || format!("weak-generic projection needs c > 0, got {c}"))?;
            EffectiveKernel::Density(tabulate_weak_generic(*tau, c)?)
        }
    })
}

/// `\int\int K(s, y) e^{-lambda (c s + y)} ds dy`, `+inf` past the finiteness abscissa.
pub fn moment_transform(kernel: &Kernel, c: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    match kernel {
        Kernel::DiracSpatial { k1: None } => 1.0,
        Kernel::DiscreteDelay { tau } => (-lambda * c * tau).exp(),
        Kernel::WeakGeneric { tau } => {
            let d = 1.0 + tau * c * lambda - tau * lambda * lambda;
            if d > 0.0 {
                1.0 / d
            } else {
                f64::INFINITY
            }
        }
        Kernel::DiracSpatial { k1: Some(t) } | Kernel::TabulatedN { table: t } => t.normalized().laplace(lambda),
    }
}

/// Finiteness interval `(lambda_0, lambda_1)` of the moment transform.
pub fn moment_abscissae(kernel: &Kernel, c: f64) -> (f64, f64) {
    match kernel {
        Kernel::WeakGeneric { tau } => {
            // 1 + tau c lambda - tau lambda^2 > 0
            let d = (c * c + 4.0 / tau).sqrt();
            (0.5 * (c - d), 0.5 * (c + d))
        }
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{quad_adaptive, Domain};
    use proptest::prelude::*;

    /// Independent oracle: integrating the Gaussian in `y` and the exponential in `v`
    /// gives `exp(c s / 2 - |s| sqrt(B)) / (2 tau sqrt(B))`, `B = c^2/4 + 1/tau`.
    fn closed_form(tau: f64, c: f64, s: f64) -> f64 {
        let rb = (0.25 * c * c + 1.0 / tau).sqrt();
        (0.5 * c * s - s.abs() * rb).exp() / (2.0 * tau * rb)
    }

    fn heat_delay(tau: f64, v: f64, y: f64) -> f64 {
        (-y * y / (4.0 * v)).exp() / (4.0 * std::f64::consts::PI * v).sqrt() * (-v / tau).exp() / tau
    }

    #[test]
    fn projection_matches_closed_form() {
        for &(tau, c) in &[(1.0, 2.0), (10.0, 0.5), (0.3, 5.0)] {
            for &s in &[-3.0, -0.5, 0.0, 0.01, 1.0, 4.0, 12.0] {
                let q = weak_generic_projection(tau, c, s).unwrap();
                let e = closed_form(tau, c, s);
                assert!((q - e).abs() < 1e-9 * (1.0 + e), "tau {tau} c {c} s {s}: {q} vs {e}");
            }
        }
    }

    #[test]
    fn weak_generic_table_mass_and_mean() {
        let EffectiveKernel::Density(t) = effective_kernel(&Kernel::WeakGeneric { tau: 1.0 }, 2.0).unwrap() else {
            panic!("expected a density")
        };
        assert!((t.mass() - 1.0).abs() < 1e-12);
        assert!(t.density.iter().all(|&d| d >= 0.0));
        // unnormalised mass of the raw samples against the closed form
        let raw: f64 = t
            .s
            .windows(2)
            .map(|w| 0.5 * (closed_form(1.0, 2.0, w[0]) + closed_form(1.0, 2.0, w[1])) * (w[1] - w[0]))
            .sum();
        assert!((raw - 1.0).abs() < 1e-6, "raw mass {raw}");
        // mean against direct 2-D quadrature of (c v + y) K(v, y)
        let mean2d = quad_adaptive(
            |v| {
                if v == 0.0 {
                    return 0.0;
                }
                let inner = quad_adaptive(|y| (2.0 * v + y) * heat_delay(1.0, v, y), Domain::Whole, 1e-11).unwrap();
                inner
            },
            Domain::From(0.0),
            1e-9,
        )
        .unwrap();
        assert!((mean2d - 2.0).abs() < 1e-6);
        assert!((t.mean() - mean2d).abs() < 1e-3, "table mean {}", t.mean());
        // unimodal
        let peak = t.density.iter().cloned().enumerate().fold((0, 0.0), |b, (i, d)| if d > b.1 { (i, d) } else { b }).0;
        assert!(t.density[..=peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(t.density[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn point_masses() {
        assert_eq!(
            effective_kernel(&Kernel::DiscreteDelay { tau: 3.0 }, 2.0).unwrap(),
            EffectiveKernel::PointMass { at: 6.0 }
        );
        assert_eq!(
            effective_kernel(&Kernel::DiracSpatial { k1: None }, 2.0).unwrap(),
            EffectiveKernel::PointMass { at: 0.0 }
        );
        assert!(effective_kernel(&Kernel::WeakGeneric { tau: 1.0 }, 0.0).is_err());
    }

    #[test]
    fn transform_of_weak_generic_matches_double_integral() {
        let (tau, c, l) = (1.0, 2.0, -0.1);
        let f = moment_transform(&Kernel::WeakGeneric { tau }, c, l);
        let q = quad_adaptive(
            |v| {
                if v == 0.0 {
                    return 0.0;
                }
                quad_adaptive(|y| (-l * (c * v + y)).exp() * heat_delay(tau, v, y), Domain::Whole, 1e-12).unwrap()
            },
            Domain::From(0.0),
            1e-11,
        )
        .unwrap();
        assert!(f > 1.0);
        assert!((f - q).abs() < 1e-8 * f, "{f} vs {q}");
        // the tabulated N_c carries the same transform
        let n = effective_kernel(&Kernel::WeakGeneric { tau }, c).unwrap();
        assert!((n.laplace(l) - f).abs() < 1e-4);
    }

    #[test]
    fn transform_at_zero_and_divergence() {
        for k in [
            Kernel::DiracSpatial { k1: None },
            Kernel::DiscreteDelay { tau: 2.0 },
            Kernel::WeakGeneric { tau: 2.0 },
            Kernel::TabulatedN { table: Table { s: vec![0.0, 1.0, 3.0], density: vec![0.0, 2.0, 0.0] } },
        ] {
            assert_eq!(moment_transform(&k, 1.5, 0.0), 1.0);
        }
        assert!((moment_transform(&Kernel::DiscreteDelay { tau: 2.0 }, 1.5, 0.3) - (-0.9f64).exp()).abs() < 1e-15);
        let (l0, l1) = moment_abscissae(&Kernel::WeakGeneric { tau: 1.0 }, 2.0);
        assert!(moment_transform(&Kernel::WeakGeneric { tau: 1.0 }, 2.0, l0 - 1e-9).is_infinite());
        assert!(moment_transform(&Kernel::WeakGeneric { tau: 1.0 }, 2.0, l1 + 1e-9).is_infinite());
    }

    #[test]
    fn table_laplace_is_exact_for_hat() {
        let t = Table { s: vec![0.0, 1.0, 2.0], density: vec![0.0, 1.0, 0.0] };
        for &l in &[-2.0, -1e-4, 0.5, 3.0] {
            let q = quad_adaptive(|s| (-l * s).exp() * t.density_at(s), Domain::Finite(0.0, 1.0), 1e-14).unwrap()
                + quad_adaptive(|s| (-l * s).exp() * t.density_at(s), Domain::Finite(1.0, 2.0), 1e-14).unwrap();
            assert!((t.laplace(l) - q).abs() < 1e-12 * q, "lambda {l}");
        }
        assert!((t.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let k: Kernel = serde_json::from_str(r#"{"kind":"tabulated-n","s":[0,1],"density":[1,1]}"#).unwrap();
        assert!(matches!(k, Kernel::TabulatedN { .. }));
        let back: Kernel = serde_json::from_str(&serde_json::to_string(&k).unwrap()).unwrap();
        assert_eq!(back, k);
        let d: Kernel = serde_json::from_str(r#"{"kind":"dirac-spatial"}"#).unwrap();
        assert_eq!(d, Kernel::DiracSpatial { k1: None });
    }

    proptest! {
        #[test]
        fn transform_is_log_convex(tau in 0.1f64..20.0, c in 0.1f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0, w in 0.05f64..0.95) {
            for k in [Kernel::WeakGeneric { tau }, Kernel::DiscreteDelay { tau }] {
                let (l0, l1) = moment_abscissae(&k, c);
                let (lo, hi) = (l0.max(-3.0), l1.min(3.0));
                let x = lo + (hi - lo) * a.min(b) * 0.999;
                let y = lo + (hi - lo) * a.max(b) * 0.999 + 1e-6;
                let m = w * x + (1.0 - w) * y;
                let lf = |l: f64| moment_transform(&k, c, l).ln();
                prop_assert!(lf(m) <= w * lf(x) + (1.0 - w) * lf(y) + 1e-10 * (1.0 + lf(x).abs() + lf(y).abs()));
            }
        }
    }
}
