//! Sampled wave profiles: level-1 crossings, shape class, tail exponents and
//! the CSV/JSON output format.

use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::numerics::{find_root, Grid};

/// Overshoot above 1 that counts as genuine.
pub const OVERSHOOT: f64 = 1e-6;
/// Upper end of the linear regime used by the tail fits.
const FIT_CAP: f64 = 1e-2;
/// Decades a tail must span before an exponent is fitted.
const FIT_DECADES: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeClass {
    Monotone,
    NonMonotoneNonOscillating,
    Oscillating,
}

impl ShapeClass {
    pub fn from_crossings(n_crossings: usize, sup: f64) -> Self {
        if n_crossings >= 2 {
            ShapeClass::Oscillating
        } else if sup > 1.0 + OVERSHOOT {
            ShapeClass::NonMonotoneNonOscillating
        } else {
            ShapeClass::Monotone
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub shape: ShapeClass,
    pub sup: f64,
    /// Growth rate of `ln phi` at the left end.
    pub decay_minus: Option<f64>,
    /// Slope of `ln |phi - 1|` at the right end (negative).
    pub decay_plus: Option<f64>,
    /// Times `Q_j` with `phi(Q_j) = 1`.
    pub crossings: Vec<f64>,
    /// `h = c tau` when a finite speed and delay are attached.
    pub h: Option<f64>,
    /// The right end never settled within the fit window around 1.
    pub unresolved_tail: bool,
}

/// `ln d` against `t`, least squares.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1.ln() / n));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, d) in pts {
        sxy += (t - mt) * (d.ln() - my);
        sxx += (t - mt) * (t - mt);
    }
    sxy / sxx
}

/// Fit over the outermost run of samples (listed from the end inward) where the
/// distance `d` rises monotonically from above `floor` to at most `FIT_CAP`.
fn fit_tail(pts: impl Iterator<Item = (f64, f64)>, floor: f64) -> Option<f64> {
    let mut run: Vec<(f64, f64)> = Vec::new();
    for (t, d) in pts {
        if d <= floor {
            if run.is_empty() {
                continue;
            }
            break;
        }
        if d > FIT_CAP {
            break;
        }
        if let Some(&(_, last)) = run.last() {
            if d <= last {
                // not monotone; restart from here
                run.clear();
            }
        }
        run.push((t, d));
    }
    let (lo, hi) = (run.first()?.1, run.last()?.1);
    if run.len() < 4 || (hi / lo).log10() < FIT_DECADES {
        return None;
    }
    Some(slope(&run))
}

impl Profile {
    /// Build a profile from samples; `floor` is the noise level below which
    /// `|phi - 1|` carries no sign information.
    pub fn from_samples(grid: Grid, values: Vec<f64>, h: Option<f64>, floor: f64) -> Result<Profile> {
        require(values.len() == grid.n, || format!("{} samples for a {}-node grid", values.len(), grid.n))?;
        require(values.iter().all(|v| v.is_finite()), || "non-finite profile sample".into())?;
        let sup = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p = Profile {
            grid,
            values,
            shape: ShapeClass::Monotone,
            sup,
            decay_minus: None,
            decay_plus: None,
            crossings: Vec::new(),
            h,
            unresolved_tail: false,
        };
        p.crossings = p.level_crossings(1.0, floor);
        p.shape = ShapeClass::from_crossings(p.crossings.len(), sup);
        let ts: Vec<f64> = p.grid.nodes().collect();
        p.decay_minus = fit_tail(ts.iter().cloned().zip(p.values.iter().cloned()), floor);
        p.decay_plus = fit_tail(ts.iter().rev().cloned().zip(p.values.iter().rev().map(|v| (v - 1.0).abs())), floor);
        p.unresolved_tail = (p.values[p.values.len() - 1] - 1.0).abs() > FIT_CAP;
        Ok(p)
    }

    pub fn t_start(&self) -> f64 {
        self.grid.t0
    }

    pub fn t_end(&self) -> f64 {
        self.grid.t_end()
    }

    pub fn eventually_monotone(&self) -> bool {
        !self.unresolved_tail && self.decay_plus.is_some()
    }

    /// Four-point Lagrange interpolation, clamped to the end values outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = (t - self.grid.t0) / self.grid.dt;
        if x <= 0.0 {
            return self.values[0];
        }
        if x >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        if n < 4 {
            let i = (x.floor() as usize).min(n - 2);
            let w = x - i as f64;
            return self.values[i] * (1.0 - w) + self.values[i + 1] * w;
        }
        let i = (x.floor() as usize).clamp(1, n - 3) - 1;
        let u = x - i as f64;
        let v = &self.values[i..i + 4];
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        v[0] * l0 + v[1] * l1 + v[2] * l2 + v[3] * l3
    }

    /// Times where the profile crosses `level`, ignoring excursions smaller than `floor`.
    pub fn level_crossings(&self, level: f64, floor: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut state = 0.0f64;
        let mut last_sign_idx = 0usize;
        for (i, &v) in self.values.iter().enumerate() {
            let d = v - level;
            if d.abs() <= floor {
                continue;
            }
            let s = d.signum();
            if state != 0.0 && s != state {
                // the sign change sits between the last confident sample and this one
                let mut j = i - 1;
                while j > last_sign_idx && (self.values[j] - level).signum() != state {
                    j -= 1;
                }
                let (a, b) = (self.grid.node(j), self.grid.node(j + 1));
                let f = |t: f64| self.value_at(t) - level;
                let t = find_root(f, a, b, 1e-12).unwrap_or_else(|_| {
                    let (fa, fb) = (self.values[j] - level, self.values[j + 1] - level);
                    a + (b - a) * fa / (fa - fb)
                });
                out.push(t);
            }
            state = s;
            last_sign_idx = i;
        }
        out
    }

    /// First upward crossing of `level`.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        let i = self.values.windows(2).position(|w| w[0] < level && w[1] >= level)?;
        let (a, b) = (self.grid.node(i), self.grid.node(i + 1));
        find_root(|t| self.value_at(t) - level, a, b, 1e-12).ok()
    }

    /// Shift time so that `t` becomes 0.
    pub fn shifted(&self, t: f64) -> Profile {
        let mut p = self.clone();
        p.grid = self.grid.shifted(-t);
        p.crossings.iter_mut().for_each(|q| *q -= t);
        p
    }

    /// Shift so the first upward crossing of 1/2 sits at `t = 0`.
    pub fn pinned(&self) -> Profile {
        match self.first_crossing(0.5) {
            Some(t) => self.shifted(t),
            None => self.clone(),
        }
    }

    /// `sup |self - other|` over the common time range, sampled on `self`'s nodes.
    pub fn sup_distance(&self, other: &Profile) -> f64 {
        let (a, b) = (self.t_start().max(other.t_start()), self.t_end().min(other.t_end()));
        self.grid
            .nodes()
            .zip(&self.values)
            .filter(|(t, _)| *t >= a && *t <= b)
            .map(|(t, v)| (v - other.value_at(t)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,phi\n");
        for (t, v) in self.grid.nodes().zip(&self.values) {
            s.push_str(&format!("{t:.16e},{v:.16e}\n"));
        }
        s
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "shape": self.shape,
            "sup": self.sup,
            "decay_minus": self.decay_minus,
            "decay_plus": self.decay_plus,
            "crossings": self.crossings,
            "h": self.h,
            "unresolved_tail": self.unresolved_tail,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(f: impl Fn(f64) -> f64, a: f64, b: f64, dt: f64) -> Profile {
        let g = Grid::spanning(a, b, dt).unwrap();
        let v = g.nodes().map(&f).collect();
        Profile::from_samples(g, v, None, 1e-12).unwrap()
    }

    #[test]
    fn logistic_front() {
        // 1/(1 + e^{-t}): decay rate 1 on both sides
        let p = sampled(|t| 1.0 / (1.0 + (-t).exp()), -30.0, 30.0, 0.05);
        assert_eq!(p.shape, ShapeClass::Monotone);
        assert!(p.crossings.is_empty());
        assert!((p.decay_minus.unwrap() - 1.0).abs() < 1e-2);
        assert!((p.decay_plus.unwrap() + 1.0).abs() < 1e-2);
        assert!(p.pinned().value_at(0.0) - 0.5 < 1e-12);
    }

    #[test]
    fn damped_sine_crossings() {
        let p = sampled(|t| 1.0 + (-0.1 * t).exp() * t.sin(), 0.5, 40.0, 0.01);
        assert_eq!(p.shape, ShapeClass::Oscillating);
        for (k, q) in p.crossings.iter().enumerate() {
            assert!((q - std::f64::consts::PI * (k + 1) as f64).abs() < 1e-8, "{q}");
        }
        assert!(p.decay_plus.is_none());
    }

    #[test]
    fn overshoot_then_monotone() {
        let p = sampled(|t| 1.0 + (-t).exp() - 2.0 * (-2.0 * t).exp(), 0.0, 40.0, 0.02);
        assert_eq!(p.shape, ShapeClass::NonMonotoneNonOscillating);
        assert_eq!(p.crossings.len(), 1);
        assert!((p.crossings[0] - 2f64.ln()).abs() < 1e-6);
        assert!((p.decay_plus.unwrap() + 1.0).abs() < 1e-2);
    }

    #[test]
    fn interpolation_is_fourth_order() {
        let p = sampled(f64::sin, 0.0, 10.0, 0.05);
        let err = (0..997).map(|k| 0.01 * k as f64 + 0.003).map(|t| (p.value_at(t) - t.sin()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn csv_is_full_precision() {
        let p = sampled(|t| t, 0.0, 1.0, 0.5);
        assert_eq!(p.to_csv().lines().nth(2).unwrap(), "5.0000000000000000e-1,5.0000000000000000e-1");
    }
}
