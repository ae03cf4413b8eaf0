//! Food-limited model with a discrete delay: the limit profile equation
//! `phi' = phi G(phi(t - tau))`, its finite-speed version
//! `eps phi'' - phi' + phi G(phi(t - tau)) = 0`, the overshoot bound `zeta`
//! and the slow-oscillation classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::numerics::slaved::SlavedSystem;
use crate::numerics::{integrate_dde, maximize_scalar, Control, DdeProblem, EventKind, EventSpec, Grid, OdeOptions};
use crate::profile::{Profile, ShapeClass};

/// Launch amplitude of the history segment.
pub const LAUNCH: f64 = 1e-6;
/// Default integration span of the profile equations.
pub const DEFAULT_SPAN: f64 = 400.0;
const SAMPLE_DT: f64 = 0.05;
const LIMIT_CAPTURE: f64 = 1e-8;
const FINITE_CAPTURE: f64 = 1e-7;

fn food(gamma: f64) -> impl Fn(f64) -> f64 + Copy {
    move |u| (1.0 - u) / (1.0 + gamma * u)
}

/// Growth rate of the profile at `-inf` for speed `c = eps^{-1/2}`; `eps = 0` gives 1.
pub fn launch_rate(eps: f64) -> f64 {
    if eps == 0.0 {
        1.0
    } else {
        // 2/(1 + sqrt(1 - 4 eps)) avoids cancellation as eps -> 0
        2.0 / (1.0 + (1.0 - 4.0 * eps).sqrt())
    }
}

fn check_params(gamma: f64, tau: f64, span: f64, tol: f64) -> Result<()> {
    require(gamma >= 0.0 && gamma.is_finite(), || format!("gamma must be >= 0, got {gamma}"))?;
    require(tau > 0.0 && tau.is_finite(), || format!("tau must be > 0, got {tau}"))?;
    require(span > 2.0 * tau, || format!("span {span} must exceed two delays"))?;
    require(tol > 0.0, || "tolerance must be positive".into())
}

/// Profile of `phi' = phi G(phi(t - tau))` from `0` to `1`, pinned at `phi(0) = 1/2`.
///
/// Integrated in `ln phi` from the history `1e-6 e^t`. The tail is flagged
/// unresolved when `phi` has not settled within `1e-8` of 1 for a full delay.
pub fn limit_profile(gamma: f64, tau: f64, span: f64, tol: f64) -> Result<Profile> {
    check_params(gamma, tau, span, tol)?;
    let g = food(gamma);
    let l0 = LAUNCH.ln();
    let field = move |_: f64, _: &[f64], lag: &[f64], dy: &mut [f64]| dy[0] = g(lag[0].exp());
    let history = move |t: f64, out: &mut [f64]| out[0] = l0 + t;
    let problem = DdeProblem { tau, field: &field, history: &history, dim: 1 };
    let opts = OdeOptions::with_tol(tol).atol(tol * 1e-3).h_max(0.25 * tau.min(1.0));
    let mut settled_since: Option<f64> = None;
    let mut captured = false;
    let mut stop = |t: f64, y: &[f64]| {
        if !(y[0] < 10.0) {
            return Control::Abort;
        }
        if y[0].exp_m1().abs() < LIMIT_CAPTURE {
            let s = *settled_since.get_or_insert(t);
            if t - s >= tau {
                captured = true;
                return Control::Stop;
            }
        } else {
            settled_since = None;
        }
        Control::Continue
    };
    let events = [EventSpec::critical(0)];
    let sol = integrate_dde(&problem, (0.0, span), &opts, &events, Some(&mut stop))?;
    let tr = &sol.trajectory;

    let mut phi_max = (0..tr.len()).map(|i| tr.state(i)[0]).fold(f64::NEG_INFINITY, f64::max);
    for e in sol.events.iter().filter(|e| e.kind == EventKind::DerivativeSignChange) {
        phi_max = phi_max.max(tr.eval_component(e.time, 0));
    }
    let grid = Grid::spanning(tr.t_start(), tr.t_end(), SAMPLE_DT)?;
    let values: Vec<f64> = grid.nodes().map(|t| tr.eval_component(t, 0).exp()).collect();
    let mut p = Profile::from_samples(grid, values, None, 0.1 * LIMIT_CAPTURE)?;
    p.sup = p.sup.max(phi_max.exp());
    p.shape = ShapeClass::from_crossings(p.crossings.len(), p.sup);
    p.unresolved_tail |= !captured;
    Ok(p.pinned())
}

/// Profile of `eps phi'' - phi' + phi G(phi(t - tau)) = 0`, pinned at `phi(0) = 1/2`.
///
/// `ln phi` is slow and `w = (ln phi)'` is slaved to its bounded forward solution.
/// `h` of the result is `tau`, the delay in the profile's own time unit.
pub fn finite_speed_profile(gamma: f64, tau: f64, eps: f64, span: f64, tol: f64) -> Result<Profile> {
    check_params(gamma, tau, span, tol)?;
    require(eps >= 0.0 && eps <= 0.25, || format!("eps must lie in [0, 1/4] (c >= 2), got {eps}"))?;
    if eps == 0.0 {
        let mut p = limit_profile(gamma, tau, span, tol)?;
        p.h = Some(tau);
        return Ok(p);
    }
    let g = food(gamma);
    let lambda = launch_rate(eps);
    let l0 = LAUNCH.ln();
    let m = (tau / (0.25 * eps).min(0.01)).ceil() as usize;
    let h = tau / m as f64;
    let history = move |t: f64, out: &mut [f64]| out[0] = l0 + lambda * t;
    let source = move |_: &[f64], f: &[f64], lag: &[f64], q: &mut [f64]| q[0] = g(lag[0].exp()) + eps * f[0] * f[0];
    let slow_rhs = |_: &[f64], f: &[f64], out: &mut [f64]| out[0] = f[0];
    let sys = SlavedSystem {
        h,
        ns: 1,
        rates: vec![1.0 / eps],
        lag_nodes: m,
        history: &history,
        source: &source,
        slow_rhs: &slow_rhs,
        tol: tol.max(1e-14),
    };
    let mut settled = 0usize;
    let mut captured = false;
    let mut escaped = false;
    let run = sys.march(0.0, (span / h).ceil() as usize, |_, s| {
        if !(s[0] < 10.0) {
            escaped = true;
            return false;
        }
        if s[0].exp_m1().abs() < FINITE_CAPTURE {
            settled += 1;
            if settled > m {
                captured = true;
                return false;
            }
        } else {
            settled = 0;
        }
        true
    })?;
    if escaped {
        return Err(Error::StiffShooting(format!("profile left the box near t = {}", run.time(run.len() - 1))));
    }
    let stride = ((SAMPLE_DT / h).round() as usize).max(1);
    let idx: Vec<usize> = (0..run.len()).step_by(stride).collect();
    let grid = Grid::new(0.0, h * stride as f64, idx.len())?;
    let values: Vec<f64> = idx.iter().map(|&k| run.slow_at(k)[0].exp()).collect();
    let sup = (0..run.len()).map(|k| run.slow_at(k)[0]).fold(f64::NEG_INFINITY, f64::max).exp();
    let mut p = Profile::from_samples(grid, values, Some(tau), 0.1 * FINITE_CAPTURE)?;
    p.sup = p.sup.max(sup);
    p.shape = ShapeClass::from_crossings(p.crossings.len(), p.sup);
    p.unresolved_tail |= !captured;
    Ok(p.pinned())
}

/// The maximand of [`zeta`] at `a`.
pub fn zeta_maximand(gamma: f64, tau: f64, a: f64) -> f64 {
    let ga = gamma * a;
    a * (tau + (1.0 - a) * tau / (1.0 + ga)).exp() * ((1.0 + ga) / (1.0 + ga * tau.exp())).powf(1.0 + 1.0 / gamma)
}

/// Lower bound for the sup of the limit profile; values above 1 force an overshoot.
pub fn zeta(gamma: f64, tau: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Err(Error::Unsupported("zeta at gamma = 0".into()));
    }
    require(gamma > 0.0 && gamma.is_finite(), || format!("gamma must be > 0, got {gamma}"))?;
    require(tau >= 0.0 && tau.is_finite(), || format!("tau must be >= 0, got {tau}"))?;
    let f = |a: f64| zeta_maximand(gamma, tau, a);
    let (_, m) = maximize_scalar(f, 0.0, 1.0, 1e-12);
    // the peak moves towards a ~ e^{-tau}, below the resolution of a uniform scan
    let (_, m_log) = maximize_scalar(|x: f64| f(x.exp()), -(tau + 40.0), 0.0, 1e-12);
    Ok(m.max(m_log).max(f(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub gamma: f64,
    /// Smallest delay with `zeta > 1`; absent when the window below `tau_upper` is empty.
    pub tau_zeta: Option<f64>,
    /// `(1 + gamma)/e`.
    pub tau_upper: f64,
}

const ZETA_SCAN: usize = 400;

fn zeta_boundary(gamma: f64, tol: f64) -> Result<ZetaRow> {
    let upper = (1.0 + gamma) / std::f64::consts::E;
    let above = |t: f64| zeta(gamma, t).map(|z| z > 1.0);
    let mut prev = 0.0;
    let mut first = None;
    for k in 1..=ZETA_SCAN {
        let t = upper * k as f64 / ZETA_SCAN as f64;
        if above(t)? {
            first = Some((prev, t));
            break;
        }
        prev = t;
    }
    let tau_zeta = match first {
        None => None,
        Some((mut lo, mut hi)) => {
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if above(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
    };
    Ok(ZetaRow { gamma, tau_zeta, tau_upper: upper })
}

/// Lower boundary of the `zeta > 1` window for each `gamma`, sorted by `gamma`.
pub fn zeta_region(gammas: &[f64], tol: f64) -> Result<Vec<ZetaRow>> {
    require(gammas.iter().all(|g| *g > 0.0), || "gamma grid must be positive".into())?;
    require(tol > 0.0, || "tolerance must be positive".into())?;
    let mut rows = gammas.par_iter().map(|&g| zeta_boundary(g, tol)).collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    Ok(rows)
}

pub fn zeta_region_csv(rows: &[ZetaRow]) -> String {
    let mut s = String::from("gamma,tau_zeta,tau_upper\n");
    for r in rows {
        let z = r.tau_zeta.map(|v| format!("{v:.16e}")).unwrap_or_default();
        s.push_str(&format!("{:.16e},{},{:.16e}\n", r.gamma, z, r.tau_upper));
    }
    s
}

/// Envelope margins of the limit profile on `[-tau, tau]` once it is shifted
/// so that `phi(-tau) = a`. Lower margins are `phi - env`, upper ones `env - phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub a: f64,
    pub times: Vec<f64>,
    pub lower_margin: Vec<f64>,
    /// Only on `[-tau, 0]`; `None` on `(0, tau]`.
    pub upper_margin: Vec<Option<f64>>,
    pub min_margin: f64,
    /// Lower envelope at `t = tau`, equal to the `zeta` maximand at `a`.
    pub envelope_at_tau: f64,
}

impl EnvelopeReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_margin >= -tol
    }
}

pub fn lower_envelope(gamma: f64, tau: f64, a: f64, t: f64) -> f64 {
    let ga = gamma * a;
    if t <= 0.0 {
        a * ((1.0 - a) * (t + tau) / (1.0 + ga)).exp()
    } else {
        let p = if gamma == 0.0 {
            // limit of the power as gamma -> 0
            (-a * t.exp_m1()).exp()
        } else {
            ((1.0 + ga) / (1.0 + ga * t.exp())).powf(1.0 + 1.0 / gamma)
        };
        a * t.exp() * p * ((1.0 - a) * tau / (1.0 + ga)).exp()
    }
}

pub fn upper_envelope(tau: f64, a: f64, t: f64) -> f64 {
    a * (t + tau).exp()
}

pub fn envelope_bounds(gamma: f64, tau: f64, a: f64, profile: &Profile) -> Result<EnvelopeReport> {
    require(a > 0.0 && a < 1.0, || format!("anchor a must lie in (0, 1), got {a}"))?;
    require(tau > 0.0, || format!("tau must be > 0, got {tau}"))?;
    let ta = profile
        .first_crossing(a)
        .ok_or_else(|| Error::Precondition(format!("profile never reaches {a}")))?;
    let k_end = ((ta - profile.t_start()) / profile.grid.dt).floor() as usize;
    let rising = profile.values[..=k_end.min(profile.values.len() - 1)].windows(2).all(|w| w[1] >= w[0]);
    require(rising, || format!("profile is not monotone before reaching {a}"))?;
    let p = profile.shifted(ta + tau);
    require(p.t_end() >= tau, || "profile ends before t = tau".into())?;

    let n = ((2.0 * tau) / SAMPLE_DT).ceil() as usize;
    let mut rep = EnvelopeReport {
        a,
        times: Vec::with_capacity(n + 1),
        lower_margin: Vec::with_capacity(n + 1),
        upper_margin: Vec::with_capacity(n + 1),
        min_margin: f64::INFINITY,
        envelope_at_tau: lower_envelope(gamma, tau, a, tau),
    };
    for k in 0..=n {
        let t = -tau + 2.0 * tau * k as f64 / n as f64;
        let u = p.value_at(t);
        let lo = u - lower_envelope(gamma, tau, a, t);
        let up = (t <= 0.0).then(|| upper_envelope(tau, a, t) - u);
        rep.min_margin = rep.min_margin.min(lo).min(up.unwrap_or(f64::INFINITY));
        rep.times.push(t);
        rep.lower_margin.push(lo);
        rep.upper_margin.push(up);
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub shape: ShapeClass,
    pub crossings: Vec<f64>,
    /// Interior critical points between consecutive crossings.
    pub critical_counts: Vec<usize>,
    /// Exactly one critical point between each pair of consecutive crossings.
    pub one_critical_point: bool,
    /// `Q_{j+2} - Q_j`, reported when the profile oscillates.
    pub gaps: Vec<f64>,
    /// Oscillating, one critical point per half-wave and every gap `>= h`.
    pub slowly_oscillating: bool,
    pub eventually_monotone: bool,
    /// The tail was not resolved; the fields describe the computed prefix only.
    pub inconclusive: bool,
}

fn critical_points_between(p: &Profile, a: f64, b: f64) -> usize {
    let i0 = ((a - p.t_start()) / p.grid.dt).ceil().max(0.0) as usize;
    let i1 = (((b - p.t_start()) / p.grid.dt).floor() as usize).min(p.values.len() - 1);
    if i1 <= i0 + 1 {
        return 0;
    }
    let mut count = 0;
    let mut last = 0.0f64;
    for w in p.values[i0..=i1].windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && d.signum() != last {
            count += 1;
        }
        last = d.signum();
    }
    count
}

pub fn classify_oscillation(profile: &Profile, h: f64) -> Result<OscillationReport> {
    require(h > 0.0, || format!("h must be positive, got {h}"))?;
    let q = profile.crossings.clone();
    let critical_counts: Vec<usize> = q.windows(2).map(|w| critical_points_between(profile, w[0], w[1])).collect();
    let one_critical_point = critical_counts.iter().all(|&c| c == 1);
    let gaps: Vec<f64> = q.windows(3).map(|w| w[2] - w[0]).collect();
    let shape = ShapeClass::from_crossings(q.len(), profile.sup);
    let slowly_oscillating =
        shape == ShapeClass::Oscillating && one_critical_point && gaps.iter().all(|&g| g >= h);
    Ok(OscillationReport {
        shape,
        crossings: q,
        critical_counts,
        one_critical_point,
        gaps,
        slowly_oscillating,
        eventually_monotone: profile.eventually_monotone(),
        inconclusive: profile.unresolved_tail,
    })
}
