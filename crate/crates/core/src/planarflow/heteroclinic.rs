use serde::{Deserialize, Serialize};

use super::flow::{eigen_directions, flow_field, lyapunov_matrix, PlanarFlow};
use crate::error::{require, Result};
use crate::numerics::{integrate_ode, Control, EventKind, EventSpec, Grid, OdeOptions, OdeSolution};
use crate::profile::{Profile, ShapeClass, OVERSHOOT};

/// Radius of the capture ball around `(1, 1)`.
pub const CAPTURE_RADIUS: f64 = 1e-6;
/// Sampling step of the returned profiles.
pub const SAMPLE_DT: f64 = 0.05;
const BOX: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicResult {
    pub profile: Profile,
    pub psi_profile: Profile,
    pub shape: ShapeClass,
    pub phi_max: f64,
    /// Unit velocity direction on the way into `(1, 1)`.
    pub entry_direction: [f64; 2],
    pub crossings_of_one: Vec<f64>,
    /// Capture inside the certified ball happened before the span ran out.
    pub captured: bool,
}

/// `2 x^T P f(1 + x) < 0` on the ellipse `x^T P x = x0^T P x0` through `x0`.
fn certified(flow: &PlanarFlow, x0: [f64; 2]) -> bool {
    let p = lyapunov_matrix(&flow.jacobian_positive());
    let q = |x: [f64; 2]| p[0][0] * x[0] * x[0] + 2.0 * p[0][1] * x[0] * x[1] + p[1][1] * x[1] * x[1];
    let level = q(x0);
    (0..64).all(|k| {
        let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
        let dir = [th.cos(), th.sin()];
        let x = {
            let s = (level / q(dir)).sqrt();
            [s * dir[0], s * dir[1]]
        };
        let f = flow.eval(1.0 + x[0], 1.0 + x[1]);
        let px = [p[0][0] * x[0] + p[0][1] * x[1], p[1][0] * x[0] + p[1][1] * x[1]];
        2.0 * (px[0] * f[0] + px[1] * f[1]) < 0.0
    })
}

fn span_for(tau: f64) -> f64 {
    2000.0 * (1.0 + tau)
}

/// Integrate the unstable manifold of the origin into `(1, 1)`.
pub(crate) fn shoot(flow: &PlanarFlow, amp: f64, tol: f64) -> Result<OdeSolution> {
    require(amp > 1e-10 && amp < 1e-3, || format!("start amplitude {amp} outside (1e-10, 1e-3)"))?;
    let dirs = eigen_directions(flow.gamma, flow.tau)?;
    let y0 = [amp * dirs.unstable_origin[0], amp * dirs.unstable_origin[1]];
    let events = [EventSpec::level(0, 1.0), EventSpec::critical(0)];
    let mut stop = |_: f64, y: &[f64]| {
        if !(y[0].abs() < BOX && y[1].abs() < BOX) {
            return Control::Abort;
        }
        let d = (y[0] - 1.0).hypot(y[1] - 1.0);
        if d < CAPTURE_RADIUS && certified(flow, [y[0] - 1.0, y[1] - 1.0]) {
            Control::Stop
        } else {
            Control::Continue
        }
    };
    let opts = OdeOptions::with_tol(tol).atol(tol * 1e-6 * amp).h_max(0.5 * (1.0 + flow.tau));
    let f = flow.field();
    integrate_ode(&f, &y0, (0.0, span_for(flow.tau)), &opts, &events, Some(&mut stop))
}

/// Largest `phi` along the heteroclinic, from the accepted steps and the critical events.
pub(crate) fn phi_max_of(sol: &OdeSolution) -> f64 {
    let tr = &sol.trajectory;
    let mut m = (0..tr.len()).map(|i| tr.state(i)[0]).fold(f64::NEG_INFINITY, f64::max);
    for e in sol.events.iter().filter(|e| e.kind == EventKind::DerivativeSignChange) {
        m = m.max(tr.eval_component(e.time, 0));
    }
    m
}

pub fn heteroclinic(gamma: f64, tau: f64, amp: f64, tol: f64) -> Result<HeteroclinicResult> {
    let flow = flow_field(gamma, tau)?;
    let sol = shoot(&flow, amp, tol)?;
    let tr = &sol.trajectory;
    let captured = sol.stopped_early;
    let phi_max = phi_max_of(&sol);
    let crossings: Vec<f64> =
        sol.events.iter().filter(|e| e.kind == EventKind::LevelCrossing).map(|e| e.time).collect();

    let (t0, t1) = (tr.t_start(), tr.t_end());
    let t95 = t0 + 0.95 * (t1 - t0);
    let (end, mid) = (tr.last_state(), tr.eval(t95));
    let chord = [end[0] - mid[0], end[1] - mid[1]];
    let len = chord[0].hypot(chord[1]);
    let entry_direction = if len > 0.0 { [chord[0] / len, chord[1] / len] } else { [0.0, 0.0] };

    let grid = Grid::spanning(t0, t1, SAMPLE_DT)?;
    let mut phi = Vec::with_capacity(grid.n);
    let mut psi = Vec::with_capacity(grid.n);
    for t in grid.nodes() {
        phi.push(tr.eval_component(t, 0));
        psi.push(tr.eval_component(t, 1));
    }
    let floor = 0.1 * CAPTURE_RADIUS;
    let mut profile = Profile::from_samples(grid, phi, None, floor)?;
    let mut psi_profile = Profile::from_samples(grid, psi, None, floor)?;
    // event-refined crossings supersede the sampled ones
    profile.crossings = crossings.clone();
    profile.sup = profile.sup.max(phi_max);
    let shape = ShapeClass::from_crossings(crossings.len(), phi_max);
    profile.shape = shape;
    profile.unresolved_tail |= !captured;
    psi_profile.unresolved_tail |= !captured;

    let shift = profile.first_crossing(0.5).unwrap_or(0.0);
    let profile = profile.shifted(shift);
    let psi_profile = psi_profile.shifted(shift);
    Ok(HeteroclinicResult {
        profile,
        psi_profile,
        shape,
        phi_max,
        entry_direction,
        crossings_of_one: crossings.iter().map(|t| t - shift).collect(),
        captured,
    })
}

/// Overshoot predicate used by [`tau_sharp`].
pub fn overshoots(gamma: f64, tau: f64) -> Result<bool> {
    let flow = flow_field(gamma, tau)?;
    let sol = shoot(&flow, 1e-6, 1e-10)?;
    Ok(phi_max_of(&sol) > 1.0 + OVERSHOOT)
}

/// Smallest delay with a non-monotone heteroclinic, by bisection to `tol` in `tau`.
/// Returns `(1 + gamma)/4` when no overshoot occurs below it.
pub fn tau_sharp(gamma: f64, tol: f64) -> Result<f64> {
    require(gamma > 1.0, || format!("tau_sharp needs gamma > 1, got {gamma}"))?;
    require(tol > 0.0, || "tolerance must be positive".into())?;
    let upper = 0.25 * (1.0 + gamma);
    if !overshoots(gamma, upper)? {
        return Ok(upper);
    }
    let (mut lo, mut hi) = (0.0, upper);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if overshoots(gamma, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Angle in degrees between the lines spanned by `a` and `b`.
pub fn line_angle_deg(a: [f64; 2], b: [f64; 2]) -> f64 {
    let c = (a[0] * b[0] + a[1] * b[1]).abs() / (a[0].hypot(a[1]) * b[0].hypot(b[1]));
    c.min(1.0).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overshoot_example() {
        let r = heteroclinic(40.0, 10.0, 1e-6, 1e-10).unwrap();
        assert!(r.captured);
        assert_eq!(r.shape, ShapeClass::NonMonotoneNonOscillating);
        assert!(r.phi_max > 1.0);
        let n1 = eigen_directions(40.0, 10.0).unwrap().n1.unwrap();
        assert!(line_angle_deg(r.entry_direction, n1) < 2.0);
        // entering from above along -n1
        assert!(r.entry_direction[0] < 0.0 && r.entry_direction[1] < 0.0);
        assert!((r.profile.value_at(0.0) - 0.5).abs() < 1e-9);
        assert!((r.profile.decay_minus.unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn monotone_and_focus_examples() {
        assert_eq!(heteroclinic(40.0, 5.0, 1e-6, 1e-10).unwrap().shape, ShapeClass::Monotone);
        assert_eq!(heteroclinic(40.0, 11.0, 1e-6, 1e-10).unwrap().shape, ShapeClass::Oscillating);
    }

    #[test]
    fn shape_is_stable_under_refinement() {
        for &(g, t) in &[(40.0, 10.0), (40.0, 5.0), (9.0, 3.0)] {
            let a = heteroclinic(g, t, 1e-6, 1e-9).unwrap().shape;
            let b = heteroclinic(g, t, 5e-7, 5e-10).unwrap().shape;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bad_amplitude() {
        assert!(heteroclinic(1.0, 1.0, 1e-2, 1e-10).unwrap_err().is_precondition());
    }
}
