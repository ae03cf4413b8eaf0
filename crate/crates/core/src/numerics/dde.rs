//! Single-lag delay integration by the method of steps.
//!
//! Steps never exceed the lag, so every lagged argument falls on the stored
//! dense output of already accepted steps (or on the history), and every
//! multiple of the lag is hit exactly so the derivative jumps it carries sit
//! on step boundaries.

use crate::error::{require, Error, Result};

use super::ode::{
    all_finite, detect_events, error_norm, initial_step, step_factor, Control, EventSpec,
    OdeOptions, OdeSolution, Trajectory, A, C, E,
};

/// `y'(t) = field(t, y(t), y(t - tau))` with `y = history` on `t <= t0`.
pub struct DdeProblem<'a> {
    pub tau: f64,
    pub field: &'a dyn Fn(f64, &[f64], &[f64], &mut [f64]),
    pub history: &'a dyn Fn(f64, &mut [f64]),
    pub dim: usize,
}

fn lagged(p: &DdeProblem, t0: f64, traj: &Trajectory, s: f64, out: &mut [f64]) {
    if s <= t0 {
        (p.history)(s, out)
    } else {
        traj.eval_into(s, out)
    }
}

pub fn integrate_dde(
    problem: &DdeProblem,
    span: (f64, f64),
    opts: &OdeOptions,
    events: &[EventSpec],
    mut stop: Option<&mut dyn FnMut(f64, &[f64]) -> Control>,
) -> Result<OdeSolution> {
    opts.validate()?;
    let tau = problem.tau;
    require(tau > 0.0 && tau.is_finite(), || format!("delay must be positive, got {tau}"))?;
    let (t0, t_end) = span;
    require(t_end > t0, || format!("empty span [{t0}, {t_end}]"))?;
    let d = problem.dim;
    for s in events {
        require(s.component < d, || format!("event component {} out of range", s.component))?;
    }

    let mut y = vec![0.0; d];
    (problem.history)(t0, &mut y);
    let mut lag = vec![0.0; d];
    (problem.history)(t0 - tau, &mut lag);
    let mut k = vec![vec![0.0; d]; 7];
    (problem.field)(t0, &y, &lag, &mut k[0]);
    if !all_finite(&y) || !all_finite(&k[0]) {
        return Err(Error::FieldEvaluation { t: t0 });
    }
    let mut traj = Trajectory::new(d);
    traj.push(t0, &y, &k[0]);
    let mut found = Vec::new();
    let mut t = t0;
    let mut h = initial_step(&y, &k[0], opts, t_end - t0).min(tau);
    let mut y_stage = vec![0.0; d];
    let mut err = vec![0.0; d];
    let mut next_break = 1usize;
    let mut stopped_early = false;
    let mut steps = 0usize;

    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Divergence { t, state: y });
        }
        let bp = t0 + next_break as f64 * tau;
        h = h.min(opts.h_max).min(tau).min(t_end - t);
        let mut lands_on_break = false;
        if t + h >= bp - 1e-12 * bp.abs().max(1.0) {
            h = bp - t;
            lands_on_break = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Divergence { t, state: y });
        }
        let mut finite = true;
        for s in 1..7 {
            for i in 0..d {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                y_stage[i] = acc;
            }
            let ts = t + C[s] * h;
            lagged(problem, t0, &traj, ts - tau, &mut lag);
            (problem.field)(ts, &y_stage, &lag, &mut k[s]);
            if !all_finite(&k[s]) {
                finite = false;
                break;
            }
        }
        if !finite {
            h *= 0.25;
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::FieldEvaluation { t });
            }
            continue;
        }
        for i in 0..d {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            err[i] = h * e;
        }
        let en = error_norm(&y, &y_stage, &err, opts);
        if en <= 1.0 {
            t = if lands_on_break { bp } else { t + h };
            if lands_on_break {
                next_break += 1;
            }
            y.copy_from_slice(&y_stage);
            let k7 = k[6].clone();
            k[0].copy_from_slice(&k7);
            traj.push(t, &y, &k[0]);
            let deriv_at = |tt: f64, c: usize| -> f64 {
                let yy = traj.eval(tt);
                let mut ll = vec![0.0; d];
                lagged(problem, t0, &traj, tt - tau, &mut ll);
                let mut dy = vec![0.0; d];
                (problem.field)(tt, &yy, &ll, &mut dy);
                dy[c]
            };
            let terminal = detect_events(&traj, events, &deriv_at, &mut found);
            if terminal {
                stopped_early = true;
                break;
            }
            if let Some(cb) = stop.as_deref_mut() {
                match cb(t, &y) {
                    Control::Continue => {}
                    Control::Stop => {
                        stopped_early = true;
                        break;
                    }
                    Control::Abort => return Err(Error::Divergence { t, state: y }),
                }
            }
        }
        h *= step_factor(en);
    }
    Ok(OdeSolution { trajectory: traj, events: found, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine_error(tol: f64) -> f64 {
        let field = |_: f64, _: &[f64], lag: &[f64], dy: &mut [f64]| dy[0] = -lag[0];
        let history = |t: f64, out: &mut [f64]| out[0] = t.cos();
        let p = DdeProblem { tau: PI / 2.0, field: &field, history: &history, dim: 1 };
        let sol = integrate_dde(&p, (0.0, 4.0 * PI), &OdeOptions::with_tol(tol), &[], None).unwrap();
        (0..=400)
            .map(|i| {
                let t = 4.0 * PI * i as f64 / 400.0;
                (sol.trajectory.eval_component(t, 0) - t.cos()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn cosine_solves_delayed_equation() {
        assert!(cosine_error(1e-8) < 1e-4);
    }

    #[test]
    fn tighter_tolerance_is_not_worse() {
        let coarse = cosine_error(1e-5);
        let fine = cosine_error(1e-9);
        assert!(fine <= coarse, "{fine} > {coarse}");
    }

    #[test]
    fn rejects_nonpositive_delay() {
        let field = |_: f64, _: &[f64], lag: &[f64], dy: &mut [f64]| dy[0] = -lag[0];
        let history = |_: f64, out: &mut [f64]| out[0] = 1.0;
        let p = DdeProblem { tau: 0.0, field: &field, history: &history, dim: 1 };
        let r = integrate_dde(&p, (0.0, 1.0), &OdeOptions::with_tol(1e-8), &[], None);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn breakpoints_are_step_nodes() {
        let field = |_: f64, _: &[f64], lag: &[f64], dy: &mut [f64]| dy[0] = -lag[0];
        let history = |_: f64, out: &mut [f64]| out[0] = 1.0;
        let p = DdeProblem { tau: 0.7, field: &field, history: &history, dim: 1 };
        let sol = integrate_dde(&p, (0.0, 3.0), &OdeOptions::with_tol(1e-9), &[], None).unwrap();
        for k in 1..=4 {
            let bp = 0.7 * k as f64;
            assert!(sol.trajectory.times().iter().any(|&t| (t - bp).abs() < 1e-12));
        }
        // y = 1 - t on [0, tau]
        assert!((sol.trajectory.eval_component(0.5, 0) - 0.5).abs() < 1e-10);
    }
}
