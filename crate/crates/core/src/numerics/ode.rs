//! Dormand–Prince 5(4) with cubic Hermite dense output and event location.

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

pub(crate) const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
pub(crate) const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
pub(crate) const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-size control and limits.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { rtol: tol, atol: tol * 1e-6, h_init: None, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }

    pub fn atol(mut self, atol: f64) -> Self {
        self.atol = atol;
        self
    }

    pub fn h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        require(self.rtol > 1e-13 && self.rtol < 1e-2, || {
            format!("tolerance {} outside (1e-13, 1e-2)", self.rtol)
        })?;
        require(self.atol > 0.0, || "absolute tolerance must be positive".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    LevelCrossing,
    DerivativeSignChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Up,
    Down,
}

/// What to watch for during an integration.
#[derive(Debug, Clone, Copy)]
pub struct EventSpec {
    pub kind: EventKind,
    pub component: usize,
    pub level: f64,
    pub terminal: bool,
}

impl EventSpec {
    /// Crossing of `y[component] = level`.
    pub fn level(component: usize, level: f64) -> Self {
        EventSpec { kind: EventKind::LevelCrossing, component, level, terminal: false }
    }

    /// Sign change of `y[component]'`; `Down` marks a maximum.
    pub fn critical(component: usize) -> Self {
        EventSpec { kind: EventKind::DerivativeSignChange, component, level: 0.0, terminal: false }
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    pub direction: Direction,
    pub component: usize,
    /// Index into the spec list the event came from.
    pub spec: usize,
}

/// Returned by a stop callback after every accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
    Abort,
}

/// Accepted steps with their derivatives; evaluates by cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>,
    dys: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn new(dim: usize) -> Self {
        Trajectory { dim, ts: Vec::new(), ys: Vec::new(), dys: Vec::new() }
    }

    pub(crate) fn push(&mut self, t: f64, y: &[f64], dy: &[f64]) {
        self.ts.push(t);
        self.ys.extend_from_slice(y);
        self.dys.extend_from_slice(dy);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.dys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.ts.len();
        if n < 2 || t <= self.ts[0] {
            return 0;
        }
        if t >= self.ts[n - 1] {
            return n - 2;
        }
        self.ts.partition_point(|&s| s <= t) - 1
    }

    /// Component `c` at time `t` (clamped to the integrated span).
    pub fn eval_component(&self, t: f64, c: usize) -> f64 {
        if self.ts.len() == 1 {
            return self.ys[c];
        }
        let i = self.segment(t);
        let t = t.clamp(self.ts[0], self.ts[self.ts.len() - 1]);
        let d = self.dim;
        hermite(
            self.ts[i],
            self.ts[i + 1],
            self.ys[i * d + c],
            self.ys[(i + 1) * d + c],
            self.dys[i * d + c],
            self.dys[(i + 1) * d + c],
            t,
        )
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(t, c);
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }
}

pub(crate) fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y1;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub trajectory: Trajectory,
    pub events: Vec<Event>,
    /// True when a terminal event or the stop callback ended the run before the span did.
    pub stopped_early: bool,
}

pub(crate) fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / y.len() as f64).sqrt()
}

pub(crate) fn initial_step(y: &[f64], f: &[f64], opts: &OdeOptions, span: f64) -> f64 {
    if let Some(h) = opts.h_init {
        return h.min(span);
    }
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y.len() {
        let sc = opts.atol + opts.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f[i] / sc).powi(2);
    }
    let (d0, d1) = (d0.sqrt(), d1.sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).min(opts.h_max).max(1e-12 * span)
}

pub(crate) fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Bisection on `g` between `a` and `b` (opposite signs) down to 1e-12 in time.
pub(crate) fn refine_event(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub(crate) fn crossed(g0: f64, g1: f64) -> Option<Direction> {
    if g0 < 0.0 && g1 >= 0.0 {
        Some(Direction::Up)
    } else if g0 > 0.0 && g1 <= 0.0 {
        Some(Direction::Down)
    } else {
        None
    }
}

/// Scan the newest segment of `traj` for events; `deriv_at(t, c)` evaluates the field component.
pub(crate) fn detect_events(
    traj: &Trajectory,
    specs: &[EventSpec],
    deriv_at: &dyn Fn(f64, usize) -> f64,
    out: &mut Vec<Event>,
) -> bool {
    let n = traj.len();
    if n < 2 {
        return false;
    }
    let (t0, t1) = (traj.times()[n - 2], traj.times()[n - 1]);
    let mut found: Vec<Event> = Vec::new();
    for (idx, spec) in specs.iter().enumerate() {
        let c = spec.component;
        let (g0, g1) = match spec.kind {
            EventKind::LevelCrossing => {
                (traj.state(n - 2)[c] - spec.level, traj.state(n - 1)[c] - spec.level)
            }
            EventKind::DerivativeSignChange => (traj.derivative(n - 2)[c], traj.derivative(n - 1)[c]),
        };
        if let Some(direction) = crossed(g0, g1) {
            let time = match spec.kind {
                EventKind::LevelCrossing => {
                    refine_event(t0, t1, |t| traj.eval_component(t, c) - spec.level)
                }
                EventKind::DerivativeSignChange => refine_event(t0, t1, |t| deriv_at(t, c)),
            };
            found.push(Event { kind: spec.kind, time, direction, component: c, spec: idx });
        }
    }
    found.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.spec.cmp(&b.spec)));
    let terminal = found.iter().any(|e| specs[e.spec].terminal);
    out.extend(found);
    terminal
}

/// Integrate `y' = field(t, y)` over `span`.
///
/// `stop` is consulted after every accepted step; `Control::Abort` turns into a
/// divergence error carrying the last state.
pub fn integrate_ode<F>(
    field: F,
    state0: &[f64],
    span: (f64, f64),
    opts: &OdeOptions,
    events: &[EventSpec],
    mut stop: Option<&mut dyn FnMut(f64, &[f64]) -> Control>,
) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    opts.validate()?;
    let (t0, t_end) = span;
    require(t_end > t0, || format!("empty span [{t0}, {t_end}]"))?;
    let d = state0.len();
    require(d > 0, || "empty state".into())?;
    for s in events {
        require(s.component < d, || format!("event component {} out of range", s.component))?;
    }

    let mut t = t0;
    let mut y = state0.to_vec();
    let mut k = vec![vec![0.0; d]; 7];
    field(t, &y, &mut k[0]);
    if !all_finite(&y) || !all_finite(&k[0]) {
        return Err(Error::FieldEvaluation { t });
    }
    let mut traj = Trajectory::new(d);
    traj.push(t, &y, &k[0]);
    let mut found = Vec::new();
    let mut h = initial_step(&y, &k[0], opts, t_end - t0);
    let mut y_stage = vec![0.0; d];
    let mut y_new = vec![0.0; d];
    let mut err = vec![0.0; d];
    let mut stopped_early = false;
    let mut steps = 0usize;

    let deriv_at = |tt: f64, c: usize, traj: &Trajectory| -> f64 {
        let yy = traj.eval(tt);
        let mut dy = vec![0.0; d];
        field(tt, &yy, &mut dy);
        dy[c]
    };

    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Divergence { t, state: y });
        }
        h = h.min(opts.h_max).min(t_end - t);
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
            field(t + C[s] * h, &y_stage, &mut k[s]);
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
        // Stage 7 is evaluated at the fifth-order solution (FSAL).
        y_new.copy_from_slice(&y_stage);
        for i in 0..d {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            err[i] = h * e;
        }
        let en = error_norm(&y, &y_new, &err, opts);
        if en <= 1.0 {
            t = if t_end - (t + h) <= 1e-14 * t_end.abs().max(1.0) { t_end } else { t + h };
            y.copy_from_slice(&y_new);
            let k7 = k[6].clone();
            k[0].copy_from_slice(&k7);
            traj.push(t, &y, &k[0]);
            let terminal = detect_events(&traj, events, &|tt, c| deriv_at(tt, c, &traj), &mut found);
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

    #[test]
    fn exponential_growth() {
        let sol = integrate_ode(
            |_, y, dy| dy[0] = y[0],
            &[1.0],
            (0.0, 1.0),
            &OdeOptions::with_tol(1e-10),
            &[],
            None,
        )
        .unwrap();
        let y1 = sol.trajectory.eval_component(1.0, 0);
        assert!((y1 - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn dense_output_hits_nodes() {
        let sol = integrate_ode(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[0.0, 1.0],
            (0.0, 6.0),
            &OdeOptions::with_tol(1e-8),
            &[],
            None,
        )
        .unwrap();
        let tr = &sol.trajectory;
        for i in 0..tr.len() {
            assert_eq!(tr.eval_component(tr.times()[i], 0), tr.state(i)[0]);
        }
        assert!((tr.eval_component(2.345, 0) - 2.345f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn level_and_critical_events() {
        let specs = [EventSpec::level(0, 0.0), EventSpec::critical(0)];
        let sol = integrate_ode(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[0.0, 1.0],
            (0.0, 7.0),
            &OdeOptions::with_tol(1e-10),
            &specs,
            None,
        )
        .unwrap();
        let pi = std::f64::consts::PI;
        let zeros: Vec<f64> =
            sol.events.iter().filter(|e| e.kind == EventKind::LevelCrossing).map(|e| e.time).collect();
        assert_eq!(zeros.len(), 2);
        assert!((zeros[0] - pi).abs() < 1e-7 && (zeros[1] - 2.0 * pi).abs() < 1e-7);
        let maxima: Vec<&Event> = sol
            .events
            .iter()
            .filter(|e| e.kind == EventKind::DerivativeSignChange && e.direction == Direction::Down)
            .collect();
        assert!((maxima[0].time - pi / 2.0).abs() < 1e-7);
        assert!(sol.events.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn nan_field_is_reported() {
        let r = integrate_ode(
            |_, y, dy| dy[0] = (y[0] / y[0]).ln(),
            &[0.0],
            (0.0, 1.0),
            &OdeOptions::with_tol(1e-8),
            &[],
            None,
        );
        assert!(matches!(r, Err(Error::FieldEvaluation { .. })));
    }

    #[test]
    fn halving_tol_does_not_increase_error() {
        let run = |tol: f64| {
            let sol = integrate_ode(
                |_, y, dy| dy[0] = y[0],
                &[1.0],
                (0.0, 2.0),
                &OdeOptions::with_tol(tol),
                &[],
                None,
            )
            .unwrap();
            (sol.trajectory.eval_component(2.0, 0) - 2f64.exp()).abs()
        };
        let mut prev = f64::INFINITY;
        for tol in [1e-4, 5e-5, 2.5e-5, 1.25e-5, 1e-6, 5e-7, 1e-8] {
            let e = run(tol);
            assert!(e <= prev * 1.0001 + 1e-15, "tol {tol}: {e} > {prev}");
            prev = e;
        }
    }
}
