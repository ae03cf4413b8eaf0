use serde::{Deserialize, Serialize};

use super::{apriori_bound, g_beta, BoundReport, LowerSolution, Operator, UpperSolution};
use crate::error::{require, Error, Result};
use crate::models::{EffectiveKernel, WaveParams};
use crate::numerics::Grid;
use crate::profile::Profile;
use crate::spectral::{chi_plus_roots, chi_plus_window};

/// Noise floor handed to the profile classifier.
const PROFILE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub b: f64,
    pub beta: f64,
    pub grid: Grid,
    pub max_iters: usize,
    pub tol: f64,
    /// Exponent of the lower solution; `min(lambda, mu - lambda)/2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_lower: Option<f64>,
}

impl IterationConfig {
    /// `beta = 1.5 U`, `b = 2 (G(0) - min_{[0, 2 beta]} G) + 1`, step 0.01 (dividing
    /// `c tau` for a delay), grid from `phi_+ = 1e-12` on the left to
    /// `max(100, 30/|z|)`, at most 400, past `t_beta`, with `z` the real zero of
    /// `chi_+` closest to 0.
    pub fn default_for(params: &WaveParams) -> Result<Self> {
        params.validate()?;
        let nc = params.effective_kernel()?;
        let g = &params.growth;
        let bound = apriori_bound(params.c, &nc, g)?;
        let beta = 1.5 * bound.u;
        let b = 2.0 * (g.g0() - g.min_on(0.0, 2.0 * beta)) + 1.0;
        let upper = UpperSolution::new(params.c, g.g0(), beta)?;
        let dt = match nc {
            EffectiveKernel::PointMass { at } if at != 0.0 => at.abs() / (at.abs() / 0.01).ceil(),
            _ => 0.01,
        };
        let (lo, hi) = chi_plus_window(params);
        let slowest = chi_plus_roots(params, lo, hi, 1e-10)
            .map(|r| r.real_roots().into_iter().filter(|&z| z < 0.0).fold(f64::NEG_INFINITY, f64::max))
            .unwrap_or(f64::NEG_INFINITY);
        let reach = if slowest.is_finite() { (30.0 / slowest.abs()).clamp(100.0, 400.0) } else { 100.0 };
        let (s_lo, s_hi) = nc.support();
        let t_left = (1e-12f64).ln() / upper.lambda - s_hi.max(0.0);
        let t_right = upper.t_beta + reach + s_hi.abs().max(s_lo.abs());
        let n = ((t_right - t_left) / dt).ceil() as usize + 1;
        Ok(IterationConfig { b, beta, grid: Grid::new(t_left, dt, n)?, max_iters: 50_000, tol: 1e-10, mu_lower: None })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Model(format!("malformed iteration config: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRun {
    /// Fixed point, shifted so that `phi(0) = 1/2`.
    pub profile: Profile,
    /// `sup |phi_{k+1} - phi_k|` per iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Finite-difference residual of `phi'' - c phi' + phi G(N_c * phi)`.
    pub equation_residual: f64,
    pub bound: BoundReport,
    pub upper: UpperSolution,
    pub lower: LowerSolution,
    /// Linear-minorant slope of `G` on `[0, 2 beta]`.
    pub p: f64,
    /// Largest `phi_k - phi_+` or `phi_- - phi_k` seen; non-positive means a strict sandwich.
    pub sandwich_excess: f64,
}

/// Central-difference residual of `phi'' - c phi' + phi G(N_c * phi)` over interior nodes.
pub fn profile_residual(op: &Operator, phi: &[f64]) -> f64 {
    let h = op.grid.dt;
    let mut conv = vec![0.0; phi.len()];
    op.convolve(phi, &mut conv);
    (1..phi.len() - 1)
        .map(|i| {
            let d2 = (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h);
            let d1 = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
            (d2 - op.c * d1 + phi[i] * op.growth().g(conv[i])).abs()
        })
        .fold(0.0, f64::max)
}

/// Iterate the discretized `A` from `init` (default `phi_+`) until successive
/// iterates agree to `tol` in the sup norm.
///
/// Every iterate is checked against the sandwich `phi_- <= phi_k <= phi_+`, with
/// both barriers evaluated at the scheme's discrete rates. The upper side is
/// allowed the one-step defect of `phi_+` under the scheme plus `10 tol`.
pub fn iterate_a(config: &IterationConfig, params: &WaveParams, init: Option<&[f64]>) -> Result<IterationRun> {
    params.validate()?;
    require(config.b > 0.0, || format!("b must be positive, got {}", config.b))?;
    require(config.tol > 0.0, || "tolerance must be positive".into())?;
    let g = params.growth;
    let g0 = g.g0();
    let nc = params.effective_kernel()?;
    let bound = apriori_bound(params.c, &nc, &g)?;
    require(config.beta > bound.u, || format!("beta = {} must exceed U = {}", config.beta, bound.u))?;
    let threshold = g0 - g.min_on(0.0, 2.0 * config.beta);
    require(config.b > threshold, || format!("b = {} must exceed G(0) - min G = {threshold}", config.b))?;

    let grid = config.grid;
    let p = g.minorant_slope(2.0 * config.beta);
    let mu_lower = match config.mu_lower {
        Some(m) => m,
        None => LowerSolution::default_exponent(params.c, g0)?,
    };
    let continuous = UpperSolution::new(params.c, g0, config.beta)?;
    let lower = LowerSolution::admissible(params, &continuous, p, mu_lower)?;
    // barriers built from the scheme's own rates, so the linear tail is invariant under it
    let op = Operator::new(params, &nc, config.b, config.beta, grid)?;
    let (lh, mh, rh) = op.discrete_rates(g0)?;
    let upper = UpperSolution::with_rates(params.c, g0, config.beta, lh, mh, rh);
    let lower = lower.with_lambda(lh);
    let hi = upper.sample(&grid);
    let lo = lower.sample(&grid);
    for (i, (&l, &u)) in lo.iter().zip(&hi).enumerate() {
        if l > u {
            return Err(Error::InvarianceBreach { t: grid.node(i), excess: l - u });
        }
    }

    let slack = 10.0 * config.tol;
    let allow_up: Vec<f64> = {
        let r: Vec<f64> = hi.iter().map(|&u| config.b * u + g0 * g_beta(u, config.beta)).collect();
        let mut a = vec![0.0; grid.n];
        op.green(&r, &mut a);
        a.iter().zip(&hi).map(|(a, u)| slack + (a - u).max(0.0)).collect()
    };

    let mut phi = match init {
        Some(v) => {
            require(v.len() == grid.n, || format!("initial profile has {} samples for {} nodes", v.len(), grid.n))?;
            for i in 0..grid.n {
                require(v[i] >= lo[i] - slack && v[i] <= hi[i] + allow_up[i], || {
                    format!("initial profile leaves the sandwich at t = {}", grid.node(i))
                })?;
            }
            v.to_vec()
        }
        None => hi.clone(),
    };

    let mut history = Vec::new();
    let mut sandwich_excess = f64::NEG_INFINITY;
    let mut converged = false;
    for _ in 0..config.max_iters {
        let next = op.apply(&phi);
        let mut diff: f64 = 0.0;
        for i in 0..grid.n {
            let (over, under) = (next[i] - hi[i], lo[i] - next[i]);
            sandwich_excess = sandwich_excess.max(over).max(under);
            if over > allow_up[i] || under > slack {
                return Err(Error::InvarianceBreach { t: grid.node(i), excess: over.max(under) });
            }
            diff = diff.max((next[i] - phi[i]).abs());
        }
        if !diff.is_finite() {
            return Err(Error::Divergence { t: grid.t0, state: vec![diff] });
        }
        history.push(diff);
        phi = next;
        if diff < config.tol {
            converged = true;
            break;
        }
    }

    let equation_residual = profile_residual(&op, &phi);
    let h = params.kernel.tau().map(|tau| params.c * tau);
    let profile = Profile::from_samples(grid, phi, h, PROFILE_FLOOR)?;
    let profile = profile.pinned();
    Ok(IterationRun {
        profile,
        iterations: history.len(),
        residual_history: history,
        converged,
        equation_residual,
        bound,
        upper,
        lower,
        p,
        sandwich_excess,
    })
}
