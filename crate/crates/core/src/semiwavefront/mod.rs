//! Semi-wavefronts for general kernels: the truncation `g_beta`, the a-priori
//! bound, upper and lower solutions and the monotone iteration of the
//! integral operator `A`.

mod asymptotics;
mod barriers;
mod iterate;
mod operator;

use serde::{Deserialize, Serialize};

pub use asymptotics::{asymptotic_check, critical_speed_sequence, AsymptoticReport, SpeedSequence};
pub use barriers::{kpp_upper_solution, lower_solution, LowerSolution, UpperSolution};
pub use iterate::{iterate_a, profile_residual, IterationConfig, IterationRun};
pub use operator::Operator;

use crate::error::{require, Error, Result};
use crate::models::{EffectiveKernel, GrowthModel};
use crate::numerics::find_root;
use crate::spectral::kpp_roots;

/// `u` on `[0, beta]`, `max(0, 2 beta - u)` above.
pub fn g_beta(u: f64, beta: f64) -> f64 {
    if u <= beta {
        u
    } else {
        (2.0 * beta - u).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundBranch {
    /// `(\int_0^inf e^{-lambda s} N)^{-1}`
    PositiveMass,
    /// `2 e^{lambda (r + sigma)}`
    AdvancedKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "U")]
    pub u: f64,
    pub branch: BoundBranch,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// `2c (e^{lambda sigma} - 1)/(e^{c sigma} - 1)`, overflow-free.
fn sigma_ratio(c: f64, lambda: f64, sigma: f64) -> f64 {
    2.0 * c * ((lambda - c) * sigma).exp() * (-(-lambda * sigma).exp_m1()) / (-(-c * sigma).exp_m1())
}

/// Smallest `sigma` with `sigma_ratio < 0.01`, nudged up so the inequality is strict.
fn sigma_for(c: f64, lambda: f64) -> Result<f64> {
    let f = |s: f64| sigma_ratio(c, lambda, s) - 0.01;
    let lo = 1e-9;
    if f(lo) < 0.0 {
        return Ok(lo);
    }
    let mut hi = 1.0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Bracket { a: lo, b: hi, fa: f(lo), fb: f(hi) });
        }
    }
    let mut s = find_root(f, lo, hi, 1e-12)?;
    while f(s) >= 0.0 {
        s *= 1.0 + 1e-9;
    }
    Ok(s)
}

/// Bound `U(c, N)` on every semi-wavefront at speed `c`.
pub fn apriori_bound(c: f64, nc: &EffectiveKernel, growth: &GrowthModel) -> Result<BoundReport> {
    growth.validate()?;
    let g0 = growth.g0();
    require(growth.gstar() <= g0, || {
        format!("the bound needs G(s) < G(0) for s > 0, but G* = {} > G(0) = {g0}", growth.gstar())
    })?;
    let (lambda, _) = kpp_roots(c, g0)?;
    let forward = nc.laplace_on(0.0, 0.0, f64::INFINITY);
    let mut best: Option<BoundReport> = None;
    if forward > 0.0 {
        let u = 1.0 / nc.laplace_on(lambda, 0.0, f64::INFINITY);
        best = Some(BoundReport { u, branch: BoundBranch::PositiveMass, lambda, r: None, sigma: None });
    }
    if forward < 0.001 {
        let (lo, _) = nc.support();
        let r_max = (-lo).max(0.0).ceil() as u32 + 1;
        let r = (1..=r_max)
            .find(|&r| nc.laplace_on(0.0, -(r as f64), 0.0) > 0.99)
            .ok_or_else(|| Error::Model("kernel has no 0.99 mass on any [-r, 0]".into()))?;
        let sigma = sigma_for(c, lambda)?;
        let u = 2.0 * (lambda * (r as f64 + sigma)).exp();
        if best.as_ref().map_or(true, |b| u < b.u) {
            best = Some(BoundReport { u, branch: BoundBranch::AdvancedKernel, lambda, r: Some(r), sigma: Some(sigma) });
        }
    }
    // forward >= 0 always lands in one of the branches
    Ok(best.expect("bound branch"))
}
