use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::models::WaveParams;
use crate::numerics::{maximize_scalar, Grid};
use crate::spectral::kpp_roots;

/// Monotone front of `phi'' - c phi' + G0 g_beta(phi) = 0` with `phi e^{-lambda t} -> 1`.
///
/// Below `beta` it is `e^{lambda t} - C e^{mu t}`; above, `2 beta - beta e^{rho (t - t_beta)}`
/// with `rho < 0` the negative root of `z^2 - c z - G0`. The pieces meet in `C^1` at `t_beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperSolution {
    pub c: f64,
    pub g0: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub big_c: f64,
    pub t_beta: f64,
}

impl UpperSolution {
    pub fn new(c: f64, g0: f64, beta: f64) -> Result<Self> {
        require(g0 > 0.0 && g0.is_finite(), || format!("G(0) must be positive, got {g0}"))?;
        require(beta > 0.0 && beta.is_finite(), || format!("beta must be positive, got {beta}"))?;
        let (lambda, mu) = kpp_roots(c, g0)?;
        if mu - lambda <= 1e-9 * mu {
            return Err(Error::Unsupported(format!(
                "no closed-form upper solution at the critical speed c = 2 sqrt(G0) = {c}; use a slightly larger c"
            )));
        }
        let rho = 0.5 * (c - (c * c + 4.0 * g0).sqrt());
        Ok(UpperSolution::with_rates(c, g0, beta, lambda, mu, rho))
    }

    /// Same construction with prescribed rates, e.g. the roots of a discrete symbol.
    pub fn with_rates(c: f64, g0: f64, beta: f64, lambda: f64, mu: f64, rho: f64) -> Self {
        let x = beta * (mu + rho) / (mu - lambda);
        let t_beta = x.ln() / lambda;
        let big_c = (x - beta) * (-mu * t_beta).exp();
        UpperSolution { c, g0, beta, lambda, mu, rho, big_c, t_beta }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.t_beta {
            let x = (self.lambda * self.t_beta).exp();
            (self.lambda * t).exp() - (x - self.beta) * (self.mu * (t - self.t_beta)).exp()
        } else {
            self.beta * (2.0 - (self.rho * (t - self.t_beta)).exp())
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().map(|t| self.eval(t)).collect()
    }
}

pub fn kpp_upper_solution(c: f64, g0: f64, beta: f64, grid: &Grid) -> Result<Vec<f64>> {
    Ok(UpperSolution::new(c, g0, beta)?.sample(grid))
}

/// `max(0, e^{lambda t}(1 - M e^{eps t}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerSolution {
    pub lambda: f64,
    pub eps: f64,
    pub m: f64,
    /// `-ln(M)/eps`, where the solution vanishes.
    pub t_c: f64,
}

impl LowerSolution {
    pub fn new(c: f64, g0: f64, mu_lower: f64, m: f64) -> Result<Self> {
        let (lambda, mu) = kpp_roots(c, g0)?;
        require(mu_lower > 0.0 && mu_lower < lambda, || format!("mu_lower must lie in (0, {lambda}), got {mu_lower}"))?;
        require(lambda + mu_lower < mu, || format!("lambda + mu_lower = {} must stay below mu = {mu}", lambda + mu_lower))?;
        require(m >= 1.0 && m.is_finite(), || format!("M must be >= 1, got {m}"))?;
        Ok(LowerSolution { lambda, eps: mu_lower, m, t_c: -m.ln() / mu_lower })
    }

    /// Same shape with `lambda` replaced, e.g. by a discrete rate.
    pub fn with_lambda(self, lambda: f64) -> Self {
        LowerSolution { lambda, ..self }
    }

    /// Default exponent `min(lambda, mu - lambda)/2`.
    pub fn default_exponent(c: f64, g0: f64) -> Result<f64> {
        let (lambda, mu) = kpp_roots(c, g0)?;
        Ok(0.5 * lambda.min(mu - lambda))
    }

    /// Amplitude from the displayed constraint with a 1% margin, and no smaller
    /// than what keeps the solution under `upper`.
    pub fn admissible(params: &WaveParams, upper: &UpperSolution, p: f64, mu_lower: f64) -> Result<Self> {
        let probe = LowerSolution::new(params.c, upper.g0, mu_lower, 1.0)?;
        let (lambda, eps, c) = (probe.lambda, mu_lower, params.c);
        let transform = params.moment_transform(eps);
        if !transform.is_finite() {
            return Err(Error::Moment(format!("\\int e^{{-{eps} s}} N_c(s) ds diverges")));
        }
        let z = lambda + eps;
        let neg_chi = -(z * z - c * z + upper.g0);
        let big_l = sup_weighted(upper, eps);
        let from_constraint = 1.01 * big_l * p * transform / neg_chi;
        // e^{lambda t} - C e^{mu t} >= e^{lambda t}(1 - M e^{eps t}) needs M e^{eps t} >= C e^{(mu-lambda)t} where both live
        let from_upper = if upper.big_c > 0.0 { 1.01 * upper.big_c.powf(eps / (upper.mu - lambda)) } else { 0.0 };
        LowerSolution::new(c, upper.g0, eps, from_constraint.max(from_upper).max(1.0))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let e = (self.lambda * t).exp();
        (e - self.m * e * (self.eps * t).exp()).max(0.0)
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().map(|t| self.eval(t)).collect()
    }
}

/// `L = sup_t phi_+(t) e^{-eps t}`.
fn sup_weighted(upper: &UpperSolution, eps: f64) -> f64 {
    let f = |t: f64| upper.eval(t).ln() - eps * t;
    let (a, b) = (upper.t_beta - 60.0 / (upper.lambda - eps), upper.t_beta + 60.0 / eps);
    let (_, best) = maximize_scalar(f, a, b, 1e-10);
    let scan = (0..=4000).map(|k| f(a + (b - a) * k as f64 / 4000.0)).fold(f64::NEG_INFINITY, f64::max);
    best.max(scan).exp() * (1.0 + 1e-9)
}

/// Sampled lower solution for given exponent and amplitude.
pub fn lower_solution(c: f64, g0: f64, mu_lower: f64, m: f64, grid: &Grid) -> Result<Vec<f64>> {
    Ok(LowerSolution::new(c, g0, mu_lower, m)?.sample(grid))
}
