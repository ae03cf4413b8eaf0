use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-capita growth law `G` with `G(1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GrowthModel {
    /// `G(u) = (1 - u) / (1 + gamma u)`
    FoodLimited { gamma: f64 },
    /// `G(u) = a + b u - (a + b) u^2`
    Quadratic { a: f64, b: f64 },
    /// `G(u) = 1 - u`
    Kpp,
}

impl GrowthModel {
    pub fn food_limited(gamma: f64) -> Result<Self> {
        let g = GrowthModel::FoodLimited { gamma };
        g.validate()?;
        Ok(g)
    }

    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        let g = GrowthModel::Quadratic { a, b };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GrowthModel::FoodLimited { gamma } if !(gamma >= 0.0 && gamma.is_finite()) => {
                return Err(Error::Model(format!("food-limited needs gamma >= 0, got {gamma}")));
            }
            GrowthModel::Quadratic { a, b } if !(a > 0.0 && a + b > 0.0 && b.is_finite()) => {
                return Err(Error::Model(format!("quadratic needs a > 0 and a + b > 0, got a = {a}, b = {b}")));
            }
            _ => {}
        }
        if !self.is_monostable_sampled() {
            return Err(Error::Model("G(u)(1 - u) is not positive off u = 1".into()));
        }
        if self.gp1() >= 0.0 {
            return Err(Error::Model(format!("G'(1) = {} is not negative", self.gp1())));
        }
        Ok(())
    }

    pub fn g(&self, u: f64) -> f64 {
        match *self {
            GrowthModel::FoodLimited { gamma } => (1.0 - u) / (1.0 + gamma * u),
            GrowthModel::Quadratic { a, b } => a + b * u - (a + b) * u * u,
            GrowthModel::Kpp => 1.0 - u,
        }
    }

    pub fn dg(&self, u: f64) -> f64 {
        match *self {
            GrowthModel::FoodLimited { gamma } => -(1.0 + gamma) / (1.0 + gamma * u).powi(2),
            GrowthModel::Quadratic { a, b } => b - 2.0 * (a + b) * u,
            GrowthModel::Kpp => -1.0,
        }
    }

    pub fn g0(&self) -> f64 {
        self.g(0.0)
    }

    /// `max_{u >= 0} G(u)`.
    pub fn gstar(&self) -> f64 {
        match *self {
            GrowthModel::Quadratic { a, b } if b > 0.0 => a + b * b / (4.0 * (a + b)),
            _ => self.g0(),
        }
    }

    /// `G'(1)`.
    pub fn gp1(&self) -> f64 {
        self.dg(1.0)
    }

    /// `H(u) = G(u) / (u - 1)`, continued by `G'(1)` at `u = 1`.
    pub fn h(&self, u: f64) -> f64 {
        match *self {
            GrowthModel::FoodLimited { gamma } => -1.0 / (1.0 + gamma * u),
            GrowthModel::Quadratic { a, b } => -(a + (a + b) * u),
            GrowthModel::Kpp => -1.0,
        }
    }

    /// `min_{[0,1]} H`.
    pub fn hstar(&self) -> f64 {
        self.h(0.0).min(self.h(1.0))
    }

    /// `max_{[0,1]} H`.
    pub fn hsup(&self) -> f64 {
        self.h(0.0).max(self.h(1.0))
    }

    /// `min_{[lo, hi]} G`; every catalogued law is decreasing or concave there.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        self.g(lo).min(self.g(hi))
    }

    /// Smallest slope `p >= G(0)` with `G(u) >= G(0) - p u` on the sampled `[0, hi]`.
    pub fn minorant_slope(&self, hi: f64) -> f64 {
        let n = 4000;
        let g0 = self.g0();
        let mut p = -self.dg(0.0);
        for i in 1..=n {
            let u = hi * i as f64 / n as f64;
            p = p.max((g0 - self.g(u)) / u);
        }
        p.max(g0)
    }

    /// `G(u)(1 - u) > 0` on a 1000-point grid of `[0, 3]` minus `{1}`.
    pub fn is_monostable_sampled(&self) -> bool {
        if self.g(1.0) != 0.0 {
            return false;
        }
        (0..=1000).map(|i| 3.0 * i as f64 / 1000.0).filter(|&u| u != 1.0).all(|u| self.g(u) * (1.0 - u) > 0.0)
    }
}
