use serde::{Deserialize, Serialize};

use crate::error::{require, Result};

/// Uniform grid `t0 + k*dt`, `k in 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        require(dt > 0.0 && dt.is_finite(), || format!("grid step must be positive, got {dt}"))?;
        require(n >= 2, || format!("grid needs at least 2 nodes, got {n}"))?;
        require(t0.is_finite(), || "grid origin must be finite".into())?;
        Ok(Grid { t0, dt, n })
    }

    /// Grid covering `[a, b]` with step at most `dt_max`.
    pub fn spanning(a: f64, b: f64, dt_max: f64) -> Result<Self> {
        require(b > a, || format!("empty interval [{a}, {b}]"))?;
        let n = ((b - a) / dt_max).ceil().max(1.0) as usize + 1;
        Grid::new(a, (b - a) / (n - 1) as f64, n)
    }

    pub fn node(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.node(self.n - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.node(k))
    }

    pub fn shifted(&self, by: f64) -> Grid {
        Grid { t0: self.t0 + by, ..*self }
    }
}
