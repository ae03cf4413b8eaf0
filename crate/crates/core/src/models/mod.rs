//! Growth laws, kernels and the parameter bundle shared by every solver.

mod growth;
mod kernel;

use serde::{Deserialize, Serialize};

pub use growth::GrowthModel;
pub use kernel::{effective_kernel, moment_abscissae, moment_transform, EffectiveKernel, Kernel, Table};

use crate::error::{require, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub growth: GrowthModel,
    pub kernel: Kernel,
    pub c: f64,
}

impl WaveParams {
    pub fn new(growth: GrowthModel, kernel: Kernel, c: f64) -> Result<Self> {
        let p = WaveParams { growth, kernel, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.growth.validate()?;
        self.kernel.validate()?;
        require(self.c >= 0.0 && self.c.is_finite(), || format!("speed must be finite and >= 0, got {}", self.c))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: WaveParams =
            serde_json::from_str(text).map_err(|e| crate::Error::Model(format!("malformed model JSON: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// `c >= 2 sqrt(G*)`.
    pub fn existence_guaranteed(&self) -> bool {
        self.c >= 2.0 * self.growth.gstar().sqrt()
    }

    /// `c < 2 sqrt(G(0))`.
    pub fn nonexistence(&self) -> bool {
        self.c < 2.0 * self.growth.g0().sqrt()
    }

    /// `eps = 1 / c^2`.
    pub fn eps_speed(&self) -> f64 {
        1.0 / (self.c * self.c)
    }

    pub fn effective_kernel(&self) -> Result<EffectiveKernel> {
        effective_kernel(&self.kernel, self.c)
    }

    pub fn moment_transform(&self, lambda: f64) -> f64 {
        moment_transform(&self.kernel, self.c, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_document() {
        let p = WaveParams::from_json(
            r#"{"growth":{"kind":"food-limited","gamma":9},"kernel":{"kind":"weak-generic","tau":2},"c":2.5}"#,
        )
        .unwrap();
        assert_eq!(p.growth, GrowthModel::FoodLimited { gamma: 9.0 });
        assert!(p.existence_guaranteed() && !p.nonexistence());
        let back = WaveParams::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let q = WaveParams::from_json(r#"{"growth":{"kind":"quadratic","a":1,"b":2},"kernel":{"kind":"dirac-spatial"},"c":2.1}"#)
            .unwrap();
        // c_min(existence) = 2 sqrt(4/3) > 2.1 > 2 sqrt(1)
        assert!(!q.existence_guaranteed() && !q.nonexistence());
        assert!(WaveParams::from_json(r#"{"growth":{"kind":"kpp"},"kernel":{"kind":"nope"},"c":2}"#).is_err());
    }
}
