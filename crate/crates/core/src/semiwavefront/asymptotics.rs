use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{iterate_a, IterationConfig};
use crate::error::{require, Result};
use crate::models::WaveParams;
use crate::profile::Profile;
use crate::spectral::{chi_plus_roots, chi_plus_window, kpp_roots};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub lambda: f64,
    pub decay_minus: Option<f64>,
    pub rel_err_minus: Option<f64>,
    pub decay_plus: Option<f64>,
    /// Real negative zero of `chi_+` closest to `decay_plus`.
    pub nearest_root: Option<f64>,
    pub rel_err_plus: Option<f64>,
    /// A tail could not be fitted.
    pub inconclusive: bool,
    /// Monotone decay observed at `+inf` without a real negative zero of `chi_+`.
    pub mismatch: bool,
}

/// Compare the fitted tail rates of `profile` with `lambda(c)` and the zeros of `chi_+`.
pub fn asymptotic_check(profile: &Profile, params: &WaveParams) -> Result<AsymptoticReport> {
    params.validate()?;
    let (lambda, _) = kpp_roots(params.c, params.growth.g0())?;
    let rel_err_minus = profile.decay_minus.map(|d| (d - lambda).abs() / lambda);
    let (lo, hi) = chi_plus_window(params);
    let roots: Vec<f64> = chi_plus_roots(params, lo, hi, 1e-12)?.real_roots().into_iter().filter(|&z| z < 0.0).collect();
    let decay_plus = if profile.unresolved_tail { None } else { profile.decay_plus };
    let nearest_root = decay_plus.and_then(|d| {
        roots.iter().cloned().min_by(|a, b| (a - d).abs().partial_cmp(&(b - d).abs()).expect("finite roots"))
    });
    let rel_err_plus = match (decay_plus, nearest_root) {
        (Some(d), Some(z)) => Some((d - z).abs() / z.abs()),
        _ => None,
    };
    Ok(AsymptoticReport {
        lambda,
        decay_minus: profile.decay_minus,
        rel_err_minus,
        decay_plus,
        nearest_root,
        rel_err_plus,
        inconclusive: profile.decay_minus.is_none() || decay_plus.is_none(),
        mismatch: roots.is_empty() && decay_plus.is_some() && profile.eventually_monotone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSequence {
    pub c_critical: f64,
    pub speeds: Vec<f64>,
    pub profiles: Vec<Profile>,
    pub converged: Vec<bool>,
    /// Sup distance between consecutive pinned profiles.
    pub drift: Vec<f64>,
}

/// Fronts at `c_j = c + 1/j` approaching the critical speed `c = 2 sqrt(G(0))`.
pub fn critical_speed_sequence(params: &WaveParams, js: &[u32]) -> Result<SpeedSequence> {
    params.validate()?;
    require(!js.is_empty() && js.iter().all(|&j| j > 0), || "indices j must be positive".into())?;
    let c_critical = 2.0 * params.growth.g0().sqrt();
    let speeds: Vec<f64> = js.iter().map(|&j| c_critical + 1.0 / j as f64).collect();
    let runs: Vec<_> = speeds
        .par_iter()
        .map(|&c| {
            let p = WaveParams { c, ..params.clone() };
            let cfg = IterationConfig::default_for(&p)?;
            iterate_a(&cfg, &p, None)
        })
        .collect::<Result<_>>()?;
    let drift = runs.windows(2).map(|w| w[1].profile.sup_distance(&w[0].profile)).collect();
    Ok(SpeedSequence {
        c_critical,
        speeds,
        converged: runs.iter().map(|r| r.converged).collect(),
        profiles: runs.into_iter().map(|r| r.profile).collect(),
        drift,
    })
}
