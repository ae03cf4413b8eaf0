use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heteroclinic::tau_sharp;
use super::testfn::tau_star;

/// One point of the `(gamma, tau)` boundary curves; failed points are gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub gamma: f64,
    pub tau_sharp: Option<f64>,
    pub tau_star: Option<f64>,
    /// `(1 + gamma)/4`
    pub tau_upper: f64,
}

/// `tau_sharp` and `tau_star` over a gamma grid, in parallel, sorted by gamma.
pub fn boundary_region(gammas: &[f64], tol: f64) -> Vec<BoundaryRow> {
    let mut rows: Vec<BoundaryRow> = gammas
        .par_iter()
        .map(|&gamma| BoundaryRow {
            gamma,
            tau_sharp: tau_sharp(gamma, tol).ok(),
            tau_star: tau_star(gamma, tol).ok(),
            tau_upper: 0.25 * (1.0 + gamma),
        })
        .collect();
    rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    rows
}

pub fn boundary_region_csv(rows: &[BoundaryRow]) -> String {
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut s = String::from("gamma,tau_sharp,tau_star,tau_upper\n");
    for r in rows {
        s.push_str(&format!("{:.16e},{},{},{:.16e}\n", r.gamma, cell(r.tau_sharp), cell(r.tau_star), r.tau_upper));
    }
    s
}
