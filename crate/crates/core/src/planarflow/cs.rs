use super::flow::flow_field;
use super::heteroclinic::{heteroclinic, HeteroclinicResult, SAMPLE_DT};
use crate::error::{require, Error, Result};
use crate::numerics::slaved::SlavedSystem;
use crate::numerics::Grid;
use crate::profile::{Profile, ShapeClass};

/// Launch amplitude of `phi`.
const LAUNCH: f64 = 1e-6;
/// Distance to `(1, 1)` at which the finite-speed march stops.
const CS_CAPTURE: f64 = 1e-7;

/// Profile of `eps phi'' - phi' + phi G(psi) = 0`, `eps psi'' - psi' + (phi - psi)/tau = 0`
/// with `eps = c^{-2}`, connecting 0 to 1.
///
/// Slow variables are `ln phi` and `psi`; the fast ones are `w = (ln phi)'`
/// and `chi = psi' - z_- psi`, both slaved to their bounded forward solutions.
pub fn cs_profile(gamma: f64, tau: f64, eps: f64, tol: f64) -> Result<HeteroclinicResult> {
    flow_field(gamma, tau)?;
    require(eps >= 0.0 && eps <= 0.25, || format!("eps must lie in [0, 1/4] (c >= 2), got {eps}"))?;
    require(tol > 0.0, || "tolerance must be positive".into())?;
    if eps == 0.0 {
        return heteroclinic(gamma, tau, LAUNCH, tol);
    }
    let root = (1.0 + 4.0 * eps / tau).sqrt();
    let (zp, zm) = ((1.0 + root) / (2.0 * eps), (1.0 - root) / (2.0 * eps));
    // minimal-speed-side rate of the origin, G(0) = 1
    let lambda = (1.0 - (1.0 - 4.0 * eps).sqrt()) / (2.0 * eps);
    let g = move |psi: f64| (1.0 - psi) / (1.0 + gamma * psi);

    let l0 = LAUNCH.ln();
    let history = move |t: f64, out: &mut [f64]| {
        out[0] = l0 + lambda * t;
        out[1] = (l0 + lambda * t).exp() / (1.0 + tau);
    };
    let source = move |s: &[f64], f: &[f64], _: &[f64], q: &mut [f64]| {
        q[0] = g(s[1]) + eps * f[0] * f[0];
        q[1] = s[0].exp() / (eps * tau * zp);
    };
    let slow_rhs = move |s: &[f64], f: &[f64], out: &mut [f64]| {
        out[0] = f[0];
        out[1] = zm * s[1] + f[1];
    };
    let h = (0.25 * eps).min(0.01);
    let stride = ((SAMPLE_DT / h).round() as usize).max(1);
    let t_max = 400.0 * (1.0 + tau);
    let n_max = (t_max / h).ceil() as usize;
    let sys = SlavedSystem {
        h,
        ns: 2,
        rates: vec![1.0 / eps, zp],
        lag_nodes: 0,
        history: &history,
        source: &source,
        slow_rhs: &slow_rhs,
        tol: tol.max(1e-14),
    };
    let mut captured = false;
    let run = sys.march(0.0, n_max, |_, s| {
        if !(s[0].is_finite() && s[1].abs() < 1e3 && s[0] < 10.0) {
            return false;
        }
        if (s[0].exp() - 1.0).hypot(s[1] - 1.0) < CS_CAPTURE {
            captured = true;
            return false;
        }
        true
    })?;
    let last = run.slow_at(run.len() - 1);
    if !(last[0] < 10.0 && last[1].abs() < 1e3) {
        return Err(Error::StiffShooting(format!("trajectory left the box at t = {}", run.time(run.len() - 1))));
    }

    let idx: Vec<usize> = (0..run.len()).step_by(stride).collect();
    let grid = Grid::new(0.0, h * stride as f64, idx.len())?;
    let phi: Vec<f64> = idx.iter().map(|&k| run.slow_at(k)[0].exp()).collect();
    let psi: Vec<f64> = idx.iter().map(|&k| run.slow_at(k)[1]).collect();
    let phi_max = (0..run.len()).map(|k| run.slow_at(k)[0].exp()).fold(f64::NEG_INFINITY, f64::max);
    let floor = 0.1 * CS_CAPTURE;
    let mut profile = Profile::from_samples(grid, phi, None, floor)?;
    let mut psi_profile = Profile::from_samples(grid, psi, None, floor)?;
    profile.sup = profile.sup.max(phi_max);
    let shape = ShapeClass::from_crossings(profile.crossings.len(), phi_max);
    profile.shape = shape;
    profile.unresolved_tail |= !captured;
    psi_profile.unresolved_tail |= !captured;

    let n = run.len();
    let k95 = (0.95 * (n - 1) as f64) as usize;
    let (a, b) = (run.slow_at(k95), run.slow_at(n - 1));
    let chord = [b[0].exp() - a[0].exp(), b[1] - a[1]];
    let len = chord[0].hypot(chord[1]);
    let entry_direction = if len > 0.0 { [chord[0] / len, chord[1] / len] } else { [0.0, 0.0] };

    let shift = profile.first_crossing(0.5).unwrap_or(0.0);
    let crossings_of_one = profile.crossings.iter().map(|t| t - shift).collect();
    Ok(HeteroclinicResult {
        profile: profile.shifted(shift),
        psi_profile: psi_profile.shifted(shift),
        shape,
        phi_max,
        entry_direction,
        crossings_of_one,
        captured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_eps_delegates() {
        let a = cs_profile(9.0, 3.0, 0.0, 1e-9).unwrap();
        let b = heteroclinic(9.0, 3.0, LAUNCH, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_subcritical_speed() {
        assert!(cs_profile(9.0, 3.0, 0.3, 1e-9).unwrap_err().is_precondition());
    }

    #[test]
    fn overshoot_persists_at_finite_speed() {
        let r = cs_profile(40.0, 10.0, 0.01, 1e-10).unwrap();
        assert_eq!(r.shape, ShapeClass::NonMonotoneNonOscillating);
        let planar = heteroclinic(40.0, 10.0, LAUNCH, 1e-10).unwrap();
        let d = r.profile.sup_distance(&planar.profile);
        assert!(d < 0.1, "{d}");
    }

    #[test]
    fn continuation_in_eps() {
        let planar = heteroclinic(9.0, 3.0, LAUNCH, 1e-10).unwrap();
        let d: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&e| cs_profile(9.0, 3.0, e, 1e-10).unwrap().profile.sup_distance(&planar.profile))
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }
}
