use serde::{Deserialize, Serialize};

use crate::error::{require, Result};

pub type Mat2 = [[f64; 2]; 2];

/// `phi' = phi (1 - psi)/(1 + gamma psi)`, `psi' = (phi - psi)/tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarFlow {
    pub gamma: f64,
    pub tau: f64,
}

pub fn flow_field(gamma: f64, tau: f64) -> Result<PlanarFlow> {
    require(gamma >= 0.0 && gamma.is_finite(), || format!("gamma must be >= 0, got {gamma}"))?;
    require(tau > 0.0 && tau.is_finite(), || format!("tau must be > 0, got {tau}"))?;
    Ok(PlanarFlow { gamma, tau })
}

impl PlanarFlow {
    pub fn eval(&self, phi: f64, psi: f64) -> [f64; 2] {
        [phi * (1.0 - psi) / (1.0 + self.gamma * psi), (phi - psi) / self.tau]
    }

    pub fn field(&self) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        move |_, y, dy| {
            let v = self.eval(y[0], y[1]);
            dy[0] = v[0];
            dy[1] = v[1];
        }
    }

    pub fn jacobian_origin(&self) -> Mat2 {
        [[1.0, 0.0], [1.0 / self.tau, -1.0 / self.tau]]
    }

    pub fn jacobian_positive(&self) -> Mat2 {
        [[0.0, -1.0 / (1.0 + self.gamma)], [1.0 / self.tau, -1.0 / self.tau]]
    }

    /// `tau <= (1 + gamma)/4`.
    pub fn is_node(&self) -> bool {
        self.tau <= 0.25 * (1.0 + self.gamma)
    }
}

/// `(trace, det)` so the characteristic polynomial is `z^2 - trace z + det`.
pub fn char_poly(m: &Mat2) -> (f64, f64) {
    (m[0][0] + m[1][1], m[0][0] * m[1][1] - m[0][1] * m[1][0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDirections {
    /// Slow entry direction at `(1, 1)`; absent for a focus.
    pub n1: Option<[f64; 2]>,
    /// Exceptional (fast) entry direction.
    pub n2: Option<[f64; 2]>,
    /// Unit unstable direction at the origin, along `(1 + tau, 1)`.
    pub unstable_origin: [f64; 2],
    pub focus: bool,
}

pub fn eigen_directions(gamma: f64, tau: f64) -> Result<EigenDirections> {
    flow_field(gamma, tau)?;
    let s = (1.0 + gamma) / (2.0 * tau);
    let disc = s * s - (1.0 + gamma) / tau;
    let norm = (1.0 + tau).hypot(1.0);
    let unstable_origin = [(1.0 + tau) / norm, 1.0 / norm];
    if disc < 0.0 {
        return Ok(EigenDirections { n1: None, n2: None, unstable_origin, focus: true });
    }
    let r = disc.sqrt();
    Ok(EigenDirections { n1: Some([1.0, s - r]), n2: Some([1.0, s + r]), unstable_origin, focus: false })
}

/// `x - ln(1 + x)`, accurate near 0.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let mut acc = 0.0;
        let mut p = x * x;
        for k in 2..9 {
            acc += if k % 2 == 0 { p } else { -p } / k as f64;
            p *= x;
        }
        acc
    } else {
        x - x.ln_1p()
    }
}

/// Lyapunov function `V` and its derivative along the flow.
pub fn lyapunov_v(gamma: f64, tau: f64, phi: f64, psi: f64) -> (f64, f64) {
    let first = x_minus_log1p(phi - 1.0);
    // tau \int_1^psi (y - 1)/(1 + gamma y) dy = tau (1+gamma)/gamma^2 (x - ln(1+x)), x = gamma (psi-1)/(1+gamma)
    let u = (psi - 1.0) / (1.0 + gamma);
    let second = if gamma == 0.0 {
        0.5 * (psi - 1.0) * (psi - 1.0)
    } else {
        let x = gamma * u;
        if x.abs() < 1e-3 {
            // divide the series by x^2 to avoid 0/0 as gamma -> 0
            let mut acc = 0.0;
            let mut p = 1.0;
            for k in 2..9 {
                acc += if k % 2 == 0 { p } else { -p } / k as f64;
                p *= x;
            }
            (1.0 + gamma) * u * u * acc
        } else {
            (1.0 + gamma) / (gamma * gamma) * x_minus_log1p(x)
        }
    };
    let vdot = -(psi - 1.0) * (psi - 1.0) / (1.0 + gamma * psi);
    (first + tau * second, vdot)
}

/// Normal component of the field across the half-line
/// `psi = s (phi - 1) + 1`, `s = (1 + gamma)/(2 tau)`, at `phi`.
/// Non-positive values mean no crossing from right to left.
pub fn half_line_flux(gamma: f64, tau: f64, phi: f64) -> f64 {
    let s = (1.0 + gamma) / (2.0 * tau);
    let psi = s * (phi - 1.0) + 1.0;
    let f = PlanarFlow { gamma, tau }.eval(phi, psi);
    // L = psi - s (phi - 1) - 1 grows to the left of the line
    f[1] - s * f[0]
}

/// `P` with `J^T P + P J = -I` for a Hurwitz `J`.
pub fn lyapunov_matrix(j: &Mat2) -> Mat2 {
    let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
    // unknowns p11, p12, p22
    let m = [[2.0 * a, 2.0 * c, 0.0], [b, a + d, c], [0.0, 2.0 * b, 2.0 * d]];
    let rhs = [-1.0, 0.0, -1.0];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let dm = det3(&m);
    let mut sol = [0.0; 3];
    for (k, s) in sol.iter_mut().enumerate() {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = rhs[r];
        }
        *s = det3(&mk) / dm;
    }
    [[sol[0], sol[1]], [sol[1], sol[2]]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibria_and_char_polys() {
        let f = flow_field(40.0, 10.0).unwrap();
        assert_eq!(f.eval(1.0, 1.0), [0.0, 0.0]);
        let (tr, det) = char_poly(&f.jacobian_origin());
        // z^2 - (1 - 1/tau) z - 1/tau
        assert!((tr - 0.9).abs() < 1e-15 && (det + 0.1).abs() < 1e-15);
        let (tr, det) = char_poly(&f.jacobian_positive());
        // z^2 + z/tau + 1/(tau (1 + gamma))
        assert!((tr + 0.1).abs() < 1e-15 && (det - 1.0 / 410.0).abs() < 1e-15);
    }

    #[test]
    fn directions() {
        let e = eigen_directions(40.0, 10.0).unwrap();
        let d = 0.1025f64.sqrt();
        assert!((e.n1.unwrap()[1] - (2.05 - d)).abs() < 1e-14);
        assert!((e.n2.unwrap()[1] - (2.05 + d)).abs() < 1e-14);
        assert!((e.n1.unwrap()[1] - 1.7298).abs() < 1e-4 && (e.n2.unwrap()[1] - 2.3702).abs() < 1e-4);
        assert!((e.unstable_origin[0] / e.unstable_origin[1] - 11.0).abs() < 1e-12);
        assert!(eigen_directions(40.0, 11.0).unwrap().focus);
        // n1 is an eigenvector of the positive-equilibrium Jacobian
        let j = flow_field(40.0, 10.0).unwrap().jacobian_positive();
        let n = e.n1.unwrap();
        let jn = [j[0][0] * n[0] + j[0][1] * n[1], j[1][0] * n[0] + j[1][1] * n[1]];
        assert!((jn[0] * n[1] - jn[1] * n[0]).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(lyapunov_v(3.0, 2.0, 1.0, 1.0), (0.0, 0.0));
        let (v, vd) = lyapunov_v(3.0, 2.0, 2.0, 1.0);
        assert!((v - (1.0 - 2f64.ln())).abs() < 1e-15 && vd == 0.0);
        // second term against quadrature of (y - 1)/(1 + gamma y)
        for &(g, psi) in &[(3.0, 0.2), (40.0, 1.7), (1e-9, 0.5), (0.0, 2.5), (5.0, 1.0001)] {
            let q = crate::numerics::quad_adaptive(
                |y: f64| (y - 1.0) / (1.0 + g * y),
                crate::numerics::Domain::Finite(1.0, psi),
                1e-14,
            )
            .unwrap();
            let (v, _) = lyapunov_v(g, 1.0, 1.0, psi);
            assert!((v - q).abs() < 1e-12 * (1.0 + q.abs()), "gamma {g} psi {psi}: {v} vs {q}");
        }
    }

    #[test]
    fn lyapunov_matrix_solves_equation() {
        let j = flow_field(40.0, 10.0).unwrap().jacobian_positive();
        let p = lyapunov_matrix(&j);
        for r in 0..2 {
            for c in 0..2 {
                let v: f64 = (0..2).map(|k| j[k][r] * p[k][c] + p[r][k] * j[k][c]).sum();
                let want = if r == c { -1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn half_line_is_not_crossed_leftward() {
        for &(g, t) in &[(40.0, 10.0), (9.0, 2.0), (2.0, 0.7)] {
            for k in 1..200 {
                let phi = 1.0 + 0.05 * k as f64;
                assert!(half_line_flux(g, t, phi) <= 0.0, "gamma {g} tau {t} phi {phi}");
            }
        }
    }
}
