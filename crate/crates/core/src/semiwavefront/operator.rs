use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::g_beta;
use crate::error::{require, Result};
use crate::models::{EffectiveKernel, GrowthModel, Table, WaveParams};
use crate::numerics::slaved::exp_cell_weights;
use crate::numerics::{find_root, Grid};
use crate::spectral::{kpp_roots, shifted_roots};

/// Below this many weights the convolution is summed directly.
const DIRECT_MAX: usize = 64;

enum Convolver {
    Identity,
    /// `phi(t - offset h)`, linear between nodes.
    Shift { offset: f64 },
    Direct { j_lo: isize, w: Vec<f64> },
    Fft { j_lo: isize, j_hi: isize, spectrum: Vec<Complex<f64>>, fwd: Arc<dyn Fft<f64>>, inv: Arc<dyn Fft<f64>> },
}

/// Weights `w_j = \int N(s) hat_j(s) ds` of the hat functions on `j h`; the
/// convolution of `N` with the piecewise-linear interpolant of the samples.
fn hat_weights(table: &Table, h: f64) -> (isize, Vec<f64>) {
    let (lo, hi) = table.support();
    let j_lo = (lo / h).floor() as isize;
    let j_hi = (hi / h).ceil() as isize;
    let mut w = vec![0.0; (j_hi - j_lo + 1) as usize];
    for k in 0..table.s.len() - 1 {
        let (a, b) = (table.s[k], table.s[k + 1]);
        for cell in (a / h).floor() as isize..(b / h).ceil() as isize {
            let (u, v) = (a.max(cell as f64 * h), b.min((cell + 1) as f64 * h));
            if v <= u {
                continue;
            }
            // both factors linear on [u, v]: Simpson is exact
            let m = 0.5 * (u + v);
            let up = |s: f64| s / h - cell as f64;
            let n = |s: f64| table.density_at(s.clamp(a, b));
            let simpson = |f: &dyn Fn(f64) -> f64| (v - u) / 6.0 * (f(u) + 4.0 * f(m) + f(v));
            w[(cell - j_lo) as usize] += simpson(&|s| n(s) * (1.0 - up(s)));
            w[(cell + 1 - j_lo) as usize] += simpson(&|s| n(s) * up(s));
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    (j_lo, w)
}

/// Discretized `A`: `(1/z12)[\int_{-inf}^t e^{z1(t-s)} r ds + \int_t^inf e^{z2(t-s)} r ds]`,
/// `r(phi) = b phi + g_beta(phi) G(N_c * phi)`.
///
/// The Green integrals are exact for piecewise-linear `r`. Left of the grid `r`
/// and `phi` continue as `e^{lambda_h t}`, with `lambda_h` the root of the
/// discrete symbol next to `lambda(c)`; right of it they stay frozen.
pub struct Operator {
    pub grid: Grid,
    pub c: f64,
    pub b: f64,
    pub beta: f64,
    pub z1: f64,
    pub z2: f64,
    /// Discrete counterpart of `lambda(c)`.
    pub lambda: f64,
    growth: GrowthModel,
    conv: Convolver,
    w1: (f64, f64),
    w2: (f64, f64),
}

impl Operator {
    pub fn new(params: &WaveParams, nc: &EffectiveKernel, b: f64, beta: f64, grid: Grid) -> Result<Self> {
        require(b > 0.0, || format!("b must be positive, got {b}"))?;
        require(beta > 1.0, || format!("beta must exceed 1, got {beta}"))?;
        let (z1, z2) = shifted_roots(params.c, b);
        let h = grid.dt;
        let conv = match nc {
            EffectiveKernel::PointMass { at } if *at == 0.0 => Convolver::Identity,
            EffectiveKernel::PointMass { at } => Convolver::Shift { offset: at / h },
            EffectiveKernel::Density(t) => {
                let (j_lo, w) = hat_weights(t, h);
                if w.len() <= DIRECT_MAX {
                    Convolver::Direct { j_lo, w }
                } else {
                    let j_hi = j_lo + w.len() as isize - 1;
                    let len = (grid.n + 2 * w.len()).next_power_of_two();
                    let mut planner = FftPlanner::new();
                    let (fwd, inv) = (planner.plan_fft_forward(len), planner.plan_fft_inverse(len));
                    let mut spectrum = vec![Complex::new(0.0, 0.0); len];
                    for (k, &x) in w.iter().enumerate() {
                        spectrum[k].re = x / len as f64;
                    }
                    fwd.process(&mut spectrum);
                    Convolver::Fft { j_lo, j_hi, spectrum, fwd, inv }
                }
            }
        };
        let mut op = Operator {
            grid,
            c: params.c,
            b,
            beta,
            z1,
            z2,
            lambda: 0.0,
            growth: params.growth,
            conv,
            w1: exp_cell_weights(-z1, h),
            w2: exp_cell_weights(z2, h),
        };
        op.lambda = op.discrete_rates(params.growth.g0())?.0;
        Ok(op)
    }

    /// `I_1` per unit `r = e^{z t}` on the infinite grid, `z > z1`.
    fn left_sum(&self, z: f64) -> f64 {
        let (k1, h) = (-self.z1, self.grid.dt);
        (self.w1.0 + self.w1.1 * (-z * h).exp()) / (k1 * (1.0 - (-(k1 + z) * h).exp()))
    }

    /// `I_2` per unit `r = e^{z t}` on the infinite grid, `z < z2`.
    fn right_sum(&self, z: f64) -> f64 {
        let (k2, h) = (self.z2, self.grid.dt);
        (self.w2.0 + self.w2.1 * (z * h).exp()) / (k2 * (1.0 - ((z - k2) * h).exp()))
    }

    /// Discrete Green symbol: the scheme maps `r = e^{z t}` to `symbol(z) e^{z t}`.
    /// Tends to `1/(b + c z - z^2)` as the step shrinks.
    pub fn symbol(&self, z: f64) -> f64 {
        (self.left_sum(z) + self.right_sum(z)) / (self.z2 - self.z1)
    }

    /// Discrete counterparts of `lambda < mu`, roots of `(b + G0) symbol = 1`, and of
    /// `rho < 0`, root of `(b - G0) symbol = 1`.
    pub fn discrete_rates(&self, g0: f64) -> Result<(f64, f64, f64)> {
        let (lambda, mu) = kpp_roots(self.c, g0)?;
        let rho = 0.5 * (self.c - (self.c * self.c + 4.0 * g0).sqrt());
        let up = |z: f64| (self.b + g0) * self.symbol(z) - 1.0;
        let down = |z: f64| (self.b - g0) * self.symbol(z) - 1.0;
        let w = 0.45 * (mu - lambda);
        let lh = find_root(up, lambda - w, lambda + w, 1e-15)?;
        let mh = if mu - lambda > 1e-9 * mu { find_root(up, mu - w, mu + w, 1e-15)? } else { lh };
        let rh = find_root(down, 1.2 * rho, 0.8 * rho, 1e-15)?;
        Ok((lh, mh, rh))
    }

    fn extended(&self, phi: &[f64], k: isize) -> f64 {
        let n = phi.len() as isize;
        if k < 0 {
            phi[0] * (self.lambda * self.grid.dt * k as f64).exp()
        } else if k >= n {
            phi[(n - 1) as usize]
        } else {
            phi[k as usize]
        }
    }

    /// `(N_c * phi)` at the nodes.
    pub fn convolve(&self, phi: &[f64], out: &mut [f64]) {
        match &self.conv {
            Convolver::Identity => out.copy_from_slice(phi),
            Convolver::Shift { offset } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let x = i as f64 - offset;
                    let k = x.floor();
                    let w = x - k;
                    let k = k as isize;
                    *o = (1.0 - w) * self.extended(phi, k) + w * self.extended(phi, k + 1);
                }
            }
            Convolver::Direct { j_lo, w } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = w.iter().enumerate().map(|(q, &wq)| wq * self.extended(phi, i as isize - q as isize - j_lo)).sum();
                }
            }
            Convolver::Fft { j_lo, j_hi, spectrum, fwd, inv } => {
                let n = phi.len() as isize;
                let mut buf = vec![Complex::new(0.0, 0.0); spectrum.len()];
                // ext[e] = phi(e - j_hi) for e in 0..n + j_hi - j_lo
                for e in 0..(n + j_hi - j_lo) {
                    buf[e as usize].re = self.extended(phi, e - j_hi);
                }
                fwd.process(&mut buf);
                for (x, s) in buf.iter_mut().zip(spectrum) {
                    *x *= s;
                }
                inv.process(&mut buf);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = buf[i + (j_hi - j_lo) as usize].re;
                }
            }
        }
    }

    pub fn growth(&self) -> &GrowthModel {
        &self.growth
    }

    /// `r(phi)` at the nodes.
    pub fn source(&self, phi: &[f64], out: &mut [f64]) {
        self.convolve(phi, out);
        for (o, &p) in out.iter_mut().zip(phi) {
            *o = self.b * p + g_beta(p, self.beta) * self.growth.g(*o);
        }
    }

    /// Green part of `A` applied to sampled `r`.
    pub fn green(&self, r: &[f64], out: &mut [f64]) {
        let n = r.len();
        let (k1, k2) = (-self.z1, self.z2);
        let (d1, d2) = ((-k1 * self.grid.dt).exp(), (-k2 * self.grid.dt).exp());
        let z12 = self.z2 - self.z1;
        // left sweep into out
        let mut i1 = r[0] * self.left_sum(self.lambda);
        out[0] = i1;
        for i in 0..n - 1 {
            i1 = d1 * i1 + (self.w1.0 * r[i + 1] + self.w1.1 * r[i]) / k1;
            out[i + 1] = i1;
        }
        let mut i2 = r[n - 1] / k2;
        out[n - 1] = (out[n - 1] + i2) / z12;
        for i in (0..n - 1).rev() {
            i2 = d2 * i2 + (self.w2.0 * r[i] + self.w2.1 * r[i + 1]) / k2;
            out[i] = (out[i] + i2) / z12;
        }
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; phi.len()];
        self.source(phi, &mut r);
        let mut out = vec![0.0; phi.len()];
        self.green(&r, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GrowthModel, Kernel};
    use crate::semiwavefront::UpperSolution;
    use proptest::prelude::*;

    fn kpp(c: f64) -> WaveParams {
        WaveParams::new(GrowthModel::Kpp, Kernel::DiracSpatial { k1: None }, c).unwrap()
    }

    #[test]
    fn green_inverts_constants_and_exponentials() {
        let params = kpp(2.5);
        let grid = Grid::new(-30.0, 0.01, 4001).unwrap();
        let op = Operator::new(&params, &EffectiveKernel::PointMass { at: 0.0 }, 7.0, 1.5, grid).unwrap();
        // constant r: A-green gives r / b
        let mut out = vec![0.0; grid.n];
        op.green(&vec![7.0; grid.n], &mut out);
        assert!(out[2000..].iter().all(|v| (v - 1.0).abs() < 1e-12), "{:?}", &out[2000..2003]);
        assert!((op.symbol(0.0) - 1.0 / 7.0).abs() < 1e-14);
        // the discrete rates sit O(h^2) from the continuous ones
        let (lh, mh, rh) = op.discrete_rates(1.0).unwrap();
        let (l, m) = kpp_roots(2.5, 1.0).unwrap();
        let rho = 0.5 * (2.5 - (6.25f64 + 4.0).sqrt());
        assert!(lh > l && (lh - l) < 5e-4 && (mh - m).abs() < 5e-4 && (rh - rho).abs() < 5e-4, "{lh} {mh} {rh}");
        // e^{lambda_h t} is reproduced exactly up to the frozen right closure
        let r: Vec<f64> = grid.nodes().map(|t| 8.0 * (lh * t).exp()).collect();
        op.green(&r, &mut out);
        for (i, t) in grid.nodes().enumerate().take(3000) {
            let want = (lh * t).exp();
            assert!((out[i] - want).abs() < 1e-12 * want, "t {t}: {} vs {want}", out[i]);
        }
    }

    #[test]
    fn convolutions_agree_with_quadrature() {
        let grid = Grid::new(-20.0, 0.01, 4001).unwrap();
        let phi: Vec<f64> = grid.nodes().map(|t| 1.0 / (1.0 + (-0.5 * t).exp())).collect();
        let params = WaveParams::new(GrowthModel::Kpp, Kernel::WeakGeneric { tau: 1.0 }, 2.5).unwrap();
        let nc = params.effective_kernel().unwrap();
        let op = Operator::new(&params, &nc, 7.0, 1.5, grid).unwrap();
        let mut out = vec![0.0; grid.n];
        op.convolve(&phi, &mut out);
        let EffectiveKernel::Density(t) = &nc else { panic!() };
        let f = |x: f64| 1.0 / (1.0 + (-0.5 * x).exp());
        for &i in &[1000usize, 2000, 3000] {
            let x = grid.node(i);
            let q = crate::numerics::quad_adaptive(|s| t.density_at(s) * f(x - s), crate::numerics::Domain::Finite(t.s[0], t.s[t.s.len() - 1]), 1e-7).unwrap();
            assert!((out[i] - q).abs() < 1e-5, "t {x}: {} vs {q}", out[i]);
        }
        // delay shift by c tau = 2.5 nodes-exact
        let params = WaveParams::new(GrowthModel::Kpp, Kernel::DiscreteDelay { tau: 1.0 }, 2.5).unwrap();
        let op = Operator::new(&params, &params.effective_kernel().unwrap(), 7.0, 1.5, grid).unwrap();
        op.convolve(&phi, &mut out);
        assert!((out[2000] - phi[1750]).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn a_is_monotone_for_local_kernels(seed in 0u64..1000, c in 2.1f64..4.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let params = kpp(c);
            let beta = 1.5;
            let upper = UpperSolution::new(c, 1.0, beta).unwrap();
            let grid = Grid::new(upper.t_beta - 40.0, 0.02, 3001).unwrap();
            // 2 (G0 - min_{[0, 2 beta]} G) + 1
            let b = 7.0;
            let op = Operator::new(&params, &EffectiveKernel::PointMass { at: 0.0 }, b, beta, grid).unwrap();
            let hi = upper.sample(&grid);
            // random smooth weights 0 <= s1 <= s2 <= 1
            let (a1, a2, f1, f2) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0));
            let mut lo_f = Vec::with_capacity(grid.n);
            let mut hi_f = Vec::with_capacity(grid.n);
            for (i, t) in grid.nodes().enumerate() {
                let s1 = 0.5 * (1.0 + (f1 * t + a1 * 6.0).sin()) * 0.5;
                let s2 = s1 + (1.0 - s1) * 0.5 * (1.0 + (f2 * t + a2 * 6.0).cos());
                lo_f.push(s1 * hi[i]);
                hi_f.push(s2 * hi[i]);
            }
            let (x, y) = (op.apply(&lo_f), op.apply(&hi_f));
            for i in 0..grid.n {
                prop_assert!(x[i] <= y[i] + 1e-12 * y[i].abs().max(1.0), "node {}: {} > {}", i, x[i], y[i]);
            }
        }
    }
}
