//! Forward marching of fast-slow systems whose fast variables are unstable
//! forward in time.
//!
//! Every fast variable is the bounded solution
//! `f(t) = \int_t^inf kappa e^{-kappa (s - t)} q(s) ds`, i.e. `f' = kappa (f - q)`
//! with no exponentially growing component. On each block the fast variables
//! are recovered by an exact backward recursion (piecewise-linear `q`) over a
//! lookahead window started from the quasi-static value `f = q`; the start
//! error decays like `e^{-kappa * window}`. Slow variables are advanced by
//! Heun's method and the block is iterated to self-consistency.

use crate::error::{Error, Result};

/// Lookahead, in units of the slowest fast time scale `1/kappa`.
const LOOKAHEAD: f64 = 36.0;
const MAX_SWEEPS: usize = 200;

pub(crate) struct SlavedSystem<'a> {
    pub h: f64,
    pub ns: usize,
    /// Relaxation rates `kappa_i > 0` of the fast variables.
    pub rates: Vec<f64>,
    /// Lag in nodes (`0` for none); lagged slow states before the start come from `history`.
    pub lag_nodes: usize,
    pub history: &'a dyn Fn(f64, &mut [f64]),
    /// `q(slow, fast, lagged_slow, out)`
    pub source: &'a dyn Fn(&[f64], &[f64], &[f64], &mut [f64]),
    /// `slow' = rhs(slow, fast, out)`
    pub slow_rhs: &'a dyn Fn(&[f64], &[f64], &mut [f64]),
    /// Self-consistency tolerance on the slow variables.
    pub tol: f64,
}

pub(crate) struct SlavedRun {
    pub t0: f64,
    pub h: f64,
    pub ns: usize,
    pub slow: Vec<f64>,
    pub fast: Vec<f64>,
}

impl SlavedRun {
    pub fn len(&self) -> usize {
        self.slow.len() / self.ns
    }

    pub fn slow_at(&self, k: usize) -> &[f64] {
        &self.slow[k * self.ns..(k + 1) * self.ns]
    }

    #[cfg(test)]
    pub fn fast_at(&self, k: usize) -> &[f64] {
        let nf = self.fast.len() / self.len();
        &self.fast[k * nf..(k + 1) * nf]
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }
}

/// Weights `(near, far)` of `kappa \int_0^h e^{-kappa v} q(v) dv` for linear `q`.
pub(crate) fn exp_cell_weights(kappa: f64, h: f64) -> (f64, f64) {
    let x = kappa * h;
    let em = (-x).exp();
    // 1 - e^{-x}(1 + x), by series when x is small
    let g = if x < 1e-2 {
        let mut term = x * x / 2.0;
        let mut acc = 0.0;
        for n in 2..12 {
            acc += term * (n as f64 - 1.0);
            term *= -x / (n as f64 + 1.0);
        }
        acc
    } else {
        1.0 - em * (1.0 + x)
    };
    let total = -(-x).exp_m1();
    let far = g / x;
    (total - far, far)
}

impl<'a> SlavedSystem<'a> {
    /// March from `t0` while `keep_going(k, slow_k)` holds, up to `n_max` nodes.
    pub fn march(&self, t0: f64, n_max: usize, mut keep_going: impl FnMut(usize, &[f64]) -> bool) -> Result<SlavedRun> {
        let ns = self.ns;
        let nf = self.rates.len();
        let h = self.h;
        let kmin = self.rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let window = ((LOOKAHEAD / kmin) / h).ceil() as usize + 1;
        let block = window.max((0.5 / h).ceil() as usize);
        let decay: Vec<f64> = self.rates.iter().map(|&k| (-k * h).exp()).collect();
        let weights: Vec<(f64, f64)> = self.rates.iter().map(|&k| exp_cell_weights(k, h)).collect();

        let mut slow = vec![0.0; ns];
        (self.history)(t0, &mut slow);
        let mut run = SlavedRun { t0, h, ns, slow: slow.clone(), fast: Vec::new() };
        // guess for nodes ahead of the accepted part, relative to the block start
        let mut ahead: Vec<f64> = Vec::new();
        let mut lag = vec![0.0; ns];
        let mut q = vec![0.0; nf];
        let mut rhs0 = vec![0.0; ns];
        let mut rhs1 = vec![0.0; ns];
        let mut pred = vec![0.0; ns];

        let mut k0 = 0usize;
        loop {
            let n_win = block + window;
            // window slow states, index 0 = accepted node k0
            let mut ws = vec![0.0; (n_win + 1) * ns];
            ws[..ns].copy_from_slice(&run.slow[k0 * ns..(k0 + 1) * ns]);
            for j in 1..=n_win {
                let src: Vec<f64> = if j * ns <= ahead.len() {
                    ahead[(j - 1) * ns..j * ns].to_vec()
                } else {
                    ws[(j - 1) * ns..j * ns].to_vec()
                };
                ws[j * ns..(j + 1) * ns].copy_from_slice(&src);
            }
            let mut wf = vec![0.0; (n_win + 1) * nf];
            let mut converged = false;
            for _sweep in 0..MAX_SWEEPS {
                // lagged slow state for window node j
                let lagged = |j: usize, out: &mut [f64], ws: &[f64]| {
                    if self.lag_nodes == 0 {
                        out.copy_from_slice(&ws[j * ns..(j + 1) * ns]);
                        return;
                    }
                    let gk = (k0 + j) as isize - self.lag_nodes as isize;
                    if gk < 0 {
                        (self.history)(t0 + gk as f64 * h, out);
                    } else if (gk as usize) <= k0 {
                        let g = gk as usize;
                        out.copy_from_slice(&run.slow[g * ns..(g + 1) * ns]);
                    } else {
                        let jj = gk as usize - k0;
                        out.copy_from_slice(&ws[jj * ns..(jj + 1) * ns]);
                    }
                };
                // fast: quasi-static at the far end, then backward
                {
                    let j = n_win;
                    lagged(j, &mut lag, &ws);
                    let f = &mut wf[j * nf..(j + 1) * nf];
                    for _ in 0..30 {
                        (self.source)(&ws[j * ns..(j + 1) * ns], f, &lag, &mut q);
                        f.copy_from_slice(&q);
                    }
                }
                let mut q_far = vec![0.0; nf];
                {
                    let j = n_win;
                    lagged(j, &mut lag, &ws);
                    (self.source)(&ws[j * ns..(j + 1) * ns], &wf[j * nf..(j + 1) * nf], &lag, &mut q_far);
                }
                for j in (0..n_win).rev() {
                    lagged(j, &mut lag, &ws);
                    let (lo, hi) = wf.split_at_mut((j + 1) * nf);
                    let f_next = &hi[..nf];
                    let f = &mut lo[j * nf..];
                    f.copy_from_slice(f_next);
                    for _ in 0..4 {
                        (self.source)(&ws[j * ns..(j + 1) * ns], f, &lag, &mut q);
                        for i in 0..nf {
                            f[i] = decay[i] * f_next[i] + weights[i].0 * q[i] + weights[i].1 * q_far[i];
                        }
                    }
                    (self.source)(&ws[j * ns..(j + 1) * ns], f, &lag, &mut q);
                    q_far.copy_from_slice(&q);
                }
                // slow: Heun forward
                let mut diff = 0.0f64;
                for j in 0..n_win {
                    let s0 = ws[j * ns..(j + 1) * ns].to_vec();
                    (self.slow_rhs)(&s0, &wf[j * nf..(j + 1) * nf], &mut rhs0);
                    for i in 0..ns {
                        pred[i] = s0[i] + h * rhs0[i];
                    }
                    (self.slow_rhs)(&pred, &wf[(j + 1) * nf..(j + 2) * nf], &mut rhs1);
                    for i in 0..ns {
                        let v = s0[i] + 0.5 * h * (rhs0[i] + rhs1[i]);
                        if !v.is_finite() {
                            return Err(Error::StiffShooting(format!(
                                "non-finite slow state at t = {}",
                                run.time(k0 + j + 1)
                            )));
                        }
                        let old = ws[(j + 1) * ns + i];
                        if j < block {
                            diff = diff.max((v - old).abs() / (1.0 + v.abs()));
                        }
                        ws[(j + 1) * ns + i] = v;
                    }
                }
                if diff <= self.tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::StiffShooting(format!(
                    "block at t = {} did not reach self-consistency",
                    run.time(k0)
                )));
            }
            // accept fast at k0..k0+block-1 and slow at k0+1..=k0+block
            let mut stop = false;
            let mut accepted = 0;
            for j in 0..block {
                run.fast.extend_from_slice(&wf[j * nf..(j + 1) * nf]);
                run.slow.extend_from_slice(&ws[(j + 1) * ns..(j + 2) * ns]);
                accepted += 1;
                let k = k0 + j + 1;
                if k + 1 >= n_max || !keep_going(k, &ws[(j + 1) * ns..(j + 2) * ns]) {
                    stop = true;
                    run.fast.extend_from_slice(&wf[(j + 1) * nf..(j + 2) * nf]);
                    break;
                }
            }
            if stop {
                return Ok(run);
            }
            ahead = ws[(accepted + 1) * ns..].to_vec();
            k0 += accepted;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_weights_integrate_linear_functions() {
        for &(kappa, h) in &[(3.0, 0.1), (200.0, 0.001), (1e-3, 0.5), (50.0, 1.0)] {
            let (wn, wf) = exp_cell_weights(kappa, h);
            // q = 1
            let one = 1.0 - (-kappa * h).exp();
            assert!((wn + wf - one).abs() < 1e-14);
            let exact = crate::numerics::quad_adaptive(
                |v| kappa * (-kappa * v).exp() * v / h,
                crate::numerics::Domain::Finite(0.0, h),
                1e-15,
            )
            .unwrap();
            assert!((wf - exact).abs() < 1e-12 * exact, "kappa {kappa}, h {h}: {wf} vs {exact}");
        }
    }

    /// `eps y'' - y' + y = 0` has the slow mode `e^{lambda t}`; marching the
    /// Riccati form reproduces `lambda` even though the fast mode grows like `e^{t/eps}`.
    #[test]
    fn slow_mode_of_second_order_equation() {
        let eps = 0.01;
        let lambda = (1.0 - (1.0f64 - 4.0 * eps).sqrt()) / (2.0 * eps);
        let history = |t: f64, out: &mut [f64]| out[0] = lambda * t;
        let source = |_: &[f64], f: &[f64], _: &[f64], q: &mut [f64]| q[0] = 1.0 + eps * f[0] * f[0];
        let rhs = |_: &[f64], f: &[f64], out: &mut [f64]| out[0] = f[0];
        let sys = SlavedSystem {
            h: eps / 4.0,
            ns: 1,
            rates: vec![1.0 / eps],
            lag_nodes: 0,
            history: &history,
            source: &source,
            slow_rhs: &rhs,
            tol: 1e-13,
        };
        let run = sys.march(0.0, 2001, |_, _| true).unwrap();
        let k = run.len() - 1;
        let t = run.time(k);
        assert!((run.slow_at(k)[0] - lambda * t).abs() < 1e-6 * t);
        assert!((run.fast_at(10)[0] - lambda).abs() < 1e-9);
    }
}
