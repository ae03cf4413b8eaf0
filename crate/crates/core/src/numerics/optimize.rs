const SCAN: usize = 64;

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximize `f` on `[a, b]`: 64-point scan, then golden-section refinement
/// around the best scanned node. NaN values count as `-inf`.
pub fn maximize_scalar(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let f = |x: f64| finite_or_neg_inf(f(x));
    let xs: Vec<f64> = (0..SCAN).map(|i| a + (b - a) * i as f64 / (SCAN - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for i in 1..SCAN {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let mut lo = xs[best.saturating_sub(1)];
    let mut hi = xs[(best + 1).min(SCAN - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let tol = tol.max(f64::EPSILON * (a.abs() + b.abs()));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let (xr, fr) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if fr > vals[best] {
        (xr, fr)
    } else {
        (xs[best], vals[best])
    }
}
