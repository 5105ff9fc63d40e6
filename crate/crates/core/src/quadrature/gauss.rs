//! Gauss–Legendre rules on [−1, 1].

use std::sync::OnceLock;

use num_complex::Complex64;

/// Points per panel of the composite rules.
pub const ORDER: usize = 16;

/// Nodes and weights of the `n`-point rule, by Newton iteration on Pₙ.
pub fn rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n == 1 {
        (x[0], w[0]) = (0.0, 2.0);
    }
    (x, w)
}

/// The cached [`ORDER`]-point rule.
pub fn nodes_weights() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = RULE.get_or_init(|| rule(ORDER));
    (x, w)
}

/// Adaptive Gauss–Legendre on [a, b]: bisects until the 16-point value
/// and the sum over both halves agree to `tol` (absolute).
pub fn adaptive<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Complex64 {
    let whole = panel(f, a, b);
    adaptive_step(f, a, b, whole, tol, depth)
}

fn panel<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Complex64 {
    let (x, w) = nodes_weights();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter()
        .zip(w)
        .map(|(xi, wi)| f(mid + half * xi) * *wi)
        .sum::<Complex64>()
        * half
}

fn adaptive_step<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth: usize,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m);
    let right = panel(f, m, b);
    if depth == 0 || (left + right - whole).norm() <= tol {
        return left + right;
    }
    adaptive_step(f, a, m, left, 0.5 * tol, depth - 1) + adaptive_step(f, m, b, right, 0.5 * tol, depth - 1)
}
