//! Small numerical helpers shared across modules.

use std::f64::consts::PI;

/// Deterministic blocked pairwise summation.
pub fn pairwise_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    const BLOCK: usize = 64;
    let mut partial: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    let mut count = 0;
    for v in values {
        acc += v;
        count += 1;
        if count == BLOCK {
            partial.push(acc);
            acc = 0.0;
            count = 0;
        }
    }
    if count > 0 || partial.is_empty() {
        partial.push(acc);
    }
    while partial.len() > 1 {
        partial = partial
            .chunks(2)
            .map(|c| c.iter().sum())
            .collect();
    }
    partial[0]
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| (mid + half * xi, half * wi))
        .collect()
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
