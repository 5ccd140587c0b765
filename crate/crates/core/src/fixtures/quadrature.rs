//! Gauss–Legendre rules for the one-dimensional chart inversions.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
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
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` with panels no
/// wider than `max_panel`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>), max_panel: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = ((b - a).abs() / max_panel).ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    let (nodes, weights) = rule;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * w;
        let mid = lo + 0.5 * w;
        let s: f64 = nodes.iter().zip(weights).map(|(x, wt)| wt * f(mid + 0.5 * w * x)).sum();
        total += 0.5 * w * s;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_integrate_polynomials() {
        let rule = gauss_legendre(12);
        assert!((rule.1.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let v = integrate(|x| x.powi(22), 0.0, 1.0, &rule, 1.0);
        assert!((v - 1.0 / 23.0).abs() < 1e-15);
        let e = integrate(f64::exp, 0.0, 2.0, &rule, 0.5);
        assert!((e - (2f64.exp() - 1.0)).abs() < 1e-13);
    }
}
