//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A probability rule: nodes and weights summing to one.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Composite Gauss-Legendre on `[a, b]` with `panels` pieces of `order` points.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Standard Gaussian measure, truncated to `[-half, half]`.
pub fn gaussian_rule(half: f64, panels: usize) -> Rule {
    let (nodes, w) = composite(-half, half, panels, 20);
    let weights = nodes
        .iter()
        .zip(&w)
        .map(|(x, w)| w * (-0.5 * x * x).exp() / (2.0 * PI).sqrt())
        .collect();
    Rule { nodes, weights }
}

/// Uniform probability measure on `[-1, 1]`.
pub fn uniform_rule(points: usize) -> Rule {
    let (nodes, w) = gauss_legendre(points);
    Rule {
        nodes,
        weights: w.iter().map(|w| 0.5 * w).collect(),
    }
}

/// `(1 - y)(1 + y)^{1/2} dy` normalized, through `y = t^2 - 1`, which makes the integrand
/// polynomial in `t`.
pub fn jacobi_one_half_rule(points: usize) -> Rule {
    let (ts, w) = composite(0.0, 2f64.sqrt(), 1, points);
    let raw: Vec<f64> = ts.iter().zip(&w).map(|(t, w)| w * (2.0 - t * t) * t * 2.0 * t).collect();
    let total: f64 = raw.iter().sum();
    Rule {
        nodes: ts.iter().map(|t| t * t - 1.0).collect(),
        weights: raw.iter().map(|r| r / total).collect(),
    }
}

/// Orthonormal probabilists' Hermite polynomials `0..=k` at `y`.
pub fn hermite_all(k: usize, y: f64) -> Vec<f64> {
    let mut out = vec![1.0; k + 1];
    if k >= 1 {
        out[1] = y;
    }
    for n in 1..k {
        out[n + 1] = (y * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
    out
}

/// Legendre polynomials orthonormal for `dy / 2` on `[-1, 1]`, degrees `0..=k`.
pub fn legendre_all(k: usize, y: f64) -> Vec<f64> {
    let mut p = vec![1.0; k + 1];
    if k >= 1 {
        p[1] = y;
    }
    for n in 1..k {
        p[n + 1] = ((2 * n + 1) as f64 * y * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
    }
    p.iter()
        .enumerate()
        .map(|(n, v)| v * ((2 * n + 1) as f64).sqrt())
        .collect()
}

pub fn gaussian_pdf(y: f64) -> f64 {
    (-0.5 * y * y).exp() / (2.0 * PI).sqrt()
}

/// CDF values at sorted points, integrating `density` from `lower` with 8-point panels of
/// width at most `max_step`.
pub fn cdf_at_sorted(sorted: &[f64], lower: f64, max_step: f64, density: impl Fn(f64) -> f64) -> Vec<f64> {
    let (x, w) = gauss_legendre(8);
    let mut acc = 0.0;
    let mut prev = lower;
    let mut out = Vec::with_capacity(sorted.len());
    for &s in sorted {
        if s > prev {
            let pieces = ((s - prev) / max_step).ceil().max(1.0) as usize;
            let h = (s - prev) / pieces as f64;
            for p in 0..pieces {
                let lo = prev + p as f64 * h;
                for (xi, wi) in x.iter().zip(&w) {
                    acc += 0.5 * h * wi * density(lo + 0.5 * h * (xi + 1.0));
                }
            }
            prev = s;
        }
        out.push(acc);
    }
    out
}

/// Kolmogorov-Smirnov distance of sorted samples from the CDF values at those samples.
pub fn ks_statistic(cdf: &[f64]) -> f64 {
    let n = cdf.len() as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &f)| ((i + 1) as f64 / n - f).max(f - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_62 / (n as f64).sqrt()
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
