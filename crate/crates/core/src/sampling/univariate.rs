//! Inverse-CDF sampling from `|phi_k|^2 dmu_1`.

use crate::basis::{PolynomialFamily, RecurrenceTable};
use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 4096;

/// Gauss-Legendre nodes and weights on [-1, 1], 8 points.
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Tabulated CDF of `|phi_k(y)|^2` times the family density, inverted by monotone
/// piecewise-cubic (PCHIP) interpolation.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    /// Strictly increasing CDF knots, from 0 to 1.
    cdf: Vec<f64>,
    /// Abscissae at the knots.
    x: Vec<f64>,
    /// PCHIP slopes `dx/dF` at the knots.
    slopes: Vec<f64>,
}

impl InverseCdf {
    pub fn new(family: PolynomialFamily, degree: usize) -> Result<Self> {
        let grid = grid(family, degree);
        let table = RecurrenceTable::new(family, degree);
        let mut phi = vec![0.0; degree + 1];
        let mut density = |y: f64| -> f64 {
            table.fill(y, &mut phi);
            let p = phi[degree];
            p * p * family.density(y).unwrap_or(0.0)
        };
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let cell: f64 = GL_NODES
                .iter()
                .zip(GL_WEIGHTS)
                .map(|(t, wt)| wt * density(mid + half * t))
                .sum::<f64>()
                * half;
            if !(cell >= 0.0) || !cell.is_finite() {
                return Err(Error::TabulationFailure {
                    degree,
                    reason: format!("cell mass {cell} on [{a}, {b}]"),
                });
            }
            acc += cell;
            cdf.push(acc);
        }
        if (acc - 1.0).abs() > 1e-8 {
            return Err(Error::TabulationFailure {
                degree,
                reason: format!("total mass {acc}"),
            });
        }
        // Keep strictly increasing knots; flat stretches carry no probability.
        let mut knots_f = Vec::with_capacity(cdf.len());
        let mut knots_x = Vec::with_capacity(cdf.len());
        for (f, x) in cdf.iter().zip(&grid) {
            let f = f / acc;
            if knots_f.last().is_none_or(|last| f > *last) {
                knots_f.push(f);
                knots_x.push(*x);
            }
        }
        *knots_f.last_mut().expect("non-empty grid") = 1.0;
        if knots_f.len() < 2 {
            return Err(Error::TabulationFailure {
                degree,
                reason: "degenerate CDF".into(),
            });
        }
        let slopes = pchip_slopes(&knots_f, &knots_x);
        Ok(InverseCdf {
            cdf: knots_f,
            x: knots_x,
            slopes,
        })
    }

    /// Quantile at `u` in [0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let u = u.clamp(0.0, 1.0);
        let i = match self.cdf.partition_point(|f| *f <= u) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let h = f1 - f0;
        let t = (u - f0) / h;
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * d1
    }

    /// Exact inverse of [`InverseCdf::quantile`].
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return 0.0;
        }
        if x >= self.x[n - 1] {
            return 1.0;
        }
        let i = self.x.partition_point(|v| *v <= x) - 1;
        // the Hermite segment is monotone in u, so bisect on it
        let (mut lo, mut hi) = (self.cdf[i], self.cdf[i + 1]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.quantile(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn grid(family: PolynomialFamily, degree: usize) -> Vec<f64> {
    let n = GRID_POINTS;
    match family {
        PolynomialFamily::Hermite => {
            // The largest zero of H_k is below sqrt(4k + 2); Gaussian decay past it.
            let half = 9.0 + 2.0 * (degree as f64).sqrt();
            (0..n)
                .map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
                .collect()
        }
        PolynomialFamily::Jacobi { .. } => (0..n)
            .map(|i| -(std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .map(|v: f64| v.clamp(-1.0, 1.0))
            .collect(),
    }
}

/// Fritsch-Carlson monotone slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Inverse-CDF tables for degrees `0..=max_degree` of one family, built once.
#[derive(Debug, Clone)]
pub struct SamplerTables {
    family: PolynomialFamily,
    tables: Vec<InverseCdf>,
}

impl SamplerTables {
    pub fn new(family: PolynomialFamily, max_degree: usize) -> Result<Self> {
        use rayon::prelude::*;
        let tables = (0..=max_degree)
            .into_par_iter()
            .map(|k| InverseCdf::new(family, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplerTables { family, tables })
    }

    pub fn family(&self) -> PolynomialFamily {
        self.family
    }

    pub fn max_degree(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn table(&self, degree: usize) -> &InverseCdf {
        &self.tables[degree]
    }
}

/// One draw from `|phi_k|^2 dmu_1` using the uniform variate `u`.
pub fn univariate_sample(family: PolynomialFamily, degree: usize, u: f64) -> Result<f64> {
    if degree > crate::basis::DEFAULT_MAX_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree,
            max: crate::basis::DEFAULT_MAX_DEGREE,
        });
    }
    Ok(InverseCdf::new(family, degree)?.quantile(u))
}
