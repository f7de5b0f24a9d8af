//! Univariate orthonormal polynomial families and their tensor products.
//!
//! Both families are normalized against *probability* measures:
//!
//! * Hermite: the standard Gaussian `g(y) = exp(-y^2/2) / sqrt(2 pi)` (probabilists' convention),
//! * Jacobi: `delta_{a,b}(y) = c_{a,b} (1-y)^a (1+y)^b` on `[-1, 1]`.
//!
//! Evaluation uses the forward three-term recurrence written directly in terms of the
//! orthonormal polynomials,
//!
//! ```text
//! sqrt(beta_{k+1}) phi_{k+1}(y) = (y - alpha_k) phi_k(y) - sqrt(beta_k) phi_{k-1}(y),
//! ```
//!
//! where `alpha_k`, `beta_k` are the monic recurrence coefficients of the measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexing::MultiIndex;

/// Default cap on the degree accepted by [`PolynomialFamily::eval`].
pub const DEFAULT_MAX_DEGREE: usize = 200;
/// Default cap on the order accepted by [`PolynomialFamily::quadrature`].
pub const DEFAULT_MAX_ORDER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolynomialFamily {
    Hermite,
    Jacobi { a: f64, b: f64 },
}

impl PolynomialFamily {
    pub fn hermite() -> Self {
        PolynomialFamily::Hermite
    }

    pub fn jacobi(a: f64, b: f64) -> Result<Self> {
        if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Jacobi parameters must exceed -1, got a = {a}, b = {b}"
            )));
        }
        Ok(PolynomialFamily::Jacobi { a, b })
    }

    /// Uniform measure on `[-1, 1]`.
    pub fn legendre() -> Self {
        PolynomialFamily::Jacobi { a: 0.0, b: 0.0 }
    }

    /// Closed support interval, `None` for the whole real line.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            PolynomialFamily::Hermite => None,
            PolynomialFamily::Jacobi { .. } => Some((-1.0, 1.0)),
        }
    }

    /// Monic recurrence coefficients `(alpha_k, beta_k)`, with `beta_0 = 1` (the total mass).
    pub fn recurrence(&self, k: usize) -> (f64, f64) {
        match *self {
            PolynomialFamily::Hermite => (0.0, if k == 0 { 1.0 } else { k as f64 }),
            PolynomialFamily::Jacobi { a, b } => jacobi_recurrence(a, b, k),
        }
    }

    /// Orthonormal polynomial of the given degree at `y`, with the default degree cap.
    pub fn eval(&self, degree: usize, y: f64) -> Result<f64> {
        self.eval_with_max(degree, y, DEFAULT_MAX_DEGREE)
    }

    pub fn eval_with_max(&self, degree: usize, y: f64, max_degree: usize) -> Result<f64> {
        if degree > max_degree {
            return Err(Error::DegreeTooLarge {
                degree,
                max: max_degree,
            });
        }
        self.check_domain(y)?;
        let table = RecurrenceTable::new(*self, degree);
        let mut values = vec![0.0; degree + 1];
        table.fill(y, &mut values);
        Ok(values[degree])
    }

    fn check_domain(&self, y: f64) -> Result<()> {
        if y.is_nan() {
            return Err(Error::DomainError {
                value: y,
                what: "NaN argument",
            });
        }
        if let Some((lo, hi)) = self.support() {
            if y < lo || y > hi {
                return Err(Error::DomainError {
                    value: y,
                    what: "Jacobi polynomials live on [-1, 1]",
                });
            }
        }
        Ok(())
    }

    /// Probability density of the family's measure at `y`.
    pub fn density(&self, y: f64) -> Result<f64> {
        match *self {
            PolynomialFamily::Hermite => {
                if y.is_nan() {
                    return Err(Error::DomainError {
                        value: y,
                        what: "NaN argument",
                    });
                }
                Ok((-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt())
            }
            PolynomialFamily::Jacobi { a, b } => {
                let open_ok = y > -1.0 && y < 1.0;
                let left_ok = y == -1.0 && b >= 0.0;
                let right_ok = y == 1.0 && a >= 0.0;
                if !(open_ok || left_ok || right_ok) {
                    return Err(Error::DomainError {
                        value: y,
                        what: "Jacobi density is defined on (-1, 1)",
                    });
                }
                Ok(jacobi_normalization(a, b) * (1.0 - y).powf(a) * (1.0 + y).powf(b))
            }
        }
    }

    /// Gauss rule for the family's probability measure (Golub-Welsch).
    pub fn quadrature(&self, order: usize) -> Result<QuadratureRule> {
        self.quadrature_with_max(order, DEFAULT_MAX_ORDER)
    }

    pub fn quadrature_with_max(&self, order: usize, max_order: usize) -> Result<QuadratureRule> {
        if order == 0 || order > max_order {
            return Err(Error::OrderTooLarge {
                order,
                max: max_order,
            });
        }
        let mut jacobi = faer::Mat::<f64>::zeros(order, order);
        for k in 0..order {
            let (alpha, _) = self.recurrence(k);
            jacobi[(k, k)] = alpha;
            if k + 1 < order {
                let off = self.recurrence(k + 1).1.sqrt();
                jacobi[(k + 1, k)] = off;
                jacobi[(k, k + 1)] = off;
            }
        }
        let mut nodes = jacobi
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        nodes.sort_by(f64::total_cmp);
        if let Some((lo, hi)) = self.support() {
            for x in nodes.iter_mut() {
                *x = x.clamp(lo, hi);
            }
        }

        // Christoffel weights 1 / sum_k phi_k(x)^2 are more accurate than squared
        // eigenvector components for large orders.
        let table = RecurrenceTable::new(*self, order - 1);
        let mut values = vec![0.0; order];
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                table.fill(x, &mut values);
                1.0 / values.iter().map(|v| v * v).sum::<f64>()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        Ok(QuadratureRule { nodes, weights })
    }
}

/// Monic Jacobi recurrence coefficients for the weight `(1-y)^a (1+y)^b` normalized to mass one.
fn jacobi_recurrence(a: f64, b: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    let ab = a + b;
    let alpha = if k == 0 {
        (b - a) / (ab + 2.0)
    } else {
        let t = 2.0 * kf + ab;
        (b * b - a * a) / (t * (t + 2.0))
    };
    let beta = match k {
        0 => 1.0,
        1 => 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab)),
        _ => {
            let t = 2.0 * kf + ab;
            4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (t * t * (t + 1.0) * (t - 1.0))
        }
    };
    (alpha, beta)
}

/// `c_{a,b} = Gamma(a+b+2) / (2^{a+b+1} Gamma(a+1) Gamma(b+1))`, via log-Gamma.
pub fn jacobi_normalization(a: f64, b: f64) -> f64 {
    let log_c = libm::lgamma(a + b + 2.0)
        - (a + b + 1.0) * std::f64::consts::LN_2
        - libm::lgamma(a + 1.0)
        - libm::lgamma(b + 1.0);
    log_c.exp()
}

/// Precomputed orthonormal recurrence coefficients up to a fixed degree.
///
/// Used in hot loops (design assembly, density evaluation) where the family's
/// coefficients would otherwise be recomputed per point.
#[derive(Debug, Clone)]
pub struct RecurrenceTable {
    family: PolynomialFamily,
    alpha: Vec<f64>,
    sqrt_beta: Vec<f64>,
}

impl RecurrenceTable {
    pub fn new(family: PolynomialFamily, max_degree: usize) -> Self {
        let mut alpha = Vec::with_capacity(max_degree + 1);
        let mut sqrt_beta = Vec::with_capacity(max_degree + 2);
        for k in 0..=max_degree + 1 {
            let (a, b) = family.recurrence(k);
            if k <= max_degree {
                alpha.push(a);
            }
            sqrt_beta.push(b.sqrt());
        }
        RecurrenceTable {
            family,
            alpha,
            sqrt_beta,
        }
    }

    pub fn family(&self) -> PolynomialFamily {
        self.family
    }

    pub fn max_degree(&self) -> usize {
        self.alpha.len() - 1
    }

    /// Writes `phi_0(y), ..., phi_{out.len()-1}(y)` into `out`. No domain checks.
    pub fn fill(&self, y: f64, out: &mut [f64]) {
        let n = out.len();
        assert!(n <= self.alpha.len(), "degree beyond the tabulated range");
        if n == 0 {
            return;
        }
        out[0] = 1.0;
        let mut prev = 0.0;
        for k in 0..n - 1 {
            let next = ((y - self.alpha[k]) * out[k] - self.sqrt_beta[k] * prev)
                / self.sqrt_beta[k + 1];
            prev = out[k];
            out[k + 1] = next;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor-product basis function `phi_s(y) = prod_j phi_{s_j}(y_j)`.
///
/// Coordinates outside the support of `s` contribute the degree-zero factor 1.
pub fn eval_tensor(family: PolynomialFamily, s: &MultiIndex, y: &[f64]) -> Result<f64> {
    let needed = s.max_dim();
    if y.len() < needed {
        return Err(Error::DimensionMismatch {
            needed,
            got: y.len(),
        });
    }
    let mut prod = 1.0;
    for (j, k) in s.iter() {
        prod *= family.eval(k as usize, y[j as usize - 1])?;
    }
    Ok(prod)
}

/// Per-point cache of univariate values `phi_k(y_j)` for `k <= max_degree`, `j < dims`.
///
/// Tensor evaluations against the cache are products of table lookups.
#[derive(Debug, Clone)]
pub struct PointCache {
    max_degree: usize,
    values: Vec<f64>,
}

impl PointCache {
    pub fn new(table: &RecurrenceTable, max_degree: usize, y: &[f64]) -> Self {
        let stride = max_degree + 1;
        let mut values = vec![0.0; stride * y.len()];
        for (j, &yj) in y.iter().enumerate() {
            table.fill(yj, &mut values[j * stride..(j + 1) * stride]);
        }
        PointCache { max_degree, values }
    }

    #[inline]
    pub fn univariate(&self, dim: usize, degree: usize) -> f64 {
        self.values[dim * (self.max_degree + 1) + degree]
    }

    /// `phi_s(y)`; `s` must fit the cached dimensions and degrees.
    #[inline]
    pub fn tensor(&self, s: &MultiIndex) -> f64 {
        s.iter()
            .map(|(j, k)| self.univariate(j as usize - 1, k as usize))
            .product()
    }
}
