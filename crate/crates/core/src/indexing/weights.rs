//! Weight sequences `sigma_s` over multi-indices.
//!
//! The lognormal and affine families both factor over coordinates,
//! `sigma_s = scale * prod_j f_j(s_j)`, which is what makes exact enumeration and
//! certified `l_q` norms tractable. Everything is computed in log space.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MultiIndex;
use crate::error::{Error, Result};

/// Rule `j -> rho_j` for `j >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RhoRule {
    Constant { value: f64 },
    /// `rho_j = base^j`
    Geometric { base: f64 },
    /// `rho_j = scale * j^exponent`
    Power { scale: f64, exponent: f64 },
    /// `rho_j = values[j-1]`, infinite beyond the table.
    Table { values: Vec<f64> },
}

/// A rho rule restricted to the first `active_dims` coordinates (`rho_j = inf` after).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rho {
    pub rule: RhoRule,
    pub active_dims: Option<u32>,
}

impl Rho {
    pub fn new(rule: RhoRule) -> Self {
        Rho {
            rule,
            active_dims: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        Rho::new(RhoRule::Constant { value })
    }

    pub fn geometric(base: f64) -> Self {
        Rho::new(RhoRule::Geometric { base })
    }

    pub fn power(scale: f64, exponent: f64) -> Self {
        Rho::new(RhoRule::Power { scale, exponent })
    }

    pub fn table(values: Vec<f64>) -> Self {
        Rho::new(RhoRule::Table { values })
    }

    pub fn truncated(mut self, dims: u32) -> Self {
        self.active_dims = Some(dims);
        self
    }

    pub fn get(&self, j: u32) -> f64 {
        debug_assert!(j >= 1);
        if self.active_dims.is_some_and(|d| j > d) {
            return f64::INFINITY;
        }
        match &self.rule {
            RhoRule::Constant { value } => *value,
            RhoRule::Geometric { base } => base.powi(j as i32),
            RhoRule::Power { scale, exponent } => scale * (j as f64).powf(*exponent),
            RhoRule::Table { values } => values.get(j as usize - 1).copied().unwrap_or(f64::INFINITY),
        }
    }

    /// Last coordinate with a finite `rho_j`, if the sequence is eventually infinite.
    pub fn finite_dims(&self) -> Option<u32> {
        let table = match &self.rule {
            RhoRule::Table { values } => Some(values.len() as u32),
            _ => None,
        };
        match (table, self.active_dims) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// First `j0` such that `rho` is non-decreasing on `j >= j0`.
    pub fn nondecreasing_from(&self) -> u32 {
        let tail = match &self.rule {
            RhoRule::Constant { .. } => 1,
            RhoRule::Geometric { base } if *base >= 1.0 => 1,
            RhoRule::Power { exponent, .. } if *exponent >= 0.0 => 1,
            RhoRule::Table { values } => values.len() as u32 + 1,
            // decreasing rules only become "non-decreasing" after truncation
            _ => u32::MAX,
        };
        match self.finite_dims() {
            Some(d) => tail.min(d + 1),
            None => tail,
        }
    }

    /// Whether `rho_j -> inf`, so only finitely many coordinates can stay under a threshold.
    pub fn diverges(&self) -> bool {
        if self.finite_dims().is_some() {
            return true;
        }
        match &self.rule {
            RhoRule::Constant { .. } => false,
            RhoRule::Geometric { base } => *base > 1.0,
            RhoRule::Power { scale, exponent } => *scale > 0.0 && *exponent > 0.0,
            RhoRule::Table { .. } => true,
        }
    }

    /// Bound on `sum_{j > cut} rho_j^{-q}`, `None` when that tail diverges.
    fn inverse_power_tail(&self, cut: u32, q: f64) -> Option<f64> {
        if self.finite_dims().is_some_and(|d| cut >= d) {
            return Some(0.0);
        }
        match &self.rule {
            RhoRule::Constant { .. } => None,
            RhoRule::Geometric { base } if *base > 1.0 => {
                let r = base.powf(-q);
                Some(r.powi(cut as i32 + 1) / (1.0 - r))
            }
            RhoRule::Power { scale, exponent } if exponent * q > 1.0 && cut >= 1 => {
                // sum_{j>J} j^{-eq} <= int_J^inf x^{-eq} dx
                let p = exponent * q;
                Some(scale.powf(-q) * (cut as f64).powf(1.0 - p) / (p - 1.0))
            }
            RhoRule::Table { .. } => Some(0.0),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match &self.rule {
            RhoRule::Constant { value } if !(*value > 0.0) => bad(format!("rho must be positive, got {value}")),
            RhoRule::Geometric { base } if !(*base > 0.0) => bad(format!("geometric base must be positive, got {base}")),
            RhoRule::Power { scale, .. } if !(*scale > 0.0) => bad(format!("power scale must be positive, got {scale}")),
            RhoRule::Table { values } if values.iter().any(|v| !(*v > 0.0)) => {
                bad("rho table entries must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

/// Degree constants `k -> c_k` of the affine weights, with `c_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CRule {
    /// `c_k = sqrt(2k + 1)`, the sup-norm growth of normalized Legendre polynomials.
    Legendre,
    /// `c_k = 1`
    Unit,
    /// `c_k = values[k-1]` for `k >= 1`; the last value repeats.
    Table { values: Vec<f64> },
}

impl Default for CRule {
    fn default() -> Self {
        CRule::Legendre
    }
}

impl CRule {
    pub fn get(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self {
            CRule::Legendre => (2.0 * k as f64 + 1.0).sqrt(),
            CRule::Unit => 1.0,
            CRule::Table { values } => *values
                .get(k as usize - 1)
                .or(values.last())
                .expect("validated non-empty"),
        }
    }

    fn is_nondecreasing(&self) -> bool {
        match self {
            CRule::Legendre | CRule::Unit => true,
            CRule::Table { values } => {
                values.first().is_some_and(|&c| c >= 1.0) && values.windows(2).all(|w| w[0] <= w[1])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum WeightKind {
    /// `sigma_s^2 = sum_{s' <= s, |s'|_inf <= eta} binom(s, s') prod_j rho_j^{2 s'_j}`
    Lognormal { eta: u32, rho: Rho },
    /// `sigma_s = prod_{j in supp s} c_{s_j} rho_j^{s_j}`
    Affine { rho: Rho, c: CRule },
    /// Lookup table; need not be monotone.
    Explicit { table: Vec<(MultiIndex, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    /// Summability exponent in `(0, 2)`.
    pub q: f64,
    /// Global multiplier applied to every sigma (used to normalize `||sigma^{-1}||_q <= 1`).
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(skip)]
    lookup: Option<HashMap<MultiIndex, f64>>,
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn lognormal(eta: u32, rho: Rho, q: f64) -> Result<Self> {
        if eta == 0 {
            return Err(Error::InvalidParameter("eta must be a positive integer".into()));
        }
        rho.validate()?;
        Self::with_kind(WeightKind::Lognormal { eta, rho }, q)
    }

    pub fn affine(rho: Rho, c: CRule, q: f64) -> Result<Self> {
        rho.validate()?;
        if let CRule::Table { values } = &c {
            if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter("c table must be non-empty and positive".into()));
            }
        }
        Self::with_kind(WeightKind::Affine { rho, c }, q)
    }

    pub fn explicit(table: Vec<(MultiIndex, f64)>, q: f64) -> Result<Self> {
        if table.iter().any(|(_, s)| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("explicit sigmas must be positive".into()));
        }
        Self::with_kind(WeightKind::Explicit { table }, q)
    }

    fn with_kind(kind: WeightKind, q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
        }
        let mut spec = WeightSpec {
            kind,
            q,
            scale: 1.0,
            lookup: None,
        };
        spec.rebuild_lookup();
        Ok(spec)
    }

    /// Re-derives the explicit-table lookup after deserialization.
    pub fn rebuild_lookup(&mut self) {
        self.lookup = match &self.kind {
            WeightKind::Explicit { table } => Some(table.iter().cloned().collect()),
            _ => None,
        };
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn is_product(&self) -> bool {
        !matches!(self.kind, WeightKind::Explicit { .. })
    }

    /// Coordinatewise monotone: `s <= s'` implies `sigma_s <= sigma_s'`.
    pub fn is_monotone(&self) -> bool {
        match &self.kind {
            WeightKind::Lognormal { .. } => true,
            WeightKind::Affine { rho, c } => {
                let rho_ok = match &rho.rule {
                    RhoRule::Constant { value } => *value >= 1.0,
                    RhoRule::Geometric { base } => *base >= 1.0,
                    RhoRule::Power { scale, exponent } => *scale >= 1.0 && *exponent >= 0.0,
                    RhoRule::Table { values } => values.iter().all(|&v| v >= 1.0),
                };
                rho_ok && c.is_nondecreasing()
            }
            WeightKind::Explicit { .. } => false,
        }
    }

    pub(crate) fn rho(&self) -> Option<&Rho> {
        match &self.kind {
            WeightKind::Lognormal { rho, .. } | WeightKind::Affine { rho, .. } => Some(rho),
            WeightKind::Explicit { .. } => None,
        }
    }

    /// Largest coordinate that can carry a finite weight, if bounded.
    pub fn active_dims(&self) -> Option<u32> {
        match &self.kind {
            WeightKind::Explicit { table } => {
                Some(table.iter().map(|(s, _)| s.max_dim() as u32).max().unwrap_or(0))
            }
            _ => self.rho().and_then(Rho::finite_dims),
        }
    }

    /// `log f_j(k)` for product specs, `+inf` when coordinate `j` is inactive.
    pub(crate) fn log_factor(&self, j: u32, k: u32) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match &self.kind {
            WeightKind::Affine { rho, c } => {
                let r = rho.get(j);
                if r.is_infinite() {
                    return f64::INFINITY;
                }
                c.get(k).ln() + k as f64 * r.ln()
            }
            WeightKind::Lognormal { eta, rho } => {
                let r = rho.get(j);
                if r.is_infinite() {
                    return f64::INFINITY;
                }
                0.5 * lognormal_log_sum(k, *eta, r.ln())
            }
            WeightKind::Explicit { .. } => unreachable!("explicit specs do not factor"),
        }
    }

    /// `ln sigma_s`.
    pub fn log_sigma(&self, s: &MultiIndex) -> Result<f64> {
        match &self.kind {
            WeightKind::Explicit { .. } => {
                let lookup = self.lookup.as_ref().expect("explicit lookup is built on construction");
                lookup
                    .get(s)
                    .map(|v| (v * self.scale).ln())
                    .ok_or_else(|| Error::MissingExplicitEntry(s.to_string()))
            }
            _ => Ok(self.scale.ln() + s.iter().map(|(j, k)| self.log_factor(j, k)).sum::<f64>()),
        }
    }

    pub fn sigma(&self, s: &MultiIndex) -> Result<f64> {
        self.log_sigma(s).map(f64::exp)
    }

    /// Copy normalized so that `||sigma^{-1}||_q <= 1`, using the certified upper bound.
    pub fn normalized(&self, tol: f64) -> Result<Self> {
        let norm = lq_norm_inverse_sigma(self, tol)?;
        let mut out = self.clone();
        out.scale *= norm.upper;
        Ok(out)
    }
}

/// `ln sum_{t=0}^{min(k, eta)} binom(k, t) rho^{2t}` via log-sum-exp.
fn lognormal_log_sum(k: u32, eta: u32, ln_rho: f64) -> f64 {
    let top = k.min(eta);
    let terms: Vec<f64> = (0..=top)
        .map(|t| ln_binomial(k, t) + 2.0 * t as f64 * ln_rho)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln binom(n, k)`: exact integer arithmetic up to `n = 60`, a short product for small `k`,
/// log-Gamma otherwise.
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= 60 {
        let k = k.min(n - k) as u64;
        let mut acc: u64 = 1;
        for i in 0..k {
            // exact: acc * (n - i) is divisible by (i + 1)
            acc = acc * (n as u64 - i) / (i + 1);
        }
        (acc as f64).ln()
    } else if k.min(n - k) <= 32 {
        let k = k.min(n - k);
        (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
    } else {
        libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
    }
}

/// Certified value of `||sigma^{-1}||_{l_q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LqNorm {
    /// Interval midpoint.
    pub value: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
}

const MAX_TERMS_PER_DIM: u32 = 1 << 20;
const MAX_DIMS: u32 = 1 << 20;

/// `||sigma^{-1}||_q` to within `tol` (interval half-width).
///
/// Product specs use `sum_s sigma_s^{-q} = scale^{-q} prod_j sum_k f_j(k)^{-q}` with rigorous
/// tail bounds in both the degree and the coordinate direction; explicit tables are summed
/// directly.
pub fn lq_norm_inverse_sigma(spec: &WeightSpec, tol: f64) -> Result<LqNorm> {
    lq_norm_with_exponent(spec, spec.q, tol)
}

/// Same as [`lq_norm_inverse_sigma`] with an arbitrary exponent `p` in place of `spec.q`.
pub fn lq_norm_with_exponent(spec: &WeightSpec, p: f64, tol: f64) -> Result<LqNorm> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    if let WeightKind::Explicit { table } = &spec.kind {
        let sum: f64 = table.iter().map(|(_, s)| (s * spec.scale).powf(-p)).sum();
        let value = sum.powf(1.0 / p);
        return Ok(LqNorm {
            value,
            half_width: 0.0,
            lower: value,
            upper: value,
        });
    }
    if !spec.is_monotone() {
        return Err(Error::InvalidParameter(
            "certified lq norms need a monotone weight spec".into(),
        ));
    }
    let rho = spec.rho().expect("product spec");

    // power sums: lo, hi bracket sum_s sigma_s^{-p}
    let mut cut = rho.finite_dims().map_or(8, |d| d.min(MAX_DIMS)).max(1);
    loop {
        let mut log_lo = 0.0;
        let mut log_hi = 0.0;
        let dim_tol = tol * 1e-3 / cut as f64;
        for j in 1..=cut {
            let (lo, width) = univariate_power_sum(spec, j, p, dim_tol)?;
            log_lo += lo.ln();
            log_hi += (lo + width).ln();
        }
        // coordinates beyond the cut: log prod (1 + t_j) <= sum t_j
        let beyond = match rho.finite_dims() {
            Some(d) if cut >= d => 0.0,
            _ => {
                let r_next = rho.get(cut + 1);
                let per_rho = factor_tail_constant(spec, r_next, p)?;
                let tail = rho.inverse_power_tail(cut, p).ok_or_else(|| {
                    Error::NonConvergent(format!(
                        "sum_j rho_j^(-{p}) diverges for {:?}",
                        rho.rule
                    ))
                })?;
                per_rho * tail
            }
        };
        log_hi += beyond;
        let scale_term = -p * spec.scale.ln();
        let lo = ((log_lo + scale_term) / p).exp();
        let hi = ((log_hi + scale_term) / p).exp();
        let half_width = 0.5 * (hi - lo);
        if half_width <= tol {
            return Ok(LqNorm {
                value: 0.5 * (lo + hi),
                half_width,
                lower: lo,
                upper: hi,
            });
        }
        if cut >= MAX_DIMS {
            return Err(Error::NonConvergent(format!(
                "coordinate tail still {half_width:.3e} after {cut} dimensions"
            )));
        }
        cut = cut.saturating_mul(2).min(MAX_DIMS);
        if let Some(d) = rho.finite_dims() {
            cut = cut.min(d);
        }
    }
}

/// `(lower, width)` bracketing `sum_{k >= 0} f_j(k)^{-p}`.
fn univariate_power_sum(spec: &WeightSpec, j: u32, p: f64, tol: f64) -> Result<(f64, f64)> {
    let mut partial = 0.0;
    let mut k: u32 = 0;
    let mut block = 16u32;
    loop {
        let end = k + block;
        while k < end {
            let lf = spec.log_factor(j, k);
            partial += (-p * lf).exp();
            k += 1;
        }
        let (lo, width) = match &spec.kind {
            WeightKind::Lognormal { eta, rho } if k > 8 * eta.max(&1) && rho.get(j).is_finite() => {
                lognormal_tail_bracket(*eta, rho.get(j), p, k)?
            }
            _ => (0.0, degree_tail_bound(spec, j, k, p)?),
        };
        if width <= tol * partial {
            return Ok((partial + lo, width));
        }
        if k >= MAX_TERMS_PER_DIM {
            return Err(Error::NonConvergent(format!(
                "degree tail of coordinate {j} still {width:.3e} after {k} terms"
            )));
        }
        block = block.saturating_mul(2);
    }
}

/// `t^eta P(first / t)` where `P(x) = sum_{l <= eta} binom(x, l) rho^{2l}` extends `f(k)^2`
/// to real `x >= eta`.
fn lognormal_scaled_poly(eta: u32, rho2: f64, first: f64, t: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut rpow = 1.0;
    for l in 0..=eta {
        if l > 0 {
            binom *= (first - (l - 1) as f64 * t) / l as f64;
            rpow *= rho2;
        }
        total += binom * rpow * t.powi((eta - l) as i32);
    }
    total
}

/// `int_{x0}^inf P(x)^{-p/2} dx` by `x = x0 / t` and `t = u^gamma`, which absorbs the
/// power-law decay into a bounded integrand on `(0, 1]`.
fn lognormal_tail_integral(eta: u32, rho2: f64, p: f64, x0: f64) -> f64 {
    let a = p / 2.0;
    let beta = eta as f64 * a - 2.0;
    let gamma = 1.0 / (beta + 1.0);
    let rule = gauss_legendre_16();
    let mut total = 0.0;
    let mut hi = 1.0;
    for _ in 0..60 {
        let lo = hi / 2.0;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let u = mid + half * x;
            let t = u.powf(gamma);
            total += 2.0 * half * w * lognormal_scaled_poly(eta, rho2, x0, t).powf(-a);
        }
        hi = lo;
    }
    // [0, 2^-60]: integrand is within rounding of its value at 0
    total += hi * lognormal_scaled_poly(eta, rho2, x0, 0.0).powf(-a);
    x0 * gamma * total
}

fn gauss_legendre_16() -> &'static crate::basis::QuadratureRule {
    static RULE: std::sync::OnceLock<crate::basis::QuadratureRule> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        crate::basis::PolynomialFamily::legendre()
            .quadrature(16)
            .expect("16-point rule")
    })
}

/// `(lower, width)` for `sum_{k >= first} f(k)^{-p}` of a lognormal coordinate.
///
/// With `g = P^{-p/2}` convex and decreasing beyond `first`, the trapezoid and midpoint
/// rules bracket the sum: `int_first g + g(first)/2 <= sum <= int_{first - 1/2} g`.
fn lognormal_tail_bracket(eta: u32, rho: f64, p: f64, first: u32) -> Result<(f64, f64)> {
    let expo = eta as f64 * p / 2.0;
    if expo <= 1.0 {
        return Err(Error::NonConvergent(format!(
            "eta * q / 2 = {expo} <= 1: lognormal degree sums diverge"
        )));
    }
    let rho2 = rho * rho;
    let x = first as f64;
    let g = lognormal_scaled_poly(eta, rho2, x, 1.0).powf(-p / 2.0);
    let lower = lognormal_tail_integral(eta, rho2, p, x) + 0.5 * g;
    let upper = lognormal_tail_integral(eta, rho2, p, x - 0.5);
    Ok((lower, (upper - lower).max(0.0)))
}

/// Bound on `sum_{k >= first} f_j(k)^{-p}`.
fn degree_tail_bound(spec: &WeightSpec, j: u32, first: u32, p: f64) -> Result<f64> {
    match &spec.kind {
        WeightKind::Affine { rho, c } => {
            let r = rho.get(j);
            if r.is_infinite() {
                return Ok(0.0);
            }
            if r <= 1.0 {
                // c_k^{-p} alone would have to carry the sum
                return Err(Error::NonConvergent(format!(
                    "rho_{j} = {r} <= 1 gives a non-geometric degree tail"
                )));
            }
            // c nondecreasing: f(k) >= c_first * r^k
            let ratio = r.powf(-p);
            Ok(c.get(first).powf(-p) * ratio.powi(first as i32) / (1.0 - ratio))
        }
        WeightKind::Lognormal { eta, rho } => {
            let r = rho.get(j);
            if r.is_infinite() {
                return Ok(0.0);
            }
            let eta = *eta;
            let expo = eta as f64 * p / 2.0;
            if first <= eta {
                // never certify from inside the geometric range; force more terms
                return Ok(f64::INFINITY);
            }
            if expo <= 1.0 {
                return Err(Error::NonConvergent(format!(
                    "eta * q / 2 = {expo} <= 1: lognormal degree sums diverge"
                )));
            }
            // f(k)^2 >= binom(k, eta) rho^{2 eta} >= ((k - eta + 1)^eta / eta!) rho^{2 eta}
            let ln_eta_fact = libm::lgamma(eta as f64 + 1.0);
            let coef = ((ln_eta_fact - 2.0 * eta as f64 * r.ln()) * p / 2.0).exp();
            let x0 = (first - eta) as f64;
            // sum_{k >= first} (k - eta + 1)^{-expo} <= int_{x0}^inf x^{-expo} dx
            Ok(coef * x0.powf(1.0 - expo) / (expo - 1.0))
        }
        WeightKind::Explicit { .. } => unreachable!(),
    }
}

/// Constant `B` with `sum_{k >= 1} f_j(k)^{-p} <= B rho_j^{-p}` for all `rho_j >= r_min`.
fn factor_tail_constant(spec: &WeightSpec, r_min: f64, p: f64) -> Result<f64> {
    if r_min.is_infinite() {
        return Ok(0.0);
    }
    match &spec.kind {
        WeightKind::Affine { c, .. } => {
            if r_min <= 1.0 {
                return Err(Error::NonConvergent(format!("rho = {r_min} <= 1 in the coordinate tail")));
            }
            // f(k) >= c_1 rho^k  =>  sum_k f(k)^{-p} <= c_1^{-p} rho^{-p} / (1 - rho^{-p})
            Ok(c.get(1).powf(-p) / (1.0 - r_min.powf(-p)))
        }
        WeightKind::Lognormal { eta, .. } => {
            let eta = *eta;
            let expo = eta as f64 * p / 2.0;
            if expo <= 1.0 {
                return Err(Error::NonConvergent(format!(
                    "eta * q / 2 = {expo} <= 1: lognormal degree sums diverge"
                )));
            }
            // k <= eta: f(k)^2 = (1 + rho^2)^k >= rho^{2k}
            let ratio = r_min.powf(-p);
            let mut b: f64 = (0..eta).map(|i| ratio.powi(i as i32)).sum();
            // k > eta: f(k)^{-p} <= eta!^{p/2} rho^{-eta p} (k - eta + 1)^{-expo}
            let ln_eta_fact = libm::lgamma(eta as f64 + 1.0);
            let zeta_tail = 1.0 + 1.0 / (expo - 1.0);
            b += (ln_eta_fact * p / 2.0).exp() * ratio.powi(eta as i32 - 1) * zeta_tail;
            Ok(b)
        }
        WeightKind::Explicit { .. } => unreachable!(),
    }
}
