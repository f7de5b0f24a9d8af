//! Weighted least-squares recovery in `V_m = span{phi_s : s in basis}`.
//!
//! Scalar targets are fitted by minimizing `sum_i w_i |f(y_i) - g(y_i)|^2`; Bochner-valued
//! targets (`v(y) in R^d`) apply the same solution operator to every coordinate. The solve
//! goes through a column-pivoted QR of `W^{1/2} L`, never through the normal equations.

use faer::linalg::solvers::SolveLstsq;
use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{PointCache, PolynomialFamily, RecurrenceTable};
use crate::error::{Error, Result};
use crate::indexing::IndexSet;
use crate::sampling::{SamplePlan, Scheme};

/// Coefficients of a (possibly vector-valued) expansion over an ordered basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approximant {
    basis: IndexSet,
    x_dim: usize,
    /// Row-major `|basis| x x_dim`.
    coefficients: Vec<f64>,
}

impl Approximant {
    pub fn new(basis: IndexSet, x_dim: usize, coefficients: Vec<f64>) -> Result<Self> {
        if x_dim == 0 || coefficients.len() != basis.len() * x_dim {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for {} basis functions of dimension {}",
                coefficients.len(),
                basis.len(),
                x_dim
            )));
        }
        Ok(Approximant {
            basis,
            x_dim,
            coefficients,
        })
    }

    pub fn zero(basis: IndexSet, x_dim: usize) -> Self {
        let n = basis.len() * x_dim;
        Approximant {
            basis,
            x_dim,
            coefficients: vec![0.0; n],
        }
    }

    pub fn basis(&self) -> &IndexSet {
        &self.basis
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Coefficient vector of the `i`-th basis function.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coefficients[i * self.x_dim..(i + 1) * self.x_dim]
    }

    /// `sum_s c_s phi_s(y)`, one value per X-coordinate.
    pub fn evaluate(&self, family: PolynomialFamily, y: &[f64]) -> Result<Vec<f64>> {
        let needed = self.basis.max_dim();
        if y.len() < needed {
            return Err(Error::DimensionMismatch {
                needed,
                got: y.len(),
            });
        }
        if let Some((lo, hi)) = family.support() {
            if let Some(&bad) = y[..needed].iter().find(|v| **v < lo || **v > hi) {
                return Err(Error::DomainError {
                    value: bad,
                    what: "parameter outside the support of the measure",
                });
            }
        }
        let degree = self.basis.max_degree() as usize;
        let table = RecurrenceTable::new(family, degree);
        let cache = PointCache::new(&table, degree, &y[..needed]);
        Ok(self.evaluate_cached(&cache))
    }

    pub(crate) fn evaluate_cached(&self, cache: &PointCache) -> Vec<f64> {
        let mut out = vec![0.0; self.x_dim];
        for (i, s) in self.basis.indices().iter().enumerate() {
            let phi = cache.tensor(s);
            for (o, c) in out.iter_mut().zip(self.row(i)) {
                *o += c * phi;
            }
        }
        out
    }
}

/// `L[i][s] = phi_s(y_i)` together with the sample weights.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    /// Column-major entries of `L`.
    data: Vec<f64>,
    weights: Vec<f64>,
    basis: IndexSet,
    /// `N_eff`: the normalization making the expected Gram the identity.
    effective_size: f64,
    scheme: Scheme,
    seed: u64,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.data, self.rows, self.cols)
    }

    pub fn entry(&self, i: usize, s: usize) -> f64 {
        self.data[s * self.rows + i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn basis(&self) -> &IndexSet {
        &self.basis
    }

    pub fn effective_size(&self) -> f64 {
        self.effective_size
    }

    /// Provenance of the sample plan the design was built from.
    pub fn plan_id(&self) -> (Scheme, u64) {
        (self.scheme, self.seed)
    }

    /// `W^{1/2} L` as an owned matrix.
    pub fn weighted(&self) -> Mat<f64> {
        let sqrt_w: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        Mat::from_fn(self.rows, self.cols, |i, j| sqrt_w[i] * self.data[j * self.rows + i])
    }

    /// Same design with all weights multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> DesignMatrix {
        let mut out = self.clone();
        for w in out.weights.iter_mut() {
            *w *= factor;
        }
        out.effective_size *= factor;
        out
    }

    /// Design from raw parts, mainly for synthetic checks.
    pub fn from_parts(
        l: MatRef<'_, f64>,
        weights: Vec<f64>,
        basis: IndexSet,
        effective_size: f64,
    ) -> Result<Self> {
        if weights.len() != l.nrows() || basis.len() != l.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} design with {} weights and {} basis functions",
                l.nrows(),
                l.ncols(),
                weights.len(),
                basis.len()
            )));
        }
        let mut data = Vec::with_capacity(l.nrows() * l.ncols());
        for j in 0..l.ncols() {
            for i in 0..l.nrows() {
                data.push(l[(i, j)]);
            }
        }
        Ok(DesignMatrix {
            rows: l.nrows(),
            cols: l.ncols(),
            data,
            weights,
            basis,
            effective_size,
            scheme: Scheme::PlainMu,
            seed: 0,
        })
    }
}

pub fn assemble_design(
    family: PolynomialFamily,
    basis: &IndexSet,
    plan: &SamplePlan,
) -> Result<DesignMatrix> {
    let needed = basis.max_dim();
    if plan.dims() < needed {
        return Err(Error::DimensionMismatch {
            needed,
            got: plan.dims(),
        });
    }
    let rows = plan.len();
    let cols = basis.len();
    let degree = basis.max_degree() as usize;
    let table = RecurrenceTable::new(family, degree);
    let caches: Vec<PointCache> = plan
        .points()
        .par_iter()
        .map(|y| PointCache::new(&table, degree, &y[..needed]))
        .collect();
    let mut data = vec![0.0; rows * cols];
    data.par_chunks_mut(rows.max(1))
        .zip(basis.indices().par_iter())
        .for_each(|(col, s)| {
            for (v, cache) in col.iter_mut().zip(&caches) {
                *v = cache.tensor(s);
            }
        });
    Ok(DesignMatrix {
        rows,
        cols,
        data,
        weights: plan.weights().to_vec(),
        basis: basis.clone(),
        effective_size: plan.effective_size(),
        scheme: plan.scheme(),
        seed: plan.seed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RankPolicy {
    /// Report `RankDeficient`.
    Error,
    /// Fall back to the truncated pseudo-inverse.
    PseudoInverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Minimum accepted `lambda_min / lambda_max` of the weighted Gram.
    pub cond_tol: f64,
    pub rank_policy: RankPolicy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            cond_tol: 1e-12,
            rank_policy: RankPolicy::Error,
        }
    }
}

enum Factor {
    Qr(faer::linalg::solvers::ColPivQr<f64>),
    Pinv(Mat<f64>),
}

/// Factorization of `W^{1/2} L`, applied column by column.
struct LeastSquaresOperator {
    sqrt_w: Vec<f64>,
    factor: Factor,
    cols: usize,
}

impl LeastSquaresOperator {
    fn new(design: &DesignMatrix, options: &SolveOptions) -> Result<Self> {
        if design.rows < design.cols {
            return Err(Error::ShapeMismatch(format!(
                "underdetermined design: {} rows for {} columns",
                design.rows, design.cols
            )));
        }
        if design.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
        }
        let a = design.weighted();
        let qr = a.col_piv_qr();
        let r = qr.R();
        let diag: Vec<f64> = (0..design.cols).map(|i| r[(i, i)].abs()).collect();
        let largest = diag.iter().copied().fold(0.0, f64::max);
        let smallest = diag.iter().copied().fold(f64::INFINITY, f64::min);
        // |r_ii| ratios track singular value ratios; squared they track the Gram's.
        let ratio = if largest > 0.0 { (smallest / largest).powi(2) } else { 0.0 };
        let factor = if ratio >= options.cond_tol {
            Factor::Qr(qr)
        } else {
            match options.rank_policy {
                RankPolicy::Error => {
                    let diag = gram_diagnostics(design);
                    return Err(Error::RankDeficient {
                        lambda_min: diag.lambda_min,
                        lambda_max: diag.lambda_max,
                    });
                }
                RankPolicy::PseudoInverse => {
                    let svd = a
                        .thin_svd()
                        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
                    let s = svd.S().column_vector();
                    let s_max = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
                    let cut = s_max * options.cond_tol.sqrt();
                    let u = svd.U();
                    let v = svd.V();
                    let inv: Vec<f64> = (0..s.nrows())
                        .map(|i| if s[i] > cut { 1.0 / s[i] } else { 0.0 })
                        .collect();
                    let pinv = Mat::from_fn(design.cols, design.rows, |i, j| {
                        (0..inv.len()).map(|k| v[(i, k)] * inv[k] * u[(j, k)]).sum()
                    });
                    Factor::Pinv(pinv)
                }
            }
        };
        Ok(LeastSquaresOperator {
            sqrt_w: design.weights.iter().map(|w| w.sqrt()).collect(),
            factor,
            cols: design.cols,
        })
    }

    fn apply(&self, samples: impl Iterator<Item = f64>) -> Vec<f64> {
        let rhs: Vec<f64> = samples.zip(&self.sqrt_w).map(|(f, w)| f * w).collect();
        let rhs = MatRef::from_column_major_slice(&rhs, rhs.len(), 1);
        let sol = match &self.factor {
            Factor::Qr(qr) => qr.solve_lstsq(rhs),
            Factor::Pinv(p) => p * rhs,
        };
        (0..self.cols).map(|i| sol[(i, 0)]).collect()
    }
}

pub fn solve_scalar(design: &DesignMatrix, samples: &[f64]) -> Result<Approximant> {
    solve_scalar_with(design, samples, &SolveOptions::default())
}

pub fn solve_scalar_with(
    design: &DesignMatrix,
    samples: &[f64],
    options: &SolveOptions,
) -> Result<Approximant> {
    if samples.len() != design.rows {
        return Err(Error::ShapeMismatch(format!(
            "{} samples for {} design rows",
            samples.len(),
            design.rows
        )));
    }
    let op = LeastSquaresOperator::new(design, options)?;
    let coefficients = op.apply(samples.iter().copied());
    Approximant::new(design.basis.clone(), 1, coefficients)
}

/// Coordinatewise extension: `samples` is `n x d`, one column per X-coordinate.
pub fn solve_bochner(design: &DesignMatrix, samples: MatRef<'_, f64>) -> Result<Approximant> {
    solve_bochner_with(design, samples, &SolveOptions::default())
}

pub fn solve_bochner_with(
    design: &DesignMatrix,
    samples: MatRef<'_, f64>,
    options: &SolveOptions,
) -> Result<Approximant> {
    if samples.nrows() != design.rows || samples.ncols() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} samples for {} design rows",
            samples.nrows(),
            samples.ncols(),
            design.rows
        )));
    }
    let op = LeastSquaresOperator::new(design, options)?;
    let d = samples.ncols();
    let columns: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|c| op.apply((0..samples.nrows()).map(|i| samples[(i, c)])))
        .collect();
    let mut coefficients = vec![0.0; design.cols * d];
    for (c, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            coefficients[i * d + c] = *v;
        }
    }
    Approximant::new(design.basis.clone(), d, coefficients)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramDiagnostics {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub rows: usize,
    pub cols: usize,
}

/// Extreme eigenvalues of `(1 / N_eff) L^T W L`.
pub fn gram_diagnostics(design: &DesignMatrix) -> GramDiagnostics {
    let a = design.weighted();
    let gram = a.transpose() * &a * faer::Scale(1.0 / design.effective_size);
    let (lambda_min, lambda_max) = extreme_eigenvalues(gram.as_ref());
    GramDiagnostics {
        lambda_min,
        lambda_max,
        rows: design.rows,
        cols: design.cols,
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn extreme_eigenvalues(sym: MatRef<'_, f64>) -> (f64, f64) {
    if sym.nrows() == 0 {
        return (f64::NAN, f64::NAN);
    }
    let ev = sym
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("symmetric eigenvalue iteration converges");
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorNorms {
    pub scalar_norm: f64,
    pub lifted_norm: f64,
}

/// Operator norm of `B = A diag(sigma)^{-1}` and, by brute force, of `B (x) I_d`.
pub fn operator_norm_tensor_check(
    a: MatRef<'_, f64>,
    sigmas: &[f64],
    d: usize,
) -> Result<TensorNorms> {
    let a = Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0));
    operator_norm_tensor_check_complex(a.as_ref(), sigmas, d)
}

pub fn operator_norm_tensor_check_complex(
    a: MatRef<'_, c64>,
    sigmas: &[f64],
    d: usize,
) -> Result<TensorNorms> {
    if sigmas.len() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{} sigmas for {} columns",
            sigmas.len(),
            a.ncols()
        )));
    }
    if d == 0 || sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("need d >= 1 and positive sigmas".into()));
    }
    let b = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] / sigmas[j]);
    let lifted = Mat::from_fn(a.nrows() * d, a.ncols() * d, |r, c| {
        if r % d == c % d {
            b[(r / d, c / d)]
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let top = |m: &Mat<c64>| -> Result<f64> {
        let sv = m
            .singular_values()
            .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        Ok(sv.iter().copied().fold(0.0, f64::max))
    };
    Ok(TensorNorms {
        scalar_norm: top(&b)?,
        lifted_norm: top(&lifted)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval_tensor;
    use crate::indexing::{smallest_m, CRule, MultiIndex, Rho, WeightSpec};

    fn hermite_line(points: &[f64]) -> SamplePlan {
        SamplePlan::new(
            points.iter().map(|&y| vec![y]).collect(),
            vec![1.0; points.len()],
            Scheme::PlainMu,
            0,
            1.0,
        )
        .unwrap()
    }

    fn basis_01() -> IndexSet {
        IndexSet::from_entries(vec![(MultiIndex::zero(), 1.0), (MultiIndex::from_dense(&[1]), 2.0)])
            .unwrap()
    }

    #[test]
    fn constant_basis_gives_ones() {
        let basis = IndexSet::from_entries(vec![(MultiIndex::zero(), 1.0)]).unwrap();
        let d = assemble_design(PolynomialFamily::hermite(), &basis, &hermite_line(&[0.3, -2.0, 5.0])).unwrap();
        assert!((0..3).all(|i| d.entry(i, 0) == 1.0));
    }

    #[test]
    fn hermite_design_entries() {
        let d = assemble_design(PolynomialFamily::hermite(), &basis_01(), &hermite_line(&[0.0, 2.0])).unwrap();
        assert_eq!(
            [d.entry(0, 0), d.entry(0, 1), d.entry(1, 0), d.entry(1, 1)],
            [1.0, 0.0, 1.0, 2.0]
        );
    }

    #[test]
    fn design_dimension_check() {
        let basis = IndexSet::from_entries(vec![(MultiIndex::from_dense(&[0, 1]), 1.0)]).unwrap();
        assert!(matches!(
            assemble_design(PolynomialFamily::hermite(), &basis, &hermite_line(&[0.0])),
            Err(Error::DimensionMismatch { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn weighted_mean() {
        let basis = IndexSet::from_entries(vec![(MultiIndex::zero(), 1.0)]).unwrap();
        let d = assemble_design(PolynomialFamily::hermite(), &basis, &hermite_line(&[0.1, 0.7])).unwrap();
        let a = solve_scalar(&d, &[1.0, 3.0]).unwrap();
        assert!((a.coefficients()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn affine_fit_in_hermite_basis() {
        let d = assemble_design(PolynomialFamily::hermite(), &basis_01(), &hermite_line(&[0.0, 1.0, 2.0])).unwrap();
        let a = solve_scalar(&d, &[1.0, 2.0, 3.0]).unwrap();
        // f(y) = 1 + y = phi_0 + phi_1
        assert!((a.coefficients()[0] - 1.0).abs() < 1e-13);
        assert!((a.coefficients()[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let d = assemble_design(PolynomialFamily::hermite(), &basis_01(), &hermite_line(&[1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(solve_scalar(&d, &[1.0, 1.0, 1.0]), Err(Error::RankDeficient { .. })));
        let opts = SolveOptions {
            rank_policy: RankPolicy::PseudoInverse,
            ..SolveOptions::default()
        };
        let a = solve_scalar_with(&d, &[2.0, 2.0, 2.0], &opts).unwrap();
        // minimum-norm solution of c0 + c1 = 2
        assert!((a.coefficients()[0] - 1.0).abs() < 1e-12);
        assert!((a.coefficients()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let d = assemble_design(PolynomialFamily::hermite(), &basis_01(), &hermite_line(&[0.0, 1.0, 2.0])).unwrap();
        assert!(matches!(solve_scalar(&d, &[1.0]), Err(Error::ShapeMismatch(_))));
        let under = assemble_design(PolynomialFamily::hermite(), &basis_01(), &hermite_line(&[0.0])).unwrap();
        assert!(matches!(solve_scalar(&under, &[1.0]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn evaluate_matches_naive_sum() {
        let spec = WeightSpec::affine(Rho::geometric(1.5), CRule::Legendre, 1.0).unwrap();
        let basis = smallest_m(&spec, 30).unwrap();
        let fam = PolynomialFamily::legendre();
        let coeffs: Vec<f64> = (0..60).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let a = Approximant::new(basis.clone(), 2, coeffs.clone()).unwrap();
        let y: Vec<f64> = (0..basis.max_dim()).map(|j| (j as f64 * 0.37).sin()).collect();
        let got = a.evaluate(fam, &y).unwrap();
        for c in 0..2 {
            let naive: f64 = basis
                .indices()
                .iter()
                .enumerate()
                .map(|(i, s)| coeffs[2 * i + c] * eval_tensor(fam, s, &y).unwrap())
                .sum();
            assert!((got[c] - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
        let constant = Approximant::new(IndexSet::from_entries(vec![(MultiIndex::zero(), 1.0)]).unwrap(), 1, vec![4.5]).unwrap();
        assert_eq!(constant.evaluate(fam, &[]).unwrap(), vec![4.5]);
        assert!(Approximant::zero(basis, 3).evaluate(fam, &y).unwrap().iter().all(|v| *v == 0.0));
        assert!(a.evaluate(fam, &y[..1]).is_err());
    }

    #[test]
    fn gram_of_exact_quadrature_is_identity() {
        let fam = PolynomialFamily::hermite();
        let rule = fam.quadrature(8).unwrap();
        let basis = IndexSet::from_entries(
            (0..5u32).map(|k| (MultiIndex::from_dense(&[k]), 1.0 + k as f64)).collect(),
        )
        .unwrap();
        let plan = SamplePlan::new(
            rule.nodes.iter().map(|&y| vec![y]).collect(),
            rule.weights.clone(),
            Scheme::PlainMu,
            0,
            1.0,
        )
        .unwrap();
        let mut d = assemble_design(fam, &basis, &plan).unwrap();
        d.effective_size = 1.0;
        let g = gram_diagnostics(&d);
        assert!((g.lambda_min - 1.0).abs() < 1e-10 && (g.lambda_max - 1.0).abs() < 1e-10);
    }

    #[test]
    fn duplicate_column_is_singular() {
        let l = Mat::from_fn(6, 3, |i, j| if j == 2 { (i as f64).sin() } else { ((i + j) as f64).cos() + if j == 1 { 0.0 } else { 0.0 } });
        let mut l = l;
        for i in 0..6 {
            l[(i, 1)] = l[(i, 0)];
        }
        let basis = IndexSet::from_entries(
            (0..3u32).map(|k| (MultiIndex::from_dense(&[k]), 1.0 + k as f64)).collect(),
        )
        .unwrap();
        let d = DesignMatrix::from_parts(l.as_ref(), vec![1.0; 6], basis, 6.0).unwrap();
        assert!(gram_diagnostics(&d).lambda_min <= 1e-14);
    }

    #[test]
    fn tensor_norm_examples() {
        let id = Mat::<f64>::identity(3, 3);
        let n = operator_norm_tensor_check(id.as_ref(), &[1.0; 3], 3).unwrap();
        assert!((n.scalar_norm - 1.0).abs() < 1e-12 && (n.lifted_norm - 1.0).abs() < 1e-12);
        let mut a = Mat::<f64>::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 5.0;
        let n = operator_norm_tensor_check(a.as_ref(), &[1.0, 10.0], 2).unwrap();
        assert!((n.scalar_norm - 2.0).abs() < 1e-12 && (n.lifted_norm - 2.0).abs() < 1e-12);
        assert!(operator_norm_tensor_check(a.as_ref(), &[1.0], 2).is_err());
    }
}
