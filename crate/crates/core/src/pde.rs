//! Parametric diffusion `-(a(y) u')' = f` on `(0, 1)` with P1 finite elements.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::PolynomialFamily;
use crate::error::{Error, Result};
use crate::least_squares::Approximant;
use crate::sampling::{draw_base_measure, SamplePlan};

/// One component function `psi_j` on `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psi {
    /// `amplitude * sin(mode * pi * x)`.
    Sine { amplitude: f64, mode: u32 },
    /// Tent of the given height on `[center - half_width, center + half_width]`.
    Hat {
        center: f64,
        half_width: f64,
        height: f64,
    },
    /// Values on a uniform grid of `[0, 1]`, linear in between.
    Tabulated { values: Vec<f64> },
}

impl Psi {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Psi::Sine { amplitude, mode } => amplitude * (*mode as f64 * std::f64::consts::PI * x).sin(),
            Psi::Hat {
                center,
                half_width,
                height,
            } => height * (1.0 - (x - center).abs() / half_width).max(0.0),
            Psi::Tabulated { values } => interpolate(values, x),
        }
    }

    /// `sup |psi|` on `[0, 1]`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Psi::Sine { amplitude, .. } => amplitude.abs(),
            Psi::Hat { height, .. } => height.abs(),
            Psi::Tabulated { values } => values.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }
}

fn interpolate(values: &[f64], x: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let t = x.clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (t.floor() as usize).min(n - 2);
            let r = t - i as f64;
            values[i] * (1.0 - r) + values[i + 1] * r
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanField {
    Constant { value: f64 },
    Tabulated { values: Vec<f64> },
}

impl MeanField {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MeanField::Constant { value } => *value,
            MeanField::Tabulated { values } => interpolate(values, x),
        }
    }

    fn inf(&self) -> f64 {
        match self {
            MeanField::Constant { value } => *value,
            MeanField::Tabulated { values } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CoefficientField {
    /// `a(y) = exp(sum_j y_j psi_j)` with Gaussian `y_j`.
    Lognormal { psi: Vec<Psi> },
    /// `a(y) = abar + sum_j y_j psi_j` with `y_j` in `[-1, 1]`.
    Affine { abar: MeanField, psi: Vec<Psi> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiFamily {
    Sine,
    Hats,
}

impl CoefficientField {
    /// `psi_j = kappa j^{-theta} sin(j pi x)` or disjoint hats of height `kappa j^{-theta}`.
    pub fn standard_psi(family: PsiFamily, kappa: f64, theta: f64, dims: usize) -> Vec<Psi> {
        (1..=dims)
            .map(|j| {
                let amp = kappa * (j as f64).powf(-theta);
                match family {
                    PsiFamily::Sine => Psi::Sine {
                        amplitude: amp,
                        mode: j as u32,
                    },
                    PsiFamily::Hats => Psi::Hat {
                        center: (j as f64 - 0.5) / dims as f64,
                        half_width: 0.5 / dims as f64,
                        height: amp,
                    },
                }
            })
            .collect()
    }

    pub fn lognormal(psi: Vec<Psi>) -> Self {
        CoefficientField::Lognormal { psi }
    }

    /// Rejects families with `inf abar - sum_j sup |psi_j| <= 0`.
    pub fn affine(abar: MeanField, psi: Vec<Psi>) -> Result<Self> {
        let margin = abar.inf() - psi.iter().map(Psi::sup_norm).sum::<f64>();
        if !(margin > 0.0) {
            return Err(Error::EllipticityViolation {
                value: margin,
                x: f64::NAN,
            });
        }
        Ok(CoefficientField::Affine { abar, psi })
    }

    pub fn psi(&self) -> &[Psi] {
        match self {
            CoefficientField::Lognormal { psi } | CoefficientField::Affine { psi, .. } => psi,
        }
    }

    pub fn dims(&self) -> usize {
        self.psi().len()
    }

    /// Parameter measure the field is defined against.
    pub fn family(&self) -> PolynomialFamily {
        match self {
            CoefficientField::Lognormal { .. } => PolynomialFamily::hermite(),
            CoefficientField::Affine { .. } => PolynomialFamily::legendre(),
        }
    }

    /// `sup_x sum_j rho_j |psi_j(x)|`, sampled on a fine grid.
    pub fn weighted_sup(&self, rho: impl Fn(usize) -> f64) -> f64 {
        (0..=4096)
            .map(|i| {
                let x = i as f64 / 4096.0;
                self.psi()
                    .iter()
                    .enumerate()
                    .map(|(j, p)| rho(j + 1) * p.eval(x).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

pub fn eval_coefficient(field: &CoefficientField, y: &[f64], x: f64) -> Result<f64> {
    let dims = field.dims();
    if y.len() < dims {
        return Err(Error::DimensionMismatch {
            needed: dims,
            got: y.len(),
        });
    }
    let b: f64 = field.psi().iter().zip(y).map(|(p, yj)| yj * p.eval(x)).sum();
    let value = match field {
        CoefficientField::Lognormal { .. } => b.exp(),
        CoefficientField::Affine { abar, .. } => abar.eval(x) + b,
    };
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::EllipticityViolation { value, x });
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FemMesh {
    pub elements: usize,
}

impl FemMesh {
    pub fn new(elements: usize) -> Result<Self> {
        if elements < 2 {
            return Err(Error::InvalidParameter("a mesh needs at least 2 elements".into()));
        }
        Ok(FemMesh { elements })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.elements as f64
    }

    pub fn interior_dofs(&self) -> usize {
        self.elements - 1
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.elements as f64
    }

    pub fn midpoint(&self, e: usize) -> f64 {
        (e as f64 + 0.5) / self.elements as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rhs {
    Constant { value: f64 },
}

impl Rhs {
    pub fn constant(value: f64) -> Self {
        Rhs::Constant { value }
    }

    pub fn eval(&self, _x: f64) -> f64 {
        match self {
            Rhs::Constant { value } => *value,
        }
    }
}

impl Default for Rhs {
    fn default() -> Self {
        Rhs::constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemSolution {
    pub mesh: FemMesh,
    /// Values at the interior nodes `x_1, ..., x_{n_h - 1}`.
    pub values: Vec<f64>,
}

impl FemSolution {
    pub fn zero(mesh: FemMesh) -> Self {
        FemSolution {
            mesh,
            values: vec![0.0; mesh.interior_dofs()],
        }
    }

    /// Value at node `i` in `0..=n_h`, boundary nodes included.
    pub fn nodal(&self, i: usize) -> f64 {
        if i == 0 || i == self.mesh.elements {
            0.0
        } else {
            self.values[i - 1]
        }
    }
}

/// Midpoint values of every `psi_j` on a mesh, shared across solves.
#[derive(Debug, Clone)]
pub struct PreparedField {
    field: CoefficientField,
    mesh: FemMesh,
    /// `psi[j][e]` at the midpoint of element `e`.
    psi: Vec<Vec<f64>>,
    abar: Vec<f64>,
    load: Vec<f64>,
}

impl PreparedField {
    pub fn new(field: &CoefficientField, mesh: FemMesh, rhs: Rhs) -> Self {
        let mids: Vec<f64> = (0..mesh.elements).map(|e| mesh.midpoint(e)).collect();
        let psi = field
            .psi()
            .iter()
            .map(|p| mids.iter().map(|&x| p.eval(x)).collect())
            .collect();
        let abar = match field {
            CoefficientField::Affine { abar, .. } => mids.iter().map(|&x| abar.eval(x)).collect(),
            CoefficientField::Lognormal { .. } => Vec::new(),
        };
        let h = mesh.h();
        // element-midpoint rule for the load, exact for constant f
        let fe: Vec<f64> = mids.iter().map(|&x| rhs.eval(x) * h * 0.5).collect();
        let load = (1..mesh.elements).map(|i| fe[i - 1] + fe[i]).collect();
        PreparedField {
            field: field.clone(),
            mesh,
            psi,
            abar,
            load,
        }
    }

    pub fn mesh(&self) -> FemMesh {
        self.mesh
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    /// Coefficient at every element midpoint.
    pub fn midpoint_coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        let dims = self.psi.len();
        if y.len() < dims {
            return Err(Error::DimensionMismatch {
                needed: dims,
                got: y.len(),
            });
        }
        (0..self.mesh.elements)
            .map(|e| {
                let b: f64 = self.psi.iter().zip(y).map(|(p, yj)| yj * p[e]).sum();
                let value = match self.field {
                    CoefficientField::Lognormal { .. } => b.exp(),
                    CoefficientField::Affine { .. } => self.abar[e] + b,
                };
                if value > 0.0 && value.is_finite() {
                    Ok(value)
                } else {
                    Err(Error::EllipticityViolation {
                        value,
                        x: self.mesh.midpoint(e),
                    })
                }
            })
            .collect()
    }

    pub fn solve(&self, y: &[f64]) -> Result<FemSolution> {
        let a = self.midpoint_coefficients(y)?;
        self.solve_with_coefficients(&a)
    }

    pub fn solve_with_coefficients(&self, a: &[f64]) -> Result<FemSolution> {
        let h = self.mesh.h();
        let n = self.mesh.interior_dofs();
        let k: Vec<f64> = a.iter().map(|ae| ae / h).collect();
        let diag: Vec<f64> = (0..n).map(|i| k[i] + k[i + 1]).collect();
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| -k[i + 1]).collect();
        let values = thomas(&off, &diag, &off, &self.load)?;
        Ok(FemSolution {
            mesh: self.mesh,
            values,
        })
    }
}

/// Tridiagonal solve; `lower[i]` couples rows `i + 1` and `i`, `upper[i]` rows `i` and `i + 1`.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if !(pivot.abs() > 0.0 && pivot.is_finite()) {
        return Err(Error::SingularSystem);
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if !(pivot.abs() > 0.0 && pivot.is_finite()) {
            return Err(Error::SingularSystem);
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

pub fn solve_fem(field: &CoefficientField, y: &[f64], rhs: Rhs, mesh: FemMesh) -> Result<FemSolution> {
    PreparedField::new(field, mesh, rhs).solve(y)
}

/// `||u'||_{L2(0,1)}` of the piecewise linear interpolant.
pub fn v_norm(sol: &FemSolution) -> f64 {
    v_norm_nodal(&sol.values, sol.mesh)
}

/// Same as [`v_norm`] for a bare vector of interior nodal values.
pub fn v_norm_nodal(values: &[f64], mesh: FemMesh) -> f64 {
    let h = mesh.h();
    let n = values.len();
    let mut sum = 0.0;
    for e in 0..=n {
        let left = if e == 0 { 0.0 } else { values[e - 1] };
        let right = if e == n { 0.0 } else { values[e] };
        sum += (right - left).powi(2);
    }
    (sum / h).sqrt()
}

/// Solutions at every point of a plan, one row per point (`n x (n_h - 1)`).
pub fn solve_at_points(prepared: &PreparedField, plan: &SamplePlan) -> Result<Mat<f64>> {
    let rows: Vec<Vec<f64>> = plan
        .points()
        .par_iter()
        .map(|y| prepared.solve(y).map(|s| s.values))
        .collect::<Result<_>>()?;
    let d = prepared.mesh.interior_dofs();
    Ok(Mat::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McError {
    pub rmse: f64,
    pub stderr: f64,
}

/// Monte-Carlo estimate of `||v - approx||_{L2(U, V; mu)}` from `test_count` draws of `mu`.
pub fn bochner_error_mc(
    approx: &Approximant,
    prepared: &PreparedField,
    test_count: usize,
    seed: u64,
    dims: usize,
) -> Result<McError> {
    let mesh = prepared.mesh;
    if approx.x_dim() != mesh.interior_dofs() {
        return Err(Error::DimensionMismatch {
            needed: mesh.interior_dofs(),
            got: approx.x_dim(),
        });
    }
    let needed = approx.basis().max_dim().max(prepared.field.dims());
    if dims < needed {
        return Err(Error::DimensionMismatch { needed, got: dims });
    }
    let family = prepared.field.family();
    let plan = draw_base_measure(family, test_count, seed, dims)?;
    let errors: Vec<f64> = plan
        .points()
        .par_iter()
        .map(|y| {
            let u = prepared.solve(y)?;
            let g = approx.evaluate(family, y)?;
            let diff: Vec<f64> = u.values.iter().zip(&g).map(|(a, b)| a - b).collect();
            Ok(v_norm_nodal(&diff, mesh).powi(2))
        })
        .collect::<Result<_>>()?;
    Ok(mc_summary(&errors))
}

/// Root of the mean of squared errors, with a delta-method standard error.
pub fn mc_summary(squared: &[f64]) -> McError {
    let n = squared.len() as f64;
    if squared.is_empty() {
        return McError {
            rmse: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = squared.iter().sum::<f64>() / n;
    let var = if squared.len() > 1 {
        squared.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let rmse = mean.sqrt();
    let stderr = if rmse > 0.0 {
        (var / n).sqrt() / (2.0 * rmse)
    } else {
        0.0
    };
    McError { rmse, stderr }
}
