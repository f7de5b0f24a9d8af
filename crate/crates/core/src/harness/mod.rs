//! Synthetic targets, recovery experiments, rate fitting and the command line.

pub mod cli;
pub mod config;

use std::collections::HashMap;
use std::io::Write;

use faer::Mat;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use config::{ExperimentConfig, SamplingConfig, SchemeChoice, TargetKind};

use crate::basis::{PointCache, PolynomialFamily, RecurrenceTable};
use crate::error::{Error, Result};
use crate::indexing::{smallest_m, CoefficientTable, IndexSet, WeightSpec};
use crate::least_squares::{
    assemble_design, gram_diagnostics, solve_bochner, solve_scalar, Approximant,
};
use crate::pde::{bochner_error_mc, solve_at_points, McError, PreparedField};
use crate::sampling::{
    draw_samples_with, sample_rng, subsample_with, NuSpec, SamplePlan, SamplerTables, Scheme,
};

/// `f_s = sigma_s^{-1} g_s` with `g` uniform on the unit sphere of `R^{|active| x d}`.
pub fn synth_function(_spec: &WeightSpec, active_set: &IndexSet, x_dim: usize, seed: u64) -> CoefficientTable {
    let mut rng = sample_rng(seed, u64::MAX);
    let mut g: Vec<f64> = (0..active_set.len() * x_dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in g.iter_mut() {
        *v /= norm;
    }
    let entries = active_set
        .iter()
        .enumerate()
        .map(|(i, (s, sigma))| {
            let row = g[i * x_dim..(i + 1) * x_dim].iter().map(|v| v / sigma).collect();
            (s.clone(), row)
        })
        .collect();
    CoefficientTable {
        x_dim,
        entries,
    }
}

/// Values of a coefficient table at the points of a plan, `n x d`.
pub fn evaluate_table(
    family: PolynomialFamily,
    coeffs: &CoefficientTable,
    points: &[Vec<f64>],
) -> Result<Mat<f64>> {
    let dims = coeffs.entries.iter().map(|(s, _)| s.max_dim()).max().unwrap_or(0);
    let degree = coeffs.entries.iter().map(|(s, _)| s.max_entry()).max().unwrap_or(0) as usize;
    if let Some(p) = points.iter().find(|p| p.len() < dims) {
        return Err(Error::DimensionMismatch {
            needed: dims,
            got: p.len(),
        });
    }
    let table = RecurrenceTable::new(family, degree);
    let d = coeffs.x_dim;
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|y| {
            let cache = PointCache::new(&table, degree, &y[..dims]);
            let mut out = vec![0.0; d];
            for (s, c) in &coeffs.entries {
                let phi = cache.tensor(s);
                for (o, v) in out.iter_mut().zip(c) {
                    *o += v * phi;
                }
            }
            out
        })
        .collect();
    Ok(Mat::from_fn(points.len(), d, |i, j| rows[i][j]))
}

/// `||f - g||_{L2}^2` by Parseval over the union of both supports.
pub fn parseval_error_sq(truth: &CoefficientTable, approx: &Approximant) -> f64 {
    let mut rows: HashMap<_, Vec<f64>> = truth
        .entries
        .iter()
        .map(|(s, v)| (s.clone(), v.clone()))
        .collect();
    for (i, s) in approx.basis().indices().iter().enumerate() {
        let row = rows.entry(s.clone()).or_insert_with(|| vec![0.0; truth.x_dim]);
        for (r, c) in row.iter_mut().zip(approx.row(i)) {
            *r -= c;
        }
    }
    // sort for a summation order independent of hashing
    let mut terms: Vec<f64> = rows.values().map(|v| v.iter().map(|x| x * x).sum()).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval of the slope.
    pub ci: (f64, f64),
}

/// Least squares line through `(ln n, ln rmse)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!("{} points, need 3", points.len())));
    }
    if points.iter().any(|(n, r)| !(*n > 0.0 && *r > 0.0 && r.is_finite())) {
        return Err(Error::DegenerateInput("n and rmse must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateInput("all n are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = (rss / (k - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, k - 2.0)
        .map_err(|e| Error::DegenerateInput(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        ci: (slope - t * se, slope + t * se),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub m: usize,
    pub samples_used: usize,
    pub lambda_min: f64,
    pub rmse: f64,
    pub stderr: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fitted_slope: Option<f64>,
    pub slope_ci: Option<(f64, f64)>,
    pub intercept: Option<f64>,
    pub theory_slope: f64,
    pub fit_status: String,
}

impl RateReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "m", "samples_used", "lambda_min", "rmse", "stderr", "status"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.m.to_string(),
                r.samples_used.to_string(),
                format!("{:?}", r.lambda_min),
                format!("{:?}", r.rmse),
                format!("{:?}", r.stderr),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows that enter the slope fit.
    pub fn fitted_rows(&self) -> impl Iterator<Item = &RateRow> {
        self.rows.iter().filter(|r| r.status == "ok")
    }
}

/// Outcome of one recovery at a single `n`.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub row: RateRow,
    pub approximant: Option<Approximant>,
}

pub const EXACT_TOL: f64 = 1e-8;

/// Everything an experiment needs that does not depend on `n`.
pub struct Experiment {
    pub config: ExperimentConfig,
    truth: Option<CoefficientTable>,
    prepared: Option<PreparedField>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut truth = None;
        let mut prepared = None;
        match config.target {
            TargetKind::SyntheticScalar | TargetKind::SyntheticBochner { .. } => {
                let d = match config.target {
                    TargetKind::SyntheticBochner { d } => d,
                    _ => 1,
                };
                let size = if config.active_size > 0 {
                    config.active_size
                } else {
                    let largest = config.n_grid.iter().copied().chain([config.n]).max().unwrap_or(1);
                    (4 * basis_size(&config, largest)).max(256)
                };
                let active = smallest_m(&config.weights, size)?;
                truth = Some(synth_function(&config.weights, &active, d, config.seed));
            }
            TargetKind::PdeLognormal | TargetKind::PdeAffine => {
                let field = config.field.build(config.target)?;
                prepared = Some(PreparedField::new(&field, config.field.mesh()?, config.field.rhs()));
            }
        }
        Ok(Experiment {
            config,
            truth,
            prepared,
        })
    }

    pub fn truth(&self) -> Option<&CoefficientTable> {
        self.truth.as_ref()
    }

    pub fn prepared_field(&self) -> Option<&PreparedField> {
        self.prepared.as_ref()
    }

    /// Parameter dimensions the target depends on.
    fn target_dims(&self) -> usize {
        match (&self.truth, &self.prepared) {
            (Some(t), _) => t.entries.iter().map(|(s, _)| s.max_dim()).max().unwrap_or(0),
            (_, Some(p)) => p.field().dims(),
            _ => 0,
        }
    }

    fn x_dim(&self) -> usize {
        match (&self.truth, &self.prepared) {
            (Some(t), _) => t.x_dim,
            (_, Some(p)) => p.mesh().interior_dofs(),
            _ => 1,
        }
    }

    /// Draws the plan for one attempt at `n`.
    fn draw_plan(&self, nu: &NuSpec, tables: &SamplerTables, n: usize, seed: u64, dims: usize) -> Result<SamplePlan> {
        let c = &self.config;
        match c.scheme {
            SchemeChoice::I => {
                let plan = draw_samples_with(nu, tables, n, seed, dims, Scheme::IidSchemeI)?;
                let g = gram_diagnostics(&assemble_design(c.family, &nu.basis, &plan)?);
                if g.lambda_min < c.sampling.subsample.full_gram_min {
                    return Err(Error::IllConditionedInput {
                        lambda_min: g.lambda_min,
                    });
                }
                Ok(plan)
            }
            SchemeChoice::II => {
                let count = oversampled_count(c.sampling.oversampling, n);
                let full = draw_samples_with(nu, tables, count, seed, dims, Scheme::IidForSubsampling)?;
                let target = (c.sampling.c2 * nu.m as f64).ceil() as usize;
                subsample_with(&full, c.family, &nu.basis, target, &c.sampling.subsample)
            }
        }
    }

    pub fn run_one(&self, n: usize) -> Result<Recovery> {
        let c = &self.config;
        let m = basis_size(c, n);
        let nu = NuSpec::with_tail(c.family, &c.weights, m, c.sampling.tail_tol, c.sampling.max_tail)?;
        let dims = nu.active_dims().max(self.target_dims()).max(1);
        let tables = SamplerTables::new(c.family, nu.max_degree())?;
        let mut plan = None;
        let mut last_err = None;
        for attempt in 0..2u64 {
            let seed = derive_seed(c.seed, n, attempt);
            match self.draw_plan(&nu, &tables, n, seed, dims) {
                Ok(p) => {
                    plan = Some(p);
                    break;
                }
                Err(e @ Error::IllConditionedInput { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        let Some(plan) = plan else {
            let lambda_min = match last_err {
                Some(Error::IllConditionedInput { lambda_min }) => lambda_min,
                _ => f64::NAN,
            };
            return Ok(Recovery {
                row: RateRow {
                    n,
                    m,
                    samples_used: 0,
                    lambda_min,
                    rmse: f64::NAN,
                    stderr: f64::NAN,
                    status: "ill_conditioned".into(),
                },
                approximant: None,
            });
        };
        let design = assemble_design(c.family, &nu.basis, &plan)?;
        let gram = gram_diagnostics(&design);
        let approx = match (&self.truth, &self.prepared) {
            (Some(truth), _) => {
                let values = evaluate_table(c.family, truth, plan.points())?;
                if truth.x_dim == 1 {
                    let col: Vec<f64> = (0..values.nrows()).map(|i| values[(i, 0)]).collect();
                    solve_scalar(&design, &col)?
                } else {
                    solve_bochner(&design, values.as_ref())?
                }
            }
            (_, Some(prepared)) => {
                let values = solve_at_points(prepared, &plan)?;
                solve_bochner(&design, values.as_ref())?
            }
            _ => unreachable!("experiment has a target"),
        };
        let err = self.error_of(&approx, n)?;
        let status = if err.rmse <= EXACT_TOL { "exact" } else { "ok" };
        Ok(Recovery {
            row: RateRow {
                n,
                m,
                samples_used: plan.len(),
                lambda_min: gram.lambda_min,
                rmse: err.rmse,
                stderr: err.stderr,
                status: status.into(),
            },
            approximant: Some(approx),
        })
    }

    /// Exact Parseval error for synthetic targets, Monte Carlo for the PDE.
    pub fn error_of(&self, approx: &Approximant, n: usize) -> Result<McError> {
        if approx.x_dim() != self.x_dim() {
            return Err(Error::DimensionMismatch {
                needed: self.x_dim(),
                got: approx.x_dim(),
            });
        }
        match (&self.truth, &self.prepared) {
            (Some(truth), _) => Ok(McError {
                rmse: parseval_error_sq(truth, approx).sqrt(),
                stderr: 0.0,
            }),
            (_, Some(prepared)) => {
                let dims = approx.basis().max_dim().max(prepared.field().dims());
                bochner_error_mc(approx, prepared, self.config.test_count, derive_seed(self.config.seed, n, 2), dims)
            }
            _ => unreachable!("experiment has a target"),
        }
    }

    /// Monte-Carlo error of a synthetic recovery, for cross-checking the Parseval value.
    pub fn synthetic_error_mc(&self, approx: &Approximant, count: usize, seed: u64) -> Result<McError> {
        let truth = self
            .truth
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("not a synthetic target".into()))?;
        let dims = self.target_dims().max(approx.basis().max_dim());
        let plan = crate::sampling::draw_base_measure(self.config.family, count, seed, dims)?;
        let exact = evaluate_table(self.config.family, truth, plan.points())?;
        let d = truth.x_dim;
        let sq: Vec<f64> = plan
            .points()
            .par_iter()
            .enumerate()
            .map(|(i, y)| {
                let g = approx.evaluate(self.config.family, y)?;
                Ok((0..d).map(|j| (exact[(i, j)] - g[j]).powi(2)).sum())
            })
            .collect::<Result<_>>()?;
        Ok(crate::pde::mc_summary(&sq))
    }
}

/// `m` for the configured scheme: `max(1, floor(n / (c ln n)))` or `n`.
pub fn basis_size(config: &ExperimentConfig, n: usize) -> usize {
    match config.scheme {
        SchemeChoice::I => {
            let nf = n as f64;
            ((nf / (config.sampling.scheme_i_factor * nf.ln())).floor() as usize).max(1)
        }
        SchemeChoice::II => n,
    }
}

/// `ceil(c n ln n)`.
pub fn oversampled_count(c: f64, n: usize) -> usize {
    let nf = n as f64;
    (c * nf * nf.ln()).ceil() as usize
}

/// Seed for attempt `attempt` at grid point `n`, from the experiment seed.
pub fn derive_seed(seed: u64, n: usize, attempt: u64) -> u64 {
    sample_rng(seed, (n as u64) << 4 | attempt).random()
}

pub fn run_recovery_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    let exp = Experiment::new(config.clone())?;
    let mut rows = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let row = match exp.run_one(n) {
            Ok(r) => r.row,
            Err(e) if e.is_numerical() => RateRow {
                n,
                m: basis_size(config, n),
                samples_used: 0,
                lambda_min: f64::NAN,
                rmse: f64::NAN,
                stderr: f64::NAN,
                status: format!("failed: {e}"),
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    let mut report = RateReport {
        rows,
        fitted_slope: None,
        slope_ci: None,
        intercept: None,
        theory_slope: -1.0 / config.weights.q,
        fit_status: String::new(),
    };
    let pts: Vec<(f64, f64)> = report.fitted_rows().map(|r| (r.n as f64, r.rmse)).collect();
    if report.rows.iter().all(|r| r.status == "exact") {
        report.fit_status = "exact".into();
    } else {
        match fit_slope(&pts) {
            Ok(fit) => {
                report.fitted_slope = Some(fit.slope);
                report.slope_ci = Some(fit.ci);
                report.intercept = Some(fit.intercept);
                report.fit_status = "ok".into();
            }
            Err(e) => report.fit_status = format!("skipped: {e}"),
        }
    }
    Ok(report)
}
