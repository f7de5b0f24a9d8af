//! Deterministic greedy subsampling of an oversampled plan.
//!
//! With `w_i = sqrt(omega_i) phi(y_i) / sqrt(s T)` (`s` the plan's weight scale, `T` the
//! target) the sub-Gram of a selection is `A = sum_{selected} w w^T`. The greedy adds the
//! pool point with the largest `w^T (eps I + A)^{-1} w`, i.e. the largest increase of
//! `log det (eps I + A)`. This gain only decreases as points are added, so stale gains are
//! upper bounds and candidates are re-evaluated lazily from a max-heap. Rank-one downdates of
//! the inverse are kept as a block of vectors and folded into every pool gain with one
//! matrix product per block. Both spectral bounds are checked on the result.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::{SamplePlan, Scheme};
use crate::basis::PolynomialFamily;
use crate::error::{Error, Result};
use crate::indexing::IndexSet;
use crate::least_squares::{assemble_design, extreme_eigenvalues, gram_diagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleOptions {
    /// Required lower spectral bound of the sub-Gram.
    pub gamma_low: f64,
    /// Required upper spectral bound of the sub-Gram.
    pub gamma_high: f64,
    /// Required `lambda_min` of the full Gram.
    pub full_gram_min: f64,
    /// `target >= c2_floor * m`.
    pub c2_floor: f64,
    /// `eps` in the log-determinant objective.
    pub regularization: f64,
    /// Selections between full updates of the pool gains.
    pub block: usize,
}

impl Default for SubsampleOptions {
    fn default() -> Self {
        SubsampleOptions {
            gamma_low: 1.0 / 66.0,
            gamma_high: 70.0,
            full_gram_min: 0.5,
            c2_floor: 1.0,
            regularization: 1e-2,
            block: 64,
        }
    }
}

/// Default target `ceil(1.2 m)`.
pub fn default_target(m: usize) -> usize {
    (1.2 * m as f64).ceil() as usize
}

pub fn subsample(
    plan: &SamplePlan,
    family: PolynomialFamily,
    basis: &IndexSet,
    target: usize,
) -> Result<SamplePlan> {
    subsample_with(plan, family, basis, target, &SubsampleOptions::default())
}

pub fn subsample_with(
    plan: &SamplePlan,
    family: PolynomialFamily,
    basis: &IndexSet,
    target: usize,
    options: &SubsampleOptions,
) -> Result<SamplePlan> {
    let m = basis.len();
    let min = (options.c2_floor * m as f64).ceil() as usize;
    if target < min.max(1) {
        return Err(Error::TargetTooSmall { target, min });
    }
    if !(options.regularization > 0.0) || options.block == 0 {
        return Err(Error::InvalidParameter(
            "subsampling needs a positive regularization and block size".into(),
        ));
    }
    let n = plan.len();
    // pool as columns, m x N
    let pool = assemble_design(family, basis, plan)?.weighted().transpose().to_owned();
    let gram = &pool * pool.transpose() * faer::Scale(1.0 / plan.effective_size());
    let (lambda_min, _) = extreme_eigenvalues(gram.as_ref());
    drop(gram);

    if n <= target {
        if lambda_min < options.gamma_low {
            return Err(Error::IllConditionedInput { lambda_min });
        }
        return reweighted(plan, (0..n).collect(), target);
    }
    if lambda_min < options.full_gram_min {
        return Err(Error::IllConditionedInput { lambda_min });
    }

    let scale = 1.0 / (plan.weight_scale() * target as f64);
    let pool = pool * faer::Scale(scale.sqrt());
    let mut chosen = greedy_log_det(pool.as_ref(), target, options)?;
    chosen.sort_unstable();
    let out = reweighted(plan, chosen, target)?;
    let check = gram_diagnostics(&assemble_design(family, basis, &out)?);
    if !(check.lambda_min >= options.gamma_low && check.lambda_max <= options.gamma_high) {
        return Err(Error::SubsamplingFailed(format!(
            "sub-Gram spectrum [{:.3e}, {:.3e}] outside [{:.3e}, {:.3e}]",
            check.lambda_min, check.lambda_max, options.gamma_low, options.gamma_high
        )));
    }
    Ok(out)
}

/// Selected points with `omega = (target / N) * omega_full`.
fn reweighted(plan: &SamplePlan, chosen: Vec<usize>, target: usize) -> Result<SamplePlan> {
    let scale = target as f64 / plan.len() as f64;
    let points = chosen.iter().map(|&i| plan.points()[i].clone()).collect();
    let weights = chosen.iter().map(|&i| scale * plan.weights()[i]).collect();
    Ok(SamplePlan::new(
        points,
        weights,
        Scheme::SubsampledSchemeII,
        plan.seed(),
        scale * plan.weight_scale(),
    )?
    .with_basis_size(plan.basis_size()))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // larger gain first, then the earlier pool index
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn column(pool: MatRef<'_, f64>, i: usize) -> Vec<f64> {
    (0..pool.nrows()).map(|k| pool[(k, i)]).collect()
}

/// Lazy greedy maximization of `log det (eps I + sum w w^T)` over the columns of `pool`.
fn greedy_log_det(pool: MatRef<'_, f64>, target: usize, options: &SubsampleOptions) -> Result<Vec<usize>> {
    let (m, n) = (pool.nrows(), pool.ncols());
    let eps = options.regularization;
    let mut inverse = Mat::<f64>::from_fn(m, m, |i, j| if i == j { 1.0 / eps } else { 0.0 });
    let mut base: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|k| pool[(k, i)].powi(2)).sum::<f64>() / eps)
        .collect();
    let mut taken = vec![false; n];
    let mut pending: Vec<Vec<f64>> = Vec::with_capacity(options.block);
    let mut heap: BinaryHeap<Candidate> = (0..n).map(|index| Candidate { gain: base[index], index }).collect();
    let mut chosen = Vec::with_capacity(target);

    while chosen.len() < target {
        let top = heap.pop().ok_or_else(|| {
            Error::SubsamplingFailed("no admissible point left in the pool".into())
        })?;
        let w = column(pool, top.index);
        let gain = base[top.index] - pending.iter().map(|z| dot(z, &w).powi(2)).sum::<f64>();
        if heap.peek().is_some_and(|next| gain < next.gain) {
            heap.push(Candidate { gain, index: top.index });
            continue;
        }
        // the inverse is symmetric, so columns can stand in for rows
        let z: Vec<f64> = (0..m)
            .map(|r| (0..m).map(|k| inverse[(k, r)] * w[k]).sum())
            .collect();
        let q = dot(&z, &w);
        let norm = 1.0 / (1.0 + q).sqrt();
        let z: Vec<f64> = z.iter().map(|v| v * norm).collect();
        for j in 0..m {
            for i in 0..m {
                inverse[(i, j)] -= z[i] * z[j];
            }
        }
        taken[top.index] = true;
        chosen.push(top.index);
        pending.push(z);

        if pending.len() == options.block && chosen.len() < target {
            let block = Mat::from_fn(pending.len(), m, |b, k| pending[b][k]);
            let proj = &block * pool;
            for (i, g) in base.iter_mut().enumerate() {
                *g -= (0..proj.nrows()).map(|b| proj[(b, i)].powi(2)).sum::<f64>();
            }
            pending.clear();
            heap = (0..n)
                .filter(|&i| !taken[i])
                .map(|index| Candidate { gain: base[index], index })
                .collect();
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indexing::{smallest_m, Rho, WeightSpec};
    use crate::sampling::{draw_samples, NuSpec};

    fn setup(m: usize, seed: u64) -> (PolynomialFamily, IndexSet, SamplePlan) {
        let fam = PolynomialFamily::hermite();
        let spec = WeightSpec::lognormal(6, Rho::geometric(2.0), 1.0).unwrap();
        let nu = NuSpec::new(fam, &spec, m).unwrap();
        let count = (20.0 * m as f64 * (m as f64).ln()).ceil() as usize;
        let plan = draw_samples(&nu, count, seed, nu.active_dims(), Scheme::IidForSubsampling).unwrap();
        (fam, smallest_m(&spec, m).unwrap(), plan)
    }

    #[test]
    fn subsampled_gram_bounds() {
        for (m, seed) in [(8, 1), (16, 2)] {
            let (fam, basis, plan) = setup(m, seed);
            let target = default_target(m);
            let sub = subsample(&plan, fam, &basis, target).unwrap();
            assert_eq!(sub.len(), target);
            assert_eq!(sub.scheme(), Scheme::SubsampledSchemeII);
            let g = gram_diagnostics(&assemble_design(fam, &basis, &sub).unwrap());
            assert!(g.lambda_min >= 1.0 / 66.0 && g.lambda_max <= 70.0, "{g:?}");
            let scale = target as f64 / plan.len() as f64;
            for (y, w) in sub.points().iter().zip(sub.weights()) {
                let i = plan.points().iter().position(|p| p == y).unwrap();
                assert_eq!(*w, scale * plan.weights()[i]);
            }
        }
    }

    #[test]
    fn small_plan_is_only_reweighted() {
        let (fam, basis, plan) = setup(4, 3);
        let head = SamplePlan::new(
            plan.points()[..10].to_vec(),
            plan.weights()[..10].to_vec(),
            Scheme::IidForSubsampling,
            3,
            1.0,
        )
        .unwrap();
        match subsample(&head, fam, &basis, 10) {
            Ok(sub) => {
                assert_eq!(sub.points(), head.points());
                assert_eq!(sub.weights(), head.weights());
            }
            Err(e) => assert!(matches!(e, Error::IllConditionedInput { .. })),
        }
    }

    #[test]
    fn target_checks() {
        let (fam, basis, plan) = setup(8, 4);
        assert!(matches!(
            subsample(&plan, fam, &basis, 7),
            Err(Error::TargetTooSmall { target: 7, min: 8 })
        ));
        let few = SamplePlan::new(
            plan.points()[..12].to_vec(),
            plan.weights()[..12].to_vec(),
            Scheme::IidForSubsampling,
            4,
            1.0,
        )
        .unwrap();
        let opts = SubsampleOptions {
            full_gram_min: 10.0,
            ..SubsampleOptions::default()
        };
        assert!(matches!(
            subsample_with(&few, fam, &basis, 10, &opts),
            Err(Error::IllConditionedInput { .. })
        ));
    }
}
