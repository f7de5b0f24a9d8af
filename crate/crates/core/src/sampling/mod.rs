//! The sampling measure `nu(m)`, i.i.d. draws with importance weights, and subsampling.

mod subsample;
mod univariate;

pub use subsample::{default_target, subsample, subsample_with, SubsampleOptions};
pub use univariate::{univariate_sample, InverseCdf, SamplerTables, GRID_POINTS};

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{PointCache, PolynomialFamily, RecurrenceTable};
use crate::error::{Error, Result};
use crate::indexing::{lq_norm_with_exponent, IndexSet, MultiIndex, OrderedIndices, WeightSpec};

pub const DEFAULT_TAIL_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_TAIL: usize = 1_000_000;

/// `nu(m)`: half the normalized Christoffel term over the first `m` indices, half the
/// sigma-weighted tail.
#[derive(Debug, Clone, Serialize)]
pub struct NuSpec {
    pub family: PolynomialFamily,
    pub spec: WeightSpec,
    pub m: usize,
    pub basis: IndexSet,
    pub tail_set: IndexSet,
    /// Certified `sum_{k > m} sigma_(k)^{-2}`.
    pub tail_mass: f64,
    /// `sum_{s in tail_set} sigma_s^{-2}`.
    pub tail_mass_retained: f64,
    pub tail_mass_dropped: f64,
}

impl NuSpec {
    pub fn new(family: PolynomialFamily, spec: &WeightSpec, m: usize) -> Result<Self> {
        Self::with_tail(family, spec, m, DEFAULT_TAIL_TOL, DEFAULT_MAX_TAIL)
    }

    /// Keeps tail indices until their mass reaches `(1 - tail_tol)` of the certified lower bound
    /// on the total tail mass.
    pub fn with_tail(
        family: PolynomialFamily,
        spec: &WeightSpec,
        m: usize,
        tail_tol: f64,
        max_tail: usize,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        if !(0.0..1.0).contains(&tail_tol) {
            return Err(Error::InvalidParameter("tail_tol must lie in [0, 1)".into()));
        }
        let mut order = OrderedIndices::new(spec)?;
        let basis_entries: Vec<(MultiIndex, f64)> = order.by_ref().take(m).collect();
        if basis_entries.len() < m {
            return Err(Error::InvalidParameter(format!(
                "weight spec has only {} indices, m = {m}",
                basis_entries.len()
            )));
        }
        let head: f64 = basis_entries.iter().map(|(_, s)| s.powi(-2)).sum();
        let norm = lq_norm_with_exponent(spec, 2.0, 1e-12)?;
        let total = norm.value * norm.value;
        let tail_mass = (total - head).max(0.0);
        let goal = (1.0 - tail_tol) * (norm.lower * norm.lower - head).max(0.0);
        let mut tail_entries = Vec::new();
        let mut retained = 0.0;
        while retained < goal {
            match order.next() {
                Some((s, sigma)) => {
                    if s.max_entry() as usize > crate::basis::DEFAULT_MAX_DEGREE {
                        return Err(Error::NonConvergent(format!(
                            "tail reaches degree {} before relative mass {tail_tol}",
                            s.max_entry()
                        )));
                    }
                    retained += sigma.powi(-2);
                    tail_entries.push((s, sigma));
                }
                None => break,
            }
            if tail_entries.len() > max_tail {
                return Err(Error::NonConvergent(format!(
                    "tail needs more than {max_tail} indices to reach relative mass {tail_tol}"
                )));
            }
        }
        Ok(NuSpec {
            family,
            spec: spec.clone(),
            m,
            basis: IndexSet::from_entries(basis_entries)?,
            tail_set: IndexSet::from_entries(tail_entries)?,
            tail_mass,
            tail_mass_retained: retained,
            tail_mass_dropped: (tail_mass - retained).max(0.0),
        })
    }

    /// Largest coordinate used by the basis or the tail.
    pub fn active_dims(&self) -> usize {
        self.basis.max_dim().max(self.tail_set.max_dim())
    }

    pub fn max_degree(&self) -> usize {
        self.basis.max_degree().max(self.tail_set.max_degree()) as usize
    }

    pub fn has_tail(&self) -> bool {
        !self.tail_set.is_empty() && self.tail_mass_retained > 0.0
    }

    pub fn evaluator(&self) -> NuEvaluator<'_> {
        NuEvaluator {
            nu: self,
            table: RecurrenceTable::new(self.family, self.max_degree()),
        }
    }
}

/// Density evaluation with a shared recurrence table.
pub struct NuEvaluator<'a> {
    nu: &'a NuSpec,
    table: RecurrenceTable,
}

impl NuEvaluator<'_> {
    pub fn density(&self, y: &[f64]) -> Result<f64> {
        let needed = self.nu.active_dims();
        if y.len() < needed {
            return Err(Error::DimensionMismatch {
                needed,
                got: y.len(),
            });
        }
        let cache = PointCache::new(&self.table, self.nu.max_degree(), &y[..needed]);
        Ok(self.density_cached(&cache))
    }

    fn density_cached(&self, cache: &PointCache) -> f64 {
        let nu = self.nu;
        let head: f64 = nu
            .basis
            .indices()
            .iter()
            .map(|s| cache.tensor(s).powi(2))
            .sum::<f64>()
            / nu.m as f64;
        if !nu.has_tail() {
            return head;
        }
        let tail: f64 = nu
            .tail_set
            .iter()
            .map(|(s, sigma)| (cache.tensor(s) / sigma).powi(2))
            .sum::<f64>()
            / nu.tail_mass_retained;
        0.5 * (head + tail)
    }
}

/// `rho(y)`, the density of `nu` with respect to the product base measure.
pub fn nu_density(nu: &NuSpec, y: &[f64]) -> Result<f64> {
    nu.evaluator().density(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "IID_SchemeI")]
    IidSchemeI,
    #[serde(rename = "IID_For_Subsampling")]
    IidForSubsampling,
    #[serde(rename = "Subsampled_SchemeII")]
    SubsampledSchemeII,
    #[serde(rename = "Plain_mu")]
    PlainMu,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::IidSchemeI => "IID_SchemeI",
            Scheme::IidForSubsampling => "IID_For_Subsampling",
            Scheme::SubsampledSchemeII => "Subsampled_SchemeII",
            Scheme::PlainMu => "Plain_mu",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "IID_SchemeI" => Ok(Scheme::IidSchemeI),
            "IID_For_Subsampling" => Ok(Scheme::IidForSubsampling),
            "Subsampled_SchemeII" => Ok(Scheme::SubsampledSchemeII),
            "Plain_mu" => Ok(Scheme::PlainMu),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other}"))),
        }
    }
}

/// Parameter points with importance weights.
///
/// `weight_scale` is the common factor in front of `rho^{-1}` (1 for i.i.d. plans,
/// `target / N` after subsampling); `weight_scale * len` normalizes the Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    scheme: Scheme,
    seed: u64,
    m: usize,
    #[serde(rename = "J")]
    dims: usize,
    weight_scale: f64,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SamplePlan {
    pub fn new(
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        scheme: Scheme,
        seed: u64,
        weight_scale: f64,
    ) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points, {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dims = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dims) {
            return Err(Error::ShapeMismatch("points of unequal dimension".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be finite and positive".into()));
        }
        if !(weight_scale.is_finite() && weight_scale > 0.0) {
            return Err(Error::InvalidParameter("weight scale must be positive".into()));
        }
        Ok(SamplePlan {
            scheme,
            seed,
            m: 0,
            dims,
            weight_scale,
            points,
            weights,
        })
    }

    pub fn with_basis_size(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn basis_size(&self) -> usize {
        self.m
    }

    pub fn weight_scale(&self) -> f64 {
        self.weight_scale
    }

    pub fn effective_size(&self) -> f64 {
        self.weight_scale * self.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "# scheme,seed,m,J")?;
        writeln!(out, "# {},{},{},{}", self.scheme.name(), self.seed, self.m, self.dims)?;
        writeln!(out, "# weight_scale,{:?}", self.weight_scale)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dims).map(|j| format!("y_{j}")).collect();
        header.push("omega".into());
        w.write_record(&header)?;
        for (p, omega) in self.points.iter().zip(&self.weights) {
            let row: Vec<String> = p
                .iter()
                .chain(std::iter::once(omega))
                .map(|v| format!("{v:?}"))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let bad = |what: &str| Error::Io(format!("malformed sample plan: {what}"));
        let first = lines.next().ok_or_else(|| bad("empty input"))??;
        if first.trim() != "# scheme,seed,m,J" {
            return Err(bad("missing header"));
        }
        let meta = lines.next().ok_or_else(|| bad("missing metadata"))??;
        let fields: Vec<&str> = meta.trim_start_matches('#').trim().split(',').collect();
        if fields.len() != 4 {
            return Err(bad("metadata"));
        }
        let scheme = Scheme::from_name(fields[0])?;
        let seed: u64 = fields[1].parse().map_err(|_| bad("seed"))?;
        let m: usize = fields[2].parse().map_err(|_| bad("m"))?;
        let dims: usize = fields[3].parse().map_err(|_| bad("J"))?;
        let scale_line = lines.next().ok_or_else(|| bad("missing weight scale"))??;
        let weight_scale: f64 = scale_line
            .trim_start_matches('#')
            .trim()
            .strip_prefix("weight_scale,")
            .ok_or_else(|| bad("weight scale"))?
            .parse()
            .map_err(|_| bad("weight scale"))?;
        let rest: String = lines.collect::<std::io::Result<Vec<_>>>()?.join("\n");
        let mut reader = csv::Reader::from_reader(rest.as_bytes());
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != dims + 1 {
                return Err(bad("row width"));
            }
            let vals: Vec<f64> = record
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| bad("number")))
                .collect::<Result<_>>()?;
            weights.push(vals[dims]);
            points.push(vals[..dims].to_vec());
        }
        let mut plan = SamplePlan::new(points, weights, scheme, seed, weight_scale)?;
        plan.dims = dims;
        Ok(plan.with_basis_size(m))
    }
}

/// Per-sample generator: stream `i` of the ChaCha8 generator keyed by `seed`.
pub fn sample_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// `count` i.i.d. draws from `nu` restricted to the first `dims` coordinates.
///
/// `IidSchemeI` and `IidForSubsampling` get `omega = rho^{-1}`; `PlainMu` draws from the
/// base measure with unit weights.
pub fn draw_samples(
    nu: &NuSpec,
    count: usize,
    seed: u64,
    dims: usize,
    scheme: Scheme,
) -> Result<SamplePlan> {
    let tables = SamplerTables::new(nu.family, nu.max_degree())?;
    draw_samples_with(nu, &tables, count, seed, dims, scheme)
}

pub fn draw_samples_with(
    nu: &NuSpec,
    tables: &SamplerTables,
    count: usize,
    seed: u64,
    dims: usize,
    scheme: Scheme,
) -> Result<SamplePlan> {
    if dims < nu.active_dims() {
        return Err(Error::DimensionMismatch {
            needed: nu.active_dims(),
            got: dims,
        });
    }
    if scheme == Scheme::PlainMu {
        return Ok(draw_base_measure(nu.family, count, seed, dims)?.with_basis_size(nu.m));
    }
    if scheme == Scheme::SubsampledSchemeII {
        return Err(Error::InvalidParameter(
            "subsampled plans come from subsample(), not from direct draws".into(),
        ));
    }
    if tables.family() != nu.family || tables.max_degree() < nu.max_degree() {
        return Err(Error::InvalidParameter("sampler tables do not cover nu".into()));
    }
    let cumulative: Vec<f64> = nu
        .tail_set
        .sigmas()
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.powi(-2);
            Some(*acc)
        })
        .collect();
    let evaluator = nu.evaluator();
    let has_tail = nu.has_tail();
    let draws: Vec<(Vec<f64>, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let heads: bool = !has_tail || rng.random::<f64>() < 0.5;
            let s = if heads {
                &nu.basis.indices()[rng.random_range(0..nu.m)]
            } else {
                let u = rng.random::<f64>() * nu.tail_mass_retained;
                let k = cumulative
                    .partition_point(|c| *c <= u)
                    .min(cumulative.len() - 1);
                &nu.tail_set.indices()[k]
            };
            let y: Vec<f64> = (1..=dims as u32)
                .map(|j| tables.table(s.get(j) as usize).quantile(rng.random()))
                .collect();
            let rho = evaluator.density(&y).expect("dimension checked");
            (y, 1.0 / rho)
        })
        .collect();
    let (points, weights): (Vec<_>, Vec<_>) = draws.into_iter().unzip();
    Ok(SamplePlan::new(points, weights, scheme, seed, 1.0)?.with_basis_size(nu.m))
}

/// `count` draws from the product base measure with unit weights.
pub fn draw_base_measure(
    family: PolynomialFamily,
    count: usize,
    seed: u64,
    dims: usize,
) -> Result<SamplePlan> {
    let beta = match family {
        PolynomialFamily::Jacobi { a, b } => {
            // (1 + y) / 2 ~ Beta(b + 1, a + 1)
            Some(Beta::new(b + 1.0, a + 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?)
        }
        PolynomialFamily::Hermite => None,
    };
    let points: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            (0..dims)
                .map(|_| match &beta {
                    Some(d) => 2.0 * d.sample(&mut rng) - 1.0,
                    None => StandardNormal.sample(&mut rng),
                })
                .collect()
        })
        .collect();
    let mut plan = SamplePlan::new(points, vec![1.0; count], Scheme::PlainMu, seed, 1.0)?;
    plan.dims = dims;
    Ok(plan)
}
