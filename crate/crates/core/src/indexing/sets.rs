use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::de::Deserializer;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use super::{MultiIndex, WeightKind, WeightSpec};
use crate::error::{Error, Result};

/// Default cap on the size of an enumerated index set.
pub const DEFAULT_SET_CAP: usize = 10_000_000;

/// Ordered multi-indices with their weights, sorted by `(sigma, tie-break)`.
#[derive(Debug, Clone, Default)]
pub struct IndexSet {
    indices: Vec<MultiIndex>,
    sigmas: Vec<f64>,
    positions: HashMap<MultiIndex, usize>,
}

impl PartialEq for IndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices && self.sigmas == other.sigmas
    }
}

impl IndexSet {
    /// Sorts the entries by `(sigma, tie-break order)`; rejects duplicates.
    pub fn from_entries(mut entries: Vec<(MultiIndex, f64)>) -> Result<Self> {
        entries.sort_by(|a, b| cmp_entry(a.1, &a.0, b.1, &b.0));
        Self::from_sorted(entries)
    }

    fn from_sorted(entries: Vec<(MultiIndex, f64)>) -> Result<Self> {
        let mut positions = HashMap::with_capacity(entries.len());
        let mut indices = Vec::with_capacity(entries.len());
        let mut sigmas = Vec::with_capacity(entries.len());
        for (i, (s, sigma)) in entries.into_iter().enumerate() {
            if positions.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate multi-index {s}")));
            }
            indices.push(s);
            sigmas.push(sigma);
        }
        Ok(IndexSet {
            indices,
            sigmas,
            positions,
        })
    }

    pub fn empty() -> Self {
        IndexSet::default()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.indices.iter().zip(self.sigmas.iter().copied())
    }

    pub fn position(&self, s: &MultiIndex) -> Option<usize> {
        self.positions.get(s).copied()
    }

    pub fn contains(&self, s: &MultiIndex) -> bool {
        self.positions.contains_key(s)
    }

    /// Largest coordinate used by any member.
    pub fn max_dim(&self) -> usize {
        self.indices.iter().map(MultiIndex::max_dim).max().unwrap_or(0)
    }

    pub fn max_degree(&self) -> u32 {
        self.indices.iter().map(MultiIndex::max_entry).max().unwrap_or(0)
    }

    /// First `n` entries.
    pub fn truncated(&self, n: usize) -> IndexSet {
        let n = n.min(self.len());
        Self::from_sorted(
            self.indices[..n]
                .iter()
                .cloned()
                .zip(self.sigmas[..n].iter().copied())
                .collect(),
        )
        .expect("prefix of a valid set")
    }

    /// Every `s - e_j` with `s` in the set is also in the set.
    pub fn is_downward_closed(&self) -> bool {
        self.indices.iter().all(|s| {
            s.iter()
                .all(|(j, _)| self.contains(&s.decremented(j).expect("j in support")))
        })
    }
}

impl Serialize for IndexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            s: &'a MultiIndex,
            sigma: f64,
        }
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for (s, sigma) in self.iter() {
            seq.serialize_element(&Entry { s, sigma })?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Entry {
            s: MultiIndex,
            sigma: f64,
        }
        let entries = Vec::<Entry>::deserialize(deserializer)?;
        IndexSet::from_entries(entries.into_iter().map(|e| (e.s, e.sigma)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// Weights closer than about `1e-11` relative count as ties, so that rounding in
/// mathematically equal products cannot reorder them.
fn tie_key(log_sigma: f64) -> i64 {
    (log_sigma * (1u64 << 36) as f64).round() as i64
}

/// `log_sigma` lies above the threshold `limit`, up to ties.
fn above(log_sigma: f64, limit: f64) -> bool {
    tie_key(log_sigma) > tie_key(limit)
}

fn cmp_entry(sa: f64, a: &MultiIndex, sb: f64, b: &MultiIndex) -> Ordering {
    cmp_log_entry(sa.ln(), a, sb.ln(), b)
}

fn cmp_log_entry(la: f64, a: &MultiIndex, lb: f64, b: &MultiIndex) -> Ordering {
    tie_key(la).cmp(&tie_key(lb)).then_with(|| a.cmp(b))
}

/// `Lambda(xi) = { s : sigma_s^q <= xi }`.
///
/// Product specs are enumerated exactly by a depth-first walk over coordinates that
/// prunes as soon as the partial weight crosses the threshold; explicit tables are filtered.
pub fn enumerate_threshold(spec: &WeightSpec, xi: f64) -> Result<IndexSet> {
    enumerate_threshold_capped(spec, xi, DEFAULT_SET_CAP)
}

pub fn enumerate_threshold_capped(spec: &WeightSpec, xi: f64, cap: usize) -> Result<IndexSet> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be positive, got {xi}")));
    }
    let limit = xi.ln() / spec.q;
    if let WeightKind::Explicit { table } = &spec.kind {
        let mut entries = Vec::new();
        for (s, _) in table {
            let ls = spec.log_sigma(s)?;
            if !above(ls, limit) {
                entries.push((s.clone(), ls.exp()));
                if entries.len() > cap {
                    return Err(Error::SetTooLarge { cap });
                }
            }
        }
        return IndexSet::from_entries(entries);
    }
    if !spec.is_monotone() {
        return Err(Error::InvalidParameter(
            "threshold enumeration needs a monotone weight spec".into(),
        ));
    }
    let rho = spec.rho().expect("product spec");
    if !rho.diverges() {
        return Err(Error::InvalidParameter(
            "rho does not grow: the threshold set is infinite".into(),
        ));
    }
    let walk = ThresholdWalk {
        spec,
        limit,
        j0: rho.nondecreasing_from(),
        last: rho.finite_dims(),
        cap,
    };
    let mut out = Vec::new();
    let base = spec.scale.ln();
    if !above(base, limit) {
        walk.descend(1, base, &mut Vec::new(), &mut out)?;
    }
    IndexSet::from_entries(out)
}

struct ThresholdWalk<'a> {
    spec: &'a WeightSpec,
    limit: f64,
    j0: u32,
    last: Option<u32>,
    cap: usize,
}

impl ThresholdWalk<'_> {
    fn descend(
        &self,
        j: u32,
        log_sigma: f64,
        pairs: &mut Vec<(u32, u32)>,
        out: &mut Vec<(MultiIndex, f64)>,
    ) -> Result<()> {
        let done = self.last.is_some_and(|d| j > d)
            || (j >= self.j0 && above(log_sigma + self.spec.log_factor(j, 1), self.limit));
        if done {
            let s = MultiIndex::from_pairs(pairs.clone());
            let sigma = self.spec.log_sigma(&s)?.exp();
            out.push((s, sigma));
            if out.len() > self.cap {
                return Err(Error::SetTooLarge { cap: self.cap });
            }
            return Ok(());
        }
        self.descend(j + 1, log_sigma, pairs, out)?;
        let mut k = 1;
        loop {
            let next = log_sigma + self.spec.log_factor(j, k);
            if above(next, self.limit) {
                break;
            }
            pairs.push((j, k));
            self.descend(j + 1, next, pairs, out)?;
            pairs.pop();
            k += 1;
        }
        Ok(())
    }
}

#[derive(PartialEq)]
struct Frontier {
    log_sigma: f64,
    s: MultiIndex,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_log_entry(self.log_sigma, &self.s, other.log_sigma, &other.s)
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-indices in increasing `(sigma, tie-break)` order, by best-first search.
///
/// Children of `s` are `s + e_j` for `j` in the support, plus new trailing coordinates.
/// Past the point where `rho` is non-decreasing, new coordinates are generated lazily
/// through a sibling chain `p + e_j -> p + e_{j+1}`, which keeps the frontier finite.
pub struct OrderedIndices<'a> {
    spec: &'a WeightSpec,
    heap: BinaryHeap<Reverse<Frontier>>,
    seen: HashSet<MultiIndex>,
    j0: u32,
    explicit: Option<std::vec::IntoIter<(MultiIndex, f64)>>,
}

impl<'a> OrderedIndices<'a> {
    pub fn new(spec: &'a WeightSpec) -> Result<Self> {
        if let WeightKind::Explicit { table } = &spec.kind {
            let mut entries: Vec<(MultiIndex, f64)> = table
                .iter()
                .map(|(s, _)| spec.sigma(s).map(|v| (s.clone(), v)))
                .collect::<Result<_>>()?;
            entries.sort_by(|a, b| cmp_entry(a.1, &a.0, b.1, &b.0));
            return Ok(OrderedIndices {
                spec,
                heap: BinaryHeap::new(),
                seen: HashSet::new(),
                j0: 1,
                explicit: Some(entries.into_iter()),
            });
        }
        if !spec.is_monotone() {
            return Err(Error::InvalidParameter(
                "best-first enumeration needs a monotone weight spec".into(),
            ));
        }
        let rho = spec.rho().expect("product spec");
        let j0 = rho.nondecreasing_from();
        if j0 == u32::MAX {
            return Err(Error::InvalidParameter(
                "rho must be eventually non-decreasing".into(),
            ));
        }
        let mut it = OrderedIndices {
            spec,
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
            j0,
            explicit: None,
        };
        it.push(MultiIndex::zero(), spec.log_sigma(&MultiIndex::zero())?);
        Ok(it)
    }

    fn push(&mut self, s: MultiIndex, log_sigma: f64) {
        if log_sigma.is_finite() && self.seen.insert(s.clone()) {
            self.heap.push(Reverse(Frontier { log_sigma, s }));
        }
    }

    fn push_child(&mut self, s: &MultiIndex, j: u32) {
        let child = s.incremented(j);
        if self.seen.contains(&child) {
            return;
        }
        if let Ok(log_sigma) = self.spec.log_sigma(&child) {
            self.push(child, log_sigma);
        }
    }
}

impl Iterator for OrderedIndices<'_> {
    type Item = (MultiIndex, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(entries) = self.explicit.as_mut() {
            return entries.next();
        }
        let Reverse(Frontier { log_sigma, s }) = self.heap.pop()?;
        for (j, _) in s.iter().collect::<Vec<_>>() {
            self.push_child(&s, j);
        }
        let jm = s.max_dim() as u32;
        for j in jm + 1..=(jm + 1).max(self.j0) {
            self.push_child(&s, j);
        }
        // sibling: replace a freshly opened last coordinate by the next one
        if jm >= self.j0 && s.get(jm) == 1 {
            let parent = s.decremented(jm).expect("jm in support");
            if parent.max_dim() as u32 + 1 <= jm {
                self.push_child(&parent, jm + 1);
            }
        }
        Some((s, log_sigma.exp()))
    }
}

/// The `m` multi-indices with smallest sigma.
pub fn smallest_m(spec: &WeightSpec, m: usize) -> Result<IndexSet> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    if m > DEFAULT_SET_CAP {
        return Err(Error::SetTooLarge { cap: DEFAULT_SET_CAP });
    }
    let entries: Vec<_> = OrderedIndices::new(spec)?.take(m).collect();
    IndexSet::from_sorted(entries)
}

/// `d_n = 1 / sigma_(n+1)`, the `(n+1)`-th smallest weight inverted.
pub fn theoretical_width(spec: &WeightSpec, n: usize) -> Result<f64> {
    let set = smallest_m(spec, n + 1)?;
    if set.len() < n + 1 {
        // finite explicit table: every further width is zero
        return Ok(0.0);
    }
    Ok(1.0 / set.sigmas()[n])
}
