use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Finitely supported sequence of non-negative integers.
///
/// Stored sparsely as `(j, s_j)` pairs with `j >= 1` strictly increasing and `s_j >= 1`;
/// absent coordinates are zero. The derived `Ord` is the tie-break order used for
/// enumeration: total degree first, then reverse-lexicographic (highest coordinate first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex::default()
    }

    /// Builds from arbitrary `(j, s_j)` pairs; zeros are dropped and duplicates summed.
    pub fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.retain(|&(j, k)| {
            assert!(j >= 1, "multi-index coordinates are 1-based");
            k > 0
        });
        pairs.sort_unstable_by_key(|&(j, _)| j);
        let mut entries: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
        for (j, k) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == j => last.1 += k,
                _ => entries.push((j, k)),
            }
        }
        MultiIndex { entries }
    }

    /// `dense[i]` is the entry of coordinate `i + 1`.
    pub fn from_dense(dense: &[u32]) -> Self {
        MultiIndex {
            entries: dense
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| (i as u32 + 1, k))
                .collect(),
        }
    }

    pub fn to_dense(&self, dims: usize) -> Vec<u32> {
        let mut out = vec![0; dims.max(self.max_dim())];
        for &(j, k) in &self.entries {
            out[j as usize - 1] = k;
        }
        out
    }

    /// Iterates the support as `(j, s_j)`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn get(&self, j: u32) -> u32 {
        self.entries
            .binary_search_by_key(&j, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest coordinate in the support, 0 for the zero index.
    pub fn max_dim(&self) -> usize {
        self.entries.last().map_or(0, |&(j, _)| j as usize)
    }

    pub fn max_entry(&self) -> u32 {
        self.entries.iter().map(|&(_, k)| k).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u64 {
        self.entries.iter().map(|&(_, k)| k as u64).sum()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn incremented(&self, j: u32) -> Self {
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&j, |&(i, _)| i) {
            Ok(p) => entries[p].1 += 1,
            Err(p) => entries.insert(p, (j, 1)),
        }
        MultiIndex { entries }
    }

    /// `None` when coordinate `j` is already zero.
    pub fn decremented(&self, j: u32) -> Option<Self> {
        let p = self.entries.binary_search_by_key(&j, |&(i, _)| i).ok()?;
        let mut entries = self.entries.clone();
        if entries[p].1 == 1 {
            entries.remove(p);
        } else {
            entries[p].1 -= 1;
        }
        Some(MultiIndex { entries })
    }

    /// Coordinatewise `self <= other`.
    pub fn dominated_by(&self, other: &MultiIndex) -> bool {
        self.entries.iter().all(|&(j, k)| other.get(j) >= k)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                // reverse-lexicographic: walk from the highest coordinate down
                let mut a = self.entries.iter().rev().peekable();
                let mut b = other.entries.iter().rev().peekable();
                loop {
                    match (a.peek(), b.peek()) {
                        (None, None) => return Ordering::Equal,
                        (Some(_), None) => return Ordering::Greater,
                        (None, Some(_)) => return Ordering::Less,
                        (Some(&&(ja, ka)), Some(&&(jb, kb))) => {
                            if ja != jb {
                                return ja.cmp(&jb);
                            }
                            if ka != kb {
                                return ka.cmp(&kb);
                            }
                            a.next();
                            b.next();
                        }
                    }
                }
            })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (j, k)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{j}:{k}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs = Vec::<(u32, u32)>::deserialize(deserializer)?;
        if pairs.iter().any(|&(j, _)| j == 0) {
            return Err(serde::de::Error::custom("multi-index coordinates are 1-based"));
        }
        Ok(MultiIndex::from_pairs(pairs))
    }
}
