//! Multi-indices, weight sequences and the index sets built from them.

mod multi_index;
mod sets;
mod weights;

pub use multi_index::MultiIndex;
pub use sets::{
    enumerate_threshold, enumerate_threshold_capped, smallest_m, theoretical_width, IndexSet,
    OrderedIndices, DEFAULT_SET_CAP,
};
pub use weights::{
    ln_binomial, lq_norm_inverse_sigma, lq_norm_with_exponent, CRule, LqNorm, Rho, RhoRule,
    WeightKind, WeightSpec,
};

use serde::{Deserialize, Serialize};

use crate::least_squares::Approximant;

/// Sparse expansion `s -> f_s in R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub x_dim: usize,
    pub entries: Vec<(MultiIndex, Vec<f64>)>,
}

impl CoefficientTable {
    pub fn new(x_dim: usize) -> Self {
        CoefficientTable {
            x_dim,
            entries: Vec::new(),
        }
    }

    pub fn get(&self, s: &MultiIndex) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(t, _)| t == s)
            .map(|(_, v)| v.as_slice())
    }

    /// `sum_s ||f_s||^2`, the squared L2 norm by Parseval.
    pub fn squared_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, v)| v.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }
}

/// Restriction of an expansion to `set`: coefficients outside the set are dropped and
/// members of the set without a coefficient get zero.
pub fn truncate_expansion(coeffs: &CoefficientTable, set: &IndexSet) -> Approximant {
    let d = coeffs.x_dim;
    let mut rows = vec![0.0; set.len() * d];
    for (s, v) in &coeffs.entries {
        if let Some(p) = set.position(s) {
            rows[p * d..(p + 1) * d].copy_from_slice(v);
        }
    }
    Approximant::new(set.clone(), d, rows).expect("shape matches by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncation_basics() {
        let spec = WeightSpec::affine(Rho::geometric(2.0), CRule::Legendre, 1.0).unwrap();
        let set = smallest_m(&spec, 4).unwrap();
        let mut coeffs = CoefficientTable::new(2);
        for (i, s) in set.indices().iter().enumerate() {
            coeffs.entries.push((s.clone(), vec![i as f64, -(i as f64)]));
        }
        let same = truncate_expansion(&coeffs, &set);
        for (i, s) in set.indices().iter().enumerate() {
            assert_eq!(same.row(i), coeffs.get(s).unwrap());
        }
        let none = truncate_expansion(&coeffs, &IndexSet::empty());
        assert!(none.basis().is_empty());
        assert!(none.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn truncation_tail_bound() {
        let spec = WeightSpec::affine(Rho::geometric(1.5), CRule::Legendre, 0.8).unwrap();
        let active = smallest_m(&spec, 300).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..active.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = raw.iter().map(|g| g * g).sum::<f64>().sqrt();
            let mut coeffs = CoefficientTable::new(1);
            for ((s, sigma), g) in active.iter().zip(&raw) {
                coeffs.entries.push((s.clone(), vec![g / norm / sigma]));
            }
            for xi in [2.0, 8.0, 32.0] {
                let lam = enumerate_threshold(&spec, xi).unwrap();
                let kept = truncate_expansion(&coeffs, &lam);
                let dropped = coeffs.squared_norm()
                    - kept.coefficients().iter().map(|c| c * c).sum::<f64>();
                assert!(dropped <= xi.powf(-2.0 / spec.q) * (1.0 + 1e-12));
            }
        }
    }
}
