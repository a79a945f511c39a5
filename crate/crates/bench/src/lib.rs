//! Seeded fixtures shared by the criterion benches.

use std::collections::BTreeMap;
use std::sync::Arc;

use fourier_shap::{FeatureSpace, MultiIndex, ProductMeasure, SparseFourierModel, TensorBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cardinalities of the nine binned clinical features.
pub const STROKE_CARDINALITIES: [usize; 9] = [2, 2, 2, 2, 5, 2, 8, 8, 4];

/// Full-support product measure with marginals bounded away from zero.
pub fn random_measure(cardinalities: &[usize], seed: u64) -> ProductMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = cardinalities
        .iter()
        .map(|&m| {
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .collect();
    ProductMeasure::new(probs).expect("valid marginals")
}

/// `atoms` distinct multi-indices of order 1 to `max_order` with uniform(-1, 1) coefficients,
/// plus the constant term.
pub fn random_sparse_model(cardinalities: &[usize], atoms: usize, max_order: usize, seed: u64) -> SparseFourierModel {
    let measure = random_measure(cardinalities, seed);
    let basis = Arc::new(TensorBasis::new(measure).expect("basis"));
    let n = cardinalities.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut entries = BTreeMap::new();
    entries.insert(MultiIndex::zero(n), rng.random_range(-1.0..1.0));
    let max_order = max_order.clamp(1, n);
    while entries.len() < atoms + 1 {
        let order = rng.random_range(1..=max_order);
        let mut k = vec![0; n];
        let mut placed = 0;
        while placed < order {
            let i = rng.random_range(0..n);
            if k[i] == 0 {
                k[i] = rng.random_range(1..cardinalities[i]);
                placed += 1;
            }
        }
        let c: f64 = rng.random_range(-1.0..1.0);
        entries.entry(MultiIndex(k)).or_insert(c);
    }
    SparseFourierModel::new(basis, entries).expect("model")
}

pub fn random_instances(space: &FeatureSpace, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| space.cardinalities().iter().map(|&m| rng.random_range(0..m)).collect())
        .collect()
}
