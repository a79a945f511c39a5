use super::attribution::{Attribution, Method};
use super::coalition::{all_coalition_values, check_inputs};
use crate::error::{Error, Result};
use crate::measure::ProductMeasure;
use crate::predictor::{DensePredictor, Predictor, DEFAULT_DENSE_LIMIT};

/// Largest `n` for which all `2ⁿ` coalitions are enumerated.
pub const MAX_BRUTE_FORCE_FEATURES: usize = 20;

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    // C(n, j) * (n - j) / (j + 1) stays integral at every step
    (0..k).fold(1u64, |acc, j| acc * (n - j) / (j + 1))
}

/// `|S|! (n − |S| − 1)! / n! = 1 / (n · C(n−1, |S|))`, exact integers then one rounding.
pub fn shapley_weight(n: usize, size: usize) -> f64 {
    assert!(size < n);
    let denom = n as u64 * binomial(n as u64 - 1, size as u64);
    1.0 / denom as f64
}

/// Exact Shapley values by enumerating all `2ⁿ` coalitions.
///
/// The predictor is tabulated once; coalition values are then produced by
/// pinning/averaging one axis at a time.
pub fn brute_force_shap(
    h: &dyn Predictor,
    x_star: &[usize],
    measure: &ProductMeasure,
) -> Result<Attribution> {
    check_inputs(h, x_star, measure)?;
    let n = x_star.len();
    if n > MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::CoalitionLimit {
            n,
            limit: MAX_BRUTE_FORCE_FEATURES,
        });
    }
    let table = DensePredictor::materialize(h, DEFAULT_DENSE_LIMIT)?;
    let v = all_coalition_values(table.values(), x_star, measure)?;
    let weights: Vec<f64> = (0..n).map(|s| shapley_weight(n, s)).collect();

    let mut phi = vec![0.0; n];
    for mask in 0..(1usize << n) {
        let size = mask.count_ones() as usize;
        if size == n {
            continue;
        }
        let w = weights[size];
        for (i, p) in phi.iter_mut().enumerate() {
            if mask & (1 << i) == 0 {
                *p += w * (v[mask | (1 << i)] - v[mask]);
            }
        }
    }
    Ok(Attribution {
        instance: x_star.to_vec(),
        phi,
        base_value: v[0],
        prediction: v[(1 << n) - 1],
        method: Method::Brute,
    })
}
