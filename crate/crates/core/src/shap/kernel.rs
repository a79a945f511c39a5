//! Kernel SHAP with exact coalition values.
//!
//! Coalitions are either enumerated (budget ≥ 2ⁿ) or drawn in complementary
//! pairs from the Shapley-kernel size distribution. The empty and full
//! coalitions are always evaluated: the empty one fixes the intercept and the
//! full one enters as the efficiency constraint `Σ φ_i = h(x*) − v(∅)`, which
//! is eliminated by substituting out the last feature.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attribution::{Attribution, Method};
use super::coalition::{check_inputs, marginalize};
use crate::error::{Error, Result};
use crate::measure::ProductMeasure;
use crate::predictor::{Predictor, DEFAULT_DENSE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelShapConfig {
    /// Number of coalitions evaluated, including the empty and full ones.
    pub budget: usize,
    pub seed: u64,
}

/// Shapley-kernel weight `π(S) = (n − 1) / (C(n, |S|) |S| (n − |S|))` of one
/// coalition of the given size (`0 < size < n`).
pub fn shapley_kernel_weight(n: usize, size: usize) -> f64 {
    assert!(size > 0 && size < n);
    let binom = (0..size).fold(1.0f64, |acc, j| acc * (n - j) as f64 / (j + 1) as f64);
    (n - 1) as f64 / (binom * size as f64 * (n - size) as f64)
}

fn design(n: usize, config: &KernelShapConfig) -> BTreeMap<u64, f64> {
    let mut weights = BTreeMap::new();
    let full: u64 = (1u64 << n) - 1;
    let exhaustive = n < 63 && (config.budget as u128) >= (1u128 << n);
    if exhaustive {
        for mask in 1..full {
            let size = mask.count_ones() as usize;
            weights.insert(mask, shapley_kernel_weight(n, size));
        }
        return weights;
    }

    // total kernel mass of all coalitions of size s is (n − 1) / (s (n − s))
    let size_mass: Vec<f64> = (1..n)
        .map(|s| (n - 1) as f64 / (s as f64 * (n - s) as f64))
        .collect();
    let total: f64 = size_mass.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut draw = |rng: &mut ChaCha8Rng| -> u64 {
        let mut u = rng.random::<f64>() * total;
        let mut size = n - 1;
        for (s, &m) in size_mass.iter().enumerate() {
            if u < m {
                size = s + 1;
                break;
            }
            u -= m;
        }
        // partial Fisher–Yates for a uniform subset of that size
        for j in 0..size {
            let pick = rng.random_range(j..n);
            order.swap(j, pick);
        }
        order[..size].iter().fold(0u64, |acc, &i| acc | (1 << i))
    };
    let extra = config.budget - 2;
    for _ in 0..extra / 2 {
        let mask = draw(&mut rng);
        *weights.entry(mask).or_insert(0.0) += 1.0;
        *weights.entry(full ^ mask).or_insert(0.0) += 1.0;
    }
    if extra % 2 == 1 {
        let mask = draw(&mut rng);
        *weights.entry(mask).or_insert(0.0) += 1.0;
    }
    weights
}

/// Kernel SHAP estimate of the Shapley values of `h` at `x*`.
///
/// Deterministic given `config.seed`. Each distinct coalition is evaluated
/// once by exact marginalization under `μ`.
pub fn kernel_shap(
    h: &dyn Predictor,
    x_star: &[usize],
    measure: &ProductMeasure,
    config: &KernelShapConfig,
) -> Result<Attribution> {
    check_inputs(h, x_star, measure)?;
    let n = x_star.len();
    if n >= 63 {
        return Err(Error::Parameter(format!("kernel SHAP supports up to 62 features, got {n}")));
    }
    if config.budget < n + 2 {
        return Err(Error::Parameter(format!(
            "kernel SHAP budget {} is below n + 2 = {}",
            config.budget,
            n + 2
        )));
    }
    if measure.space().total_states() > DEFAULT_DENSE_LIMIT as u128 {
        return Err(Error::DenseLimit {
            size: measure.space().total_states(),
            limit: DEFAULT_DENSE_LIMIT,
        });
    }
    let value_of = |mask: u64| -> f64 {
        let free: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) == 0).collect();
        marginalize(h, &free, x_star, measure)
    };
    let v_empty = value_of(0);
    let v_full = h.value(x_star);
    let total = v_full - v_empty;
    let mut attribution = Attribution {
        instance: x_star.to_vec(),
        phi: vec![0.0; n],
        base_value: v_empty,
        prediction: v_full,
        method: Method::Kernel,
    };
    if n == 1 {
        attribution.phi[0] = total;
        return Ok(attribution);
    }

    let weights = design(n, config);
    let last = n - 1;
    let dim = n - 1;
    let mut normal = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    let mut row = vec![0.0; dim];
    for (&mask, &w) in &weights {
        let z_last = if mask & (1 << last) != 0 { 1.0 } else { 0.0 };
        for (j, r) in row.iter_mut().enumerate() {
            let z = if mask & (1 << j) != 0 { 1.0 } else { 0.0 };
            *r = z - z_last;
        }
        let y = value_of(mask) - v_empty - z_last * total;
        for a in 0..dim {
            if row[a] == 0.0 {
                continue;
            }
            rhs[a] += w * row[a] * y;
            for b in 0..dim {
                normal[(a, b)] += w * row[a] * row[b];
            }
        }
    }

    let eigen = normal.clone().symmetric_eigen();
    let max_ev = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min_ev = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max_ev > 0.0) || min_ev <= 1e-12 * max_ev {
        return Err(Error::KernelShapDegenerate(format!(
            "{} distinct coalitions do not identify {n} attributions (eigenvalue ratio {:e})",
            weights.len(),
            if max_ev > 0.0 { min_ev / max_ev } else { 0.0 }
        )));
    }
    let solution = normal
        .cholesky()
        .ok_or_else(|| Error::KernelShapDegenerate("normal equations not positive definite".into()))?
        .solve(&rhs);
    for j in 0..dim {
        attribution.phi[j] = solution[j];
    }
    attribution.phi[last] = total - solution.iter().sum::<f64>();
    Ok(attribution)
}
