use std::collections::BTreeMap;

use crate::error::Result;
use crate::measure::{MultiIndex, TensorBasis};
use crate::selector::{Clause, Selector};
use crate::spectral::SparseFourierModel;

/// Spaces up to this size have their tail enumerated index by index.
const ENUMERATION_LIMIT: usize = 1 << 16;

/// `w_k(i; x*) = 1{k_i ≠ 0} |Ψ_k(x*)| / d(k)`.
pub fn frequency_weight(basis: &TensorBasis, k: &MultiIndex, i: usize, x_star: &[usize]) -> f64 {
    if !k.is_active(i) {
        return 0.0;
    }
    basis.atom_unchecked(k.as_slice(), x_star).abs() / k.order() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyWeights {
    pub feature: usize,
    pub instance: Vec<usize>,
    pub weights: BTreeMap<MultiIndex, f64>,
}

/// Per-frequency weights of feature `i` at `x*` for every stored entry of `model`.
pub fn frequency_weights(
    model: &SparseFourierModel,
    i: usize,
    x_star: &[usize],
) -> Result<FrequencyWeights> {
    model.feature_space().check_state(x_star)?;
    if i >= x_star.len() {
        return Err(crate::Error::Dimension(format!(
            "feature {i} out of range for {} features",
            x_star.len()
        )));
    }
    let basis = model.basis();
    let weights = model
        .entries()
        .map(|(k, _)| (k.clone(), frequency_weight(basis, k, i, x_star)))
        .collect();
    Ok(FrequencyWeights {
        feature: i,
        instance: x_star.to_vec(),
        weights,
    })
}

/// `Σ_{k ∉ 𝒮} w_k(i; x*)²` over the full index set `ℐ`.
///
/// `𝒮` is resolved against `model` (coefficient clauses see its stored
/// values; unstored indices count as zero).
pub fn tail_weight_sq_sum(
    model: &SparseFourierModel,
    selector: &Selector,
    i: usize,
    x_star: &[usize],
) -> Result<f64> {
    let basis = model.basis();
    let space = basis.space();
    space.check_state(x_star)?;
    if i >= space.n() {
        return Err(crate::Error::Dimension(format!("feature {i} out of range")));
    }
    let resolved = selector.resolve(model);

    if let Some(len) = space.size().filter(|&s| s <= ENUMERATION_LIMIT) {
        let mut k = vec![0; space.n()];
        let mut sum = 0.0;
        for idx in 0..len {
            space.decode_into(idx, &mut k);
            if k[i] == 0 {
                continue;
            }
            let k = MultiIndex(k.clone());
            if !resolved.contains(&k) {
                let w = frequency_weight(basis, &k, i, x_star);
                sum += w * w;
            }
        }
        return Ok(sum);
    }

    // closed form: per-feature squared mass b_j = Σ_{l ≥ 1} ψ_{j,l}(x*_j)², then
    // Σ_{k_i ≠ 0, d(k) = t + 1} Ψ_k(x*)² = b_i e_t(b_{−i}) with e_t elementary symmetric
    let b: Vec<f64> = basis
        .coordinates()
        .iter()
        .zip(x_star)
        .map(|(c, &x)| (1..c.cardinality()).map(|l| c.value(l, x).powi(2)).sum())
        .collect();
    let mut e = vec![0.0; space.n()];
    e[0] = 1.0;
    for (j, &bj) in b.iter().enumerate() {
        if j == i {
            continue;
        }
        for t in (1..e.len()).rev() {
            e[t] += e[t - 1] * bj;
        }
    }
    let by_order = |t: usize| b[i] * e[t] / ((t + 1) * (t + 1)) as f64;

    let clauses = selector.clauses();
    if clauses.iter().any(|c| matches!(c, Clause::Nothing)) {
        return Ok((0..space.n()).map(by_order).sum());
    }
    let finite = clauses.iter().find_map(|c| match c {
        Clause::Explicit(set) => Some(set.iter().collect::<Vec<_>>()),
        _ => None,
    });
    let finite = finite.or_else(|| {
        clauses
            .iter()
            .any(|c| matches!(c, Clause::Top(_)) || matches!(c, Clause::MinAbs(t) if *t > 0.0))
            .then(|| model.entries().map(|(k, _)| k).collect())
    });
    match finite {
        Some(candidates) => {
            let total: f64 = (0..space.n()).map(by_order).sum();
            let kept: f64 = candidates
                .into_iter()
                .filter(|k| k.is_active(i) && resolved.contains(k))
                .map(|k| frequency_weight(basis, k, i, x_star).powi(2))
                .sum();
            Ok((total - kept).max(0.0))
        }
        None => {
            let max_order = clauses
                .iter()
                .filter_map(|c| match c {
                    Clause::MaxOrder(d) => Some(*d),
                    _ => None,
                })
                .min()
                .unwrap_or(space.n());
            // kept orders are d(k) = t + 1 ≤ max_order
            Ok((max_order.min(space.n())..space.n()).map(by_order).sum())
        }
    }
}

/// Deterministic bound on `|φ_i(h; x*) − φ_i(h_𝒮; x*)|`:
/// `(Σ_{k ∉ 𝒮} w_k²)^{1/2} · ‖h − h_𝒮‖_{L²(μ)}`.
pub fn truncation_bound(
    model: &SparseFourierModel,
    selector: &Selector,
    i: usize,
    x_star: &[usize],
) -> Result<f64> {
    let weights = tail_weight_sq_sum(model, selector, i, x_star)?;
    let (_, residual) = model.truncate(selector);
    Ok(weights.sqrt() * residual)
}
