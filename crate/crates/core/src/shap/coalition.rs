use crate::error::{Error, Result};
use crate::measure::ProductMeasure;
use crate::predictor::{Predictor, DEFAULT_DENSE_LIMIT};

pub(crate) fn check_inputs(h: &dyn Predictor, x_star: &[usize], measure: &ProductMeasure) -> Result<()> {
    if h.space() != measure.space() {
        return Err(Error::Dimension(format!(
            "predictor space {:?} differs from measure space {:?}",
            h.space().cardinalities(),
            measure.space().cardinalities()
        )));
    }
    h.space().check_state(x_star)
}

/// `v_μ(h; S)`: the expectation of `h` with features in `S` pinned to `x*` and
/// the rest drawn from their marginals, by exact enumeration.
pub fn coalition_value(
    h: &dyn Predictor,
    in_coalition: &[bool],
    x_star: &[usize],
    measure: &ProductMeasure,
) -> Result<f64> {
    check_inputs(h, x_star, measure)?;
    if in_coalition.len() != x_star.len() {
        return Err(Error::Dimension(format!(
            "coalition mask has {} entries for {} features",
            in_coalition.len(),
            x_star.len()
        )));
    }
    let free: Vec<usize> = (0..x_star.len()).filter(|&j| !in_coalition[j]).collect();
    let count: u128 = free
        .iter()
        .map(|&j| measure.space().cardinality(j) as u128)
        .product();
    if count > DEFAULT_DENSE_LIMIT as u128 {
        return Err(Error::DenseLimit {
            size: count,
            limit: DEFAULT_DENSE_LIMIT,
        });
    }
    Ok(marginalize(h, &free, x_star, measure))
}

/// Enumeration kernel shared with Kernel SHAP (inputs already validated).
pub(crate) fn marginalize(
    h: &dyn Predictor,
    free: &[usize],
    x_star: &[usize],
    measure: &ProductMeasure,
) -> f64 {
    let mut x = x_star.to_vec();
    for &j in free {
        x[j] = 0;
    }
    let cards: Vec<usize> = free.iter().map(|&j| measure.space().cardinality(j)).collect();
    let mut total = 0.0;
    loop {
        let w: f64 = free.iter().map(|&j| measure.marginal(j)[x[j]]).product();
        total += w * h.value(&x);
        // odometer over the free coordinates, last one fastest
        let mut pos = free.len();
        loop {
            if pos == 0 {
                return total;
            }
            pos -= 1;
            let j = free[pos];
            x[j] += 1;
            if x[j] < cards[pos] {
                break;
            }
            x[j] = 0;
        }
    }
}

/// `v_μ(h; S)` for every `S ⊆ [n]` from a dense value table, indexed by the
/// bitmask of `S` (bit `i` set when feature `i` is pinned).
///
/// Features are processed in table order; each one is either pinned (slice)
/// or averaged out under `μ_i`, so the work is `Σ_i 2^i Π_{j≥i} m_j`.
pub fn all_coalition_values(
    table: &[f64],
    x_star: &[usize],
    measure: &ProductMeasure,
) -> Result<Vec<f64>> {
    let space = measure.space();
    space.check_state(x_star)?;
    if space.size() != Some(table.len()) {
        return Err(Error::Dimension(format!(
            "table of length {} for a space of {} states",
            table.len(),
            space.total_states()
        )));
    }
    let n = space.n();
    if n > super::exact::MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::CoalitionLimit {
            n,
            limit: super::exact::MAX_BRUTE_FORCE_FEATURES,
        });
    }
    let mut values = vec![0.0; 1 << n];
    recurse(table, 0, 0, x_star, measure, &mut values);
    Ok(values)
}

fn recurse(
    table: &[f64],
    feature: usize,
    mask: usize,
    x_star: &[usize],
    measure: &ProductMeasure,
    out: &mut [f64],
) {
    let n = x_star.len();
    if feature == n {
        out[mask] = table[0];
        return;
    }
    let m = measure.space().cardinality(feature);
    let inner = table.len() / m;
    let pinned = &table[x_star[feature] * inner..(x_star[feature] + 1) * inner];
    recurse(pinned, feature + 1, mask | (1 << feature), x_star, measure, out);

    let mu = measure.marginal(feature);
    let mut averaged = vec![0.0; inner];
    for (x, &p) in mu.iter().enumerate() {
        let slice = &table[x * inner..(x + 1) * inner];
        averaged.iter_mut().zip(slice).for_each(|(a, v)| *a += p * v);
    }
    recurse(&averaged, feature + 1, mask, x_star, measure, out);
}
