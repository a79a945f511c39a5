use super::attribution::{Attribution, Method};
use crate::error::Result;
use crate::spectral::SparseFourierModel;

/// SHAP values from the spectrum: `φ_i = Σ_{k_i ≠ 0} ĥ(k) Ψ_k(x*) / d(k)`.
///
/// One pass over the stored entries; each atom's share is split evenly over
/// its support. Features outside every support keep `φ_i = +0.0`.
pub fn fourier_shap(model: &SparseFourierModel, x_star: &[usize]) -> Result<Attribution> {
    model.feature_space().check_state(x_star)?;
    let n = x_star.len();
    let mut phi = vec![0.0; n];
    let mut base = 0.0;
    let mut prediction = 0.0;
    for (support, coef, psi) in model.atoms_at(x_star) {
        let term = coef * psi;
        prediction += term;
        if support.is_empty() {
            base += coef;
            continue;
        }
        let share = term / support.len() as f64;
        for &(i, _) in support {
            phi[i] += share;
        }
    }
    Ok(Attribution {
        instance: x_star.to_vec(),
        phi,
        base_value: base,
        prediction,
        method: Method::Fourier,
    })
}
