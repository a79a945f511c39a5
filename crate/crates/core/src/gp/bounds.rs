use std::io::Write;

use serde::Serialize;

use nalgebra::DMatrix;

use super::operator::{coefficient_covariance, KernelOperator, PSD_TOL};
use super::sample::{GaussianSampler, KlSampler};
use crate::error::{Error, Result};
use crate::predictor::DEFAULT_DENSE_LIMIT;
use crate::selector::Selector;
use crate::shap::tail_weight_sq_sum;
use crate::spectral::forward_table;

/// Tail moments of the spectrum outside `𝒮`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailStatistics {
    /// `Σ_{k ∉ 𝒮} s_k`
    pub sigma1: f64,
    /// `Σ_{k ∉ 𝒮} s_k²`
    pub sigma2: f64,
    /// `max_{k ∉ 𝒮} s_k` (0 for an empty tail)
    pub s_max: f64,
}

impl TailStatistics {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut t = TailStatistics {
            sigma1: 0.0,
            sigma2: 0.0,
            s_max: 0.0,
        };
        for s in values {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Spectrum(format!("tail eigenvalue {s} must be finite and ≥ 0")));
            }
            t.sigma1 += s;
            t.sigma2 += s * s;
            t.s_max = t.s_max.max(s);
        }
        Ok(t)
    }

    /// Moments of the eigenvalues of the coefficient covariance restricted to
    /// `k ∉ 𝒮`. For a diagonal operator these are the tail `s_k` themselves.
    pub fn new(op: &KernelOperator, selector: &Selector) -> Result<Self> {
        if op.is_diagonal() {
            let spectrum = op.spectrum()?;
            return Self::from_values(spectrum.tail(selector).entries().map(|(_, s)| s));
        }
        let tail: Vec<usize> = op
            .tail_mask(selector)?
            .iter()
            .enumerate()
            .filter_map(|(j, &t)| t.then_some(j))
            .collect();
        let c = coefficient_covariance(op.basis(), &op.matrix()?)?;
        let block = DMatrix::from_fn(tail.len(), tail.len(), |a, b| c[(tail[a], tail[b])]);
        let block = (&block + block.transpose()) * 0.5;
        let eig = block.symmetric_eigenvalues();
        let scale = eig.amax().max(f64::MIN_POSITIVE);
        if eig.min() < -PSD_TOL * scale {
            return Err(Error::Spectrum(format!("tail covariance has eigenvalue {:e}", eig.min())));
        }
        Self::from_values(eig.iter().map(|v| v.max(0.0)))
    }
}

/// `Σ_{k ∉ 𝒮} w_k(i; x*)²` with `𝒮` resolved against the operator's variances.
pub fn shap_weights_sq_sum(op: &KernelOperator, selector: &Selector, i: usize, x_star: &[usize]) -> Result<f64> {
    tail_weight_sq_sum(op.variances(), selector, i, x_star)
}

/// `E|φ_i(h) − φ_i(h_𝒮)| ≤ (Σ_{k∉𝒮} w_k²)^{1/2} tr((I − P_𝒮) K)^{1/2}`.
pub fn expected_shap_bound(op: &KernelOperator, selector: &Selector, i: usize, x_star: &[usize]) -> Result<f64> {
    let tail = TailStatistics::new(op, selector)?;
    let w = shap_weights_sq_sum(op, selector, i, x_star)?;
    Ok(w.sqrt() * tail.sigma1.sqrt())
}

/// With probability at least `1 − δ`:
/// `|φ_i(h) − φ_i(h_𝒮)| ≤ (Σ_{k∉𝒮} w_k²)^{1/2} √(Σ₁ + 2√(Σ₂ log(2/δ)) + 2 s_max log(2/δ))`.
pub fn high_probability_bound(tail: &TailStatistics, weights_sq_sum: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta = {delta} must lie in (0, 1)")));
    }
    if !(weights_sq_sum >= 0.0) {
        return Err(Error::Parameter(format!("weight sum {weights_sq_sum} must be ≥ 0")));
    }
    let t = (2.0 / delta).ln();
    let radius = tail.sigma1 + 2.0 * (tail.sigma2 * t).sqrt() + 2.0 * tail.s_max * t;
    Ok(weights_sq_sum.sqrt() * radius.sqrt())
}

/// `(Σ_{k∉𝒮} w_k²)^{1/2} (√Σ₁ + ε_N)` for a finite-width network near its NNGP limit.
pub fn finite_width_bound(weights_sq_sum: f64, sigma1: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in [("weight sum", weights_sq_sum), ("sigma1", sigma1), ("epsilon", epsilon)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Parameter(format!("{name} = {v} must be finite and ≥ 0")));
        }
    }
    Ok(weights_sq_sum.sqrt() * (sigma1.sqrt() + epsilon))
}

/// Per-coefficient gap weights `a_k = 1{k_i≠0} Ψ_k(x*)/d(k)` over the tail, as
/// `(dense index, a_k)`; the SHAP gap of a draw is `Σ a_k ĥ(k)`.
pub fn gap_weights(op: &KernelOperator, selector: &Selector, i: usize, x_star: &[usize]) -> Result<Vec<(usize, f64)>> {
    let basis = op.basis();
    let space = basis.space();
    space.check_state(x_star)?;
    if i >= space.n() {
        return Err(Error::Dimension(format!("feature {i} out of range")));
    }
    let tail = op.tail_mask(selector)?;
    let mut k = vec![0; space.n()];
    let mut out = Vec::new();
    for (j, &t) in tail.iter().enumerate() {
        space.decode_into(j, &mut k);
        if t && k[i] != 0 {
            let d = k.iter().filter(|&&v| v != 0).count();
            out.push((j, basis.atom_unchecked(&k, x_star) / d as f64));
        }
    }
    Ok(out)
}

/// `|φ_i(h) − φ_i(h_𝒮)|` for `samples` draws of `h ~ GP(0, K)`.
///
/// Diagonal operators are sampled through the Karhunen–Loève expansion,
/// others through the kernel matrix.
pub fn monte_carlo_gaps(
    op: &KernelOperator,
    selector: &Selector,
    i: usize,
    x_star: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let weights = gap_weights(op, selector, i, x_star)?;
    let gap = |c: &[f64]| weights.iter().map(|&(j, a)| a * c[j]).sum::<f64>().abs();
    if op.is_diagonal() {
        let mut s = KlSampler::new(op, seed)?;
        Ok((0..samples).map(|_| gap(&s.coefficients())).collect())
    } else {
        op.basis().space().dense_len(DEFAULT_DENSE_LIMIT)?;
        let mut s = GaussianSampler::new(&op.matrix()?, seed)?;
        (0..samples)
            .map(|_| {
                let mut c = s.draw();
                forward_table(op.basis(), &mut c)?;
                Ok(gap(&c))
            })
            .collect()
    }
}

/// One line of a bound report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub bound_type: String,
    pub feature: usize,
    pub delta: Option<f64>,
    pub value: f64,
    pub mc_estimate: Option<f64>,
    pub violation_rate: Option<f64>,
}

pub fn write_bound_report(rows: &[BoundRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
