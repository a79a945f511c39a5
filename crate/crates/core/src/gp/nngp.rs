//! Infinite-width kernels of fully connected networks on encoded states.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::FeatureSpace;

/// Eigenvalues above `−CLIP_TOL · scale` are treated as rounding and clipped silently.
pub const CLIP_TOL: f64 = 1e-10;
/// Eigenvalues below `−RECURSION_TOL · scale` abort the recursion.
pub const RECURSION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    Erf,
    Tanh,
}

impl Nonlinearity {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Nonlinearity::Relu => u.max(0.0),
            Nonlinearity::Erf => libm::erf(u),
            Nonlinearity::Tanh => u.tanh(),
        }
    }
}

/// How `E[σ(U) σ(V)]` is evaluated at each layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Arc-cosine closed form.
    Relu,
    /// `(2/π) arcsin(2K₁₂ / √((1 + 2K₁₁)(1 + 2K₂₂)))`.
    Erf,
    MonteCarlo {
        nonlinearity: Nonlinearity,
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NngpRecipe {
    pub depth: usize,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub activation: Activation,
}

/// Input feature map applied to a discrete state before the first layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Concatenated one-hot blocks scaled by `1/√n`, so `⟨enc x, enc x⟩ = 1`.
    #[default]
    OneHot,
    /// The raw state values.
    Ordinal,
}

impl Encoding {
    pub fn dim(self, space: &FeatureSpace) -> usize {
        match self {
            Encoding::OneHot => space.cardinalities().iter().sum(),
            Encoding::Ordinal => space.n(),
        }
    }

    pub fn encode_into(self, space: &FeatureSpace, x: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match self {
            Encoding::OneHot => {
                let scale = 1.0 / (space.n() as f64).sqrt();
                let mut offset = 0;
                for (i, &xi) in x.iter().enumerate() {
                    out[offset + xi] = scale;
                    offset += space.cardinality(i);
                }
            }
            Encoding::Ordinal => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = xi as f64;
                }
            }
        }
    }
}

/// `|𝒴| × dim` matrix whose rows are the encoded states.
pub fn feature_matrix(space: &FeatureSpace, encoding: Encoding, limit: usize) -> Result<DMatrix<f64>> {
    let len = space.dense_len(limit)?;
    let dim = encoding.dim(space);
    let mut m = DMatrix::zeros(len, dim);
    let mut row = vec![0.0; dim];
    let mut x = vec![0; space.n()];
    for idx in 0..len {
        space.decode_into(idx, &mut x);
        encoding.encode_into(space, &x, &mut row);
        for (j, v) in row.iter().enumerate() {
            m[(idx, j)] = *v;
        }
    }
    Ok(m)
}

/// `E[max(U,0) max(V,0)]` for centered `(U, V)` with the given covariance.
pub fn relu_expectation(k11: f64, k12: f64, k22: f64) -> f64 {
    let norm = (k11 * k22).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let cos = (k12 / norm).clamp(-1.0, 1.0);
    let theta = cos.acos();
    norm * (theta.sin() + (PI - theta) * cos) / (2.0 * PI)
}

/// `E[erf(U) erf(V)]` for centered `(U, V)` with the given covariance.
pub fn erf_expectation(k11: f64, k12: f64, k22: f64) -> f64 {
    let arg = 2.0 * k12 / ((1.0 + 2.0 * k11) * (1.0 + 2.0 * k22)).sqrt();
    2.0 / PI * arg.clamp(-1.0, 1.0).asin()
}

/// Monte Carlo estimate of `E[σ(U) σ(V)]` and its standard error.
pub fn gaussian_expectation_mc(
    nonlinearity: Nonlinearity,
    k11: f64,
    k12: f64,
    k22: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    // U = a z₁, V = b z₁ + c z₂
    let a = k11.max(0.0).sqrt();
    let b = if a > 0.0 { k12 / a } else { 0.0 };
    let c = (k22 - b * b).max(0.0).sqrt();
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for t in 0..samples {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let v = nonlinearity.apply(a * z1) * nonlinearity.apply(b * z1 + c * z2);
        let delta = v - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = if samples > 1 { m2 / (samples - 1) as f64 } else { 0.0 };
    (mean, (var / samples as f64).sqrt())
}

/// Symmetrizes `k` and clips small negative eigenvalues.
///
/// Fails with `KernelRecursion` when the most negative eigenvalue is below
/// `−RECURSION_TOL · scale`.
pub(crate) fn project_psd(k: &DMatrix<f64>, layer: usize) -> Result<DMatrix<f64>> {
    let sym = (k + k.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min >= -CLIP_TOL * scale {
        return Ok(sym);
    }
    if min < -RECURSION_TOL * scale {
        return Err(Error::KernelRecursion(format!(
            "layer {layer}: min eigenvalue {min:e} (scale {scale:e})"
        )));
    }
    warn!("layer {layer}: clipping eigenvalue {min:e} to 0");
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// `K⁽ℓ⁾ = σ_b² + σ_w² E[σ(U) σ(V)]`, `(U, V) ~ N(0, K⁽ℓ⁻¹⁾)`, from `K⁽⁰⁾ = base`.
pub fn nngp_kernel(recipe: &NngpRecipe, base: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if recipe.depth == 0 {
        return Err(Error::Parameter("NNGP depth must be at least 1".into()));
    }
    for (name, v) in [("sigma_w2", recipe.sigma_w2), ("sigma_b2", recipe.sigma_b2)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Parameter(format!("{name} = {v} must be finite and ≥ 0")));
        }
    }
    if !base.is_square() {
        return Err(Error::Dimension("base Gram matrix must be square".into()));
    }
    if let Activation::MonteCarlo { samples, .. } = recipe.activation {
        if samples < 2 {
            return Err(Error::Parameter("monte_carlo needs at least 2 samples".into()));
        }
    }
    let scale = base.amax().max(1.0);
    let min = base.clone().symmetric_eigenvalues().min();
    if (base - base.transpose()).amax() > 1e-10 * scale || min < -1e-8 * scale {
        return Err(Error::Parameter("base Gram matrix is not symmetric PSD".into()));
    }

    let mut rng = match &recipe.activation {
        Activation::MonteCarlo { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    let n = base.nrows();
    let mut k = base.clone();
    for layer in 1..=recipe.depth {
        let mut next = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (k11, k12, k22) = (k[(i, i)], k[(i, j)], k[(j, j)]);
                let e = match &recipe.activation {
                    Activation::Relu => relu_expectation(k11, k12, k22),
                    Activation::Erf => erf_expectation(k11, k12, k22),
                    Activation::MonteCarlo { nonlinearity, samples, .. } => {
                        let rng = rng.as_mut().expect("seeded above");
                        gaussian_expectation_mc(*nonlinearity, k11, k12, k22, *samples, rng).0
                    }
                };
                let v = recipe.sigma_b2 + recipe.sigma_w2 * e;
                next[(i, j)] = v;
                next[(j, i)] = v;
            }
        }
        k = project_psd(&next, layer)?;
    }
    Ok(k)
}
