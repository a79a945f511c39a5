//! Finite-width random networks whose output law is Gaussian given the hidden layers.
//!
//! Hidden layer 1 has preactivations `g_jᵀ enc(x)` with `g_j ~ N(0, I)`, so their
//! covariance is the base Gram `K⁽⁰⁾`. Later layers follow
//! `a_j = b_j + (σ_w/√N) Σ_l W_jl σ(a_l)`. With the readout weights still random,
//! the output is exactly `N(0, σ_b² + (σ_w²/N) Φ Φᵀ)` where `Φ` holds the last
//! hidden activations, and it tends to the NNGP law as `N → ∞`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::nngp::Nonlinearity;
use super::wasserstein::gaussian_w2_weighted;
use crate::error::{Error, Result};
use crate::measure::ProductMeasure;

#[derive(Debug, Clone)]
pub struct RandomFeatureNetwork {
    width: usize,
    sigma_w2: f64,
    sigma_b2: f64,
    /// `|𝒴| × width` activations of the last hidden layer.
    hidden: DMatrix<f64>,
}

impl RandomFeatureNetwork {
    /// Draws the hidden weights of a depth-`depth` network (`depth` matching the
    /// NNGP recipe, so `depth − 1` inner layers follow the first).
    pub fn sample(
        features: &DMatrix<f64>,
        depth: usize,
        width: usize,
        nonlinearity: Nonlinearity,
        sigma_w2: f64,
        sigma_b2: f64,
        seed: u64,
    ) -> Result<Self> {
        if depth == 0 || width == 0 {
            return Err(Error::Parameter("depth and width must be at least 1".into()));
        }
        if !(sigma_w2 >= 0.0 && sigma_b2 >= 0.0) {
            return Err(Error::Parameter("variances must be ≥ 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |r, c| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let g: DMatrix<f64> = normal(features.ncols(), width);
        let mut act = (features * g).map(|u| nonlinearity.apply(u));
        let scale = (sigma_w2 / width as f64).sqrt();
        for _ in 1..depth {
            let w: DMatrix<f64> = normal(width, width);
            let b: DMatrix<f64> = normal(1, width);
            let mut pre = &act * w * scale;
            for mut row in pre.row_iter_mut() {
                row += b.row(0) * sigma_b2.sqrt();
            }
            act = pre.map(|u| nonlinearity.apply(u));
        }
        Ok(RandomFeatureNetwork {
            width,
            sigma_w2,
            sigma_b2,
            hidden: act,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Output covariance `σ_b² 𝟙𝟙ᵀ + (σ_w²/N) Φ Φᵀ` over the random readout.
    pub fn covariance(&self) -> DMatrix<f64> {
        let phi = &self.hidden;
        let mut k = phi * phi.transpose() * (self.sigma_w2 / self.width as f64);
        k.add_scalar_mut(self.sigma_b2);
        (&k + k.transpose()) * 0.5
    }
}

/// `ε_N` estimate: Bures `W₂` in `L²(μ)` between the finite-width output law and the NNGP law.
pub fn finite_width_epsilon(
    network: &RandomFeatureNetwork,
    limit: &DMatrix<f64>,
    measure: &ProductMeasure,
) -> Result<f64> {
    gaussian_w2_weighted(&network.covariance(), limit, measure)
}
