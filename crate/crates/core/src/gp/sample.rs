use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::operator::KernelOperator;
use crate::error::{Error, Result};
use crate::measure::TensorBasis;
use crate::predictor::DEFAULT_DENSE_LIMIT;
use crate::spectral::{forward_table, inverse_table};

/// One draw of `h ~ GP(0, K)` as a dense value table.
#[derive(Debug, Clone, PartialEq)]
pub struct GpSample {
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Karhunen–Loève sampler `h = Σ_k √s_k Z_k Ψ_k` for a diagonal operator.
///
/// One `Z_k` is drawn per stored eigenvalue, in lexicographic order of `k`.
pub struct KlSampler {
    basis: std::sync::Arc<TensorBasis>,
    terms: Vec<(usize, f64)>,
    len: usize,
    rng: ChaCha8Rng,
}

impl KlSampler {
    pub fn new(op: &KernelOperator, seed: u64) -> Result<Self> {
        let spectrum = op.spectrum()?;
        let space = op.basis().space();
        let len = space.dense_len(DEFAULT_DENSE_LIMIT)?;
        let terms = spectrum
            .entries()
            .map(|(k, s)| Ok((space.index_of(k.as_slice())?, s.sqrt())))
            .collect::<Result<_>>()?;
        Ok(KlSampler {
            basis: op.basis().clone(),
            terms,
            len,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Next coefficient table `c_k = √s_k Z_k` (dense, indexed like the states).
    pub fn coefficients(&mut self) -> Vec<f64> {
        let mut c = vec![0.0; self.len];
        for &(j, root) in &self.terms {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            c[j] = root * z;
        }
        c
    }

    /// Next sample as a value table.
    pub fn draw(&mut self) -> Vec<f64> {
        let mut c = self.coefficients();
        inverse_table(&self.basis, &mut c).expect("length checked at construction");
        c
    }
}

/// A single Karhunen–Loève draw.
pub fn kl_sample(op: &KernelOperator, seed: u64) -> Result<GpSample> {
    let values = KlSampler::new(op, seed)?.draw();
    Ok(GpSample { values, seed })
}

/// Sampler for `N(0, Σ)` on `ℝ^d` through `Σ = V Λ Vᵀ`, `x = V Λ^{1/2} z`.
pub struct GaussianSampler {
    factor: DMatrix<f64>,
    rng: ChaCha8Rng,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>, seed: u64) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::Dimension("covariance must be square".into()));
        }
        let eig = ((cov + cov.transpose()) * 0.5).symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(1.0);
        if eig.eigenvalues.min() < -1e-8 * scale {
            return Err(Error::Spectrum("covariance is not positive semidefinite".into()));
        }
        let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        Ok(GaussianSampler {
            factor: eig.eigenvectors * DMatrix::from_diagonal(&roots),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn draw(&mut self) -> Vec<f64> {
        let d = self.factor.ncols();
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut self.rng));
        (&self.factor * z).as_slice().to_vec()
    }
}

/// `‖(I − P_𝒮) h‖²_{L²(μ)}` for a value table, with `tail[j]` marking `k ∉ 𝒮`.
pub fn residual_energy(basis: &TensorBasis, values: &[f64], tail: &[bool]) -> Result<f64> {
    if tail.len() != values.len() {
        return Err(Error::Dimension("tail mask and table lengths differ".into()));
    }
    let mut c = values.to_vec();
    forward_table(basis, &mut c)?;
    Ok(c.iter().zip(tail).filter(|(_, &t)| t).map(|(v, _)| v * v).sum())
}
