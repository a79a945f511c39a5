use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::nngp::{feature_matrix, nngp_kernel, Encoding, NngpRecipe};
use crate::error::{Error, Result};
use crate::measure::{MeasureSpec, MultiIndex, ProductMeasure, TensorBasis};
use crate::predictor::DEFAULT_DENSE_LIMIT;
use crate::selector::Selector;
use crate::spectral::{forward_table, inverse_table, SparseFourierModel};

/// Largest `|𝒴|` for which an explicit `|𝒴| × |𝒴|` kernel matrix is formed.
pub const MATRIX_LIMIT: usize = 4096;
/// Symmetry tolerance on explicit kernel matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative tolerance on the most negative eigenvalue of an explicit kernel.
pub const PSD_TOL: f64 = 1e-8;
/// Absolute tolerance on `‖KΨ_k − s_k Ψ_k‖` for the diagonal flag.
pub const DIAGONAL_TOL: f64 = 1e-8;

/// A covariance operator on `L²(μ)`: `(Kf)(x) = Σ_y K(x, y) f(y) μ(y)`.
///
/// Always carries the coefficient variances `C_kk = ⟨Ψ_k, K Ψ_k⟩`; when the
/// tensor basis diagonalizes `K` these are the eigenvalues `s_k`.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    basis: Arc<TensorBasis>,
    matrix: Option<DMatrix<f64>>,
    variances: SparseFourierModel,
    diagonal: bool,
}

fn check_matrix_size(basis: &TensorBasis) -> Result<usize> {
    basis.space().dense_len(MATRIX_LIMIT)
}

/// Two-sided forward transform `F K Fᵀ` with `F[k][x] = Ψ_k(x) μ(x)`.
pub(crate) fn coefficient_covariance(basis: &TensorBasis, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    two_sided(basis, k, forward_table)
}

fn two_sided(
    basis: &TensorBasis,
    k: &DMatrix<f64>,
    op: fn(&TensorBasis, &mut [f64]) -> Result<()>,
) -> Result<DMatrix<f64>> {
    let len = k.nrows();
    let mut m = k.clone();
    let mut buf = vec![0.0; len];
    for j in 0..len {
        buf.copy_from_slice(m.column(j).as_slice());
        op(basis, &mut buf)?;
        m.column_mut(j).copy_from_slice(&buf);
    }
    for i in 0..len {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = m[(i, j)];
        }
        op(basis, &mut buf)?;
        for (j, b) in buf.iter().enumerate() {
            m[(i, j)] = *b;
        }
    }
    Ok(m)
}

impl KernelOperator {
    /// Wraps an explicit kernel matrix (state order as in the feature space).
    ///
    /// Rejects asymmetric or indefinite input; the diagonal flag is set when
    /// every `Ψ_k` is an eigenfunction within [`DIAGONAL_TOL`].
    pub fn from_matrix(basis: Arc<TensorBasis>, k: DMatrix<f64>) -> Result<Self> {
        let len = check_matrix_size(&basis)?;
        if k.nrows() != len || k.ncols() != len {
            return Err(Error::Dimension(format!(
                "kernel is {}x{}, the space has {len} states",
                k.nrows(),
                k.ncols()
            )));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("kernel matrix has non-finite entries".into()));
        }
        let scale = k.amax().max(1.0);
        let asym = (&k - k.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Spectrum(format!("kernel is not symmetric (max |K − Kᵀ| = {asym:e})")));
        }
        let k = (&k + k.transpose()) * 0.5;
        let eig = k.clone().symmetric_eigenvalues();
        let norm = eig.amax();
        let min = eig.min();
        if min < -PSD_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Spectrum(format!(
                "kernel is not positive semidefinite (min eigenvalue {min:e}, norm {norm:e})"
            )));
        }

        let c = coefficient_covariance(&basis, &k)?;
        let space = basis.space();
        let mut diagonal = true;
        let mut idx = vec![0; space.n()];
        let mut variances = Vec::new();
        for j in 0..len {
            let off: f64 = (0..len)
                .filter(|&i| i != j)
                .map(|i| c[(i, j)] * c[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off > DIAGONAL_TOL {
                diagonal = false;
            }
            space.decode_into(j, &mut idx);
            variances.push((MultiIndex(idx.clone()), c[(j, j)].max(0.0)));
        }
        Ok(KernelOperator {
            variances: SparseFourierModel::new(basis.clone(), variances)?,
            basis,
            matrix: Some(k),
            diagonal,
        })
    }

    /// The operator diagonal in the tensor basis with eigenvalues `s_k`
    /// (unlisted `k` have `s_k = 0`).
    pub fn from_spectrum(
        basis: Arc<TensorBasis>,
        spectrum: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        for (k, s) in spectrum {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Spectrum(format!("eigenvalue s_{k} = {s} must be finite and ≥ 0")));
            }
            entries.push((k, s));
        }
        Ok(KernelOperator {
            variances: SparseFourierModel::new(basis.clone(), entries)?,
            basis,
            matrix: None,
            diagonal: true,
        })
    }

    /// The identity on `L²(μ)` (`s_k = 1` for every `k`), i.e. `K = diag(1/μ)`.
    pub fn identity(basis: Arc<TensorBasis>) -> Result<Self> {
        basis.space().dense_len(DEFAULT_DENSE_LIMIT)?;
        let all: Vec<(MultiIndex, f64)> = basis.space().multi_indices().map(|k| (k, 1.0)).collect();
        Self::from_spectrum(basis, all)
    }

    /// The NNGP kernel of `recipe` on the encoded states of the basis' space.
    pub fn nngp(basis: Arc<TensorBasis>, recipe: &NngpRecipe, encoding: Encoding) -> Result<Self> {
        check_matrix_size(&basis)?;
        let features = feature_matrix(basis.space(), encoding, MATRIX_LIMIT)?;
        let base = &features * features.transpose();
        let k = nngp_kernel(recipe, &base)?;
        Self::from_matrix(basis, k)
    }

    pub fn basis(&self) -> &Arc<TensorBasis> {
        &self.basis
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// `C_kk = ⟨Ψ_k, K Ψ_k⟩` as a spectrum-shaped map. Selectors for GP work
    /// are resolved against it, so `top=` and `abs>=` act on the variances.
    pub fn variances(&self) -> &SparseFourierModel {
        &self.variances
    }

    /// The eigenvalues `s_k`, or `SpectrumError` if the operator is not diagonal.
    pub fn spectrum(&self) -> Result<&SparseFourierModel> {
        if self.diagonal {
            Ok(&self.variances)
        } else {
            Err(Error::Spectrum(
                "kernel is not diagonal in the tensor basis; only the trace formula applies".into(),
            ))
        }
    }

    /// The kernel matrix, forming `P diag(s) Pᵀ` when only a spectrum is held.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        if let Some(m) = &self.matrix {
            return Ok(m.clone());
        }
        let len = check_matrix_size(&self.basis)?;
        let space = self.basis.space();
        let mut s = DMatrix::zeros(len, len);
        for (k, v) in self.variances.entries() {
            let j = space.index_of(k.as_slice())?;
            s[(j, j)] = v;
        }
        two_sided(&self.basis, &s, inverse_table)
    }

    /// Operator action `(Kf)(x) = Σ_y K(x, y) f(y) μ(y)` on a dense table.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let space = self.basis.space();
        if space.size() != Some(f.len()) {
            return Err(Error::Dimension(format!("table of length {} for this space", f.len())));
        }
        if self.diagonal && self.matrix.is_none() {
            let mut c = f.to_vec();
            forward_table(&self.basis, &mut c)?;
            let mut out = vec![0.0; c.len()];
            for (k, s) in self.variances.entries() {
                let j = space.index_of(k.as_slice())?;
                out[j] = s * c[j];
            }
            inverse_table(&self.basis, &mut out)?;
            return Ok(out);
        }
        let k = self.matrix()?;
        let w = self.basis.measure().dense_weights(MATRIX_LIMIT)?;
        Ok((0..f.len())
            .map(|x| (0..f.len()).map(|y| k[(x, y)] * f[y] * w[y]).sum())
            .collect())
    }

    /// `true` at the dense index of each `k ∉ 𝒮`.
    pub fn tail_mask(&self, selector: &Selector) -> Result<Vec<bool>> {
        let space = self.basis.space();
        let len = space.dense_len(DEFAULT_DENSE_LIMIT)?;
        let resolved = selector.resolve(&self.variances);
        let mut k = vec![0; space.n()];
        Ok((0..len)
            .map(|j| {
                space.decode_into(j, &mut k);
                !resolved.contains(&MultiIndex(k.clone()))
            })
            .collect())
    }
}

/// `E‖(I − P_𝒮) H‖²_{L²(μ)} = tr((I − P_𝒮) K) = Σ_{k ∉ 𝒮} ⟨Ψ_k, K Ψ_k⟩`.
pub fn expected_residual_trace(op: &KernelOperator, selector: &Selector) -> f64 {
    op.variances().tail(selector).entries().map(|(_, v)| v).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumEntry {
    pub k: Vec<usize>,
    pub s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSource {
    Matrix(Vec<Vec<f64>>),
    Spectrum(Vec<SpectrumEntry>),
    Identity,
    Nngp(NngpSource),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NngpSource {
    pub depth: usize,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
    pub activation: super::nngp::Activation,
    #[serde(default)]
    pub encoding: Encoding,
}

impl NngpSource {
    pub fn recipe(&self) -> NngpRecipe {
        NngpRecipe {
            depth: self.depth,
            sigma_w2: self.sigma_w2,
            sigma_b2: self.sigma_b2,
            activation: self.activation.clone(),
        }
    }
}

/// Kernel specification file: a measure plus one kernel source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub cardinalities: Vec<usize>,
    pub measures: Vec<Vec<f64>>,
    pub kernel: KernelSource,
}

impl KernelSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn build(&self) -> Result<KernelOperator> {
        let measure = ProductMeasure::from_spec(&MeasureSpec {
            cardinalities: self.cardinalities.clone(),
            measures: self.measures.clone(),
        })?;
        let basis = Arc::new(TensorBasis::new(measure)?);
        match &self.kernel {
            KernelSource::Matrix(rows) => {
                let len = rows.len();
                if rows.iter().any(|r| r.len() != len) {
                    return Err(Error::Dimension("kernel matrix rows have unequal lengths".into()));
                }
                let m = DMatrix::from_fn(len, len, |i, j| rows[i][j]);
                KernelOperator::from_matrix(basis, m)
            }
            KernelSource::Spectrum(entries) => {
                let mut seen = BTreeMap::new();
                for e in entries {
                    if seen.insert(MultiIndex(e.k.clone()), e.s).is_some() {
                        return Err(Error::Data(format!("duplicate spectrum index {:?}", e.k)));
                    }
                }
                KernelOperator::from_spectrum(basis, seen)
            }
            KernelSource::Identity => KernelOperator::identity(basis),
            KernelSource::Nngp(src) => KernelOperator::nngp(basis, &src.recipe(), src.encoding),
        }
    }
}
