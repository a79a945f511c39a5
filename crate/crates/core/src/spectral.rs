//! Spectral form of predictors: forward/inverse transforms against the tensor
//! basis, sparse coefficient maps, truncation and Parseval norms.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measure::{FeatureSpace, MultiIndex, TensorBasis};
use crate::predictor::{DensePredictor, Predictor, DEFAULT_DENSE_LIMIT};
use crate::selector::Selector;

/// Coefficients below this magnitude are not stored.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone)]
struct CompiledAtom {
    coef: f64,
    support: Vec<(usize, usize)>,
}

/// A predictor in spectral form: `h = Σ_k ĥ(k) Ψ_k` over the stored entries.
#[derive(Debug, Clone)]
pub struct SparseFourierModel {
    basis: Arc<TensorBasis>,
    entries: BTreeMap<MultiIndex, f64>,
    atoms: Vec<CompiledAtom>,
}

impl SparseFourierModel {
    /// Builds a model, dropping coefficients below [`PRUNE_THRESHOLD`].
    ///
    /// Duplicate multi-indices and non-finite coefficients are rejected.
    pub fn new(
        basis: Arc<TensorBasis>,
        entries: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, c) in entries {
            k.check(basis.space())?;
            if !c.is_finite() {
                return Err(Error::Numeric(format!("coefficient of {k} is {c}")));
            }
            if map.contains_key(&k) {
                return Err(Error::Data(format!("duplicate multi-index {k}")));
            }
            map.insert(k, c);
        }
        map.retain(|_, c| c.abs() >= PRUNE_THRESHOLD);
        Ok(Self::from_map(basis, map))
    }

    pub(crate) fn from_map(basis: Arc<TensorBasis>, entries: BTreeMap<MultiIndex, f64>) -> Self {
        let atoms = entries
            .iter()
            .map(|(k, &coef)| CompiledAtom {
                coef,
                support: k.support().map(|i| (i, k.as_slice()[i])).collect(),
            })
            .collect();
        SparseFourierModel {
            basis,
            entries,
            atoms,
        }
    }

    pub fn empty(basis: Arc<TensorBasis>) -> Self {
        Self::from_map(basis, BTreeMap::new())
    }

    pub fn basis(&self) -> &Arc<TensorBasis> {
        &self.basis
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        self.basis.space()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.entries.iter().map(|(k, &c)| (k, c))
    }

    /// `ĥ(k)`, zero when `k` is not stored.
    pub fn coefficient(&self, k: &MultiIndex) -> f64 {
        self.entries.get(k).copied().unwrap_or(0.0)
    }

    /// `ĥ(0) = E_μ[h]`.
    pub fn constant(&self) -> f64 {
        self.coefficient(&MultiIndex::zero(self.feature_space().n()))
    }

    /// Largest `d(k)` among stored entries.
    pub fn interaction_order(&self) -> usize {
        self.atoms.iter().map(|a| a.support.len()).max().unwrap_or(0)
    }

    /// Inverse transform at one state, `Σ_k ĥ(k) Ψ_k(x)`.
    pub fn evaluate(&self, x: &[usize]) -> Result<f64> {
        self.feature_space().check_state(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    #[inline]
    pub(crate) fn evaluate_unchecked(&self, x: &[usize]) -> f64 {
        let coords = self.basis.coordinates();
        self.atoms
            .iter()
            .map(|a| {
                a.support
                    .iter()
                    .fold(a.coef, |acc, &(i, level)| acc * coords[i].value(level, x[i]))
            })
            .sum()
    }

    /// Iterates `(k, ĥ(k), Ψ_k(x), d(k))` over stored entries without revalidating `x`.
    pub(crate) fn atoms_at<'a>(
        &'a self,
        x: &'a [usize],
    ) -> impl Iterator<Item = (&'a [(usize, usize)], f64, f64)> + 'a {
        let coords = self.basis.coordinates();
        self.atoms.iter().map(move |a| {
            let psi = a
                .support
                .iter()
                .fold(1.0, |acc, &(i, level)| acc * coords[i].value(level, x[i]));
            (a.support.as_slice(), a.coef, psi)
        })
    }

    /// Dense value table via the factorized inverse transform.
    pub fn to_dense(&self, limit: usize) -> Result<DensePredictor> {
        let space = self.feature_space();
        let len = space.dense_len(limit)?;
        let mut table = vec![0.0; len];
        for (k, &c) in &self.entries {
            table[space.index_unchecked(k.as_slice())] = c;
        }
        inverse_table(&self.basis, &mut table)?;
        DensePredictor::new(space.clone(), table)
    }

    /// `sqrt(Σ_k ĥ(k)²)`, equal to `‖h‖_{L²(μ)}` by Parseval.
    pub fn parseval_norm(&self) -> f64 {
        self.entries.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Keeps exactly the entries selected by `selector`; returns the kept model
    /// and the residual energy `‖h − h_𝒮‖_{L²(μ)}`.
    pub fn truncate(&self, selector: &Selector) -> (SparseFourierModel, f64) {
        let resolved = selector.resolve(self);
        let mut kept = BTreeMap::new();
        let mut tail = 0.0;
        for (k, &c) in &self.entries {
            if resolved.contains(k) {
                kept.insert(k.clone(), c);
            } else {
                tail += c * c;
            }
        }
        (Self::from_map(self.basis.clone(), kept), tail.sqrt())
    }

    /// Entries of `self` that `selector` discards.
    pub fn tail(&self, selector: &Selector) -> SparseFourierModel {
        let resolved = selector.resolve(self);
        let map = self
            .entries
            .iter()
            .filter(|(k, _)| !resolved.contains(k))
            .map(|(k, &c)| (k.clone(), c))
            .collect();
        Self::from_map(self.basis.clone(), map)
    }
}

impl Predictor for SparseFourierModel {
    fn space(&self) -> &FeatureSpace {
        self.feature_space()
    }

    fn value(&self, x: &[usize]) -> f64 {
        self.evaluate_unchecked(x)
    }
}

/// Applies `mats[i]` (an `m_i × m_i` matrix, `out[a] = Σ_b M[a][b] in[b]`)
/// along every axis of a mixed-radix table.
pub(crate) fn apply_axes(table: &mut [f64], space: &FeatureSpace, mats: &[Vec<Vec<f64>>]) {
    let strides = space.strides();
    let len = table.len();
    let mut gather = Vec::new();
    let mut scatter = Vec::new();
    for (i, mat) in mats.iter().enumerate() {
        let m = space.cardinality(i);
        let stride = strides[i];
        let block = m * stride;
        gather.resize(m, 0.0);
        scatter.resize(m, 0.0);
        for base in (0..len).step_by(block) {
            for r in 0..stride {
                for (b, g) in gather.iter_mut().enumerate() {
                    *g = table[base + b * stride + r];
                }
                for (a, s) in scatter.iter_mut().enumerate() {
                    *s = mat[a].iter().zip(&gather).map(|(p, q)| p * q).sum();
                }
                for (a, s) in scatter.iter().enumerate() {
                    table[base + a * stride + r] = *s;
                }
            }
        }
    }
}

fn check_table(basis: &TensorBasis, table: &[f64]) -> Result<()> {
    if basis.space().size() != Some(table.len()) {
        return Err(Error::Dimension(format!(
            "table of length {} for a space of {} states",
            table.len(),
            basis.space().total_states()
        )));
    }
    Ok(())
}

/// In place: values on `𝒴` to coefficients indexed by `k` in the same mixed-radix layout.
pub fn forward_table(basis: &TensorBasis, table: &mut [f64]) -> Result<()> {
    check_table(basis, table)?;
    let mats: Vec<Vec<Vec<f64>>> = basis
        .coordinates()
        .iter()
        .zip(basis.measure().marginals())
        .map(|(cb, mu)| {
            let m = cb.cardinality();
            (0..m)
                .map(|level| (0..m).map(|x| cb.value(level, x) * mu[x]).collect())
                .collect()
        })
        .collect();
    apply_axes(table, basis.space(), &mats);
    Ok(())
}

/// In place: coefficients indexed by `k` to values on `𝒴`.
pub fn inverse_table(basis: &TensorBasis, table: &mut [f64]) -> Result<()> {
    check_table(basis, table)?;
    let mats: Vec<Vec<Vec<f64>>> = basis
        .coordinates()
        .iter()
        .map(|cb| {
            let m = cb.cardinality();
            (0..m)
                .map(|x| (0..m).map(|level| cb.value(level, x)).collect())
                .collect()
        })
        .collect();
    apply_axes(table, basis.space(), &mats);
    Ok(())
}

/// All coefficients `ĥ(k) = E_μ[h Ψ_k]` of a dense predictor, factorized per axis.
pub fn forward_transform(h: &DensePredictor, basis: &Arc<TensorBasis>) -> Result<SparseFourierModel> {
    forward_transform_with_limit(h, basis, DEFAULT_DENSE_LIMIT)
}

pub fn forward_transform_with_limit(
    h: &DensePredictor,
    basis: &Arc<TensorBasis>,
    limit: usize,
) -> Result<SparseFourierModel> {
    let space = basis.space();
    if h.space() != space {
        return Err(Error::Dimension(format!(
            "predictor space {:?} differs from basis space {:?}",
            h.space().cardinalities(),
            space.cardinalities()
        )));
    }
    space.dense_len(limit)?;
    let mut table = h.values().to_vec();
    forward_table(basis, &mut table)?;
    let mut k = vec![0; space.n()];
    let entries: BTreeMap<MultiIndex, f64> = table
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() >= PRUNE_THRESHOLD)
        .map(|(idx, &c)| {
            space.decode_into(idx, &mut k);
            (MultiIndex(k.clone()), c)
        })
        .collect();
    Ok(SparseFourierModel::from_map(basis.clone(), entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{inner_product, ProductMeasure};

    fn binary_basis(n: usize) -> Arc<TensorBasis> {
        Arc::new(TensorBasis::new(ProductMeasure::new(vec![vec![0.5, 0.5]; n]).unwrap()).unwrap())
    }

    #[test]
    fn constant_has_single_coefficient() {
        let basis = binary_basis(3);
        let h = DensePredictor::new(basis.space().clone(), vec![2.5; 8]).unwrap();
        let model = forward_transform(&h, &basis).unwrap();
        assert_eq!(model.len(), 1);
        assert!((model.constant() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn identity_bit_spectrum() {
        let basis = binary_basis(1);
        let h = DensePredictor::new(basis.space().clone(), vec![0.0, 1.0]).unwrap();
        let model = forward_transform(&h, &basis).unwrap();
        assert!((model.coefficient(&MultiIndex(vec![0])) - 0.5).abs() < 1e-15);
        assert!((model.coefficient(&MultiIndex(vec![1])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn atom_transforms_to_itself() {
        let m = ProductMeasure::new(vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.4]]).unwrap();
        let basis = Arc::new(TensorBasis::new(m).unwrap());
        let k0 = MultiIndex(vec![2, 1]);
        let table = basis.atom_table(&k0, DEFAULT_DENSE_LIMIT).unwrap();
        let h = DensePredictor::new(basis.space().clone(), table).unwrap();
        let model = forward_transform(&h, &basis).unwrap();
        for (k, c) in model.entries() {
            if *k == k0 {
                assert!((c - 1.0).abs() < 1e-12);
            } else {
                assert!(c.abs() < 1e-12, "{k}: {c}");
            }
        }
    }

    #[test]
    fn empty_and_constant_models_evaluate() {
        let basis = binary_basis(2);
        let empty = SparseFourierModel::empty(basis.clone());
        assert_eq!(empty.evaluate(&[1, 0]).unwrap(), 0.0);
        assert_eq!(empty.parseval_norm(), 0.0);
        let c = SparseFourierModel::new(basis, [(MultiIndex(vec![0, 0]), 2.5)]).unwrap();
        for x in c.feature_space().states() {
            assert_eq!(c.evaluate(&x).unwrap(), 2.5);
        }
        assert!(matches!(c.evaluate(&[2, 0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_duplicates_and_prunes_dust() {
        let basis = binary_basis(2);
        let dup = SparseFourierModel::new(
            basis.clone(),
            [(MultiIndex(vec![1, 0]), 1.0), (MultiIndex(vec![1, 0]), 2.0)],
        );
        assert!(matches!(dup, Err(Error::Data(_))));
        let m = SparseFourierModel::new(
            basis,
            [(MultiIndex(vec![1, 0]), 1e-16), (MultiIndex(vec![0, 1]), 3.0)],
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.interaction_order(), 1);
    }

    #[test]
    fn truncation_residual() {
        let basis = binary_basis(2);
        let k1 = MultiIndex(vec![1, 0]);
        let k2 = MultiIndex(vec![1, 1]);
        let model = SparseFourierModel::new(basis, [(k1.clone(), 3.0), (k2, 4.0)]).unwrap();
        let (kept, res) = model.truncate(&Selector::explicit([k1]));
        assert_eq!(kept.len(), 1);
        assert!((res - 4.0).abs() < 1e-15);
        let (all, res) = model.truncate(&Selector::all());
        assert_eq!(all.len(), 2);
        assert_eq!(res, 0.0);
        let (none, res) = model.truncate(&Selector::none());
        assert!(none.is_empty());
        assert!((res - 5.0).abs() < 1e-15);
    }

    #[test]
    fn parseval_matches_dense_norm() {
        let m = ProductMeasure::new(vec![vec![0.1, 0.9], vec![0.3, 0.3, 0.4]]).unwrap();
        let basis = Arc::new(TensorBasis::new(m.clone()).unwrap());
        let values: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
        let h = DensePredictor::new(basis.space().clone(), values.clone()).unwrap();
        let model = forward_transform(&h, &basis).unwrap();
        let dense = inner_product(&values, &values, &m).unwrap().sqrt();
        assert!((model.parseval_norm() - dense).abs() < 1e-12);
        let back = model.to_dense(DEFAULT_DENSE_LIMIT).unwrap();
        for (a, b) in back.values().iter().zip(&values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_limit_enforced() {
        let basis = binary_basis(4);
        let h = DensePredictor::new(basis.space().clone(), vec![0.0; 16]).unwrap();
        assert!(matches!(
            forward_transform_with_limit(&h, &basis, 8),
            Err(Error::DenseLimit { .. })
        ));
    }
}
