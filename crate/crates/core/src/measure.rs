//! Discrete feature spaces, product probability measures and the orthonormal
//! tensor-product basis of `L²(μ)`.
//!
//! States are enumerated in mixed-radix order with feature 0 as the slowest
//! digit. Every dense table in the crate (predictor values, coefficient
//! tables, kernel matrices) uses this layout.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on `Σ μ_i = 1` accepted at construction.
pub const MEASURE_SUM_TOL: f64 = 1e-12;
/// Tolerance on the coordinate Gram matrix accepted at construction.
pub const BASIS_GRAM_TOL: f64 = 1e-12;
/// Tag identifying the coordinate basis convention used by [`CoordinateBasis::build`].
pub const BASIS_CONVENTION: &str = "mgs-monomial-positive-top";

/// Cartesian product of finite feature alphabets `{0, …, m_i − 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    cardinalities: Vec<usize>,
    size: Option<usize>,
}

impl FeatureSpace {
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::Dimension("feature space needs at least one feature".into()));
        }
        if let Some((i, &m)) = cardinalities.iter().enumerate().find(|(_, &m)| m < 2) {
            return Err(Error::Dimension(format!(
                "feature {i} has cardinality {m}; every feature needs at least 2 states"
            )));
        }
        let size = cardinalities
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m));
        Ok(FeatureSpace { cardinalities, size })
    }

    /// Number of features `n`.
    pub fn n(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.cardinalities[i]
    }

    /// `Π m_i` as an exact wide integer.
    pub fn total_states(&self) -> u128 {
        self.cardinalities.iter().map(|&m| m as u128).product()
    }

    /// `Π m_i`, or `None` if it does not fit in `usize`.
    pub fn size(&self) -> Option<usize> {
        self.size
    }

    /// Returns the dense table length, failing if it exceeds `limit`.
    pub fn dense_len(&self, limit: usize) -> Result<usize> {
        match self.size {
            Some(s) if s <= limit => Ok(s),
            _ => Err(Error::DenseLimit {
                size: self.total_states(),
                limit,
            }),
        }
    }

    /// Mixed-radix strides (feature 0 slowest). Only meaningful when `size()` is `Some`.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.n()];
        for i in (0..self.n().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1].saturating_mul(self.cardinalities[i + 1]);
        }
        strides
    }

    pub fn check_state(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!(
                "state has {} entries, space has {} features",
                x.len(),
                self.n()
            )));
        }
        for (i, (&xi, &m)) in x.iter().zip(&self.cardinalities).enumerate() {
            if xi >= m {
                return Err(Error::Dimension(format!(
                    "state value {xi} out of range for feature {i} with {m} states"
                )));
            }
        }
        Ok(())
    }

    /// Position of `x` in the dense table.
    pub fn index_of(&self, x: &[usize]) -> Result<usize> {
        self.check_state(x)?;
        if self.size.is_none() {
            return Err(Error::DenseLimit {
                size: self.total_states(),
                limit: usize::MAX,
            });
        }
        Ok(self.index_unchecked(x))
    }

    pub(crate) fn index_unchecked(&self, x: &[usize]) -> usize {
        x.iter()
            .zip(&self.cardinalities)
            .fold(0usize, |acc, (&xi, &m)| acc * m + xi)
    }

    /// Writes the state at dense position `index` into `out`.
    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for i in (0..self.n()).rev() {
            let m = self.cardinalities[i];
            out[i] = index % m;
            index /= m;
        }
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        self.decode_into(index, &mut out);
        out
    }

    /// Iterates every state in dense-table order.
    pub fn states(&self) -> States<'_> {
        States {
            space: self,
            next: Some(vec![0; self.n()]),
        }
    }

    /// Iterates every multi-index of the basis in dense-table order.
    pub fn multi_indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        self.states().map(MultiIndex)
    }
}

/// Odometer over the states of a [`FeatureSpace`].
pub struct States<'a> {
    space: &'a FeatureSpace,
    next: Option<Vec<usize>>,
}

impl Iterator for States<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.space.cardinalities[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

/// Frequency multi-index `k` with `0 ≤ k_i ≤ m_i − 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Atom with only feature `i` active at level `level`.
    pub fn unit(n: usize, i: usize, level: usize) -> Self {
        let mut k = vec![0; n];
        k[i] = level;
        MultiIndex(k)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Supp(k) = {i : k_i ≠ 0}`.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &ki)| ki != 0)
            .map(|(i, _)| i)
    }

    /// Interaction order `d(k) = |Supp(k)|`.
    pub fn order(&self) -> usize {
        self.0.iter().filter(|&&ki| ki != 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&ki| ki == 0)
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.0[i] != 0
    }

    pub fn check(&self, space: &FeatureSpace) -> Result<()> {
        space
            .check_state(&self.0)
            .map_err(|e| Error::Dimension(format!("multi-index {self}: {e}")))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, k) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

/// Independent per-feature distributions with full support.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    space: FeatureSpace,
    probs: Vec<Vec<f64>>,
}

fn check_probability_vector(i: usize, p: &[f64]) -> Result<()> {
    if let Some(q) = p.iter().find(|q| !q.is_finite() || **q <= 0.0) {
        return Err(Error::MeasureSupport(format!(
            "feature {i} has probability {q}; every state needs positive mass"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > MEASURE_SUM_TOL {
        return Err(Error::MeasureSupport(format!(
            "feature {i} probabilities sum to {sum:.17}, not 1"
        )));
    }
    Ok(())
}

impl ProductMeasure {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let space = FeatureSpace::new(probs.iter().map(Vec::len).collect())?;
        let probs = probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                check_probability_vector(i, &p)?;
                let sum: f64 = p.iter().sum();
                // only absorb slack beyond rounding noise, so reloading a stored measure keeps its bits
                if (sum - 1.0).abs() > 1e-15 {
                    Ok(p.into_iter().map(|q| q / sum).collect())
                } else {
                    Ok(p)
                }
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(ProductMeasure { space, probs })
    }

    pub fn uniform(space: &FeatureSpace) -> Self {
        let probs = space
            .cardinalities()
            .iter()
            .map(|&m| vec![1.0 / m as f64; m])
            .collect();
        ProductMeasure {
            space: space.clone(),
            probs,
        }
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// `μ(x) = Π μ_i(x_i)`.
    pub fn prob(&self, x: &[usize]) -> f64 {
        x.iter().zip(&self.probs).map(|(&xi, p)| p[xi]).product()
    }

    /// Dense table of state probabilities.
    pub fn dense_weights(&self, limit: usize) -> Result<Vec<f64>> {
        self.space.dense_len(limit)?;
        let mut w = vec![1.0];
        for p in &self.probs {
            let mut next = Vec::with_capacity(w.len() * p.len());
            for &a in &w {
                next.extend(p.iter().map(|&q| a * q));
            }
            w = next;
        }
        Ok(w)
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            cardinalities: self.space.cardinalities().to_vec(),
            measures: self.probs.clone(),
        }
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        if spec.cardinalities.len() != spec.measures.len() {
            return Err(Error::Dimension(format!(
                "{} cardinalities but {} measures",
                spec.cardinalities.len(),
                spec.measures.len()
            )));
        }
        for (i, (&m, p)) in spec.cardinalities.iter().zip(&spec.measures).enumerate() {
            if m != p.len() {
                return Err(Error::Dimension(format!(
                    "feature {i}: cardinality {m} but {} probabilities",
                    p.len()
                )));
            }
        }
        ProductMeasure::new(spec.measures.clone())
    }

    /// SHA-256 over the cardinalities and the 17-significant-digit probabilities.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (m, p) in self.space.cardinalities().iter().zip(&self.probs) {
            hasher.update(format!("{m}:"));
            for q in p {
                hasher.update(format_f64(*q));
                hasher.update(b",");
            }
            hasher.update(b";");
        }
        hex::encode(hasher.finalize())
    }
}

/// On-disk description of a feature space and its product measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub cardinalities: Vec<usize>,
    pub measures: Vec<Vec<f64>>,
}

impl MeasureSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<ProductMeasure> {
        let text = std::fs::read_to_string(path)?;
        let spec: MeasureSpec = serde_json::from_str(&text)?;
        ProductMeasure::from_spec(&spec)
    }
}

/// Decimal rendering with 17 significant digits; parses back to the same bits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Orthonormal functions `ψ_{i,0} = 1, ψ_{i,1}, …` of one feature under `μ_i`.
///
/// `values[j][x] = ψ_{i,j}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateBasis {
    values: Vec<Vec<f64>>,
}

impl CoordinateBasis {
    /// Discrete orthogonal polynomials of `μ_i` by modified Gram–Schmidt on
    /// `1, t, t², …` (with `t = x / (m − 1)`), two passes, each function
    /// signed to be positive at the top state.
    pub fn build(mu: &[f64]) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::Dimension(format!(
                "a coordinate needs at least 2 states, got {}",
                mu.len()
            )));
        }
        check_probability_vector(0, mu)?;
        let m = mu.len();
        let top = (m - 1) as f64;
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(mu).map(|((x, y), w)| x * y * w).sum()
        };

        let mut values: Vec<Vec<f64>> = Vec::with_capacity(m);
        values.push(vec![1.0; m]);
        for j in 1..m {
            let mut v: Vec<f64> = (0..m).map(|x| (x as f64 / top).powi(j as i32)).collect();
            let initial = dot(&v, &v).sqrt();
            for _pass in 0..2 {
                for q in &values {
                    let c = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if !(norm > 1e-10 * initial) {
                return Err(Error::BasisConstruction(format!(
                    "monomial of degree {j} is numerically dependent (residual norm {norm:e})"
                )));
            }
            let sign = if v[m - 1] < 0.0 { -1.0 } else { 1.0 };
            values.push(v.into_iter().map(|a| sign * a / norm).collect());
        }

        let basis = CoordinateBasis { values };
        let err = basis.gram_error(mu);
        if err > BASIS_GRAM_TOL {
            return Err(Error::BasisConstruction(format!(
                "Gram matrix deviates from identity by {err:e}"
            )));
        }
        Ok(basis)
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    /// `ψ_{i,level}(x)`.
    #[inline]
    pub fn value(&self, level: usize, x: usize) -> f64 {
        self.values[level][x]
    }

    pub fn row(&self, level: usize) -> &[f64] {
        &self.values[level]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Max entrywise deviation of the `L²(μ_i)` Gram matrix from the identity.
    pub fn gram_error(&self, mu: &[f64]) -> f64 {
        let m = self.values.len();
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                let g: f64 = (0..m)
                    .map(|x| self.values[a][x] * self.values[b][x] * mu[x])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// The tensor basis `Ψ_k(x) = Π_i ψ_{i,k_i}(x_i)` of `L²(μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis {
    measure: ProductMeasure,
    coords: Vec<CoordinateBasis>,
}

impl TensorBasis {
    pub fn new(measure: ProductMeasure) -> Result<Self> {
        let coords = measure
            .marginals()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                CoordinateBasis::build(p).map_err(|e| match e {
                    Error::BasisConstruction(msg) => {
                        Error::BasisConstruction(format!("feature {i}: {msg}"))
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TensorBasis { measure, coords })
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    pub fn space(&self) -> &FeatureSpace {
        self.measure.space()
    }

    pub fn coordinate(&self, i: usize) -> &CoordinateBasis {
        &self.coords[i]
    }

    pub fn coordinates(&self) -> &[CoordinateBasis] {
        &self.coords
    }

    /// `Ψ_k(x)` with range checks on both arguments.
    pub fn atom(&self, k: &MultiIndex, x: &[usize]) -> Result<f64> {
        k.check(self.space())?;
        self.space().check_state(x)?;
        Ok(self.atom_unchecked(k.as_slice(), x))
    }

    #[inline]
    pub fn atom_unchecked(&self, k: &[usize], x: &[usize]) -> f64 {
        k.iter()
            .zip(x)
            .zip(&self.coords)
            .filter(|((&ki, _), _)| ki != 0)
            .map(|((&ki, &xi), c)| c.value(ki, xi))
            .product()
    }

    /// Dense table of `Ψ_k` over all states.
    pub fn atom_table(&self, k: &MultiIndex, limit: usize) -> Result<Vec<f64>> {
        k.check(self.space())?;
        let len = self.space().dense_len(limit)?;
        let mut x = vec![0; self.space().n()];
        Ok((0..len)
            .map(|idx| {
                self.space().decode_into(idx, &mut x);
                self.atom_unchecked(k.as_slice(), &x)
            })
            .collect())
    }
}

/// `⟨f, g⟩_{L²(μ)} = Σ_x f(x) g(x) μ(x)` over dense tables.
pub fn inner_product(f: &[f64], g: &[f64], measure: &ProductMeasure) -> Result<f64> {
    let len = measure.space().size().ok_or(Error::DenseLimit {
        size: measure.space().total_states(),
        limit: usize::MAX,
    })?;
    if f.len() != len || g.len() != len {
        return Err(Error::Dimension(format!(
            "tables of length {} and {} for a space of {len} states",
            f.len(),
            g.len()
        )));
    }
    let w = measure.dense_weights(usize::MAX)?;
    Ok(f.iter().zip(g).zip(&w).map(|((a, b), p)| a * b * p).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_binary_atom() {
        let b = CoordinateBasis::build(&[0.5, 0.5]).unwrap();
        assert_eq!(b.row(0), &[1.0, 1.0]);
        assert!(close(b.value(1, 0), -1.0, 1e-15));
        assert!(close(b.value(1, 1), 1.0, 1e-15));
    }

    #[test]
    fn skewed_binary_atom() {
        let b = CoordinateBasis::build(&[0.75, 0.25]).unwrap();
        let s3 = 3f64.sqrt();
        assert!(close(b.value(1, 0), -1.0 / s3, 1e-14));
        assert!(close(b.value(1, 1), s3, 1e-14));
    }

    #[test]
    fn ternary_uniform_is_orthonormal() {
        let mu = [1.0 / 3.0; 3];
        let b = CoordinateBasis::build(&mu).unwrap();
        assert!(b.gram_error(&mu) <= 1e-12);
        for j in 1..3 {
            assert!(b.value(j, 2) > 0.0);
        }
    }

    #[test]
    fn rejects_zero_mass_and_bad_sum() {
        assert!(matches!(
            CoordinateBasis::build(&[1.0, 0.0]),
            Err(Error::MeasureSupport(_))
        ));
        assert!(matches!(
            ProductMeasure::new(vec![vec![0.5, 0.6]]),
            Err(Error::MeasureSupport(_))
        ));
        assert!(matches!(
            ProductMeasure::new(vec![vec![-0.5, 1.5]]),
            Err(Error::MeasureSupport(_))
        ));
    }

    #[test]
    fn rejects_constant_feature() {
        assert!(matches!(
            FeatureSpace::new(vec![2, 1, 3]),
            Err(Error::Dimension(_))
        ));
        assert!(FeatureSpace::new(vec![]).is_err());
    }

    #[test]
    fn near_singular_measure_fails_construction() {
        // the top state carries so little mass that the cubic is lost in rounding
        let eps = 1e-30;
        let mu = [0.5 - eps, 0.25, 0.25 - eps, 2.0 * eps];
        assert!(matches!(
            CoordinateBasis::build(&mu),
            Err(Error::BasisConstruction(_))
        ));
    }

    #[test]
    fn mixed_radix_order() {
        let s = FeatureSpace::new(vec![2, 3]).unwrap();
        let states: Vec<_> = s.states().collect();
        assert_eq!(states.len(), 6);
        assert_eq!(states[0], vec![0, 0]);
        assert_eq!(states[1], vec![0, 1]);
        assert_eq!(states[3], vec![1, 0]);
        for (idx, x) in states.iter().enumerate() {
            assert_eq!(s.index_of(x).unwrap(), idx);
            assert_eq!(&s.decode(idx), x);
        }
        assert_eq!(s.strides(), vec![3, 1]);
    }

    #[test]
    fn tensor_atoms() {
        let uniform = ProductMeasure::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let basis = TensorBasis::new(uniform).unwrap();
        let k = MultiIndex(vec![1, 1]);
        assert!(close(basis.atom(&k, &[0, 1]).unwrap(), -1.0, 1e-15));
        assert_eq!(basis.atom(&MultiIndex::zero(2), &[1, 0]).unwrap(), 1.0);

        let skew = ProductMeasure::new(vec![vec![0.75, 0.25], vec![0.5, 0.5]]).unwrap();
        let basis = TensorBasis::new(skew).unwrap();
        assert!(close(basis.atom(&k, &[1, 1]).unwrap(), 3f64.sqrt(), 1e-14));
        assert!(matches!(basis.atom(&k, &[2, 0]), Err(Error::Dimension(_))));
        assert!(matches!(
            basis.atom(&MultiIndex(vec![2, 0]), &[0, 0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn inner_product_examples() {
        let mu = ProductMeasure::new(vec![vec![0.5, 0.5]]).unwrap();
        assert!(close(inner_product(&[1.0, 1.0], &[1.0, 1.0], &mu).unwrap(), 1.0, 1e-15));
        assert!(close(inner_product(&[0.0, 1.0], &[0.0, 1.0], &mu).unwrap(), 0.5, 1e-15));
        assert!(matches!(
            inner_product(&[0.0], &[0.0, 1.0], &mu),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn support_and_order() {
        let k = MultiIndex(vec![0, 2, 0, 1]);
        assert_eq!(k.support().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(k.order(), 2);
        assert!(MultiIndex::zero(3).is_zero());
        assert_eq!(MultiIndex::zero(3).order(), 0);
        assert_eq!(k.to_string(), "(0,2,0,1)");
    }

    #[test]
    fn spec_round_trip_and_hash() {
        let spec: MeasureSpec =
            serde_json::from_str(r#"{"cardinalities":[2,3],"measures":[[0.25,0.75],[0.2,0.3,0.5]]}"#)
                .unwrap();
        let m = ProductMeasure::from_spec(&spec).unwrap();
        assert_eq!(m.to_spec(), spec);
        assert_eq!(m.hash(), ProductMeasure::from_spec(&spec).unwrap().hash());
        let bad: Result<MeasureSpec, _> =
            serde_json::from_str(r#"{"cardinalities":[2],"measures":[[0.5,0.5]],"extra":1}"#);
        assert!(bad.is_err());
        let mismatch = MeasureSpec {
            cardinalities: vec![3],
            measures: vec![vec![0.5, 0.5]],
        };
        assert!(ProductMeasure::from_spec(&mismatch).is_err());
    }

    #[test]
    fn format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 123456.789, -0.0] {
            let s = format_f64(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{s}");
        }
    }
}
