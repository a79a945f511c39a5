//! Empirical three-stage atom selection by correlation with the targets.

use std::collections::BTreeSet;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{MultiIndex, TensorBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    /// Highest interaction order, 1 to 3.
    pub d_max: usize,
    /// Univariate modes per feature that seed the pair and triplet stages.
    pub per_feature_top: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k1: 300,
            k2: 4000,
            k3: 2000,
            d_max: 3,
            per_feature_top: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAtom {
    pub k: MultiIndex,
    /// `|corr(Ψ_k(rows), targets)|`.
    pub score: f64,
    pub stage: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSelection {
    pub config: SelectionConfig,
    /// Stage 1 atoms, then stage 2, then stage 3; each block ranked.
    pub selected: Vec<ScoredAtom>,
}

impl AtomSelection {
    pub fn atoms(&self) -> impl Iterator<Item = &MultiIndex> {
        self.selected.iter().map(|a| &a.k)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-feature, per-level values of the coordinate basis at every row.
struct Columns {
    /// `values[i][l][r] = ψ_{i,l}(x_r,i)`.
    values: Vec<Vec<Vec<f64>>>,
    targets_centered: Vec<f64>,
    target_ss: f64,
}

impl Columns {
    fn new(basis: &TensorBasis, rows: &[Vec<usize>], targets: &[f64]) -> Self {
        let n = basis.space().n();
        let values = (0..n)
            .map(|i| {
                let c = basis.coordinate(i);
                (0..c.cardinality())
                    .map(|l| rows.iter().map(|x| c.value(l, x[i])).collect())
                    .collect()
            })
            .collect();
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let targets_centered: Vec<f64> = targets.iter().map(|y| y - mean).collect();
        let target_ss = targets_centered.iter().map(|y| y * y).sum();
        Columns {
            values,
            targets_centered,
            target_ss,
        }
    }

    /// `|Pearson(Ψ_k, y)|`, or `None` for a zero-variance column.
    fn score(&self, k: &MultiIndex) -> Option<f64> {
        let support: Vec<&[f64]> = k.support().map(|i| self.values[i][k.as_slice()[i]].as_slice()).collect();
        let rows = self.targets_centered.len();
        let (mut s, mut ss, mut sy) = (0.0, 0.0, 0.0);
        for r in 0..rows {
            let v: f64 = support.iter().map(|col| col[r]).product();
            s += v;
            ss += v * v;
            sy += v * self.targets_centered[r];
        }
        let var = ss - s * s / rows as f64;
        if var <= 1e-12 * ss.max(f64::MIN_POSITIVE) {
            return None;
        }
        if self.target_ss == 0.0 {
            return Some(0.0);
        }
        Some((sy / (var.sqrt() * self.target_ss.sqrt())).abs().min(1.0))
    }
}

fn rank(columns: &Columns, candidates: Vec<MultiIndex>, stage: u8) -> Vec<ScoredAtom> {
    let mut scored: Vec<ScoredAtom> = candidates
        .into_par_iter()
        .filter_map(|k| columns.score(&k).map(|score| ScoredAtom { k, score, stage }))
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.k.cmp(&b.k)));
    scored
}

/// Ranks univariate atoms, then pairs and triplets built from each feature's
/// leading modes. Ties go to the lexicographically smaller multi-index.
pub fn select_atoms(
    basis: &TensorBasis,
    rows: &[Vec<usize>],
    targets: &[f64],
    config: &SelectionConfig,
) -> Result<AtomSelection> {
    if rows.is_empty() {
        return Err(Error::Data("atom selection needs at least one row".into()));
    }
    if rows.len() != targets.len() {
        return Err(Error::Dimension(format!("{} rows but {} targets", rows.len(), targets.len())));
    }
    if targets.iter().any(|y| !y.is_finite()) {
        return Err(Error::Data("targets must be finite".into()));
    }
    if !(1..=3).contains(&config.d_max) {
        return Err(Error::Parameter(format!("d_max must be 1, 2 or 3, got {}", config.d_max)));
    }
    let space = basis.space();
    for x in rows {
        space.check_state(x)?;
    }
    let columns = Columns::new(basis, rows, targets);
    if columns.target_ss == 0.0 {
        warn!("targets are constant; atoms are selected in lexicographic order");
    }
    let n = space.n();

    let univariate: Vec<MultiIndex> = (0..n)
        .flat_map(|i| (1..space.cardinality(i)).map(move |l| MultiIndex::unit(n, i, l)))
        .collect();
    let ranked1 = rank(&columns, univariate, 1);
    let mut top_modes: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in &ranked1 {
        let i = a.k.support().next().expect("univariate atom");
        if top_modes[i].len() < config.per_feature_top {
            top_modes[i].push(a.k.as_slice()[i]);
        }
    }
    let mut selected: Vec<ScoredAtom> = ranked1.into_iter().take(config.k1).collect();

    if config.d_max >= 2 {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for &li in &top_modes[i] {
                    for &lj in &top_modes[j] {
                        let mut k = vec![0; n];
                        k[i] = li;
                        k[j] = lj;
                        pairs.push(MultiIndex(k));
                    }
                }
            }
        }
        let kept2: Vec<ScoredAtom> = rank(&columns, pairs, 2).into_iter().take(config.k2).collect();

        if config.d_max >= 3 {
            let mut triples = BTreeSet::new();
            for pair in &kept2 {
                for (f, modes) in top_modes.iter().enumerate() {
                    if pair.k.is_active(f) {
                        continue;
                    }
                    for &l in modes {
                        let mut k = pair.k.0.clone();
                        k[f] = l;
                        triples.insert(MultiIndex(k));
                    }
                }
            }
            let kept3 = rank(&columns, triples.into_iter().collect(), 3).into_iter().take(config.k3);
            selected.extend(kept2);
            selected.extend(kept3);
        } else {
            selected.extend(kept2);
        }
    }
    Ok(AtomSelection {
        config: *config,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{FeatureSpace, ProductMeasure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (TensorBasis, Vec<Vec<usize>>) {
        let space = FeatureSpace::new(vec![3, 2, 4, 3]).unwrap();
        let basis = TensorBasis::new(ProductMeasure::uniform(&space)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = (0..400)
            .map(|_| space.cardinalities().iter().map(|&m| rng.random_range(0..m)).collect())
            .collect();
        (basis, rows)
    }

    #[test]
    fn matching_atom_ranks_first() {
        let (basis, rows) = setup();
        let k0 = MultiIndex(vec![0, 0, 2, 0]);
        let y: Vec<f64> = rows.iter().map(|x| basis.atom(&k0, x).unwrap()).collect();
        let sel = select_atoms(&basis, &rows, &y, &SelectionConfig::default()).unwrap();
        assert_eq!(sel.selected[0].k, k0);
        assert!((sel.selected[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budgets_orders_and_determinism() {
        let (basis, rows) = setup();
        let y: Vec<f64> = rows.iter().map(|x| (x[0] * x[2]) as f64 + 0.5 * x[1] as f64 - x[3] as f64).collect();
        let config = SelectionConfig {
            k1: 4,
            k2: 6,
            k3: 5,
            d_max: 3,
            per_feature_top: 2,
        };
        let sel = select_atoms(&basis, &rows, &y, &config).unwrap();
        let count = |s| sel.selected.iter().filter(|a| a.stage == s).count();
        assert_eq!((count(1), count(2), count(3)), (4, 6, 5));
        for a in &sel.selected {
            assert_eq!(a.k.order(), a.stage as usize);
        }
        let again = select_atoms(&basis, &rows, &y, &config).unwrap();
        assert_eq!(sel.to_json().unwrap(), again.to_json().unwrap());

        let low = select_atoms(&basis, &rows, &y, &SelectionConfig { d_max: 1, ..config }).unwrap();
        assert!(low.selected.iter().all(|a| a.k.order() == 1));
    }

    #[test]
    fn constant_target_is_lexicographic() {
        let (basis, rows) = setup();
        let y = vec![2.5; rows.len()];
        let config = SelectionConfig {
            d_max: 1,
            ..SelectionConfig::default()
        };
        let sel = select_atoms(&basis, &rows, &y, &config).unwrap();
        let ks: Vec<&MultiIndex> = sel.atoms().collect();
        let mut sorted = ks.clone();
        sorted.sort();
        assert_eq!(ks, sorted);
        assert!(sel.selected.iter().all(|a| a.score == 0.0));
    }

    #[test]
    fn zero_variance_and_empty() {
        let (basis, _) = setup();
        // feature 1 never varies: its atoms are dropped
        let rows: Vec<Vec<usize>> = (0..30).map(|r| vec![r % 3, 1, r % 4, (r / 3) % 3]).collect();
        let y: Vec<f64> = rows.iter().map(|x| x[0] as f64).collect();
        let sel = select_atoms(&basis, &rows, &y, &SelectionConfig::default()).unwrap();
        assert!(sel.atoms().all(|k| !k.is_active(1)));
        assert!(matches!(
            select_atoms(&basis, &[], &[], &SelectionConfig::default()),
            Err(Error::Data(_))
        ));
    }
}
