//! Ridge least-squares fit of spectral coefficients on selected atoms.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::{MultiIndex, TensorBasis};
use crate::spectral::SparseFourierModel;

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Reciprocal condition estimate below which the normal matrix counts as singular.
const MIN_RCOND: f64 = 1e-14;

fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    if !(hi > 0.0) || (lo / hi).powi(2) < MIN_RCOND {
        return None;
    }
    Some(chol.solve(b))
}

/// Fits `targets ≈ ĥ(0) + Σ_k ĥ(k) Ψ_k(rows)` over `atoms` (the constant atom
/// is always included). Identical rows are merged with summed weights; the
/// primal normal equations are used when there are at least as many distinct
/// rows as columns and the dual (kernel) form otherwise.
pub fn fit_coefficients<'a>(
    basis: Arc<TensorBasis>,
    atoms: impl IntoIterator<Item = &'a MultiIndex>,
    rows: &[Vec<usize>],
    targets: &[f64],
    weights: Option<&[f64]>,
    ridge: f64,
) -> Result<SparseFourierModel> {
    if rows.is_empty() {
        return Err(Error::Data("cannot fit coefficients on an empty dataset".into()));
    }
    if rows.len() != targets.len() || weights.is_some_and(|w| w.len() != rows.len()) {
        return Err(Error::Dimension("rows, targets and weights differ in length".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Parameter(format!("ridge must be finite and ≥ 0, got {ridge}")));
    }
    let space = basis.space();
    let n = space.n();
    let mut columns = vec![MultiIndex::zero(n)];
    let mut seen = BTreeSet::new();
    for k in atoms {
        k.check(space)?;
        if !k.is_zero() && seen.insert(k.clone()) {
            columns.push(k.clone());
        }
    }

    // merge duplicate states: Σ w (y − f)² = Σ_g W_g (ȳ_g − f)² + const
    let mut groups: BTreeMap<&[usize], (f64, f64)> = BTreeMap::new();
    for (r, x) in rows.iter().enumerate() {
        space.check_state(x)?;
        let w = weights.map_or(1.0, |w| w[r]);
        if !(w >= 0.0 && w.is_finite()) || !targets[r].is_finite() {
            return Err(Error::Data(format!("row {r} has a non-finite target or invalid weight")));
        }
        let g = groups.entry(x.as_slice()).or_insert((0.0, 0.0));
        g.0 += w;
        g.1 += w * targets[r];
    }
    groups.retain(|_, g| g.0 > 0.0);
    let g = groups.len();
    let p = columns.len();
    if p > g {
        warn!("{p} atoms for {g} distinct rows; the fit is underdetermined");
    }
    let sqrt_w: Vec<f64> = groups.values().map(|(w, _)| w.sqrt()).collect();
    let y = DVector::from_iterator(g, groups.values().zip(&sqrt_w).map(|((w, s), r)| s / w * r));
    let states: Vec<&[usize]> = groups.keys().copied().collect();
    // rows scaled by √W
    let x = DMatrix::from_fn(g, p, |r, c| sqrt_w[r] * basis.atom_unchecked(columns[c].as_slice(), states[r]));

    let singular = || Error::Fit(format!("normal equations are singular ({p} atoms, {g} distinct rows, ridge {ridge})"));
    let beta = if p <= g {
        let mut a = x.tr_mul(&x);
        for d in 0..p {
            a[(d, d)] += ridge;
        }
        solve_spd(a, &x.tr_mul(&y)).ok_or_else(singular)?
    } else {
        let mut a = &x * x.transpose();
        for d in 0..g {
            a[(d, d)] += ridge;
        }
        x.tr_mul(&solve_spd(a, &y).ok_or_else(singular)?)
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(singular());
    }
    SparseFourierModel::new(basis, columns.into_iter().zip(beta.iter().copied()))
}
