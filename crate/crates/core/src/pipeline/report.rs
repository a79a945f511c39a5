//! Per-bin mean |SHAP| tables comparing Fourier SHAP with Kernel SHAP.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{format_f64, ProductMeasure};
use crate::predictor::Predictor;
use crate::shap::{fourier_shap, kernel_shap, KernelShapConfig};
use crate::spectral::SparseFourierModel;

/// Tolerance on `base + Σ φ = h(x)` for the Fourier attributions.
pub const ADDITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinRow {
    pub bin: String,
    pub feature: String,
    pub fourier: f64,
    pub kernel: f64,
    pub rank_f: usize,
    pub rank_k: usize,
    pub delta: f64,
    pub instances: usize,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinReport {
    pub rows: Vec<BinRow>,
    /// Largest `|base + Σ φ − h(x)|` over all Fourier attributions.
    pub max_additivity_gap: f64,
}

impl BinReport {
    /// Rows of one bin in feature order.
    pub fn bin(&self, label: &str) -> Vec<&BinRow> {
        self.rows.iter().filter(|r| r.bin == label).collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "Bin",
            "Feature",
            "FourierSHAP",
            "KernelSHAP",
            "RankF",
            "RankK",
            "Delta",
            "Instances",
            "Empty",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.bin.clone(),
                r.feature.clone(),
                format_f64(r.fourier),
                format_f64(r.kernel),
                r.rank_f.to_string(),
                r.rank_k.to_string(),
                format_f64(r.delta),
                r.instances.to_string(),
                r.empty.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 1-based ranks by descending value; ties keep feature order.
pub fn descending_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

pub struct BinSplit<'a> {
    /// Bin index of each instance.
    pub bins: &'a [usize],
    pub labels: &'a [String],
}

/// Mean `|φ_i|` per bin and feature under both methods.
///
/// Fourier SHAP explains `model`; Kernel SHAP explains `baseline` under
/// `measure`, with the seed of instance `r` set to `kernel.seed + r`.
/// Bins without instances are emitted with zero means and `empty = true`.
#[allow(clippy::too_many_arguments)]
pub fn per_bin_report(
    instances: &[Vec<usize>],
    split: &BinSplit<'_>,
    feature_names: &[String],
    model: &SparseFourierModel,
    baseline: &dyn Predictor,
    measure: &ProductMeasure,
    kernel: &KernelShapConfig,
) -> Result<BinReport> {
    let n = model.feature_space().n();
    if feature_names.len() != n {
        return Err(Error::Dimension(format!("{} feature names for {n} features", feature_names.len())));
    }
    if split.bins.len() != instances.len() {
        return Err(Error::Dimension("one bin index per instance is required".into()));
    }
    if let Some(&b) = split.bins.iter().find(|&&b| b >= split.labels.len()) {
        return Err(Error::Data(format!("bin index {b} has no label")));
    }
    let results: Vec<(Vec<f64>, Vec<f64>, f64)> = instances
        .par_iter()
        .enumerate()
        .map(|(r, x)| {
            let f = fourier_shap(model, x)?;
            let gap = (f.base_value + f.phi.iter().sum::<f64>() - model.evaluate(x)?).abs();
            let config = KernelShapConfig {
                seed: kernel.seed.wrapping_add(r as u64),
                ..*kernel
            };
            let k = kernel_shap(baseline, x, measure, &config)?;
            Ok((f.phi, k.phi, gap))
        })
        .collect::<Result<_>>()?;

    let bins = split.labels.len();
    let mut sum_f = vec![vec![0.0; n]; bins];
    let mut sum_k = vec![vec![0.0; n]; bins];
    let mut counts = vec![0usize; bins];
    let mut max_gap = 0.0f64;
    for ((phi_f, phi_k, gap), &b) in results.iter().zip(split.bins) {
        counts[b] += 1;
        max_gap = max_gap.max(*gap);
        for i in 0..n {
            sum_f[b][i] += phi_f[i].abs();
            sum_k[b][i] += phi_k[i].abs();
        }
    }
    let mut rows = Vec::with_capacity(bins * n);
    for b in 0..bins {
        let c = counts[b].max(1) as f64;
        let mean_f: Vec<f64> = sum_f[b].iter().map(|s| s / c).collect();
        let mean_k: Vec<f64> = sum_k[b].iter().map(|s| s / c).collect();
        let (rank_f, rank_k) = (descending_ranks(&mean_f), descending_ranks(&mean_k));
        for i in 0..n {
            rows.push(BinRow {
                bin: split.labels[b].clone(),
                feature: feature_names[i].clone(),
                fourier: mean_f[i],
                kernel: mean_k[i],
                rank_f: rank_f[i],
                rank_k: rank_k[i],
                delta: mean_f[i] - mean_k[i],
                instances: counts[b],
                empty: counts[b] == 0,
            });
        }
    }
    Ok(BinReport {
        rows,
        max_additivity_gap: max_gap,
    })
}
