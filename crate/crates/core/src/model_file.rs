//! Sparse model files (JSON Lines).
//!
//! Line 1 is a header naming the space, the measure (with its hash) and the
//! basis convention; each following line is one entry `{"k":[...],"coef":...}`.
//! All reals are written with 17 significant digits so a write/read cycle is
//! bit-exact.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::measure::{format_f64, MultiIndex, ProductMeasure, TensorBasis, BASIS_CONVENTION};
use crate::spectral::SparseFourierModel;

pub const MODEL_FORMAT: &str = "fourier-shap/sparse-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    cardinalities: Vec<usize>,
    measures: Vec<Vec<f64>>,
    measure_hash: String,
    basis: String,
    entries: usize,
    interaction_order: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    k: Vec<usize>,
    coef: f64,
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

pub fn write_model(model: &SparseFourierModel, mut out: impl Write) -> Result<()> {
    let measure = model.basis().measure();
    let measures = join(measure.marginals(), |p| format!("[{}]", join(p, |q| format_f64(*q))));
    writeln!(
        out,
        "{{\"format\":\"{MODEL_FORMAT}\",\"version\":{MODEL_VERSION},\"cardinalities\":[{}],\"measures\":[{measures}],\"measure_hash\":\"{}\",\"basis\":\"{BASIS_CONVENTION}\",\"entries\":{},\"interaction_order\":{}}}",
        join(measure.space().cardinalities(), |m| m.to_string()),
        measure.hash(),
        model.len(),
        model.interaction_order(),
    )?;
    for (k, c) in model.entries() {
        writeln!(
            out,
            "{{\"k\":[{}],\"coef\":{}}}",
            join(k.as_slice(), |v| v.to_string()),
            format_f64(c)
        )?;
    }
    Ok(())
}

pub fn read_model(input: impl Read) -> Result<SparseFourierModel> {
    let mut lines = BufReader::new(input).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Data("model file is empty".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format != MODEL_FORMAT || header.version != MODEL_VERSION {
        return Err(Error::Data(format!(
            "unsupported model format {} v{}",
            header.format, header.version
        )));
    }
    if header.basis != BASIS_CONVENTION {
        return Err(Error::Data(format!(
            "model uses basis convention `{}`, this build uses `{BASIS_CONVENTION}`",
            header.basis
        )));
    }
    let measure = ProductMeasure::from_spec(&crate::measure::MeasureSpec {
        cardinalities: header.cardinalities,
        measures: header.measures,
    })?;
    if measure.hash() != header.measure_hash {
        return Err(Error::Data("measure hash does not match the stored measure".into()));
    }
    let basis = Arc::new(TensorBasis::new(measure)?);
    let mut entries = Vec::with_capacity(header.entries);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("model line {}: {e}", lineno + 2)))?;
        entries.push((MultiIndex(rec.k), rec.coef));
    }
    if entries.len() != header.entries {
        return Err(Error::Data(format!(
            "header announces {} entries, file has {}",
            header.entries,
            entries.len()
        )));
    }
    let model = SparseFourierModel::new(basis, entries)?;
    if model.interaction_order() != header.interaction_order {
        return Err(Error::Data(format!(
            "header announces interaction order {}, entries have {}",
            header.interaction_order,
            model.interaction_order()
        )));
    }
    Ok(model)
}

pub fn save_model(model: &SparseFourierModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SparseFourierModel> {
    read_model(std::fs::File::open(path)?)
}
