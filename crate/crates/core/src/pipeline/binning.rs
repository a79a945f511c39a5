//! CSV ingestion: raw columns to discrete states through a declared schema.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::FeatureSpace;

/// How a raw column maps to a state index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    /// Exact string match against `levels`; the position is the state.
    Categorical { levels: Vec<String> },
    /// Bins `[e_j, e_{j+1})` over increasing `edges`, the last one closed.
    Numeric { edges: Vec<f64> },
    /// Already-discrete integer states `0..cardinality`.
    Discrete { cardinality: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    /// Display name in reports.
    pub name: String,
    /// CSV header of the source column.
    pub column: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn cardinality(&self) -> usize {
        match &self.kind {
            ColumnKind::Categorical { levels } => levels.len(),
            ColumnKind::Numeric { edges } => edges.len().saturating_sub(1),
            ColumnKind::Discrete { cardinality } => *cardinality,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            ColumnKind::Categorical { levels } => {
                let mut sorted = levels.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != levels.len() {
                    return Err(Error::Schema(format!("column `{}` repeats a level", self.column)));
                }
            }
            ColumnKind::Numeric { edges } => {
                if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema(format!(
                        "column `{}` needs finite, strictly increasing edges",
                        self.column
                    )));
                }
            }
            ColumnKind::Discrete { .. } => {}
        }
        if self.cardinality() < 2 {
            return Err(Error::Schema(format!("column `{}` needs at least 2 states", self.column)));
        }
        Ok(())
    }

    /// State index of a raw value, or the reason it is rejected.
    pub fn bin(&self, raw: &str) -> std::result::Result<usize, String> {
        let raw = raw.trim();
        match &self.kind {
            ColumnKind::Categorical { levels } => levels
                .iter()
                .position(|l| l == raw)
                .ok_or_else(|| format!("unknown category `{raw}`")),
            ColumnKind::Numeric { edges } => {
                let v: f64 = raw.parse().map_err(|_| format!("not a number: `{raw}`"))?;
                if !v.is_finite() {
                    return Err(format!("not a finite number: `{raw}`"));
                }
                let last = edges.len() - 1;
                if v < edges[0] || v > edges[last] {
                    return Err(format!("{v} outside [{}, {}]", edges[0], edges[last]));
                }
                // number of interior edges ≤ v
                Ok(edges[1..last].partition_point(|&e| e <= v))
            }
            ColumnKind::Discrete { cardinality } => {
                let v: usize = raw.parse().map_err(|_| format!("not a state index: `{raw}`"))?;
                if v < *cardinality {
                    Ok(v)
                } else {
                    Err(format!("state {v} ≥ cardinality {cardinality}"))
                }
            }
        }
    }

    /// Human-readable label of state `s` (level name or interval).
    pub fn label(&self, s: usize) -> String {
        match &self.kind {
            ColumnKind::Categorical { levels } => levels[s].clone(),
            ColumnKind::Numeric { edges } => {
                let close = if s + 2 == edges.len() { "]" } else { ")" };
                format!("[{},{}{close}", edges[s], edges[s + 1])
            }
            ColumnKind::Discrete { .. } => s.to_string(),
        }
    }
}

/// Model features, an optional split column (e.g. age bins for per-bin
/// reports) and an optional column of predicted probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningScheme {
    pub features: Vec<ColumnSpec>,
    #[serde(default)]
    pub split: Option<ColumnSpec>,
    #[serde(default)]
    pub prediction: Option<String>,
}

fn levels(v: &[&str]) -> ColumnKind {
    ColumnKind::Categorical {
        levels: v.iter().map(|s| s.to_string()).collect(),
    }
}

fn col(name: &str, column: &str, kind: ColumnKind) -> ColumnSpec {
    ColumnSpec {
        name: name.into(),
        column: column.into(),
        kind,
    }
}

impl BinningScheme {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let scheme: BinningScheme =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("binning schema: {e}")))?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Schema("schema declares no features".into()));
        }
        for c in self.features.iter().chain(&self.split) {
            c.validate()?;
        }
        Ok(())
    }

    /// The clinical stroke scheme: nine model features plus age bins as the split.
    pub fn stroke() -> Self {
        let numeric = |edges: &[f64]| ColumnKind::Numeric { edges: edges.to_vec() };
        BinningScheme {
            features: vec![
                col("Gender", "gender", levels(&["Female", "Male"])),
                col("Hypertension", "hypertension", levels(&["0", "1"])),
                col("Heart disease", "heart_disease", levels(&["0", "1"])),
                col("Ever married", "ever_married", levels(&["No", "Yes"])),
                col(
                    "Work type",
                    "work_type",
                    levels(&["children", "Govt_job", "Never_worked", "Private", "Self-employed"]),
                ),
                col("Residence type", "Residence_type", levels(&["Rural", "Urban"])),
                col(
                    "Avg. Glucose level",
                    "avg_glucose_level",
                    numeric(&[55.0, 70.0, 100.0, 110.0, 126.0, 155.0, 200.0, 250.0, 272.0]),
                ),
                col(
                    "BMI",
                    "bmi",
                    numeric(&[11.0, 18.5, 25.0, 30.0, 35.0, 40.0, 50.0, 60.0, 97.6]),
                ),
                col(
                    "Smoking status",
                    "smoking_status",
                    levels(&["never smoked", "Unknown", "formerly smoked", "smokes"]),
                ),
            ],
            split: Some(col(
                "Age",
                "age",
                numeric(&[2.0, 16.0, 27.0, 37.0, 45.0, 53.0, 61.0, 72.0, 82.0]),
            )),
            prediction: None,
        }
    }

    pub fn feature_space(&self) -> Result<FeatureSpace> {
        FeatureSpace::new(self.features.iter().map(|c| c.cardinality()).collect())
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|c| c.name.clone()).collect()
    }

    /// The scheme that reads back a binned dataset written by [`BinnedDataset::write_csv`].
    pub fn discrete_like(&self) -> Self {
        let disc = |c: &ColumnSpec| ColumnSpec {
            name: c.name.clone(),
            column: c.column.clone(),
            kind: ColumnKind::Discrete {
                cardinality: c.cardinality(),
            },
        };
        BinningScheme {
            features: self.features.iter().map(disc).collect(),
            split: self.split.as_ref().map(disc),
            prediction: self.prediction.clone(),
        }
    }
}

/// A source row that could not be mapped, with the first failing column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowRejected {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset {
    pub space: FeatureSpace,
    pub feature_names: Vec<String>,
    pub states: Vec<Vec<usize>>,
    /// Split-column state per accepted row, when the scheme has one.
    pub split: Option<Vec<usize>>,
    pub split_labels: Vec<String>,
    /// Prediction column values per accepted row, when the scheme names one.
    pub predictions: Option<Vec<f64>>,
    /// Source row number of each accepted row.
    pub source_rows: Vec<usize>,
    pub rejected: Vec<RowRejected>,
}

impl BinnedDataset {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Writes accepted rows as state indices under the original column headers.
    pub fn write_csv(&self, scheme: &BinningScheme, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = scheme.features.iter().map(|c| c.column.clone()).collect();
        if let Some(s) = &scheme.split {
            header.push(s.column.clone());
        }
        if let Some(p) = &scheme.prediction {
            header.push(p.clone());
        }
        w.write_record(&header)?;
        for (r, x) in self.states.iter().enumerate() {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            if let Some(s) = &self.split {
                rec.push(s[r].to_string());
            }
            if let Some(p) = &self.predictions {
                rec.push(crate::measure::format_f64(p[r]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maps every CSV row through `scheme`. Missing declared columns are a
/// `SchemaError`; unmappable rows are collected in `rejected`.
pub fn bin_rows(input: impl Read, scheme: &BinningScheme) -> Result<BinnedDataset> {
    scheme.validate()?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let feature_cols: Vec<usize> = scheme.features.iter().map(|c| find(&c.column)).collect::<Result<_>>()?;
    let split_col = scheme.split.as_ref().map(|c| find(&c.column)).transpose()?;
    let pred_col = scheme.prediction.as_deref().map(find).transpose()?;

    let mut out = BinnedDataset {
        space: scheme.feature_space()?,
        feature_names: scheme.feature_names(),
        states: Vec::new(),
        split: split_col.map(|_| Vec::new()),
        split_labels: scheme
            .split
            .as_ref()
            .map(|c| (0..c.cardinality()).map(|s| c.label(s)).collect())
            .unwrap_or_default(),
        predictions: pred_col.map(|_| Vec::new()),
        source_rows: Vec::new(),
        rejected: Vec::new(),
    };
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let reject = |column: &str, reason: String| RowRejected {
            row,
            column: column.to_string(),
            reason,
        };
        let field = |j: usize| record.get(j).unwrap_or("");

        let mut state = Vec::with_capacity(feature_cols.len());
        let mut failure = None;
        for (spec, &j) in scheme.features.iter().zip(&feature_cols) {
            match spec.bin(field(j)) {
                Ok(s) => state.push(s),
                Err(e) => {
                    failure = Some(reject(&spec.column, e));
                    break;
                }
            }
        }
        let split = match (failure.is_none(), &scheme.split, split_col) {
            (true, Some(spec), Some(j)) => match spec.bin(field(j)) {
                Ok(s) => Some(s),
                Err(e) => {
                    failure = Some(reject(&spec.column, e));
                    None
                }
            },
            _ => None,
        };
        let pred = match (failure.is_none(), pred_col) {
            (true, Some(j)) => match field(j).parse::<f64>() {
                Ok(p) if p.is_finite() => Some(p),
                _ => {
                    failure = Some(reject(&headers[j], format!("not a number: `{}`", field(j))));
                    None
                }
            },
            _ => None,
        };
        if let Some(f) = failure {
            out.rejected.push(f);
            continue;
        }
        out.states.push(state);
        if let (Some(v), Some(s)) = (out.split.as_mut(), split) {
            v.push(s);
        }
        if let (Some(v), Some(p)) = (out.predictions.as_mut(), pred) {
            v.push(p);
        }
        out.source_rows.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stroke_examples() {
        let s = BinningScheme::stroke();
        let age = s.split.as_ref().unwrap();
        assert_eq!(age.bin("50"), Ok(4));
        assert_eq!(age.label(4), "[45,53)");
        assert_eq!(age.bin("15"), Ok(0));
        assert_eq!(age.bin("16"), Ok(1));
        assert_eq!(age.bin("82"), Ok(7));
        assert!(age.bin("1").is_err());
        assert!(age.bin("1.8").is_err());
        let glucose = &s.features[6];
        assert_eq!(glucose.bin("130"), Ok(4));
        assert_eq!(glucose.bin("125.99"), Ok(3));
        assert_eq!(glucose.bin("126"), Ok(4));
        assert_eq!(glucose.bin("271.74"), Ok(7));
        let bmi = &s.features[7];
        assert_eq!(bmi.bin("27"), Ok(2));
        assert_eq!(bmi.bin("29.99"), Ok(2));
        assert_eq!(bmi.bin("30"), Ok(3));
        assert_eq!(bmi.bin("97.6"), Ok(7));
        assert!(bmi.bin("N/A").is_err());
        assert_eq!(s.feature_space().unwrap().total_states(), 40960);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "gender,age\nMale,40\n";
        assert!(matches!(bin_rows(csv.as_bytes(), &BinningScheme::stroke()), Err(Error::Schema(_))));
    }

    #[test]
    fn rejections_and_round_trip() {
        let csv = "\
id,gender,age,hypertension,heart_disease,ever_married,work_type,Residence_type,avg_glucose_level,bmi,smoking_status,p
1,Male,67,0,1,Yes,Private,Urban,228.69,36.6,formerly smoked,0.3
2,Other,40,0,0,Yes,Private,Urban,100,25,smokes,0.1
3,Female,1.5,0,0,No,children,Rural,90,17,Unknown,0.01
4,Female,49,0,0,Yes,Private,Urban,171.23,N/A,smokes,0.2
5,Female,79,1,0,Yes,Self-employed,Rural,174.12,24,never smoked,0.6
";
        let mut scheme = BinningScheme::stroke();
        scheme.prediction = Some("p".into());
        let d = bin_rows(csv.as_bytes(), &scheme).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.source_rows, vec![1, 5]);
        assert_eq!(d.states[0], vec![1, 0, 1, 1, 3, 1, 6, 4, 2]);
        assert_eq!(d.split, Some(vec![6, 7]));
        let rejected: Vec<&str> = d.rejected.iter().map(|r| r.column.as_str()).collect();
        assert_eq!(rejected, vec!["gender", "age", "bmi"]);

        let mut buf = Vec::new();
        d.write_csv(&scheme, &mut buf).unwrap();
        let again = bin_rows(buf.as_slice(), &scheme.discrete_like()).unwrap();
        assert_eq!(again.states, d.states);
        assert_eq!(again.split, d.split);
        assert_eq!(again.predictions, d.predictions);
    }

    #[test]
    fn invalid_schemas() {
        let bad = r#"{"features":[{"name":"a","column":"a","kind":{"numeric":{"edges":[1,1,2]}}}]}"#;
        let s: BinningScheme = serde_json::from_str(bad).unwrap();
        assert!(s.validate().is_err());
        let unknown = r#"{"features":[],"extra":true}"#;
        assert!(serde_json::from_str::<BinningScheme>(unknown).is_err());
    }
}
