use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::format_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Fourier,
    Kernel,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Brute => "brute",
            Method::Fourier => "fourier",
            Method::Kernel => "kernel",
        })
    }
}

/// SHAP values of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub instance: Vec<usize>,
    pub phi: Vec<f64>,
    /// `E_μ[h]`.
    pub base_value: f64,
    /// `h(x*)` as seen by the method.
    pub prediction: f64,
    pub method: Method,
}

impl Attribution {
    /// `|base + Σ φ_i − h(x*)|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }

    pub fn max_abs_diff(&self, other: &Attribution) -> f64 {
        self.phi
            .iter()
            .zip(&other.phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Writes the long-format attribution report
/// (`instance_id,feature,phi,base_value,method,bound`).
///
/// `bounds[r][i]`, when given, fills the `bound` column for instance `r`, feature `i`.
pub fn write_attributions_csv(
    attributions: &[Attribution],
    feature_names: Option<&[String]>,
    bounds: Option<&[Vec<f64>]>,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance_id", "feature", "phi", "base_value", "method", "bound"])?;
    for (r, a) in attributions.iter().enumerate() {
        for (i, phi) in a.phi.iter().enumerate() {
            let feature = feature_names
                .and_then(|names| names.get(i).cloned())
                .unwrap_or_else(|| i.to_string());
            let bound = bounds
                .and_then(|b| b.get(r))
                .and_then(|row| row.get(i))
                .map(|v| format_f64(*v))
                .unwrap_or_default();
            w.write_record([
                r.to_string(),
                feature,
                format_f64(*phi),
                format_f64(a.base_value),
                a.method.to_string(),
                bound,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
