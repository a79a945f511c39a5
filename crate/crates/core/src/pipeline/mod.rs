//! Tabular pipeline: binning, logits, atom selection, fitting, reports and benchmarks.

pub mod bench;
pub mod binning;
pub mod fit;
pub mod mlp;
pub mod report;
pub mod selection;

pub use bench::{benchmark, write_bench_csv, BenchConfig, BenchRow, CountingAllocator};
pub use binning::{bin_rows, BinnedDataset, BinningScheme, ColumnKind, ColumnSpec, RowRejected};
pub use fit::{fit_coefficients, DEFAULT_RIDGE};
pub use mlp::{logit, mlp_logit, sigmoid, InputEncoding, Layer, LayerActivation, MlpPredictor, MlpWeights, LOGIT_EPS};
pub use report::{per_bin_report, BinReport, BinRow, BinSplit};
pub use selection::{select_atoms, AtomSelection, ScoredAtom, SelectionConfig};
