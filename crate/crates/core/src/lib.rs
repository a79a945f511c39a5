//! Fourier-domain SHAP for models on finite product spaces.
//!
//! Predictors over `Π_i {0, …, m_i − 1}` are expanded in an orthonormal
//! tensor basis of `L²(μ)` for a product measure `μ`; Shapley values then come
//! straight from the coefficients. Exact and Kernel SHAP baselines, truncation
//! bounds, Gaussian-process tail bounds and a tabular pipeline are included.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gp;
pub mod measure;
pub mod model_file;
pub mod pipeline;
pub mod predictor;
pub mod selector;
pub mod shap;
pub mod spectral;

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, ErrorClass, Result};
pub use measure::{
    format_f64, inner_product, CoordinateBasis, FeatureSpace, MeasureSpec, MultiIndex,
    ProductMeasure, TensorBasis, BASIS_CONVENTION,
};
pub use gp::{
    expected_shap_bound, gaussian_w2, high_probability_bound, kl_sample, KernelOperator, KernelSpec,
};
pub use model_file::{load_model, read_model, save_model, write_model};
pub use pipeline::{
    benchmark, bin_rows, fit_coefficients, logit, mlp_logit, per_bin_report, select_atoms,
    AtomSelection, BinningScheme, MlpWeights,
};
pub use predictor::{DensePredictor, Predictor, DEFAULT_DENSE_LIMIT};
pub use selector::{Clause, ResolvedSelector, Selector};
pub use shap::{
    brute_force_shap, fourier_shap, kernel_shap, truncation_bound, Attribution,
    KernelShapConfig, Method,
};
pub use spectral::{forward_transform, forward_transform_with_limit, SparseFourierModel};
