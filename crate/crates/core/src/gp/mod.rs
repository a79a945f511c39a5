//! Gaussian-process priors on the finite space and the SHAP error bounds they imply.

pub mod bounds;
pub mod finite_width;
pub mod nngp;
pub mod operator;
pub mod sample;
pub mod wasserstein;

pub use bounds::{
    expected_shap_bound, finite_width_bound, gap_weights, high_probability_bound, monte_carlo_gaps,
    shap_weights_sq_sum, write_bound_report, BoundRow, TailStatistics,
};
pub use finite_width::{finite_width_epsilon, RandomFeatureNetwork};
pub use nngp::{
    erf_expectation, feature_matrix, gaussian_expectation_mc, nngp_kernel, relu_expectation, Activation,
    Encoding, NngpRecipe, Nonlinearity,
};
pub use operator::{expected_residual_trace, KernelOperator, KernelSource, KernelSpec, NngpSource, SpectrumEntry};
pub use sample::{kl_sample, residual_energy, GaussianSampler, GpSample, KlSampler};
pub use wasserstein::{gaussian_w2, gaussian_w2_weighted, psd_sqrt};
