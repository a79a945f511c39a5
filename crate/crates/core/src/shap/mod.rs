//! SHAP attributions: exact coalition enumeration, the spectral closed form,
//! Kernel SHAP, and the spectral truncation bound.

mod attribution;
mod bounds;
mod coalition;
mod exact;
mod fourier;
mod kernel;

pub use attribution::{write_attributions_csv, Attribution, Method};
pub use bounds::{frequency_weight, frequency_weights, tail_weight_sq_sum, truncation_bound, FrequencyWeights};
pub use coalition::{all_coalition_values, coalition_value};
pub use exact::{brute_force_shap, shapley_weight, MAX_BRUTE_FORCE_FEATURES};
pub use fourier::fourier_shap;
pub use kernel::{kernel_shap, shapley_kernel_weight, KernelShapConfig};
