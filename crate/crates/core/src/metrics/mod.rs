//! The two training-free architecture scores, each averaged over repeated
//! random initializations:
//!
//! * [`kappa`] — condition number of the finite-width neural tangent kernel
//!   `Θ = J Jᵀ` built from per-sample parameter Jacobians at initialization;
//! * [`count_regions`] — number of distinct ReLU activation patterns over a
//!   fixed set of sampled inputs.

mod ntk;
mod regions;
mod schedule;

pub use crate::linalg::symmetric_eigenvalues;
pub use crate::nn::JacobianMode;
pub(crate) use ntk::kappa_repr;
pub use ntk::{
    compute_ntk, kappa, kappa_delta, kappa_from_eigenvalues, kappa_to_json, kappa_with_inputs,
    mean_kappa, NtkEval, NtkReport,
};
pub use regions::{
    count_distinct_signatures, count_regions, count_regions_with_inputs, DistinctCounter,
    RegionReport,
};
pub use schedule::{
    init_for_repeat, read_tensor_file, score, score_with_inputs, write_tensor_file, MetricConfig,
    SeedSchedule,
};
