//! Model spaces, correlation systems and the estimators that solve them.

pub mod metrics;
pub mod model;
pub mod solve;
pub mod system;

pub use metrics::{derivative_variance_ratio, error_metrics, linear_fit, log_log_slope, ErrorMetrics, LinearFit, ScaleMode, VarianceRatio};
pub use model::{GammaConstraint, LindbladRegion, ModelSpace};
pub use solve::{
    least_squares_estimator, psd_constrained_estimator, svd_null_estimator, svd_null_estimator_with, EstimationReport,
    PsdOptions, SolverKind,
};
pub use system::{assemble_dynamical, assemble_steady, inject_noise, measurement_complexity, CorrelationSystem, FdOrder};
