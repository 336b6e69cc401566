//! Inference for a single endogenous regressor with many weak instruments,
//! built around the JIVE t-statistic.
//!
//! The estimation side (`projection`, `estimators`, `inference`) is generic
//! over `f32`/`f64`. Critical-value construction and the power simulator work
//! in `f64` only.

pub mod critval;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod judge_dgp;
pub mod normal;
pub mod power_lab;
pub mod projection;
pub mod roots;
pub mod scalar;

pub use critval::{
    build_vtfo_curve, cw_critical_value, evaluate_critical_value, load_two_sided_table,
    CriticalValueCurve, CriticalValues, CurveBuildConfig, CurveCache, TwoSidedTable, VtfoCurves,
};
pub use data::{Dataset, DenseMatrix, Instruments};
pub use error::{Error, Result};
pub use estimators::{
    jive_point_estimate, jive_t_squared, jive_variance, normalized_stats, variance_estimates_at,
    JiveProblem, NormalizedStats, VarianceEstimates,
};
pub use inference::{
    detect_unbounded, invert_confidence_set, run_test, ConfidenceSet, Grid, Method, TestDecision,
    UnboundedDiagnosis,
};
pub use judge_dgp::{population_variances, simulate_judge_data, JudgeDesignSpec};
pub use power_lab::{
    alternative_variances, analytic_power_bounds, draw_q_tr, rejection_rates, AsymptoticDgp,
    PowerCurveResult,
};
pub use projection::{
    build_projection, cross_moment_b, quadratic_form_q, ProjectionContext, Representation,
};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Projection64 = ProjectionContext<f64>;
pub type Projection32 = ProjectionContext<f32>;
pub type Stats64 = NormalizedStats<f64>;
