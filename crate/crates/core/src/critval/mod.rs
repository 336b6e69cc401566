//! Critical values: the one-sided VtF curve, conditional Wald quantiles and
//! externally supplied two-sided tables.

mod curve;
mod cw;
mod store;
mod vtfo;

pub use curve::{
    evaluate_critical_value, load_two_sided_table, read_curves, write_curves, CriticalValueCurve,
    TwoSidedTable,
};
pub use cw::{cw_critical_value, cw_tail_probability};
pub use store::{
    default_rho_grid, grid_rho, rho_monotonicity_violations, CriticalValues, CurveCache,
    MonotonicityViolation, VtfoCurves,
};
pub use vtfo::{
    build_vtfo_curve, build_vtfo_curve_traced, closed_form_c, crossing_count,
    extend_three_crossing, find_tangency, fixed_point, t2_w_curve, ContinuationState,
    ContinuationStep, CurveBuildConfig, RHO_MAX,
};
