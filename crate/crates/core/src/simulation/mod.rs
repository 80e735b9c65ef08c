//! Known-truth data-generating processes, oracle truths, and the Monte Carlo
//! comparison of estimators.

mod dgp;
mod metrics;
mod study;
mod truth;

pub use dgp::{sample_dgp, scenario, DgpSpec, Poly, Scenario, Target, MAX_DEGREE, SCENARIO_NAMES};
pub use metrics::{compute_metrics, metrics_for, MetricsRow, MetricsTable};
pub use study::{run_study, EstimatorId, McResult, McRow, StudyConfig};
pub use truth::{best_truth, integrand, oracle_truth, TruthMethod, TruthReport, MC_ORACLE_DRAWS, QUADRATURE_INTERVALS};
