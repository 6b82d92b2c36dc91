//! Experiment plans, metrics tables, scaling fits and the acceptance
//! suite.

pub mod accept;
pub mod constants;
pub mod fit;
pub mod plan;
pub mod predict;
pub mod run;

pub use accept::{run_suite, CriterionReport, SuiteOptions};
pub use fit::{fit_bound, FitPoint, FitResult};
pub use plan::{Cell, ExperimentPlan, PlanMode, OUT_ENV};
pub use predict::{Obs, Predictor};
pub use run::{run_and_write, run_plan, Row, Table};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Kernel(#[from] kernels::KernelError),
    #[error(transparent)]
    Sim(#[from] rws_sched::SimError),
    #[error("fit: {0}")]
    Fit(String),
    #[error("csv: {0}")]
    Csv(String),
}
