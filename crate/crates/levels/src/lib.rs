//! Level functions, node heights and potential tracked online during a
//! work-stealing run, with edge-monotonicity checks.

pub mod bounds;
mod fenwick;
mod observer;
mod structure;

use kernels::KernelSpec;
use rws_sched::{RunResult, SimConfig, SimError};
use sp_dag::SPDag;

pub use bounds::{h_root_bound, s_star, y_bound, HRootBound};
pub use fenwick::Fenwick;
pub use observer::*;
pub use structure::{Group, InitBounds, Structure, L3_RATIO_BOUND};

pub struct LevelRun {
    pub res: RunResult,
    pub report: LevelReport,
    /// Stall allowance per node used by coarse heights.
    pub cost_e: u64,
}

/// Static tables for `dag` at block size `block`.
pub fn structure(dag: &SPDag, spec: &KernelSpec, block: u32, lcfg: &LevelConfig) -> Structure {
    Structure::new(dag, spec, block, lcfg.fault == Fault::NoDelta)
}

/// Runs `dag` under a level observer. Coarse mode first runs without an
/// observer to measure the stall allowance; the second run repeats the
/// same schedule.
pub fn run_levels(
    dag: &SPDag,
    st: &Structure,
    cfg: &SimConfig,
    inputs: &[Vec<u32>],
    lcfg: LevelConfig,
) -> Result<LevelRun, SimError> {
    let cost_e = match lcfg.mode {
        Mode::Coarse => rws_sched::run(dag, &SimConfig { log_moves: false, ..cfg.clone() }, inputs)?.metrics.e_observed,
        Mode::Refined => 0,
    };
    let mut obs = LevelObserver::new(dag, st, lcfg, cfg.p, cfg.b, cfg.s, cost_e);
    let res = rws_sched::run_observed(dag, cfg, inputs, &mut obs)?;
    if lcfg.mode == Mode::Refined {
        obs.full_check();
    }
    Ok(LevelRun { res, report: obs.report, cost_e })
}
