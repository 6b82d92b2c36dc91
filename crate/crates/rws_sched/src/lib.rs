//! Randomized work stealing on a simulated p-processor machine.

mod analysis;
mod config;
mod metrics;
mod observer;
mod sched;

pub use analysis::*;
pub use config::SimConfig;
pub use memsys::{Cause, Class};
pub use metrics::*;
pub use observer::*;
pub use sched::{longest_weighted_path, run, run_observed, RunResult};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty dag")]
    EmptyDag,
    #[error("memory fault: {0}")]
    Mem(#[from] memsys::MemError),
    #[error("node {0} references an unknown or dead variable")]
    BadRef(sp_dag::NodeId),
    #[error("no runnable work at time {0} before the sink completed")]
    Deadlock(u64),
    #[error("simulator fault: {0}")]
    Fault(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
