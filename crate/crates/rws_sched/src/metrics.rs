use std::io::Write;

use memsys::{Addr, ExecStack};
use serde::Serialize;
use sp_dag::NodeId;

use crate::SimError;

/// Counters of one run. Times are in simulator time units; `d_b` is in
/// cache-miss units (time divided by b).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRecord {
    /// Nodes executed.
    pub w: u64,
    /// Operations executed (accesses plus computations).
    pub ops: u64,
    /// Cache misses (cold and capacity).
    pub q: u64,
    pub cold_misses: u64,
    /// Successful steals.
    pub s: u64,
    pub failed_steals: u64,
    pub block_misses: u64,
    /// Time spent on block misses and contention stalls.
    pub block_wait: u64,
    pub stall_cycles: u64,
    pub cap_hits: u64,
    /// Largest block-miss cost on one root-to-sink path, in cache-miss units.
    pub d_b: f64,
    /// Largest per-node miss cost, in cache-miss units.
    pub e_observed: u64,
    pub makespan: u64,
    pub steal_time: u64,
    pub usurpations: u64,
    pub phases: u64,
}

impl MetricsRecord {
    pub fn csv_header() -> Vec<&'static str> {
        vec![
            "W_nodes",
            "ops",
            "Q_misses",
            "cold_misses",
            "S_steals",
            "failed_steals",
            "block_misses",
            "block_wait_time",
            "stall_cycles_time",
            "cap_hits",
            "D_b_miss_units",
            "E_observed_miss_units",
            "makespan_time",
            "steal_time",
            "usurpations",
            "phases",
        ]
    }

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.w.to_string(),
            self.ops.to_string(),
            self.q.to_string(),
            self.cold_misses.to_string(),
            self.s.to_string(),
            self.failed_steals.to_string(),
            self.block_misses.to_string(),
            self.block_wait.to_string(),
            self.stall_cycles.to_string(),
            self.cap_hits.to_string(),
            format!("{:.4}", self.d_b),
            self.e_observed.to_string(),
            self.makespan.to_string(),
            self.steal_time.to_string(),
            self.usurpations.to_string(),
            self.phases.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Steal,
    StealFail,
    Fork,
    Join,
    Usurp,
    Hit,
    CacheMiss,
    BlockMiss,
    Stall,
    Phase,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub t: u64,
    pub proc: usize,
    pub kind: EventKind,
    pub node: NodeId,
    pub detail: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), SimError> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e).map_err(|e| SimError::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A stolen (or the root) task.
#[derive(Debug, Clone)]
pub struct TaskRecord {
    pub id: u32,
    pub root: NodeId,
    pub parent: u32,
    /// Join at which the task's result meets its parent's kernel.
    pub join: NodeId,
    pub thief: usize,
    /// Processor currently continuing the task's kernel.
    pub owner: usize,
    pub start: u64,
    pub end: u64,
    /// Forks of this task's kernel whose right child was stolen, in steal order.
    pub stolen_forks: Vec<NodeId>,
    pub stack: ExecStack,
    pub cache_misses: u64,
}

impl TaskRecord {
    pub fn stack_blocks(&self, block: u32) -> impl Iterator<Item = u64> + '_ {
        let bw = block as u64;
        self.stack.chunks().flat_map(move |(base, words)| (base / bw)..((base + words) / bw))
    }
    pub fn contains_addr(&self, a: Addr) -> bool {
        self.stack.chunks().any(|(b, w)| a >= b && a < b + w)
    }
}

/// An access to a stack block made by a task other than the stack's owner.
#[derive(Debug, Clone, Copy)]
pub struct ForeignAccess {
    pub t: u64,
    pub block: u64,
    pub task: u32,
    pub owner_task: u32,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SchedChecks {
    pub deque_height_violations: u64,
    pub observation1_violations: u64,
    pub stack_owner_mismatches: u64,
}
