use std::collections::HashMap;

use memsys::Cause;
use serde::Serialize;
use sp_dag::{SPDag, NONE};

use crate::config::SimConfig;
use crate::sched::RunResult;

/// Transfers of one block of a task's execution stack during the task's
/// lifetime.
#[derive(Debug, Clone, Serialize)]
pub struct TaskBlockDelay {
    pub task: u32,
    pub block: u64,
    /// Fetches during the task's interval, not counting cold or capacity
    /// fetches made by the task's own kernel nodes.
    pub moves: u64,
    /// Accesses to the block by other tasks during the interval.
    pub foreign_accesses: u64,
    /// Height in edges of the task's subgraph.
    pub task_height: u32,
}

pub fn task_height(dag: &SPDag, res: &RunResult, task: u32) -> u32 {
    let tk = &res.tasks[task as usize];
    if tk.join == NONE {
        dag.ht(tk.root)
    } else {
        dag.ht(tk.root).saturating_sub(dag.ht(tk.join) + 1)
    }
}

pub fn stack_block_delays(dag: &SPDag, cfg: &SimConfig, res: &RunResult) -> Vec<TaskBlockDelay> {
    let mut owner: HashMap<u64, u32> = HashMap::new();
    for tk in &res.tasks {
        for b in tk.stack_blocks(cfg.block) {
            owner.insert(b, tk.id);
        }
    }
    let mut acc: HashMap<(u32, u64), (u64, u64)> = HashMap::new();
    let within = |task: u32, t: u64| {
        let tk = &res.tasks[task as usize];
        t >= tk.start && t <= tk.end
    };
    for m in &res.moves {
        let Some(&tau) = owner.get(&m.block) else { continue };
        if !within(tau, m.t) {
            continue;
        }
        if m.task == tau && m.cause != Cause::Invalidate {
            continue;
        }
        acc.entry((tau, m.block)).or_default().0 += 1;
    }
    for f in &res.foreign {
        let Some(&tau) = owner.get(&f.block) else { continue };
        if f.task != tau && within(tau, f.t) {
            acc.entry((tau, f.block)).or_default().1 += 1;
        }
    }
    let mut out: Vec<_> = acc
        .into_iter()
        .map(|((task, block), (moves, x))| TaskBlockDelay {
            task,
            block,
            moves,
            foreign_accesses: x,
            task_height: task_height(dag, res, task),
        })
        .collect();
    out.sort_unstable_by_key(|d| (d.task, d.block));
    out
}

/// Upper bound on total steal time implied by the cost model.
pub fn steal_time_bound(cfg: &SimConfig, res: &RunResult) -> u64 {
    res.metrics.s * cfg.a2 * cfg.s + res.metrics.failed_steals * cfg.s_fail
}
