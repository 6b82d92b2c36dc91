use std::collections::VecDeque;

use memsys::{AccessReq, Class, ExecStack, MemCounters, MemSystem, Move, RegionKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sp_dag::{NodeId, NodeKind, Region, SPDag, NONE};

use crate::config::SimConfig;
use crate::metrics::*;
use crate::observer::{NoObserver, Observer, OpDone, Phase, PhaseClock};
use crate::SimError;

const NO_ADDR: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Act {
    Idle,
    Exec,
    Steal(Option<NodeId>),
}

struct Proc {
    ready: u64,
    act: Act,
    node: NodeId,
    op: u32,
    acc: u32,
    stalled: bool,
    task: u32,
    deque: VecDeque<(NodeId, u32)>,
}

pub struct RunResult {
    pub metrics: MetricsRecord,
    pub trace: Trace,
    pub tasks: Vec<TaskRecord>,
    /// Final contents of every global array.
    pub outputs: Vec<Vec<u32>>,
    pub moves: Vec<Move>,
    pub foreign: Vec<ForeignAccess>,
    pub phases: Vec<Phase>,
    pub checks: SchedChecks,
    pub mem: MemCounters,
    /// Task that executed each node.
    pub node_task: Vec<u32>,
    /// Block-miss and stall time charged to each node.
    pub node_block_cost: Vec<u32>,
}

/// Runs `dag` with no observer.
pub fn run(dag: &SPDag, cfg: &SimConfig, inputs: &[Vec<u32>]) -> Result<RunResult, SimError> {
    run_observed(dag, cfg, inputs, &mut NoObserver)
}

/// Runs `dag`, reporting events to `obs`. `inputs[i]` initialises global
/// array `i`; missing or short inputs leave zeros.
pub fn run_observed<O: Observer>(
    dag: &SPDag,
    cfg: &SimConfig,
    inputs: &[Vec<u32>],
    obs: &mut O,
) -> Result<RunResult, SimError> {
    cfg.validate()?;
    if dag.is_empty() {
        return Err(SimError::EmptyDag);
    }
    let mut sim = Sim::new(dag, cfg, inputs)?;
    let mut clock = obs.phase_len().map(|l| PhaseClock::new(cfg.p, l));
    sim.main(obs, clock.as_mut())?;
    if let Some(c) = clock.as_mut() {
        c.finish(sim.metrics.makespan);
    }
    Ok(sim.finish(clock.map(|c| c.phases).unwrap_or_default()))
}

struct Sim<'a> {
    dag: &'a SPDag,
    cfg: &'a SimConfig,
    mem: MemSystem,
    rng: ChaCha8Rng,
    procs: Vec<Proc>,
    tasks: Vec<TaskRecord>,
    array_base: Vec<u64>,
    seg_addr: Vec<u64>,
    seg_task: Vec<u32>,
    fork_task: Vec<u32>,
    arrivals: Vec<u8>,
    node_start: Vec<u64>,
    node_task: Vec<u32>,
    node_bm: Vec<u32>,
    foreign: Vec<ForeignAccess>,
    trace: Trace,
    checks: SchedChecks,
    metrics: MetricsRecord,
    attempts: u64,
    done: bool,
    losers: Vec<bool>,
}

impl<'a> Sim<'a> {
    fn new(dag: &'a SPDag, cfg: &'a SimConfig, inputs: &[Vec<u32>]) -> Result<Self, SimError> {
        let n = dag.len();
        let mut mem = MemSystem::new(cfg.mem());
        let mut array_base = Vec::with_capacity(dag.arrays.len());
        for (i, a) in dag.arrays.iter().enumerate() {
            let base = mem.allocate(RegionKind::Global, a.words.max(1) as u64)?;
            if let Some(v) = inputs.get(i) {
                for (k, &x) in v.iter().take(a.words as usize).enumerate() {
                    mem.poke(base + k as u64, x);
                }
            }
            array_base.push(base);
        }
        let procs = (0..cfg.p)
            .map(|_| Proc {
                ready: 0,
                act: Act::Idle,
                node: NONE,
                op: 0,
                acc: 0,
                stalled: false,
                task: 0,
                deque: VecDeque::new(),
            })
            .collect();
        let root_task = TaskRecord {
            id: 0,
            root: dag.root,
            parent: NONE,
            join: NONE,
            thief: 0,
            owner: 0,
            start: 0,
            end: 0,
            stolen_forks: Vec::new(),
            stack: ExecStack::new(RegionKind::Stack(0), cfg.stack_chunk),
            cache_misses: 0,
        };
        Ok(Sim {
            dag,
            cfg,
            mem,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            procs,
            tasks: vec![root_task],
            array_base,
            seg_addr: vec![NO_ADDR; n],
            seg_task: vec![NONE; n],
            fork_task: vec![NONE; n],
            arrivals: vec![0; n],
            node_start: vec![0; n],
            node_task: vec![NONE; n],
            node_bm: vec![0; n],
            foreign: Vec::new(),
            trace: Trace::default(),
            checks: SchedChecks::default(),
            metrics: MetricsRecord::default(),
            attempts: 0,
            done: false,
            losers: vec![false; cfg.p],
        })
    }

    fn event(&mut self, t: u64, proc: usize, kind: EventKind, node: NodeId, detail: u64) {
        if self.cfg.trace {
            self.trace.events.push(TraceEvent { t, proc, kind, node, detail });
        }
    }

    fn main<O: Observer>(&mut self, obs: &mut O, mut clock: Option<&mut PhaseClock>) -> Result<(), SimError> {
        for (i, a) in self.dag.arrays.iter().enumerate() {
            obs.global_array(i as u32, self.array_base[i], a.words as u64);
        }
        let root = self.dag.root;
        self.start_node(0, root, 0, obs)?;
        for q in 1..self.cfg.p {
            self.procs[q].act = Act::Idle;
        }
        loop {
            let t = self.procs.iter().map(|p| p.ready).min().unwrap();
            if let Some(c) = clock.as_deref_mut() {
                c.before_events(t, self.attempts, obs);
            }
            self.step(t, obs)?;
            if self.done {
                break;
            }
            if let Some(c) = clock.as_deref_mut() {
                c.after_events(t, self.attempts, obs);
            }
            if !self.procs.iter().any(|p| matches!(p.act, Act::Exec | Act::Steal(Some(_))))
                && self.procs.iter().all(|p| p.deque.is_empty())
            {
                return Err(SimError::Deadlock(t));
            }
        }
        Ok(())
    }

    fn step<O: Observer>(&mut self, t: u64, obs: &mut O) -> Result<(), SimError> {
        let p = self.cfg.p;
        for q in 0..p {
            if self.procs[q].ready == t {
                self.transition(q, t, obs)?;
                if self.done {
                    return Ok(());
                }
            }
        }
        // Same-cycle accesses to one block, at least one a write, contend.
        let mut reqs: Vec<(u64, usize, bool)> = Vec::new();
        for q in 0..p {
            let pr = &self.procs[q];
            if pr.ready == t && pr.act == Act::Exec && (pr.op as usize) < self.dag.node(pr.node).script_len() {
                let r = self.dag.script(pr.node)[pr.op as usize];
                let addr = self.resolve(q, &r)?;
                reqs.push((self.mem.block_of(addr), q, r.is_write()));
            }
        }
        if reqs.len() >= 2 {
            reqs.sort_unstable();
            let mut i = 0;
            while i < reqs.len() {
                let mut j = i + 1;
                while j < reqs.len() && reqs[j].0 == reqs[i].0 {
                    j += 1;
                }
                if j - i >= 2 && reqs[i..j].iter().any(|x| x.2) {
                    let procs: Vec<usize> = reqs[i..j].iter().map(|x| x.1).collect();
                    let w = self.mem.arbitrate(reqs[i].0, &procs);
                    for &q in &procs {
                        if q != w {
                            self.losers[q] = true;
                        }
                    }
                }
                i = j;
            }
        }
        for q in 0..p {
            if self.procs[q].ready != t || self.procs[q].act != Act::Exec {
                continue;
            }
            if self.losers[q] {
                self.losers[q] = false;
                let pr = &mut self.procs[q];
                pr.stalled = true;
                pr.ready = t + 1;
                let u = pr.node;
                self.node_bm[u as usize] += 1;
                self.metrics.block_wait += 1;
                self.event(t, q, EventKind::Stall, u, 0);
                continue;
            }
            self.issue(q, t, obs)?;
        }
        Ok(())
    }

    fn transition<O: Observer>(&mut self, q: usize, t: u64, obs: &mut O) -> Result<(), SimError> {
        loop {
            match self.procs[q].act {
                Act::Exec => {
                    let u = self.procs[q].node;
                    if self.procs[q].op < self.dag.node(u).ops() {
                        return Ok(());
                    }
                    self.complete(q, t, obs)?;
                    if self.done {
                        return Ok(());
                    }
                }
                Act::Steal(item) => {
                    self.attempts += 1;
                    obs.steal_end(t, q, item);
                    match item {
                        Some(u) => self.begin_stolen(q, u, t, obs)?,
                        None => self.procs[q].act = Act::Idle,
                    }
                }
                Act::Idle => {
                    self.try_steal(q, t, obs)?;
                    return Ok(());
                }
            }
        }
    }

    fn try_steal<O: Observer>(&mut self, q: usize, t: u64, obs: &mut O) -> Result<(), SimError> {
        let p = self.cfg.p;
        if p == 1 {
            return Err(SimError::Deadlock(t));
        }
        let mut v = self.rng.gen_range(0..p - 1);
        if v >= q {
            v += 1;
        }
        let cost;
        if let Some((u, _)) = self.procs[v].deque.pop_front() {
            let steps = (self.cfg.a2 * self.cfg.s - self.cfg.s) / self.cfg.b;
            cost = self.cfg.s + self.cfg.b * self.rng.gen_range(0..=steps);
            self.procs[q].act = Act::Steal(Some(u));
            self.metrics.s += 1;
            self.record_stolen_fork(u);
            obs.steal_begin(t, q, v, u);
            self.event(t, q, EventKind::Steal, u, v as u64);
        } else {
            cost = self.cfg.s_fail;
            self.procs[q].act = Act::Steal(None);
            self.metrics.failed_steals += 1;
            self.event(t, q, EventKind::StealFail, NONE, v as u64);
        }
        self.metrics.steal_time += cost;
        self.procs[q].ready = t + cost;
        Ok(())
    }

    /// Forks stolen from one task must occur, in the order the steals
    /// took them, each below or after the previous one.
    fn record_stolen_fork(&mut self, u: NodeId) {
        let Some(f) = self.dag.preds(u).next() else { return };
        let parent = self.fork_task[f as usize];
        if parent == NONE {
            return;
        }
        let pt = &mut self.tasks[parent as usize];
        if let Some(&f1) = pt.stolen_forks.last() {
            let n1 = self.dag.node(f1);
            let below = f > f1 && n1.second_succ().is_some_and(|r1| f < r1);
            let after = f > n1.mate;
            if !(below || after) {
                self.checks.observation1_violations += 1;
            }
        }
        pt.stolen_forks.push(f);
    }

    fn begin_stolen<O: Observer>(&mut self, q: usize, u: NodeId, t: u64, obs: &mut O) -> Result<(), SimError> {
        let f = self.dag.preds(u).next().ok_or_else(|| SimError::Fault(format!("stolen node {u} has no fork")))?;
        let parent = self.fork_task[f as usize];
        let id = self.tasks.len() as u32;
        self.tasks.push(TaskRecord {
            id,
            root: u,
            parent,
            join: self.dag.node(f).mate,
            thief: q,
            owner: q,
            start: t,
            end: t,
            stolen_forks: Vec::new(),
            stack: ExecStack::new(RegionKind::Stack(q as u16), self.cfg.stack_chunk),
            cache_misses: 0,
        });
        self.procs[q].task = id;
        obs.task_begin(t, q, id, u, f);
        self.start_node(q, u, t, obs)
    }

    fn start_node<O: Observer>(&mut self, q: usize, u: NodeId, t: u64, obs: &mut O) -> Result<(), SimError> {
        let node = self.dag.node(u);
        let task = self.procs[q].task;
        let pr = &mut self.procs[q];
        pr.act = Act::Exec;
        pr.node = u;
        pr.op = 0;
        pr.acc = node.op.init();
        pr.stalled = false;
        self.node_start[u as usize] = t;
        self.node_task[u as usize] = task;
        if node.declared_words > 0 && node.kind != NodeKind::Join {
            let stack = &mut self.tasks[task as usize].stack;
            let a = self.mem.push_segment(stack, node.declared_words as u64)?;
            self.seg_addr[u as usize] = a;
            self.seg_task[u as usize] = task;
            obs.segment_pushed(t, u, task, a, node.declared_words as u64);
        }
        obs.node_start(t, q, u, task);
        Ok(())
    }

    fn resolve(&self, q: usize, r: &sp_dag::VarRef) -> Result<u64, SimError> {
        match r.region {
            Region::GlobalArray => {
                let base = *self.array_base.get(r.array_id as usize).ok_or(SimError::BadRef(self.procs[q].node))?;
                Ok(base + r.offset as u64)
            }
            Region::StackLocal => {
                let a = *self.seg_addr.get(r.array_id as usize).ok_or(SimError::BadRef(self.procs[q].node))?;
                if a == NO_ADDR {
                    return Err(SimError::BadRef(self.procs[q].node));
                }
                Ok(a + r.offset as u64)
            }
        }
    }

    fn issue<O: Observer>(&mut self, q: usize, t: u64, obs: &mut O) -> Result<(), SimError> {
        let u = self.procs[q].node;
        let node = self.dag.node(u);
        let k = self.procs[q].op as usize;
        let latency;
        if k < node.script_len() {
            let r = self.dag.script(u)[k];
            let addr = self.resolve(q, &r)?;
            let task = self.procs[q].task;
            let req = AccessReq { proc: q, addr, write: r.is_write(), stalled: self.procs[q].stalled, node: u, task };
            let out = self.mem.access(&req, self.procs[q].acc, t)?;
            self.mem.reset_wait(q);
            if !r.is_write() {
                self.procs[q].acc = node.op.fold(self.procs[q].acc, out.value);
            }
            let block = self.mem.block_of(addr);
            match out.class {
                Class::BlockMiss => {
                    self.node_bm[u as usize] += self.cfg.b as u32;
                    self.metrics.block_wait += self.cfg.b;
                }
                Class::CacheMiss => self.tasks[task as usize].cache_misses += 1,
                Class::Hit => {}
            }
            if r.region == Region::StackLocal {
                let owner = self.seg_task[r.array_id as usize];
                if owner != task {
                    self.foreign.push(ForeignAccess { t, block, task, owner_task: owner });
                }
            }
            let kind = match out.class {
                Class::Hit => EventKind::Hit,
                Class::CacheMiss => EventKind::CacheMiss,
                Class::BlockMiss => EventKind::BlockMiss,
            };
            self.event(t, q, kind, u, addr);
            obs.op_done(
                t,
                q,
                u,
                OpDone::Access { k, addr, class: out.class, block, write: r.is_write(), fetch: out.fetch, writer: out.writer },
            );
            self.procs[q].stalled = false;
            latency = out.latency;
        } else {
            obs.op_done(t, q, u, OpDone::Compute);
            latency = 1;
        }
        self.metrics.ops += 1;
        let pr = &mut self.procs[q];
        pr.op += 1;
        pr.ready = t + latency;
        Ok(())
    }

    fn complete<O: Observer>(&mut self, q: usize, t: u64, obs: &mut O) -> Result<(), SimError> {
        let u = self.procs[q].node;
        let node = self.dag.node(u);
        let task = self.procs[q].task;
        obs.node_done(t, q, u);
        self.metrics.w += 1;
        let elapsed = t - self.node_start[u as usize];
        let extra = elapsed.saturating_sub(node.ops() as u64);
        self.metrics.e_observed = self.metrics.e_observed.max(extra.div_ceil(self.cfg.b));
        if node.release != NONE {
            let r = node.release as usize;
            let st = self.seg_task[r];
            if st == NONE || self.seg_addr[r] == NO_ADDR {
                return Err(SimError::Fault(format!("node {u} releases a segment that is not live")));
            }
            if st != task {
                self.checks.stack_owner_mismatches += 1;
            }
            self.tasks[st as usize].stack.free(self.seg_addr[r])?;
            self.seg_addr[r] = NO_ADDR;
            obs.segment_freed(t, node.release);
        }
        if u == self.dag.sink {
            self.done = true;
            self.metrics.makespan = t;
            self.tasks[0].end = t;
            return Ok(());
        }
        if node.kind == NodeKind::Fork {
            let (l, r) = (node.first_succ().unwrap(), node.second_succ().unwrap());
            let dq = &self.procs[q].deque;
            if let Some(&(prev, _)) = dq.back() {
                if self.dag.ht(r) >= self.dag.ht(prev) {
                    self.checks.deque_height_violations += 1;
                }
            }
            self.fork_task[u as usize] = task;
            self.procs[q].deque.push_back((r, task));
            obs.pushed(t, q, r);
            self.event(t, q, EventKind::Fork, u, r as u64);
            return self.start_node(q, l, t, obs);
        }
        let v = node.first_succ().ok_or_else(|| SimError::Fault(format!("node {u} has no successor")))?;
        if self.dag.node(v).kind != NodeKind::Join {
            return self.start_node(q, v, t, obs);
        }
        let ended = task != 0 && self.tasks[task as usize].join == v;
        if ended {
            self.tasks[task as usize].end = t;
        }
        self.arrivals[v as usize] += 1;
        match self.arrivals[v as usize] {
            1 => {
                if let Some((r, tk)) = self.procs[q].deque.pop_back() {
                    self.procs[q].task = tk;
                    obs.popped(t, q, r);
                    self.start_node(q, r, t, obs)
                } else {
                    self.procs[q].act = Act::Idle;
                    Ok(())
                }
            }
            2 => {
                let f = self.dag.node(v).mate;
                let parent = self.fork_task[f as usize];
                if parent == NONE {
                    return Err(SimError::Fault(format!("join {v} reached before its fork")));
                }
                if ended {
                    self.metrics.usurpations += 1;
                    self.tasks[parent as usize].owner = q;
                    self.event(t, q, EventKind::Usurp, v, parent as u64);
                }
                self.event(t, q, EventKind::Join, v, 0);
                self.procs[q].task = parent;
                self.start_node(q, v, t, obs)
            }
            _ => Err(SimError::Fault(format!("join {v} reached more than twice"))),
        }
    }

    fn finish(self, phases: Vec<Phase>) -> RunResult {
        let mut metrics = self.metrics;
        let c = self.mem.counters.clone();
        metrics.q = c.cache_misses;
        metrics.cold_misses = c.cold_misses;
        metrics.block_misses = c.block_misses;
        metrics.stall_cycles = c.stall_cycles;
        metrics.cap_hits = c.cap_hits;
        metrics.phases = phases.iter().filter(|p| !p.truncated).count() as u64;
        metrics.d_b = longest_weighted_path(self.dag, &self.node_bm) / self.cfg.b as f64;
        let outputs = self
            .dag
            .arrays
            .iter()
            .zip(&self.array_base)
            .map(|(a, &base)| (0..a.words as u64).map(|k| self.mem.peek(base + k)).collect())
            .collect();
        RunResult {
            metrics,
            trace: self.trace,
            tasks: self.tasks,
            outputs,
            moves: self.mem.moves().to_vec(),
            foreign: self.foreign,
            phases,
            checks: self.checks,
            mem: c,
            node_task: self.node_task,
            node_block_cost: self.node_bm,
        }
    }
}

/// Maximum over root-to-sink paths of summed node weights.
pub fn longest_weighted_path(dag: &SPDag, w: &[u32]) -> f64 {
    let mut order: Vec<NodeId> = (0..dag.len() as NodeId).collect();
    order.sort_unstable_by_key(|&u| dag.ht(u));
    let mut best = vec![0u64; dag.len()];
    for u in order {
        let m = dag.succs(u).map(|v| best[v as usize]).max().unwrap_or(0);
        best[u as usize] = m + w[u as usize] as u64;
    }
    best.get(dag.root as usize).copied().unwrap_or(0) as f64
}
