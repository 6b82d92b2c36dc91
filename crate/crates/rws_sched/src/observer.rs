use memsys::{Cause, Class};
use serde::Serialize;
use sp_dag::NodeId;

/// One completed operation of a node.
#[derive(Debug, Clone, Copy)]
pub enum OpDone {
    Compute,
    Access {
        /// Index of the access in the node's script.
        k: usize,
        addr: u64,
        class: Class,
        block: u64,
        write: bool,
        fetch: Option<Cause>,
        /// Last writer before an invalidation refetch.
        writer: NodeId,
    },
}

/// Potential split between queued and executing nodes, as base-2 logs
/// (`-inf` for an empty sum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSplit {
    pub log_queued: f64,
    pub log_exec: f64,
}

impl PhiSplit {
    pub fn total(&self) -> f64 {
        log2_add(self.log_queued, self.log_exec)
    }
    pub fn queued_fraction(&self) -> f64 {
        let t = self.total();
        if t == f64::NEG_INFINITY {
            0.0
        } else {
            (self.log_queued - t).exp2()
        }
    }
}

/// `log2(2^a + 2^b)`.
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// Hooks called by the scheduler. Every method has an empty default.
#[allow(unused_variables)]
pub trait Observer {
    /// Base address of each global array, reported before the run starts.
    fn global_array(&mut self, array: u32, base: u64, words: u64) {}
    /// `u` starts on `proc` as part of task `task`.
    fn node_start(&mut self, t: u64, proc: usize, u: NodeId, task: u32) {}
    /// Node `decl` pushed its segment onto the stack of `task`.
    fn segment_pushed(&mut self, t: u64, decl: NodeId, task: u32, base: u64, words: u64) {}
    fn segment_freed(&mut self, t: u64, decl: NodeId) {}
    /// A stolen task `task` begins at `root`; `fork` is its parent fork.
    fn task_begin(&mut self, t: u64, proc: usize, task: u32, root: NodeId, fork: NodeId) {}
    /// Called when the operation is issued; its effect on memory is immediate.
    fn op_done(&mut self, t: u64, proc: usize, u: NodeId, op: OpDone) {}
    fn node_done(&mut self, t: u64, proc: usize, u: NodeId) {}
    /// Right child of a fork pushed on `proc`'s deque.
    fn pushed(&mut self, t: u64, proc: usize, u: NodeId) {}
    /// Owner took `u` from the bottom of its deque.
    fn popped(&mut self, t: u64, proc: usize, u: NodeId) {}
    /// Thief removed `u` from a victim's deque; the steal is in transit.
    fn steal_begin(&mut self, t: u64, thief: usize, victim: usize, u: NodeId) {}
    fn steal_end(&mut self, t: u64, thief: usize, u: Option<NodeId>) {}
    /// Potential at time `t`, if the observer tracks it.
    fn phi(&mut self, t: u64) -> Option<PhiSplit> {
        None
    }
    /// Length of a computation phase, if phases should be recorded.
    fn phase_len(&self) -> Option<u64> {
        None
    }
}

pub struct NoObserver;
impl Observer for NoObserver {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseKind {
    Steal,
    Compute,
}

#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub index: usize,
    pub kind: PhaseKind,
    pub start: u64,
    pub end: u64,
    pub log_phi_start: f64,
    pub log_phi_end: f64,
    pub queued_fraction: f64,
    /// Cut short by termination.
    pub truncated: bool,
}

impl Phase {
    /// φ_end / φ_start.
    pub fn ratio(&self) -> f64 {
        if self.log_phi_end == f64::NEG_INFINITY {
            0.0
        } else {
            (self.log_phi_end - self.log_phi_start).exp2()
        }
    }
}

/// Labels time as steal phases (until 2p attempts complete) or
/// computation phases of fixed length.
pub struct PhaseClock {
    p: usize,
    comp_len: u64,
    cur: Option<Phase>,
    attempts_at_start: u64,
    pub phases: Vec<Phase>,
}

impl PhaseClock {
    pub fn new(p: usize, comp_len: u64) -> Self {
        PhaseClock { p, comp_len: comp_len.max(1), cur: None, attempts_at_start: 0, phases: Vec::new() }
    }

    fn open(&mut self, t: u64, split: PhiSplit, attempts: u64) {
        let total = split.total();
        if total == f64::NEG_INFINITY {
            return;
        }
        let kind = if split.log_queued >= split.log_exec { PhaseKind::Steal } else { PhaseKind::Compute };
        self.cur = Some(Phase {
            index: self.phases.len(),
            kind,
            start: t,
            end: t,
            log_phi_start: total,
            log_phi_end: total,
            queued_fraction: split.queued_fraction(),
            truncated: false,
        });
        self.attempts_at_start = attempts;
    }

    fn close(&mut self, t: u64, split: PhiSplit) {
        if let Some(mut ph) = self.cur.take() {
            ph.end = t;
            ph.log_phi_end = split.total();
            self.phases.push(ph);
        }
    }

    /// Closes computation phases that end strictly before the next event
    /// time `t`; the state is constant over the gap. A phase covers the
    /// events in `(start, end]`.
    pub fn before_events<O: Observer + ?Sized>(&mut self, t: u64, attempts: u64, obs: &mut O) {
        while let Some(ph) = &self.cur {
            if ph.kind != PhaseKind::Compute || ph.start + self.comp_len >= t {
                break;
            }
            let end = ph.start + self.comp_len;
            let Some(split) = obs.phi(end) else { return };
            self.close(end, split);
            self.open(end, split, attempts);
        }
    }

    /// Closes a finished steal phase and opens a new phase if none is open.
    pub fn after_events<O: Observer + ?Sized>(&mut self, t: u64, attempts: u64, obs: &mut O) {
        let steal_done = matches!(&self.cur, Some(ph) if ph.kind == PhaseKind::Steal
            && attempts - self.attempts_at_start >= 2 * self.p as u64);
        let comp_done = matches!(&self.cur, Some(ph) if ph.kind == PhaseKind::Compute
            && ph.start + self.comp_len <= t);
        if steal_done || comp_done || self.cur.is_none() {
            let Some(split) = obs.phi(t) else { return };
            if steal_done || comp_done {
                self.close(t, split);
            }
            self.open(t, split, attempts);
        }
    }

    pub fn finish(&mut self, t: u64) {
        if let Some(mut ph) = self.cur.take() {
            ph.end = t;
            ph.truncated = true;
            ph.log_phi_end = f64::NEG_INFINITY;
            self.phases.push(ph);
        }
    }

    pub fn current(&self) -> Option<&Phase> {
        self.cur.as_ref()
    }
}
