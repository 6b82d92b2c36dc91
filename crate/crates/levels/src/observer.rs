use std::collections::{HashMap, VecDeque};

use rws_sched::{log2_add, Class, Observer, OpDone, PhiSplit};
use serde::Serialize;
use sp_dag::{NodeId, NodeKind, Region, SPDag, NONE};

use crate::fenwick::Fenwick;
use crate::structure::{in_bp_tree, is_array_ref, Structure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// Static heights from node costs; computation phases last `b`.
    Coarse,
    /// Heights from the level functions; computation phases last `2b`.
    Refined,
}

/// Reading of the rule that suppresses stack-local decrements while the
/// kernel's processor has queued work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QueueRule {
    /// Any queued node suppresses the decrement.
    AnyEntry,
    /// Only queued nodes of the same BP tree do.
    SameTree,
}

/// Deliberately broken update rules, for negative tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fault {
    None,
    /// Compose without the increment terms.
    NoDelta,
    /// Decrement only the forks of a conflict group, not its pair.
    L2DownOnly,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelConfig {
    pub mode: Mode,
    pub queue_rule: QueueRule,
    pub fault: Fault,
    /// DAGs with at most this many nodes get a full edge check after
    /// every event; larger ones check the edges around changed nodes.
    pub full_check_limit: usize,
    pub phases: bool,
}

impl LevelConfig {
    pub fn new(mode: Mode) -> Self {
        LevelConfig { mode, queue_rule: QueueRule::AnyEntry, fault: Fault::None, full_check_limit: 512, phases: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// `ℓ1(u) < ℓ1(v) + 2` or `ℓi(u) < ℓi(v)` on edge `(u, v)`.
    Order,
    /// `ℓi(u) < 0`.
    Negative,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub event: u64,
    pub t: u64,
    pub kind: ViolationKind,
    pub level: u8,
    pub u: NodeId,
    pub v: NodeId,
    pub lhs: i64,
    pub rhs: i64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LevelReport {
    pub events: u64,
    pub edge_checks: u64,
    pub violation_count: u64,
    /// First violations found.
    pub violations: Vec<Violation>,
    /// Decrements applied to ℓ2, ℓ3 and ℓ4.
    pub decrements: [u64; 3],
    /// Rule applications that found their node in an unexpected state.
    pub faults: u64,
    /// Tie-breaks among kernel-path candidates.
    pub tie_flags: u64,
    pub h_root: f64,
    pub root_levels: [i64; 4],
}

const KEEP: usize = 64;
const NO_SNAP: i64 = i64::MIN;

#[derive(Debug, Clone, Default)]
struct TaskTree {
    stolen: Vec<NodeId>,
    /// Last leaf of the kernel path.
    path_leaf: NodeId,
    up: bool,
}

#[derive(Debug, Clone, Copy)]
struct Exec {
    u: NodeId,
    start: u64,
    units: u64,
}

/// Tracks the level functions and potential during one run.
pub struct LevelObserver<'a> {
    dag: &'a SPDag,
    st: &'a Structure,
    cfg: LevelConfig,
    b: u64,
    s: f64,
    bs: f64,
    /// Static heights in coarse mode.
    coarse_h: Vec<f64>,
    done: Vec<bool>,
    task_of: Vec<u32>,
    dec2: Vec<i64>,
    group_done: Vec<bool>,
    /// Per-node ℓ2 decrements, used only by fault injection.
    pdec2: Vec<i64>,
    pdec3: Vec<i64>,
    fen3: Fenwick,
    snap3: Vec<i64>,
    fen4: Fenwick,
    can_write: HashMap<u64, Vec<u32>>,
    shared4: HashMap<u64, Vec<u32>>,
    seg: HashMap<NodeId, (u64, u64)>,
    owner: Vec<usize>,
    tt: HashMap<(u32, u32), TaskTree>,
    deques: Vec<VecDeque<NodeId>>,
    transit: Vec<Option<NodeId>>,
    exec: Vec<Option<Exec>>,
    dirty: Vec<NodeId>,
    t: u64,
    pub report: LevelReport,
}

impl<'a> LevelObserver<'a> {
    /// `cost_e` is the per-node stall allowance used for coarse heights.
    pub fn new(dag: &'a SPDag, st: &'a Structure, cfg: LevelConfig, p: usize, b: u64, s: u64, cost_e: u64) -> Self {
        let n = dag.len();
        let coarse_h = if cfg.mode == Mode::Coarse { coarse_heights(dag, b, s, cost_e) } else { Vec::new() };
        let mut o = LevelObserver {
            dag,
            st,
            cfg,
            b,
            s: s as f64,
            bs: b as f64 / s as f64,
            coarse_h,
            done: vec![false; n],
            task_of: vec![NONE; n],
            dec2: vec![0; st.groups.len()],
            group_done: vec![false; st.groups.len()],
            pdec2: vec![0; n],
            pdec3: vec![0; n],
            fen3: Fenwick::new(n),
            snap3: vec![NO_SNAP; n],
            fen4: Fenwick::new(n),
            can_write: HashMap::new(),
            shared4: HashMap::new(),
            seg: HashMap::new(),
            owner: vec![0],
            tt: HashMap::new(),
            deques: vec![VecDeque::new(); p],
            transit: vec![None; p],
            exec: vec![None; p],
            dirty: Vec::new(),
            t: 0,
            report: LevelReport::default(),
        };
        if cfg.mode == Mode::Refined {
            o.full_check();
        }
        let r = dag.root;
        o.report.h_root = o.h(r);
        o.report.root_levels = [o.l1(r), o.level(1, r), o.level(2, r), o.level(3, r)];
        o
    }

    fn tracking(&self) -> bool {
        self.cfg.mode == Mode::Refined
    }

    pub fn l1(&self, u: NodeId) -> i64 {
        2 * self.dag.ht(u) as i64
    }

    /// BP component of ℓ2, ℓ3 or ℓ4 (`i` = 1, 2, 3).
    pub fn base(&self, i: usize, u: NodeId) -> i64 {
        let x = u as usize;
        let init = self.st.init[i - 1][x];
        match i {
            1 => {
                let g = self.st.group[x];
                init - self.pdec2[x] - if g == NONE { 0 } else { self.dec2[g as usize] }
            }
            2 => {
                if self.snap3[x] != NO_SNAP {
                    return self.snap3[x];
                }
                let mut v = init - self.pdec3[x];
                if self.is_bp_fork(u) {
                    v -= self.fen3.get(x);
                }
                v
            }
            _ => init - self.fen4.get(x),
        }
    }

    /// ℓ2, ℓ3 or ℓ4 (`i` = 1, 2, 3).
    pub fn level(&self, i: usize, u: NodeId) -> i64 {
        self.base(i, u) + self.st.delta[i - 1][u as usize]
    }

    pub fn h(&self, u: NodeId) -> f64 {
        if self.cfg.mode == Mode::Coarse {
            return self.coarse_h[u as usize];
        }
        let l = (1..=3).map(|i| self.level(i, u)).sum::<i64>() as f64;
        self.l1(u) as f64 + self.bs * l
    }

    fn is_bp_fork(&self, u: NodeId) -> bool {
        self.dag.node(u).kind == NodeKind::Fork && in_bp_tree(self.dag, u).is_some()
    }

    /// Exponent of an executing node's potential.
    fn exec_exp(&self, e: &Exec, t: u64) -> f64 {
        if self.cfg.mode == Mode::Coarse {
            return self.coarse_h[e.u as usize] - (t - e.start) as f64 / self.s;
        }
        let nd = self.dag.node(e.u);
        let floor = match (nd.first_succ(), nd.second_succ()) {
            (Some(l), Some(r)) => log2_add(1.0 + self.h(r), self.h(l)),
            (Some(v), None) => self.h(v),
            _ => f64::NEG_INFINITY,
        };
        (self.h(e.u) - e.units as f64 / self.s).max(floor)
    }

    pub fn split(&self, t: u64) -> PhiSplit {
        let mut q = f64::NEG_INFINITY;
        for u in self.deques.iter().flatten().chain(self.transit.iter().flatten()) {
            q = log2_add(q, 1.0 + self.h(*u));
        }
        let mut x = f64::NEG_INFINITY;
        for e in self.exec.iter().flatten() {
            x = log2_add(x, self.exec_exp(e, t));
        }
        PhiSplit { log_queued: q, log_exec: x }
    }

    // Checking.

    fn violation(&mut self, kind: ViolationKind, level: u8, u: NodeId, v: NodeId, lhs: i64, rhs: i64) {
        self.report.violation_count += 1;
        if self.report.violations.len() < KEEP {
            self.report.violations.push(Violation { event: self.report.events, t: self.t, kind, level, u, v, lhs, rhs });
        }
    }

    fn check_node(&mut self, u: NodeId) {
        for i in 1..=3 {
            let (b, l) = (self.base(i, u), self.level(i, u));
            if b < 0 || l < 0 {
                self.violation(ViolationKind::Negative, i as u8 + 1, u, u, b.min(l), 0);
            }
        }
    }

    fn check_edge(&mut self, u: NodeId, v: NodeId) {
        self.report.edge_checks += 1;
        if self.l1(u) < self.l1(v) + 2 {
            self.violation(ViolationKind::Order, 1, u, v, self.l1(u), self.l1(v) + 2);
        }
        for i in 1..=3 {
            let (a, b) = (self.level(i, u), self.level(i, v));
            if a < b {
                self.violation(ViolationKind::Order, i as u8 + 1, u, v, a, b);
            }
        }
    }

    /// Checks every edge and node.
    pub fn full_check(&mut self) {
        for u in 0..self.dag.len() as NodeId {
            self.check_node(u);
            for v in self.dag.succs(u).collect::<Vec<_>>() {
                self.check_edge(u, v);
            }
        }
    }

    fn flush(&mut self) {
        if self.dirty.is_empty() {
            return;
        }
        self.report.events += 1;
        if self.dag.len() <= self.cfg.full_check_limit {
            self.dirty.clear();
            self.full_check();
            return;
        }
        let mut d = std::mem::take(&mut self.dirty);
        d.sort_unstable();
        d.dedup();
        for &u in &d {
            self.check_node(u);
            let around: Vec<(NodeId, NodeId)> =
                self.dag.preds(u).map(|p| (p, u)).chain(self.dag.succs(u).map(|s| (u, s))).collect();
            for (a, b) in around {
                self.check_edge(a, b);
            }
        }
        d.clear();
        self.dirty = d;
    }

    // Updates.

    fn dec3_point(&mut self, u: NodeId) {
        self.pdec3[u as usize] += 1;
        self.report.decrements[1] += 1;
        self.dirty.push(u);
    }

    fn group_nodes(&self, g: u32) -> impl Iterator<Item = NodeId> + '_ {
        let gr = &self.st.groups[g as usize];
        (gr.root..=gr.end).filter(move |&v| self.dag.node(v).tag.instance == gr.tree)
    }

    fn dec2_group(&mut self, g: u32) {
        if self.group_done[g as usize] {
            return;
        }
        self.report.decrements[0] += 1;
        if self.cfg.fault == Fault::L2DownOnly {
            let forks: Vec<NodeId> = self.group_nodes(g).filter(|&v| self.dag.node(v).kind == NodeKind::Fork).collect();
            for v in forks {
                self.pdec2[v as usize] += 1;
                self.dirty.push(v);
            }
            return;
        }
        self.dec2[g as usize] += 1;
        let gr = &self.st.groups[g as usize];
        let (r, e) = (gr.root, gr.end);
        self.dirty.push(r);
        self.dirty.push(e);
    }

    fn dec3_range(&mut self, lo: NodeId, hi: NodeId) {
        if lo > hi {
            return;
        }
        self.fen3.add(lo as usize, hi as usize, 1);
        self.report.decrements[1] += 1;
        let tree = self.dag.node(lo).tag.instance;
        for v in lo..=hi {
            let nd = self.dag.node(v);
            if nd.kind == NodeKind::Fork && nd.tag.instance == tree && !self.done[v as usize] {
                self.dirty.push(v);
            }
        }
    }

    fn dec4_range(&mut self, lo: NodeId, hi: NodeId) {
        self.fen4.add(lo as usize, hi as usize, 1);
        self.report.decrements[2] += 1;
        self.dirty.push(lo);
        self.dirty.push(hi);
    }

    fn queue_blocks(&self, task: u32, tree: u32) -> bool {
        let q = self.owner.get(task as usize).copied().unwrap_or(0);
        let dq = &self.deques[q];
        match self.cfg.queue_rule {
            QueueRule::AnyEntry => !dq.is_empty(),
            QueueRule::SameTree => dq.iter().any(|&u| self.dag.node(u).tag.instance == tree),
        }
    }

    /// Rightmost leaf of the left subtree of fork `f`.
    fn path_leaf(&self, f: NodeId) -> NodeId {
        let mut g = self.dag.node(f).first_succ().unwrap();
        while self.dag.node(g).kind == NodeKind::Fork {
            g = self.dag.node(g).second_succ().unwrap();
        }
        g
    }

    /// Access by `u` to a slot declared by fork `decl` of BP tree `tree`.
    fn on_slot_access(&mut self, u: NodeId, decl: NodeId, tree: u32) {
        if self.dag.node(u).tag.instance != tree {
            return;
        }
        let tau = self.task_of[decl as usize];
        let ku = self.task_of[u as usize];
        let nd = self.dag.node(u);
        let state = self.tt.get(&(tau, tree)).cloned().unwrap_or_default();
        if ku == tau {
            let up_node = nd.kind == NodeKind::Join || (nd.kind == NodeKind::Leaf && state.up);
            if !up_node {
                if !self.queue_blocks(tau, tree) {
                    self.dec3_point(u);
                }
                return;
            }
            self.dec3_point(u);
            let Some(j) = nd.first_succ() else { return };
            let jn = self.dag.node(j);
            if jn.kind != NodeKind::Join || jn.tag.instance != tree {
                return;
            }
            let f = jn.mate;
            let r = self.dag.node(f).second_succ().unwrap();
            let w = j - 1;
            if u < r && state.stolen.contains(&f) && !self.done[w as usize] {
                self.dec3_point(w);
            }
            return;
        }
        // Foreign access: only the last node of a stolen branch counts.
        let Some(j) = nd.first_succ() else { return };
        let jn = self.dag.node(j);
        if jn.kind != NodeKind::Join || jn.tag.instance != tree || u != j - 1 {
            return;
        }
        let f = jn.mate;
        let Some(pos) = state.stolen.iter().position(|&x| x == f) else { return };
        if !state.up {
            if !self.queue_blocks(tau, tree) {
                self.dec3_range(f + 1, j - 1);
            }
            return;
        }
        // Up-pass: the kernel path below f and deeper stolen siblings.
        let last = *state.stolen.last().unwrap();
        let mut g = f;
        let mut targets = Vec::new();
        while g != last {
            let gn = self.dag.node(g);
            let (l, r) = (gn.first_succ().unwrap(), gn.second_succ().unwrap());
            g = if last >= r { r } else { l };
            if self.dag.node(g).kind != NodeKind::Fork {
                self.report.faults += 1;
                break;
            }
            targets.push(self.dag.node(g).mate);
        }
        if g == last {
            let mut v = self.dag.node(last).first_succ().unwrap();
            while self.dag.node(v).kind == NodeKind::Fork {
                targets.push(self.dag.node(v).mate);
                v = self.dag.node(v).second_succ().unwrap();
            }
            targets.push(v);
        }
        for &f2 in &state.stolen[pos + 1..] {
            targets.push(self.dag.node(f2).mate - 1);
        }
        for v in targets {
            if !self.done[v as usize] {
                self.dec3_point(v);
            }
        }
    }

    fn register_writes(&mut self, list: &[(u32, u32)], base: u64) {
        for &(off, g) in list {
            let bl = (base + off as u64) / self.st.block;
            let e = self.can_write.entry(bl).or_default();
            if !e.contains(&g) {
                e.push(g);
            }
        }
    }

    fn unregister_writes(&mut self, list: &[(u32, u32)], base: u64) {
        for &(off, g) in list {
            let bl = (base + off as u64) / self.st.block;
            if let Some(e) = self.can_write.get_mut(&bl) {
                e.retain(|&x| x != g);
            }
        }
    }
}

/// Heights `(1/s)·` longest path of node costs `e1 + b·E`, plus `2s` for forks.
pub fn coarse_heights(dag: &SPDag, b: u64, s: u64, cost_e: u64) -> Vec<f64> {
    let base = (dag.e1 as u64 + b * cost_e) as f64;
    let mut order: Vec<NodeId> = (0..dag.len() as NodeId).collect();
    order.sort_unstable_by_key(|&u| dag.ht(u));
    let mut h = vec![0.0f64; dag.len()];
    for u in order {
        let c = base + if dag.node(u).kind == NodeKind::Fork { 2.0 * s as f64 } else { 0.0 };
        let m = dag.succs(u).map(|v| h[v as usize]).fold(0.0, f64::max);
        h[u as usize] = m + c / s as f64;
    }
    h
}

/// `log2` of the potential of queued nodes with heights `queued` and
/// executing nodes `(h, x)`; `-inf` when nothing is live.
pub fn log_phi(queued: &[f64], executing: &[(f64, f64)], s: f64) -> f64 {
    let q = queued.iter().fold(f64::NEG_INFINITY, |a, &h| log2_add(a, 1.0 + h));
    executing.iter().fold(q, |a, &(h, x)| log2_add(a, h - x / s))
}

impl Observer for LevelObserver<'_> {
    fn global_array(&mut self, array: u32, base: u64, _words: u64) {
        if self.tracking() {
            let list = self.st.global_writes[array as usize].clone();
            self.register_writes(&list, base);
        }
    }

    fn node_start(&mut self, t: u64, proc: usize, u: NodeId, task: u32) {
        self.t = t;
        self.task_of[u as usize] = task;
        if self.owner.len() <= task as usize {
            self.owner.resize(task as usize + 1, 0);
        }
        self.owner[task as usize] = proc;
        self.exec[proc] = Some(Exec { u, start: t, units: 0 });
        if self.tracking() && self.dag.node(u).kind == NodeKind::Leaf {
            if let Some(tree) = in_bp_tree(self.dag, u) {
                if let Some(s) = self.tt.get_mut(&(task, tree)) {
                    if s.path_leaf == u {
                        s.up = true;
                    }
                }
            }
        }
    }

    fn segment_pushed(&mut self, _t: u64, decl: NodeId, _task: u32, base: u64, words: u64) {
        if !self.tracking() || words == 0 {
            return;
        }
        self.seg.insert(decl, (base, words));
        if let Some(list) = self.st.local_writes.get(&decl) {
            let list = list.clone();
            self.register_writes(&list, base);
        }
        let call = self.dag.node(decl).tag.call;
        if self.dag.node(decl).tag.role == sp_dag::Role::CallEntry && call != NONE {
            let bl = self.st.block;
            let (first, last) = (base / bl, (base + words - 1) / bl);
            if base % bl != 0 {
                self.shared4.entry(first).or_default().push(call);
            }
            if (base + words) % bl != 0 && (last != first || base % bl == 0) {
                self.shared4.entry(last).or_default().push(call);
            }
        }
    }

    fn segment_freed(&mut self, _t: u64, decl: NodeId) {
        let Some((base, words)) = self.seg.remove(&decl) else { return };
        if let Some(list) = self.st.local_writes.get(&decl) {
            let list = list.clone();
            self.unregister_writes(&list, base);
        }
        let call = self.dag.node(decl).tag.call;
        let bl = self.st.block;
        for b in [base / bl, (base + words - 1) / bl] {
            if let Some(v) = self.shared4.get_mut(&b) {
                v.retain(|&c| c != call);
            }
        }
    }

    fn op_done(&mut self, t: u64, proc: usize, u: NodeId, op: OpDone) {
        self.t = t;
        let OpDone::Access { k, class, block, .. } = op else {
            if let Some(e) = self.exec[proc].as_mut() {
                e.units += 1;
            }
            return;
        };
        if let Some(e) = self.exec[proc].as_mut() {
            e.units += self.b;
        }
        if !self.tracking() {
            return;
        }
        if self.done[u as usize] {
            self.report.faults += 1;
        }
        let r = self.dag.script(u)[k];
        if is_array_ref(self.dag, &r) {
            if let Some(gs) = self.can_write.get(&block) {
                for g in gs.clone() {
                    self.dec2_group(g);
                }
            }
        } else if r.region == Region::StackLocal {
            if let Some(tree) = in_bp_tree(self.dag, r.array_id) {
                self.on_slot_access(u, r.array_id, tree);
            }
        }
        if class == Class::BlockMiss {
            if let Some(calls) = self.shared4.get(&block) {
                for c in calls.clone() {
                    let ci = &self.dag.calls[c as usize];
                    if ci.entry <= u && u <= ci.exit {
                        self.dec4_range(ci.entry, ci.exit);
                    }
                }
            }
        }
        self.flush();
    }

    fn node_done(&mut self, t: u64, proc: usize, u: NodeId) {
        self.t = t;
        self.exec[proc] = None;
        if !self.tracking() {
            self.done[u as usize] = true;
            return;
        }
        if self.is_bp_fork(u) {
            self.snap3[u as usize] = self.base(2, u);
        }
        self.done[u as usize] = true;
        let g = self.st.group[u as usize];
        if g != NONE && self.st.groups[g as usize].end == u {
            self.group_done[g as usize] = true;
        }
    }

    fn pushed(&mut self, _t: u64, proc: usize, u: NodeId) {
        self.deques[proc].push_back(u);
    }

    fn popped(&mut self, _t: u64, proc: usize, u: NodeId) {
        if self.deques[proc].pop_back() != Some(u) {
            self.report.faults += 1;
        }
    }

    fn steal_begin(&mut self, _t: u64, thief: usize, victim: usize, u: NodeId) {
        if self.deques[victim].pop_front() != Some(u) {
            self.report.faults += 1;
        }
        self.transit[thief] = Some(u);
        if !self.tracking() {
            return;
        }
        let Some(f) = self.dag.preds(u).next() else { return };
        let Some(tree) = in_bp_tree(self.dag, f) else { return };
        let tau = self.task_of[f as usize];
        let leaf = self.path_leaf(f);
        let s = self.tt.entry((tau, tree)).or_default();
        s.stolen.push(f);
        s.path_leaf = leaf;
        s.up = false;
    }

    fn steal_end(&mut self, _t: u64, thief: usize, _u: Option<NodeId>) {
        self.transit[thief] = None;
    }

    fn phi(&mut self, t: u64) -> Option<PhiSplit> {
        Some(self.split(t))
    }

    fn phase_len(&self) -> Option<u64> {
        if !self.cfg.phases {
            return None;
        }
        Some(match self.cfg.mode {
            Mode::Coarse => self.b,
            Mode::Refined => 2 * self.b,
        })
    }
}
