use std::collections::HashSet;

use crate::types::*;
use crate::DagError;

/// A fully materialised series-parallel computation DAG.
#[derive(Debug, Clone)]
pub struct SPDag {
    pub(crate) nodes: Vec<SPNode>,
    pub(crate) refs: Vec<VarRef>,
    pub arrays: Vec<ArrayDecl>,
    pub trees: Vec<TreeInfo>,
    pub calls: Vec<CallInfo>,
    pub root: NodeId,
    pub sink: NodeId,
    pub e1: u32,
    pub e2: u32,
    /// Bound on words declared by nodes other than call entries.
    pub local_limit: u32,
    pub name: String,
}

impl SPDag {
    /// The degenerate zero-node DAG; every composition rejects it.
    pub fn empty() -> Self {
        SPDag {
            nodes: Vec::new(),
            refs: Vec::new(),
            arrays: Vec::new(),
            trees: Vec::new(),
            calls: Vec::new(),
            root: NONE,
            sink: NONE,
            e1: DEFAULT_E1,
            e2: 1,
            local_limit: 8,
            name: String::new(),
        }
    }

    /// One node with no accesses.
    pub fn single() -> Self {
        Self::chain(1)
    }

    /// `n` serial nodes in sequence.
    pub fn chain(n: usize) -> Self {
        let mut b = DagBuilder::new("chain");
        let mut frag = None;
        for _ in 0..n {
            let f = b.serial(&[], 1, NodeTag::default());
            frag = Some(match frag {
                None => f,
                Some(prev) => b.seq(prev, f),
            });
        }
        match frag {
            Some(f) => b.finish(f),
            None => SPDag::empty(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &SPNode {
        &self.nodes[id as usize]
    }

    pub fn nodes(&self) -> &[SPNode] {
        &self.nodes
    }

    pub fn script(&self, id: NodeId) -> &[VarRef] {
        let n = &self.nodes[id as usize];
        let s = n.script_start as usize;
        &self.refs[s..s + n.script_len as usize]
    }

    pub fn succs(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[id as usize].succs()
    }

    pub fn preds(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[id as usize].preds()
    }

    pub fn ht(&self, id: NodeId) -> u32 {
        self.nodes[id as usize].ht
    }

    /// Longest path length in vertices.
    pub fn t_inf(&self) -> u32 {
        if self.nodes.is_empty() {
            0
        } else {
            self.nodes[self.root as usize].ht + 1
        }
    }

    /// Total number of accesses in all scripts.
    pub fn access_count(&self) -> usize {
        self.refs.len()
    }

    pub fn tree_of(&self, id: NodeId) -> Option<&TreeInfo> {
        let t = self.nodes[id as usize].tag.instance;
        (t != NONE).then(|| &self.trees[t as usize])
    }

    /// Last node of the subdag rooted at `id`: the matching join of a
    /// fork, the exit of a call entry, otherwise the node itself.
    pub fn scope_end(&self, id: NodeId) -> NodeId {
        let n = &self.nodes[id as usize];
        match (n.kind, n.tag.role) {
            (NodeKind::Fork, _) if n.mate != NONE => n.mate,
            (_, Role::CallEntry) if n.tag.call != NONE => self.calls[n.tag.call as usize].exit,
            _ => id,
        }
    }

    /// Nodes reachable from `start` without passing `stop`, inclusive of
    /// `start` and exclusive of `stop`.
    pub fn region_nodes(&self, start: NodeId, stop: NodeId) -> Vec<NodeId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            if u == stop || !seen.insert(u) {
                continue;
            }
            out.push(u);
            stack.extend(self.succs(u));
        }
        out.sort_unstable();
        out
    }

    /// Nodes of the subdag rooted at `id` (see [`SPDag::scope_end`]).
    pub fn subdag_nodes(&self, id: NodeId) -> Vec<NodeId> {
        let end = self.scope_end(id);
        if end == id {
            return vec![id];
        }
        let mut v = self.region_nodes(id, end);
        v.push(end);
        v
    }

    fn distinct_words(&self, nodes: &[NodeId]) -> usize {
        let mut set = HashSet::new();
        for &u in nodes {
            for r in self.script(u) {
                set.insert(r.var_key());
            }
        }
        set.len()
    }

    /// |τ| for the subdag rooted at `id`: distinct words accessed.
    pub fn task_size(&self, id: NodeId) -> usize {
        self.distinct_words(&self.subdag_nodes(id))
    }

    /// |τ| for the branch starting at `start` and ending before `stop`.
    pub fn branch_task_size(&self, start: NodeId, stop: NodeId) -> usize {
        self.distinct_words(&self.region_nodes(start, stop))
    }

    /// Task sizes for every node, by exact set union.
    pub fn task_sizes(&self) -> Vec<usize> {
        (0..self.nodes.len() as NodeId).map(|u| self.task_size(u)).collect()
    }

    pub(crate) fn recompute_heights(&mut self) {
        if let Ok(h) = crate::heights(self) {
            for (n, v) in self.nodes.iter_mut().zip(h) {
                n.ht = v;
            }
        }
    }
}

/// Source and sink of a partially built subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frag {
    pub src: NodeId,
    pub sink: NodeId,
}

/// Incremental DAG construction; node ids are assigned in call order.
pub struct DagBuilder {
    dag: SPDag,
}

impl DagBuilder {
    pub fn new(name: &str) -> Self {
        let mut dag = SPDag::empty();
        dag.name = name.to_string();
        DagBuilder { dag }
    }

    pub fn set_e2(&mut self, e2: u32) {
        self.dag.e2 = e2;
    }

    pub fn set_local_limit(&mut self, l: u32) {
        self.dag.local_limit = l;
    }

    pub fn e1(&self) -> u32 {
        self.dag.e1
    }

    pub fn next_id(&self) -> NodeId {
        self.dag.nodes.len() as NodeId
    }

    pub fn global_array(&mut self, name: &str, words: u32) -> ArrayId {
        self.dag.arrays.push(ArrayDecl { name: name.to_string(), words });
        (self.dag.arrays.len() - 1) as ArrayId
    }

    /// Adds an unconnected node. Panics if the script exceeds `e1`.
    pub fn add(&mut self, kind: NodeKind, script: &[VarRef], compute: u8, tag: NodeTag) -> NodeId {
        assert!(
            script.len() + compute as usize <= self.dag.e1 as usize,
            "node script exceeds e1; use chain()"
        );
        let id = self.dag.nodes.len() as NodeId;
        let start = self.dag.refs.len() as u32;
        self.dag.refs.extend_from_slice(script);
        self.dag.nodes.push(SPNode {
            id,
            kind,
            script_start: start,
            script_len: script.len() as u16,
            compute_ops: compute,
            op: Op::Sum,
            declared_words: 0,
            release: NONE,
            succ: [NONE; 2],
            pred: [NONE; 2],
            mate: NONE,
            ht: 0,
            tag,
        });
        id
    }

    /// A node of `kind` followed, if the script is longer than one node
    /// permits, by serial continuation nodes.
    pub fn chain(&mut self, kind: NodeKind, script: &[VarRef], compute: u8, tag: NodeTag) -> Frag {
        let e1 = self.dag.e1 as usize;
        if script.len() + compute as usize <= e1 {
            let id = self.add(kind, script, compute, tag);
            return Frag { src: id, sink: id };
        }
        let per = e1 - 1;
        let mut frag: Option<Frag> = None;
        let mut rest = script;
        let mut first = true;
        while !rest.is_empty() || first {
            let take = rest.len().min(per);
            let (head, tail) = rest.split_at(take);
            let last = tail.is_empty();
            let c = if last { compute.max(1).min((e1 - take) as u8) } else { 1 };
            let k = if first { kind } else { NodeKind::Serial };
            let mut t = tag;
            if !first {
                t.role = match tag.role {
                    Role::Leaf | Role::Glue => tag.role,
                    _ => Role::Glue,
                };
            }
            let id = self.add(k, head, c, t);
            let f = Frag { src: id, sink: id };
            frag = Some(match frag {
                None => f,
                Some(p) => self.seq(p, f),
            });
            rest = tail;
            first = false;
        }
        frag.expect("chain emits at least one node")
    }

    pub fn serial(&mut self, script: &[VarRef], compute: u8, tag: NodeTag) -> Frag {
        self.chain(NodeKind::Serial, script, compute, tag)
    }

    pub fn leaf(&mut self, script: &[VarRef], compute: u8, tag: NodeTag) -> Frag {
        self.chain(NodeKind::Leaf, script, compute, tag)
    }

    pub fn edge(&mut self, a: NodeId, b: NodeId) {
        let an = &mut self.dag.nodes[a as usize];
        let slot = an.succ.iter().position(|&s| s == NONE).expect("node has two successors");
        an.succ[slot] = b;
        let bn = &mut self.dag.nodes[b as usize];
        let slot = bn.pred.iter().position(|&s| s == NONE).expect("node has two predecessors");
        bn.pred[slot] = a;
    }

    pub fn seq(&mut self, a: Frag, b: Frag) -> Frag {
        self.edge(a.sink, b.src);
        Frag { src: a.src, sink: b.sink }
    }

    /// Wires `fork` to both branches and both branches to `join`.
    /// The left branch is the continuation, the right one is pushed.
    pub fn connect_fork(&mut self, fork: NodeId, left: Frag, right: Frag, join: NodeId) -> Frag {
        self.edge(fork, left.src);
        self.edge(fork, right.src);
        self.edge(left.sink, join);
        self.edge(right.sink, join);
        self.dag.nodes[fork as usize].mate = join;
        self.dag.nodes[join as usize].mate = fork;
        if self.dag.nodes[fork as usize].declared_words > 0 {
            self.dag.nodes[join as usize].release = fork;
        }
        Frag { src: fork, sink: join }
    }

    pub fn declare(&mut self, node: NodeId, words: u32) {
        self.dag.nodes[node as usize].declared_words = words;
        let mate = self.dag.nodes[node as usize].mate;
        if mate != NONE && self.dag.nodes[node as usize].kind == NodeKind::Fork {
            self.dag.nodes[mate as usize].release = node;
        }
    }

    pub fn set_op(&mut self, node: NodeId, op: Op) {
        self.dag.nodes[node as usize].op = op;
    }

    pub fn set_release(&mut self, node: NodeId, of: NodeId) {
        self.dag.nodes[node as usize].release = of;
    }

    pub fn tag_mut(&mut self, node: NodeId) -> &mut NodeTag {
        &mut self.dag.nodes[node as usize].tag
    }

    pub fn new_tree(&mut self, kind: TreeKind) -> u32 {
        self.dag.trees.push(TreeInfo { kind, root: NONE, up_root: NONE, first: NONE, last: NONE, height: 0, leaves: 0 });
        (self.dag.trees.len() - 1) as u32
    }

    pub fn tree_mut(&mut self, id: u32) -> &mut TreeInfo {
        &mut self.dag.trees[id as usize]
    }

    pub fn new_call(&mut self, size: u32, local_words: u32, parent: u32, type_level: u8) -> u32 {
        self.dag.calls.push(CallInfo { entry: NONE, exit: NONE, size, local_words, parent, type_level });
        (self.dag.calls.len() - 1) as u32
    }

    pub fn call_mut(&mut self, id: u32) -> &mut CallInfo {
        &mut self.dag.calls[id as usize]
    }

    pub fn finish(mut self, whole: Frag) -> SPDag {
        self.dag.root = whole.src;
        self.dag.sink = whole.sink;
        self.dag.recompute_heights();
        self.dag
    }
}

fn append(dst: &mut SPDag, src: &SPDag) -> u32 {
    let off = dst.nodes.len() as u32;
    let roff = dst.refs.len() as u32;
    let aoff = dst.arrays.len() as u32;
    let toff = dst.trees.len() as u32;
    let coff = dst.calls.len() as u32;
    let sh = |x: u32, o: u32| if x == NONE { NONE } else { x + o };
    for r in &src.refs {
        let mut r = *r;
        r.array_id = match r.region {
            Region::GlobalArray => r.array_id + aoff,
            Region::StackLocal => r.array_id + off,
        };
        dst.refs.push(r);
    }
    for n in &src.nodes {
        let mut n = n.clone();
        n.id += off;
        n.script_start += roff;
        n.release = sh(n.release, off);
        n.mate = sh(n.mate, off);
        n.succ = [sh(n.succ[0], off), sh(n.succ[1], off)];
        n.pred = [sh(n.pred[0], off), sh(n.pred[1], off)];
        n.tag.instance = sh(n.tag.instance, toff);
        n.tag.call = sh(n.tag.call, coff);
        dst.nodes.push(n);
    }
    dst.arrays.extend(src.arrays.iter().cloned());
    for t in &src.trees {
        let mut t = t.clone();
        t.root = sh(t.root, off);
        t.up_root = sh(t.up_root, off);
        t.first = sh(t.first, off);
        t.last = sh(t.last, off);
        dst.trees.push(t);
    }
    for c in &src.calls {
        let mut c = c.clone();
        c.entry = sh(c.entry, off);
        c.exit = sh(c.exit, off);
        c.parent = sh(c.parent, coff);
        dst.calls.push(c);
    }
    dst.e2 = dst.e2.max(src.e2);
    dst.local_limit = dst.local_limit.max(src.local_limit);
    off
}

fn link(dag: &mut SPDag, a: NodeId, b: NodeId) {
    let an = &mut dag.nodes[a as usize];
    let s = an.succ.iter().position(|&x| x == NONE).expect("free successor slot");
    an.succ[s] = b;
    let bn = &mut dag.nodes[b as usize];
    let s = bn.pred.iter().position(|&x| x == NONE).expect("free predecessor slot");
    bn.pred[s] = a;
}

/// Sequencing: the sink of `g1` precedes the source of `g2`.
pub fn compose_series(g1: &SPDag, g2: &SPDag) -> Result<SPDag, DagError> {
    if g1.is_empty() || g2.is_empty() {
        return Err(DagError::Empty);
    }
    let mut out = SPDag::empty();
    out.name = format!("series({},{})", g1.name, g2.name);
    out.e2 = 0;
    out.local_limit = 0;
    let o1 = append(&mut out, g1);
    let o2 = append(&mut out, g2);
    link(&mut out, g1.sink + o1, g2.root + o2);
    out.root = g1.root + o1;
    out.sink = g2.sink + o2;
    out.recompute_heights();
    Ok(out)
}

/// Parallel construct: a new fork precedes both and a new join follows.
pub fn compose_parallel(g1: &SPDag, g2: &SPDag) -> Result<SPDag, DagError> {
    if g1.is_empty() || g2.is_empty() {
        return Err(DagError::Empty);
    }
    let mut out = SPDag::empty();
    out.name = format!("parallel({},{})", g1.name, g2.name);
    out.e2 = 0;
    out.local_limit = 0;
    let fork = SPNode {
        id: 0,
        kind: NodeKind::Fork,
        script_start: 0,
        script_len: 0,
        compute_ops: 1,
        op: Op::Sum,
        declared_words: 0,
        release: NONE,
        succ: [NONE; 2],
        pred: [NONE; 2],
        mate: NONE,
        ht: 0,
        tag: NodeTag::default(),
    };
    out.nodes.push(fork.clone());
    let o1 = append(&mut out, g1);
    let o2 = append(&mut out, g2);
    let j = out.nodes.len() as NodeId;
    let mut join = fork;
    join.id = j;
    join.kind = NodeKind::Join;
    join.script_start = out.refs.len() as u32;
    out.nodes.push(join);
    link(&mut out, 0, g1.root + o1);
    link(&mut out, 0, g2.root + o2);
    link(&mut out, g1.sink + o1, j);
    link(&mut out, g2.sink + o2, j);
    out.nodes[0].mate = j;
    out.nodes[j as usize].mate = 0;
    out.root = 0;
    out.sink = j;
    out.recompute_heights();
    Ok(out)
}
