use std::collections::HashMap;

use serde::Serialize;

use crate::dag::SPDag;
use crate::types::*;
use crate::DagError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Finding {
    Empty,
    /// Edge from a higher to a lower node id.
    IdOrder { from: NodeId, to: NodeId },
    NonSeriesParallel { node: NodeId, reason: String },
    UnmatchedForkJoin { node: NodeId },
    LimitedAccess { region: Region, array: u32, offset: u32, writes: u32, bound: u32 },
    LocalDeclTooLarge { node: NodeId, words: u32, limit: u32 },
    ScriptTooLong { node: NodeId, ops: u32, bound: u32 },
    OffsetOutOfRange { node: NodeId, region: Region, array: u32, offset: u32 },
    StackRefOutOfScope { node: NodeId, decl: NodeId },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
    pub fn count<F: Fn(&Finding) -> bool>(&self, f: F) -> usize {
        self.findings.iter().filter(|x| f(x)).count()
    }
}

/// Height in edges of every node (sink = 0), by reverse topological order.
pub fn heights(dag: &SPDag) -> Result<Vec<u32>, DagError> {
    let n = dag.len();
    let mut outdeg: Vec<u32> = dag.nodes().iter().map(|x| x.succ_count() as u32).collect();
    let mut ht = vec![0u32; n];
    let mut stack: Vec<NodeId> = (0..n as NodeId).filter(|&u| outdeg[u as usize] == 0).collect();
    let mut done = 0usize;
    while let Some(v) = stack.pop() {
        done += 1;
        for p in dag.preds(v) {
            let cand = ht[v as usize] + 1;
            if cand > ht[p as usize] {
                ht[p as usize] = cand;
            }
            outdeg[p as usize] -= 1;
            if outdeg[p as usize] == 0 {
                stack.push(p);
            }
        }
    }
    if done != n {
        return Err(DagError::Cycle);
    }
    Ok(ht)
}

/// Fork/join pairing found by parsing the DAG as series-parallel.
pub(crate) struct Parse {
    pub mates: Vec<(NodeId, NodeId)>,
}

struct Frame {
    fork: NodeId,
    right_started: bool,
    left_end: NodeId,
    scope_depth: usize,
}

/// Parses from `dag.root`, reporting structure and scoping problems.
pub(crate) fn parse(dag: &SPDag, out: &mut Vec<Finding>) -> Parse {
    let n = dag.len();
    let mut parse = Parse { mates: Vec::new() };
    let mut visited = vec![false; n];
    let mut open = vec![false; n];
    let mut scopes: Vec<NodeId> = Vec::new();
    let mut frames: Vec<Frame> = Vec::new();
    let nonsp = |out: &mut Vec<Finding>, node: NodeId, reason: &str| {
        out.push(Finding::NonSeriesParallel { node, reason: reason.to_string() });
    };

    let mut cur = dag.root;
    loop {
        // Visit `cur`.
        let u = cur;
        if visited[u as usize] {
            nonsp(out, u, "node reached twice");
            break;
        }
        visited[u as usize] = true;
        let node = dag.node(u);
        for r in dag.script(u) {
            if r.region == Region::StackLocal {
                let d = r.array_id;
                if d != u && ((d as usize) >= n || !open[d as usize]) {
                    out.push(Finding::StackRefOutOfScope { node: u, decl: d });
                }
            }
        }
        if node.kind != NodeKind::Join && node.declared_words > 0 {
            open[u as usize] = true;
            scopes.push(u);
        }
        if node.release != NONE {
            let rel = node.release;
            if scopes.last() == Some(&rel) {
                scopes.pop();
                open[rel as usize] = false;
            } else if (rel as usize) < n && open[rel as usize] {
                nonsp(out, u, "segment released out of LIFO order");
                if let Some(pos) = scopes.iter().rposition(|&x| x == rel) {
                    scopes.remove(pos);
                }
                open[rel as usize] = false;
            }
        }

        if node.kind == NodeKind::Fork {
            if node.succ_count() != 2 {
                out.push(Finding::UnmatchedForkJoin { node: u });
                break;
            }
            frames.push(Frame { fork: u, right_started: false, left_end: NONE, scope_depth: scopes.len() });
            let l = node.first_succ().unwrap();
            if dag.node(l).kind == NodeKind::Join {
                nonsp(out, u, "empty branch");
                break;
            }
            cur = l;
            continue;
        }

        // Advance past a non-fork node.
        match node.succ_count() {
            0 => {
                if let Some(top) = frames.last() {
                    out.push(Finding::UnmatchedForkJoin { node: top.fork });
                }
                break;
            }
            1 => {}
            _ => {
                nonsp(out, u, "non-fork node with two successors");
                break;
            }
        }
        let next = node.first_succ().unwrap();
        if dag.node(next).kind != NodeKind::Join {
            cur = next;
            continue;
        }
        // Branch ends at join `next`.
        let Some(top) = frames.last_mut() else {
            out.push(Finding::UnmatchedForkJoin { node: next });
            break;
        };
        if scopes.len() != top.scope_depth {
            nonsp(out, u, "branch ends with an unreleased segment");
            break;
        }
        if !top.right_started {
            top.right_started = true;
            top.left_end = next;
            let r = dag.node(top.fork).second_succ().unwrap();
            if dag.node(r).kind == NodeKind::Join {
                nonsp(out, top.fork, "empty branch");
                break;
            }
            cur = r;
            continue;
        }
        if top.left_end != next || dag.node(next).pred_count() != 2 {
            out.push(Finding::UnmatchedForkJoin { node: top.fork });
            break;
        }
        let f = frames.pop().unwrap();
        parse.mates.push((f.fork, next));
        cur = next;
    }
    if visited.iter().any(|v| !v) && out.is_empty() {
        let u = visited.iter().position(|v| !v).unwrap() as NodeId;
        nonsp(out, u, "node unreachable from root");
    }
    parse
}

/// Structural, limited-access and scoping checks.
pub fn validate(dag: &SPDag) -> ValidationReport {
    let mut f = Vec::new();
    if dag.is_empty() {
        return ValidationReport { findings: vec![Finding::Empty] };
    }
    let n = dag.len();
    let roots: Vec<_> = dag.nodes().iter().filter(|x| x.pred_count() == 0).map(|x| x.id).collect();
    let sinks: Vec<_> = dag.nodes().iter().filter(|x| x.succ_count() == 0).map(|x| x.id).collect();
    if roots != [dag.root] || sinks != [dag.sink] {
        f.push(Finding::NonSeriesParallel { node: dag.root, reason: "expected a unique source and sink".into() });
    }
    for node in dag.nodes() {
        for s in node.succs() {
            if s <= node.id {
                f.push(Finding::IdOrder { from: node.id, to: s });
            }
        }
        if node.kind == NodeKind::Join && node.pred_count() != 2 {
            f.push(Finding::UnmatchedForkJoin { node: node.id });
        }
        if node.kind == NodeKind::Fork && node.succ_count() != 2 {
            f.push(Finding::UnmatchedForkJoin { node: node.id });
        }
        if node.ops() > dag.e1 {
            f.push(Finding::ScriptTooLong { node: node.id, ops: node.ops(), bound: dag.e1 });
        }
        let limit = if node.tag.role == Role::CallEntry && (node.tag.call as usize) < dag.calls.len() {
            dag.calls[node.tag.call as usize].local_words
        } else {
            dag.local_limit
        };
        if node.declared_words > limit {
            f.push(Finding::LocalDeclTooLarge { node: node.id, words: node.declared_words, limit });
        }
    }
    if f.iter().any(|x| matches!(x, Finding::IdOrder { .. } | Finding::NonSeriesParallel { .. })) {
        return ValidationReport { findings: f };
    }
    let p = parse(dag, &mut f);
    for (fork, join) in p.mates {
        if dag.node(fork).mate != join || dag.node(join).mate != fork {
            f.push(Finding::UnmatchedForkJoin { node: fork });
        }
    }

    let mut writes: HashMap<(Region, u32, u32), u32> = HashMap::new();
    for u in 0..n as NodeId {
        for r in dag.script(u) {
            let ok = match r.region {
                Region::GlobalArray => dag.arrays.get(r.array_id as usize).is_some_and(|a| r.offset < a.words),
                Region::StackLocal => {
                    (r.array_id as usize) < n && r.offset < dag.node(r.array_id).declared_words
                }
            };
            if !ok {
                f.push(Finding::OffsetOutOfRange { node: u, region: r.region, array: r.array_id, offset: r.offset });
            }
            if r.is_write() {
                *writes.entry(r.var_key()).or_default() += 1;
            }
        }
    }
    let mut over: Vec<_> = writes.into_iter().filter(|&(_, c)| c > dag.e2).collect();
    over.sort_unstable();
    for ((region, array, offset), writes) in over {
        f.push(Finding::LimitedAccess { region, array, offset, writes, bound: dag.e2 });
    }
    ValidationReport { findings: f }
}
