//! Structural audits of emitted DAGs beyond `sp_dag::validate`.

use sp_dag::*;

#[derive(Debug, Clone, PartialEq)]
pub enum AuditFinding {
    /// Leaf `node` (the `index`-th in inorder) wrote `got` instead of the
    /// expected word range starting at `want`.
    IrregularWrite { tree: u32, node: NodeId, index: u32, want: u32, got: Vec<u32> },
    /// Tree leaves left words of the output unwritten.
    Untiled { tree: u32, written: u32, words: u32 },
    LocalWriteTarget { node: NodeId, decl: NodeId },
    Unbalanced { tree: u32, node: NodeId, size: usize, lo: f64, hi: f64 },
}

/// Checks that the leaves of `tree`, taken in inorder, write consecutive
/// runs of `stride` words of `array` covering it exactly.
pub fn regular_pattern(dag: &SPDag, tree: u32, array: ArrayId, stride: u32) -> Vec<AuditFinding> {
    let t = &dag.trees[tree as usize];
    let mut out = Vec::new();
    let mut next = 0u32;
    let mut index = 0u32;
    for u in t.first..=t.last {
        let n = dag.node(u);
        if n.tag.instance != tree || n.tag.role != Role::Leaf {
            continue;
        }
        let got: Vec<u32> = dag
            .script(u)
            .iter()
            .filter(|r| r.is_write() && r.region == Region::GlobalArray && r.array_id == array)
            .map(|r| r.offset)
            .collect();
        let want: Vec<u32> = (next..next + stride).collect();
        if got != want {
            out.push(AuditFinding::IrregularWrite { tree, node: u, index, want: next, got });
        }
        next += stride;
        index += 1;
    }
    let words = dag.arrays[array as usize].words;
    if next != words && out.is_empty() {
        out.push(AuditFinding::Untiled { tree, written: next, words });
    }
    out
}

/// Every stack write by `v` must target `v`'s own segment, its mate's, or
/// the segment of the fork whose join follows `v`. Segments declared by a
/// call entry may be written anywhere inside that call.
pub fn local_access(dag: &SPDag) -> Vec<AuditFinding> {
    let mut out = Vec::new();
    for n in dag.nodes() {
        let v = n.id;
        for r in dag.script(v) {
            if !r.is_write() || r.region != Region::StackLocal {
                continue;
            }
            let d = r.array_id;
            let dn = dag.node(d);
            let ok = if dn.tag.role == Role::CallEntry {
                let c = &dag.calls[dn.tag.call as usize];
                v > c.entry && v < c.exit
            } else {
                d == v || d == n.mate || (dn.mate != NONE && n.first_succ() == Some(dn.mate))
            };
            if !ok {
                out.push(AuditFinding::LocalWriteTarget { node: v, decl: d });
            }
        }
    }
    out
}

/// Subtree task sizes at depth `i` of every BP tree lie within
/// `[c1 |t| alpha^i, c2 |t| alpha^i]`, where `|t|` is the root's size.
pub fn bp_balance(dag: &SPDag, c1: f64, c2: f64, alpha: f64) -> Vec<AuditFinding> {
    let mut out = Vec::new();
    for (ti, t) in dag.trees.iter().enumerate() {
        if t.kind != TreeKind::Bp || t.leaves < 2 {
            continue;
        }
        let root = dag.branch_task_size(t.root, t.up_root) as f64;
        for u in t.first..=t.last {
            let n = dag.node(u);
            if n.tag.instance != ti as u32 || !matches!(n.tag.role, Role::Down | Role::Leaf) {
                continue;
            }
            let size = if n.kind == NodeKind::Fork {
                dag.branch_task_size(u, n.mate)
            } else {
                dag.task_size(u)
            };
            let scale = alpha.powi(n.tag.depth as i32);
            let (lo, hi) = (c1 * root * scale, c2 * root * scale);
            if (size as f64) < lo - 1e-9 || (size as f64) > hi + 1e-9 {
                out.push(AuditFinding::Unbalanced { tree: ti as u32, node: u, size, lo, hi });
            }
        }
    }
    out
}
