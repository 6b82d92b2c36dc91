use std::collections::{HashMap, HashSet};

use kernels::KernelSpec;
use serde::Serialize;
use sp_dag::{NodeId, NodeKind, Region, SPDag, TreeKind, VarRef, NONE};

use crate::bounds::y_bound;

/// A conflict subtree together with its paired subtree: the id range of
/// one fork's subdag inside a BP tree, or a single leaf.
#[derive(Debug, Clone, Serialize)]
pub struct Group {
    pub root: NodeId,
    pub end: NodeId,
    pub tree: u32,
    /// Joins and leaves.
    pub up_size: u32,
    /// Blocks of array words the group can touch, at worst alignment.
    pub blocks: u32,
}

/// Checks on the initial values.
#[derive(Debug, Clone, Default, Serialize)]
pub struct InitBounds {
    pub max_group_size: u32,
    pub group_size_bound: f64,
    pub max_l2: i64,
    pub l2_bound: f64,
    /// Largest `ℓ3^BP / (e·(H+1))` over BP tree nodes.
    pub max_l3_ratio: f64,
    pub l3_ratio_bound: f64,
}

impl InitBounds {
    pub fn group_size_ok(&self) -> bool {
        self.max_group_size as f64 <= self.group_size_bound
    }
    pub fn l2_ok(&self) -> bool {
        self.max_l2 as f64 <= self.l2_bound
    }
    pub fn l3_ok(&self) -> bool {
        self.max_l3_ratio <= self.l3_ratio_bound
    }
}

/// Ratio bound on `ℓ3^BP / (e·(H+1))` implied by the initial values.
pub const L3_RATIO_BOUND: f64 = 5.0;

/// Static per-DAG tables for the refined levels.
pub struct Structure {
    pub e: i64,
    pub block: u64,
    /// Conflict group of each node, or `NONE`.
    pub group: Vec<u32>,
    pub groups: Vec<Group>,
    /// Initial ℓ2^BP, ℓ3^BP and ℓ4^B.
    pub init: [Vec<i64>; 3],
    /// Composed terms added on top of the BP components.
    pub delta: [Vec<i64>; 3],
    /// Contribution to ℓ4 originating at each call entry, by call id.
    pub call_y: Vec<i64>,
    /// Array writes by group nodes, per global array.
    pub global_writes: Vec<Vec<(u32, u32)>>,
    /// Writes by group nodes into locals declared by call entries.
    pub local_writes: HashMap<NodeId, Vec<(u32, u32)>>,
    pub bounds: InitBounds,
}

pub fn in_bp_tree(dag: &SPDag, u: NodeId) -> Option<u32> {
    let i = dag.node(u).tag.instance;
    (i != NONE && dag.trees[i as usize].kind == TreeKind::Bp).then_some(i)
}

/// Accesses that behave as array accesses for the enclosing BP tree:
/// globals, and locals declared by anything other than a fork.
pub fn is_array_ref(dag: &SPDag, r: &VarRef) -> bool {
    r.region == Region::GlobalArray || dag.node(r.array_id).kind != NodeKind::Fork
}

/// Most blocks `offs` can span over all alignments of the array base.
fn worst_blocks(offs: &[u32], block: u32) -> u32 {
    (0..block)
        .map(|shift| {
            let mut bs: Vec<u32> = offs.iter().map(|&o| (o + shift) / block).collect();
            bs.sort_unstable();
            bs.dedup();
            bs.len() as u32
        })
        .max()
        .unwrap_or(0)
}

impl Structure {
    pub fn new(dag: &SPDag, spec: &KernelSpec, block: u32, no_delta: bool) -> Self {
        let n = dag.len();
        let e = dag.e1.max(dag.e2) as i64;
        let bl = block as i64;
        let ratio = spec.c2 / spec.c1;
        let mut group = vec![NONE; n];
        let mut groups = Vec::new();
        let mut init2 = vec![0i64; n];
        let mut init3 = vec![0i64; n];
        let mut bounds = InitBounds {
            group_size_bound: 4.0 * ratio * (block as f64 - 2.0) + 3.0,
            l2_bound: 4.0 * ratio * (e * e * bl) as f64,
            l3_ratio_bound: L3_RATIO_BOUND,
            ..Default::default()
        };
        let non_conflict_down = (4.0 * ratio * (e * e * bl) as f64).round() as i64;
        let mut global_writes = vec![Vec::new(); dag.arrays.len()];
        let mut local_writes: HashMap<NodeId, Vec<(u32, u32)>> = HashMap::new();
        let mut leaves = vec![0u32; n];
        let mut dh = vec![0u32; n];

        for (ti, t) in dag.trees.iter().enumerate() {
            if t.kind != TreeKind::Bp {
                continue;
            }
            let ti = ti as u32;
            let ids = || (t.first..=t.last).filter(|&u| dag.node(u).tag.instance == ti);
            for u in ids().collect::<Vec<_>>().into_iter().rev() {
                let nd = dag.node(u);
                match nd.kind {
                    NodeKind::Fork => {
                        let (l, r) = (nd.first_succ().unwrap(), nd.second_succ().unwrap());
                        leaves[u as usize] = leaves[l as usize] + leaves[r as usize];
                        dh[u as usize] = 1 + dh[l as usize].max(dh[r as usize]);
                    }
                    NodeKind::Join => {}
                    _ => leaves[u as usize] = 1,
                }
            }
            for u in ids() {
                if dag.node(u).kind == NodeKind::Join {
                    leaves[u as usize] = leaves[dag.node(u).mate as usize];
                }
            }
            let depth = |u: NodeId| dag.node(u).tag.depth as usize;
            let max_depth = ids().map(depth).max().unwrap_or(0);
            let mut min_size = vec![u32::MAX; max_depth + 1];
            for u in ids() {
                if dag.node(u).kind != NodeKind::Join {
                    let s = 2 * leaves[u as usize] - 1;
                    min_size[depth(u)] = min_size[depth(u)].min(s);
                }
            }
            let d = (0..=max_depth)
                .rev()
                .find(|&k| min_size[k] as i64 >= bl - 1)
                .map_or(0, |k| k.saturating_sub(1));
            for u in ids() {
                let nd = dag.node(u);
                let top = match nd.kind {
                    NodeKind::Fork => depth(u) == d,
                    NodeKind::Join => false,
                    _ => depth(u) <= d,
                };
                if !top {
                    continue;
                }
                let end = if nd.kind == NodeKind::Fork { nd.mate } else { u };
                let g = groups.len() as u32;
                let mut offs: HashMap<(Region, u32), Vec<u32>> = HashMap::new();
                for v in (u..=end).filter(|&v| dag.node(v).tag.instance == ti) {
                    group[v as usize] = g;
                    for r in dag.script(v) {
                        if !is_array_ref(dag, r) {
                            continue;
                        }
                        offs.entry((r.region, r.array_id)).or_default().push(r.offset);
                        if r.is_write() {
                            match r.region {
                                Region::GlobalArray => global_writes[r.array_id as usize].push((r.offset, g)),
                                Region::StackLocal => local_writes.entry(r.array_id).or_default().push((r.offset, g)),
                            }
                        }
                    }
                }
                let blocks = offs.values().map(|o| worst_blocks(o, block)).sum();
                let up_size = 2 * leaves[u as usize] - 1;
                bounds.max_group_size = bounds.max_group_size.max(up_size);
                groups.push(Group { root: u, end, tree: ti, up_size, blocks });
            }
            let h = t.height as i64;
            let leaf_max = ids()
                .filter(|&u| matches!(dag.node(u).kind, NodeKind::Leaf | NodeKind::Serial))
                .map(|u| 2 * e * (depth(u) as i64 + 1))
                .max()
                .unwrap_or(2 * e);
            for u in ids() {
                let nd = dag.node(u);
                let g = group[u as usize];
                init2[u as usize] = if g != NONE {
                    e * bl * groups[g as usize].blocks as i64
                } else if nd.kind == NodeKind::Fork {
                    non_conflict_down
                } else {
                    0
                };
                init3[u as usize] = match nd.kind {
                    NodeKind::Fork => leaf_max + e * h + e * (dh[u as usize] as i64 - 1),
                    _ => 2 * e * (depth(u) as i64 + 1),
                };
                bounds.max_l2 = bounds.max_l2.max(init2[u as usize]);
                let r = init3[u as usize] as f64 / (e * (h + 1)) as f64;
                bounds.max_l3_ratio = bounds.max_l3_ratio.max(r);
            }
        }
        for w in &mut global_writes {
            w.sort_unstable();
            w.dedup();
        }

        // ℓ4^B: allowance of every call containing a node, plus the
        // allowance of its BP tree.
        let call_y: Vec<i64> =
            dag.calls.iter().map(|c| y_bound(c.size as f64, block as f64, spec).ceil() as i64).collect();
        let tree_y: Vec<i64> = dag
            .trees
            .iter()
            .map(|t| {
                if t.kind != TreeKind::Bp {
                    return 0;
                }
                let mut words = HashSet::new();
                for u in t.first..=t.last {
                    for r in dag.script(u) {
                        words.insert(r.var_key());
                    }
                    if words.len() >= block as usize {
                        break;
                    }
                }
                e * (words.len() as i64).min(bl)
            })
            .collect();
        let mut call_cum = vec![0i64; dag.calls.len()];
        for (i, c) in dag.calls.iter().enumerate() {
            // Parents are created before their children.
            call_cum[i] = call_y[i] + if c.parent == NONE { 0 } else { call_cum[c.parent as usize] };
        }
        let mut init4 = vec![0i64; n];
        let mut orig4 = vec![0i64; n];
        for u in 0..n as NodeId {
            let tag = dag.node(u).tag;
            let mut v = if tag.call == NONE { 0 } else { call_cum[tag.call as usize] };
            if let Some(ti) = in_bp_tree(dag, u) {
                v += tree_y[ti as usize];
                if dag.trees[ti as usize].root == u {
                    orig4[u as usize] += tree_y[ti as usize];
                }
            }
            init4[u as usize] = v;
        }
        for (i, c) in dag.calls.iter().enumerate() {
            if c.entry != NONE {
                orig4[c.entry as usize] += call_y[i];
            }
        }

        let mut delta = [vec![0i64; n], vec![0i64; n], vec![0i64; n]];
        if !no_delta {
            let mut order: Vec<NodeId> = (0..n as NodeId).collect();
            order.sort_unstable_by_key(|&u| dag.ht(u));
            let inits = [&init2, &init3];
            for &x in &order {
                let ix = dag.node(x).tag.instance;
                for y in dag.succs(x) {
                    let same = ix != NONE && dag.node(y).tag.instance == ix;
                    for i in 0..2 {
                        let w = if same { 0 } else { inits[i][y as usize] };
                        delta[i][x as usize] = delta[i][x as usize].max(w + delta[i][y as usize]);
                    }
                    delta[2][x as usize] = delta[2][x as usize].max(orig4[y as usize] + delta[2][y as usize]);
                }
            }
        }
        Structure {
            e,
            block: block as u64,
            group,
            groups,
            init: [init2, init3, init4],
            delta,
            call_y,
            global_writes,
            local_writes,
            bounds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_alignment() {
        assert_eq!(worst_blocks(&[0, 1, 2, 3], 4), 2);
        assert_eq!(worst_blocks(&[0], 4), 1);
        assert_eq!(worst_blocks(&[0, 4], 4), 2);
        assert_eq!(worst_blocks(&[], 4), 0);
    }
}
