use serde::{Deserialize, Serialize};

use crate::dag::SPDag;
use crate::types::*;
use crate::DagError;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeDoc {
    kind: NodeKind,
    #[serde(default)]
    script: Vec<VarRef>,
    #[serde(default = "one")]
    compute: u8,
    #[serde(default)]
    op: Op,
    #[serde(default)]
    declared_words: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    release: Option<NodeId>,
    #[serde(default)]
    succ: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mate: Option<NodeId>,
    #[serde(default)]
    role: Role,
}

fn one() -> u8 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DagDoc {
    #[serde(default)]
    name: String,
    #[serde(default = "default_e1")]
    e1: u32,
    #[serde(default = "one32")]
    e2: u32,
    #[serde(default = "default_limit")]
    local_limit: u32,
    #[serde(default)]
    arrays: Vec<ArrayDecl>,
    nodes: Vec<NodeDoc>,
}

fn default_e1() -> u32 {
    DEFAULT_E1
}
fn one32() -> u32 {
    1
}
fn default_limit() -> u32 {
    8
}

fn opt(x: NodeId) -> Option<NodeId> {
    (x != NONE).then_some(x)
}

/// Serialises structure, scripts and arrays. Tree and call metadata are
/// kernel-side annotations and are not exported.
pub fn to_json(dag: &SPDag) -> String {
    let doc = DagDoc {
        name: dag.name.clone(),
        e1: dag.e1,
        e2: dag.e2,
        local_limit: dag.local_limit,
        arrays: dag.arrays.clone(),
        nodes: dag
            .nodes()
            .iter()
            .map(|n| NodeDoc {
                kind: n.kind,
                script: dag.script(n.id).to_vec(),
                compute: n.compute_ops,
                op: n.op,
                declared_words: n.declared_words,
                release: opt(n.release),
                succ: n.succs().collect(),
                mate: opt(n.mate),
                role: n.tag.role,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("dag document serialises")
}

/// Parses a DAG document. Only id-range and degree checks are done here;
/// run [`crate::validate`] for the structural checks.
pub fn from_json(s: &str) -> Result<SPDag, DagError> {
    let doc: DagDoc = serde_json::from_str(s)?;
    let n = doc.nodes.len();
    if n == 0 {
        return Err(DagError::Empty);
    }
    if n >= NONE as usize {
        return Err(DagError::Structure("too many nodes".into()));
    }
    let in_range = |x: NodeId| (x as usize) < n;
    let mut dag = SPDag::empty();
    dag.name = doc.name;
    dag.e1 = doc.e1;
    dag.e2 = doc.e2;
    dag.local_limit = doc.local_limit;
    dag.arrays = doc.arrays;
    for (i, nd) in doc.nodes.iter().enumerate() {
        if nd.succ.len() > 2 {
            return Err(DagError::Structure(format!("node {i} has more than two successors")));
        }
        if nd.script.len() > u16::MAX as usize {
            return Err(DagError::Structure(format!("node {i} script too long")));
        }
        for &x in nd.succ.iter().chain(nd.release.iter()).chain(nd.mate.iter()) {
            if !in_range(x) {
                return Err(DagError::Structure(format!("node {i} references missing node {x}")));
            }
        }
        let start = dag.refs.len() as u32;
        dag.refs.extend_from_slice(&nd.script);
        let mut succ = [NONE; 2];
        for (k, &s) in nd.succ.iter().enumerate() {
            succ[k] = s;
        }
        dag.nodes.push(SPNode {
            id: i as NodeId,
            kind: nd.kind,
            script_start: start,
            script_len: nd.script.len() as u16,
            compute_ops: nd.compute,
            op: nd.op,
            declared_words: nd.declared_words,
            release: nd.release.unwrap_or(NONE),
            succ,
            pred: [NONE; 2],
            mate: nd.mate.unwrap_or(NONE),
            ht: 0,
            tag: NodeTag { role: nd.role, ..NodeTag::default() },
        });
    }
    for u in 0..n {
        for k in 0..2 {
            let s = dag.nodes[u].succ[k];
            if s == NONE {
                continue;
            }
            let p = &mut dag.nodes[s as usize].pred;
            match p.iter().position(|&x| x == NONE) {
                Some(slot) => p[slot] = u as NodeId,
                None => return Err(DagError::Structure(format!("node {s} has more than two predecessors"))),
            }
        }
    }
    let roots: Vec<_> = (0..n).filter(|&u| dag.nodes[u].pred_count() == 0).collect();
    let sinks: Vec<_> = (0..n).filter(|&u| dag.nodes[u].succ_count() == 0).collect();
    if roots.len() != 1 || sinks.len() != 1 {
        return Err(DagError::Structure("expected a unique source and sink".into()));
    }
    dag.root = roots[0] as NodeId;
    dag.sink = sinks[0] as NodeId;
    let h = crate::heights(&dag)?;
    for (nd, v) in dag.nodes.iter_mut().zip(h) {
        nd.ht = v;
    }
    Ok(dag)
}
