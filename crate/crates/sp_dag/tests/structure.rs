use proptest::prelude::*;
use sp_dag::*;

fn longest_path_vertices(dag: &SPDag, u: NodeId) -> u32 {
    // Exhaustive enumeration; only used on small graphs.
    1 + dag.succs(u).map(|v| longest_path_vertices(dag, v)).max().unwrap_or(0)
}

fn nested(d: u32) -> SPDag {
    let mut g = SPDag::single();
    for _ in 0..d {
        g = compose_parallel(&g, &SPDag::single()).unwrap();
    }
    g
}

#[test]
fn series_of_singles_is_chain() {
    let g = compose_series(&SPDag::single(), &SPDag::single()).unwrap();
    assert_eq!(g.len(), 2);
    assert_eq!(g.t_inf(), 2);
    assert!(validate(&g).is_ok());
}

#[test]
fn series_rejects_empty() {
    assert!(matches!(compose_series(&SPDag::empty(), &SPDag::single()), Err(DagError::Empty)));
    assert!(matches!(compose_parallel(&SPDag::single(), &SPDag::empty()), Err(DagError::Empty)));
}

#[test]
fn chains_concatenate() {
    let g = compose_series(&SPDag::chain(3), &SPDag::chain(4)).unwrap();
    assert_eq!(g.t_inf(), 7);
}

#[test]
fn diamond() {
    let g = compose_parallel(&SPDag::single(), &SPDag::single()).unwrap();
    assert_eq!(g.t_inf(), 3);
    assert_eq!(g.ht(g.root), 2);
    assert_eq!(g.ht(g.sink), 0);
    for v in g.succs(g.root) {
        assert_eq!(g.ht(v), 1);
    }
    assert!(validate(&g).is_ok());
}

#[test]
fn parallel_chains() {
    let g = compose_parallel(&SPDag::chain(2), &SPDag::chain(5)).unwrap();
    assert_eq!(g.t_inf(), 7);
}

#[test]
fn nesting_depth() {
    for d in 0..12 {
        let g = nested(d);
        assert_eq!(g.t_inf(), 2 * d + 1, "d={d}");
        assert!(validate(&g).is_ok());
    }
}

fn write_thrice(e2: u32) -> SPDag {
    let mut b = DagBuilder::new("w");
    b.set_e2(e2);
    let a = b.global_array("a", 4);
    let w = [VarRef::write_global(a, 1)];
    let x = b.serial(&w, 1, NodeTag::default());
    let y = b.serial(&w, 1, NodeTag::default());
    let z = b.serial(&w, 1, NodeTag::default());
    let f = b.seq(x, y);
    let f = b.seq(f, z);
    b.finish(f)
}

#[test]
fn limited_access_violation() {
    let r = validate(&write_thrice(2));
    assert_eq!(r.count(|f| matches!(f, Finding::LimitedAccess { writes: 3, .. })), 1);
    assert!(validate(&write_thrice(3)).is_ok());
}

#[test]
fn long_script_is_split() {
    let mut b = DagBuilder::new("long");
    let a = b.global_array("a", 64);
    let s: Vec<_> = (0..30).map(|i| VarRef::read_global(a, i)).collect();
    let f = b.serial(&s, 1, NodeTag::default());
    let g = b.finish(f);
    assert!(g.len() > 1);
    assert_eq!(g.access_count(), 30);
    assert!(g.nodes().iter().all(|n| n.ops() <= g.e1 && n.compute_ops >= 1));
    assert!(validate(&g).is_ok());
}

#[test]
fn task_size_counts_distinct_words() {
    let mut b = DagBuilder::new("ts");
    let a = b.global_array("a", 8);
    let fork = b.add(NodeKind::Fork, &[], 1, NodeTag::default());
    let l = b.leaf(&[VarRef::read_global(a, 0), VarRef::read_global(a, 1)], 1, NodeTag::default());
    let r = b.leaf(&[VarRef::read_global(a, 1), VarRef::write_global(a, 2)], 1, NodeTag::default());
    let join = b.add(NodeKind::Join, &[], 1, NodeTag::default());
    let f = b.connect_fork(fork, l, r, join);
    let g = b.finish(f);
    assert_eq!(g.task_size(g.root), 3);
    assert_eq!(g.task_size(l.src), 2);
    assert_eq!(g.branch_task_size(r.src, join), 2);
}

#[test]
fn json_round_trip() {
    let g = compose_parallel(&write_thrice(3), &SPDag::chain(3)).unwrap();
    let s = to_json(&g);
    let h = from_json(&s).unwrap();
    assert_eq!(h.len(), g.len());
    assert_eq!(h.t_inf(), g.t_inf());
    assert_eq!(to_json(&h), s);
    assert!(validate(&h).is_ok());
}

#[test]
fn json_rejects_garbage() {
    assert!(from_json("").is_err());
    assert!(from_json("{\"nodes\":[]}").is_err());
    assert!(from_json("{\"nodes\":[{\"kind\":\"Serial\",\"succ\":[5]}]}").is_err());
    assert!(from_json("{\"nodes\":[{\"kind\":\"Serial\",\"succ\":[0]}]}").is_err());
}

// Mutation corpus: each document carries exactly one violation class.
fn doc(nodes: &str) -> SPDag {
    from_json(&format!("{{\"arrays\":[{{\"name\":\"a\",\"words\":4}}],\"nodes\":[{nodes}]}}")).unwrap()
}

#[test]
fn mutated_cross_edge() {
    // 0 forks to (1 -> 2) and (3); 1 also feeds 3.
    let g = doc(
        r#"{"kind":"Fork","succ":[1,3],"mate":4},
           {"kind":"Serial","succ":[2,3]},
           {"kind":"Serial","succ":[4]},
           {"kind":"Serial","succ":[4]},
           {"kind":"Join","mate":0}"#,
    );
    let r = validate(&g);
    assert!(r.findings.iter().any(|f| matches!(f, Finding::NonSeriesParallel { .. })), "{r:?}");
}

#[test]
fn mutated_unmatched_join() {
    // A join with one predecessor.
    let g = doc(r#"{"kind":"Serial","succ":[1]},{"kind":"Join"}"#);
    let r = validate(&g);
    assert!(r.findings.iter().any(|f| matches!(f, Finding::UnmatchedForkJoin { .. })), "{r:?}");
}

#[test]
fn mutated_wrong_mate() {
    let g = doc(
        r#"{"kind":"Fork","succ":[1,2],"mate":1},
           {"kind":"Serial","succ":[3]},
           {"kind":"Serial","succ":[3]},
           {"kind":"Join","mate":0}"#,
    );
    let r = validate(&g);
    assert!(r.findings.iter().any(|f| matches!(f, Finding::UnmatchedForkJoin { .. })), "{r:?}");
}

#[test]
fn mutated_local_too_large() {
    let g = doc(r#"{"kind":"Serial","declared_words":100,"succ":[1]},{"kind":"Serial","release":0}"#);
    let r = validate(&g);
    assert_eq!(r.findings.len(), 1, "{r:?}");
    assert!(matches!(r.findings[0], Finding::LocalDeclTooLarge { words: 100, .. }));
}

#[test]
fn mutated_script_too_long() {
    let refs: Vec<String> = (0..9)
        .map(|i| format!(r#"{{"region":"GlobalArray","array_id":0,"offset":{},"mode":"Read"}}"#, i % 4))
        .collect();
    let g = doc(&format!(r#"{{"kind":"Serial","script":[{}]}}"#, refs.join(",")));
    let r = validate(&g);
    assert_eq!(r.findings.len(), 1, "{r:?}");
    assert!(matches!(r.findings[0], Finding::ScriptTooLong { ops: 10, .. }));
}

#[test]
fn mutated_offset_out_of_range() {
    let g = doc(r#"{"kind":"Serial","script":[{"region":"GlobalArray","array_id":0,"offset":4,"mode":"Read"}]}"#);
    let r = validate(&g);
    assert_eq!(r.findings.len(), 1, "{r:?}");
    assert!(matches!(r.findings[0], Finding::OffsetOutOfRange { offset: 4, .. }));
}

#[test]
fn mutated_stack_ref_out_of_scope() {
    // Node 2 is on the sibling branch of the declaring node 1.
    let g = doc(
        r#"{"kind":"Fork","succ":[1,3],"mate":4},
           {"kind":"Serial","declared_words":2,"succ":[2]},
           {"kind":"Serial","release":1,"succ":[4]},
           {"kind":"Serial","succ":[4],"script":[{"region":"StackLocal","array_id":1,"offset":0,"mode":"Read"}]},
           {"kind":"Join","mate":0}"#,
    );
    let r = validate(&g);
    assert_eq!(r.findings.len(), 1, "{r:?}");
    assert!(matches!(r.findings[0], Finding::StackRefOutOfScope { node: 3, decl: 1 }));
}

#[test]
fn mutated_non_lifo_release() {
    let g = doc(
        r#"{"kind":"Serial","declared_words":1,"succ":[1]},
           {"kind":"Serial","declared_words":1,"succ":[2]},
           {"kind":"Serial","release":0,"succ":[3]},
           {"kind":"Serial","release":1}"#,
    );
    let r = validate(&g);
    assert!(r.findings.iter().any(|f| matches!(f, Finding::NonSeriesParallel { .. })), "{r:?}");
}

#[test]
fn cycle_is_rejected() {
    let s = r#"{"nodes":[{"kind":"Serial","succ":[1]},{"kind":"Serial","succ":[2]},{"kind":"Serial","succ":[1,3]},{"kind":"Serial"}]}"#;
    assert!(from_json(s).is_err());
}

#[derive(Debug, Clone)]
enum Shape {
    Leaf(usize),
    Ser(Box<Shape>, Box<Shape>),
    Par(Box<Shape>, Box<Shape>),
}

fn shape() -> impl Strategy<Value = Shape> {
    let leaf = (1usize..4).prop_map(Shape::Leaf);
    leaf.prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Shape::Ser(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Shape::Par(Box::new(a), Box::new(b))),
        ]
    })
}

fn build(s: &Shape) -> SPDag {
    match s {
        Shape::Leaf(n) => SPDag::chain(*n),
        Shape::Ser(a, b) => compose_series(&build(a), &build(b)).unwrap(),
        Shape::Par(a, b) => compose_parallel(&build(a), &build(b)).unwrap(),
    }
}

fn t_inf_of(s: &Shape) -> u32 {
    match s {
        Shape::Leaf(n) => *n as u32,
        Shape::Ser(a, b) => t_inf_of(a) + t_inf_of(b),
        Shape::Par(a, b) => 2 + t_inf_of(a).max(t_inf_of(b)),
    }
}

proptest! {
    #[test]
    fn heights_match_brute_force(s in shape()) {
        let g = build(&s);
        prop_assert!(validate(&g).is_ok(), "{:?}", validate(&g));
        prop_assert_eq!(g.t_inf(), longest_path_vertices(&g, g.root));
        prop_assert_eq!(g.t_inf(), t_inf_of(&s));
        prop_assert_eq!(g.ht(g.sink), 0);
        for u in g.nodes() {
            for v in u.succs() {
                prop_assert!(u.ht >= g.ht(v) + 1);
            }
            prop_assert_eq!(u.ht + 1, longest_path_vertices(&g, u.id));
        }
    }

    #[test]
    fn json_preserves_structure(s in shape()) {
        let g = build(&s);
        let h = from_json(&to_json(&g)).unwrap();
        prop_assert_eq!(h.t_inf(), g.t_inf());
        prop_assert!(validate(&h).is_ok());
    }
}
