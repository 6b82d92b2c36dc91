use proptest::prelude::*;
use rws_sched::*;
use sp_dag::*;

/// Sum of `n` input words by a balanced fork tree whose forks declare two
/// slots that the children write and the join adds.
fn sum_tree(n: u32) -> SPDag {
    let mut b = DagBuilder::new("sum");
    let x = b.global_array("x", n);
    let out = b.global_array("out", 1);
    fn rec(b: &mut DagBuilder, x: ArrayId, lo: u32, hi: u32, dst: VarRef) -> Frag {
        if hi - lo == 1 {
            let u = b.add(NodeKind::Leaf, &[VarRef::read_global(x, lo), dst], 1, NodeTag::default());
            return Frag { src: u, sink: u };
        }
        let f = b.add(NodeKind::Fork, &[], 1, NodeTag::default());
        let mid = lo + (hi - lo) / 2;
        let l = rec(b, x, lo, mid, VarRef::write_local(f, 0));
        let r = rec(b, x, mid, hi, VarRef::write_local(f, 1));
        let j = b.add(
            NodeKind::Join,
            &[VarRef::read_local(f, 0), VarRef::read_local(f, 1), dst],
            1,
            NodeTag::default(),
        );
        let fr = b.connect_fork(f, l, r, j);
        b.declare(f, 2);
        fr
    }
    let f = rec(&mut b, x, 0, n, VarRef::write_global(out, 0));
    b.finish(f)
}

fn inputs(n: u32) -> Vec<Vec<u32>> {
    vec![(0..n).map(|i| i * 7 % 13 + 1).collect()]
}

fn expected(n: u32) -> u32 {
    inputs(n)[0].iter().sum()
}

fn cfg(p: usize, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(p, 64, 4, 2, 4);
    c.seed = seed;
    c
}

#[test]
fn sum_is_correct_for_all_p() {
    let d = sum_tree(64);
    for p in [1, 2, 4, 8] {
        for seed in 0..5 {
            let r = run(&d, &cfg(p, seed), &inputs(64)).unwrap();
            assert_eq!(r.outputs[1][0], expected(64), "p={p} seed={seed}");
            assert_eq!(r.metrics.w, d.len() as u64);
        }
    }
}

#[test]
fn single_processor_has_no_steals_or_block_misses() {
    let d = sum_tree(128);
    let r = run(&d, &cfg(1, 0), &inputs(128)).unwrap();
    assert_eq!(r.metrics.s, 0);
    assert_eq!(r.metrics.failed_steals, 0);
    assert_eq!(r.metrics.block_misses, 0);
    assert_eq!(r.metrics.usurpations, 0);
    assert_eq!(r.tasks.len(), 1);
    let ops: u64 = d.nodes().iter().map(|n| n.ops() as u64).sum();
    assert_eq!(r.metrics.ops, ops);
    assert_eq!(r.metrics.makespan, ops + r.metrics.q * 2);
}

#[test]
fn deterministic_given_seed() {
    let d = sum_tree(64);
    let a = run(&d, &cfg(4, 11), &inputs(64)).unwrap();
    let b = run(&d, &cfg(4, 11), &inputs(64)).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.moves.len(), b.moves.len());
    assert!(a.moves.iter().zip(&b.moves).all(|(x, y)| (x.t, x.block, x.to) == (y.t, y.block, y.to)));
    let c = run(&d, &cfg(4, 12), &inputs(64)).unwrap();
    assert_ne!(a.metrics, c.metrics);
}

#[test]
fn steal_time_within_cost_model() {
    let d = sum_tree(256);
    for seed in 0..10 {
        let c = cfg(8, seed);
        let r = run(&d, &c, &inputs(256)).unwrap();
        let m = &r.metrics;
        assert!(m.steal_time <= steal_time_bound(&c, &r));
        assert!(m.steal_time >= m.s * c.s + m.failed_steals * c.s_fail);
        assert_eq!(r.tasks.len() as u64, m.s + 1);
    }
}

#[test]
fn structural_checks_hold() {
    let d = sum_tree(256);
    let mut usurp = 0;
    for seed in 0..30 {
        let r = run(&d, &cfg(4, seed), &inputs(256)).unwrap();
        assert_eq!(r.checks.deque_height_violations, 0);
        assert_eq!(r.checks.observation1_violations, 0);
        usurp += r.metrics.usurpations;
        for t in &r.tasks[1..] {
            let f = d.preds(t.root).next().unwrap();
            assert!(r.tasks[t.parent as usize].stolen_forks.contains(&f));
            assert_eq!(t.join, d.node(f).mate);
            assert!(t.start <= t.end);
        }
    }
    assert!(usurp > 0, "no usurpation in 30 runs");
}

#[test]
fn config_rejections() {
    let d = SPDag::single();
    let bad = [
        SimConfig { p: 0, ..cfg(1, 0) },
        SimConfig { p: 65, ..cfg(1, 0) },
        SimConfig { s: 1, ..cfg(2, 0) },
        SimConfig { s: 5, ..cfg(2, 0) },
        SimConfig { m: 2, ..cfg(2, 0) },
        SimConfig { b: 0, ..cfg(2, 0) },
        SimConfig { a2: 0, ..cfg(2, 0) },
        SimConfig { s_fail: 0, ..cfg(2, 0) },
    ];
    for c in bad {
        assert!(matches!(run(&d, &c, &[]), Err(SimError::Config(_))), "{c:?}");
    }
    assert!(matches!(run(&SPDag::empty(), &cfg(1, 0), &[]), Err(SimError::EmptyDag)));
}

#[test]
fn chain_runs_without_parallelism() {
    let d = SPDag::chain(20);
    let r = run(&d, &cfg(4, 0), &[]).unwrap();
    assert_eq!(r.metrics.w, 20);
    assert_eq!(r.metrics.s, 0);
    assert!(r.metrics.failed_steals > 0);
}

#[test]
fn trace_is_jsonl() {
    let d = sum_tree(8);
    let mut c = cfg(2, 1);
    c.trace = true;
    let r = run(&d, &c, &inputs(8)).unwrap();
    let mut buf = Vec::new();
    r.trace.write_jsonl(&mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    assert_eq!(s.lines().count(), r.trace.events.len());
    for l in s.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v.get("kind").is_some());
    }
}

#[test]
fn block_delay_analysis_counts_only_stack_blocks() {
    let d = sum_tree(256);
    let c = cfg(8, 3);
    let r = run(&d, &c, &inputs(256)).unwrap();
    let delays = stack_block_delays(&d, &c, &r);
    for x in &delays {
        let tk = &r.tasks[x.task as usize];
        assert!(tk.stack_blocks(c.block).any(|b| b == x.block));
    }
}

/// Constant potential split into queued and executing halves.
struct FixedPhi(f64, u64);
impl Observer for FixedPhi {
    fn phi(&mut self, _t: u64) -> Option<PhiSplit> {
        Some(PhiSplit { log_queued: self.0, log_exec: 0.0 })
    }
    fn phase_len(&self) -> Option<u64> {
        Some(self.1)
    }
}

#[test]
fn phases_tile_the_run() {
    let d = sum_tree(128);
    for lq in [-1.0, 1.0] {
        let r = run_observed(&d, &cfg(4, 2), &inputs(128), &mut FixedPhi(lq, 10)).unwrap();
        assert!(!r.phases.is_empty());
        for w in r.phases.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert!(r.phases.last().unwrap().truncated);
        assert_eq!(r.phases[0].start, 0);
        let kind = if lq >= 0.0 { PhaseKind::Steal } else { PhaseKind::Compute };
        assert!(r.phases.iter().all(|p| p.kind == kind));
        if kind == PhaseKind::Compute {
            assert!(r.phases.iter().filter(|p| !p.truncated).all(|p| p.end - p.start == 10));
        }
    }
}

#[test]
fn weighted_path() {
    let d = SPDag::chain(5);
    assert_eq!(longest_weighted_path(&d, &[1, 2, 3, 4, 5]), 15.0);
    let d = sum_tree(2);
    // fork, leaf, leaf, join
    assert_eq!(longest_weighted_path(&d, &[1, 5, 2, 1]), 7.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn random_runs_conserve_work(k in 0u32..7, p in 1usize..9, seed in 0u64..1000, adv in any::<bool>()) {
        let n = 1 << k;
        let d = sum_tree(n);
        let mut c = cfg(p, seed);
        if adv {
            c.policy = memsys::Arbitration::Adversarial;
        }
        let r = run(&d, &c, &inputs(n)).unwrap();
        prop_assert_eq!(r.metrics.w, d.len() as u64);
        prop_assert_eq!(r.outputs[1][0], expected(n));
        prop_assert_eq!(r.checks.deque_height_violations + r.checks.observation1_violations, 0);
        prop_assert!(r.metrics.q >= r.metrics.cold_misses);
        prop_assert!(r.metrics.e_observed <= 64 * 8);
    }
}
