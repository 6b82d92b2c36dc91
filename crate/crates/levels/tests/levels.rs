use kernels::{build, Built};
use levels::*;
use proptest::prelude::*;
use rws_sched::{run_observed, SimConfig};
use sp_dag::{NodeKind, SPDag, TreeKind};

fn cfg(p: usize, block: u32, b: u64, s: u64, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(p, 256, block, b, s);
    c.seed = seed;
    c.log_moves = false;
    c
}

fn go(built: &Built, c: &SimConfig, lcfg: LevelConfig) -> LevelRun {
    let st = structure(&built.dag, built.spec, c.block, &lcfg);
    let inputs = built.sim_inputs(&built.random_inputs(c.seed)).unwrap();
    run_levels(&built.dag, &st, c, &inputs, lcfg).unwrap()
}

#[test]
fn single_node_has_zero_levels() {
    let d = SPDag::single();
    let spec = kernels::kernel("prefix_sums").unwrap();
    let lcfg = LevelConfig::new(Mode::Refined);
    let st = structure(&d, spec, 4, &lcfg);
    let obs = LevelObserver::new(&d, &st, lcfg, 1, 2, 4, 0);
    assert_eq!(obs.l1(d.root), 0);
    assert_eq!(obs.report.root_levels, [0, 0, 0, 0]);
    assert_eq!(obs.report.violation_count, 0);
}

#[test]
fn up_tree_root_starts_at_two_e() {
    let built = build("prefix_sums", 64).unwrap();
    let d = &built.dag;
    let st = structure(d, built.spec, 8, &LevelConfig::new(Mode::Refined));
    let mut seen = 0;
    for t in d.trees.iter().filter(|t| t.kind == TreeKind::Bp) {
        let j = d.node(t.root).mate;
        assert_eq!(d.node(j).kind, NodeKind::Join);
        assert_eq!(st.init[1][j as usize], 2 * st.e);
        seen += 1;
    }
    assert!(seen > 0);
}

#[test]
fn initial_bounds_hold_for_every_kernel() {
    for name in kernels::names() {
        for block in [4, 8, 16] {
            let built = build(name, if built_is_matrix(name) { 16 } else { 256 }).unwrap();
            let st = structure(&built.dag, built.spec, block, &LevelConfig::new(Mode::Refined));
            let b = &st.bounds;
            assert!(b.group_size_ok(), "{name} B={block} {b:?}");
            assert!(b.l2_ok(), "{name} B={block} {b:?}");
            assert!(b.l3_ok(), "{name} B={block} {b:?}");
        }
    }
}

fn built_is_matrix(name: &str) -> bool {
    kernels::kernel(name).unwrap().matrix
}

#[test]
fn log_phi_examples() {
    // One queued node of height 3: 2^(1+3).
    assert_eq!(log_phi(&[3.0], &[], 4.0), 4.0);
    // One executing node of height 2 after 0 work.
    assert_eq!(log_phi(&[], &[(2.0, 0.0)], 4.0), 2.0);
    // Two queued nodes of height 1 give 2·2^2.
    assert!((log_phi(&[1.0, 1.0], &[], 4.0) - 3.0).abs() < 1e-12);
    assert_eq!(log_phi(&[], &[], 4.0), f64::NEG_INFINITY);
}

#[test]
fn no_violations_on_any_kernel() {
    for name in kernels::names() {
        let n = if built_is_matrix(name) { 16 } else { 512 };
        let built = build(name, n).unwrap();
        for rule in [QueueRule::AnyEntry, QueueRule::SameTree] {
            for (p, block, seed) in [(2, 4, 0), (4, 8, 1), (8, 16, 2)] {
                let mut l = LevelConfig::new(Mode::Refined);
                l.queue_rule = rule;
                let r = go(&built, &cfg(p, block, 2, 4, seed), l);
                let rep = &r.report;
                assert_eq!(rep.violation_count, 0, "{name} {rule:?} p={p} B={block}: {:?}", rep.violations);
                assert_eq!(rep.faults, 0, "{name}");
                assert!(rep.events > 0);
            }
        }
    }
}

#[test]
fn l3_decrements_happen_in_prefix_sums() {
    let built = build("prefix_sums", 1024).unwrap();
    let total: u64 = (0..4).map(|seed| go(&built, &cfg(8, 8, 1, 4, seed), LevelConfig::new(Mode::Refined)).report.decrements[1]).sum();
    assert!(total > 0);
}

#[test]
fn potential_never_rises_across_phases() {
    for (name, n, mode) in [("prefix_sums", 1024, Mode::Coarse), ("mm_log2", 16, Mode::Refined), ("bi_to_rm", 16, Mode::Coarse)] {
        let built = build(name, n).unwrap();
        for seed in 0..3 {
            let r = go(&built, &cfg(4, 8, 2, 4, seed), LevelConfig::new(mode));
            assert!(!r.res.phases.is_empty());
            for ph in r.res.phases.iter().filter(|p| !p.truncated) {
                assert!(ph.ratio() <= 1.0 + 1e-9, "{name} {ph:?}");
            }
        }
    }
}

#[test]
fn coarse_heights_of_a_chain() {
    let d = SPDag::chain(4);
    let h = coarse_heights(&d, 2, 4, 3);
    let step = (d.e1 as f64 + 6.0) / 4.0;
    assert!((h[d.root as usize] - 4.0 * step).abs() < 1e-9);
    assert!(h.windows(2).all(|w| w[0] > w[1]));
}

/// Runs every kernel until `fault` is caught somewhere.
fn fault_detected(fault: Fault) -> bool {
    for name in ["prefix_sums", "mm_log2", "mm_depth_n"] {
        let n = if built_is_matrix(name) { 8 } else { 256 };
        let built = build(name, n).unwrap();
        for seed in 0..6 {
            let mut l = LevelConfig::new(Mode::Refined);
            l.fault = fault;
            if go(&built, &cfg(4, 8, 2, 4, seed), l).report.violation_count > 0 {
                return true;
            }
        }
    }
    false
}

#[test]
fn missing_increments_are_detected() {
    assert!(fault_detected(Fault::NoDelta));
}

#[test]
fn one_sided_group_decrement_is_detected() {
    assert!(fault_detected(Fault::L2DownOnly));
}

#[test]
fn levels_stay_nonnegative_after_run() {
    let built = build("prefix_sums", 256).unwrap();
    let lcfg = LevelConfig::new(Mode::Refined);
    let c = cfg(4, 8, 2, 4, 5);
    let st = structure(&built.dag, built.spec, 8, &lcfg);
    let inputs = built.sim_inputs(&built.random_inputs(5)).unwrap();
    let mut obs = LevelObserver::new(&built.dag, &st, lcfg, c.p, c.b, c.s, 0);
    run_observed(&built.dag, &c, &inputs, &mut obs).unwrap();
    for u in 0..built.dag.len() as u32 {
        for i in 1..=3 {
            assert!(obs.level(i, u) >= 0);
        }
    }
    // Up-tree roots keep at least e of ℓ3.
    for t in built.dag.trees.iter().filter(|t| t.kind == TreeKind::Bp) {
        let j = built.dag.node(t.root).mate;
        assert!(obs.base(2, j) >= st.e, "{}", obs.base(2, j));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_runs_stay_monotone(k in 3u32..9, p in 2usize..9, bi in 0usize..3, seed in 0u64..500, same in any::<bool>()) {
        let built = build("prefix_sums", 1 << k).unwrap();
        let mut l = LevelConfig::new(Mode::Refined);
        l.queue_rule = if same { QueueRule::SameTree } else { QueueRule::AnyEntry };
        let r = go(&built, &cfg(p, [4, 8, 16][bi], 1, 4, seed), l);
        prop_assert_eq!(r.report.violation_count, 0);
    }
}
