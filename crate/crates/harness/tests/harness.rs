use std::process::Command;

use harness::accept::block_delay_scenario;
use harness::plan::{Cell, ExperimentPlan, PlanMode};
use harness::predict::{read_metrics_csv, Predictor};
use harness::{fit_bound, run_and_write, run_plan, FitPoint, HarnessError};
use memsys::Arbitration;

fn cell() -> Cell {
    Cell { n: 64, p: 2, m: 256, block: 8, b: 1, s: 4, a2: 2, policy: Arbitration::Random }
}

fn tmp(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("rws-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn one_cell_one_seed_one_row() {
    let t = run_plan(&ExperimentPlan::single("prefix_sums", cell(), 1)).unwrap();
    assert_eq!(t.rows.len(), 1);
    let r = &t.rows[0];
    assert!(r.correct);
    assert!(r.q_seq.unwrap() > 0);
}

#[test]
fn rows_follow_cells_then_seeds() {
    let mut p = ExperimentPlan::single("rm_to_bi", cell(), 3);
    p.p = vec![1, 4];
    p.seed_base = 10;
    let t = run_plan(&p).unwrap();
    let got: Vec<_> = t.rows.iter().map(|r| (r.cell.p, r.seed)).collect();
    assert_eq!(got, vec![(1, 10), (1, 11), (1, 12), (4, 10), (4, 11), (4, 12)]);
    assert!(t.rows.iter().all(|r| r.correct));
}

#[test]
fn steal_time_below_miss_time_is_rejected() {
    let mut p = ExperimentPlan::single("prefix_sums", cell(), 1);
    p.b = vec![4];
    p.s = vec![2];
    assert!(matches!(p.validate(), Err(HarnessError::Plan(m)) if m.contains("s = 2 < b = 4")));
    let toml = p.to_toml();
    assert!(ExperimentPlan::from_toml(&toml).is_err());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let mut p = ExperimentPlan::single("mm_depth_n", Cell { n: 8, ..cell() }, 2);
    p.mode = PlanMode::Both;
    p.outputs.phi = true;
    let (a, b) = (tmp("rep-a"), tmp("rep-b"));
    let (_, wa) = run_and_write(&p, Some(&a)).unwrap();
    let (_, wb) = run_and_write(&p, Some(&b)).unwrap();
    assert_eq!(wa.dir.file_name(), wb.dir.file_name());
    for f in ["metrics.csv", "phases.csv", "violations.json"] {
        assert_eq!(std::fs::read(wa.dir.join(f)).unwrap(), std::fs::read(wb.dir.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn metrics_csv_roundtrips_through_reader() {
    let mut p = ExperimentPlan::single("prefix_sums", cell(), 2);
    p.p = vec![1, 2];
    let t = run_plan(&p).unwrap();
    let obs = read_metrics_csv(&t.metrics_csv()[..]).unwrap();
    assert_eq!(obs.len(), t.rows.len());
    for (o, r) in obs.iter().zip(&t.rows) {
        assert_eq!(o.q, r.metrics.q as f64);
        assert_eq!(o.steals, r.metrics.s as f64);
        assert_eq!(o.q_seq, r.q_seq.map(|q| q as f64));
        assert_eq!(o.seed, r.seed);
    }
    let header = String::from_utf8(t.metrics_csv()).unwrap();
    assert!(header.lines().next().unwrap().contains("M_words"));
}

#[test]
fn fit_rejects_degenerate_grids() {
    let pt = |x: f64| FitPoint { key: format!("{x}"), group: "g".into(), x, measured: x, predicted: x };
    assert!(matches!(fit_bound("t", &[pt(1.0), pt(2.0), pt(4.0)]), Err(HarnessError::Fit(_))));
    let same: Vec<_> = (0..5).map(|_| pt(8.0)).collect();
    assert!(fit_bound("t", &same).is_err());
    let f = fit_bound("t", &[pt(1.0), pt(2.0), pt(4.0), pt(8.0)]).unwrap();
    assert!((f.max_ratio - 1.0).abs() < 1e-12);
    assert!(f.worst_slope.unwrap().abs() < 1e-9);
}

#[test]
fn sequential_prefix_misses_scale_with_n() {
    let mut p = ExperimentPlan::single("prefix_sums", Cell { p: 1, ..cell() }, 1);
    p.n = vec![256, 512, 1024, 2048];
    p.seq_baseline = false;
    let t = run_plan(&p).unwrap();
    let obs: Vec<_> = t.rows.iter().map(harness::Obs::from_row).collect();
    let f = fit_bound("prefix-q", &Predictor::PrefixQ.points(&obs)).unwrap();
    assert!(f.worst_slope.unwrap().abs() < 0.25, "{f:?}");
}

#[test]
fn lone_foreign_access_moves_block_at_most_twice() {
    for seed in 0..20 {
        assert!(block_delay_scenario(seed, 1, 1, 5, 8) <= 2);
    }
    assert_eq!(block_delay_scenario(0, 2, 0, 10, 8), 0);
}

#[test]
fn cli_run_and_fit() {
    let out = tmp("cli");
    let exe = env!("CARGO_BIN_EXE_rws");
    let st = Command::new(exe)
        .args(["run", "--kernel", "prefix_sums", "--n", "256,512,1024,2048", "--p", "1", "--seeds", "1"])
        .env(harness::OUT_ENV, &out)
        .status()
        .unwrap();
    assert!(st.success());
    let dir = std::fs::read_dir(&out).unwrap().next().unwrap().unwrap().path();
    let csv = dir.join("metrics.csv");
    let fit = |k: &str| {
        Command::new(exe)
            .args(["fit", "--predictor", "prefix-q", "--k", k, "--input"])
            .arg(&csv)
            .output()
            .unwrap()
    };
    assert!(fit("100").status.success());
    assert_eq!(fit("0.5").status.code(), Some(1));
    let bad = Command::new(exe).args(["run", "--kernel", "prefix_sums", "--b", "4", "--s", "2"]).env(harness::OUT_ENV, &out).output().unwrap();
    assert!(!bad.status.success());
    let tr = Command::new(exe).args(["trace-dump", "--kernel", "rm_to_bi", "--n", "8", "--seed", "3"]).output().unwrap();
    assert!(tr.status.success());
    assert!(String::from_utf8(tr.stdout).unwrap().lines().count() > 10);
}

mod props {
    use harness::plan::{ExperimentPlan, QueueRuleSel};
    use harness::{fit_bound, FitPoint};
    use memsys::Arbitration;
    use proptest::prelude::*;

    fn plan_strategy() -> impl Strategy<Value = ExperimentPlan> {
        (
            prop::sample::select(vec!["prefix_sums", "mm_log2", "bi_to_rm"]),
            prop::collection::vec(3u32..7, 1..3),
            prop::collection::vec(1usize..9, 1..3),
            prop::collection::vec(0u32..3, 1..3),
            1u64..4,
            prop::collection::vec(1u64..5, 1..3),
            1u64..30,
            any::<bool>(),
        )
            .prop_map(|(k, ns, ps, bs, b, mult, seeds, same)| {
                let mut p = ExperimentPlan::single(k, super::cell(), seeds);
                p.n = ns.iter().map(|e| 1 << e).collect();
                p.p = ps;
                p.block = bs.iter().map(|e| 4 << e).collect();
                p.m = vec![1024];
                p.b = vec![b];
                p.s = mult.iter().map(|m| m * b).collect();
                p.arbitration = vec![Arbitration::Random, Arbitration::Adversarial];
                if same {
                    p.queue_rule = QueueRuleSel::SameTree;
                }
                p
            })
    }

    proptest! {
        #[test]
        fn plans_roundtrip_through_toml(p in plan_strategy()) {
            p.validate().unwrap();
            let back = ExperimentPlan::from_toml(&p.to_toml()).unwrap();
            prop_assert_eq!(back.hash(), p.hash());
            prop_assert_eq!(back.cells(), p.cells());
        }

        #[test]
        fn fit_ratio_scales_with_measurement(c in 0.01f64..100.0, e in -1.0f64..1.0) {
            let pts: Vec<_> = [4.0, 8.0, 16.0, 32.0, 64.0]
                .iter()
                .map(|&x: &f64| FitPoint { key: format!("{x}"), group: "g".into(), x, measured: c * x.powf(1.0 + e), predicted: x })
                .collect();
            let f = fit_bound("t", &pts).unwrap();
            prop_assert!((f.worst_slope.unwrap() - e).abs() < 1e-9);
            prop_assert!((f.max_ratio - c * 64f64.powf(e).max(4f64.powf(e))).abs() < 1e-9 * f.max_ratio.max(1.0));
        }
    }
}
