use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use levels::{Fault, LevelConfig, Mode};
use memsys::{AccessReq, Arbitration, MemConfig, MemSystem, RegionKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rws_sched::{Phase, PhaseKind};
use serde::Serialize;

use crate::constants::{Constants, FROZEN, SAFETY};
use crate::fit::fit_bound;
use crate::plan::{ExperimentPlan, PlanMode, QueueRuleSel};
use crate::predict::{Obs, Predictor};
use crate::run::{run_and_write, Table};
use crate::HarnessError;

/// Time budget for the whole suite, and for the correctness sweep.
pub const SUITE_BUDGET_S: f64 = 600.0;
pub const CORRECTNESS_BUDGET_S: f64 = 300.0;
pub const SLOPE_TOL: f64 = 0.25;
/// One-sided 99% normal quantile.
const Z99: f64 = 2.326_347_874;

pub struct SuiteOptions {
    pub out_root: PathBuf,
    /// Run the calibration grids instead of the full ones.
    pub pilot: bool,
    /// Criteria to run; all when empty.
    pub only: Vec<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub evidence: Vec<PathBuf>,
    /// Largest measured ratios, keyed like [`Constants`] fields.
    pub measured: BTreeMap<String, f64>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "{} {}. {}: {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds
        )
    }
}

struct Ctx<'a> {
    opts: &'a SuiteOptions,
    k: Constants,
    start: Instant,
    refined: OnceCell<Vec<(Table, PathBuf)>>,
    steals: OnceCell<Vec<(Table, PathBuf)>>,
}

fn plan(kernel: &str, n: &[u32], p: &[usize], block: &[u32], b: &[u64], s: &[u64], seeds: u64) -> ExperimentPlan {
    let mut pl = ExperimentPlan::single(
        kernel,
        crate::plan::Cell { n: n[0], p: p[0], m: 256, block: block[0], b: b[0], s: s[0], a2: 2, policy: Arbitration::Random },
        seeds,
    );
    pl.n = n.to_vec();
    pl.p = p.to_vec();
    pl.block = block.to_vec();
    pl.b = b.to_vec();
    pl.s = s.to_vec();
    pl.seq_baseline = false;
    pl
}

fn is_matrix(kernel: &str) -> bool {
    kernels::kernel(kernel).map(|k| k.matrix).unwrap_or(false)
}

impl Ctx<'_> {
    /// The pilot grid keeps every other n and half the seeds.
    fn shape(&self, mut p: ExperimentPlan) -> ExperimentPlan {
        if self.opts.pilot {
            p.n = p.n.iter().step_by(2).copied().collect();
            p.seeds = (p.seeds / 2).max(1);
        }
        p
    }

    fn run(&self, p: ExperimentPlan) -> Result<(Table, PathBuf), HarnessError> {
        let p = self.shape(p);
        let (t, w) = run_and_write(&p, Some(&self.opts.out_root))?;
        Ok((t, w.dir))
    }

    fn run_all(&self, plans: Vec<ExperimentPlan>) -> Result<Vec<(Table, PathBuf)>, HarnessError> {
        plans.into_iter().map(|p| self.run(p)).collect()
    }

    fn refined(&self) -> Result<&Vec<(Table, PathBuf)>, HarnessError> {
        if self.refined.get().is_none() {
            let mut plans = Vec::new();
            for k in kernels::names() {
                let n: &[u32] = match k {
                    "prefix_sums" => &[256, 1024],
                    "rm_to_bi" | "bi_to_rm" => &[16, 32],
                    _ => &[8, 16, 32],
                };
                for rule in [QueueRuleSel::AnyEntry, QueueRuleSel::SameTree] {
                    let mut p = plan(k, n, &[2, 4, 8], &[4, 8, 16], &[1], &[4, 16], 2);
                    p.mode = PlanMode::Refined;
                    p.queue_rule = rule;
                    p.outputs.phi = true;
                    plans.push(p);
                }
            }
            let _ = self.refined.set(self.run_all(plans)?);
        }
        Ok(self.refined.get().unwrap())
    }

    fn steal_tables(&self) -> Result<&Vec<(Table, PathBuf)>, HarnessError> {
        if self.steals.get().is_none() {
            let mut plans = Vec::new();
            for k in ["prefix_sums", "mm_log2", "mm_depth_n"] {
                let n: &[u32] = if is_matrix(k) { &[8, 16, 32] } else { &[256, 1024, 4096] };
                let mut p = plan(k, n, &[2, 4, 8, 16], &[4, 8, 16], &[1], &[4, 16], 20);
                p.seq_baseline = is_matrix(k);
                plans.push(p);
            }
            let _ = self.steals.set(self.run_all(plans)?);
        }
        Ok(self.steals.get().unwrap())
    }
}

fn obs_of<'a>(tables: impl Iterator<Item = &'a Table>) -> Vec<Obs> {
    tables.flat_map(|t| t.rows.iter().map(Obs::from_row)).collect()
}

fn report(id: u8, title: &'static str) -> CriterionReport {
    CriterionReport { id, title, pass: false, detail: String::new(), evidence: Vec::new(), measured: BTreeMap::new(), seconds: 0.0 }
}

fn c1_correctness(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let t0 = Instant::now();
    let mut r = report(1, "kernel correctness");
    let mut plans = Vec::new();
    for k in kernels::names() {
        let n: &[u32] = if is_matrix(k) { &[8, 16, 32, 64] } else { &[256, 1024, 4096] };
        plans.push(plan(k, n, &[1, 2, 4, 8], &[8], &[1], &[4], 20));
    }
    let tables = cx.run_all(plans)?;
    let rows: Vec<_> = tables.iter().flat_map(|(t, _)| &t.rows).collect();
    let bad: Vec<String> = rows
        .iter()
        .filter(|row| !row.correct)
        .map(|row| format!("{} n={} p={} seed={}", row.kernel, row.cell.n, row.cell.p, row.seed))
        .collect();
    let secs = t0.elapsed().as_secs_f64();
    r.pass = bad.is_empty() && secs < CORRECTNESS_BUDGET_S && !rows.is_empty();
    r.detail = format!("{} runs, {} mismatches, {secs:.0} s of {CORRECTNESS_BUDGET_S:.0} s", rows.len(), bad.len());
    if let Some(b) = bad.first() {
        r.detail += &format!("; first: {b}");
    }
    r.evidence = tables.into_iter().map(|(_, d)| d).collect();
    Ok(r)
}

fn c2_sequential(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let mut r = report(2, "sequential cache-miss laws");
    let mut plans = Vec::new();
    for k in kernels::names() {
        let n: &[u32] = if is_matrix(k) { &[8, 16, 32, 64] } else { &[256, 512, 1024, 2048, 4096] };
        let mut p = plan(k, n, &[1], &[4, 8], &[1], &[4], 1);
        p.m = vec![64, 256, 1024];
        plans.push(p);
    }
    let tables = cx.run_all(plans)?;
    let obs = obs_of(tables.iter().map(|(t, _)| t));
    let mut pass = true;
    let mut parts = Vec::new();
    for (pred, key, k) in [
        (Predictor::PrefixQ, "prefix_q", cx.k.prefix_q),
        (Predictor::MmQ, "mm_q", cx.k.mm_q),
        (Predictor::RmToBiQ, "rm_to_bi_q", cx.k.rm_to_bi_q),
        (Predictor::BiToRmQ, "bi_to_rm_q", cx.k.bi_to_rm_q),
    ] {
        let f = fit_bound(pred.name(), &pred.points(&obs))?;
        let slope = f.worst_slope.unwrap_or(0.0);
        let ok = f.passes(k, SLOPE_TOL);
        pass &= ok;
        parts.push(format!("{} max {:.2} <= {k:.2}, slope {slope:+.3}", pred.name(), f.max_ratio));
        r.measured.insert(key.into(), f.max_ratio);
        let path = cx.opts.out_root.join(format!("fit-{}.json", pred.name()));
        write_json(&path, &f)?;
        r.evidence.push(path);
    }
    r.pass = pass;
    r.detail = parts.join("; ");
    r.evidence.extend(tables.into_iter().map(|(_, d)| d));
    Ok(r)
}

/// Block `β` lives on the stack of processor 0, which makes
/// `owner_ops` accesses to it; processors `1..=k` access it `x` times in
/// total. Returns the moves of `β` after the owner's first touch.
pub fn block_delay_scenario(seed: u64, k: usize, x: u64, owner_ops: u64, block: u32) -> usize {
    let mut m = MemSystem::new(MemConfig::new(k + 1, 64 * block, block, 1));
    let _pad = m.allocate(RegionKind::Global, 3).unwrap();
    let base = m.allocate(RegionKind::Stack(0), block as u64).unwrap();
    let blk = m.block_of(base);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0;
    let acc = |m: &mut MemSystem, proc: usize, write: bool, t: u64, rng: &mut ChaCha8Rng| {
        let addr = base + rng.gen_range(0..block as u64);
        let req = AccessReq { proc, addr, write, stalled: false, node: proc as u32, task: proc as u32 };
        m.access(&req, 1, t).unwrap();
    };
    acc(&mut m, 0, true, t, &mut rng);
    let before = m.block_delay(blk, 0, t);
    let (mut own, mut foreign) = (owner_ops, x);
    while own + foreign > 0 {
        t += 1;
        let pick_foreign = foreign > 0 && (own == 0 || rng.gen_range(0..own + foreign) < foreign);
        if pick_foreign {
            foreign -= 1;
            let proc = rng.gen_range(1..=k);
            let w = rng.gen_bool(0.5);
            acc(&mut m, proc, w, t, &mut rng);
        } else {
            own -= 1;
            let w = rng.gen_bool(0.5);
            acc(&mut m, 0, w, t, &mut rng);
        }
    }
    m.block_delay(blk, 0, t) - before
}

fn c3_block_delay(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let mut r = report(3, "block-delay bounds");
    let mut worst = 0.0f64;
    let mut cases = 0;
    for seed in 0..100 {
        for k in 1..=4 {
            for x in [1, 2, 5, 13, 40] {
                for block in [4, 8, 16] {
                    let moves = block_delay_scenario(seed, k, x, 3 * x + seed % 7, block);
                    worst = worst.max(moves as f64 / (2 * x) as f64);
                    cases += 1;
                }
            }
        }
    }
    let a_ok = worst <= 1.0;
    let mut plans = Vec::new();
    for k in kernels::names() {
        let n: &[u32] = match k {
            "prefix_sums" => &[256, 1024, 4096],
            "rm_to_bi" | "bi_to_rm" => &[16, 32, 64],
            _ => &[8, 16, 32],
        };
        let mut p = plan(k, n, &[2, 4, 8], &[4, 8, 16], &[1], &[4], 4);
        p.arbitration = vec![Arbitration::Random, Arbitration::Adversarial];
        p.block_delays = true;
        plans.push(p);
    }
    let tables = cx.run_all(plans)?;
    let rows: Vec<_> = tables.iter().flat_map(|(t, _)| &t.rows).collect();
    let max_of = |type_level: u8| {
        rows.iter()
            .filter(|row| kernels::kernel(&row.kernel).unwrap().type_level == type_level)
            .filter_map(|row| row.delays.map(|d| d.max_ratio))
            .fold(0.0f64, f64::max)
    };
    let (bp, ty2) = (max_of(1), max_of(2));
    let obs = obs_of(tables.iter().map(|(t, _)| t));
    let bw = Predictor::BlockWait.points(&obs).iter().map(|p| p.measured / p.predicted).fold(0.0f64, f64::max);
    r.measured.insert("block_bp".into(), bp);
    r.measured.insert("block_y".into(), ty2);
    r.measured.insert("block_wait".into(), bw);
    let (b_ok, c_ok, d_ok) = (bp <= cx.k.block_bp, ty2 <= cx.k.block_y, bw <= cx.k.block_wait);
    r.pass = a_ok && b_ok && c_ok && d_ok;
    r.detail = format!(
        "(a) {cases} scenarios, max delay/2x {worst:.3} <= 1 {}; (b) BP moves/min(B,ht) {bp:.3} <= {:.3} {}; \
         (c) type-2 moves/Y {ty2:.3} <= {:.3} {}; (d) MM block-wait/(S*B) {bw:.4} <= {:.4} {}; {} runs",
        tick(a_ok),
        cx.k.block_bp,
        tick(b_ok),
        cx.k.block_y,
        tick(c_ok),
        cx.k.block_wait,
        tick(d_ok),
        rows.len()
    );
    r.evidence = tables.into_iter().map(|(_, d)| d).collect();
    Ok(r)
}

fn tick(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}

/// Runs `fault` until some run reports a violation.
fn fault_caught(fault: Fault) -> Result<bool, HarnessError> {
    for name in ["prefix_sums", "mm_log2", "mm_depth_n"] {
        let built = kernels::build(name, if is_matrix(name) { 8 } else { 256 })?;
        let mut l = LevelConfig::new(Mode::Refined);
        l.fault = fault;
        l.phases = false;
        let st = levels::structure(&built.dag, built.spec, 8, &l);
        for seed in 0..6 {
            let mut c = rws_sched::SimConfig::new(4, 256, 8, 2, 4);
            c.seed = seed;
            c.log_moves = false;
            let inputs = built.sim_inputs(&built.random_inputs(seed))?;
            if levels::run_levels(&built.dag, &st, &c, &inputs, l)?.report.violation_count > 0 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn c4_levels(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let mut r = report(4, "level machinery");
    let tables = cx.refined()?;
    let rows: Vec<_> = tables.iter().flat_map(|(t, _)| &t.rows).collect();
    let viol: u64 = rows.iter().map(|row| row.level_violations.unwrap_or(0)).sum();
    let events_ok = rows.iter().all(|row| row.level_violations.is_some());
    let mut dags = 0;
    let mut bad_init = Vec::new();
    for k in kernels::names() {
        let ns: &[u32] = if is_matrix(k) { &[8, 16, 32, 64] } else { &[256, 1024, 4096] };
        for &n in ns {
            let built = kernels::build(k, n)?;
            for block in [4, 8, 16] {
                let st = levels::structure(&built.dag, built.spec, block, &LevelConfig::new(Mode::Refined));
                let b = &st.bounds;
                dags += 1;
                if !(b.group_size_ok() && b.l2_ok() && b.l3_ok()) {
                    bad_init.push(format!("{k} n={n} B={block}"));
                }
            }
        }
    }
    let faults = [Fault::NoDelta, Fault::L2DownOnly];
    let mut caught = Vec::new();
    for f in faults {
        caught.push(fault_caught(f)?);
    }
    r.pass = viol == 0 && events_ok && bad_init.is_empty() && caught.iter().all(|&c| c) && !rows.is_empty();
    r.detail = format!(
        "{} refined runs under both queue rules, {viol} violations; initial bounds on {dags} tables, {} failing; \
         injected faults caught: {}/{}",
        rows.len(),
        bad_init.len(),
        caught.iter().filter(|&&c| c).count(),
        faults.len()
    );
    r.evidence = tables.iter().map(|(_, d)| d.join("violations.json")).collect();
    Ok(r)
}

/// Steal-phase statistics of one pool.
#[derive(Debug, Clone, Serialize)]
pub struct StealStats {
    pub phases: usize,
    pub mean: f64,
    pub mean_limit: f64,
    pub frac_15_16: f64,
    pub frac_limit: f64,
}

impl StealStats {
    pub fn of(ratios: &[f64]) -> Self {
        let n = ratios.len().max(1) as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let p0 = 1.0 / 16.0;
        StealStats {
            phases: ratios.len(),
            mean,
            mean_limit: 7.0 / 8.0 + Z99 * (var / n).sqrt(),
            frac_15_16: ratios.iter().filter(|&&r| r <= 15.0 / 16.0).count() as f64 / n,
            frac_limit: p0 - Z99 * (p0 * (1.0 - p0) / n).sqrt(),
        }
    }
    pub fn ok(&self) -> bool {
        self.phases >= 1000 && self.mean <= self.mean_limit && self.frac_15_16 >= self.frac_limit
    }
}

fn closed(phases: &[crate::run::PhaseRow]) -> impl Iterator<Item = (&crate::run::PhaseRow, &Phase)> {
    phases.iter().filter(|p| !p.phase.truncated && p.cell.p > 1).map(|p| (p, &p.phase))
}

fn c5_potential(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let mut r = report(5, "potential dynamics");
    let mut plans = Vec::new();
    for k in kernels::names() {
        let n: &[u32] = match k {
            "prefix_sums" => &[256, 1024],
            "rm_to_bi" | "bi_to_rm" => &[16, 32],
            _ => &[8, 16],
        };
        for b in [1u64, 4] {
            let mut p = plan(k, n, &[2, 4, 8], &[8], &[b], &[b, 4 * b, 16 * b], 2);
            p.mode = PlanMode::Coarse;
            p.outputs.phi = true;
            plans.push(p);
        }
    }
    let coarse = cx.run_all(plans)?;
    let refined = cx.refined()?;
    let steal_ratios = |ts: &[(Table, PathBuf)]| -> Vec<f64> {
        ts.iter()
            .flat_map(|(t, _)| closed(&t.phases))
            .filter(|(_, ph)| ph.kind == PhaseKind::Steal)
            .map(|(_, ph)| ph.ratio())
            .collect()
    };
    let sc = StealStats::of(&steal_ratios(&coarse));
    let sr = StealStats::of(&steal_ratios(refined));
    let (mut comp_c, mut worst_c) = (0usize, f64::NEG_INFINITY);
    for (row, ph) in coarse.iter().flat_map(|(t, _)| closed(&t.phases)) {
        if ph.kind == PhaseKind::Compute {
            comp_c += 1;
            let limit = 1.0 - row.cell.b as f64 / (4.0 * row.cell.s as f64);
            worst_c = worst_c.max(ph.ratio() - limit);
        }
    }
    let (mut comp_r, mut need_k) = (0usize, 0.0f64);
    for (row, ph) in refined.iter().flat_map(|(t, _)| closed(&t.phases)) {
        if ph.kind == PhaseKind::Compute {
            comp_r += 1;
            let drop = 1.0 - ph.ratio();
            let k = if drop > 0.0 { row.cell.b as f64 / (row.cell.s as f64 * drop) } else { f64::INFINITY };
            need_k = need_k.max(k);
        }
    }
    r.measured.insert("phase_refined".into(), need_k);
    // 1e-9 absorbs rounding in the log-domain sums only.
    let coarse_ok = comp_c > 0 && worst_c <= 1e-9;
    let refined_ok = comp_r > 0 && need_k <= cx.k.phase_refined;
    r.pass = sc.ok() && sr.ok() && coarse_ok && refined_ok;
    r.detail = format!(
        "steal phases coarse n={} mean {:.3} <= {:.3}, frac<=15/16 {:.3} >= {:.3} {}; refined n={} mean {:.3} <= {:.3}, \
         frac {:.3} >= {:.3} {}; coarse computation phases {comp_c}, worst margin {worst_c:+.2e} {}; \
         refined computation phases {comp_r}, K needed {need_k:.1} <= {:.1} {}",
        sc.phases,
        sc.mean,
        sc.mean_limit,
        sc.frac_15_16,
        sc.frac_limit,
        tick(sc.ok()),
        sr.phases,
        sr.mean,
        sr.mean_limit,
        sr.frac_15_16,
        sr.frac_limit,
        tick(sr.ok()),
        tick(coarse_ok),
        cx.k.phase_refined,
        tick(refined_ok)
    );
    let path = cx.opts.out_root.join("steal-phase-stats.json");
    write_json(&path, &serde_json::json!({ "coarse": sc, "refined": sr }))?;
    r.evidence.push(path);
    r.evidence.extend(coarse.into_iter().chain(refined.iter().cloned()).map(|(_, d)| d.join("phases.csv")));
    Ok(r)
}

fn c6_steals(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let mut r = report(6, "steal-count scaling");
    let tables = cx.steal_tables()?;
    let obs = obs_of(tables.iter().map(|(t, _)| t));
    let f = fit_bound(Predictor::Steals.name(), &Predictor::Steals.points(&obs))?;
    let rows: Vec<_> = tables.iter().flat_map(|(t, _)| &t.rows).filter(|row| row.cell.block >= 8).collect();
    let not_tighter = rows.iter().filter(|row| row.h_refined_bound >= row.h_coarse_bound).count();
    r.measured.insert("steals".into(), f.max_ratio);
    let ok = f.max_ratio <= cx.k.steals && not_tighter == 0 && !rows.is_empty();
    r.pass = ok;
    r.detail = format!(
        "{} cells, max median S/(p*h_refined) {:.4} <= {:.4}; refined < coarse on {}/{} runs with B >= 8",
        f.points.len(),
        f.max_ratio,
        cx.k.steals,
        rows.len() - not_tighter,
        rows.len()
    );
    let path = cx.opts.out_root.join("fit-steals.json");
    write_json(&path, &f)?;
    r.evidence.push(path);
    r.evidence.extend(tables.iter().map(|(_, d)| d.clone()));
    Ok(r)
}

fn c7_excess(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let mut r = report(7, "stolen-task excess misses");
    let tables = cx.steal_tables()?;
    let obs = obs_of(tables.iter().map(|(t, _)| t));
    let pts = Predictor::ExcessQ.points(&obs);
    let worst = pts.iter().map(|p| p.measured / p.predicted).fold(f64::NEG_INFINITY, f64::max);
    r.measured.insert("excess_q".into(), worst);
    r.pass = !pts.is_empty() && worst <= cx.k.excess_q;
    r.detail = format!("{} MM runs, max (Q-Q_seq)/(S^(1/3)n^2/B+S) {worst:.4} <= {:.4}", pts.len(), cx.k.excess_q);
    r.evidence = tables.iter().filter(|(t, _)| t.rows.iter().any(|x| x.kernel.starts_with("mm"))).map(|(_, d)| d.clone()).collect();
    Ok(r)
}

fn c8_repro(cx: &Ctx) -> Result<CriterionReport, HarnessError> {
    let mut r = report(8, "reproducibility");
    let mut p = plan("prefix_sums", &[256], &[2, 4], &[8], &[1], &[4], 3);
    p.mode = PlanMode::Both;
    p.outputs.phi = true;
    let mut dirs = Vec::new();
    for side in ["repro-a", "repro-b"] {
        let root = cx.opts.out_root.join(side);
        let (_, w) = run_and_write(&p, Some(&root))?;
        dirs.push(w.dir);
    }
    let mut same = true;
    for f in ["metrics.csv", "phases.csv", "violations.json", "plan.toml"] {
        let a = std::fs::read(dirs[0].join(f)).map_err(|e| HarnessError::Io(f.into(), e))?;
        let b = std::fs::read(dirs[1].join(f)).map_err(|e| HarnessError::Io(f.into(), e))?;
        same &= a == b;
    }
    let elapsed = cx.start.elapsed().as_secs_f64();
    r.pass = same && elapsed < SUITE_BUDGET_S;
    r.detail = format!(
        "outputs byte-identical: {same}; suite time {elapsed:.0} s of {SUITE_BUDGET_S:.0} s (plan {})",
        p.hash()
    );
    r.evidence = dirs;
    Ok(r)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), HarnessError> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| HarnessError::Io(d.display().to_string(), e))?;
    }
    let s = serde_json::to_string_pretty(v).expect("serializes");
    std::fs::write(path, s).map_err(|e| HarnessError::Io(path.display().to_string(), e))
}

type CriterionFn = fn(&Ctx) -> Result<CriterionReport, HarnessError>;

const CRITERIA: [(u8, CriterionFn); 8] = [
    (1, c1_correctness),
    (2, c2_sequential),
    (3, c3_block_delay),
    (4, c4_levels),
    (5, c5_potential),
    (6, c6_steals),
    (7, c7_excess),
    (8, c8_repro),
];

/// Criteria whose checks use calibrated constants.
pub const CALIBRATED: [u8; 5] = [2, 3, 5, 6, 7];

/// Runs the selected criteria, calling `each` as every one finishes, and
/// writes `report.json` under the output root.
pub fn run_suite(
    opts: &SuiteOptions,
    mut each: impl FnMut(&CriterionReport),
) -> Result<Vec<CriterionReport>, HarnessError> {
    std::fs::create_dir_all(&opts.out_root).map_err(|e| HarnessError::Io(opts.out_root.display().to_string(), e))?;
    let cx = Ctx { opts, k: FROZEN, start: Instant::now(), refined: OnceCell::new(), steals: OnceCell::new() };
    let mut out = Vec::new();
    for (id, f) in CRITERIA {
        if !opts.only.is_empty() && !opts.only.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let mut rep = f(&cx)?;
        rep.seconds = t0.elapsed().as_secs_f64();
        each(&rep);
        out.push(rep);
    }
    write_json(&opts.out_root.join("report.json"), &out)?;
    Ok(out)
}

/// Pilot maxima times the safety factor, as `Constants` source.
pub fn calibrate(out_root: &Path) -> Result<(BTreeMap<String, f64>, String), HarnessError> {
    let opts = SuiteOptions { out_root: out_root.to_path_buf(), pilot: true, only: CALIBRATED.to_vec() };
    let mut measured = BTreeMap::new();
    for r in run_suite(&opts, |_| {})? {
        measured.extend(r.measured);
    }
    let mut src = String::from("pub const FROZEN: Constants = Constants {\n");
    for (k, v) in &measured {
        src += &format!("    {k}: {:.4},\n", v * SAFETY);
    }
    src += "};\n";
    Ok((measured, src))
}
