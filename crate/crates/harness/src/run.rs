use std::collections::HashMap;
use std::path::{Path, PathBuf};

use kernels::Built;
use levels::{h_root_bound, LevelConfig, Mode, Structure, Violation};
use memsys::Arbitration;
use rayon::prelude::*;
use rws_sched::{MetricsRecord, Phase, PhaseKind};
use serde::Serialize;

use crate::plan::{Cell, ExperimentPlan, PlanMode};
use crate::HarnessError;

pub fn policy_name(p: Arbitration) -> &'static str {
    match p {
        Arbitration::Random => "random",
        Arbitration::RoundRobin => "round-robin",
        Arbitration::Adversarial => "adversarial",
    }
}

pub fn mode_name(m: Option<Mode>) -> &'static str {
    match m {
        None => "plain",
        Some(Mode::Coarse) => "coarse",
        Some(Mode::Refined) => "refined",
    }
}

/// One (cell, seed, mode) run.
#[derive(Debug, Clone)]
pub struct Row {
    pub kernel: String,
    pub cell: Cell,
    pub seed: u64,
    pub mode: Option<Mode>,
    pub metrics: MetricsRecord,
    pub q_seq: Option<u64>,
    pub correct: bool,
    pub h_refined_bound: f64,
    pub h_coarse_bound: f64,
    pub level_violations: Option<u64>,
    pub h_root: Option<f64>,
    pub delays: Option<DelayStats>,
}

/// Stack-block moves during stolen tasks, against their allowances.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DelayStats {
    /// (task, block) pairs with at least one move.
    pub entries: u64,
    pub max_moves: u64,
    /// Largest moves / allowance.
    pub max_ratio: f64,
}

/// Allowance for a task's stack block: `min{B, ht(τ)}` for BP kernels,
/// `Y(|τ|, B)` otherwise.
pub fn delay_stats(built: &Built, cfg: &rws_sched::SimConfig, res: &rws_sched::RunResult) -> DelayStats {
    let dag = &built.dag;
    let mut out = DelayStats::default();
    let mut allowance: HashMap<u32, f64> = HashMap::new();
    for d in rws_sched::stack_block_delays(dag, cfg, res) {
        let a = *allowance.entry(d.task).or_insert_with(|| {
            if built.spec.type_level == 1 {
                (cfg.block as f64).min(d.task_height.max(1) as f64)
            } else {
                let size = dag.task_size(res.tasks[d.task as usize].root);
                levels::y_bound(size as f64, cfg.block as f64, built.spec).max(1.0)
            }
        });
        out.entries += 1;
        out.max_moves = out.max_moves.max(d.moves);
        out.max_ratio = out.max_ratio.max(d.moves as f64 / a);
    }
    out
}

pub const CELL_COLUMNS: [&str; 11] =
    ["kernel", "n", "p", "M_words", "B_words", "b_time", "s_time", "a2", "arbitration", "seed", "mode"];

fn cell_fields(kernel: &str, c: &Cell, seed: u64, mode: Option<Mode>) -> Vec<String> {
    vec![
        kernel.to_string(),
        c.n.to_string(),
        c.p.to_string(),
        c.m.to_string(),
        c.block.to_string(),
        c.b.to_string(),
        c.s.to_string(),
        c.a2.to_string(),
        policy_name(c.policy).to_string(),
        seed.to_string(),
        mode_name(mode).to_string(),
    ]
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Row {
    pub fn header() -> Vec<&'static str> {
        let mut h = CELL_COLUMNS.to_vec();
        h.extend(MetricsRecord::csv_header());
        h.extend([
            "Q_seq_misses",
            "correct",
            "h_refined_bound",
            "h_coarse_bound",
            "level_violations",
            "h_root",
            "delay_entries",
            "delay_max_moves",
            "delay_max_ratio",
        ]);
        h
    }

    pub fn fields(&self) -> Vec<String> {
        let mut f = cell_fields(&self.kernel, &self.cell, self.seed, self.mode);
        f.extend(self.metrics.csv_fields());
        f.extend([
            opt(self.q_seq),
            self.correct.to_string(),
            format!("{:.4}", self.h_refined_bound),
            format!("{:.4}", self.h_coarse_bound),
            opt(self.level_violations),
            opt(self.h_root.map(|h| format!("{h:.4}"))),
            opt(self.delays.map(|d| d.entries)),
            opt(self.delays.map(|d| d.max_moves)),
            opt(self.delays.map(|d| format!("{:.4}", d.max_ratio))),
        ]);
        f
    }
}

#[derive(Debug, Clone)]
pub struct PhaseRow {
    pub kernel: String,
    pub cell: Cell,
    pub seed: u64,
    pub mode: Mode,
    pub phase: Phase,
}

impl PhaseRow {
    pub fn header() -> Vec<&'static str> {
        let mut h = CELL_COLUMNS.to_vec();
        h.extend([
            "phase",
            "type",
            "start_time",
            "end_time",
            "log2_phi_start",
            "log2_phi_end",
            "queued_fraction",
            "truncated",
        ]);
        h
    }

    pub fn fields(&self) -> Vec<String> {
        let ph = &self.phase;
        let mut f = cell_fields(&self.kernel, &self.cell, self.seed, Some(self.mode));
        f.extend([
            ph.index.to_string(),
            match ph.kind {
                PhaseKind::Steal => "steal".into(),
                PhaseKind::Compute => "compute".into(),
            },
            ph.start.to_string(),
            ph.end.to_string(),
            format!("{:.6}", ph.log_phi_start),
            format!("{:.6}", ph.log_phi_end),
            format!("{:.6}", ph.queued_fraction),
            ph.truncated.to_string(),
        ]);
        f
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunViolations {
    pub kernel: String,
    pub cell: Cell,
    pub seed: u64,
    pub mode: &'static str,
    pub count: u64,
    pub first: Vec<Violation>,
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub rows: Vec<Row>,
    pub phases: Vec<PhaseRow>,
    pub violations: Vec<RunViolations>,
}

fn csv_bytes(header: Vec<&str>, rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

impl Table {
    pub fn metrics_csv(&self) -> Vec<u8> {
        csv_bytes(Row::header(), self.rows.iter().map(Row::fields))
    }
    pub fn phases_csv(&self) -> Vec<u8> {
        csv_bytes(PhaseRow::header(), self.phases.iter().map(PhaseRow::fields))
    }
    pub fn violations_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            total: u64,
            runs_with_violations: usize,
            runs: &'a [RunViolations],
        }
        let total = self.violations.iter().map(|v| v.count).sum();
        serde_json::to_string_pretty(&Report { total, runs_with_violations: self.violations.len(), runs: &self.violations })
            .expect("report serializes")
    }
}

/// Result of one run before it is turned into rows.
struct SeedOut {
    rows: Vec<Row>,
    phases: Vec<PhaseRow>,
    violations: Vec<RunViolations>,
    trace: Option<Vec<u8>>,
}

fn run_seed(
    plan: &ExperimentPlan,
    built: &Built,
    structures: &HashMap<u32, Structure>,
    cell: &Cell,
    seed: u64,
    q_seq: Option<u64>,
) -> Result<SeedOut, HarnessError> {
    let raw = built.random_inputs(seed);
    let inputs = built.sim_inputs(&raw)?;
    let expect = built.oracle(&raw);
    let bound = h_root_bound(built, cell.b, cell.s, cell.block);
    let mut cfg = cell.config(seed);
    cfg.trace = plan.outputs.traces;
    cfg.log_moves = plan.block_delays;
    let mut out = SeedOut { rows: Vec::new(), phases: Vec::new(), violations: Vec::new(), trace: None };
    let row = |mode, res: &rws_sched::RunResult, lv: Option<&levels::LevelReport>| Row {
        kernel: plan.kernel.clone(),
        cell: *cell,
        seed,
        mode,
        metrics: res.metrics.clone(),
        q_seq,
        correct: res.outputs[built.output as usize] == expect,
        h_refined_bound: bound.refined,
        h_coarse_bound: bound.coarse,
        level_violations: lv.map(|r| r.violation_count),
        h_root: lv.map(|r| r.h_root),
        delays: plan.block_delays.then(|| delay_stats(built, &cfg, res)),
    };
    let modes = plan.mode.level_modes();
    if modes.is_empty() {
        let res = rws_sched::run(&built.dag, &cfg, &inputs)?;
        if plan.outputs.traces {
            let mut buf = Vec::new();
            res.trace.write_jsonl(&mut buf)?;
            out.trace = Some(buf);
        }
        out.rows.push(row(None, &res, None));
        return Ok(out);
    }
    for mode in modes {
        let mut lcfg = LevelConfig::new(mode);
        lcfg.queue_rule = plan.queue_rule.into();
        lcfg.phases = true;
        let st = &structures[&cell.block];
        let run = levels::run_levels(&built.dag, st, &cfg, &inputs, lcfg)?;
        if plan.outputs.traces && out.trace.is_none() {
            let mut buf = Vec::new();
            run.res.trace.write_jsonl(&mut buf)?;
            out.trace = Some(buf);
        }
        if plan.outputs.phi {
            out.phases.extend(run.res.phases.iter().map(|ph| PhaseRow {
                kernel: plan.kernel.clone(),
                cell: *cell,
                seed,
                mode,
                phase: ph.clone(),
            }));
        }
        if run.report.violation_count > 0 {
            out.violations.push(RunViolations {
                kernel: plan.kernel.clone(),
                cell: *cell,
                seed,
                mode: mode_name(Some(mode)),
                count: run.report.violation_count,
                first: run.report.violations.clone(),
            });
        }
        out.rows.push(row(Some(mode), &run.res, Some(&run.report)));
    }
    Ok(out)
}

/// Cache misses of a one-processor run; they do not depend on the
/// inputs or on latencies.
pub fn seq_misses(built: &Built, m: u32, block: u32) -> Result<u64, HarnessError> {
    let inputs = built.sim_inputs(&built.random_inputs(0))?;
    let mut cfg = rws_sched::SimConfig::new(1, m, block, 1, 1);
    cfg.log_moves = false;
    Ok(rws_sched::run(&built.dag, &cfg, &inputs)?.metrics.q)
}

/// Runs every (cell, seed) of `plan`; returns the table and the raw
/// traces keyed by `(cell index, seed)`.
pub fn run_plan_traced(plan: &ExperimentPlan) -> Result<(Table, Vec<((usize, u64), Vec<u8>)>), HarnessError> {
    plan.validate()?;
    let cells = plan.cells();
    let mut table = Table::default();
    let mut traces = Vec::new();
    let mut q_seq: HashMap<(u32, u32, u32), u64> = HashMap::new();
    let needs_levels = plan.mode != PlanMode::None;
    for &n in &plan.n {
        let built = kernels::build(&plan.kernel, n)?;
        let mut structures = HashMap::new();
        if needs_levels {
            for &block in &plan.block {
                let lcfg = LevelConfig::new(Mode::Refined);
                structures.insert(block, levels::structure(&built.dag, built.spec, block, &lcfg));
            }
        }
        for (ci, cell) in cells.iter().enumerate().filter(|(_, c)| c.n == n) {
            let q = if plan.seq_baseline {
                let key = (n, cell.m, cell.block);
                if let std::collections::hash_map::Entry::Vacant(e) = q_seq.entry(key) {
                    e.insert(seq_misses(&built, cell.m, cell.block)?);
                }
                Some(q_seq[&key])
            } else {
                None
            };
            let seeds: Vec<u64> = plan.seeds().collect();
            let outs: Vec<SeedOut> = seeds
                .par_iter()
                .map(|&seed| run_seed(plan, &built, &structures, cell, seed, q))
                .collect::<Result<_, _>>()?;
            for (seed, o) in seeds.iter().zip(outs) {
                table.rows.extend(o.rows);
                table.phases.extend(o.phases);
                table.violations.extend(o.violations);
                if let Some(t) = o.trace {
                    traces.push(((ci, *seed), t));
                }
            }
        }
    }
    Ok((table, traces))
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<Table, HarnessError> {
    Ok(run_plan_traced(plan)?.0)
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, Serialize)]
pub struct Written {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub phases: Option<PathBuf>,
    pub violations: Option<PathBuf>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|e| HarnessError::Io(path.display().to_string(), e))
}

/// Runs `plan` and writes its outputs under `<root>/<plan hash>`.
pub fn run_and_write(plan: &ExperimentPlan, root: Option<&Path>) -> Result<(Table, Written), HarnessError> {
    let (table, traces) = run_plan_traced(plan)?;
    let dir = plan.out_dir(root);
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Io(dir.display().to_string(), e))?;
    write(&dir.join("plan.toml"), plan.to_toml().as_bytes())?;
    let metrics = dir.join(&plan.outputs.metrics);
    write(&metrics, &table.metrics_csv())?;
    let phases = if plan.outputs.phi {
        let p = dir.join("phases.csv");
        write(&p, &table.phases_csv())?;
        Some(p)
    } else {
        None
    };
    let violations = if plan.mode != PlanMode::None {
        let p = dir.join("violations.json");
        write(&p, table.violations_json().as_bytes())?;
        Some(p)
    } else {
        None
    };
    if !traces.is_empty() {
        let td = dir.join("traces");
        std::fs::create_dir_all(&td).map_err(|e| HarnessError::Io(td.display().to_string(), e))?;
        for ((ci, seed), t) in traces {
            write(&td.join(format!("cell{ci}_seed{seed}.jsonl")), &t)?;
        }
    }
    Ok((table, Written { dir, metrics, phases, violations }))
}
