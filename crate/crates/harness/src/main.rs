use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use harness::accept::{calibrate, run_suite, SuiteOptions};
use harness::plan::{ExperimentPlan, PlanMode, QueueRuleSel, OUT_ENV};
use harness::predict::{read_metrics_csv, Predictor};
use harness::{fit_bound, run_and_write};
use memsys::Arbitration;

#[derive(Parser)]
#[command(name = "rws", about = "Randomized work-stealing cache simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment plan and write its tables.
    Run {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
    },
    /// Fit a predictor to a metrics CSV.
    Fit {
        #[arg(long, required_unless_present = "calibrate")]
        input: Option<PathBuf>,
        #[arg(long, required_unless_present = "calibrate")]
        predictor: Option<Predictor>,
        /// Fail unless every ratio is at most this.
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, default_value_t = harness::accept::SLOPE_TOL)]
        slope_tol: f64,
        /// Run the pilot grids and print frozen constants.
        #[arg(long)]
        calibrate: bool,
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
    },
    /// Run the acceptance criteria; exits 1 if any fails.
    Accept {
        #[arg(long, env = OUT_ENV, default_value = "out")]
        out: PathBuf,
        /// Criterion numbers to run, all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Write the JSONL event trace of one cell and seed.
    TraceDump {
        #[command(flatten)]
        plan: PlanArgs,
        /// Index into the plan's cell order.
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    None,
    Coarse,
    Refined,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    AnyEntry,
    SameTree,
}

#[derive(Args)]
struct PlanArgs {
    /// TOML plan; other plan flags override its fields.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    p: Vec<usize>,
    #[arg(long = "M", value_delimiter = ',')]
    m: Vec<u32>,
    #[arg(long = "B", value_delimiter = ',')]
    block: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    b: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    s: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    a2: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    arbitration: Vec<Arbitration>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    queue_rule: Option<RuleArg>,
    #[arg(long)]
    tall_cache: bool,
    #[arg(long)]
    no_seq_baseline: bool,
    #[arg(long)]
    block_delays: bool,
    #[arg(long)]
    traces: bool,
    #[arg(long)]
    phi: bool,
    /// Metrics file name inside the output directory.
    #[arg(long)]
    metrics: Option<String>,
}

fn set<T: Clone>(dst: &mut Vec<T>, src: &[T]) {
    if !src.is_empty() {
        *dst = src.to_vec();
    }
}

impl PlanArgs {
    fn build(&self) -> Result<ExperimentPlan> {
        let mut p = match (&self.plan, &self.kernel) {
            (Some(path), _) => ExperimentPlan::load(path)?,
            (None, Some(k)) => {
                let mut p: ExperimentPlan = toml::from_str(&format!(
                    "kernel = {k:?}\nn = [64]\np = [2]\nM = [256]\nB = [8]\nb = [1]\ns = [4]\n"
                ))?;
                p.kernel = k.clone();
                p
            }
            (None, None) => bail!("give --plan or --kernel"),
        };
        if let Some(k) = &self.kernel {
            p.kernel = k.clone();
        }
        set(&mut p.n, &self.n);
        set(&mut p.p, &self.p);
        set(&mut p.m, &self.m);
        set(&mut p.block, &self.block);
        set(&mut p.b, &self.b);
        set(&mut p.s, &self.s);
        set(&mut p.a2, &self.a2);
        set(&mut p.arbitration, &self.arbitration);
        if let Some(s) = self.seeds {
            p.seeds = s;
        }
        if let Some(s) = self.seed_base {
            p.seed_base = s;
        }
        if let Some(m) = self.mode {
            p.mode = match m {
                ModeArg::None => PlanMode::None,
                ModeArg::Coarse => PlanMode::Coarse,
                ModeArg::Refined => PlanMode::Refined,
                ModeArg::Both => PlanMode::Both,
            };
        }
        if let Some(q) = self.queue_rule {
            p.queue_rule = match q {
                RuleArg::AnyEntry => QueueRuleSel::AnyEntry,
                RuleArg::SameTree => QueueRuleSel::SameTree,
            };
        }
        p.tall_cache |= self.tall_cache;
        p.seq_baseline &= !self.no_seq_baseline;
        p.block_delays |= self.block_delays;
        p.outputs.traces |= self.traces;
        p.outputs.phi |= self.phi;
        if let Some(m) = &self.metrics {
            p.outputs.metrics = m.clone();
        }
        p.validate()?;
        Ok(p)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run { plan, out } => {
            let plan = plan.build()?;
            let (table, w) = run_and_write(&plan, Some(&out))?;
            println!("{} rows -> {}", table.rows.len(), w.metrics.display());
        }
        Cmd::Fit { calibrate: true, out, .. } => {
            let (measured, src) = calibrate(&out.join("calibration"))?;
            for (k, v) in &measured {
                eprintln!("pilot max {k} = {v:.4}");
            }
            print!("{src}");
        }
        Cmd::Fit { input, predictor, k, slope_tol, .. } => {
            let (input, predictor) = (input.unwrap(), predictor.unwrap());
            let f = std::fs::File::open(&input).with_context(|| input.display().to_string())?;
            let obs = read_metrics_csv(f)?;
            let fit = fit_bound(predictor.name(), &predictor.points(&obs))?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            eprintln!(
                "{} ~ {}: {} points, max ratio {:.4}, median {:.4}, worst slope {:?}",
                predictor.name(),
                predictor.form(),
                fit.points.len(),
                fit.max_ratio,
                fit.median_ratio,
                fit.worst_slope
            );
            if let Some(k) = k {
                if !fit.passes(k, slope_tol) {
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Cmd::Accept { out, only } => {
            let opts = SuiteOptions { out_root: out, pilot: false, only };
            let reports = run_suite(&opts, |r| println!("{}", r.line()))?;
            if reports.iter().any(|r| !r.pass) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::TraceDump { plan, cell, seed, output } => {
            let mut p = plan.build()?;
            let cells = p.cells();
            let Some(c) = cells.get(cell) else { bail!("cell {cell} out of range (plan has {})", cells.len()) };
            p.n = vec![c.n];
            p.p = vec![c.p];
            p.m = vec![c.m];
            p.block = vec![c.block];
            p.b = vec![c.b];
            p.s = vec![c.s];
            p.a2 = vec![c.a2];
            p.arbitration = vec![c.policy];
            p.tall_cache = false;
            p.seeds = 1;
            p.seed_base = seed;
            p.mode = PlanMode::None;
            p.seq_baseline = false;
            p.outputs.traces = true;
            let (_, traces) = harness::run::run_plan_traced(&p)?;
            let bytes = &traces.first().context("no trace produced")?.1;
            match output {
                Some(path) => std::fs::write(&path, bytes).with_context(|| path.display().to_string())?,
                None => std::io::stdout().write_all(bytes)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
