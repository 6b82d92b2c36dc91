use std::path::{Path, PathBuf};

use memsys::Arbitration;
use rws_sched::SimConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Largest accepted grid.
pub const MAX_CELLS: usize = 100_000;

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "RWS_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Plain runs, no level tracking.
    #[default]
    None,
    Coarse,
    Refined,
    Both,
}

impl PlanMode {
    pub fn level_modes(self) -> Vec<levels::Mode> {
        match self {
            PlanMode::None => vec![],
            PlanMode::Coarse => vec![levels::Mode::Coarse],
            PlanMode::Refined => vec![levels::Mode::Refined],
            PlanMode::Both => vec![levels::Mode::Coarse, levels::Mode::Refined],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QueueRuleSel {
    #[default]
    AnyEntry,
    SameTree,
}

impl From<QueueRuleSel> for levels::QueueRule {
    fn from(q: QueueRuleSel) -> Self {
        match q {
            QueueRuleSel::AnyEntry => levels::QueueRule::AnyEntry,
            QueueRuleSel::SameTree => levels::QueueRule::SameTree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_metrics")]
    pub metrics: String,
    #[serde(default)]
    pub traces: bool,
    #[serde(default)]
    pub phi: bool,
}

fn default_metrics() -> String {
    "metrics.csv".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { metrics: default_metrics(), traces: false, phi: false }
    }
}

/// A sweep over machine parameters for one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kernel: String,
    pub n: Vec<u32>,
    pub p: Vec<usize>,
    #[serde(rename = "M")]
    pub m: Vec<u32>,
    #[serde(rename = "B")]
    pub block: Vec<u32>,
    pub b: Vec<u64>,
    pub s: Vec<u64>,
    #[serde(default = "default_a2")]
    pub a2: Vec<u64>,
    #[serde(default = "default_arb")]
    pub arbitration: Vec<Arbitration>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub mode: PlanMode,
    #[serde(default)]
    pub queue_rule: QueueRuleSel,
    /// Drop cells with `M < B²`.
    #[serde(default)]
    pub tall_cache: bool,
    /// Also run each (n, M, B) on one processor for `Q_seq`.
    #[serde(default = "yes")]
    pub seq_baseline: bool,
    /// Log block moves and report per-task stack-block delays.
    #[serde(default)]
    pub block_delays: bool,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_a2() -> Vec<u64> {
    vec![2]
}
fn default_arb() -> Vec<Arbitration> {
    vec![Arbitration::Random]
}
fn default_seeds() -> u64 {
    20
}
fn yes() -> bool {
    true
}

/// One point of a plan's grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Cell {
    pub n: u32,
    pub p: usize,
    pub m: u32,
    pub block: u32,
    pub b: u64,
    pub s: u64,
    pub a2: u64,
    pub policy: Arbitration,
}

impl Cell {
    pub fn config(&self, seed: u64) -> SimConfig {
        let mut c = SimConfig::new(self.p, self.m, self.block, self.b, self.s);
        c.a2 = self.a2;
        c.policy = self.policy;
        c.seed = seed;
        c.log_moves = false;
        c
    }
}

impl ExperimentPlan {
    /// A plan with a single cell.
    pub fn single(kernel: &str, cell: Cell, seeds: u64) -> Self {
        ExperimentPlan {
            kernel: kernel.into(),
            n: vec![cell.n],
            p: vec![cell.p],
            m: vec![cell.m],
            block: vec![cell.block],
            b: vec![cell.b],
            s: vec![cell.s],
            a2: vec![cell.a2],
            arbitration: vec![cell.policy],
            seeds,
            seed_base: 0,
            mode: PlanMode::None,
            queue_rule: QueueRuleSel::AnyEntry,
            tall_cache: false,
            seq_baseline: true,
            block_delays: false,
            outputs: Outputs::default(),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self, HarnessError> {
        let p: ExperimentPlan = toml::from_str(s).map_err(|e| HarnessError::Plan(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let s = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
        Self::from_toml(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Plan(m));
        kernels::kernel(&self.kernel).map_err(|e| HarnessError::Plan(e.to_string()))?;
        for (name, empty) in [
            ("n", self.n.is_empty()),
            ("p", self.p.is_empty()),
            ("M", self.m.is_empty()),
            ("B", self.block.is_empty()),
            ("b", self.b.is_empty()),
            ("s", self.s.is_empty()),
            ("a2", self.a2.is_empty()),
            ("arbitration", self.arbitration.is_empty()),
        ] {
            if empty {
                return bad(format!("grid `{name}` is empty"));
            }
        }
        if self.seeds == 0 {
            return bad("seeds must be positive".into());
        }
        for &n in &self.n {
            if n == 0 || !n.is_power_of_two() {
                return bad(format!("n = {n} is not a positive power of two"));
            }
        }
        for &b in &self.b {
            if b == 0 {
                return bad("b must be positive".into());
            }
            for &s in &self.s {
                if s < b {
                    return bad(format!("s = {s} < b = {b}"));
                }
                if s % b != 0 {
                    return bad(format!("s = {s} is not a multiple of b = {b}"));
                }
            }
        }
        let size = [self.n.len(), self.p.len(), self.m.len(), self.block.len(), self.b.len(), self.s.len(), self.a2.len(), self.arbitration.len()]
            .iter()
            .try_fold(1usize, |acc, &l| acc.checked_mul(l).filter(|&v| v <= MAX_CELLS));
        if size.is_none() {
            return bad(format!("grid has more than {MAX_CELLS} cells"));
        }
        let cells = self.cells();
        if cells.is_empty() {
            return bad("no cell survives the tall-cache filter".into());
        }
        for c in &cells {
            c.config(0).validate().map_err(|e| HarnessError::Plan(format!("{c:?}: {e}")))?;
        }
        Ok(())
    }

    /// Grid cells in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &p in &self.p {
                for &m in &self.m {
                    for &block in &self.block {
                        if self.tall_cache && (m as u64) < (block as u64).pow(2) {
                            continue;
                        }
                        for &b in &self.b {
                            for &s in &self.s {
                                for &a2 in &self.a2 {
                                    for &policy in &self.arbitration {
                                        out.push(Cell { n, p, m, block, b, s, a2, policy });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.seed_base..self.seed_base + self.seeds
    }

    /// Hex SHA-256 of the plan's canonical JSON, truncated to 16 digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("plan serializes");
        let d = Sha256::digest(json.as_bytes());
        hex::encode(d)[..16].to_string()
    }

    /// `<root>/<hash>`, with the root from [`OUT_ENV`] or `out`.
    pub fn out_dir(&self, root: Option<&Path>) -> PathBuf {
        let root = match root {
            Some(r) => r.to_path_buf(),
            None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
        };
        root.join(self.hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"
kernel = "prefix_sums"
n = [64]
p = [2]
M = [256]
B = [8]
b = [2]
s = [4]
seeds = 1
"#;

    #[test]
    fn parses_with_defaults() {
        let p = ExperimentPlan::from_toml(PLAN).unwrap();
        assert_eq!(p.cells().len(), 1);
        assert_eq!(p.a2, vec![2]);
        assert_eq!(p.mode, PlanMode::None);
        assert!(p.seq_baseline);
    }

    #[test]
    fn s_below_b_rejected() {
        let bad = PLAN.replace("s = [4]", "s = [1]");
        assert!(matches!(ExperimentPlan::from_toml(&bad), Err(HarnessError::Plan(m)) if m.contains("s = 1 < b = 2")));
    }

    #[test]
    fn other_rejections() {
        for (from, to) in [
            ("s = [4]", "s = [5]"),
            ("n = [64]", "n = [48]"),
            ("n = [64]", "n = []"),
            ("seeds = 1", "seeds = 0"),
            ("\"prefix_sums\"", "\"nope\""),
            ("M = [256]", "M = [4]"),
            ("seeds = 1", "seeds = 1\nbogus = 3"),
            ("b = [2]", "b = [0]"),
        ] {
            assert!(ExperimentPlan::from_toml(&PLAN.replace(from, to)).is_err(), "{to}");
        }
    }

    #[test]
    fn oversized_grid_rejected() {
        let mut p = ExperimentPlan::from_toml(PLAN).unwrap();
        p.p = vec![2; 400];
        p.m = vec![256; 400];
        assert!(matches!(p.validate(), Err(HarnessError::Plan(m)) if m.contains("more than")));
    }

    #[test]
    fn tall_cache_filter() {
        let mut p = ExperimentPlan::from_toml(PLAN).unwrap();
        p.m = vec![32, 64];
        p.tall_cache = true;
        assert_eq!(p.cells().iter().map(|c| c.m).collect::<Vec<_>>(), vec![64]);
        p.m = vec![32];
        assert!(p.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentPlan::from_toml(PLAN).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seeds = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let back = ExperimentPlan::from_toml(&a.to_toml()).unwrap();
        assert_eq!(back, a);
    }
}
