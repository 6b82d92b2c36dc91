use std::collections::BTreeMap;
use std::io::Read;

use crate::fit::{median, FitPoint};
use crate::run::{policy_name, Row};
use crate::HarnessError;

/// The fields of a metrics row the predictors read.
#[derive(Debug, Clone)]
pub struct Obs {
    pub kernel: String,
    pub n: f64,
    pub p: f64,
    pub m: f64,
    pub block: f64,
    pub b: f64,
    pub s: f64,
    pub a2: f64,
    pub policy: String,
    pub mode: String,
    pub seed: u64,
    pub q: f64,
    pub steals: f64,
    pub block_wait: f64,
    pub q_seq: Option<f64>,
    pub h_refined: f64,
    pub h_coarse: f64,
}

impl Obs {
    pub fn from_row(r: &Row) -> Self {
        let c = &r.cell;
        Obs {
            kernel: r.kernel.clone(),
            n: c.n as f64,
            p: c.p as f64,
            m: c.m as f64,
            block: c.block as f64,
            b: c.b as f64,
            s: c.s as f64,
            a2: c.a2 as f64,
            policy: policy_name(c.policy).into(),
            mode: crate::run::mode_name(r.mode).into(),
            seed: r.seed,
            q: r.metrics.q as f64,
            steals: r.metrics.s as f64,
            block_wait: r.metrics.block_wait as f64,
            q_seq: r.q_seq.map(|q| q as f64),
            h_refined: r.h_refined_bound,
            h_coarse: r.h_coarse_bound,
        }
    }

    /// Every parameter but the seed.
    pub fn cell_key(&self) -> String {
        format!(
            "{} n={} p={} M={} B={} b={} s={} a2={} {} {}",
            self.kernel, self.n, self.p, self.m, self.block, self.b, self.s, self.a2, self.policy, self.mode
        )
    }

    /// Every parameter but the seed and n.
    pub fn group_key(&self) -> String {
        format!(
            "{} p={} M={} B={} b={} s={} a2={} {} {}",
            self.kernel, self.p, self.m, self.block, self.b, self.s, self.a2, self.policy, self.mode
        )
    }
}

/// Reads a metrics CSV written by [`crate::run::Table::metrics_csv`].
pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<Obs>, HarnessError> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(|e| HarnessError::Csv(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| HarnessError::Csv(format!("no column {name}")));
    let idx: Vec<usize> = [
        "kernel",
        "n",
        "p",
        "M_words",
        "B_words",
        "b_time",
        "s_time",
        "a2",
        "arbitration",
        "mode",
        "seed",
        "Q_misses",
        "S_steals",
        "block_wait_time",
        "Q_seq_misses",
        "h_refined_bound",
        "h_coarse_bound",
    ]
    .iter()
    .map(|c| col(c))
    .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::Csv(e.to_string()))?;
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        let num = |i: usize| -> Result<f64, HarnessError> {
            get(i).parse::<f64>().map_err(|_| HarnessError::Csv(format!("row {}: bad number {:?}", line + 2, get(i))))
        };
        out.push(Obs {
            kernel: get(0).to_string(),
            n: num(1)?,
            p: num(2)?,
            m: num(3)?,
            block: num(4)?,
            b: num(5)?,
            s: num(6)?,
            a2: num(7)?,
            policy: get(8).to_string(),
            mode: get(9).to_string(),
            seed: num(10)? as u64,
            q: num(11)?,
            steals: num(12)?,
            block_wait: num(13)?,
            q_seq: if get(14).is_empty() { None } else { Some(num(14)?) },
            h_refined: num(15)?,
            h_coarse: num(16)?,
        });
    }
    Ok(out)
}

/// Measured quantity and its predicted asymptotic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// `Q / (n/B)`, one processor.
    PrefixQ,
    /// `Q / (n³/(B√M))`, one processor.
    MmQ,
    /// `Q / (n²/B)`, one processor.
    RmToBiQ,
    /// `Q / ((n²/B)·log n² / log M)`, one processor.
    BiToRmQ,
    /// Median `S / (p·h_refined)` over seeds.
    Steals,
    /// Block-wait in miss units over `S·B`.
    BlockWait,
    /// `(Q − Q_seq) / (S^{1/3}·n²/B + S)`.
    ExcessQ,
}

pub const PREDICTORS: [Predictor; 7] = [
    Predictor::PrefixQ,
    Predictor::MmQ,
    Predictor::RmToBiQ,
    Predictor::BiToRmQ,
    Predictor::Steals,
    Predictor::BlockWait,
    Predictor::ExcessQ,
];

impl std::str::FromStr for Predictor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PREDICTORS
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown predictor `{s}`; one of {}", PREDICTORS.map(|p| p.name()).join(", ")))
    }
}

impl Predictor {
    pub fn name(self) -> &'static str {
        match self {
            Predictor::PrefixQ => "prefix-q",
            Predictor::MmQ => "mm-q",
            Predictor::RmToBiQ => "rm-to-bi-q",
            Predictor::BiToRmQ => "bi-to-rm-q",
            Predictor::Steals => "steals",
            Predictor::BlockWait => "block-wait",
            Predictor::ExcessQ => "excess-q",
        }
    }

    pub fn form(self) -> &'static str {
        match self {
            Predictor::PrefixQ => "n/B",
            Predictor::MmQ => "n^3/(B*sqrt(M))",
            Predictor::RmToBiQ => "n^2/B",
            Predictor::BiToRmQ => "(n^2/B)*log(n^2)/log(M)",
            Predictor::Steals => "p*h_refined",
            Predictor::BlockWait => "S*B",
            Predictor::ExcessQ => "S^(1/3)*n^2/B + S",
        }
    }

    fn accepts(self, o: &Obs) -> bool {
        let seq = o.p == 1.0;
        match self {
            Predictor::PrefixQ => seq && o.kernel == "prefix_sums",
            Predictor::MmQ => seq && o.kernel.starts_with("mm"),
            Predictor::RmToBiQ => seq && o.kernel == "rm_to_bi",
            Predictor::BiToRmQ => seq && o.kernel == "bi_to_rm",
            Predictor::Steals => o.p > 1.0,
            Predictor::BlockWait => o.kernel.starts_with("mm") && o.steals > 0.0,
            Predictor::ExcessQ => o.kernel.starts_with("mm") && o.q_seq.is_some(),
        }
    }

    /// `(measured, predicted)` for one row.
    pub fn eval(self, o: &Obs) -> Option<(f64, f64)> {
        if !self.accepts(o) {
            return None;
        }
        let (n, bl, m) = (o.n, o.block, o.m);
        Some(match self {
            Predictor::PrefixQ => (o.q, n / bl),
            Predictor::MmQ => (o.q, n.powi(3) / (bl * m.sqrt())),
            Predictor::RmToBiQ => (o.q, n * n / bl),
            Predictor::BiToRmQ => (o.q, (n * n / bl) * (n * n).ln() / m.ln()),
            Predictor::Steals => (o.steals, o.p * o.h_refined),
            Predictor::BlockWait => (o.block_wait / o.b, o.steals * bl),
            Predictor::ExcessQ => (o.q - o.q_seq?, o.steals.cbrt() * n * n / bl + o.steals),
        })
    }

    /// Steal counts pool seeds by their median.
    pub fn uses_median(self) -> bool {
        self == Predictor::Steals
    }

    pub fn points(self, obs: &[Obs]) -> Vec<FitPoint> {
        if self.uses_median() {
            let mut cells: BTreeMap<String, (Obs, Vec<f64>, f64)> = BTreeMap::new();
            for o in obs {
                if let Some((m, pr)) = self.eval(o) {
                    cells.entry(o.cell_key()).or_insert_with(|| (o.clone(), Vec::new(), pr)).1.push(m);
                }
            }
            return cells
                .into_iter()
                .map(|(key, (o, ms, pr))| FitPoint { key, group: o.group_key(), x: o.n, measured: median(&ms), predicted: pr })
                .collect();
        }
        obs.iter()
            .filter_map(|o| {
                self.eval(o).map(|(m, pr)| FitPoint {
                    key: format!("{} seed={}", o.cell_key(), o.seed),
                    group: o.group_key(),
                    x: o.n,
                    measured: m,
                    predicted: pr,
                })
            })
            .collect()
    }
}
