use memsys::{Arbitration, MemConfig};
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    /// Cache capacity in words.
    #[serde(rename = "M")]
    pub m: u32,
    /// Block size in words.
    #[serde(rename = "B")]
    pub block: u32,
    /// Cache-miss cost.
    pub b: u64,
    /// Lower bound on a successful steal's cost.
    pub s: u64,
    /// Successful steals cost between `s` and `a2 * s`.
    pub a2: u64,
    pub s_fail: u64,
    pub seed: u64,
    pub policy: Arbitration,
    pub stall_cap: u32,
    pub e1: u32,
    pub e2: u32,
    /// Initial chunk size of execution stacks, in words.
    pub stack_chunk: u64,
    pub log_moves: bool,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            p: 1,
            m: 256,
            block: 8,
            b: 4,
            s: 4,
            a2: 2,
            s_fail: 4,
            seed: 0,
            policy: Arbitration::Random,
            stall_cap: 64,
            e1: sp_dag::DEFAULT_E1,
            e2: 1,
            stack_chunk: 64,
            log_moves: true,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn new(p: usize, m: u32, block: u32, b: u64, s: u64) -> Self {
        SimConfig { p, m, block, b, s, s_fail: s, ..Default::default() }
    }

    pub fn e(&self) -> u32 {
        self.e1.max(self.e2)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.p == 0 || self.p > 64 {
            return bad("p must be in 1..=64");
        }
        if self.block == 0 || self.m < self.block {
            return bad("need B >= 1 and M >= B");
        }
        if self.b == 0 {
            return bad("b must be positive");
        }
        if self.s < self.b {
            return bad("s must be at least b");
        }
        if self.s % self.b != 0 {
            return bad("s must be a multiple of b");
        }
        if self.a2 == 0 {
            return bad("a2 must be at least 1");
        }
        if self.s_fail == 0 || self.s_fail > self.s {
            return bad("s_fail must be in 1..=s");
        }
        Ok(())
    }

    pub fn mem(&self) -> MemConfig {
        MemConfig {
            p: self.p,
            m: self.m,
            block_words: self.block,
            miss_cost: self.b,
            policy: self.policy,
            stall_cap: self.stall_cap,
            seed: self.seed,
            log_moves: self.log_moves,
        }
    }
}
