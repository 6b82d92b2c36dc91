use std::collections::HashMap;
use std::io::Write;
use std::num::NonZeroUsize;

use lru::LruCache;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{Addr, Allocator, RegionKind};
use crate::stack::ExecStack;
use crate::MemError;

pub type BlockId = u64;

/// Sentinel for "no node/task" in move records.
pub const NO_ID: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Arbitration {
    #[default]
    Random,
    RoundRobin,
    /// Among contenders the one that has waited longest loses.
    Adversarial,
}

impl std::str::FromStr for Arbitration {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Arbitration::Random),
            "round-robin" | "rr" => Ok(Arbitration::RoundRobin),
            "adversarial" => Ok(Arbitration::Adversarial),
            _ => Err(format!("unknown arbitration policy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemConfig {
    pub p: usize,
    /// Cache capacity in words.
    pub m: u32,
    /// Block size in words.
    pub block_words: u32,
    /// Extra latency of a cache or block miss.
    pub miss_cost: u64,
    pub policy: Arbitration,
    /// Consecutive contention losses after which an access is forced through.
    pub stall_cap: u32,
    pub seed: u64,
    pub log_moves: bool,
}

impl MemConfig {
    pub fn new(p: usize, m: u32, block_words: u32, miss_cost: u64) -> Self {
        MemConfig { p, m, block_words, miss_cost, policy: Arbitration::Random, stall_cap: 64, seed: 0, log_moves: true }
    }
    pub fn capacity_blocks(&self) -> usize {
        (self.m / self.block_words).max(1) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Hit,
    CacheMiss,
    BlockMiss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cause {
    Cold,
    Evict,
    Invalidate,
}

#[derive(Debug, Clone, Copy)]
pub struct AccessReq {
    pub proc: usize,
    pub addr: Addr,
    pub write: bool,
    /// The access lost at least one contention round before issuing.
    pub stalled: bool,
    pub node: u32,
    pub task: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct AccessOutcome {
    pub class: Class,
    /// Latency of the access itself, stall cycles excluded.
    pub latency: u64,
    /// Value read, or the value written.
    pub value: u32,
    /// Set when the access fetched the block.
    pub fetch: Option<Cause>,
    /// For invalidation refetches, the node of the last write before it.
    pub writer: u32,
}

/// One transfer of a block into a cache.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Move {
    pub t: u64,
    pub block: BlockId,
    /// Source cache, or `None` for shared memory.
    pub from: Option<u16>,
    pub to: u16,
    pub cause: Cause,
    pub node: u32,
    pub task: u32,
    /// For invalidation refetches, the node of the last write before it.
    pub writer: u32,
}

#[derive(Debug, Clone, Default)]
struct BlockState {
    holders: u64,
    ever: u64,
    inval: u64,
    moves: u32,
    last_writer: u32,
    rr: u16,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct MemCounters {
    pub hits: u64,
    /// Cold and capacity misses.
    pub cache_misses: u64,
    pub cold_misses: u64,
    pub block_misses: u64,
    pub stall_cycles: u64,
    pub contention_rounds: u64,
    pub cap_hits: u64,
    pub invalidations: u64,
}

pub struct MemSystem {
    cfg: MemConfig,
    alloc: Allocator,
    values: Vec<u32>,
    blocks: Vec<BlockState>,
    caches: Vec<LruCache<BlockId, ()>>,
    waits: Vec<u32>,
    rng: ChaCha8Rng,
    moves: Vec<Move>,
    pub counters: MemCounters,
    pub per_proc_misses: Vec<u64>,
    peak_resident: usize,
}

impl MemSystem {
    pub fn new(cfg: MemConfig) -> Self {
        assert!(cfg.p >= 1 && cfg.p <= 64, "1 <= p <= 64");
        let cap = NonZeroUsize::new(cfg.capacity_blocks()).unwrap();
        MemSystem {
            alloc: Allocator::new(cfg.block_words),
            values: Vec::new(),
            blocks: Vec::new(),
            caches: (0..cfg.p).map(|_| LruCache::new(cap)).collect(),
            waits: vec![0; cfg.p],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d656d),
            moves: Vec::new(),
            counters: MemCounters::default(),
            per_proc_misses: vec![0; cfg.p],
            peak_resident: 0,
            cfg,
        }
    }

    pub fn config(&self) -> &MemConfig {
        &self.cfg
    }

    pub fn allocator(&mut self) -> &mut Allocator {
        &mut self.alloc
    }

    pub fn block_of(&self, addr: Addr) -> BlockId {
        addr / self.cfg.block_words as u64
    }

    pub fn allocate(&mut self, region: RegionKind, words: u64) -> Result<Addr, MemError> {
        let a = self.alloc.allocate(region, words)?;
        self.grow();
        Ok(a)
    }

    pub fn push_segment(&mut self, stack: &mut ExecStack, words: u64) -> Result<Addr, MemError> {
        let a = stack.push(&mut self.alloc, words)?;
        self.grow();
        Ok(a)
    }

    /// Extends value and block tables to the allocator's high-water mark.
    pub fn grow(&mut self) {
        let hw = self.alloc.high_water() as usize;
        if self.values.len() < hw {
            self.values.resize(hw, 0);
            let nb = hw / self.cfg.block_words as usize;
            self.blocks.resize_with(nb, BlockState::default);
        }
    }

    /// Direct store, used to load inputs; no coherence effect.
    pub fn poke(&mut self, addr: Addr, v: u32) {
        self.values[addr as usize] = v;
    }

    pub fn peek(&self, addr: Addr) -> u32 {
        self.values[addr as usize]
    }

    fn check(&self, addr: Addr) -> Result<(), MemError> {
        if (addr as usize) < self.values.len() && self.alloc.find(addr).is_some() {
            Ok(())
        } else {
            Err(MemError::Unallocated(addr))
        }
    }

    /// Picks the winner among processors issuing same-cycle accesses to one
    /// block when at least one of them writes. `procs` must be sorted.
    pub fn arbitrate(&mut self, block: BlockId, procs: &[usize]) -> usize {
        debug_assert!(procs.len() >= 2);
        self.counters.contention_rounds += 1;
        let capped = procs.iter().copied().find(|&q| self.waits[q] >= self.cfg.stall_cap);
        let winner = if let Some(q) = capped {
            self.counters.cap_hits += 1;
            q
        } else {
            match self.cfg.policy {
                Arbitration::Random => procs[self.rng.gen_range(0..procs.len())],
                Arbitration::RoundRobin => {
                    let ptr = self.blocks[block as usize].rr as usize;
                    procs.iter().copied().find(|&q| q >= ptr).unwrap_or(procs[0])
                }
                Arbitration::Adversarial => {
                    *procs.iter().min_by_key(|&&q| (self.waits[q], q)).unwrap()
                }
            }
        };
        self.blocks[block as usize].rr = ((winner + 1) % self.cfg.p) as u16;
        for &q in procs {
            if q == winner {
                self.waits[q] = 0;
            } else {
                self.waits[q] += 1;
                self.counters.stall_cycles += 1;
            }
        }
        winner
    }

    /// Clears a processor's consecutive-loss count.
    pub fn reset_wait(&mut self, proc: usize) {
        self.waits[proc] = 0;
    }

    /// Performs one access at time `now`. The coherence effect of a write is
    /// applied immediately.
    pub fn access(&mut self, req: &AccessReq, write_value: u32, now: u64) -> Result<AccessOutcome, MemError> {
        self.check(req.addr)?;
        let blk = self.block_of(req.addr);
        let bit = 1u64 << req.proc;
        let st = &self.blocks[blk as usize];
        let resident = st.holders & bit != 0;
        let mut fetch = None;
        let mut writer_out = NO_ID;
        let class = if resident {
            self.caches[req.proc].promote(&blk);
            if req.stalled {
                Class::BlockMiss
            } else {
                Class::Hit
            }
        } else {
            let cause = if st.inval & bit != 0 {
                Cause::Invalidate
            } else if st.ever & bit != 0 {
                Cause::Evict
            } else {
                Cause::Cold
            };
            let from = (st.holders != 0).then(|| st.holders.trailing_zeros() as u16);
            let writer = st.last_writer;
            self.fill(req.proc, blk);
            let st = &mut self.blocks[blk as usize];
            st.inval &= !bit;
            st.moves += 1;
            if self.cfg.log_moves {
                self.moves.push(Move {
                    t: now,
                    block: blk,
                    from,
                    to: req.proc as u16,
                    cause,
                    node: req.node,
                    task: req.task,
                    writer: if cause == Cause::Invalidate { writer } else { NO_ID },
                });
            }
            fetch = Some(cause);
            if cause == Cause::Invalidate {
                writer_out = writer;
            }
            if cause == Cause::Invalidate || req.stalled {
                Class::BlockMiss
            } else {
                Class::CacheMiss
            }
        };
        match class {
            Class::Hit => self.counters.hits += 1,
            Class::CacheMiss => {
                self.counters.cache_misses += 1;
                self.per_proc_misses[req.proc] += 1;
                if fetch == Some(Cause::Cold) {
                    self.counters.cold_misses += 1;
                }
            }
            Class::BlockMiss => self.counters.block_misses += 1,
        }
        let value = if req.write {
            self.values[req.addr as usize] = write_value;
            self.invalidate_others(req.proc, blk);
            self.blocks[blk as usize].last_writer = req.node;
            write_value
        } else {
            self.values[req.addr as usize]
        };
        let latency = 1 + if class == Class::Hit { 0 } else { self.cfg.miss_cost };
        Ok(AccessOutcome { class, latency, value, fetch, writer: writer_out })
    }

    fn fill(&mut self, proc: usize, blk: BlockId) {
        let bit = 1u64 << proc;
        if let Some((old, ())) = self.caches[proc].push(blk, ()) {
            if old != blk {
                self.blocks[old as usize].holders &= !bit;
            }
        }
        let st = &mut self.blocks[blk as usize];
        st.holders |= bit;
        st.ever |= bit;
        self.peak_resident = self.peak_resident.max(self.caches[proc].len());
    }

    fn invalidate_others(&mut self, proc: usize, blk: BlockId) {
        let bit = 1u64 << proc;
        let others = self.blocks[blk as usize].holders & !bit;
        if others == 0 {
            return;
        }
        let mut m = others;
        while m != 0 {
            let q = m.trailing_zeros() as usize;
            m &= m - 1;
            self.caches[q].pop(&blk);
            self.counters.invalidations += 1;
        }
        let st = &mut self.blocks[blk as usize];
        st.holders = bit;
        st.inval |= others;
    }

    pub fn holders(&self, blk: BlockId) -> u64 {
        self.blocks.get(blk as usize).map_or(0, |b| b.holders)
    }

    pub fn resident(&self, proc: usize) -> usize {
        self.caches[proc].len()
    }

    pub fn peak_resident(&self) -> usize {
        self.peak_resident
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn block_moves(&self, blk: BlockId) -> u32 {
        self.blocks.get(blk as usize).map_or(0, |b| b.moves)
    }

    /// Blocks fetched at least once by any cache.
    pub fn distinct_blocks_touched(&self) -> usize {
        self.blocks.iter().filter(|b| b.ever != 0).count()
    }

    /// Transfers of `blk` with timestamps in `[t1, t2]`.
    pub fn block_delay(&self, blk: BlockId, t1: u64, t2: u64) -> usize {
        block_delay(&self.moves, blk, t1, t2)
    }

    pub fn write_moves_csv<W: Write>(&self, w: W) -> Result<(), MemError> {
        write_moves_csv(&self.moves, w)
    }
}

pub fn block_delay(moves: &[Move], blk: BlockId, t1: u64, t2: u64) -> usize {
    moves.iter().filter(|m| m.block == blk && m.t >= t1 && m.t <= t2).count()
}

/// Per-block move timestamps, for repeated interval queries.
pub struct MoveIndex {
    by_block: HashMap<BlockId, Vec<u64>>,
}

impl MoveIndex {
    pub fn new(moves: &[Move]) -> Self {
        let mut by_block: HashMap<BlockId, Vec<u64>> = HashMap::new();
        for m in moves {
            by_block.entry(m.block).or_default().push(m.t);
        }
        MoveIndex { by_block }
    }
    pub fn block_delay(&self, blk: BlockId, t1: u64, t2: u64) -> usize {
        let Some(v) = self.by_block.get(&blk) else { return 0 };
        let lo = v.partition_point(|&t| t < t1);
        let hi = v.partition_point(|&t| t <= t2);
        hi.saturating_sub(lo)
    }
}

pub fn write_moves_csv<W: Write>(moves: &[Move], w: W) -> Result<(), MemError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["time", "block", "from_cache", "to_cache", "cause"])?;
    for m in moves {
        let from = m.from.map_or_else(|| "mem".to_string(), |c| c.to_string());
        let cause = match m.cause {
            Cause::Cold => "cold",
            Cause::Evict => "evict",
            Cause::Invalidate => "invalidate",
        };
        wr.write_record([m.t.to_string(), m.block.to_string(), from, m.to.to_string(), cause.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}
