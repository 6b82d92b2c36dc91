use serde::Serialize;

use crate::MemError;

pub type Addr = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RegionKind {
    Global,
    /// Execution-stack region of one processor.
    Stack(u16),
}

#[derive(Debug, Clone, Copy)]
pub struct Allocation {
    pub base: Addr,
    pub words: u64,
    pub region: RegionKind,
}

/// Bump allocator handing out whole blocks, so distinct allocations never
/// share a block.
#[derive(Debug, Clone)]
pub struct Allocator {
    block_words: u64,
    next: Addr,
    allocs: Vec<Allocation>,
}

impl Allocator {
    pub fn new(block_words: u32) -> Self {
        assert!(block_words >= 1);
        Allocator { block_words: block_words as u64, next: 0, allocs: Vec::new() }
    }

    pub fn block_words(&self) -> u64 {
        self.block_words
    }

    pub fn allocate(&mut self, region: RegionKind, words: u64) -> Result<Addr, MemError> {
        if words == 0 {
            return Err(MemError::ZeroAlloc);
        }
        let rounded = words.div_ceil(self.block_words) * self.block_words;
        let base = self.next;
        self.next += rounded;
        self.allocs.push(Allocation { base, words: rounded, region });
        Ok(base)
    }

    /// End of the highest allocation.
    pub fn high_water(&self) -> Addr {
        self.next
    }

    pub fn find(&self, addr: Addr) -> Option<&Allocation> {
        let i = self.allocs.partition_point(|a| a.base <= addr);
        let a = self.allocs.get(i.checked_sub(1)?)?;
        (addr < a.base + a.words).then_some(a)
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocs
    }
}
