use crate::alloc::{Addr, Allocator, RegionKind};
use crate::MemError;

#[derive(Debug, Clone)]
struct Chunk {
    base: Addr,
    cap: u64,
    used: u64,
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    addr: Addr,
    words: u64,
    chunk: usize,
}

/// A task's execution stack: word-granular LIFO segments inside
/// block-aligned chunks. Freed words are reused by later pushes, so one
/// block can host the variables of several successive segments.
#[derive(Debug, Clone)]
pub struct ExecStack {
    region: RegionKind,
    chunk_words: u64,
    chunks: Vec<Chunk>,
    cur: usize,
    segs: Vec<Seg>,
}

impl ExecStack {
    pub fn new(region: RegionKind, chunk_words: u64) -> Self {
        ExecStack { region, chunk_words: chunk_words.max(1), chunks: Vec::new(), cur: 0, segs: Vec::new() }
    }

    pub fn region(&self) -> RegionKind {
        self.region
    }

    pub fn depth(&self) -> usize {
        self.segs.len()
    }

    /// Words currently in use.
    pub fn live_words(&self) -> u64 {
        self.segs.iter().map(|s| s.words).sum()
    }

    /// Address ranges of all chunks owned by this stack.
    pub fn chunks(&self) -> impl Iterator<Item = (Addr, u64)> + '_ {
        self.chunks.iter().map(|c| (c.base, c.cap))
    }

    pub fn push(&mut self, alloc: &mut Allocator, words: u64) -> Result<Addr, MemError> {
        if words == 0 {
            return Err(MemError::ZeroAlloc);
        }
        loop {
            if let Some(c) = self.chunks.get_mut(self.cur) {
                if c.used + words <= c.cap {
                    let addr = c.base + c.used;
                    c.used += words;
                    self.segs.push(Seg { addr, words, chunk: self.cur });
                    return Ok(addr);
                }
                if self.cur + 1 < self.chunks.len() && self.chunks[self.cur + 1].cap >= words {
                    self.cur += 1;
                    continue;
                }
            }
            let cap = self.chunk_words.max(words);
            let base = alloc.allocate(self.region, cap)?;
            let cap = cap.div_ceil(alloc.block_words()) * alloc.block_words();
            // Chunks past the current one are too small for this push.
            self.chunks.truncate(self.cur + 1);
            self.chunks.push(Chunk { base, cap, used: 0 });
            self.cur = self.chunks.len() - 1;
        }
    }

    pub fn free(&mut self, addr: Addr) -> Result<(), MemError> {
        match self.segs.last() {
            Some(top) if top.addr == addr => {
                let top = self.segs.pop().unwrap();
                self.chunks[top.chunk].used -= top.words;
                self.cur = top.chunk;
                Ok(())
            }
            _ if self.segs.iter().any(|s| s.addr == addr) => Err(MemError::NonLifoFree(addr)),
            _ => Err(MemError::DoubleFree(addr)),
        }
    }
}
