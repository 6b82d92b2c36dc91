//! Shared memory in size-B blocks, private fully associative LRU caches and
//! a write-invalidate directory, with per-block move logging.

mod alloc;
mod stack;
mod system;

pub use alloc::{Addr, Allocation, Allocator, RegionKind};
pub use stack::ExecStack;
pub use system::*;

#[derive(Debug, thiserror::Error)]
pub enum MemError {
    #[error("access to unallocated address {0}")]
    Unallocated(Addr),
    #[error("zero-word allocation")]
    ZeroAlloc,
    #[error("segment at {0} freed out of LIFO order")]
    NonLifoFree(Addr),
    #[error("segment at {0} is not live")]
    DoubleFree(Addr),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
