use memsys::*;
use proptest::prelude::*;

fn sys(p: usize, m: u32, bw: u32) -> MemSystem {
    MemSystem::new(MemConfig::new(p, m, bw, 4))
}

fn rd(proc: usize, addr: Addr) -> AccessReq {
    AccessReq { proc, addr, write: false, stalled: false, node: 0, task: 0 }
}

fn wr(proc: usize, addr: Addr) -> AccessReq {
    AccessReq { write: true, ..rd(proc, addr) }
}

#[test]
fn sequential_scan_cold_misses() {
    let mut m = sys(1, 64, 8);
    let base = m.allocate(RegionKind::Global, 64).unwrap();
    let mut classes = Vec::new();
    for i in 0..64 {
        classes.push(m.access(&rd(0, base + i), 0, i).unwrap().class);
    }
    assert_eq!(classes.iter().filter(|&&c| c == Class::CacheMiss).count(), 8);
    assert_eq!(classes.iter().filter(|&&c| c == Class::Hit).count(), 56);
    assert_eq!(m.counters.block_misses, 0);
}

#[test]
fn remote_write_causes_block_miss() {
    let mut m = sys(2, 64, 8);
    let base = m.allocate(RegionKind::Global, 8).unwrap();
    m.access(&rd(1, base + 3), 0, 0).unwrap();
    m.access(&wr(0, base), 7, 1).unwrap();
    assert_eq!(m.holders(m.block_of(base)), 1);
    let o = m.access(&rd(1, base + 3), 0, 2).unwrap();
    assert_eq!(o.class, Class::BlockMiss);
    assert_eq!(o.fetch, Some(Cause::Invalidate));
    assert_eq!(o.latency, 5);
    let o = m.access(&rd(1, base), 0, 3).unwrap();
    assert_eq!(o.value, 7);
    assert_eq!(o.class, Class::Hit);
}

#[test]
fn write_hit_on_shared_block_invalidates() {
    let mut m = sys(3, 64, 4);
    let base = m.allocate(RegionKind::Global, 4).unwrap();
    for q in 0..3 {
        m.access(&rd(q, base + q as u64), 0, 0).unwrap();
    }
    assert_eq!(m.holders(0), 0b111);
    let o = m.access(&wr(2, base), 1, 1).unwrap();
    assert_eq!(o.class, Class::Hit);
    assert_eq!(o.latency, 1);
    assert_eq!(m.holders(0), 0b100);
    assert_eq!(m.counters.invalidations, 2);
}

#[test]
fn alternating_writers_delay() {
    for x in 1..20u64 {
        let mut m = sys(2, 64, 8);
        let base = m.allocate(RegionKind::Stack(0), 8).unwrap();
        let blk = m.block_of(base);
        let mut t = 0;
        for _ in 0..x {
            m.access(&AccessReq { task: 0, ..wr(0, base) }, 1, t).unwrap();
            t += 1;
            m.access(&AccessReq { task: 1, ..wr(1, base + 1) }, 2, t).unwrap();
            t += 1;
        }
        let moves = m.block_delay(blk, 0, t);
        assert_eq!(moves, m.moves().len());
        assert!(moves as u64 <= 2 * (2 * x));
        // Transfers toward the local side, caused by the remote writes.
        let toward_local = m.moves().iter().filter(|mv| mv.to == 0 && mv.cause == Cause::Invalidate).count();
        assert!(toward_local as u64 <= x);
    }
}

#[test]
fn allocation_is_block_granular() {
    let mut a = Allocator::new(8);
    let s0 = a.allocate(RegionKind::Stack(0), 3).unwrap();
    let s1 = a.allocate(RegionKind::Stack(1), 3).unwrap();
    assert_eq!(s0 % 8, 0);
    assert_eq!(s1 - s0, 8);
    assert_ne!(s0 / 8, s1 / 8);
    assert!(matches!(a.allocate(RegionKind::Global, 0), Err(MemError::ZeroAlloc)));
    assert_eq!(a.find(s0 + 7).unwrap().region, RegionKind::Stack(0));
    assert!(a.find(16).is_none());
}

#[test]
fn unallocated_access_faults() {
    let mut m = sys(1, 64, 8);
    m.allocate(RegionKind::Global, 8).unwrap();
    assert!(matches!(m.access(&rd(0, 100), 0, 0), Err(MemError::Unallocated(100))));
}

#[test]
fn stack_reuses_freed_words() {
    let mut a = Allocator::new(8);
    let mut s = ExecStack::new(RegionKind::Stack(0), 64);
    let sa = s.push(&mut a, 2).unwrap();
    let sb = s.push(&mut a, 3).unwrap();
    s.free(sb).unwrap();
    let sc = s.push(&mut a, 4).unwrap();
    assert_eq!(sc, sb);
    assert_eq!(sa / 8, sc / 8);
    assert!(matches!(s.free(sa), Err(MemError::NonLifoFree(_))));
    s.free(sc).unwrap();
    assert!(matches!(s.free(sc), Err(MemError::DoubleFree(_))));
    s.free(sa).unwrap();
    assert_eq!(s.depth(), 0);
}

#[test]
fn stack_grows_in_new_chunks() {
    let mut a = Allocator::new(4);
    let mut s = ExecStack::new(RegionKind::Stack(0), 8);
    let x = s.push(&mut a, 6).unwrap();
    let y = s.push(&mut a, 6).unwrap();
    assert!(y >= x + 8);
    let z = s.push(&mut a, 20).unwrap();
    assert_eq!(z % 4, 0);
    s.free(z).unwrap();
    s.free(y).unwrap();
    let w = s.push(&mut a, 1).unwrap();
    assert_eq!(w, y);
}

#[test]
fn untouched_block_has_no_delay() {
    let m = sys(2, 64, 8);
    assert_eq!(m.block_delay(5, 0, 1000), 0);
}

#[test]
fn private_block_no_block_misses() {
    let mut m = sys(2, 16, 8);
    let a = m.allocate(RegionKind::Stack(0), 8).unwrap();
    let other = m.allocate(RegionKind::Global, 64).unwrap();
    let mut t = 0;
    for round in 0..10 {
        m.access(&wr(0, a + round % 8), 0, t).unwrap();
        for i in 0..16 {
            m.access(&rd(0, other + 8 * (i % 8)), 0, t).unwrap();
            t += 1;
        }
    }
    let blk = m.block_of(a);
    let evict_refetch = m.moves().iter().filter(|mv| mv.block == blk && mv.cause == Cause::Evict).count();
    assert!(m.block_delay(blk, 0, t) <= 1 + evict_refetch);
    assert_eq!(m.counters.block_misses, 0);
}

#[test]
fn move_index_agrees_with_scan() {
    let mut m = sys(3, 32, 4);
    let base = m.allocate(RegionKind::Global, 32).unwrap();
    for t in 0..300u64 {
        let q = (t * 7 % 3) as usize;
        let addr = base + (t * 13 % 32);
        let req = if t % 3 == 0 { wr(q, addr) } else { rd(q, addr) };
        m.access(&req, t as u32, t).unwrap();
    }
    let idx = MoveIndex::new(m.moves());
    for blk in 0..8 {
        for (a, b) in [(0, 299), (50, 120), (200, 200)] {
            assert_eq!(idx.block_delay(blk, a, b), m.block_delay(blk, a, b));
        }
    }
}

#[test]
fn moves_csv_header() {
    let mut m = sys(2, 32, 4);
    let base = m.allocate(RegionKind::Global, 4).unwrap();
    m.access(&wr(0, base), 1, 0).unwrap();
    m.access(&rd(1, base), 0, 1).unwrap();
    let mut out = Vec::new();
    m.write_moves_csv(&mut out).unwrap();
    let s = String::from_utf8(out).unwrap();
    let lines: Vec<_> = s.lines().collect();
    assert_eq!(lines[0], "time,block,from_cache,to_cache,cause");
    assert_eq!(lines[1], "0,0,mem,0,cold");
    assert_eq!(lines[2], "1,0,0,1,cold");
}

fn arb(policy: Arbitration, cap: u32) -> MemSystem {
    let mut c = MemConfig::new(4, 64, 4, 4);
    c.policy = policy;
    c.stall_cap = cap;
    c.seed = 9;
    let mut m = MemSystem::new(c);
    m.allocate(RegionKind::Global, 4).unwrap();
    m
}

#[test]
fn arbitration_single_winner_and_cap() {
    for policy in [Arbitration::Random, Arbitration::RoundRobin, Arbitration::Adversarial] {
        let mut m = arb(policy, 5);
        let mut pending = vec![0usize, 1, 2, 3];
        let mut rounds = 0;
        while pending.len() > 1 {
            let w = m.arbitrate(0, &pending);
            assert!(pending.contains(&w));
            pending.retain(|&q| q != w);
            rounds += 1;
        }
        assert_eq!(rounds, 3);
        assert_eq!(m.counters.stall_cycles, 3 + 2 + 1);
    }
}

#[test]
fn adversarial_starves_until_cap() {
    let mut m = arb(Arbitration::Adversarial, 3);
    // Processor 3 keeps contending against fresh rivals.
    let mut wins = Vec::new();
    for _ in 0..4 {
        let w = m.arbitrate(0, &[0, 3]);
        wins.push(w);
    }
    assert_eq!(wins, vec![0, 0, 0, 3]);
    assert_eq!(m.counters.cap_hits, 1);
}

#[test]
fn round_robin_rotates() {
    let mut m = arb(Arbitration::RoundRobin, 100);
    let w: Vec<_> = (0..4).map(|_| m.arbitrate(0, &[0, 1, 2, 3])).collect();
    assert_eq!(w, vec![0, 1, 2, 3]);
}

#[test]
fn stalled_access_is_block_miss() {
    let mut m = sys(2, 64, 8);
    let base = m.allocate(RegionKind::Global, 8).unwrap();
    m.access(&rd(1, base), 0, 0).unwrap();
    let o = m.access(&AccessReq { stalled: true, ..wr(1, base) }, 3, 2).unwrap();
    assert_eq!(o.class, Class::BlockMiss);
    assert_eq!(o.fetch, None);
}

#[derive(Debug, Clone)]
struct Op {
    proc: usize,
    word: u64,
    write: bool,
}

fn trace(p: usize, words: u64) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        (0..p, 0..words, any::<bool>()).prop_map(|(proc, word, write)| Op { proc, word, write }),
        1..400,
    )
}

proptest! {
    #[test]
    fn trace_invariants(p in 1usize..5, ops in trace(4, 96), mblocks in 1u32..6) {
        let bw = 4;
        let mut m = MemSystem::new(MemConfig::new(p, mblocks * bw, bw, 3));
        let base = m.allocate(RegionKind::Global, 96).unwrap();
        let mut touched = std::collections::HashSet::new();
        let mut shadow = vec![0u32; 96];
        for (t, op) in ops.iter().enumerate() {
            let q = op.proc % p;
            let req = AccessReq { proc: q, addr: base + op.word, write: op.write, stalled: false, node: t as u32, task: 0 };
            let o = m.access(&req, t as u32, t as u64).unwrap();
            touched.insert(op.word / bw as u64);
            if op.write {
                shadow[op.word as usize] = t as u32;
                // Single writer: the writer is the only holder.
                prop_assert_eq!(m.holders(m.block_of(req.addr)), 1u64 << q);
            } else {
                prop_assert_eq!(o.value, shadow[op.word as usize]);
            }
            for r in 0..p {
                prop_assert!(m.resident(r) <= mblocks as usize);
            }
        }
        prop_assert!(m.counters.cache_misses + m.counters.block_misses >= touched.len() as u64);
        prop_assert!(m.counters.cache_misses >= m.counters.cold_misses);
        prop_assert!(m.counters.cold_misses >= touched.len() as u64);
        prop_assert_eq!(m.moves().len() as u64, m.counters.cache_misses + m.counters.block_misses);
        if p == 1 {
            prop_assert_eq!(m.counters.block_misses, 0);
        }
    }
}
