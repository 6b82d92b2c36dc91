use sp_dag::*;

use crate::emit::{bp_tree, spawn, Ctx, LeafFn, Target};
use crate::layout::bi_coords;

/// Row-major to bit-interleaved copy: one BP tree whose leaves write the
/// output in BI order.
pub fn rm_to_bi(n: u32) -> (SPDag, ArrayId, ArrayId) {
    let mut b = DagBuilder::new("rm_to_bi");
    b.set_e2(1);
    let src = b.global_array("rm", n * n);
    let dst = b.global_array("bi", n * n);
    let ctx = Ctx { type_level: 1, collection: 0, call: NONE };
    let f = bp_tree(
        &mut b,
        ctx,
        n * n,
        &mut LeafFn(|k| {
            let (r, c) = bi_coords(k);
            (vec![VarRef::read_global(src, r * n + c), VarRef::write_global(dst, k)], Op::Sum)
        }),
    );
    (b.finish(f), src, dst)
}

/// Bit-interleaved to row-major: convert the four quadrants recursively
/// into a local array, then copy it out in row-major order.
pub fn bi_to_rm(n: u32) -> (SPDag, ArrayId, ArrayId) {
    let mut b = DagBuilder::new("bi_to_rm");
    b.set_e2(1);
    let src = b.global_array("bi", n * n);
    let dst = b.global_array("rm", n * n);
    let f = bi_to_rm_rec(&mut b, n, src, 0, Target::Global(dst, 0), NONE);
    (b.finish(f), src, dst)
}

fn bi_to_rm_rec(b: &mut DagBuilder, m: u32, src: ArrayId, off: u32, dst: Target, parent: u32) -> Frag {
    let leaf_ctx = Ctx { type_level: 1, collection: 0, call: parent };
    if m <= 2 {
        // BI and RM orders coincide on a 2x2 block.
        return bp_tree(
            b,
            leaf_ctx,
            m * m,
            &mut LeafFn(|k| (vec![VarRef::read_global(src, off + k), dst.write(k)], Op::Sum)),
        );
    }
    let h = m / 2;
    let q = h * h;
    let call = b.new_call(m * m, m * m, parent, 2);
    let ctx = Ctx { type_level: 2, collection: 0, call };
    let entry = b.add(NodeKind::Serial, &[], 1, ctx.tag(Role::CallEntry, NONE, 0));
    b.declare(entry, m * m);
    let local = Target::Local(entry, 0);
    let subs = spawn(b, ctx, 4, &mut |b, i| bi_to_rm_rec(b, h, src, off + i * q, local.sub(i * q), call));
    let merge_ctx = Ctx { type_level: 1, collection: 0, call };
    let merge = bp_tree(
        b,
        merge_ctx,
        m * m,
        &mut LeafFn(|j| {
            let (r, c) = (j / m, j % m);
            let quad = 2 * (r / h) + c / h;
            let e = quad * q + (r % h) * h + c % h;
            (vec![local.read(e), dst.write(j)], Op::Sum)
        }),
    );
    let exit = b.add(NodeKind::Serial, &[], 1, ctx.tag(Role::CallExit, NONE, 0));
    b.set_release(exit, entry);
    let c = b.call_mut(call);
    c.entry = entry;
    c.exit = exit;
    let f = b.seq(Frag { src: entry, sink: entry }, subs);
    let f = b.seq(f, merge);
    b.seq(f, Frag { src: exit, sink: exit })
}
