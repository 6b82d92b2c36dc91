use sp_dag::*;

use crate::emit::{bp_tree, spawn, Ctx, LeafFn, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmVariant {
    /// Eight recursive products in parallel, then one addition tree.
    Log2,
    /// Two collections of four products run one after the other.
    DepthN,
}

pub struct MmArrays {
    pub a: ArrayId,
    pub b: ArrayId,
    pub c: ArrayId,
}

/// `C = A * B` on BI-format `n x n` matrices.
pub fn mm(n: u32, variant: MmVariant) -> (SPDag, MmArrays) {
    let name = match variant {
        MmVariant::Log2 => "mm_log2",
        MmVariant::DepthN => "mm_depth_n",
    };
    let mut b = DagBuilder::new(name);
    b.set_e2(1);
    let a = b.global_array("A", n * n);
    let bb = b.global_array("B", n * n);
    let c = b.global_array("C", n * n);
    let f = mm_rec(&mut b, variant, n, a, 0, bb, 0, Target::Global(c, 0), NONE);
    (b.finish(f), MmArrays { a, b: bb, c })
}

#[allow(clippy::too_many_arguments)]
fn mm_rec(
    b: &mut DagBuilder,
    v: MmVariant,
    m: u32,
    a: ArrayId,
    a_off: u32,
    bm: ArrayId,
    b_off: u32,
    out: Target,
    parent: u32,
) -> Frag {
    if m == 1 {
        let ctx = Ctx { type_level: 2, collection: 0, call: parent };
        let u = b.add(
            NodeKind::Leaf,
            &[VarRef::read_global(a, a_off), VarRef::read_global(bm, b_off), out.write(0)],
            1,
            ctx.tag(Role::Leaf, NONE, 0),
        );
        b.set_op(u, Op::Mul);
        return Frag { src: u, sink: u };
    }
    let mm2 = m * m;
    let q = mm2 / 4;
    let call = b.new_call(mm2, 2 * mm2, parent, 2);
    let ctx = Ctx { type_level: 2, collection: 0, call };
    let entry = b.add(NodeKind::Serial, &[], 1, ctx.tag(Role::CallEntry, NONE, 0));
    b.declare(entry, 2 * mm2);
    let local = Target::Local(entry, 0);
    // Product (i, j, k) goes to half k of the local array, quadrant (i, j).
    let sub = |b: &mut DagBuilder, i: u32, j: u32, k: u32| {
        mm_rec(
            b,
            v,
            m / 2,
            a,
            a_off + (2 * i + k) * q,
            bm,
            b_off + (2 * k + j) * q,
            local.sub(k * mm2 + (2 * i + j) * q),
            call,
        )
    };
    let prods = match v {
        MmVariant::Log2 => spawn(b, ctx, 8, &mut |b, t| sub(b, (t >> 1) & 1, t & 1, t >> 2)),
        MmVariant::DepthN => {
            let c0 = spawn(b, ctx, 4, &mut |b, t| sub(b, t >> 1, t & 1, 0));
            let ctx1 = Ctx { collection: 1, ..ctx };
            let c1 = spawn(b, ctx1, 4, &mut |b, t| sub(b, t >> 1, t & 1, 1));
            b.seq(c0, c1)
        }
    };
    let add_ctx = Ctx { type_level: 1, collection: 0, call };
    let add = bp_tree(
        b,
        add_ctx,
        mm2,
        &mut LeafFn(|e| (vec![local.read(e), local.read(mm2 + e), out.write(e)], Op::Sum)),
    );
    let exit = b.add(NodeKind::Serial, &[], 1, ctx.tag(Role::CallExit, NONE, 0));
    b.set_release(exit, entry);
    let ci = b.call_mut(call);
    ci.entry = entry;
    ci.exit = exit;
    let f = b.seq(Frag { src: entry, sink: entry }, prods);
    let f = b.seq(f, add);
    b.seq(f, Frag { src: exit, sink: exit })
}

/// Accumulates every product straight into `C`, so each output word is
/// written `n` times. Violates limited access for `n > 1`; used only as a
/// negative example for validation.
pub fn mm_inplace(n: u32) -> SPDag {
    let mut b = DagBuilder::new("mm_inplace");
    b.set_e2(1);
    let a = b.global_array("A", n * n);
    let bm = b.global_array("B", n * n);
    let c = b.global_array("C", n * n);
    let ctx = Ctx { type_level: 1, collection: 0, call: NONE };
    let f = bp_tree(
        &mut b,
        ctx,
        n * n * n,
        &mut LeafFn(|t| {
            let (i, j, k) = (t / (n * n), (t / n) % n, t % n);
            (
                vec![
                    VarRef::read_global(a, i * n + k),
                    VarRef::read_global(bm, k * n + j),
                    VarRef::write_global(c, i * n + j),
                ],
                Op::Mul,
            )
        }),
    );
    b.finish(f)
}
