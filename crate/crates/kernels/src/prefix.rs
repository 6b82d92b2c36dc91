use sp_dag::*;

use crate::emit::{bp_tree, Ctx, Pos, Script, TreeScripts};

pub struct PrefixArrays {
    pub x: ArrayId,
    pub y: ArrayId,
    pub sums: ArrayId,
}

/// Up-pass: every join records the sum of its left subtree in `sums`
/// and hands the subtree total to its parent fork's slot.
struct UpPass {
    a: Arr,
}

/// Down-pass: each fork receives the prefix before its range and passes
/// the prefixes before each half to its children.
struct DownPass {
    a: Arr,
}

#[derive(Clone, Copy)]
struct Arr {
    x: ArrayId,
    y: ArrayId,
    s: ArrayId,
}

fn parent_slot(pos: &Pos, mode: Mode) -> Option<VarRef> {
    pos.parent.map(|(f, side)| VarRef::local(f, side, mode))
}

impl TreeScripts for UpPass {
    fn fork_words(&self) -> u32 {
        2
    }
    fn leaf(&mut self, pos: &Pos) -> Script {
        let mut s = vec![VarRef::read_global(self.a.x, pos.lo)];
        s.extend(parent_slot(pos, Mode::Write));
        (s, Op::Sum)
    }
    fn join(&mut self, pos: &Pos) -> Script {
        let mut s = vec![
            VarRef::read_local(pos.fork, 0),
            VarRef::write_global(self.a.s, pos.mid() - 1),
            VarRef::read_local(pos.fork, 1),
        ];
        s.extend(parent_slot(pos, Mode::Write));
        (s, Op::Sum)
    }
}

impl TreeScripts for DownPass {
    fn fork_words(&self) -> u32 {
        2
    }
    fn fork(&mut self, pos: &Pos) -> Script {
        let mut s: Vec<VarRef> = parent_slot(pos, Mode::Read).into_iter().collect();
        s.push(VarRef::write_local(pos.id, 0));
        s.push(VarRef::read_global(self.a.s, pos.mid() - 1));
        s.push(VarRef::write_local(pos.id, 1));
        (s, Op::Sum)
    }
    fn leaf(&mut self, pos: &Pos) -> Script {
        let mut s: Vec<VarRef> = parent_slot(pos, Mode::Read).into_iter().collect();
        s.push(VarRef::read_global(self.a.x, pos.lo));
        s.push(VarRef::write_global(self.a.y, pos.lo));
        (s, Op::Sum)
    }
}

/// Inclusive prefix sums of `n` words as two sequenced BP computations.
pub fn prefix_sums(n: u32) -> (SPDag, PrefixArrays) {
    assert!(n >= 1);
    let mut b = DagBuilder::new("prefix_sums");
    b.set_e2(1);
    b.set_local_limit(2);
    let x = b.global_array("x", n);
    let y = b.global_array("y", n);
    let s = b.global_array("sums", (n - 1).max(1));
    let a = Arr { x, y, s };
    let ctx = Ctx { type_level: 1, collection: 0, call: NONE };
    let whole = if n == 1 {
        let t = b.new_tree(TreeKind::Bp);
        let u = b.add(
            NodeKind::Leaf,
            &[VarRef::read_global(x, 0), VarRef::write_global(y, 0)],
            1,
            ctx.tag(Role::Leaf, t, 0),
        );
        let ti = b.tree_mut(t);
        ti.root = u;
        ti.up_root = u;
        ti.first = u;
        ti.last = u;
        ti.leaves = 1;
        Frag { src: u, sink: u }
    } else {
        let up = bp_tree(&mut b, ctx, n, &mut UpPass { a });
        let down = bp_tree(&mut b, ctx, n, &mut DownPass { a });
        b.seq(up, down)
    };
    (b.finish(whole), PrefixArrays { x, y, sums: s })
}

pub fn prefix_oracle(x: &[u32]) -> Vec<u32> {
    let mut acc = 0u64;
    x.iter()
        .map(|&v| {
            acc = (acc + v as u64) % VALUE_MOD;
            acc as u32
        })
        .collect()
}
