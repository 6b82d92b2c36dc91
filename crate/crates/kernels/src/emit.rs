use sp_dag::*;

/// Where a subcomputation writes its output.
#[derive(Debug, Clone, Copy)]
pub enum Target {
    Global(ArrayId, u32),
    /// Words of the segment declared by a node, starting at an offset.
    Local(NodeId, u32),
}

impl Target {
    pub fn at(self, k: u32, mode: Mode) -> VarRef {
        match self {
            Target::Global(a, base) => VarRef::global(a, base + k, mode),
            Target::Local(d, base) => VarRef::local(d, base + k, mode),
        }
    }
    pub fn write(self, k: u32) -> VarRef {
        self.at(k, Mode::Write)
    }
    pub fn read(self, k: u32) -> VarRef {
        self.at(k, Mode::Read)
    }
    pub fn sub(self, off: u32) -> Target {
        match self {
            Target::Global(a, b) => Target::Global(a, b + off),
            Target::Local(d, b) => Target::Local(d, b + off),
        }
    }
}

/// Tag fields shared by every node of one emitted tree.
#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub type_level: u8,
    pub collection: u8,
    pub call: u32,
}

impl Ctx {
    pub fn tag(&self, role: Role, instance: u32, depth: u32) -> NodeTag {
        NodeTag {
            role,
            instance,
            depth: depth as u16,
            type_level: self.type_level,
            collection: self.collection,
            call: self.call,
        }
    }
}

/// Position of a tree node handed to script callbacks.
#[derive(Debug, Clone, Copy)]
pub struct Pos {
    pub lo: u32,
    pub hi: u32,
    pub depth: u32,
    /// Id the node will receive.
    pub id: NodeId,
    /// Fork whose child this node is, and which side (0 left, 1 right).
    pub parent: Option<(NodeId, u32)>,
    /// For joins, the matching fork.
    pub fork: NodeId,
}

impl Pos {
    pub fn mid(&self) -> u32 {
        self.lo + (self.hi - self.lo) / 2
    }
}

pub type Script = (Vec<VarRef>, Op);

pub trait TreeScripts {
    /// Words declared by each fork.
    fn fork_words(&self) -> u32 {
        0
    }
    fn leaf(&mut self, pos: &Pos) -> Script;
    fn fork(&mut self, _pos: &Pos) -> Script {
        (Vec::new(), Op::Sum)
    }
    fn join(&mut self, _pos: &Pos) -> Script {
        (Vec::new(), Op::Sum)
    }
}

/// Emits a balanced BP tree over `leaves` leaves and records its
/// instance metadata.
pub fn bp_tree<S: TreeScripts>(b: &mut DagBuilder, ctx: Ctx, leaves: u32, s: &mut S) -> Frag {
    assert!(leaves >= 1);
    let inst = b.new_tree(TreeKind::Bp);
    let first = b.next_id();
    let f = rec(b, ctx, inst, 0, leaves, 0, None, s);
    let t = b.tree_mut(inst);
    t.root = f.src;
    t.up_root = f.sink;
    t.first = first;
    t.last = f.sink;
    t.height = ceil_log2(leaves) as u16;
    t.leaves = leaves;
    f
}

pub fn ceil_log2(n: u32) -> u32 {
    if n <= 1 {
        0
    } else {
        32 - (n - 1).leading_zeros()
    }
}

#[allow(clippy::too_many_arguments)]
fn rec<S: TreeScripts>(
    b: &mut DagBuilder,
    ctx: Ctx,
    inst: u32,
    lo: u32,
    hi: u32,
    depth: u32,
    parent: Option<(NodeId, u32)>,
    s: &mut S,
) -> Frag {
    let id = b.next_id();
    let pos = Pos { lo, hi, depth, id, parent, fork: NONE };
    if hi - lo == 1 {
        let (sc, op) = s.leaf(&pos);
        let u = b.add(NodeKind::Leaf, &sc, 1, ctx.tag(Role::Leaf, inst, depth));
        b.set_op(u, op);
        return Frag { src: u, sink: u };
    }
    let (sc, op) = s.fork(&pos);
    let fork = b.add(NodeKind::Fork, &sc, 1, ctx.tag(Role::Down, inst, depth));
    b.set_op(fork, op);
    let words = s.fork_words();
    let mid = pos.mid();
    let l = rec(b, ctx, inst, lo, mid, depth + 1, Some((fork, 0)), s);
    let r = rec(b, ctx, inst, mid, hi, depth + 1, Some((fork, 1)), s);
    let jpos = Pos { id: b.next_id(), fork, ..pos };
    let (sc, op) = s.join(&jpos);
    let join = b.add(NodeKind::Join, &sc, 1, ctx.tag(Role::Up, inst, depth));
    b.set_op(join, op);
    let f = b.connect_fork(fork, l, r, join);
    if words > 0 {
        b.declare(fork, words);
    }
    f
}

/// Emits a binary fork tree whose `k` leaves are the subgraphs produced
/// by `leaf(b, i)`, in index order.
pub fn spawn<F>(b: &mut DagBuilder, ctx: Ctx, k: u32, leaf: &mut F) -> Frag
where
    F: FnMut(&mut DagBuilder, u32) -> Frag,
{
    assert!(k >= 1);
    if k == 1 {
        return leaf(b, 0);
    }
    let inst = b.new_tree(TreeKind::Spawn);
    let first = b.next_id();
    let f = spawn_rec(b, ctx, inst, 0, k, 0, leaf);
    let t = b.tree_mut(inst);
    t.root = f.src;
    t.up_root = f.sink;
    t.first = first;
    t.last = f.sink;
    t.height = ceil_log2(k) as u16;
    t.leaves = k;
    f
}

fn spawn_rec<F>(b: &mut DagBuilder, ctx: Ctx, inst: u32, lo: u32, hi: u32, depth: u32, leaf: &mut F) -> Frag
where
    F: FnMut(&mut DagBuilder, u32) -> Frag,
{
    if hi - lo == 1 {
        return leaf(b, lo);
    }
    let fork = b.add(NodeKind::Fork, &[], 1, ctx.tag(Role::Down, inst, depth));
    let mid = lo + (hi - lo) / 2;
    let l = spawn_rec(b, ctx, inst, lo, mid, depth + 1, leaf);
    let r = spawn_rec(b, ctx, inst, mid, hi, depth + 1, leaf);
    let join = b.add(NodeKind::Join, &[], 1, ctx.tag(Role::Up, inst, depth));
    b.connect_fork(fork, l, r, join)
}

/// Copy or combine tree whose leaf `k` is given by a closure.
pub struct LeafFn<F: FnMut(u32) -> Script>(pub F);

impl<F: FnMut(u32) -> Script> TreeScripts for LeafFn<F> {
    fn leaf(&mut self, pos: &Pos) -> Script {
        (self.0)(pos.lo)
    }
}
