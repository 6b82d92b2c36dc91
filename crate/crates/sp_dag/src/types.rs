use serde::{Deserialize, Serialize};

pub type NodeId = u32;
pub type ArrayId = u32;

/// Sentinel for absent node, instance and call references.
pub const NONE: u32 = u32::MAX;

/// Default bound on operations (accesses plus computations) per node.
pub const DEFAULT_E1: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Fork,
    Join,
    Leaf,
    Serial,
}

/// Value semantics of a node: an accumulator folds every read in script
/// order and each write stores the accumulator's current value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Op {
    /// Accumulator starts at 0 and adds reads (mod 2^31).
    #[default]
    Sum,
    /// Accumulator starts at 1 and multiplies reads (mod 2^31).
    Mul,
}

pub const VALUE_MOD: u64 = 1 << 31;

impl Op {
    pub fn init(self) -> u32 {
        match self {
            Op::Sum => 0,
            Op::Mul => 1,
        }
    }
    pub fn fold(self, acc: u32, v: u32) -> u32 {
        let r = match self {
            Op::Sum => acc as u64 + v as u64,
            Op::Mul => acc as u64 * v as u64,
        };
        (r % VALUE_MOD) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    GlobalArray,
    /// Word in the segment declared by node `array_id`.
    StackLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarRef {
    pub region: Region,
    /// Global array id, or the declaring node for stack locals.
    pub array_id: u32,
    pub offset: u32,
    pub mode: Mode,
}

impl VarRef {
    pub fn global(array: ArrayId, offset: u32, mode: Mode) -> Self {
        VarRef { region: Region::GlobalArray, array_id: array, offset, mode }
    }
    pub fn local(decl: NodeId, offset: u32, mode: Mode) -> Self {
        VarRef { region: Region::StackLocal, array_id: decl, offset, mode }
    }
    pub fn read_global(array: ArrayId, offset: u32) -> Self {
        Self::global(array, offset, Mode::Read)
    }
    pub fn write_global(array: ArrayId, offset: u32) -> Self {
        Self::global(array, offset, Mode::Write)
    }
    pub fn read_local(decl: NodeId, offset: u32) -> Self {
        Self::local(decl, offset, Mode::Read)
    }
    pub fn write_local(decl: NodeId, offset: u32) -> Self {
        Self::local(decl, offset, Mode::Write)
    }
    pub fn is_write(&self) -> bool {
        self.mode == Mode::Write
    }
    /// Key identifying the variable independent of access mode.
    pub fn var_key(&self) -> (Region, u32, u32) {
        (self.region, self.array_id, self.offset)
    }
}

/// Structural role of a node within the kernel that emitted it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Role {
    /// Fork node of a down-pass tree.
    Down,
    /// Join node of an up-pass tree.
    Up,
    /// Leaf shared by a down-pass and its up-pass tree.
    Leaf,
    /// First node of a recursive call; declares the call's local arrays.
    CallEntry,
    /// Last node of a recursive call; releases the call's local arrays.
    CallExit,
    #[default]
    Glue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeTag {
    pub role: Role,
    /// Tree instance the node belongs to, or `NONE`.
    pub instance: u32,
    /// Depth in its tree (root at 0).
    pub depth: u16,
    /// 0 for glue, 1 for BP trees, 2 inside Type-2 recursion.
    pub type_level: u8,
    /// Index of the collection of recursive calls this node belongs to.
    pub collection: u8,
    /// Innermost enclosing recursive call, or `NONE`.
    pub call: u32,
}

impl Default for NodeTag {
    fn default() -> Self {
        NodeTag { role: Role::Glue, instance: NONE, depth: 0, type_level: 0, collection: 0, call: NONE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TreeKind {
    /// Balanced tree computation whose leaves are DAG nodes.
    Bp,
    /// Binary fork tree spawning recursive calls; its leaves are subgraphs.
    Spawn,
}

/// One down-pass/up-pass tree pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeInfo {
    pub kind: TreeKind,
    /// Root of the down-pass tree (a fork, or the single leaf).
    pub root: NodeId,
    /// Root of the up-pass tree (the join matching `root`, or the leaf).
    pub up_root: NodeId,
    /// Node ids of the tree lie within `first..=last`.
    pub first: NodeId,
    pub last: NodeId,
    /// Height of the down-pass tree in edges.
    pub height: u16,
    pub leaves: u32,
}

/// One recursive call of a hierarchical kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallInfo {
    pub entry: NodeId,
    pub exit: NodeId,
    /// Problem size in words.
    pub size: u32,
    /// Words of local arrays declared at the entry.
    pub local_words: u32,
    pub parent: u32,
    pub type_level: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ArrayDecl {
    pub name: String,
    pub words: u32,
}

#[derive(Debug, Clone)]
pub struct SPNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub(crate) script_start: u32,
    pub(crate) script_len: u16,
    pub compute_ops: u8,
    pub op: Op,
    /// Words declared by this node on the executing stack.
    pub declared_words: u32,
    /// Node whose segment is released once this node completes.
    pub release: NodeId,
    pub(crate) succ: [NodeId; 2],
    pub(crate) pred: [NodeId; 2],
    /// For a fork the matching join, for a join the matching fork.
    pub mate: NodeId,
    /// Height in edges (sink = 0).
    pub ht: u32,
    pub tag: NodeTag,
}

impl SPNode {
    pub fn succs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.succ.iter().copied().filter(|&s| s != NONE)
    }
    pub fn preds(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.pred.iter().copied().filter(|&s| s != NONE)
    }
    pub fn succ_count(&self) -> usize {
        self.succ.iter().filter(|&&s| s != NONE).count()
    }
    pub fn pred_count(&self) -> usize {
        self.pred.iter().filter(|&&s| s != NONE).count()
    }
    /// Left successor of a fork, or the only successor.
    pub fn first_succ(&self) -> Option<NodeId> {
        (self.succ[0] != NONE).then_some(self.succ[0])
    }
    pub fn second_succ(&self) -> Option<NodeId> {
        (self.succ[1] != NONE).then_some(self.succ[1])
    }
    pub fn script_len(&self) -> usize {
        self.script_len as usize
    }
    /// Operations performed: accesses plus computations.
    pub fn ops(&self) -> u32 {
        self.script_len as u32 + self.compute_ops as u32
    }
}
