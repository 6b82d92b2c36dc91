//! Kernels emitted as series-parallel DAGs, each with a sequential oracle.

pub mod audit;
mod convert;
mod csvload;
pub mod emit;
pub mod layout;
mod mm;
pub mod oracle;
mod prefix;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sp_dag::{ArrayId, SPDag};

pub use convert::{bi_to_rm, rm_to_bi};
pub use csvload::{load_matrix_csv, load_matrix_path};
pub use mm::{mm, mm_inplace, MmArrays, MmVariant};
pub use prefix::{prefix_sums, PrefixArrays};

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("unknown kernel {0:?}")]
    Unknown(String),
    #[error("n must be positive")]
    ZeroSize,
    #[error("n = {0} is not a power of two")]
    NotPow2(u32),
    #[error("input mismatch: {0}")]
    Input(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("simulation: {0}")]
    Sim(#[from] rws_sched::SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WritePattern {
    /// Inorder leaves write consecutive runs of the output.
    Regular,
    /// Only leaves write global output.
    LeafOnly,
    /// Writes to a node's own segment or its parent's.
    LocalParent,
}

/// Structural parameters of a kernel. Sizes are in words.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSpec {
    pub name: &'static str,
    /// 1 for a BP computation, 2 for hierarchical recursion.
    pub type_level: u8,
    /// Collections of recursive calls per call.
    pub c: u32,
    /// Fraction of a call's size each recursive subproblem has.
    pub sub_fraction: f64,
    /// Local words declared by a call, per word of problem size.
    pub local_per_word: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub write_pattern: WritePattern,
    pub e2: u32,
    /// Input arrays, by name, in global array order.
    pub inputs: &'static [&'static str],
    pub matrix: bool,
}

impl KernelSpec {
    /// Size bound of each recursive subproblem of a size-`n` call.
    pub fn s_of_n(&self, n: f64) -> f64 {
        self.sub_fraction * n
    }
    /// Local space of a size-`n` call.
    pub fn s_l(&self, n: f64) -> f64 {
        self.local_per_word * n
    }
}

const fn spec(
    name: &'static str,
    type_level: u8,
    c: u32,
    sub_fraction: f64,
    local_per_word: f64,
    write_pattern: WritePattern,
    inputs: &'static [&'static str],
    matrix: bool,
) -> KernelSpec {
    KernelSpec {
        name,
        type_level,
        c,
        sub_fraction,
        local_per_word,
        c1: 0.5,
        c2: 2.0,
        alpha: 0.5,
        write_pattern,
        e2: 1,
        inputs,
        matrix,
    }
}

pub static REGISTRY: &[KernelSpec] = &[
    spec("prefix_sums", 1, 0, 0.0, 0.0, WritePattern::Regular, &["x"], false),
    spec("rm_to_bi", 1, 0, 0.0, 0.0, WritePattern::Regular, &["rm"], true),
    spec("bi_to_rm", 2, 1, 0.25, 1.0, WritePattern::LocalParent, &["bi"], true),
    spec("mm_log2", 2, 1, 0.25, 2.0, WritePattern::LocalParent, &["A", "B"], true),
    spec("mm_depth_n", 2, 2, 0.25, 2.0, WritePattern::LocalParent, &["A", "B"], true),
];

pub fn kernel(name: &str) -> Result<&'static KernelSpec, KernelError> {
    REGISTRY.iter().find(|k| k.name == name).ok_or_else(|| KernelError::Unknown(name.to_string()))
}

pub fn names() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|k| k.name)
}

/// An emitted DAG with the global array holding its result.
pub struct Built {
    pub spec: &'static KernelSpec,
    pub n: u32,
    pub dag: SPDag,
    pub output: ArrayId,
    pub input_arrays: Vec<ArrayId>,
}

fn check_n(n: u32) -> Result<(), KernelError> {
    if n == 0 {
        return Err(KernelError::ZeroSize);
    }
    if !layout::is_pow2(n) {
        return Err(KernelError::NotPow2(n));
    }
    Ok(())
}

/// Emits kernel `name` at size `n` (vector length, or matrix dimension).
pub fn build(name: &str, n: u32) -> Result<Built, KernelError> {
    let spec = kernel(name)?;
    check_n(n)?;
    let (dag, output, input_arrays) = match name {
        "prefix_sums" => {
            let (d, a) = prefix_sums(n);
            (d, a.y, vec![a.x])
        }
        "rm_to_bi" => {
            let (d, s, t) = rm_to_bi(n);
            (d, t, vec![s])
        }
        "bi_to_rm" => {
            let (d, s, t) = bi_to_rm(n);
            (d, t, vec![s])
        }
        "mm_log2" | "mm_depth_n" => {
            let v = if name == "mm_log2" { MmVariant::Log2 } else { MmVariant::DepthN };
            let (d, a) = mm(n, v);
            (d, a.c, vec![a.a, a.b])
        }
        _ => unreachable!("registry and builder out of sync"),
    };
    Ok(Built { spec, n, dag, output, input_arrays })
}

impl Built {
    pub fn input_words(&self) -> usize {
        if self.spec.matrix {
            (self.n * self.n) as usize
        } else {
            self.n as usize
        }
    }

    /// Seeded random inputs, one vector per input array. Matrix product
    /// operands are digits, other inputs are below 1000.
    pub fn random_inputs(&self, seed: u64) -> Vec<Vec<u32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_726e);
        let hi = if self.spec.name.starts_with("mm") { 10 } else { 1000 };
        self.input_arrays
            .iter()
            .map(|_| (0..self.input_words()).map(|_| rng.gen_range(0..hi)).collect())
            .collect()
    }

    /// Per-array initial contents for the simulator.
    pub fn sim_inputs(&self, inputs: &[Vec<u32>]) -> Result<Vec<Vec<u32>>, KernelError> {
        if inputs.len() != self.input_arrays.len() {
            return Err(KernelError::Input(format!(
                "{} takes {} inputs, got {}",
                self.spec.name,
                self.input_arrays.len(),
                inputs.len()
            )));
        }
        let mut out = vec![Vec::new(); self.dag.arrays.len()];
        for (&a, v) in self.input_arrays.iter().zip(inputs) {
            if v.len() != self.input_words() {
                return Err(KernelError::Input(format!("expected {} words, got {}", self.input_words(), v.len())));
            }
            out[a as usize] = v.clone();
        }
        Ok(out)
    }

    /// Sequential result for `inputs`.
    pub fn oracle(&self, inputs: &[Vec<u32>]) -> Vec<u32> {
        let n = self.n;
        match self.spec.name {
            "prefix_sums" => oracle::prefix_oracle(&inputs[0]),
            "rm_to_bi" => layout::rm_to_bi_vec(n, &inputs[0]),
            "bi_to_rm" => layout::bi_to_rm_vec(n, &inputs[0]),
            _ => oracle::matmul_bi(n, &inputs[0], &inputs[1]),
        }
    }

    /// Inputs from a row-major matrix, converted to the kernel's layout.
    /// Products use the matrix as both operands.
    pub fn inputs_from_matrix(&self, n: u32, rm: &[u32]) -> Result<Vec<Vec<u32>>, KernelError> {
        if !self.spec.matrix {
            return Err(KernelError::Input(format!("{} does not take a matrix", self.spec.name)));
        }
        if n != self.n {
            return Err(KernelError::Input(format!("matrix is {n}x{n}, kernel built for {}", self.n)));
        }
        let bi = layout::rm_to_bi_vec(n, rm);
        Ok(match self.spec.name {
            "rm_to_bi" => vec![rm.to_vec()],
            "bi_to_rm" => vec![bi],
            _ => vec![bi.clone(), bi],
        })
    }
}

/// Work and cache misses of a one-processor run.
pub fn seq_oracle_metrics(name: &str, n: u32, m: u32, block: u32) -> Result<(u64, u64), KernelError> {
    let built = build(name, n)?;
    let inputs = built.sim_inputs(&built.random_inputs(0))?;
    let mut cfg = rws_sched::SimConfig::new(1, m, block, 4, 4);
    cfg.log_moves = false;
    let res = rws_sched::run(&built.dag, &cfg, &inputs)?;
    Ok((res.metrics.w, res.metrics.q))
}
