//! Sequential reference results.

use sp_dag::VALUE_MOD;

use crate::layout::{bi_to_rm_vec, rm_to_bi_vec};

pub use crate::prefix::prefix_oracle;

/// Triple-loop product of row-major matrices, mod 2^31.
pub fn matmul_rm(n: u32, a: &[u32], b: &[u32]) -> Vec<u32> {
    let n = n as usize;
    let mut c = vec![0u32; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0u64;
            for k in 0..n {
                acc = (acc + a[i * n + k] as u64 * b[k * n + j] as u64) % VALUE_MOD;
            }
            c[i * n + j] = acc as u32;
        }
    }
    c
}

/// Product of BI-format matrices, returned in BI format.
pub fn matmul_bi(n: u32, a: &[u32], b: &[u32]) -> Vec<u32> {
    let c = matmul_rm(n, &bi_to_rm_vec(n, a), &bi_to_rm_vec(n, b));
    rm_to_bi_vec(n, &c)
}
