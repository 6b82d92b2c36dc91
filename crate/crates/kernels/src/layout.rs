//! Bit-interleaved (recursive quadrant) matrix layout.

/// BI index of `(row, col)`: bits are interleaved with the row bit above
/// the column bit at every level, so quadrants are ordered
/// (0,0), (0,1), (1,0), (1,1).
pub fn bi_index(row: u32, col: u32) -> u32 {
    let mut k = 0u32;
    for j in 0..16 {
        k |= ((col >> j) & 1) << (2 * j);
        k |= ((row >> j) & 1) << (2 * j + 1);
    }
    k
}

/// Inverse of [`bi_index`].
pub fn bi_coords(k: u32) -> (u32, u32) {
    let (mut r, mut c) = (0, 0);
    for j in 0..16 {
        c |= ((k >> (2 * j)) & 1) << j;
        r |= ((k >> (2 * j + 1)) & 1) << j;
    }
    (r, c)
}

pub fn is_pow2(n: u32) -> bool {
    n != 0 && n & (n - 1) == 0
}

pub fn log2(n: u32) -> u32 {
    31 - n.leading_zeros()
}

/// Row-major to BI.
pub fn rm_to_bi_vec(n: u32, rm: &[u32]) -> Vec<u32> {
    let mut out = vec![0; (n * n) as usize];
    for r in 0..n {
        for c in 0..n {
            out[bi_index(r, c) as usize] = rm[(r * n + c) as usize];
        }
    }
    out
}

/// BI to row-major.
pub fn bi_to_rm_vec(n: u32, bi: &[u32]) -> Vec<u32> {
    let mut out = vec![0; (n * n) as usize];
    for r in 0..n {
        for c in 0..n {
            out[(r * n + c) as usize] = bi[bi_index(r, c) as usize];
        }
    }
    out
}
