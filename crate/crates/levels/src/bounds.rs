use kernels::{Built, KernelSpec};
use serde::Serialize;

/// Block-transfer allowance of a size-`size` call: `c·B` when one
/// subproblem's local space already spans a block, otherwise the local
/// space summed over the recursion.
pub fn y_bound(size: f64, block: f64, k: &KernelSpec) -> f64 {
    if size <= 0.0 {
        return 0.0;
    }
    let c = k.c as f64;
    if k.s_l(k.s_of_n(size)) >= block {
        return c * block;
    }
    let converges = c * k.sub_fraction < 1.0;
    let (mut total, mut x, mut w) = (0.0, size, 1.0);
    for _ in 0..10_000 {
        let term = w * k.s_l(x);
        total += term;
        x = k.s_of_n(x);
        w *= c;
        if term <= total * 1e-17 || w == 0.0 || (!converges && x < 1.0) {
            break;
        }
    }
    total
}

/// Applications of the subproblem map needed to bring `size` to at most `block`.
pub fn s_star(size: f64, block: f64, k: &KernelSpec) -> u32 {
    let mut x = size;
    let mut i = 0;
    while x > block && k.sub_fraction > 0.0 && i < 64 {
        x = k.s_of_n(x);
        i += 1;
    }
    i
}

/// Predicted root height, without constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HRootBound {
    /// `((b/s)·E + 1)·T∞` with `E = B`.
    pub coarse: f64,
    pub refined: f64,
}

pub fn h_root_bound(built: &Built, b: u64, s: u64, block: u32) -> HRootBound {
    let k = built.spec;
    let (b, s, bl) = (b as f64, s as f64, block as f64);
    let t_inf = built.dag.t_inf() as f64;
    let words = built.input_words() as f64;
    let coarse = ((b / s) * bl + 1.0) * t_inf;
    let path = ((b + s) / s) * t_inf;
    let refined = match (k.type_level, k.c) {
        (1, _) | (_, 0) => path + (b / s) * bl,
        (_, 1) => path + (b / s) * bl * s_star(words, bl, k).max(1) as f64,
        _ => path + (b / s) * (words * bl).sqrt(),
    };
    HRootBound { coarse, refined }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(c: u32, frac: f64) -> KernelSpec {
        KernelSpec { c, sub_fraction: frac, local_per_word: 1.0, ..kernels::kernel("bi_to_rm").unwrap().clone() }
    }

    #[test]
    fn y_cases() {
        let k = linear(2, 0.4);
        assert_eq!(y_bound(100.0, 8.0, &k), 16.0);
        let k1 = linear(1, 0.5);
        assert!((y_bound(6.0, 8.0, &k1) - 12.0).abs() < 1e-9);
        assert_eq!(y_bound(0.0, 8.0, &k1), 0.0);
    }

    #[test]
    fn s_star_counts_quarterings() {
        let k = kernels::kernel("mm_log2").unwrap();
        assert_eq!(s_star(4096.0, 8.0, k), 5);
        assert_eq!(s_star(8.0, 8.0, k), 0);
    }
}
