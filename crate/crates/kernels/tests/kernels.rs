use kernels::audit::{bp_balance, local_access, regular_pattern};
use kernels::*;
use rws_sched::{run, SimConfig};
use sp_dag::{validate, Finding, NodeKind};

// Independent reference implementations.

fn scan(x: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(x.len());
    let mut s: u64 = 0;
    for &v in x {
        s = (s + v as u64) % (1 << 31);
        out.push(s as u32);
    }
    out
}

/// Recursive-quadrant index computed by halving, not bit tricks.
fn quad_index(n: u32, r: u32, c: u32) -> u32 {
    if n == 1 {
        return 0;
    }
    let h = n / 2;
    let q = 2 * (r / h) + c / h;
    q * h * h + quad_index(h, r % h, c % h)
}

fn triple_loop(n: usize, a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut c = vec![0u64; n * n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i * n + j] = (c[i * n + j] + a[i * n + k] as u64 * b[k * n + j] as u64) % (1 << 31);
            }
        }
    }
    c.into_iter().map(|v| v as u32).collect()
}

fn to_bi(n: u32, rm: &[u32]) -> Vec<u32> {
    let mut out = vec![0; rm.len()];
    for r in 0..n {
        for c in 0..n {
            out[quad_index(n, r, c) as usize] = rm[(r * n + c) as usize];
        }
    }
    out
}

fn simulate(b: &Built, inputs: &[Vec<u32>], p: usize, seed: u64) -> Vec<u32> {
    let mut cfg = SimConfig::new(p, 64, 4, 2, 4);
    cfg.seed = seed;
    let res = run(&b.dag, &cfg, &b.sim_inputs(inputs).unwrap()).unwrap();
    res.outputs[b.output as usize].clone()
}

#[test]
fn prefix_sums_of_ones() {
    let b = build("prefix_sums", 4).unwrap();
    assert_eq!(simulate(&b, &[vec![1; 4]], 2, 3), vec![1, 2, 3, 4]);
}

#[test]
fn prefix_sums_single_word() {
    let b = build("prefix_sums", 1).unwrap();
    assert_eq!(b.dag.len(), 1);
    assert_eq!(simulate(&b, &[vec![7]], 1, 0), vec![7]);
}

#[test]
fn prefix_sums_random_matches_scan() {
    let b = build("prefix_sums", 64).unwrap();
    for (p, seed) in [(1, 0), (2, 1), (4, 2), (8, 3)] {
        let x = b.random_inputs(seed);
        assert_eq!(simulate(&b, &x, p, seed), scan(&x[0]));
    }
}

#[test]
fn sizes_rejected() {
    assert!(matches!(build("prefix_sums", 0), Err(KernelError::ZeroSize)));
    assert!(matches!(build("mm_log2", 6), Err(KernelError::NotPow2(6))));
    assert!(matches!(build("rm_to_bi", 3), Err(KernelError::NotPow2(3))));
    assert!(matches!(build("nope", 4), Err(KernelError::Unknown(_))));
}

#[test]
fn bi_index_examples() {
    assert_eq!(layout::bi_index(1, 1), 3);
    assert_eq!(layout::bi_index(0, 1), 1);
    for n in [2u32, 4, 8, 16] {
        for r in 0..n {
            for c in 0..n {
                assert_eq!(layout::bi_index(r, c), quad_index(n, r, c));
            }
        }
    }
}

#[test]
fn converters_match_index_map() {
    for n in [2u32, 4, 16] {
        let f = build("rm_to_bi", n).unwrap();
        let g = build("bi_to_rm", n).unwrap();
        let x = f.random_inputs(n as u64);
        let bi = simulate(&f, &x, 4, 1);
        assert_eq!(bi, to_bi(n, &x[0]));
        let back = simulate(&g, &[bi], 4, 2);
        assert_eq!(back, x[0]);
    }
}

#[test]
fn bi_to_rm_work_at_16() {
    let b = build("bi_to_rm", 16).unwrap();
    let w = b.dag.len() as u64;
    let lo = 16 * 16 * 4;
    assert!((lo..=4 * lo).contains(&w), "W = {w}");
}

#[test]
fn mm_shapes() {
    let b = build("mm_log2", 1).unwrap();
    assert_eq!(b.dag.len(), 1);
    let b = build("mm_log2", 2).unwrap();
    let mults = b.dag.nodes().iter().filter(|n| n.op == sp_dag::Op::Mul).count();
    assert_eq!(mults, 8);
    assert_eq!(b.dag.trees.iter().filter(|t| t.kind == sp_dag::TreeKind::Bp).count(), 1);
}

#[test]
fn mm_identity() {
    for name in ["mm_log2", "mm_depth_n"] {
        let n = 4u32;
        let b = build(name, n).unwrap();
        let x = b.random_inputs(9);
        let mut id = vec![0; 16];
        for i in 0..4 {
            id[i * 4 + i] = 1;
        }
        let id_bi = to_bi(n, &id);
        assert_eq!(simulate(&b, &[id_bi, x[0].clone()], 2, 5), x[0]);
    }
}

#[test]
fn mm_matches_triple_loop() {
    for name in ["mm_log2", "mm_depth_n"] {
        let n = 8u32;
        let b = build(name, n).unwrap();
        for seed in 0..4 {
            let x = b.random_inputs(seed);
            // Inputs are BI; convert the oracle's operands.
            let inv = |bi: &[u32]| {
                let mut rm = vec![0; bi.len()];
                for r in 0..n {
                    for c in 0..n {
                        rm[(r * n + c) as usize] = bi[quad_index(n, r, c) as usize];
                    }
                }
                rm
            };
            let want = to_bi(n, &triple_loop(n as usize, &inv(&x[0]), &inv(&x[1])));
            assert_eq!(simulate(&b, &x, 4, seed), want, "{name} seed {seed}");
            assert_eq!(b.oracle(&x), want);
        }
    }
}

#[test]
fn depth_n_span_is_linear() {
    let t = |name, n| build(name, n).unwrap().dag.t_inf() as f64;
    let dn = t("mm_depth_n", 16) / t("mm_depth_n", 8);
    let lg = t("mm_log2", 16) / t("mm_log2", 8);
    assert!(dn > 1.6, "depth-n span ratio {dn}");
    assert!(lg < dn, "log2 span ratio {lg}");
}

#[test]
fn every_kernel_validates_and_passes_audits() {
    for spec in REGISTRY {
        for n in [1u32, 2, 4, 8, 16] {
            let b = build(spec.name, n).unwrap();
            let rep = validate(&b.dag);
            assert!(rep.is_ok(), "{} n={n}: {:?}", spec.name, rep.findings);
            assert!(local_access(&b.dag).is_empty(), "{} n={n}", spec.name);
            let bal = bp_balance(&b.dag, spec.c1, spec.c2, spec.alpha);
            assert!(bal.is_empty(), "{} n={n}: {:?}", spec.name, &bal[..bal.len().min(3)]);
        }
    }
}

#[test]
fn prefix_sums_validates_up_to_64() {
    for k in 1..=6 {
        let b = build("prefix_sums", 1 << k).unwrap();
        assert!(validate(&b.dag).is_ok());
    }
}

#[test]
fn regular_write_pattern() {
    let b = build("prefix_sums", 16).unwrap();
    // The second tree is the down pass that writes the output.
    assert!(regular_pattern(&b.dag, 1, b.output, 1).is_empty());
    let b = build("rm_to_bi", 8).unwrap();
    assert!(regular_pattern(&b.dag, 0, b.output, 1).is_empty());
    // A tree that writes into a different array leaves the output untiled.
    let b = build("prefix_sums", 8).unwrap();
    assert!(!regular_pattern(&b.dag, 0, b.output, 1).is_empty());
}

#[test]
fn inplace_mm_violates_limited_access() {
    let d = mm_inplace(4);
    let rep = validate(&d);
    let la = rep.findings.iter().filter(|f| matches!(f, Finding::LimitedAccess { .. })).count();
    assert_eq!(la, 16);
}

#[test]
fn leaves_are_leaves() {
    let b = build("mm_depth_n", 4).unwrap();
    assert!(b.dag.nodes().iter().filter(|n| n.op == sp_dag::Op::Mul).all(|n| n.kind == NodeKind::Leaf));
}

#[test]
fn csv_loader() {
    let (n, v) = load_matrix_csv("1,2\n3,4\n".as_bytes()).unwrap();
    assert_eq!((n, v.clone()), (2, vec![1, 2, 3, 4]));
    assert!(load_matrix_csv("1,2,3\n4,5,6\n7,8,9\n".as_bytes()).is_err());
    assert!(load_matrix_csv("1,2\n3\n".as_bytes()).is_err());
    assert!(load_matrix_csv("1,x\n3,4\n".as_bytes()).is_err());
    assert!(load_matrix_csv("".as_bytes()).is_err());
    let b = build("mm_log2", 2).unwrap();
    let x = b.inputs_from_matrix(n, &v).unwrap();
    assert_eq!(simulate(&b, &x, 2, 0), to_bi(2, &[7, 10, 15, 22]));
}

#[test]
fn prefix_seq_misses() {
    let (_, q) = seq_oracle_metrics("prefix_sums", 64, 4096, 8).unwrap();
    assert!((16..=48).contains(&q), "Q = {q}");
}
