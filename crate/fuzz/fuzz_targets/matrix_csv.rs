#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((n, v)) = kernels::load_matrix_csv(data) {
        assert_eq!(v.len() as u64, n as u64 * n as u64);
    }
});
