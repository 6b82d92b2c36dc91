#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(p) = harness::ExperimentPlan::from_toml(s) {
            let back = harness::ExperimentPlan::from_toml(&p.to_toml()).unwrap();
            assert_eq!(back, p);
            assert!(!p.cells().is_empty());
        }
    }
});
