#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(d) = sp_dag::from_json(s) {
            let again = sp_dag::from_json(&sp_dag::to_json(&d)).unwrap();
            assert_eq!(again.len(), d.len());
        }
    }
});
