use std::io::Write;

use harness::accept::{run_suite, SuiteOptions};

#[test]
fn acceptance_suite() {
    let root = std::env::var_os(harness::OUT_ENV)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("rws-accept-{}", std::process::id())));
    let _ = std::fs::remove_dir_all(&root);
    let opts = SuiteOptions { out_root: root.clone(), pilot: false, only: Vec::new() };
    // Written past the test capture so the lines land in the log.
    let reports = run_suite(&opts, |r| {
        let _ = writeln!(std::io::stderr(), "{}", r.line());
    })
    .unwrap();
    let _ = writeln!(std::io::stderr(), "report: {}", root.join("report.json").display());
    assert_eq!(reports.len(), 8);
    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
