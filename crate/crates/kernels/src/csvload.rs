use std::io::Read;

use crate::layout::is_pow2;
use crate::KernelError;

/// Reads a square matrix of non-negative integers, one row per line, and
/// returns its dimension and row-major entries.
pub fn load_matrix_csv<R: Read>(r: R) -> Result<(u32, Vec<u32>), KernelError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r);
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| KernelError::Csv(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<u32>().map_err(|e| KernelError::Csv(format!("bad entry {f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(KernelError::Csv("empty matrix".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(KernelError::Csv(format!("row {i} has {} entries, expected {n}", r.len())));
    }
    if !is_pow2(n as u32) {
        return Err(KernelError::NotPow2(n as u32));
    }
    if rows.iter().flatten().any(|&v| v as u64 >= sp_dag::VALUE_MOD) {
        return Err(KernelError::Csv("entry exceeds 2^31".into()));
    }
    Ok((n as u32, rows.into_iter().flatten().collect()))
}

pub fn load_matrix_path(path: &std::path::Path) -> Result<(u32, Vec<u32>), KernelError> {
    let f = std::fs::File::open(path).map_err(|e| KernelError::Csv(format!("{}: {e}", path.display())))?;
    load_matrix_csv(f)
}
