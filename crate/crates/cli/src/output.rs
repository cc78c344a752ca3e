//! Artifact writing. Files are replaced atomically through a temporary file
//! in the target directory; without a path the artifact goes to stdout.
//!
//! Estimate CSV layout, one row per estimate:
//!
//! ```text
//! id,value,stderr,n,seed,config_hash,version
//! ```
//!
//! Deterministic values carry `stderr = 0` and `n` = the node count.

use std::io::Write;
use std::path::Path;

use qharm_core::stats::McEstimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_HEADER: &str = "id,value,stderr,n,seed,config_hash,version";

pub struct Row {
    pub id: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Row {
    pub fn estimate(id: String, e: &McEstimate) -> Self {
        Self { id, value: e.mean, stderr: e.stderr, n: e.n }
    }

    pub fn exact(id: String, value: f64, nodes: usize) -> Self {
        Self { id, value, stderr: 0.0, n: nodes }
    }
}

pub fn csv_rows(rows: &[Row], seed: u64, hash: &str) -> String {
    rows.iter()
        .map(|r| format!("{},{:.17e},{:.17e},{},{seed},{hash},{VERSION}\n", r.id, r.value, r.stderr, r.n))
        .collect()
}

/// Writes `body` to `path` atomically, or prints it.
pub fn emit(path: Option<&Path>, body: &str) -> std::io::Result<()> {
    match path {
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(body.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(p).map_err(|e| e.error)?;
            Ok(())
        }
    }
}

/// Estimate CSV; with `append` the rows extend an existing file that has the
/// same header.
pub fn emit_csv(path: Option<&Path>, rows: &[Row], seed: u64, hash: &str, append: bool) -> std::io::Result<()> {
    let mut body = String::new();
    if let (true, Some(p)) = (append, path) {
        if let Ok(old) = std::fs::read_to_string(p) {
            if old.lines().next() != Some(CSV_HEADER) {
                return Err(std::io::Error::other(format!("{} does not start with the estimate header", p.display())));
            }
            body = old;
        }
    }
    if body.is_empty() {
        body = format!("{CSV_HEADER}\n");
    }
    body.push_str(&csv_rows(rows, seed, hash));
    emit(path, &body)
}
