//! Output placement. Every invocation writes into a fresh timestamped
//! directory under the output root; prior records are never touched.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "PROXESCAPE_OUT_DIR";

/// Precedence: --out-dir flag, then the config field, then the environment
/// variable, then ./runs.
pub fn output_root(flag: Option<&Path>, config_field: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config_field {
        return PathBuf::from(p);
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV) {
        return PathBuf::from(p);
    }
    PathBuf::from("runs")
}

/// Create `{root}/{label}-{unix-seconds}`, suffixing a counter on collision
/// so re-runs in the same second still get a fresh directory.
pub fn fresh_run_dir(root: &Path, label: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(root)
        .map_err(|e| CliError::runtime(format!("cannot create output root {}: {e}", root.display())))?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    for k in 0..1000 {
        let name = if k == 0 {
            format!("{label}-{stamp}")
        } else {
            format!("{label}-{stamp}-{k}")
        };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(CliError::runtime(format!(
                    "cannot create run directory {}: {e}",
                    dir.display()
                )))
            }
        }
    }
    Err(CliError::runtime("exhausted run directory suffixes"))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::runtime(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}
