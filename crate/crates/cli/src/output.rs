use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Output directory of one invocation.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Uses `out` when given, otherwise a fresh `runs/<UTC timestamp>`.
    pub fn create(out: Option<&Path>) -> CliResult<Self> {
        let path = match out {
            Some(p) => p.to_path_buf(),
            None => {
                let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
                let base = PathBuf::from("runs").join(&stamp);
                let mut path = base.clone();
                let mut n = 1;
                while path.exists() {
                    path = PathBuf::from("runs").join(format!("{stamp}-{n}"));
                    n += 1;
                }
                path
            }
        };
        std::fs::create_dir_all(&path).map_err(|e| CliError::file(&path, e))?;
        Ok(RunDir { path })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.file(name);
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        self.write(name, &csv_bytes(header, rows)?)
    }

    pub fn write_manifest<C: Serialize>(&self, command: &str, seed: u64, config: &C) -> CliResult<()> {
        let manifest = serde_json::json!({
            "tool": "memrobust",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "config": config,
            "created_at": chrono::Utc::now().to_rfc3339(),
        });
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(format!("csv buffer: {e}")))
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::file(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::file(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::file(path, e))?;
    tmp.persist(path).map_err(|e| CliError::file(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))
}

/// Advisory lock on `<path>.lock`, released on drop.
pub struct StateLock {
    _file: File,
}

impl StateLock {
    pub fn acquire(state: &Path) -> CliResult<Self> {
        let mut lock_path = state.as_os_str().to_owned();
        lock_path.push(".lock");
        let lock_path = PathBuf::from(lock_path);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| CliError::file(&lock_path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(StateLock { _file: file }),
            Err(std::fs::TryLockError::WouldBlock) => Err(CliError::Locked(state.display().to_string())),
            Err(std::fs::TryLockError::Error(e)) => Err(CliError::file(&lock_path, e)),
        }
    }
}

/// Shortest round-trip decimal form of `v`.
pub fn num(v: f64) -> String {
    format!("{v}")
}
