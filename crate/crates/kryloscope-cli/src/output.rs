//! Deterministic file output: CSV tables at full double precision, JSON
//! documents, and the per-run manifest. All files are written atomically
//! (temp file + rename).

use crate::{CliError, CliResult};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable providing the default output directory.
pub const OUT_DIR_ENV: &str = "KRYLOSCOPE_OUT_DIR";

pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("kryloscope_runs")
}

/// Serialize one float with 17 significant digits so readers recover the
/// exact bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// A numeric table with named columns.
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = String::new();
        text.push_str(&self.columns.join(","));
        text.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        write_atomic(path, text.as_bytes())
    }

    /// Re-parse a table written by [`CsvTable::write`].
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Config(format!("{}: empty table", path.display())))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse().map_err(|e| {
                        CliError::Config(format!("{} line {}: {e}", path.display(), i + 2))
                    })
                })
                .collect::<CliResult<_>>()?;
            if row.len() != columns.len() {
                return Err(CliError::Config(format!(
                    "{} line {}: {} cells, expected {}",
                    path.display(),
                    i + 2,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Config(format!("json serialization: {e}")))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Per-run manifest: everything needed to reproduce the run.
#[derive(Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    /// Resolved configuration after defaults, config file, and flags.
    pub config: C,
    /// Numerical validity flags raised during the run.
    pub flags_raised: Vec<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn write_manifest<C: Serialize>(
    out_dir: &Path,
    subcommand: &str,
    config: C,
    flags_raised: Vec<String>,
    outputs: Vec<String>,
) -> CliResult<()> {
    let manifest = Manifest {
        tool: "kryloscope",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: subcommand.to_string(),
        config,
        flags_raised,
        outputs,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)
}
