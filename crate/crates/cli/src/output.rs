use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::error::CliResult;

#[derive(Serialize)]
pub struct Record<'a, T: Serialize> {
    pub format_version: u32,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub results: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

pub fn json_record<T: Serialize>(
    config: &RunConfig,
    results: T,
    runtime: Option<f64>,
) -> CliResult<String> {
    let record = Record {
        format_version: FORMAT_VERSION,
        command: &config.command,
        config,
        results,
        runtime_seconds: runtime,
    };
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    Ok(text)
}

/// CSV with a header row, `\n` line endings and shortest round-trip floats.
pub fn csv_table<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::error::CliError::config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut f = File::create(p)?;
            f.write_all(text.as_bytes())?;
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// `dir/name.ext` -> `dir/name_p<p>.ext`.
pub fn suffixed(path: &Path, p: u32) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_p{p}.{}", ext.to_string_lossy()),
        None => format!("{stem}_p{p}"),
    };
    path.with_file_name(name)
}
