//! Structured JSON reports.
//!
//! Every command writes one report: the command name, the raw argv, the
//! resolved seed, SHA-256 hashes of every file read or written, the full
//! configuration, the results, and an exact-verification block where the
//! point budget allowed one. Field order is fixed with the timestamp last,
//! so identical invocations produce byte-identical reports apart from that
//! field (and the wall-time entries inside pipeline stage traces).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use polyreg::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct Report {
    command: String,
    argv: Vec<String>,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    config: Value,
    results: Value,
    verification: Value,
    timestamp_unix_ms: u128,
}

/// Accumulates a command's file traffic and writes the final report.
pub struct ReportSink {
    command: &'static str,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    path: PathBuf,
}

fn sha256_tag(bytes: &[u8]) -> String {
    format!("sha256:{:x}", Sha256::digest(bytes))
}

fn io_err(action: &str, path: &Path, e: std::io::Error) -> Error {
    Error::Parse(format!("cannot {action} {}: {e}", path.display()))
}

impl ReportSink {
    /// `report_path` overrides the default `<command>.report.json`.
    pub fn new(command: &'static str, seed: u64, report_path: Option<&Path>) -> ReportSink {
        let path = report_path.map(Path::to_path_buf).unwrap_or_else(|| {
            PathBuf::from(format!("{}.report.json", command.replace(' ', "-")))
        });
        ReportSink {
            command,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            path,
        }
    }

    /// Reads a fixture file, recording its hash under `inputs`.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| io_err("read", path, e))?;
        self.inputs.insert(path.display().to_string(), sha256_tag(&bytes));
        String::from_utf8(bytes)
            .map_err(|_| Error::Parse(format!("{} is not UTF-8", path.display())))
    }

    /// Writes an artifact, recording its hash under `outputs`.
    pub fn write_output(&mut self, path: &Path, text: &str) -> Result<()> {
        fs::write(path, text).map_err(|e| io_err("write", path, e))?;
        self.outputs.insert(path.display().to_string(), sha256_tag(text.as_bytes()));
        Ok(())
    }

    /// Writes the report and returns its path.
    pub fn finish(self, config: Value, results: Value, verification: Value) -> Result<PathBuf> {
        let report = Report {
            command: self.command.to_string(),
            argv: std::env::args().collect(),
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            config,
            results,
            verification,
            timestamp_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        };
        let text = serde_json::to_string_pretty(&report).expect("report fields serialize") + "\n";
        fs::write(&self.path, &text).map_err(|e| io_err("write", &self.path, e))?;
        Ok(self.path)
    }
}
