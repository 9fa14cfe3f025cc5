//! Plot-ready CSV and JSON writers plus the checksummed run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Round-trip exact float text: 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Float(x) => out.push_str(&fmt_f64(*x)),
            Cell::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Cell::Text(s) => out.push_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

/// Comma-separated text with a header row and LF line endings.
pub fn render_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            cell.render(&mut out);
        }
        out.push('\n');
    }
    out
}

/// Pretty JSON with lexicographically ordered keys and a trailing newline.
pub fn render_json(value: &Value) -> String {
    // serde_json's default map is a BTreeMap, so keys come out sorted.
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files written by one command, tracked for the manifest.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, String)>,
    started: Instant,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), started: Instant::now() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.push((name.to_owned(), sha256_hex(contents.as_bytes())));
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf, CliError> {
        self.write(name, &render_csv(header, rows))
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<PathBuf, CliError> {
        self.write(name, &render_json(value))
    }

    /// Writes `manifest.json` and returns the list of written files.
    pub fn finish(self, command: &str, config: Value) -> Result<Vec<PathBuf>, CliError> {
        let checksums: Map<String, Value> =
            self.files.iter().map(|(name, sum)| (name.clone(), json!({ "sha256": sum }))).collect();
        let manifest = json!({
            "artifact": "rglab",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "outputs": checksums,
            "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            "runtime_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, render_json(&manifest))
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        let mut written: Vec<PathBuf> = self.files.iter().map(|(n, _)| self.dir.join(n)).collect();
        written.push(path);
        Ok(written)
    }
}

/// Re-hashes every file listed in `manifest.json` under `dir`; returns the
/// names whose checksum does not match.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Value = serde_json::from_str(&text).map_err(CliError::runtime)?;
    let outputs = manifest["outputs"]
        .as_object()
        .ok_or_else(|| CliError::Runtime("manifest has no outputs".into()))?;
    let mut bad = Vec::new();
    for (name, entry) in outputs {
        let bytes = fs::read(dir.join(name))?;
        if entry["sha256"].as_str() != Some(sha256_hex(&bytes).as_str()) {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}
