use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;

pub const MODULE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
pub const REPORT_FORMAT: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a serializable value's canonical JSON (object keys sorted).
pub fn hash_of<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Io(format!("serializing for hash: {e}")))?;
    Ok(sha256_hex(v.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub module_version: String,
}

/// Everything except `timestamp` and `hash` is covered by `hash`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: RunMeta,
    pub payload: Value,
    pub timestamp: String,
    pub hash: String,
}

#[derive(Serialize)]
struct HashedRegion<'a> {
    meta: &'a RunMeta,
    payload: &'a Value,
}

impl RunReport {
    pub fn new<C: Serialize, P: Serialize>(
        command: &str,
        config: &C,
        seed: Option<u64>,
        payload: &P,
    ) -> Result<Self, CliError> {
        let meta = RunMeta {
            format: REPORT_FORMAT,
            command: command.into(),
            config_hash: hash_of(config)?,
            seed,
            module_version: MODULE_VERSION.into(),
        };
        let payload = serde_json::to_value(payload).map_err(|e| CliError::Io(format!("serializing payload: {e}")))?;
        let mut report = Self { meta, payload, timestamp: chrono::Utc::now().to_rfc3339(), hash: String::new() };
        report.hash = report.compute_hash()?;
        Ok(report)
    }

    /// Canonical text of the hash-checked region.
    pub fn hashed_region(&self) -> Result<String, CliError> {
        let region = HashedRegion { meta: &self.meta, payload: &self.payload };
        Ok(serde_json::to_value(&region).map_err(|e| CliError::Io(e.to_string()))?.to_string())
    }

    pub fn compute_hash(&self) -> Result<String, CliError> {
        Ok(sha256_hex(self.hashed_region()?.as_bytes()))
    }

    pub fn hash_ok(&self) -> bool {
        self.compute_hash().is_ok_and(|h| h == self.hash)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        // Serializing a tree of plain values cannot fail.
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

/// Plain aligned text table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, headers: &[&str]) -> Self {
        Self { title: title.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    /// Tab-separated with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = self.headers.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate().take(n) {
                widths[i] = widths[i].max(c.len());
            }
        }
        if !self.title.is_empty() {
            writeln!(f, "{}", self.title)?;
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{:<w$}", c, w = widths.get(i).copied().unwrap_or(0)))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        writeln!(f, "{}", line(&self.headers))?;
        writeln!(f, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "))?;
        for r in &self.rows {
            writeln!(f, "{}", line(r))?;
        }
        Ok(())
    }
}

pub fn fmt_f(x: f64) -> String {
    format!("{x:.4}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), fmt_f)
}
