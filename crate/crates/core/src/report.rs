//! Claim rows, the run summary, and file emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// How `observed` is compared with `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|observed - expected| <= tolerance`
    Within,
    /// `observed <= expected + tolerance`
    AtMost,
    /// `observed >= expected - tolerance`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub comparison: Comparison,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Claim {
    pub fn new(name: impl Into<String>, comparison: Comparison, expected: f64, observed: f64, tolerance: f64) -> Self {
        let pass = match comparison {
            Comparison::Within => (observed - expected).abs() <= tolerance,
            Comparison::AtMost => observed <= expected + tolerance,
            Comparison::AtLeast => observed >= expected - tolerance,
        };
        Self {
            name: name.into(),
            comparison,
            expected,
            observed,
            tolerance,
            pass,
        }
    }

    pub fn within(name: impl Into<String>, expected: f64, observed: f64, tolerance: f64) -> Self {
        Self::new(name, Comparison::Within, expected, observed, tolerance)
    }

    pub fn at_most(name: impl Into<String>, bound: f64, observed: f64, tolerance: f64) -> Self {
        Self::new(name, Comparison::AtMost, bound, observed, tolerance)
    }

    pub fn at_least(name: impl Into<String>, bound: f64, observed: f64, tolerance: f64) -> Self {
        Self::new(name, Comparison::AtLeast, bound, observed, tolerance)
    }

    /// Boolean check recorded as `observed in {0, 1}` against `expected = 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::within(name, 1.0, if ok { 1.0 } else { 0.0 }, 0.0)
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::Within => "==",
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        format!(
            "[{}] {}: observed {} {} {} (tol {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            op,
            self.expected,
            self.tolerance
        )
    }
}

pub const SCHEMA_ID: &str = "subdivlab/summary-report/v1";

/// Machine-readable result of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema: String,
    pub command: String,
    pub config: serde_json::Value,
    pub claims: Vec<Claim>,
    pub all_pass: bool,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<String>,
}

impl SummaryReport {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            schema: SCHEMA_ID.to_string(),
            command: command.into(),
            config,
            claims: Vec::new(),
            all_pass: true,
            wall_clock_seconds: 0.0,
            artifacts: Vec::new(),
        }
    }

    pub fn push(&mut self, claim: Claim) {
        self.all_pass &= claim.pass;
        self.claims.push(claim);
    }

    pub fn extend(&mut self, claims: impl IntoIterator<Item = Claim>) {
        for c in claims {
            self.push(c);
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.artifacts.push(name);
    }

    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }
}

/// Output format of the summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

pub const CLAIM_CSV_HEADER: &str = "name,comparison,expected,observed,tolerance,pass";

/// Writes the summary as `summary.json` or `summary.csv` under `dir`.
pub fn emit(report: &SummaryReport, format: Format, dir: &Path) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    match format {
        Format::Json => {
            let path = dir.join("summary.json");
            let mut text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
            text.push('\n');
            fs::write(&path, text)?;
            Ok(path)
        }
        Format::Csv => {
            let path = dir.join("summary.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(CLAIM_CSV_HEADER.split(','))?;
            for c in &report.claims {
                let comparison = match c.comparison {
                    Comparison::Within => "within",
                    Comparison::AtMost => "at_most",
                    Comparison::AtLeast => "at_least",
                };
                w.write_record([
                    c.name.clone(),
                    comparison.to_string(),
                    c.expected.to_string(),
                    c.observed.to_string(),
                    c.tolerance.to_string(),
                    c.pass.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(path)
        }
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::other)?;
    f.write_all(b"\n")
}

/// Writes serializable rows as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(fs::File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Claim::within("a", 1.0, 1.05, 0.1).pass);
        assert!(!Claim::within("a", 1.0, 1.2, 0.1).pass);
        assert!(Claim::at_most("b", 0.0, -1.0, 0.0).pass);
        assert!(!Claim::at_most("b", 0.0, 1e-9, 0.0).pass);
        assert!(Claim::at_least("c", 0.01, 0.02, 0.0).pass);
        assert!(!Claim::holds("d", false).pass);
        assert!(!Claim::within("nan", 0.0, f64::NAN, 1.0).pass);
    }

    #[test]
    fn all_pass_tracks_claims() {
        let mut r = SummaryReport::new("t", serde_json::json!({}));
        assert!(r.all_pass());
        r.push(Claim::holds("x", true));
        assert!(r.all_pass);
        r.push(Claim::holds("y", false));
        assert!(!r.all_pass && !r.all_pass());
    }

    #[test]
    fn empty_report_emits() {
        let dir = tempfile::tempdir().unwrap();
        let r = SummaryReport::new("empty", serde_json::json!({"seed": 1}));
        let p = emit(&r, Format::Json, dir.path()).unwrap();
        let back: SummaryReport = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert!(back.claims.is_empty());
        let p = emit(&r, Format::Csv, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), format!("{CLAIM_CSV_HEADER}\n"));
    }
}
