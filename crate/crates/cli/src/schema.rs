//! Versioned output documents.
//!
//! Every file starts with its `schema_version`. CSV files carry it in a
//! `#`-prefixed header block, followed by the resolved run configuration
//! as commented TOML and then one column-name line. JSON files carry the
//! same information as fields. Readers reject any other version.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rydberg_rx::doppler::SpectrumWarning;
use rydberg_rx::link::{LinkWarning, SampleFailure};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const SPECTRUM_COLUMNS: [&str; 2] = ["axis_hz", "signal"];
pub const LINK_COLUMNS: [&str; 4] = ["t_s", "transmitted", "received", "deviation"];
pub const SWEEP_COLUMNS: [&str; 4] = ["mw_rabi_hz", "f_at_hz", "field_v_per_m", "resolved"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("unsupported schema_version {found}; this reader expects {expected}")]
    Version { found: u32, expected: u32 },
    #[error("missing schema_version")]
    MissingVersion,
    #[error("malformed document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub resolved: bool,
    /// Peak-to-peak splitting on the scan axis, Hz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_at_hz: Option<f64>,
    /// The same splitting converted to coupler-scan units, Hz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupler_f_at_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymmetry: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_v_per_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDoc {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub scan_mode: String,
    pub axis_hz: Vec<f64>,
    pub signal: Vec<f64>,
    pub warnings: Vec<SpectrumWarning>,
    pub summary: SpectrumSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub e_carrier_v_per_m: f64,
    /// Reference Rabi frequency Ω/2π, Hz.
    pub rabi_ref_hz: f64,
    pub f_at_hz: f64,
    pub peak_signal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDoc {
    pub schema_version: u32,
    /// `am_link` or `fm_link`.
    pub kind: String,
    pub config: RunConfig,
    /// `m` (dimensionless modulation) for AM, `hz` (δω/2π) for FM.
    pub transmitted_unit: String,
    pub t_s: Vec<f64>,
    pub transmitted: Vec<f64>,
    pub received: Vec<Option<f64>>,
    pub deviation: Vec<Option<f64>>,
    pub normalizer: f64,
    pub mean_deviation: f64,
    pub fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulation_index: Option<f64>,
    pub calibration: CalibrationSummary,
    pub failures: Vec<SampleFailure>,
    pub warnings: Vec<LinkWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mw_rabi_hz: f64,
    pub f_at_hz: Option<f64>,
    pub field_v_per_m: Option<f64>,
    pub resolved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDoc {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub scan_mode: String,
    pub rows: Vec<SweepRow>,
    /// Least-squares line of f_AT against Ω/2π over the resolved rows.
    pub fit: Option<LineFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Measured error; null when it could not be measured.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerReport {
    pub schema_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders a CSV document. `meta` lines go between the version and the
/// config echo.
pub fn render_csv(
    kind: &str,
    config: &RunConfig,
    meta: &[(&str, String)],
    columns: &[&str],
    rows: &[Vec<Option<f64>>],
) -> String {
    let mut out = Vec::new();
    writeln!(out, "# schema_version = {SCHEMA_VERSION}").unwrap();
    writeln!(out, "# kind = {kind}").unwrap();
    for (k, v) in meta {
        writeln!(out, "# {k} = {v}").unwrap();
    }
    writeln!(out, "# config:").unwrap();
    for line in config.to_toml().lines() {
        writeln!(out, "# {line}").unwrap();
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(columns).unwrap();
        for row in rows {
            w.write_record(row.iter().map(|v| fmt_cell(*v))).unwrap();
        }
        w.flush().unwrap();
    }
    String::from_utf8(out).expect("CSV output is UTF-8")
}

pub fn render_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes to JSON");
    s.push('\n');
    s
}

/// Parsed CSV document.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDoc {
    pub schema_version: u32,
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    /// Commented TOML block, prefixes stripped.
    pub config_toml: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvDoc {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn config(&self) -> Result<RunConfig, SchemaError> {
        toml::from_str(&self.config_toml).map_err(|e| SchemaError::Malformed(format!("config echo: {e}")))
    }
}

pub fn parse_csv(text: &str) -> Result<CsvDoc, SchemaError> {
    let mut meta = BTreeMap::new();
    let mut config = String::new();
    let mut in_config = false;
    let mut body_start = text.len();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let Some(c) = line.strip_prefix('#') else {
            body_start = offset;
            break;
        };
        offset += line.len();
        let c = c.strip_prefix(' ').unwrap_or(c).trim_end_matches(['\r', '\n']);
        if in_config {
            config.push_str(c);
            config.push('\n');
        } else if c == "config:" {
            in_config = true;
        } else if let Some((k, v)) = c.split_once(" = ") {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let version: u32 = meta
        .get("schema_version")
        .ok_or(SchemaError::MissingVersion)?
        .parse()
        .map_err(|_| SchemaError::Malformed("schema_version is not an integer".into()))?;
    if version != SCHEMA_VERSION {
        return Err(SchemaError::Version { found: version, expected: SCHEMA_VERSION });
    }
    let kind = meta.get("kind").cloned().ok_or_else(|| SchemaError::Malformed("missing kind".into()))?;
    let mut reader = csv::Reader::from_reader(text[body_start..].as_bytes());
    let columns: Vec<String> =
        reader.headers().map_err(|e| SchemaError::Malformed(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| SchemaError::Malformed(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| SchemaError::Malformed(format!("not a number: {s:?}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(CsvDoc { schema_version: version, kind, meta, config_toml: config, columns, rows })
}

/// Checks the version field of a JSON document before full decoding.
pub fn check_json_version(text: &str) -> Result<serde_json::Value, SchemaError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| SchemaError::Malformed(e.to_string()))?;
    let found = v.get("schema_version").and_then(|x| x.as_u64()).ok_or(SchemaError::MissingVersion)? as u32;
    if found != SCHEMA_VERSION {
        return Err(SchemaError::Version { found, expected: SCHEMA_VERSION });
    }
    Ok(v)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}
