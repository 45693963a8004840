//! Loader for sampled baseband waveforms stored as `t_s,value` CSV.

use std::path::{Path, PathBuf};

use rydberg_rx::modulation::{Interpolation, Waveform};

#[derive(Debug, thiserror::Error)]
pub enum BasebandError {
    #[error("cannot read baseband file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Relative tolerance on the sample spacing.
const SPACING_TOL: f64 = 1e-6;

/// Reads uniformly spaced samples starting at `t = 0`. Lines starting with
/// `#` are comments; the first data line must be the `t_s,value` header.
pub fn load_baseband_csv(path: &Path, interpolation: Interpolation) -> Result<Waveform, BasebandError> {
    let text = std::fs::read_to_string(path).map_err(|source| BasebandError::Io { path: path.into(), source })?;
    parse_baseband_csv(&text, interpolation).map_err(|message| BasebandError::Format { path: path.into(), message })
}

pub fn parse_baseband_csv(text: &str, interpolation: Interpolation) -> Result<Waveform, String> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.len() != 2 || &headers[0] != "t_s" || &headers[1] != "value" {
        return Err(format!("expected header `t_s,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut t = Vec::new();
    let mut samples = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        let num = |k: usize| -> Result<f64, String> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("line {line}: column {} is not a finite number", k + 1))
        };
        t.push(num(0)?);
        samples.push(num(1)?);
    }
    if samples.len() < 2 {
        return Err("need at least two samples".into());
    }
    if t[0].abs() > SPACING_TOL * (t[1] - t[0]).abs() {
        return Err(format!("first sample must be at t = 0, got {}", t[0]));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err("sample times must increase".into());
    }
    for (k, tk) in t.iter().enumerate() {
        if (tk - k as f64 * dt).abs() > SPACING_TOL * dt.max(1e-300) * (k.max(1) as f64) {
            return Err(format!("samples must be equally spaced; sample {k} sits at {tk} s, expected {} s", k as f64 * dt));
        }
    }
    Ok(Waveform::Arbitrary { samples, sample_rate: 1.0 / dt, interpolation })
}
