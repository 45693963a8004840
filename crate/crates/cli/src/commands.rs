//! Subcommand implementations. Each returns its output document; writing
//! files and printing is left to the caller.

use std::fmt::Write as _;
use std::path::Path;

use rydberg_rx::analysis::{asymmetry, at_splitting, field_from_splitting, find_at_peaks, RetrievalConstants};
use rydberg_rx::doppler::{compute_spectrum, Spectrum};
use rydberg_rx::link::{run_am_link, run_fm_link, LinkResult};
use rydberg_rx::units::{mhz_to_rad, rad_to_hz};

use crate::config::{LinkBuildError, LinkMode, RunConfig};
use crate::schema::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sim(#[from] rydberg_rx::Error),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    /// 2 for anything the user must fix in the invocation or config.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Sim(rydberg_rx::Error::InvalidConfig(_) | rydberg_rx::Error::InvalidSignal(_)) => 2,
            _ => 1,
        }
    }
}

impl From<LinkBuildError> for CliError {
    fn from(e: LinkBuildError) -> Self {
        match e {
            LinkBuildError::Usage(m) => CliError::Usage(m),
            LinkBuildError::Baseband(b) => CliError::Usage(b.to_string()),
            LinkBuildError::Sim(s) => CliError::Sim(s),
        }
    }
}

/// Least-squares line through `(x, y)`; `None` for fewer than two distinct x.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit { slope, intercept: my - slope * mx, points: n })
}

pub fn summarize_spectrum(spec: &Spectrum, cfg: &RunConfig) -> SpectrumSummary {
    let ladder = cfg.ladder();
    match find_at_peaks(spec) {
        Ok(peaks) => {
            let f_at = at_splitting(&peaks);
            let coupler = f_at / spec.scan_mode.axis_scale(&ladder);
            let field = RetrievalConstants::from_config(&ladder, 0.0).and_then(|c| field_from_splitting(coupler, &c)).ok();
            SpectrumSummary {
                resolved: true,
                f_at_hz: Some(f_at),
                coupler_f_at_hz: Some(coupler),
                asymmetry: asymmetry(&peaks).ok(),
                field_v_per_m: field,
                notice: None,
            }
        }
        Err(e) => SpectrumSummary {
            resolved: false,
            f_at_hz: None,
            coupler_f_at_hz: None,
            asymmetry: None,
            field_v_per_m: None,
            notice: Some(match e {
                rydberg_rx::Error::Peaks(m) if m.starts_with("unresolved") => m,
                e => format!("unresolved splitting: {e}"),
            }),
        },
    }
}

pub fn spectrum(cfg: &RunConfig) -> Result<SpectrumDoc, CliError> {
    let drive = cfg.drive();
    let mode = cfg.scan_mode();
    let axis = cfg.axis_for(&drive, mode);
    let spec = compute_spectrum(&drive, mode, &axis, &cfg.averaging()?, &cfg.ladder())?;
    let summary = summarize_spectrum(&spec, cfg);
    Ok(SpectrumDoc {
        schema_version: SCHEMA_VERSION,
        kind: "spectrum".into(),
        config: cfg.clone(),
        scan_mode: mode.as_str().into(),
        axis_hz: spec.axis.iter().map(|&x| rad_to_hz(x)).collect(),
        signal: spec.signal,
        warnings: spec.warnings,
        summary,
    })
}

pub fn spectrum_csv(doc: &SpectrumDoc) -> String {
    let rows: Vec<Vec<Option<f64>>> = doc.axis_hz.iter().zip(&doc.signal).map(|(a, s)| vec![Some(*a), Some(*s)]).collect();
    render_csv("spectrum", &doc.config, &[("scan_mode", doc.scan_mode.clone())], &SPECTRUM_COLUMNS, &rows)
}

pub fn spectrum_text(doc: &SpectrumDoc) -> String {
    let s = &doc.summary;
    let mut out = format!("{} scan, {} points\n", doc.scan_mode, doc.axis_hz.len());
    match (s.f_at_hz, s.coupler_f_at_hz) {
        (Some(f), Some(c)) => {
            writeln!(out, "f_AT = {:.6} MHz (coupler units {:.6} MHz)", f * 1e-6, c * 1e-6).unwrap();
            if let Some(a) = s.asymmetry {
                writeln!(out, "asymmetry F = {a:.6}").unwrap();
            }
            if let Some(e) = s.field_v_per_m {
                writeln!(out, "E = {e:.6} V/m").unwrap();
            }
        }
        _ => writeln!(out, "{}", s.notice.as_deref().unwrap_or("unresolved splitting")).unwrap(),
    }
    for w in &doc.warnings {
        writeln!(out, "warning: {w:?}").unwrap();
    }
    out
}

pub fn link(cfg: &RunConfig, mode: LinkMode, base_dir: &Path) -> Result<LinkDoc, CliError> {
    let mut cfg = cfg.clone();
    cfg.resolve_carrier(mode);
    let link_cfg = cfg.link_config(mode, base_dir)?;
    let result = match mode {
        LinkMode::Am => run_am_link(&link_cfg)?,
        LinkMode::Fm => run_fm_link(&link_cfg)?,
    };
    Ok(link_doc(cfg, mode, &result))
}

fn link_doc(config: RunConfig, mode: LinkMode, r: &LinkResult) -> LinkDoc {
    // FM quantities leave the library in rad/s.
    let scale = match mode {
        LinkMode::Am => 1.0,
        LinkMode::Fm => rad_to_hz(1.0),
    };
    LinkDoc {
        schema_version: SCHEMA_VERSION,
        kind: match mode {
            LinkMode::Am => "am_link",
            LinkMode::Fm => "fm_link",
        }
        .into(),
        config,
        transmitted_unit: match mode {
            LinkMode::Am => "m",
            LinkMode::Fm => "hz",
        }
        .into(),
        t_s: r.times.clone(),
        transmitted: r.transmitted.iter().map(|x| x * scale).collect(),
        received: r.received.iter().map(|x| x.map(|v| v * scale)).collect(),
        deviation: r.deviation.clone(),
        normalizer: r.normalizer * scale,
        mean_deviation: r.mean_deviation,
        fidelity: r.fidelity,
        modulation_index: match mode {
            LinkMode::Am => r.recovered_modulation_index().ok(),
            LinkMode::Fm => None,
        },
        calibration: CalibrationSummary {
            e_carrier_v_per_m: r.calibration.e_carrier,
            rabi_ref_hz: rad_to_hz(r.calibration.rabi_ref),
            f_at_hz: r.calibration.f_at,
            peak_signal: r.calibration.peak_signal,
        },
        failures: r.failures.clone(),
        warnings: r.warnings.clone(),
    }
}

pub fn link_csv(doc: &LinkDoc) -> String {
    let rows: Vec<Vec<Option<f64>>> = (0..doc.t_s.len())
        .map(|i| vec![Some(doc.t_s[i]), Some(doc.transmitted[i]), doc.received[i], doc.deviation[i]])
        .collect();
    let meta = [
        ("transmitted_unit", doc.transmitted_unit.clone()),
        ("fidelity", doc.fidelity.to_string()),
        ("normalizer", doc.normalizer.to_string()),
    ];
    render_csv(&doc.kind, &doc.config, &meta, &LINK_COLUMNS, &rows)
}

pub fn link_text(doc: &LinkDoc) -> String {
    let mut out = String::new();
    let c = &doc.calibration;
    writeln!(out, "calibration: E_c = {:.6} V/m, f_AT = {:.6} MHz", c.e_carrier_v_per_m, c.f_at_hz * 1e-6).unwrap();
    writeln!(out, "samples: {} ({} failed)", doc.t_s.len(), doc.failures.len()).unwrap();
    writeln!(out, "mean deviation = {:.6}", doc.mean_deviation).unwrap();
    writeln!(out, "fidelity = {:.6}", doc.fidelity).unwrap();
    if let Some(k) = doc.modulation_index {
        writeln!(out, "k_AM = {k:.6}").unwrap();
    }
    for f in &doc.failures {
        writeln!(out, "failed sample {} at t = {} s: {}", f.index, f.time, f.message).unwrap();
    }
    out
}

pub fn calibrate(cfg: &RunConfig) -> Result<SweepDoc, CliError> {
    if cfg.calibrate.sweep_mhz.is_empty() {
        return Err(CliError::Usage("the Rabi-frequency sweep is empty".into()));
    }
    let ladder = cfg.ladder();
    let mode = cfg.scan_mode();
    let averaging = cfg.averaging()?;
    let consts = RetrievalConstants::from_config(&ladder, 0.0)?;
    let mut rows = Vec::with_capacity(cfg.calibrate.sweep_mhz.len());
    for &om in &cfg.calibrate.sweep_mhz {
        let drive = rydberg_rx::ladder::DriveState { omega_mw: mhz_to_rad(om), ..cfg.drive() };
        let spec = compute_spectrum(&drive, mode, &cfg.axis_for(&drive, mode), &averaging, &ladder)?;
        let row = match find_at_peaks(&spec) {
            Ok(p) => {
                let f = at_splitting(&p);
                SweepRow {
                    mw_rabi_hz: om * 1e6,
                    f_at_hz: Some(f),
                    field_v_per_m: field_from_splitting(f / mode.axis_scale(&ladder), &consts).ok(),
                    resolved: true,
                    note: None,
                }
            }
            Err(e) => SweepRow {
                mw_rabi_hz: om * 1e6,
                f_at_hz: None,
                field_v_per_m: None,
                resolved: false,
                note: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.f_at_hz.map(|f| (r.mw_rabi_hz, f))).unzip();
    Ok(SweepDoc {
        schema_version: SCHEMA_VERSION,
        kind: "calibration".into(),
        config: cfg.clone(),
        scan_mode: mode.as_str().into(),
        fit: fit_line(&x, &y),
        rows,
    })
}

pub fn sweep_csv(doc: &SweepDoc) -> String {
    let rows: Vec<Vec<Option<f64>>> = doc
        .rows
        .iter()
        .map(|r| vec![Some(r.mw_rabi_hz), r.f_at_hz, r.field_v_per_m, Some(if r.resolved { 1.0 } else { 0.0 })])
        .collect();
    let mut meta = vec![("scan_mode", doc.scan_mode.clone())];
    if let Some(f) = doc.fit {
        meta.push(("fit_slope", f.slope.to_string()));
        meta.push(("fit_intercept_hz", f.intercept.to_string()));
    }
    render_csv("calibration", &doc.config, &meta, &SWEEP_COLUMNS, &rows)
}

pub fn sweep_text(doc: &SweepDoc) -> String {
    let mut out = String::new();
    for r in &doc.rows {
        match r.f_at_hz {
            Some(f) => writeln!(
                out,
                "Omega = {:8.3} MHz  f_AT = {:10.6} MHz  E = {:.6} V/m",
                r.mw_rabi_hz * 1e-6,
                f * 1e-6,
                r.field_v_per_m.unwrap_or(f64::NAN)
            )
            .unwrap(),
            None => writeln!(out, "Omega = {:8.3} MHz  unresolved ({})", r.mw_rabi_hz * 1e-6, r.note.as_deref().unwrap_or(""))
                .unwrap(),
        }
    }
    match doc.fit {
        Some(f) => writeln!(
            out,
            "slope = {:.6} (intercept {:.6} MHz, {} resolved points)",
            f.slope,
            f.intercept * 1e-6,
            f.points
        )
        .unwrap(),
        None => writeln!(out, "slope: fewer than two resolved points").unwrap(),
    }
    out
}
