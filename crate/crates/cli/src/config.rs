//! Run configuration. A TOML file with the unit spelled out in every key
//! name, layered under command-line overrides. Missing keys fall back to the
//! caesium defaults of the core crate.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rydberg_rx::doppler::{default_axis, make_velocity_grid, symmetric_axis, thermal_sigma, Averaging, ScanMode, VelocityGrid};
use rydberg_rx::ladder::{DriveState, LadderConfig};
use rydberg_rx::link::{LinkConfig, LinkSignal, ScanSettings};
use rydberg_rx::modulation::{AmSignal, Baseband, FmSignal, Interpolation, Waveform};
use rydberg_rx::units::{mhz_to_rad, AMU, HBAR};

use crate::baseband::load_baseband_csv;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{origin}: `{key}` {message}")]
    Invalid { origin: String, key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    /// Decay and dephasing rates are given as Γ/2π.
    pub gamma_e_mhz: f64,
    pub gamma_r_mhz: f64,
    pub gamma_rp_mhz: f64,
    pub deph_probe_mhz: f64,
    pub deph_ryd_mhz: f64,
    pub lambda_p_nm: f64,
    pub lambda_c_nm: f64,
    pub dipole_mw_c_m: f64,
    pub mass_amu: f64,
    pub temperature_k: f64,
    pub carrier_freq_ghz: f64,
}

impl Default for AtomSection {
    /// Same values as `LadderConfig::default()`, in file units.
    fn default() -> Self {
        Self {
            gamma_e_mhz: 5.2,
            gamma_r_mhz: 2.0,
            gamma_rp_mhz: 2.0,
            deph_probe_mhz: 0.0,
            deph_ryd_mhz: 0.1,
            lambda_p_nm: 852.0,
            lambda_c_nm: 510.0,
            dipole_mw_c_m: 1.046e-26,
            mass_amu: 132.905_451_961,
            temperature_k: 300.0,
            carrier_freq_ghz: 16.98,
        }
    }
}

/// Rabi frequencies and detunings as Ω/2π and Δ/2π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub probe_rabi_mhz: f64,
    pub coupler_rabi_mhz: f64,
    pub mw_rabi_mhz: f64,
    pub probe_detuning_mhz: f64,
    pub coupler_detuning_mhz: f64,
    pub mw_detuning_mhz: f64,
}

impl Default for DriveSection {
    /// Same values as `DriveState::default()`, in file units.
    fn default() -> Self {
        Self {
            probe_rabi_mhz: 12.3,
            coupler_rabi_mhz: 2.45,
            mw_rabi_mhz: 0.0,
            probe_detuning_mhz: 0.0,
            coupler_detuning_mhz: 0.0,
            mw_detuning_mhz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AveragingKind {
    /// Closed-form Maxwell-Boltzmann average.
    Exact,
    /// Trapezoid rule on equally spaced velocity nodes.
    Uniform,
    GaussHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScanModeName {
    Coupler,
    Probe,
}

impl From<ScanModeName> for ScanMode {
    fn from(m: ScanModeName) -> Self {
        match m {
            ScanModeName::Coupler => ScanMode::Coupler,
            ScanModeName::Probe => ScanMode::Probe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub mode: ScanModeName,
    pub points: usize,
    /// Fixed half-width of the axis. When absent the axis follows the
    /// microwave Rabi frequency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_span_mhz: Option<f64>,
    /// Link-axis half-width in units of the carrier Rabi frequency.
    pub link_span_factor: f64,
    pub averaging: AveragingKind,
    pub velocity_nodes: usize,
    pub velocity_span_sigmas: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        let s = ScanSettings::default();
        Self {
            mode: ScanModeName::Coupler,
            points: s.points,
            half_span_mhz: None,
            link_span_factor: s.span_factor,
            averaging: AveragingKind::Exact,
            velocity_nodes: 4001,
            velocity_span_sigmas: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    Sinusoid,
    Square,
    /// Samples from a `t_s,value` CSV file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    Am,
    Fm,
}

/// Baseband and link settings. For AM the waveform is m(t); for FM it is
/// the shape b(t) scaled by `fm_deviation_mhz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub waveform: WaveformKind,
    pub freq_hz: f64,
    pub phase_rad: f64,
    /// AM sinusoid: m(t) = 1 − depth·cos(2πft + φ).
    pub depth: f64,
    pub low: f64,
    pub high: f64,
    pub duty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub interpolation: Interpolation,
    pub duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_field_v_per_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carrier_rabi_mhz: Option<f64>,
    pub fm_deviation_mhz: f64,
    pub sampling_rate_hz: f64,
    /// Detector noise relative to the tallest calibration line.
    pub noise_rms: f64,
    pub seed: u64,
}

/// Carrier used when neither a field nor a Rabi frequency is configured.
pub const AM_DEFAULT_FIELD_V_PER_M: f64 = 2.25;
pub const FM_DEFAULT_RABI_MHZ: f64 = 60.0;

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            waveform: WaveformKind::Sinusoid,
            freq_hz: 1.0,
            phase_rad: 0.0,
            depth: 0.5,
            low: 0.5,
            high: 1.5,
            duty: 0.5,
            file: None,
            interpolation: Interpolation::Linear,
            duration_s: 1.0,
            carrier_field_v_per_m: None,
            carrier_rabi_mhz: None,
            fm_deviation_mhz: 40.0,
            sampling_rate_hz: 50.0,
            noise_rms: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub sweep_mhz: Vec<f64>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self { sweep_mhz: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub drive: DriveSection,
    pub scan: ScanSection,
    pub link: LinkSection,
    pub calibrate: CalibrateSection,
}

/// Where each value came from, for error messages.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    path: Option<PathBuf>,
    text: String,
    overridden: BTreeSet<String>,
}

impl Provenance {
    pub fn mark_override(&mut self, key: &str) {
        self.overridden.insert(key.to_string());
    }

    /// "file.toml line N", "command line" or "default".
    pub fn origin(&self, key: &str) -> String {
        if self.overridden.contains(key) {
            return "command line".into();
        }
        match (&self.path, key_line(&self.text, key)) {
            (Some(p), Some(line)) => format!("{} line {line}", p.display()),
            _ => "default".into(),
        }
    }
}

/// 1-based line of `section.key` in a TOML document, by a plain scan of
/// table headers and `key =` lines.
fn key_line(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.rsplit_once('.')?;
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim();
        let hit = (current == section && k == key) || (current.is_empty() && k == dotted);
        if hit {
            return Some(i + 1);
        }
    }
    None
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<(Self, Provenance), ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let prov = Provenance { path: Some(path.to_path_buf()), text: text.to_string(), overridden: BTreeSet::new() };
        Ok((cfg, prov))
    }

    pub fn load(path: &Path) -> Result<(Self, Provenance), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Field-level checks, reported against the key that holds the value.
    pub fn validate(&self, prov: &Provenance) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| ConfigError::Invalid { origin: prov.origin(key), key: key.into(), message };
        let a = &self.atom;
        for (key, v) in [
            ("atom.gamma_e_mhz", a.gamma_e_mhz),
            ("atom.gamma_r_mhz", a.gamma_r_mhz),
            ("atom.gamma_rp_mhz", a.gamma_rp_mhz),
            ("atom.deph_probe_mhz", a.deph_probe_mhz),
            ("atom.deph_ryd_mhz", a.deph_ryd_mhz),
            ("drive.probe_rabi_mhz", self.drive.probe_rabi_mhz),
            ("drive.coupler_rabi_mhz", self.drive.coupler_rabi_mhz),
            ("drive.mw_rabi_mhz", self.drive.mw_rabi_mhz),
            ("link.noise_rms", self.link.noise_rms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (key, v) in [
            ("atom.lambda_p_nm", a.lambda_p_nm),
            ("atom.lambda_c_nm", a.lambda_c_nm),
            ("atom.dipole_mw_c_m", a.dipole_mw_c_m),
            ("atom.mass_amu", a.mass_amu),
            ("atom.temperature_k", a.temperature_k),
            ("atom.carrier_freq_ghz", a.carrier_freq_ghz),
            ("scan.link_span_factor", self.scan.link_span_factor),
            ("link.freq_hz", self.link.freq_hz),
            ("link.duration_s", self.link.duration_s),
            ("link.sampling_rate_hz", self.link.sampling_rate_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(key, format!("must be finite and > 0, got {v}")));
            }
        }
        for (key, v) in [
            ("drive.probe_detuning_mhz", self.drive.probe_detuning_mhz),
            ("drive.coupler_detuning_mhz", self.drive.coupler_detuning_mhz),
            ("drive.mw_detuning_mhz", self.drive.mw_detuning_mhz),
            ("link.phase_rad", self.link.phase_rad),
            ("link.depth", self.link.depth),
            ("link.low", self.link.low),
            ("link.high", self.link.high),
            ("link.fm_deviation_mhz", self.link.fm_deviation_mhz),
        ] {
            if !v.is_finite() {
                return Err(bad(key, format!("must be finite, got {v}")));
            }
        }
        if a.lambda_p_nm <= a.lambda_c_nm {
            return Err(bad("atom.lambda_p_nm", "must exceed lambda_c_nm in a ladder scheme".into()));
        }
        if self.scan.points < 5 {
            return Err(bad("scan.points", format!("must be at least 5, got {}", self.scan.points)));
        }
        if let Some(h) = self.scan.half_span_mhz {
            if !(h.is_finite() && h > 0.0) {
                return Err(bad("scan.half_span_mhz", format!("must be finite and > 0, got {h}")));
            }
        }
        if self.scan.velocity_nodes == 0 {
            return Err(bad("scan.velocity_nodes", "must be at least 1".into()));
        }
        if !(self.scan.velocity_span_sigmas.is_finite() && self.scan.velocity_span_sigmas >= 0.0) {
            return Err(bad("scan.velocity_span_sigmas", "must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.link.duty) || self.link.duty == 0.0 {
            return Err(bad("link.duty", format!("must lie in (0, 1], got {}", self.link.duty)));
        }
        if self.link.waveform == WaveformKind::File && self.link.file.is_none() {
            return Err(bad("link.file", "is required when waveform = \"file\"".into()));
        }
        if self.link.carrier_field_v_per_m.is_some() && self.link.carrier_rabi_mhz.is_some() {
            return Err(bad(
                "link.carrier_rabi_mhz",
                "conflicts with carrier_field_v_per_m; give one or the other".into(),
            ));
        }
        for (key, v) in [
            ("link.carrier_field_v_per_m", self.link.carrier_field_v_per_m),
            ("link.carrier_rabi_mhz", self.link.carrier_rabi_mhz),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad(key, format!("must be finite and > 0, got {v}")));
                }
            }
        }
        if let Some(v) = self.calibrate.sweep_mhz.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(bad("calibrate.sweep_mhz", format!("entries must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn ladder(&self) -> LadderConfig {
        let a = &self.atom;
        LadderConfig {
            gamma_e: mhz_to_rad(a.gamma_e_mhz),
            gamma_r: mhz_to_rad(a.gamma_r_mhz),
            gamma_rp: mhz_to_rad(a.gamma_rp_mhz),
            deph_probe: mhz_to_rad(a.deph_probe_mhz),
            deph_ryd: mhz_to_rad(a.deph_ryd_mhz),
            lambda_p: a.lambda_p_nm * 1e-9,
            lambda_c: a.lambda_c_nm * 1e-9,
            dipole_mw: a.dipole_mw_c_m,
            atom_mass: a.mass_amu * AMU,
            temperature: a.temperature_k,
            carrier_freq: a.carrier_freq_ghz * 1e9,
            ..LadderConfig::default()
        }
    }

    pub fn drive(&self) -> DriveState {
        let d = &self.drive;
        DriveState {
            omega_p: mhz_to_rad(d.probe_rabi_mhz),
            omega_c: mhz_to_rad(d.coupler_rabi_mhz),
            omega_mw: mhz_to_rad(d.mw_rabi_mhz),
            delta_p: mhz_to_rad(d.probe_detuning_mhz),
            delta_c: mhz_to_rad(d.coupler_detuning_mhz),
            delta_mw: mhz_to_rad(d.mw_detuning_mhz),
        }
    }

    pub fn scan_mode(&self) -> ScanMode {
        self.scan.mode.into()
    }

    pub fn velocity_grid(&self, nodes: usize) -> rydberg_rx::Result<VelocityGrid> {
        let ladder = self.ladder();
        match self.scan.averaging {
            AveragingKind::GaussHermite => VelocityGrid::gauss_hermite(thermal_sigma(&ladder), nodes),
            _ => make_velocity_grid(&ladder, nodes, self.scan.velocity_span_sigmas),
        }
    }

    pub fn averaging(&self) -> rydberg_rx::Result<Averaging> {
        match self.scan.averaging {
            AveragingKind::Exact => Ok(Averaging::Exact),
            _ => Ok(Averaging::Grid(self.velocity_grid(self.scan.velocity_nodes)?)),
        }
    }

    /// Spectrum axis for `drive`, rad/s.
    pub fn axis_for(&self, drive: &DriveState, mode: ScanMode) -> Vec<f64> {
        match self.scan.half_span_mhz {
            Some(h) => symmetric_axis(mhz_to_rad(h), self.scan.points),
            None => default_axis(drive, mode, &self.ladder(), self.scan.points),
        }
    }

    /// Fills in the mode-specific carrier default so the echoed config
    /// records the value actually used.
    pub fn resolve_carrier(&mut self, mode: LinkMode) {
        if self.link.carrier_field_v_per_m.is_none() && self.link.carrier_rabi_mhz.is_none() {
            match mode {
                LinkMode::Am => self.link.carrier_field_v_per_m = Some(AM_DEFAULT_FIELD_V_PER_M),
                LinkMode::Fm => self.link.carrier_rabi_mhz = Some(FM_DEFAULT_RABI_MHZ),
            }
        }
    }

    /// Carrier amplitude E_c, V/m.
    pub fn carrier_field(&self, mode: LinkMode) -> f64 {
        let l = &self.link;
        match (l.carrier_field_v_per_m, l.carrier_rabi_mhz, mode) {
            (Some(e), _, _) => e,
            (None, Some(r), _) => HBAR * mhz_to_rad(r) / self.atom.dipole_mw_c_m,
            (None, None, LinkMode::Am) => AM_DEFAULT_FIELD_V_PER_M,
            (None, None, LinkMode::Fm) => HBAR * mhz_to_rad(FM_DEFAULT_RABI_MHZ) / self.atom.dipole_mw_c_m,
        }
    }

    pub fn baseband(&self, mode: LinkMode, base_dir: &Path) -> Result<Baseband, LinkBuildError> {
        let l = &self.link;
        let waveform = match l.waveform {
            WaveformKind::Sinusoid => match mode {
                LinkMode::Am => Waveform::Sinusoid { freq_hz: l.freq_hz, depth: l.depth, phase: l.phase_rad, offset: 1.0 },
                LinkMode::Fm => Waveform::Sinusoid { freq_hz: l.freq_hz, depth: 1.0, phase: l.phase_rad, offset: 0.0 },
            },
            WaveformKind::Square => Waveform::Square { freq_hz: l.freq_hz, duty: l.duty, low: l.low, high: l.high },
            WaveformKind::File => {
                let rel = l.file.as_deref().ok_or_else(|| LinkBuildError::Usage("link.file is not set".into()))?;
                let path = if rel.is_absolute() { rel.to_path_buf() } else { base_dir.join(rel) };
                load_baseband_csv(&path, l.interpolation)?
            }
        };
        Ok(Baseband::new(waveform, l.duration_s)?)
    }

    /// Full link description. Relative baseband paths resolve against
    /// `base_dir`.
    pub fn link_config(&self, mode: LinkMode, base_dir: &Path) -> Result<LinkConfig, LinkBuildError> {
        let ladder = self.ladder();
        let baseband = self.baseband(mode, base_dir)?;
        let e_c = self.carrier_field(mode);
        let signal = match mode {
            LinkMode::Am => LinkSignal::Am(AmSignal::new(ladder.carrier_freq, e_c, baseband)?),
            LinkMode::Fm => LinkSignal::Fm(FmSignal::new(
                ladder.carrier_freq,
                e_c,
                mhz_to_rad(self.link.fm_deviation_mhz),
                baseband,
                None,
            )?),
        };
        let cfg = LinkConfig {
            ladder,
            drive_base: self.drive(),
            scan: ScanSettings {
                mode: self.scan_mode(),
                points: self.scan.points,
                span_factor: self.scan.link_span_factor,
                averaging: self.averaging()?,
            },
            sampling_rate: self.link.sampling_rate_hz,
            signal,
            noise_rms: self.link.noise_rms,
            rng_seed: self.link.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LinkBuildError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Baseband(#[from] crate::baseband::BasebandError),
    #[error(transparent)]
    Sim(#[from] rydberg_rx::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rydberg_rx::units::rad_to_mhz;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let (back, _) = RunConfig::from_toml(&cfg.to_toml(), Path::new("echo.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn file_defaults_match_library_defaults() {
        let cfg = RunConfig::default();
        let (a, b) = (cfg.ladder(), LadderConfig::default());
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs();
        for (x, y) in [
            (a.gamma_e, b.gamma_e),
            (a.gamma_r, b.gamma_r),
            (a.gamma_rp, b.gamma_rp),
            (a.deph_ryd, b.deph_ryd),
            (a.lambda_p, b.lambda_p),
            (a.lambda_c, b.lambda_c),
            (a.dipole_mw, b.dipole_mw),
            (a.atom_mass, b.atom_mass),
            (a.temperature, b.temperature),
            (a.carrier_freq, b.carrier_freq),
        ] {
            assert!(close(x, y), "{x} vs {y}");
        }
        assert_eq!(a.deph_probe, b.deph_probe);
        let (d, e) = (cfg.drive(), DriveState::default());
        for (x, y) in [(d.omega_p, e.omega_p), (d.omega_c, e.omega_c), (d.omega_mw, e.omega_mw)] {
            assert!(close(x, y), "{x} vs {y}");
        }
    }

    #[test]
    fn unit_conversion_of_drive() {
        let text = "[drive]\nmw_rabi_mhz = 40\nmw_detuning_mhz = -10\n";
        let (cfg, _) = RunConfig::from_toml(text, Path::new("a.toml")).unwrap();
        let d = cfg.drive();
        assert!((d.omega_mw - 2.0 * std::f64::consts::PI * 40e6).abs() < 1e-3);
        assert!((d.delta_mw + 2.0 * std::f64::consts::PI * 10e6).abs() < 1e-3);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "[atom]\ntemperature_k = 300\n\n[drive]\nmw_rabbi_mhz = 4\n";
        let err = RunConfig::from_toml(text, Path::new("run.toml")).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        assert!(err.contains("mw_rabbi_mhz"), "{err}");
    }

    #[test]
    fn invalid_value_reports_its_line() {
        let text = "# cell\n[atom]\ngamma_e_mhz = 5.2\ntemperature_k = -4\n";
        let (cfg, prov) = RunConfig::from_toml(text, Path::new("run.toml")).unwrap();
        let err = cfg.validate(&prov).unwrap_err().to_string();
        assert!(err.starts_with("run.toml line 4"), "{err}");
        assert!(err.contains("atom.temperature_k"), "{err}");
    }

    #[test]
    fn override_is_attributed_to_command_line() {
        let mut cfg = RunConfig::default();
        let mut prov = Provenance::default();
        cfg.link.duration_s = 0.0;
        prov.mark_override("link.duration_s");
        let err = cfg.validate(&prov).unwrap_err().to_string();
        assert!(err.starts_with("command line"), "{err}");
    }

    #[test]
    fn carrier_defaults_depend_on_mode() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.carrier_field(LinkMode::Am), 2.25);
        let e = cfg.carrier_field(LinkMode::Fm);
        let rabi = cfg.atom.dipole_mw_c_m * e / HBAR;
        assert!((rad_to_mhz(rabi) - 60.0).abs() < 1e-9);
        let mut both = cfg.clone();
        both.link.carrier_field_v_per_m = Some(1.0);
        both.link.carrier_rabi_mhz = Some(10.0);
        assert!(both.validate(&Provenance::default()).is_err());
    }

    #[test]
    fn key_line_handles_dotted_top_level_keys() {
        let text = "atom.temperature_k = 1\n[drive]\nmw_rabi_mhz=3\n";
        assert_eq!(key_line(text, "atom.temperature_k"), Some(1));
        assert_eq!(key_line(text, "drive.mw_rabi_mhz"), Some(3));
        assert_eq!(key_line(text, "drive.probe_rabi_mhz"), None);
    }
}
