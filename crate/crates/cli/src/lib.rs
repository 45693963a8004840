//! Command-line front end for the `rydberg-rx` simulator.

pub mod baseband;
pub mod checks;
pub mod commands;
pub mod config;
pub mod schema;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::{AveragingKind, LinkMode, Provenance, RunConfig, ScanModeName, WaveformKind};
use crate::schema::{render_json, write_file, Format};

#[derive(Debug, Parser)]
#[command(name = "rydberg-rx", version, about = "Rydberg-atom microwave receiver simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one EIT spectrum and report splitting, asymmetry and field.
    Spectrum(CommonArgs),
    /// Run an amplitude-modulated link and report fidelity and k_AM.
    Am(CommonArgs),
    /// Run a frequency-modulated link and report fidelity.
    Fm(CommonArgs),
    /// Sweep the microwave Rabi frequency and fit splitting against it.
    Calibrate(CommonArgs),
    /// Check velocity-averaging convergence, symmetry and Doppler scaling.
    DopplerCheck(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; missing keys take built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Seed for detector noise.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Physical overrides. Frequencies are ordinary (Ω/2π) in MHz.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    #[arg(long, help_heading = "Atom")]
    pub temperature_k: Option<f64>,
    #[arg(long, help_heading = "Atom")]
    pub gamma_r_mhz: Option<f64>,
    #[arg(long, help_heading = "Drive")]
    pub probe_rabi_mhz: Option<f64>,
    #[arg(long, help_heading = "Drive")]
    pub coupler_rabi_mhz: Option<f64>,
    #[arg(long, help_heading = "Drive")]
    pub mw_rabi_mhz: Option<f64>,
    #[arg(long, allow_hyphen_values = true, help_heading = "Drive")]
    pub probe_detuning_mhz: Option<f64>,
    #[arg(long, allow_hyphen_values = true, help_heading = "Drive")]
    pub coupler_detuning_mhz: Option<f64>,
    /// Microwave detuning δ/2π; positive puts the lower dressed line on top.
    #[arg(long, allow_hyphen_values = true, help_heading = "Drive")]
    pub mw_detuning_mhz: Option<f64>,
    #[arg(long, value_enum, help_heading = "Scan")]
    pub scan_mode: Option<ScanModeName>,
    #[arg(long, help_heading = "Scan")]
    pub points: Option<usize>,
    /// Fixed half-width of the scan axis.
    #[arg(long, help_heading = "Scan")]
    pub half_span_mhz: Option<f64>,
    #[arg(long, value_enum, help_heading = "Scan")]
    pub averaging: Option<AveragingKind>,
    #[arg(long, help_heading = "Scan")]
    pub velocity_nodes: Option<usize>,
    #[arg(long, value_enum, help_heading = "Link")]
    pub waveform: Option<WaveformKind>,
    /// `t_s,value` CSV; implies --waveform file.
    #[arg(long, help_heading = "Link")]
    pub baseband_file: Option<PathBuf>,
    #[arg(long, help_heading = "Link")]
    pub freq_hz: Option<f64>,
    #[arg(long, help_heading = "Link")]
    pub depth: Option<f64>,
    #[arg(long, allow_hyphen_values = true, help_heading = "Link")]
    pub low: Option<f64>,
    #[arg(long, allow_hyphen_values = true, help_heading = "Link")]
    pub high: Option<f64>,
    #[arg(long, help_heading = "Link")]
    pub duration_s: Option<f64>,
    #[arg(long, help_heading = "Link")]
    pub sampling_rate_hz: Option<f64>,
    /// Detector noise relative to the tallest calibration line.
    #[arg(long, help_heading = "Link")]
    pub noise_rms: Option<f64>,
    #[arg(long, help_heading = "Link")]
    pub carrier_field_v_per_m: Option<f64>,
    #[arg(long, help_heading = "Link")]
    pub carrier_rabi_mhz: Option<f64>,
    #[arg(long, allow_hyphen_values = true, help_heading = "Link")]
    pub fm_deviation_mhz: Option<f64>,
    /// Comma-separated microwave Rabi frequencies for `calibrate`.
    #[arg(long, help_heading = "Calibrate")]
    pub sweep_mhz: Option<String>,
}

fn parse_sweep(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Usage(format!("--sweep-mhz: `{t}` is not a number"))))
        .collect()
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig, prov: &mut Provenance) -> Result<(), CliError> {
        macro_rules! set {
            ($field:ident, $key:literal, $target:expr) => {
                if let Some(v) = self.$field.clone() {
                    $target = v;
                    prov.mark_override($key);
                }
            };
        }
        set!(temperature_k, "atom.temperature_k", cfg.atom.temperature_k);
        set!(gamma_r_mhz, "atom.gamma_r_mhz", cfg.atom.gamma_r_mhz);
        set!(probe_rabi_mhz, "drive.probe_rabi_mhz", cfg.drive.probe_rabi_mhz);
        set!(coupler_rabi_mhz, "drive.coupler_rabi_mhz", cfg.drive.coupler_rabi_mhz);
        set!(mw_rabi_mhz, "drive.mw_rabi_mhz", cfg.drive.mw_rabi_mhz);
        set!(probe_detuning_mhz, "drive.probe_detuning_mhz", cfg.drive.probe_detuning_mhz);
        set!(coupler_detuning_mhz, "drive.coupler_detuning_mhz", cfg.drive.coupler_detuning_mhz);
        set!(mw_detuning_mhz, "drive.mw_detuning_mhz", cfg.drive.mw_detuning_mhz);
        set!(scan_mode, "scan.mode", cfg.scan.mode);
        set!(points, "scan.points", cfg.scan.points);
        set!(averaging, "scan.averaging", cfg.scan.averaging);
        set!(velocity_nodes, "scan.velocity_nodes", cfg.scan.velocity_nodes);
        set!(waveform, "link.waveform", cfg.link.waveform);
        set!(freq_hz, "link.freq_hz", cfg.link.freq_hz);
        set!(depth, "link.depth", cfg.link.depth);
        set!(low, "link.low", cfg.link.low);
        set!(high, "link.high", cfg.link.high);
        set!(duration_s, "link.duration_s", cfg.link.duration_s);
        set!(sampling_rate_hz, "link.sampling_rate_hz", cfg.link.sampling_rate_hz);
        set!(noise_rms, "link.noise_rms", cfg.link.noise_rms);
        set!(fm_deviation_mhz, "link.fm_deviation_mhz", cfg.link.fm_deviation_mhz);
        if let Some(h) = self.half_span_mhz {
            cfg.scan.half_span_mhz = Some(h);
            prov.mark_override("scan.half_span_mhz");
        }
        // A carrier given on the command line replaces either form from the file.
        if let Some(e) = self.carrier_field_v_per_m {
            cfg.link.carrier_field_v_per_m = Some(e);
            cfg.link.carrier_rabi_mhz = None;
            prov.mark_override("link.carrier_field_v_per_m");
        }
        if let Some(r) = self.carrier_rabi_mhz {
            cfg.link.carrier_rabi_mhz = Some(r);
            cfg.link.carrier_field_v_per_m = None;
            prov.mark_override("link.carrier_rabi_mhz");
        }
        if let Some(p) = &self.baseband_file {
            let abs = if p.is_absolute() { p.clone() } else { std::env::current_dir()?.join(p) };
            cfg.link.file = Some(abs);
            cfg.link.waveform = WaveformKind::File;
            prov.mark_override("link.file");
        }
        if let Some(s) = &self.sweep_mhz {
            cfg.calibrate.sweep_mhz = parse_sweep(s)?;
            prov.mark_override("calibrate.sweep_mhz");
        }
        Ok(())
    }
}

/// Loads the config file, applies overrides and validates. Returns the
/// directory that relative paths in the file resolve against.
pub fn resolve_config(args: &CommonArgs) -> Result<(RunConfig, PathBuf), CliError> {
    let (mut cfg, mut prov, base) = match &args.config {
        Some(path) => {
            let (cfg, prov) = RunConfig::load(path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, prov, base)
        }
        None => (RunConfig::default(), Provenance::default(), PathBuf::from(".")),
    };
    args.overrides.apply(&mut cfg, &mut prov)?;
    if let Some(seed) = args.seed {
        cfg.link.seed = seed;
        prov.mark_override("link.seed");
    }
    cfg.validate(&prov)?;
    Ok((cfg, base))
}

/// Text printed to standard output, and the files written.
pub struct RunOutput {
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

fn emit(
    args: &CommonArgs,
    stem: &str,
    csv: impl FnOnce() -> String,
    json: impl FnOnce() -> String,
) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    if args.format.csv() {
        files.push(write_file(&args.out, &format!("{stem}.csv"), &csv())?);
    }
    if args.format.json() {
        files.push(write_file(&args.out, &format!("{stem}.json"), &json())?);
    }
    Ok(files)
}

pub fn execute(cli: &Cli) -> Result<RunOutput, CliError> {
    match &cli.command {
        Command::Spectrum(args) => {
            let (cfg, _) = resolve_config(args)?;
            let doc = commands::spectrum(&cfg)?;
            let files = emit(args, "spectrum", || commands::spectrum_csv(&doc), || render_json(&doc))?;
            Ok(RunOutput { stdout: commands::spectrum_text(&doc), files })
        }
        Command::Am(args) | Command::Fm(args) => {
            let (mode, stem) = match cli.command {
                Command::Am(_) => (LinkMode::Am, "am_link"),
                _ => (LinkMode::Fm, "fm_link"),
            };
            let (cfg, base) = resolve_config(args)?;
            let doc = commands::link(&cfg, mode, &base)?;
            let files = emit(args, stem, || commands::link_csv(&doc), || render_json(&doc))?;
            Ok(RunOutput { stdout: commands::link_text(&doc), files })
        }
        Command::Calibrate(args) => {
            let (cfg, _) = resolve_config(args)?;
            let doc = commands::calibrate(&cfg)?;
            let files = emit(args, "calibration", || commands::sweep_csv(&doc), || render_json(&doc))?;
            Ok(RunOutput { stdout: commands::sweep_text(&doc), files })
        }
        Command::DopplerCheck(args) => {
            let (cfg, _) = resolve_config(args)?;
            let report = checks::doppler_check(&cfg)?;
            let json = render_json(&report);
            let files = vec![write_file(&args.out, "doppler_check.json", &json)?];
            if !report.passed {
                eprint!("{json}");
                let failed = report.checks.iter().filter(|c| !c.passed).count();
                return Err(CliError::ChecksFailed { failed, total: report.checks.len() });
            }
            Ok(RunOutput { stdout: json, files })
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
