//! Runs the `rydberg-rx` binary the way a user would.

use std::path::Path;
use std::process::{Command, Output};

use rydberg_rx_cli::schema::{check_json_version, parse_csv, DopplerReport, LinkDoc, SpectrumDoc, SweepDoc};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydberg-rx"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    let text = std::fs::read_to_string(path).unwrap();
    check_json_version(&text).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn symmetric_spectrum_at_zero_detuning() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--mw-rabi-mhz", "40", "--mw-detuning-mhz", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: SpectrumDoc = read_json(&dir.path().join("spectrum.json"));
    assert!(doc.summary.asymmetry.unwrap().abs() < 0.02);
    assert!(stdout(&o).contains("asymmetry F"));
    let csv = parse_csv(&std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap()).unwrap();
    assert_eq!(csv.kind, "spectrum");
    assert_eq!(csv.rows.len(), 401);
    assert_eq!(csv.config().unwrap().drive.mw_rabi_mhz, 40.0);
    assert_eq!(csv.column("signal").unwrap()[17], Some(doc.signal[17]));
}

#[test]
fn positive_detuning_tilts_the_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--mw-rabi-mhz", "40", "--mw-detuning-mhz", "40", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: SpectrumDoc = read_json(&dir.path().join("spectrum.json"));
    assert!(doc.summary.asymmetry.unwrap() < 0.0);
    assert!(!dir.path().join("spectrum.csv").exists());
}

#[test]
fn microwave_off_is_reported_as_unresolved() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--mw-rabi-mhz", "0", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("unresolved splitting"));
    assert!(dir.path().join("spectrum.csv").exists());
}

#[test]
fn zero_duration_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["am", "--duration-s", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duration_s"));
}

#[test]
fn config_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[drive]\nmw_rabi_mhz = 40\n\n[link]\nsampling_rate_hz = -5\n").unwrap();
    let o = run(dir.path(), &["am", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.toml line 5"), "{}", stderr(&o));

    std::fs::write(&cfg, "[scan]\npoints = \"many\"\n").unwrap();
    let o = run(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["calibrate", "--sweep-mhz", ""]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn calibration_sweep_flags_unresolved_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["calibrate", "--sweep-mhz", "5,30,45,60"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: SweepDoc = read_json(&dir.path().join("calibration.json"));
    assert!(!doc.rows[0].resolved);
    assert!(doc.rows[1..].iter().all(|r| r.resolved));
    let fit = doc.fit.unwrap();
    assert_eq!(fit.points, 3);
    assert!((fit.slope - 1.0).abs() < 0.05);
}

#[test]
fn am_link_from_a_baseband_file() {
    let dir = tempfile::tempdir().unwrap();
    let wave = dir.path().join("steps.csv");
    std::fs::write(&wave, "t_s,value\n0,1.0\n0.1,1.3\n0.2,0.7\n0.3,1.0\n").unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[link]\nwaveform = \"file\"\nfile = \"steps.csv\"\ninterpolation = \"hold\"\nduration_s = 0.4\nsampling_rate_hz = 20\n",
    )
    .unwrap();
    let o = run(dir.path(), &["am", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: LinkDoc = read_json(&dir.path().join("am_link.json"));
    assert_eq!(doc.t_s.len(), 8);
    assert_eq!(doc.transmitted[2], 1.3);
    assert!(doc.fidelity > 0.95, "{}", doc.fidelity);
    assert!(stdout(&o).contains("k_AM"));
}

#[test]
fn fm_link_reports_in_hertz() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["fm", "--duration-s", "0.5", "--sampling-rate-hz", "8", "--format", "both"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: LinkDoc = read_json(&dir.path().join("fm_link.json"));
    assert_eq!(doc.transmitted_unit, "hz");
    assert!((doc.transmitted[0] + 40e6).abs() < 1.0);
    assert!((doc.calibration.rabi_ref_hz / 60e6 - 1.0).abs() < 0.01);
    let csv = parse_csv(&std::fs::read_to_string(dir.path().join("fm_link.csv")).unwrap()).unwrap();
    assert_eq!(csv.columns, ["t_s", "transmitted", "received", "deviation"]);
}

#[test]
fn degenerate_grid_fails_the_doppler_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["doppler-check", "--averaging", "uniform", "--velocity-nodes", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let report: DopplerReport = read_json(&dir.path().join("doppler_check.json"));
    assert!(!report.passed);
    let conv = report.checks.iter().find(|c| c.name == "grid_convergence").unwrap();
    assert!(!conv.passed);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["am", "--duration-s", "0.3", "--sampling-rate-hz", "10", "--noise-rms", "0.02", "--seed", "11"];
    for dir in [&a, &b] {
        assert!(run(dir.path(), &args).status.success());
    }
    for name in ["am_link.csv", "am_link.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}
