//! Self-checks of the velocity averaging: quadrature convergence, mirror
//! symmetry in the microwave detuning, and the scaling of the splitting
//! between coupler and probe scans.

use rydberg_rx::analysis::{at_splitting, find_absorption_lines, find_at_peaks, AtPeaks};
use rydberg_rx::doppler::{compute_spectrum, default_axis, make_velocity_grid, thermal_sigma, Averaging, ScanMode};
use rydberg_rx::ladder::{DriveState, LadderConfig};
use rydberg_rx::units::{mhz_to_rad, wavenumber};

use crate::config::{AveragingKind, RunConfig};
use crate::schema::{CheckOutcome, DopplerReport, SCHEMA_VERSION};
use crate::commands::fit_line;

pub const CONVERGENCE_TOL: f64 = 1e-3;
pub const MIRROR_TOL: f64 = 1e-6;
pub const DOPPLER_FREE_TOL: f64 = 0.01;
pub const THERMAL_TOL: f64 = 0.05;

/// Microwave Rabi frequency used when the config leaves it at zero.
pub const CHECK_RABI_MHZ: f64 = 40.0;
/// Rabi frequencies of the splitting sweep. Below ~20 MHz the coupler
/// light shift visibly pulls the stationary probe-scan lines apart.
pub const SWEEP_MHZ: [f64; 5] = [20.0, 30.0, 40.0, 50.0, 60.0];
/// Nodes of the uniform grid that cross-checks the closed-form average.
pub const REFERENCE_NODES: usize = 2001;
const CHECK_POINTS: usize = 101;
const SWEEP_POINTS: usize = 401;

/// How the thermal spread compares with the line structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopplerRegime {
    /// Probe Doppler width well below the natural width.
    Free,
    /// Doppler width larger than every splitting in the sweep.
    Thermal,
    Intermediate,
}

pub fn regime(ladder: &LadderConfig) -> DopplerRegime {
    let width = wavenumber(ladder.lambda_p) * thermal_sigma(ladder);
    let widest = mhz_to_rad(SWEEP_MHZ[SWEEP_MHZ.len() - 1]);
    if width < 0.1 * ladder.gamma_e {
        DopplerRegime::Free
    } else if width > 2.0 * widest {
        DopplerRegime::Thermal
    } else {
        DopplerRegime::Intermediate
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = max_abs(b);
    let gap = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if gap == 0.0 {
        0.0
    } else if scale > 0.0 {
        gap / scale
    } else {
        f64::INFINITY
    }
}

fn check_drive(cfg: &RunConfig) -> DriveState {
    let mut d = cfg.drive();
    if d.omega_mw == 0.0 {
        d.omega_mw = mhz_to_rad(CHECK_RABI_MHZ);
    }
    d
}

/// Configured averaging against a refined one: twice the nodes for a grid,
/// a fine uniform grid for the closed form.
pub fn grid_convergence(cfg: &RunConfig) -> rydberg_rx::Result<CheckOutcome> {
    let ladder = cfg.ladder();
    let mode = cfg.scan_mode();
    let drive = check_drive(cfg);
    let axis = default_axis(&drive, mode, &ladder, CHECK_POINTS);
    let (coarse, fine, what) = match cfg.scan.averaging {
        AveragingKind::Exact => (
            Averaging::Exact,
            Averaging::Grid(make_velocity_grid(&ladder, REFERENCE_NODES, cfg.scan.velocity_span_sigmas)?),
            format!("closed form vs {REFERENCE_NODES}-node uniform grid"),
        ),
        _ => {
            let n = cfg.scan.velocity_nodes;
            (
                Averaging::Grid(cfg.velocity_grid(n)?),
                Averaging::Grid(cfg.velocity_grid(2 * n)?),
                format!("{n} vs {} velocity nodes", 2 * n),
            )
        }
    };
    let a = compute_spectrum(&drive, mode, &axis, &coarse, &ladder)?;
    let b = compute_spectrum(&drive, mode, &axis, &fine, &ladder)?;
    let value = relative_gap(&a.signal, &b.signal);
    Ok(CheckOutcome {
        name: "grid_convergence".into(),
        passed: value < CONVERGENCE_TOL,
        value: Some(value).filter(|v| v.is_finite()),
        tolerance: CONVERGENCE_TOL,
        detail: format!("{what}; max difference relative to the peak signal"),
    })
}

/// Spectra at `δ = ±Ω` must be reflections of each other.
pub fn mirror_symmetry(cfg: &RunConfig) -> rydberg_rx::Result<CheckOutcome> {
    let ladder = cfg.ladder();
    let mode = cfg.scan_mode();
    let om = check_drive(cfg).omega_mw;
    let base = DriveState { delta_p: 0.0, delta_c: 0.0, delta_mw: om, ..check_drive(cfg) };
    let axis = default_axis(&base, mode, &ladder, CHECK_POINTS);
    let averaging = cfg.averaging()?;
    let plus = compute_spectrum(&base, mode, &axis, &averaging, &ladder)?;
    let minus = compute_spectrum(&DriveState { delta_mw: -om, ..base }, mode, &axis, &averaging, &ladder)?;
    let reflected: Vec<f64> = minus.signal.iter().rev().copied().collect();
    let value = relative_gap(&plus.signal, &reflected);
    Ok(CheckOutcome {
        name: "mirror_symmetry".into(),
        passed: value < MIRROR_TOL,
        value: Some(value).filter(|v| v.is_finite()),
        tolerance: MIRROR_TOL,
        detail: "spectrum at +delta against the reflected spectrum at -delta".into(),
    })
}

/// Splittings from a sweep of the microwave Rabi frequency, Hz, with the
/// line-fit slope against Ω/2π.
pub struct SweepSlope {
    pub splittings: Vec<Option<f64>>,
    pub slope: Option<f64>,
}

pub fn splitting_sweep(
    ladder: &LadderConfig,
    base: &DriveState,
    mode: ScanMode,
    averaging: &Averaging,
    locate: fn(&rydberg_rx::doppler::Spectrum) -> rydberg_rx::Result<AtPeaks>,
) -> rydberg_rx::Result<SweepSlope> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut splittings = Vec::new();
    for om in SWEEP_MHZ {
        let drive = DriveState { omega_mw: mhz_to_rad(om), ..*base };
        let axis = default_axis(&drive, mode, ladder, SWEEP_POINTS);
        let spec = compute_spectrum(&drive, mode, &axis, averaging, ladder)?;
        let f = locate(&spec).ok().map(|p| at_splitting(&p));
        if let Some(f) = f {
            x.push(om * 1e6);
            y.push(f);
        }
        splittings.push(f);
    }
    let slope = if x.len() >= 3 { fit_line(&x, &y).map(|f| f.slope) } else { None };
    Ok(SweepSlope { splittings, slope })
}

/// Weakest probe used for stationary atoms; a strong probe dresses the
/// intermediate level and splits each line into a multiplet.
fn weak_probe(ladder: &LadderConfig) -> f64 {
    0.2 * ladder.gamma_e
}

pub fn splitting_scaling(cfg: &RunConfig) -> rydberg_rx::Result<Vec<CheckOutcome>> {
    let ladder = cfg.ladder();
    let averaging = cfg.averaging()?;
    let mut base = DriveState { delta_p: 0.0, delta_c: 0.0, delta_mw: 0.0, ..cfg.drive() };
    let reg = regime(&ladder);
    if reg == DopplerRegime::Intermediate {
        let skipped = |name: &str| CheckOutcome {
            name: name.into(),
            passed: true,
            value: None,
            tolerance: 0.0,
            detail: "skipped: Doppler width between the stationary and thermal limits".into(),
        };
        return Ok(vec![skipped("coupler_splitting_slope"), skipped("probe_splitting_slope")]);
    }
    let probe_locator: fn(&rydberg_rx::doppler::Spectrum) -> rydberg_rx::Result<AtPeaks> = match reg {
        DopplerRegime::Free => {
            base.omega_p = base.omega_p.min(weak_probe(&ladder));
            find_absorption_lines
        }
        _ => find_at_peaks,
    };
    let coupler = splitting_sweep(&ladder, &base, ScanMode::Coupler, &averaging, find_at_peaks)?;
    let probe = splitting_sweep(&ladder, &base, ScanMode::Probe, &averaging, probe_locator)?;
    let (tol, expected_probe) = match reg {
        DopplerRegime::Free => (DOPPLER_FREE_TOL, coupler.slope.unwrap_or(f64::NAN)),
        _ => (THERMAL_TOL, ScanMode::Probe.axis_scale(&ladder)),
    };
    let outcome = |name: &str, slope: Option<f64>, expected: f64, what: &str| {
        let value = match slope {
            Some(s) if expected.is_finite() => Some((s / expected - 1.0).abs()),
            _ => None,
        };
        CheckOutcome {
            name: name.into(),
            passed: value.is_some_and(|v| v <= tol),
            value,
            tolerance: tol,
            detail: match slope {
                Some(s) => format!("slope {s:.6} against {what} {expected:.6}"),
                None => "fewer than three resolved splittings".into(),
            },
        }
    };
    let regime_note = match reg {
        DopplerRegime::Free => "the coupler-scan slope",
        _ => "lambda_c/lambda_p",
    };
    Ok(vec![
        outcome("coupler_splitting_slope", coupler.slope, 1.0, "unity"),
        outcome("probe_splitting_slope", probe.slope, expected_probe, regime_note),
    ])
}

pub fn doppler_check(cfg: &RunConfig) -> rydberg_rx::Result<DopplerReport> {
    let mut checks = vec![grid_convergence(cfg)?, mirror_symmetry(cfg)?];
    checks.extend(splitting_scaling(cfg)?);
    Ok(DopplerReport {
        schema_version: SCHEMA_VERSION,
        kind: "doppler_check".into(),
        config: cfg.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_of_room_temperature_and_cold_vapour() {
        let mut c = LadderConfig::default();
        assert_eq!(regime(&c), DopplerRegime::Thermal);
        c.temperature = 1e-3;
        assert_eq!(regime(&c), DopplerRegime::Free);
        c.temperature = 1.0;
        assert_eq!(regime(&c), DopplerRegime::Intermediate);
    }

    #[test]
    fn relative_gap_edge_cases() {
        assert_eq!(relative_gap(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(relative_gap(&[1.0], &[0.0]), f64::INFINITY);
        assert!((relative_gap(&[1.0, 2.0], &[1.0, 2.002]) - 0.001 / 1.001).abs() < 1e-12);
    }
}
