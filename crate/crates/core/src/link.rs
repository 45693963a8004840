//! End-to-end receiver loop: transmit, drive the atoms, record a spectrum per
//! sample, demodulate, and score the recovered waveform.
//!
//! Each sample is quasi-static: the drive is frozen while its spectrum is
//! computed. Samples are independent once the link is calibrated, so they
//! run in parallel; detector noise is drawn from a stream indexed by the
//! sample number, which keeps results identical regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    asymmetry, at_splitting, detuning_from_asymmetry, field_from_splitting, find_at_peaks, modulation_index,
    rabi_from_field, AtPeaks, PeakWarning, RetrievalConstants,
};
use crate::doppler::{compute_spectrum, symmetric_axis, Averaging, ScanMode, Spectrum, SpectrumWarning};
use crate::error::{Error, Result};
use crate::ladder::{DriveState, LadderConfig};
use crate::modulation::{am_envelope, fm_detuning, sample_times, AmSignal, Baseband, FmSignal, SamplingWarning};

/// Fraction of samples allowed to fail before the whole link is rejected.
pub const FAILURE_BUDGET: f64 = 0.10;
/// FM signals must stay within this fraction of the reference Rabi
/// frequency, where the asymmetry is still far from saturation.
pub const FM_DETUNING_GUARD: f64 = 0.9;
/// Sampling faster than this multiple of the baseband bandwidth counts as
/// quasi-static.
pub const QUASI_STATIC_FACTOR: f64 = 10.0;

/// Scan axis and velocity averaging used for every spectrum of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    pub mode: ScanMode,
    pub points: usize,
    /// Half-width of the axis in units of the carrier Rabi frequency
    /// (coupler-scan units; probe scans are scaled by λc/λp).
    pub span_factor: f64,
    pub averaging: Averaging,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { mode: ScanMode::Coupler, points: 401, span_factor: 2.5, averaging: Averaging::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "modulation", rename_all = "snake_case")]
pub enum LinkSignal {
    Am(AmSignal),
    Fm(FmSignal),
}

impl LinkSignal {
    pub fn baseband(&self) -> &Baseband {
        match self {
            LinkSignal::Am(s) => &s.baseband,
            LinkSignal::Fm(s) => &s.baseband,
        }
    }

    pub fn e_carrier(&self) -> f64 {
        match self {
            LinkSignal::Am(s) => s.e_carrier,
            LinkSignal::Fm(s) => s.e_carrier,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub ladder: LadderConfig,
    /// Probe and coupler settings; the microwave fields are overwritten.
    pub drive_base: DriveState,
    pub scan: ScanSettings,
    /// Spectra per second, Hz.
    pub sampling_rate: f64,
    pub signal: LinkSignal,
    /// Additive white detector noise, as a fraction of the tallest line in
    /// the noiseless calibration spectrum.
    pub noise_rms: f64,
    pub rng_seed: u64,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.ladder.validate()?;
        self.drive_base.validate()?;
        if !(self.sampling_rate.is_finite() && self.sampling_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("sampling rate must be > 0, got {}", self.sampling_rate)));
        }
        if !(self.noise_rms.is_finite() && self.noise_rms >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise_rms must be >= 0, got {}", self.noise_rms)));
        }
        if self.scan.points < 5 {
            return Err(Error::InvalidConfig("scan needs at least 5 points".into()));
        }
        if !(self.scan.span_factor.is_finite() && self.scan.span_factor > 0.0) {
            return Err(Error::InvalidConfig("scan span factor must be > 0".into()));
        }
        self.signal.baseband().validate()
    }

    /// Rabi frequency of the unmodulated carrier, rad/s.
    pub fn carrier_rabi(&self) -> f64 {
        self.ladder.dipole_mw * self.signal.e_carrier() / crate::units::HBAR
    }

    /// Axis shared by every spectrum of the link.
    pub fn axis(&self) -> Vec<f64> {
        let half = self.scan.span_factor * self.carrier_rabi() * self.scan.mode.axis_scale(&self.ladder);
        symmetric_axis(half, self.scan.points)
    }
}

/// Link calibration from one unmodulated spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Carrier field recovered from the splitting, V/m.
    pub e_carrier: f64,
    /// Modulation-free Rabi frequency, `2π·f_AT`, rad/s.
    pub rabi_ref: f64,
    /// Modulation-free splitting, Hz.
    pub f_at: f64,
    /// Tallest line height of the noiseless calibration spectrum; the unit
    /// of `noise_rms`.
    pub peak_signal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub time: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkWarning {
    /// Sampling is not much faster than the baseband, so the quasi-static
    /// picture is questionable.
    NotQuasiStatic { rate_hz: f64, bandwidth_hz: f64 },
    Sampling(SamplingWarning),
    Spectrum { index: usize, warning: SpectrumWarning },
    Peaks { index: usize, warning: PeakWarning },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Am,
    Fm,
}

/// Transmitted versus received baseband.
///
/// AM series are the dimensionless modulation function m(t); FM series are
/// detunings in rad/s. Failed samples have no received value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    pub kind: LinkKind,
    pub times: Vec<f64>,
    pub transmitted: Vec<f64>,
    pub received: Vec<Option<f64>>,
    pub deviation: Vec<Option<f64>>,
    pub normalizer: f64,
    pub mean_deviation: f64,
    pub fidelity: f64,
    pub calibration: Calibration,
    pub failures: Vec<SampleFailure>,
    pub warnings: Vec<LinkWarning>,
}

impl LinkResult {
    /// `(max − min)/(max + min)` of the received AM waveform.
    pub fn recovered_modulation_index(&self) -> Result<f64> {
        let rx: Vec<f64> = self.received.iter().flatten().copied().collect();
        if rx.is_empty() {
            return Err(Error::Domain("no received samples".into()));
        }
        let hi = rx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = rx.iter().copied().fold(f64::INFINITY, f64::min);
        modulation_index(hi, lo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationMetrics {
    pub per_sample: Vec<f64>,
    pub mean: f64,
    /// `1 − mean`, clamped at 0.
    pub fidelity: f64,
}

/// `|tx − rx| / normalizer` per sample, its mean, and the fidelity.
pub fn deviation_metrics(transmitted: &[f64], received: &[f64], normalizer: f64) -> Result<DeviationMetrics> {
    if transmitted.len() != received.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} transmitted vs {} received",
            transmitted.len(),
            received.len()
        )));
    }
    if transmitted.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(Error::Domain(format!("normalizer must be > 0, got {normalizer}")));
    }
    let per_sample: Vec<f64> = transmitted
        .iter()
        .zip(received)
        .map(|(t, r)| (t - r).abs() / normalizer)
        .collect();
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(DeviationMetrics { per_sample, mean, fidelity: (1.0 - mean).max(0.0) })
}

/// Stream 0 is the calibration spectrum; sample `k` uses stream `k + 1`.
fn add_noise(spec: &mut Spectrum, sigma: f64, seed: u64, stream: u64) {
    if sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for s in spec.signal.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *s += sigma * z;
    }
}

fn spectrum_at(cfg: &LinkConfig, omega_mw: f64, delta_mw: f64, axis: &[f64]) -> Result<Spectrum> {
    let drive = DriveState { omega_mw, delta_mw, ..cfg.drive_base };
    compute_spectrum(&drive, cfg.scan.mode, axis, &cfg.scan.averaging, &cfg.ladder)
}

/// Splitting in Hz, converted back to coupler-scan units for probe scans.
fn splitting(peaks: &AtPeaks, cfg: &LinkConfig) -> f64 {
    at_splitting(peaks) / cfg.scan.mode.axis_scale(&cfg.ladder)
}

/// Records the unmodulated carrier and derives `E_c` and the reference
/// Rabi frequency from its splitting.
pub fn calibrate(cfg: &LinkConfig) -> Result<Calibration> {
    cfg.validate()?;
    let axis = cfg.axis();
    let mut spec = spectrum_at(cfg, cfg.carrier_rabi(), 0.0, &axis)?;
    let clean = find_at_peaks(&spec)?;
    let peak_signal = clean.h_plus.max(clean.h_minus);
    let peaks = if cfg.noise_rms > 0.0 {
        add_noise(&mut spec, cfg.noise_rms * peak_signal, cfg.rng_seed, 0);
        find_at_peaks(&spec)?
    } else {
        clean
    };
    let f_at = splitting(&peaks, cfg);
    let consts = RetrievalConstants::from_config(&cfg.ladder, 0.0)?;
    Ok(Calibration {
        e_carrier: field_from_splitting(f_at, &consts)?,
        rabi_ref: 2.0 * std::f64::consts::PI * f_at,
        f_at,
        peak_signal,
    })
}

struct Sample {
    received: Result<f64>,
    warnings: Vec<LinkWarning>,
}

fn measure(
    cfg: &LinkConfig,
    cal: &Calibration,
    axis: &[f64],
    index: usize,
    omega_mw: f64,
    delta_mw: f64,
    demodulate: impl Fn(&AtPeaks) -> Result<f64>,
) -> Sample {
    let mut warnings = Vec::new();
    let received = spectrum_at(cfg, omega_mw, delta_mw, axis).and_then(|mut spec| {
        add_noise(&mut spec, cfg.noise_rms * cal.peak_signal, cfg.rng_seed, index as u64 + 1);
        warnings.extend(spec.warnings.iter().cloned().map(|warning| LinkWarning::Spectrum { index, warning }));
        let peaks = find_at_peaks(&spec)?;
        warnings.extend(peaks.warnings.iter().cloned().map(|warning| LinkWarning::Peaks { index, warning }));
        demodulate(&peaks)
    });
    Sample { received, warnings }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    kind: LinkKind,
    cal: Calibration,
    times: Vec<f64>,
    transmitted: Vec<f64>,
    samples: Vec<Sample>,
    normalizer: f64,
    mut warnings: Vec<LinkWarning>,
) -> Result<LinkResult> {
    let mut failures = Vec::new();
    let mut received = Vec::with_capacity(samples.len());
    for (index, s) in samples.into_iter().enumerate() {
        warnings.extend(s.warnings);
        match s.received {
            Ok(v) => received.push(Some(v)),
            Err(e) => {
                failures.push(SampleFailure { index, time: times[index], message: e.to_string() });
                received.push(None);
            }
        }
    }
    let total = times.len();
    if failures.len() as f64 > FAILURE_BUDGET * total as f64 || failures.len() == total {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            budget_pct: 100.0 * FAILURE_BUDGET,
            first: failures.first().map(|f| format!("t = {} s: {}", f.time, f.message)).unwrap_or_default(),
        });
    }
    let ok: Vec<usize> = (0..total).filter(|&i| received[i].is_some()).collect();
    let tx: Vec<f64> = ok.iter().map(|&i| transmitted[i]).collect();
    let rx: Vec<f64> = ok.iter().map(|&i| received[i].unwrap_or(f64::NAN)).collect();
    let metrics = deviation_metrics(&tx, &rx, normalizer)?;
    let mut deviation = vec![None; total];
    for (k, &i) in ok.iter().enumerate() {
        deviation[i] = Some(metrics.per_sample[k]);
    }
    Ok(LinkResult {
        kind,
        times,
        transmitted,
        received,
        deviation,
        normalizer,
        mean_deviation: metrics.mean,
        fidelity: metrics.fidelity,
        calibration: cal,
        failures,
        warnings,
    })
}

fn timing_warnings(cfg: &LinkConfig) -> Result<(Vec<f64>, Vec<LinkWarning>)> {
    let baseband = cfg.signal.baseband();
    let (times, sampling) = sample_times(baseband, cfg.sampling_rate)?;
    let mut warnings: Vec<LinkWarning> = sampling.into_iter().map(LinkWarning::Sampling).collect();
    let bw = baseband.bandwidth_estimate();
    if cfg.sampling_rate < QUASI_STATIC_FACTOR * bw {
        warnings.push(LinkWarning::NotQuasiStatic { rate_hz: cfg.sampling_rate, bandwidth_hz: bw });
    }
    Ok((times, warnings))
}

/// AM link. The received signal is `m_rec = E_rec/E_c`, with `E_rec` from
/// the splitting of each sample's spectrum; deviations are normalised by
/// the mean transmitted m.
pub fn run_am_link(cfg: &LinkConfig) -> Result<LinkResult> {
    let LinkSignal::Am(sig) = &cfg.signal else {
        return Err(Error::InvalidSignal("AM link needs an AM signal".into()));
    };
    let cal = calibrate(cfg)?;
    let (times, warnings) = timing_warnings(cfg)?;
    let consts = RetrievalConstants::from_config(&cfg.ladder, cal.rabi_ref)?;
    let axis = cfg.axis();
    let transmitted: Vec<f64> = times.iter().map(|&t| sig.baseband.value(t)).collect();
    let samples: Vec<Sample> = times
        .par_iter()
        .enumerate()
        .map(|(index, &t)| {
            let omega = match am_envelope(sig, t).and_then(|e| rabi_from_field(e, &consts)) {
                Ok(o) => o,
                Err(e) => return Sample { received: Err(e), warnings: vec![] },
            };
            measure(cfg, &cal, &axis, index, omega, 0.0, |p| {
                Ok(field_from_splitting(splitting(p, cfg), &consts)? / cal.e_carrier)
            })
        })
        .collect();
    let normalizer = transmitted.iter().sum::<f64>() / transmitted.len() as f64;
    assemble(LinkKind::Am, cal, times, transmitted, samples, normalizer, warnings)
}

/// FM link. The received detuning follows from the line asymmetry of each
/// sample's spectrum; deviations are normalised by the peak transmitted
/// |δω| (or by the reference Rabi frequency for an unmodulated carrier).
pub fn run_fm_link(cfg: &LinkConfig) -> Result<LinkResult> {
    let LinkSignal::Fm(sig) = &cfg.signal else {
        return Err(Error::InvalidSignal("FM link needs an FM signal".into()));
    };
    let cal = calibrate(cfg)?;
    if sig.peak_detuning() > FM_DETUNING_GUARD * cal.rabi_ref {
        return Err(Error::InvalidSignal(format!(
            "peak detuning {:.4e} rad/s exceeds {FM_DETUNING_GUARD} × reference Rabi frequency {:.4e} rad/s",
            sig.peak_detuning(),
            cal.rabi_ref
        )));
    }
    let (times, warnings) = timing_warnings(cfg)?;
    let consts = RetrievalConstants::from_config(&cfg.ladder, cal.rabi_ref)?;
    let axis = cfg.axis();
    let omega = cfg.carrier_rabi();
    let transmitted: Vec<f64> = times.iter().map(|&t| sig.amplitude * sig.baseband.value(t)).collect();
    let samples: Vec<Sample> = times
        .par_iter()
        .enumerate()
        .map(|(index, &t)| {
            let delta = match fm_detuning(sig, t) {
                Ok(d) => d,
                Err(e) => return Sample { received: Err(e), warnings: vec![] },
            };
            measure(cfg, &cal, &axis, index, omega, delta, |p| detuning_from_asymmetry(asymmetry(p)?, &consts))
        })
        .collect();
    let peak = transmitted.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let normalizer = if peak > 0.0 { peak } else { cal.rabi_ref };
    assemble(LinkKind::Fm, cal, times, transmitted, samples, normalizer, warnings)
}

/// Delay between each jump of `baseband` and the first sample whose
/// received value has crossed halfway to the new level, s. Infinite if the
/// receiver never follows.
pub fn step_lags(result: &LinkResult, baseband: &Baseband) -> Vec<f64> {
    let last = result.times.last().copied().unwrap_or(0.0);
    baseband
        .edges()
        .into_iter()
        .filter(|&te| te <= last)
        .map(|te| {
            let before = baseband.value(te - 1e-9 * baseband.duration);
            let after = baseband.value(te);
            let mid = 0.5 * (before + after);
            let rising = after > before;
            result
                .times
                .iter()
                .zip(&result.received)
                .filter(|(t, _)| **t >= te)
                .find(|(_, r)| match r {
                    Some(r) => if rising { *r >= mid } else { *r <= mid },
                    None => false,
                })
                .map(|(t, _)| t - te)
                .unwrap_or(f64::INFINITY)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::Waveform;
    use crate::units::mhz_to_rad;

    fn am_cfg(depth: f64, rate: f64, duration: f64) -> LinkConfig {
        LinkConfig {
            ladder: LadderConfig::default(),
            drive_base: DriveState::default(),
            scan: ScanSettings { points: 201, ..ScanSettings::default() },
            sampling_rate: rate,
            signal: LinkSignal::Am(AmSignal::new(16.98e9, 2.25, Baseband::am_sinusoid(1.0, depth, duration).unwrap()).unwrap()),
            noise_rms: 0.0,
            rng_seed: 7,
        }
    }

    #[test]
    fn deviation_metric_arithmetic() {
        let tx = [1.0, 2.0, 3.0];
        let m = deviation_metrics(&tx, &tx, 2.0).unwrap();
        assert_eq!(m.fidelity, 1.0);
        let rx: Vec<f64> = tx.iter().map(|t| t + 0.05 * 2.0).collect();
        let m = deviation_metrics(&tx, &rx, 2.0).unwrap();
        assert!((m.fidelity - 0.95).abs() < 1e-12);
        assert!(deviation_metrics(&tx, &rx[..2], 2.0).is_err());
        assert!(deviation_metrics(&tx, &tx, 0.0).is_err());
        let far = deviation_metrics(&[0.0], &[10.0], 1.0).unwrap();
        assert_eq!(far.fidelity, 0.0);
    }

    #[test]
    fn calibration_recovers_carrier_field() {
        let cfg = am_cfg(0.0, 10.0, 0.1);
        let cal = calibrate(&cfg).unwrap();
        assert!((cal.e_carrier / 2.25 - 1.0).abs() < 0.05, "{cal:?}");
        let mut twice = cfg.clone();
        if let LinkSignal::Am(s) = &mut twice.signal {
            s.e_carrier = 4.5;
        }
        let cal2 = calibrate(&twice).unwrap();
        assert!((cal2.e_carrier / cal.e_carrier / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn unmodulated_am_is_perfect() {
        let r = run_am_link(&am_cfg(0.0, 10.0, 0.5)).unwrap();
        assert!(r.fidelity > 1.0 - 1e-3, "{}", r.fidelity);
        assert_eq!(r.times.len(), 5);
    }

    #[test]
    fn zero_fm_amplitude_reads_zero() {
        let mut cfg = am_cfg(0.0, 10.0, 0.3);
        cfg.signal = LinkSignal::Fm(FmSignal::sinusoid(16.98e9, 3.8, 0.0, 1.0, 0.3).unwrap());
        let r = run_fm_link(&cfg).unwrap();
        for rx in r.received.iter().flatten() {
            assert!(rx.abs() < 1e-6 * r.calibration.rabi_ref);
        }
    }

    #[test]
    fn fm_guard_rejects_oversized_detuning() {
        let mut cfg = am_cfg(0.0, 10.0, 0.3);
        cfg.signal = LinkSignal::Fm(FmSignal::sinusoid(16.98e9, 2.25, mhz_to_rad(40.0), 1.0, 0.3).unwrap());
        assert!(matches!(run_fm_link(&cfg), Err(Error::InvalidSignal(_))));
    }

    #[test]
    fn noise_is_seeded_per_sample() {
        let mut cfg = am_cfg(0.3, 10.0, 0.3);
        cfg.noise_rms = 0.02;
        let a = run_am_link(&cfg).unwrap();
        let b = run_am_link(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.rng_seed += 1;
        let c = run_am_link(&cfg).unwrap();
        assert_ne!(a.received, c.received);
    }

    #[test]
    fn undriven_carrier_fails_calibration() {
        let mut cfg = am_cfg(0.0, 10.0, 0.3);
        cfg.ladder.dipole_mw = 1e-40;
        assert!(matches!(calibrate(&cfg), Err(Error::Peaks(_))));
    }

    #[test]
    fn step_lag_of_ideal_receiver() {
        let b = Baseband::new(Waveform::Square { freq_hz: 1.0, duty: 0.5, low: 0.5, high: 1.5 }, 1.0).unwrap();
        let times: Vec<f64> = (0..20).map(|k| k as f64 / 20.0).collect();
        let tx: Vec<f64> = times.iter().map(|&t| b.value(t)).collect();
        let r = LinkResult {
            kind: LinkKind::Am,
            received: tx.iter().map(|&x| Some(x)).collect(),
            deviation: vec![Some(0.0); 20],
            times,
            transmitted: tx,
            normalizer: 1.0,
            mean_deviation: 0.0,
            fidelity: 1.0,
            calibration: Calibration { e_carrier: 1.0, rabi_ref: 1.0, f_at: 1.0, peak_signal: 1.0 },
            failures: vec![],
            warnings: vec![],
        };
        assert_eq!(step_lags(&r, &b), vec![0.0]);
    }
}
