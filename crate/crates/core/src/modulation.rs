//! Baseband waveforms and their mapping onto the microwave drive: the field
//! envelope for AM and the instantaneous carrier detuning for FM.
//!
//! The carrier itself is never synthesised. In the rotating frame only the
//! envelope `E_c·m(t)` or the detuning `δω(t)` reaches the atoms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    Hold,
}

/// Dimensionless waveform shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Waveform {
    /// `offset − depth·cos(2π·freq_hz·t + phase)`.
    Sinusoid { freq_hz: f64, depth: f64, phase: f64, offset: f64 },
    /// `high` for the first `duty` fraction of each period, `low` after.
    Square { freq_hz: f64, duty: f64, low: f64, high: f64 },
    /// Samples at `t_k = k / sample_rate`; the last value is held beyond
    /// the final sample.
    Arbitrary { samples: Vec<f64>, sample_rate: f64, interpolation: Interpolation },
}

/// A waveform over a finite duration, s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseband {
    pub waveform: Waveform,
    pub duration: f64,
}

/// Sample index for time `t`; nudged so that `t = k/rate` computed in
/// floating point lands on sample `k` rather than `k − 1`.
fn sample_index(t: f64, rate: f64) -> f64 {
    (t * rate * (1.0 + 4.0 * f64::EPSILON)).floor()
}

impl Baseband {
    pub fn new(waveform: Waveform, duration: f64) -> Result<Self> {
        let b = Self { waveform, duration };
        b.validate()?;
        Ok(b)
    }

    /// AM shorthand: `m(t) = 1 − depth·cos(2π·freq_hz·t)`.
    pub fn am_sinusoid(freq_hz: f64, depth: f64, duration: f64) -> Result<Self> {
        Self::new(Waveform::Sinusoid { freq_hz, depth, phase: 0.0, offset: 1.0 }, duration)
    }

    /// FM shorthand shape `−cos(2π·freq_hz·t)`, to be scaled by an amplitude.
    pub fn fm_sinusoid(freq_hz: f64, duration: f64) -> Result<Self> {
        Self::new(Waveform::Sinusoid { freq_hz, depth: 1.0, phase: 0.0, offset: 0.0 }, duration)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidSignal(format!("duration must be > 0, got {}", self.duration)));
        }
        match &self.waveform {
            Waveform::Sinusoid { freq_hz, depth, phase, offset } => {
                if !(freq_hz.is_finite() && *freq_hz > 0.0) {
                    return Err(Error::InvalidSignal(format!("frequency must be > 0, got {freq_hz}")));
                }
                if ![depth, phase, offset].iter().all(|x| x.is_finite()) {
                    return Err(Error::InvalidSignal("sinusoid parameters must be finite".into()));
                }
            }
            Waveform::Square { freq_hz, duty, low, high } => {
                if !(freq_hz.is_finite() && *freq_hz > 0.0) {
                    return Err(Error::InvalidSignal(format!("frequency must be > 0, got {freq_hz}")));
                }
                if !(*duty > 0.0 && *duty < 1.0) {
                    return Err(Error::InvalidSignal(format!("duty must lie in (0, 1), got {duty}")));
                }
                if !(low.is_finite() && high.is_finite()) {
                    return Err(Error::InvalidSignal("square levels must be finite".into()));
                }
            }
            Waveform::Arbitrary { samples, sample_rate, .. } => {
                if samples.is_empty() || samples.iter().any(|s| !s.is_finite()) {
                    return Err(Error::InvalidSignal("arbitrary waveform needs finite samples".into()));
                }
                if !(sample_rate.is_finite() && *sample_rate > 0.0) {
                    return Err(Error::InvalidSignal(format!("sample rate must be > 0, got {sample_rate}")));
                }
            }
        }
        Ok(())
    }

    /// Waveform value at `t`.
    pub fn value(&self, t: f64) -> f64 {
        match &self.waveform {
            Waveform::Sinusoid { freq_hz, depth, phase, offset } => offset - depth * (2.0 * PI * freq_hz * t + phase).cos(),
            Waveform::Square { freq_hz, duty, low, high } => {
                let cycles = t * freq_hz;
                let frac = cycles - sample_index(t, *freq_hz);
                if frac < *duty {
                    *high
                } else {
                    *low
                }
            }
            Waveform::Arbitrary { samples, sample_rate, interpolation } => {
                let last = samples.len() - 1;
                let k = sample_index(t, *sample_rate).max(0.0);
                if k as usize >= last {
                    return samples[last];
                }
                let k = k as usize;
                match interpolation {
                    Interpolation::Hold => samples[k],
                    Interpolation::Linear => {
                        let frac = (t * sample_rate - k as f64).clamp(0.0, 1.0);
                        samples[k] + frac * (samples[k + 1] - samples[k])
                    }
                }
            }
        }
    }

    /// Bounds on the waveform over its duration. Exact for squares and
    /// sampled waveforms; the full swing for sinusoids.
    pub fn range(&self) -> (f64, f64) {
        match &self.waveform {
            Waveform::Sinusoid { depth, offset, .. } => (offset - depth.abs(), offset + depth.abs()),
            Waveform::Square { low, high, .. } => (low.min(*high), low.max(*high)),
            Waveform::Arbitrary { samples, .. } => samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s))),
        }
    }

    /// Highest frequency the waveform is expected to carry, Hz. Periodic
    /// shapes report their repetition frequency; sampled waveforms their
    /// native Nyquist frequency.
    pub fn bandwidth_estimate(&self) -> f64 {
        match &self.waveform {
            Waveform::Sinusoid { freq_hz, .. } | Waveform::Square { freq_hz, .. } => *freq_hz,
            Waveform::Arbitrary { sample_rate, .. } => sample_rate / 2.0,
        }
    }

    /// Times at which the waveform jumps, within `[0, duration]`.
    pub fn edges(&self) -> Vec<f64> {
        match &self.waveform {
            Waveform::Square { freq_hz, duty, low, high } if low != high => {
                let mut out = Vec::new();
                let mut k = 0usize;
                loop {
                    let start = k as f64 / freq_hz;
                    if start > self.duration {
                        break;
                    }
                    if k > 0 {
                        out.push(start);
                    }
                    let fall = (k as f64 + duty) / freq_hz;
                    if fall <= self.duration {
                        out.push(fall);
                    }
                    k += 1;
                }
                out
            }
            Waveform::Arbitrary { samples, sample_rate, interpolation: Interpolation::Hold } => samples
                .windows(2)
                .enumerate()
                .filter(|(_, w)| w[0] != w[1])
                .map(|(k, _)| (k + 1) as f64 / sample_rate)
                .filter(|&t| t <= self.duration)
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Amplitude-modulated carrier `E_c·m(t)·cos(ω_c t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmSignal {
    /// Carrier frequency, Hz. Metadata only.
    pub carrier_freq: f64,
    /// Unmodulated carrier amplitude E_c, V/m.
    pub e_carrier: f64,
    /// Modulation function m(t).
    pub baseband: Baseband,
}

impl AmSignal {
    /// Rejects overmodulation (m < 0 anywhere in the duration).
    pub fn new(carrier_freq: f64, e_carrier: f64, baseband: Baseband) -> Result<Self> {
        baseband.validate()?;
        if !(e_carrier.is_finite() && e_carrier > 0.0) {
            return Err(Error::InvalidSignal(format!("carrier field must be > 0, got {e_carrier}")));
        }
        let (lo, _) = baseband.range();
        if lo < 0.0 {
            return Err(Error::InvalidSignal(format!("overmodulated: m(t) reaches {lo}")));
        }
        Ok(Self { carrier_freq, e_carrier, baseband })
    }
}

/// Frequency-modulated carrier `E_c·cos(ω_c t + Φ(t))` with instantaneous
/// detuning `δω(t) = Φ′(t) = amplitude·b(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmSignal {
    pub carrier_freq: f64,
    pub e_carrier: f64,
    /// Scale of the detuning, rad/s.
    pub amplitude: f64,
    /// Dimensionless detuning shape b(t).
    pub baseband: Baseband,
}

impl FmSignal {
    /// `bound`, if given, caps `max |δω|` in rad/s.
    pub fn new(carrier_freq: f64, e_carrier: f64, amplitude: f64, baseband: Baseband, bound: Option<f64>) -> Result<Self> {
        baseband.validate()?;
        if !(e_carrier.is_finite() && e_carrier > 0.0) {
            return Err(Error::InvalidSignal(format!("carrier field must be > 0, got {e_carrier}")));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidSignal("FM amplitude must be finite".into()));
        }
        let s = Self { carrier_freq, e_carrier, amplitude, baseband };
        if let Some(b) = bound {
            if s.peak_detuning() > b {
                return Err(Error::InvalidSignal(format!(
                    "peak detuning {:.4e} rad/s exceeds the bound {b:.4e} rad/s",
                    s.peak_detuning()
                )));
            }
        }
        Ok(s)
    }

    /// `δω(t) = −A·cos(2π·freq_hz·t)`.
    pub fn sinusoid(carrier_freq: f64, e_carrier: f64, amplitude: f64, freq_hz: f64, duration: f64) -> Result<Self> {
        Self::new(carrier_freq, e_carrier, amplitude, Baseband::fm_sinusoid(freq_hz, duration)?, None)
    }

    /// Upper bound on `|δω(t)|`, rad/s.
    pub fn peak_detuning(&self) -> f64 {
        let (lo, hi) = self.baseband.range();
        self.amplitude.abs() * lo.abs().max(hi.abs())
    }
}

fn check_time(t: f64, duration: f64) -> Result<()> {
    if !(0.0..=duration).contains(&t) {
        return Err(Error::Domain(format!("time {t} s outside [0, {duration}] s")));
    }
    Ok(())
}

/// Field envelope `E_c·m(t)`, V/m.
pub fn am_envelope(sig: &AmSignal, t: f64) -> Result<f64> {
    check_time(t, sig.baseband.duration)?;
    Ok(sig.e_carrier * sig.baseband.value(t))
}

/// Instantaneous carrier detuning `δω(t)`, rad/s.
pub fn fm_detuning(sig: &FmSignal, t: f64) -> Result<f64> {
    check_time(t, sig.baseband.duration)?;
    Ok(sig.amplitude * sig.baseband.value(t))
}

/// Non-fatal sampling problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingWarning {
    /// Rate below twice the baseband bandwidth estimate.
    BelowNyquist { rate_hz: f64, bandwidth_hz: f64 },
}

/// Spectroscopic sample times `k/rate` covering `[0, duration)`.
pub fn sample_times(baseband: &Baseband, rate: f64) -> Result<(Vec<f64>, Vec<SamplingWarning>)> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidSignal(format!("sampling rate must be > 0, got {rate}")));
    }
    baseband.validate()?;
    let n = ((baseband.duration * rate) * (1.0 + 4.0 * f64::EPSILON)).floor().max(1.0) as usize;
    let times = (0..n).map(|k| k as f64 / rate).collect();
    let bw = baseband.bandwidth_estimate();
    let warnings = if rate < 2.0 * bw {
        vec![SamplingWarning::BelowNyquist { rate_hz: rate, bandwidth_hz: bw }]
    } else {
        Vec::new()
    };
    Ok((times, warnings))
}

/// Piecewise-linear interpolation of `(times, values)` at `t`, clamped to
/// the end values outside the sampled range. `times` must increase.
pub fn interpolate_linear(times: &[f64], values: &[f64], t: f64) -> f64 {
    match times.partition_point(|&x| x <= t) {
        0 => values[0],
        k if k == times.len() => values[k - 1],
        k => {
            let (t0, t1) = (times[k - 1], times[k]);
            values[k - 1] + (t - t0) / (t1 - t0) * (values[k] - values[k - 1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz_to_rad;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig2() -> AmSignal {
        AmSignal::new(16.98e9, 2.25, Baseband::am_sinusoid(1.0, 0.5, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn am_envelope_values() {
        let s = fig2();
        assert_relative_eq!(am_envelope(&s, 0.0).unwrap(), 1.125, max_relative = 1e-12);
        assert!((am_envelope(&s, 0.0).unwrap() - 1.13).abs() < 0.01);
        assert_relative_eq!(am_envelope(&s, 0.25).unwrap(), 2.25, max_relative = 1e-12);
        let flat = AmSignal::new(0.0, 2.25, Baseband::am_sinusoid(1.0, 0.0, 1.0).unwrap()).unwrap();
        for t in [0.0, 0.1, 0.77] {
            assert_eq!(am_envelope(&flat, t).unwrap(), 2.25);
        }
        assert!(am_envelope(&s, 1.5).is_err());
    }

    #[test]
    fn overmodulation_rejected_at_construction() {
        assert!(AmSignal::new(0.0, 2.25, Baseband::am_sinusoid(1.0, 1.2, 1.0).unwrap()).is_err());
        let sq = Baseband::new(Waveform::Square { freq_hz: 1.0, duty: 0.5, low: -0.1, high: 1.0 }, 1.0).unwrap();
        assert!(AmSignal::new(0.0, 2.25, sq).is_err());
        assert!(AmSignal::new(0.0, 0.0, Baseband::am_sinusoid(1.0, 0.5, 1.0).unwrap()).is_err());
    }

    #[test]
    fn fm_detuning_values() {
        let s = FmSignal::sinusoid(16.98e9, 3.8, mhz_to_rad(40.0), 1.0, 1.0).unwrap();
        assert_relative_eq!(fm_detuning(&s, 0.0).unwrap(), -mhz_to_rad(40.0), max_relative = 1e-12);
        let zero = FmSignal::sinusoid(16.98e9, 3.8, 0.0, 1.0, 1.0).unwrap();
        for t in [0.0, 0.3, 0.9] {
            assert_eq!(fm_detuning(&zero, t).unwrap(), 0.0);
        }
        let big = FmSignal::new(0.0, 3.8, mhz_to_rad(60.0), Baseband::fm_sinusoid(1.0, 1.0).unwrap(), Some(mhz_to_rad(54.0)));
        assert!(big.is_err());
    }

    #[test]
    fn hold_readback_equals_samples() {
        let x = 0.7;
        let b = Baseband::new(
            Waveform::Arbitrary { samples: vec![0.0, x, 0.0], sample_rate: 3.0, interpolation: Interpolation::Hold },
            1.0,
        )
        .unwrap();
        let s = FmSignal::new(0.0, 1.0, 1.0, b, None).unwrap();
        for (k, expect) in [0.0, x, 0.0].into_iter().enumerate() {
            let t0 = k as f64 / 3.0;
            assert_eq!(fm_detuning(&s, t0).unwrap(), expect);
            assert_eq!(fm_detuning(&s, (t0 + 0.3 / 3.0).min(1.0)).unwrap(), expect);
        }
    }

    #[test]
    fn sample_times_grid() {
        let b = Baseband::am_sinusoid(1.0, 0.5, 1.0).unwrap();
        let (t, w) = sample_times(&b, 50.0).unwrap();
        assert_eq!(t.len(), 50);
        assert_eq!(t[0], 0.0);
        assert!(w.is_empty());
        let sq = Baseband::new(Waveform::Square { freq_hz: 5.0, duty: 0.5, low: 0.5, high: 1.5 }, 1.0).unwrap();
        let (_, w) = sample_times(&sq, 8.0).unwrap();
        assert_eq!(w.len(), 1);
        assert!(sample_times(&b, 0.0).is_err());
        assert!(Baseband::am_sinusoid(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn linear_resampling_of_sinusoid() {
        let b = Baseband::new(Waveform::Sinusoid { freq_hz: 1.0, depth: 1.0, phase: 0.3, offset: 0.0 }, 2.0).unwrap();
        let (t, _) = sample_times(&b, 20.0).unwrap();
        let v: Vec<f64> = t.iter().map(|&x| b.value(x)).collect();
        let dense: Vec<f64> = (0..1800).map(|k| k as f64 * 1e-3).collect();
        let mse: f64 = dense
            .iter()
            .map(|&x| (interpolate_linear(&t, &v, x) - b.value(x)).powi(2))
            .sum::<f64>()
            / dense.len() as f64;
        // Relative to the sinusoid's own RMS of 1/√2.
        assert!(mse.sqrt() / 0.5f64.sqrt() < 0.02);
    }

    #[test]
    fn square_levels_and_edges() {
        let b = Baseband::new(Waveform::Square { freq_hz: 1.0, duty: 0.5, low: 0.5, high: 1.5 }, 2.0).unwrap();
        assert_eq!(b.value(0.0), 1.5);
        assert_eq!(b.value(0.49), 1.5);
        assert_eq!(b.value(0.5), 0.5);
        assert_eq!(b.value(1.0), 1.5);
        assert_eq!(b.edges(), vec![0.5, 1.0, 1.5, 2.0]);
    }

    proptest! {
        #[test]
        fn sinusoid_envelope_extremes(depth in 0.0..1.0f64, ec in 0.1..10.0f64) {
            let s = AmSignal::new(0.0, ec, Baseband::am_sinusoid(1.0, depth, 1.0).unwrap()).unwrap();
            let vals: Vec<f64> = (0..=20_000).map(|k| am_envelope(&s, k as f64 / 20_000.0).unwrap()).collect();
            let hi = vals.iter().copied().fold(f64::MIN, f64::max);
            let lo = vals.iter().copied().fold(f64::MAX, f64::min);
            prop_assert!((hi - ec * (1.0 + depth)).abs() < 1e-6 * ec);
            prop_assert!((lo - ec * (1.0 - depth)).abs() < 1e-6 * ec);
        }

        #[test]
        fn fm_sinusoid_has_zero_mean(periods in 1usize..5, f in 0.5..20.0f64, a in 0.0..1e9f64) {
            let dur = periods as f64 / f;
            let s = FmSignal::sinusoid(0.0, 1.0, a, f, dur).unwrap();
            let n = 4096 * periods;
            let mean = (0..n).map(|k| fm_detuning(&s, dur * k as f64 / n as f64).unwrap()).sum::<f64>() / n as f64;
            prop_assert!(mean.abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn arbitrary_round_trip_at_native_rate(
            samples in proptest::collection::vec(-1.0..1.0f64, 2..40), rate in 1.0..100.0f64, hold in any::<bool>()
        ) {
            let n = samples.len();
            let interpolation = if hold { Interpolation::Hold } else { Interpolation::Linear };
            let b = Baseband::new(Waveform::Arbitrary { samples: samples.clone(), sample_rate: rate, interpolation }, n as f64 / rate).unwrap();
            let (t, _) = sample_times(&b, rate).unwrap();
            prop_assert_eq!(t.len(), n);
            for (k, &x) in t.iter().enumerate() {
                prop_assert!((b.value(x) - samples[k]).abs() < 1e-12);
            }
        }
    }
}
