//! Autler-Townes peak extraction and the retrieval relations that turn a
//! spectrum into a field amplitude (AM) or a carrier detuning (FM).

use serde::{Deserialize, Serialize};

use crate::doppler::Spectrum;
use crate::error::{Error, Result};
use crate::ladder::LadderConfig;
use crate::units::{HBAR, PLANCK};

/// The two Autler-Townes lines of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtPeaks {
    /// Lower-frequency line position, rad/s.
    pub pos_low: f64,
    /// Higher-frequency line position, rad/s.
    pub pos_high: f64,
    /// Height of the lower-frequency line above the baseline (H₋).
    pub h_minus: f64,
    /// Height of the higher-frequency line above the baseline (H₊).
    pub h_plus: f64,
    pub baseline: f64,
    pub warnings: Vec<PeakWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeakWarning {
    /// The line has no usable curvature at its maximum (flat or saturated
    /// top); its position and height are the raw grid values.
    FlatTop { position: f64 },
}

/// Tuning of [`find_peaks_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSearch {
    /// Fraction of axis points on each side used for the baseline median.
    pub outer_fraction: f64,
    /// A third line taller than this fraction of the second is ambiguous.
    pub ambiguity_ratio: f64,
    /// Prominence threshold in units of the estimated noise level.
    pub noise_sigmas: f64,
    /// Prominence threshold relative to the tallest line, for noiseless
    /// spectra whose noise estimate is ~0.
    pub min_relative_prominence: f64,
}

impl Default for PeakSearch {
    fn default() -> Self {
        Self {
            outer_fraction: 0.1,
            ambiguity_ratio: 0.2,
            noise_sigmas: 4.0,
            min_relative_prominence: 1e-3,
        }
    }
}

/// Constants for the retrieval relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConstants {
    /// Microwave transition dipole moment, C·m.
    pub dipole_mw: f64,
    pub hbar: f64,
    pub h: f64,
    /// Modulation-free Rabi frequency used for FM retrieval, rad/s.
    pub rabi_ref: f64,
}

impl RetrievalConstants {
    pub fn new(dipole_mw: f64, rabi_ref: f64) -> Result<Self> {
        if !(dipole_mw.is_finite() && dipole_mw > 0.0) {
            return Err(Error::Domain(format!("dipole moment must be > 0, got {dipole_mw}")));
        }
        if !(rabi_ref.is_finite() && rabi_ref >= 0.0) {
            return Err(Error::Domain(format!("reference Rabi frequency must be >= 0, got {rabi_ref}")));
        }
        Ok(Self { dipole_mw, hbar: HBAR, h: PLANCK, rabi_ref })
    }

    pub fn from_config(config: &LadderConfig, rabi_ref: f64) -> Result<Self> {
        Self::new(config.dipole_mw, rabi_ref)
    }
}

/// Finds the two Autler-Townes lines with the default search settings.
pub fn find_at_peaks(spec: &Spectrum) -> Result<AtPeaks> {
    find_peaks_with(&spec.axis, &spec.signal, &PeakSearch::default())
}

/// Locate the doublet on the inverted signal.
///
/// Stationary atoms under a probe scan show the dressed Rydberg states as
/// extra absorption at the two-photon resonances, so the lines are dips of
/// the transparency signal. Heights are reported as positive absorption.
pub fn find_absorption_lines(spec: &Spectrum) -> Result<AtPeaks> {
    let inverted: Vec<f64> = spec.signal.iter().map(|v| -v).collect();
    find_peaks_with(&spec.axis, &inverted, &PeakSearch::default())
}

/// Median of a non-empty slice.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Noise level from second differences, which are insensitive to smooth
/// line shapes: for white noise of deviation σ, `Δ²s` has deviation √6·σ.
fn noise_level(signal: &[f64]) -> f64 {
    let mut d2: Vec<f64> = signal.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).collect();
    if d2.is_empty() {
        return 0.0;
    }
    median(&mut d2) / (0.674_489_75 * 6f64.sqrt())
}

struct Candidate {
    /// Index of the maximum (centre of a plateau).
    index: usize,
    flat: bool,
    prominence: f64,
}

/// Local maxima with their topographic prominence. Plateaus count once.
fn local_maxima(signal: &[f64]) -> Vec<Candidate> {
    let n = signal.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if signal[i] > signal[i - 1] {
            let mut j = i;
            while j + 1 < n && signal[j + 1] == signal[i] {
                j += 1;
            }
            if j + 1 < n && signal[j + 1] < signal[i] {
                let top = signal[i];
                let mut left_min = top;
                let mut k = i;
                while k > 0 && signal[k - 1] <= top {
                    k -= 1;
                    left_min = left_min.min(signal[k]);
                }
                let mut right_min = top;
                let mut k = j;
                while k + 1 < n && signal[k + 1] <= top {
                    k += 1;
                    right_min = right_min.min(signal[k]);
                }
                out.push(Candidate {
                    index: (i + j) / 2,
                    flat: j > i,
                    prominence: top - left_min.max(right_min),
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Three-point parabola through `(i−1, i, i+1)`: vertex offset in grid
/// steps and vertex height. `None` when the points are not concave.
fn parabolic_vertex(y0: f64, y1: f64, y2: f64) -> Option<(f64, f64)> {
    let a = 0.5 * (y0 + y2) - y1;
    let b = 0.5 * (y2 - y0);
    if !(a < 0.0) {
        return None;
    }
    let offset = -b / (2.0 * a);
    if offset.abs() > 1.0 {
        return None;
    }
    Some((offset, y1 - b * b / (4.0 * a)))
}

/// Peak search on an arbitrary axis and signal.
///
/// Takes the two tallest local maxima whose prominence clears the noise
/// threshold and refines each by parabolic interpolation. Heights are
/// measured from the median of the outer `outer_fraction` of points on each
/// side.
pub fn find_peaks_with(axis: &[f64], signal: &[f64], search: &PeakSearch) -> Result<AtPeaks> {
    let n = signal.len();
    if n != axis.len() || n < 5 {
        return Err(Error::Peaks("axis and signal must have equal length >= 5".into()));
    }
    if signal.iter().any(|s| !s.is_finite()) {
        return Err(Error::Peaks("signal contains non-finite values".into()));
    }
    let outer = ((search.outer_fraction * n as f64).round() as usize).clamp(1, n / 2);
    let mut edge: Vec<f64> = signal[..outer].iter().chain(&signal[n - outer..]).copied().collect();
    let baseline = median(&mut edge);

    let candidates = local_maxima(signal);
    let tallest = candidates.iter().map(|c| c.prominence).fold(0.0, f64::max);
    let threshold = (search.noise_sigmas * noise_level(signal)).max(search.min_relative_prominence * tallest);
    let mut kept: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| c.prominence > threshold && signal[c.index] - baseline > threshold)
        .collect();
    if kept.len() < 2 {
        return Err(Error::Peaks(format!(
            "unresolved splitting: {} line(s) above the noise threshold",
            kept.len()
        )));
    }
    kept.sort_by(|a, b| signal[b.index].total_cmp(&signal[a.index]));
    let second = signal[kept[1].index] - baseline;
    if let Some(third) = kept.get(2) {
        let h3 = signal[third.index] - baseline;
        if h3 >= search.ambiguity_ratio * second {
            return Err(Error::Peaks(format!(
                "ambiguous: third line at {:.4e} rad/s is {:.0}% of the second",
                axis[third.index],
                100.0 * h3 / second
            )));
        }
    }

    let mut warnings = Vec::new();
    let mut lines: Vec<(f64, f64)> = kept[..2]
        .iter()
        .map(|c| {
            let i = c.index;
            let refined = if c.flat { None } else { parabolic_vertex(signal[i - 1], signal[i], signal[i + 1]) };
            match refined {
                Some((off, h)) => {
                    let step = if off >= 0.0 { axis[i + 1] - axis[i] } else { axis[i] - axis[i - 1] };
                    (axis[i] + off * step, h - baseline)
                }
                None => {
                    warnings.push(PeakWarning::FlatTop { position: axis[i] });
                    (axis[i], signal[i] - baseline)
                }
            }
        })
        .collect();
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (low, high) = (lines[0], lines[1]);
    if !(low.1 > 0.0 && high.1 > 0.0) {
        return Err(Error::Peaks("line heights must be positive above the baseline".into()));
    }
    Ok(AtPeaks {
        pos_low: low.0,
        pos_high: high.0,
        h_minus: low.1,
        h_plus: high.1,
        baseline,
        warnings,
    })
}

/// Autler-Townes splitting as an ordinary frequency, Hz.
pub fn at_splitting(peaks: &AtPeaks) -> f64 {
    (peaks.pos_high - peaks.pos_low) / (2.0 * std::f64::consts::PI)
}

/// Microwave field amplitude from the splitting: `E = h·f_AT/℘`, V/m.
pub fn field_from_splitting(f_at: f64, c: &RetrievalConstants) -> Result<f64> {
    if !(f_at.is_finite() && f_at >= 0.0) {
        return Err(Error::Domain(format!("splitting must be >= 0, got {f_at}")));
    }
    Ok(c.h * f_at / c.dipole_mw)
}

/// Rabi frequency of a field amplitude: `Ω = ℘·E/ħ`, rad/s.
pub fn rabi_from_field(e: f64, c: &RetrievalConstants) -> Result<f64> {
    if !(e.is_finite() && e >= 0.0) {
        return Err(Error::Domain(format!("field must be >= 0, got {e}")));
    }
    Ok(c.dipole_mw * e / c.hbar)
}

/// AM modulation index `(E_max − E_min)/(E_max + E_min)`.
pub fn modulation_index(e_max: f64, e_min: f64) -> Result<f64> {
    if !(e_min >= 0.0 && e_max >= e_min && e_max > 0.0 && e_max.is_finite()) {
        return Err(Error::Domain(format!(
            "need e_max >= e_min >= 0 and e_max > 0, got {e_max} and {e_min}"
        )));
    }
    Ok((e_max - e_min) / (e_max + e_min))
}

/// Relative line-height difference `F = (H₊ − H₋)/(H₊ + H₋)`.
pub fn asymmetry(peaks: &AtPeaks) -> Result<f64> {
    let total = peaks.h_plus + peaks.h_minus;
    if !(total > 0.0) {
        return Err(Error::Domain("total line height must be positive".into()));
    }
    Ok((peaks.h_plus - peaks.h_minus) / total)
}

/// Default saturation guard for [`detuning_from_asymmetry`].
pub const ASYMMETRY_GUARD: f64 = 1e-9;

/// Carrier detuning from the line asymmetry, `δ = −F·Ω/√(1 − F²)`.
pub fn detuning_from_asymmetry(f: f64, c: &RetrievalConstants) -> Result<f64> {
    detuning_from_asymmetry_guarded(f, c, ASYMMETRY_GUARD)
}

/// As [`detuning_from_asymmetry`], rejecting `|F| ≥ 1 − guard`.
pub fn detuning_from_asymmetry_guarded(f: f64, c: &RetrievalConstants, guard: f64) -> Result<f64> {
    if !(f.abs() < 1.0 - guard) {
        return Err(Error::Domain(format!("asymmetry saturated: |F| = {} is outside the invertible range", f.abs())));
    }
    Ok(-f * c.rabi_ref / (1.0 - f * f).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz_to_rad;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const DIPOLE: f64 = 1.046e-26;

    fn consts(rabi: f64) -> RetrievalConstants {
        RetrievalConstants::new(DIPOLE, rabi).unwrap()
    }

    fn lorentz(x: f64, x0: f64, hwhm: f64) -> f64 {
        1.0 / (1.0 + ((x - x0) / hwhm).powi(2))
    }

    fn axis(half: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
    }

    /// S-components of the dressed eigenvectors of [[0, Ω/2], [Ω/2, −δ]]
    /// (basis r, r′). The state closer to the bare r energy carries more
    /// of r and gives the taller line. The upper eigenvalue is the
    /// higher-frequency line on a coupler scan, whose position is the
    /// negative of the dressed energy, so H₊ belongs to the lower
    /// eigenvalue.
    fn dressed_heights(delta: f64, omega: f64) -> (f64, f64) {
        let b = -delta;
        let disc = (b * b + omega * omega).sqrt();
        let s_fraction = |lambda: f64| {
            // (H − λ)x = 0 → x = (Ω/2, λ)ᵀ up to normalisation.
            let (x0, x1) = (omega / 2.0, lambda);
            x0 * x0 / (x0 * x0 + x1 * x1)
        };
        let lam_lo = 0.5 * (b - disc);
        let lam_hi = 0.5 * (b + disc);
        (s_fraction(lam_lo), s_fraction(lam_hi))
    }

    #[test]
    fn dressed_oracle_sanity() {
        let omega = mhz_to_rad(40.0);
        let (hp, hm) = dressed_heights(omega, omega);
        assert_relative_eq!(hp, 0.146_446_609, max_relative = 1e-8);
        assert_relative_eq!(hm, 0.853_553_390, max_relative = 1e-8);
        let (hp0, hm0) = dressed_heights(0.0, omega);
        assert_relative_eq!(hp0, hm0, max_relative = 1e-12);
    }

    fn peaks(h_plus: f64, h_minus: f64) -> AtPeaks {
        AtPeaks { pos_low: -1.0, pos_high: 1.0, h_minus, h_plus, baseline: 0.0, warnings: vec![] }
    }

    #[test]
    fn synthetic_double_lorentzian() {
        let x = axis(mhz_to_rad(100.0), 401);
        let (x0, w) = (mhz_to_rad(20.0), mhz_to_rad(3.0));
        let s: Vec<f64> = x.iter().map(|&v| lorentz(v, -x0, w) + lorentz(v, x0, w)).collect();
        let p = find_peaks_with(&x, &s, &PeakSearch::default()).unwrap();
        assert!((p.pos_high - x0).abs() < 0.01 * x0);
        assert!((p.pos_low + x0).abs() < 0.01 * x0);
        assert!(asymmetry(&p).unwrap().abs() < 0.01);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn single_line_is_unresolved() {
        let x = axis(mhz_to_rad(60.0), 241);
        let s: Vec<f64> = x.iter().map(|&v| lorentz(v, 0.0, mhz_to_rad(5.0))).collect();
        let e = find_peaks_with(&x, &s, &PeakSearch::default()).unwrap_err();
        assert!(e.to_string().contains("unresolved splitting"));
    }

    #[test]
    fn third_line_is_ambiguous_unless_small() {
        let x = axis(mhz_to_rad(100.0), 401);
        let w = mhz_to_rad(3.0);
        let mk = |h3: f64| -> Vec<f64> {
            x.iter()
                .map(|&v| lorentz(v, -mhz_to_rad(30.0), w) + lorentz(v, mhz_to_rad(30.0), w) + h3 * lorentz(v, 0.0, w))
                .collect()
        };
        assert!(find_peaks_with(&x, &mk(0.5), &PeakSearch::default()).is_err());
        assert!(find_peaks_with(&x, &mk(0.1), &PeakSearch::default()).is_ok());
    }

    #[test]
    fn flat_top_warns() {
        let x = axis(10.0, 101);
        let s: Vec<f64> = x.iter().map(|&v| (lorentz(v, -4.0, 0.8) + lorentz(v, 4.0, 0.8)).min(0.6)).collect();
        let p = find_peaks_with(&x, &s, &PeakSearch::default()).unwrap();
        assert_eq!(p.warnings.len(), 2);
    }

    #[test]
    fn noise_ripples_do_not_count_as_lines() {
        let x = axis(mhz_to_rad(100.0), 401);
        let w = mhz_to_rad(6.0);
        // Deterministic pseudo-noise at 2% of the line height.
        let s: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let noise = 0.02 * (((i as f64) * 12.9898).sin() * 43758.5453).fract();
                lorentz(v, -mhz_to_rad(25.0), w) + lorentz(v, mhz_to_rad(25.0), w) + noise
            })
            .collect();
        let p = find_peaks_with(&x, &s, &PeakSearch::default()).unwrap();
        assert!((at_splitting(&p) / 50e6 - 1.0).abs() < 0.02);
    }

    /// Parabolic interpolation error bound on a Lorentzian, step²/(8·HWHM),
    /// and below 1% of the HWHM in practice.
    #[test]
    fn subgrid_accuracy() {
        let hwhm = 1.0;
        for &step in &[0.1, 0.25, 0.4] {
            for k in 0..10 {
                let x0 = 3.0 + 0.1 * k as f64 * step;
                let x: Vec<f64> = (0..400).map(|i| -20.0 + step * i as f64).filter(|v| *v <= 20.0).collect();
                let s: Vec<f64> = x.iter().map(|&v| lorentz(v, -x0, hwhm) + lorentz(v, x0, hwhm)).collect();
                let p = find_peaks_with(&x, &s, &PeakSearch::default()).unwrap();
                // The other line's tail pulls the true maximum slightly
                // inwards; locate it by golden-section search.
                let f = |v: f64| lorentz(v, -x0, hwhm) + lorentz(v, x0, hwhm);
                let (mut a, mut b) = (x0 - 0.5, x0 + 0.5);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                while b - a > 1e-12 {
                    let (c, d) = (b - g * (b - a), a + g * (b - a));
                    if f(c) > f(d) { b = d } else { a = c }
                }
                let err = (p.pos_high - 0.5 * (a + b)).abs();
                assert!(err < step * step / (8.0 * hwhm), "step {step}: {err}");
                if step <= 0.25 * hwhm {
                    assert!(err < 0.01 * hwhm);
                }
            }
        }
    }

    #[test]
    fn splitting_arithmetic() {
        let p = AtPeaks {
            pos_low: -mhz_to_rad(17.76),
            pos_high: mhz_to_rad(17.76),
            ..peaks(1.0, 1.0)
        };
        assert_relative_eq!(at_splitting(&p), 35.52e6, max_relative = 1e-12);
        let shifted = AtPeaks {
            pos_low: p.pos_low + 7.0e6,
            pos_high: p.pos_high + 7.0e6,
            ..p.clone()
        };
        assert_relative_eq!(at_splitting(&shifted), at_splitting(&p), max_relative = 1e-12);
    }

    #[test]
    fn field_from_splitting_values() {
        let c = consts(0.0);
        assert_eq!(field_from_splitting(0.0, &c).unwrap(), 0.0);
        let e = field_from_splitting(35.52e6, &c).unwrap();
        // h·f/℘ = 6.62607015e-34 · 35.52e6 / 1.046e-26.
        assert_relative_eq!(e, 6.626_070_15e-34 * 35.52e6 / 1.046e-26, max_relative = 1e-9);
        assert!((e / 2.25 - 1.0).abs() < 0.005);
        assert_relative_eq!(field_from_splitting(71.04e6, &c).unwrap(), 2.0 * e, max_relative = 1e-15);
        assert!(field_from_splitting(-1.0, &c).is_err());
    }

    #[test]
    fn rabi_from_field_values() {
        let c = consts(0.0);
        assert_eq!(rabi_from_field(0.0, &c).unwrap(), 0.0);
        let e = field_from_splitting(35.52e6, &c).unwrap();
        assert_relative_eq!(rabi_from_field(e, &c).unwrap(), mhz_to_rad(35.52), max_relative = 1e-12);
        let om = rabi_from_field(2.25, &c).unwrap();
        assert!((om / mhz_to_rad(35.52) - 1.0).abs() < 0.005);
    }

    #[test]
    fn modulation_index_values() {
        assert!((modulation_index(3.38, 1.13).unwrap() - 0.50).abs() < 0.005);
        assert_eq!(modulation_index(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(modulation_index(2.0, 0.0).unwrap(), 1.0);
        assert!(modulation_index(1.0, 2.0).is_err());
        assert!(modulation_index(0.0, 0.0).is_err());
    }

    #[test]
    fn asymmetry_values() {
        assert_eq!(asymmetry(&peaks(0.3, 0.3)).unwrap(), 0.0);
        for s in [1e-6, 1.0, 42.0] {
            assert!((asymmetry(&peaks(0.146 * s, 0.854 * s)).unwrap() + 0.708).abs() < 1e-12);
        }
        assert!(asymmetry(&peaks(0.0, 0.0)).is_err());
    }

    #[test]
    fn detuning_from_asymmetry_values() {
        let c = consts(mhz_to_rad(40.0));
        assert_eq!(detuning_from_asymmetry(0.0, &c).unwrap(), 0.0);
        let f = -(0.5f64).sqrt();
        assert_relative_eq!(detuning_from_asymmetry(f, &c).unwrap(), mhz_to_rad(40.0), max_relative = 1e-12);
        assert_relative_eq!(detuning_from_asymmetry(-f, &c).unwrap(), -mhz_to_rad(40.0), max_relative = 1e-12);
        assert!((detuning_from_asymmetry(-0.7071, &c).unwrap() / mhz_to_rad(40.0) - 1.0).abs() < 1e-3);
        assert!(detuning_from_asymmetry(1.0, &c).is_err());
        assert!(detuning_from_asymmetry(-0.999_999_999_5, &c).is_err());
        assert!(detuning_from_asymmetry_guarded(0.95, &c, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn eq5_inverts_dressed_state_asymmetry(x in -2.0..2.0f64) {
            let omega = mhz_to_rad(40.0);
            let delta = x * omega;
            let (hp, hm) = dressed_heights(delta, omega);
            let f = asymmetry(&peaks(hp, hm)).unwrap();
            let back = detuning_from_asymmetry(f, &consts(omega)).unwrap();
            prop_assert!((back - delta).abs() <= 1e-9 * delta.abs().max(omega * 1e-6));
        }

        #[test]
        fn asymmetry_is_scale_invariant(hp in 1e-6..1.0f64, hm in 1e-6..1.0f64, s in 1e-3..1e3f64) {
            let a = asymmetry(&peaks(hp, hm)).unwrap();
            let b = asymmetry(&peaks(hp * s, hm * s)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a > -1.0 && a < 1.0);
        }

        #[test]
        fn field_and_rabi_round_trip(e in 0.0..50.0f64) {
            let c = consts(0.0);
            let om = rabi_from_field(e, &c).unwrap();
            let back = field_from_splitting(om / (2.0 * std::f64::consts::PI), &c).unwrap();
            prop_assert!((back - e).abs() <= 1e-12 * e.max(1.0));
        }
    }
}
