//! Thermal averaging for counter-propagating probe and coupler beams, and
//! spectra swept over one laser detuning.
//!
//! An atom moving at velocity `v` along the probe sees the probe detuned by
//! `−k_p·v` and the coupler by `+k_c·v`. The microwave Doppler shift is
//! negligible and ignored.
//!
//! Two averaging routes are provided. [`Averaging::Exact`] integrates the
//! Maxwell-Boltzmann distribution analytically: the steady-state probe
//! coherence is a rational function of `v`, so after a partial-fraction
//! expansion each pole contributes a Faddeeva function. [`Averaging::Grid`]
//! sums steady states over an explicit [`VelocityGrid`] and serves as the
//! independent check.

use errorfunctions::ComplexErrorFunctions;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ladder::{
    absorption_from_coherence, build_hamiltonian, build_liouvillian, probe_absorption, steady_state,
    vec_index, DriveState, LadderConfig, Superop, E, G, R, RP,
};
use crate::units::{wavenumber, K_B};

/// One-dimensional Maxwell-Boltzmann width `√(k_B·T/m)`, m/s.
pub fn thermal_sigma(config: &LadderConfig) -> f64 {
    (K_B * config.temperature / config.atom_mass).sqrt()
}

/// Detunings seen by an atom moving at `v` (m/s) along the probe direction.
pub fn doppler_shift(drive: &DriveState, v: f64, config: &LadderConfig) -> DriveState {
    DriveState {
        delta_p: drive.delta_p - wavenumber(config.lambda_p) * v,
        delta_c: drive.delta_c + wavenumber(config.lambda_c) * v,
        ..*drive
    }
}

/// Discrete velocity distribution: nodes in m/s and normalised weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub sigma_v: f64,
}

impl VelocityGrid {
    /// A single atom at rest.
    pub fn stationary() -> Self {
        Self { nodes: vec![0.0], weights: vec![1.0], sigma_v: 0.0 }
    }

    /// Equally spaced nodes over `±span_sigmas·σ` with Gaussian weights
    /// (trapezoid rule). For a smooth integrand this converges
    /// exponentially once the spacing resolves the narrowest feature.
    pub fn uniform(sigma: f64, n: usize, span_sigmas: f64) -> Result<Self> {
        check_grid_args(sigma, n)?;
        if !(span_sigmas.is_finite() && span_sigmas >= 0.0) {
            return Err(Error::InvalidConfig(format!("span_sigmas must be >= 0, got {span_sigmas}")));
        }
        if n == 1 || sigma == 0.0 || span_sigmas == 0.0 {
            return Ok(Self { sigma_v: sigma, ..Self::stationary() });
        }
        let half = span_sigmas * sigma;
        let mut nodes = vec![0.0; n];
        for i in 0..n / 2 {
            let v = half * (1.0 - 2.0 * i as f64 / (n - 1) as f64);
            nodes[i] = -v;
            nodes[n - 1 - i] = v;
        }
        let mut weights: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                end * (-0.5 * (v / sigma).powi(2)).exp()
            })
            .collect();
        normalize(&mut weights);
        Ok(Self { nodes, weights, sigma_v: sigma })
    }

    /// Gauss-Hermite rule for the normal density (Golub-Welsch).
    ///
    /// Exact for polynomial moments up to degree `2n − 1`, but the nodes are
    /// spaced ~σ/√n apart near `v = 0`, far coarser than the sub-m/s
    /// velocity width of the two-photon resonance at room temperature. Use
    /// it for smooth integrands only.
    pub fn gauss_hermite(sigma: f64, n: usize) -> Result<Self> {
        check_grid_args(sigma, n)?;
        if n == 1 || sigma == 0.0 {
            return Ok(Self { sigma_v: sigma, ..Self::stationary() });
        }
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Enforce exact mirror symmetry of the rule.
        for i in 0..n / 2 {
            let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
            let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
            pairs[i] = (-x, w);
            pairs[n - 1 - i] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let nodes = pairs.iter().map(|p| p.0 * sigma).collect();
        let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        normalize(&mut weights);
        Ok(Self { nodes, weights, sigma_v: sigma })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.nodes.len() != self.weights.len() {
            return Err(Error::InvalidConfig("velocity grid must have equal, nonzero node and weight counts".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("velocity grid has negative or non-finite entries".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("velocity weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

fn check_grid_args(sigma: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("velocity grid needs at least one node".into()));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("thermal width must be >= 0, got {sigma}")));
    }
    Ok(())
}

fn normalize(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
}

/// Uniform thermal grid for `config`'s temperature over `±span_sigmas·σ_v`.
pub fn make_velocity_grid(config: &LadderConfig, n_nodes: usize, span_sigmas: f64) -> Result<VelocityGrid> {
    VelocityGrid::uniform(thermal_sigma(config), n_nodes, span_sigmas)
}

/// How the velocity distribution is integrated.
#[derive(Debug, Clone, PartialEq)]
pub enum Averaging {
    /// Analytic Maxwell-Boltzmann average at the configured temperature.
    Exact,
    /// Weighted sum over explicit velocity nodes.
    Grid(VelocityGrid),
}

/// Absorption averaged over `grid`.
pub fn averaged_signal(drive: &DriveState, grid: &VelocityGrid, config: &LadderConfig) -> Result<f64> {
    grid.validate()?;
    let mut acc = 0.0;
    for (i, (&v, &w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
        let d = doppler_shift(drive, v, config);
        let l = build_liouvillian(&build_hamiltonian(&d)?, config)?;
        let rho = steady_state(&l).map_err(|e| match e {
            Error::Singular(msg) => Error::Singular(format!("velocity node {i} (v = {v} m/s): {msg}")),
            other => other,
        })?;
        acc += w * probe_absorption(&rho, &d, config);
    }
    Ok(acc)
}

/// Absorption averaged over the thermal distribution, by either route.
pub fn average_absorption(drive: &DriveState, averaging: &Averaging, config: &LadderConfig) -> Result<f64> {
    match averaging {
        Averaging::Grid(grid) => averaged_signal(drive, grid, config),
        Averaging::Exact => thermal_absorption(drive, config),
    }
}

/// Exact Maxwell-Boltzmann average of the absorption.
///
/// Falls back to a fine uniform grid if the pole expansion is unavailable
/// or fails its self-check against direct solves.
pub fn thermal_absorption(drive: &DriveState, config: &LadderConfig) -> Result<f64> {
    drive.validate()?;
    config.validate()?;
    if drive.omega_p == 0.0 {
        return Ok(0.0);
    }
    let sigma = thermal_sigma(config);
    if sigma == 0.0 {
        return averaged_signal(drive, &VelocityGrid::stationary(), config);
    }
    match PoleExpansion::new(drive, config) {
        Ok(pe) if pe.verify(drive, config, sigma) => {
            let mean = pe.gaussian_mean(sigma);
            Ok(absorption_from_coherence(mean, drive, config))
        }
        Ok(pe) => fallback_average(drive, config, sigma, pe.narrowest_width()),
        Err(_) => fallback_average(drive, config, sigma, None),
    }
}

fn fallback_average(drive: &DriveState, config: &LadderConfig, sigma: f64, width: Option<f64>) -> Result<f64> {
    const SPAN: f64 = 6.0;
    const MAX_NODES: usize = 20_001;
    let n = match width {
        Some(w) if w > 0.0 => ((2.0 * SPAN * sigma / (0.5 * w)).ceil() as usize + 1).clamp(401, MAX_NODES),
        _ => 4001,
    };
    averaged_signal(drive, &VelocityGrid::uniform(sigma, n | 1, SPAN)?, config)
}

/// `ρ_ge(v) = Σ_k r_k / (v − p_k)` for the steady state at velocity `v`.
#[derive(Debug, Clone)]
struct PoleExpansion {
    poles: Vec<Complex64>,
    residues: Vec<Complex64>,
}

/// Velocity coefficient of each vectorised element: `∂L/∂v` is diagonal
/// with entries `−i(u_i − u_j)` where `u` is the Doppler shift per level.
fn velocity_rates(config: &LadderConfig) -> [f64; 16] {
    let kp = wavenumber(config.lambda_p);
    let kc = wavenumber(config.lambda_c);
    let mut u = [0.0; 4];
    u[E] = kp;
    u[R] = kp - kc;
    u[RP] = kp - kc;
    let mut d = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            d[vec_index(i, j)] = u[i] - u[j];
        }
    }
    d
}

/// Liouvillian with the ρ_gg row replaced by the (scaled) trace condition.
fn constrained(l: &Superop) -> (Superop, f64) {
    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut a = *l;
    for k in 0..16 {
        a[(0, k)] = Complex64::new(0.0, 0.0);
    }
    for k in 0..4 {
        a[(0, vec_index(k, k))] = Complex64::new(scale, 0.0);
    }
    (a, scale)
}

impl PoleExpansion {
    fn new(drive: &DriveState, config: &LadderConfig) -> Result<Self> {
        let l = build_liouvillian(&build_hamiltonian(drive)?, config)?;
        let (a, scale) = constrained(&l);
        let rates = velocity_rates(config);
        let s_idx: Vec<usize> = (0..16).filter(|&k| rates[k] != 0.0).collect();
        let u_idx: Vec<usize> = (0..16).filter(|&k| rates[k] == 0.0).collect();
        let (ns, nu) = (s_idx.len(), u_idx.len());
        let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |r, c| a[(rows[r], cols[c])]);
        let a_ss = sub(&s_idx, &s_idx);
        let a_su = sub(&s_idx, &u_idx);
        let a_us = sub(&u_idx, &s_idx);
        let a_uu = sub(&u_idx, &u_idx);
        let mut b_u = DVector::zeros(nu);
        b_u[u_idx.iter().position(|&k| k == 0).expect("ρ_gg is velocity independent")] = Complex64::new(scale, 0.0);

        let lu = a_uu.lu();
        let piv = (0..nu).map(|k| lu.u()[(k, k)].norm()).fold(f64::INFINITY, f64::min);
        if !(piv > 1e-11 * scale) {
            return Err(Error::Singular("velocity-independent block is singular".into()));
        }
        let uu_inv_us = lu.solve(&a_us).ok_or_else(|| Error::Singular("block solve".into()))?;
        let uu_inv_b = lu.solve(&b_u).ok_or_else(|| Error::Singular("block solve".into()))?;
        let k = a_ss - &a_su * uu_inv_us;
        let h = -(&a_su * uu_inv_b);
        // (K + v·D) x = h with D = diag(−i·rate)  ⇒  (M + v) x = g.
        let d_inv: Vec<Complex64> = s_idx.iter().map(|&i| Complex64::new(0.0, -rates[i]).inv()).collect();
        let m = DMatrix::from_fn(ns, ns, |r, c| d_inv[r] * k[(r, c)]);
        let g = DVector::from_fn(ns, |r, _| d_inv[r] * h[r]);

        let (q, t) = m
            .try_schur(1e-14, 10_000)
            .ok_or_else(|| Error::Singular("Schur decomposition did not converge".into()))?
            .unpack();
        let y = triangular_eigenvectors(&t);
        // β = Y⁻¹ Q* g by back substitution (Y is unit upper triangular).
        let mut beta = q.adjoint() * g;
        for i in (0..ns).rev() {
            for j in i + 1..ns {
                let bj = beta[j];
                beta[i] -= y[(i, j)] * bj;
            }
        }
        let row = s_idx.iter().position(|&k| k == vec_index(G, E)).expect("ρ_ge is velocity dependent");
        let v_row = q.row(row) * &y;
        let poles = (0..ns).map(|k| -t[(k, k)]).collect();
        let residues = (0..ns).map(|k| v_row[k] * beta[k]).collect();
        Ok(Self { poles, residues })
    }

    fn eval(&self, v: f64) -> Complex64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(p, r)| r / (Complex64::new(v, 0.0) - p))
            .sum()
    }

    /// Compares the expansion with direct steady-state solves at a few
    /// velocities across the distribution.
    fn verify(&self, drive: &DriveState, config: &LadderConfig, sigma: f64) -> bool {
        if self.poles.iter().any(|p| !(p.re.is_finite() && p.im.is_finite()) || p.im == 0.0)
            || self.residues.iter().any(|r| !(r.re.is_finite() && r.im.is_finite()))
        {
            return false;
        }
        let probes = [0.0, 0.37, -0.81, 1.6, -2.9];
        let mut worst = 0.0f64;
        let mut size = 0.0f64;
        for f in probes {
            let v = f * sigma;
            let d = doppler_shift(drive, v, config);
            let direct = match build_hamiltonian(&d)
                .and_then(|h| build_liouvillian(&h, config))
                .and_then(|l| steady_state(&l))
            {
                Ok(rho) => rho.get(G, E),
                Err(_) => return false,
            };
            worst = worst.max((self.eval(v) - direct).norm());
            size = size.max(direct.norm());
        }
        worst <= 1e-7 * size.max(1e-12)
    }

    /// `E[ρ_ge(v)]` for `v ~ N(0, σ²)`.
    fn gaussian_mean(&self, sigma: f64) -> Complex64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(p, r)| r * mean_inverse_distance(*p, sigma))
            .sum()
    }

    fn narrowest_width(&self) -> Option<f64> {
        self.poles
            .iter()
            .map(|p| p.im.abs())
            .filter(|w| w.is_finite() && *w > 0.0)
            .min_by(f64::total_cmp)
    }
}

/// `E[1/(v − p)]` for `v ~ N(0, σ²)` and non-real `p`, via the Faddeeva
/// function `w(z) = e^{−z²} erfc(−iz)`.
pub fn mean_inverse_distance(p: Complex64, sigma: f64) -> Complex64 {
    if sigma == 0.0 {
        return -p.inv();
    }
    let s = std::f64::consts::SQRT_2 * sigma;
    let z = p / s;
    let i_sqrt_pi = Complex64::new(0.0, std::f64::consts::PI.sqrt());
    if z.im > 0.0 {
        i_sqrt_pi * z.w() / s
    } else {
        -i_sqrt_pi * z.conj().w().conj() / s
    }
}

/// Right eigenvectors of an upper-triangular matrix as the columns of a unit
/// upper-triangular matrix. Near-equal eigenvalues have their difference
/// clamped away from zero, as LAPACK's `trevc` does.
fn triangular_eigenvectors(t: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = t.nrows();
    let tnorm = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);
    let mut y = DMatrix::<Complex64>::identity(n, n);
    for k in 0..n {
        let lk = t[(k, k)];
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - lk;
            if den.norm() < smin {
                den = Complex64::new(smin, 0.0);
            }
            y[(i, k)] = -acc / den;
        }
    }
    y
}

/// Which detuning a spectrum sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Coupler,
    Probe,
}

impl ScanMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanMode::Coupler => "coupler",
            ScanMode::Probe => "probe",
        }
    }

    fn apply(&self, base: &DriveState, x: f64) -> DriveState {
        match self {
            ScanMode::Coupler => DriveState { delta_c: x, ..*base },
            ScanMode::Probe => DriveState { delta_p: x, ..*base },
        }
    }

    /// Ratio of a line's position on this axis to its coupler-scan position
    /// in a Doppler-broadened vapour: 1 for coupler scans, λc/λp for probe
    /// scans (the velocity class that is two-photon resonant shifts the
    /// probe by k_p/k_c of the coupler detuning).
    pub fn axis_scale(&self, config: &LadderConfig) -> f64 {
        match self {
            ScanMode::Coupler => 1.0,
            ScanMode::Probe => config.lambda_c / config.lambda_p,
        }
    }
}

/// Non-fatal problems detected while computing a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumWarning {
    /// Fewer than eight axis points across the narrowest resolved line.
    CoarseAxis { points_per_fwhm: f64 },
    /// An expected Autler-Townes line (rad/s) lies outside the axis.
    AtOutsideAxis { position: f64 },
}

/// EIT signal on a scan axis.
///
/// `signal` is the coupler-off absorption minus the full absorption, i.e.
/// the transparency induced by the coupler, so peaks are positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub scan_mode: ScanMode,
    /// Scanned detuning, rad/s, strictly increasing.
    pub axis: Vec<f64>,
    pub signal: Vec<f64>,
    /// Drive with the scanned detuning set to zero.
    pub drive: DriveState,
    /// Mean axis spacing, rad/s.
    pub step: f64,
    pub warnings: Vec<SpectrumWarning>,
}

/// `n` points symmetric about zero spanning `±half_span`.
pub fn symmetric_axis(half_span: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let mut axis = vec![0.0; n];
    for i in 0..n / 2 {
        let x = half_span * (1.0 - 2.0 * i as f64 / (n - 1) as f64);
        axis[i] = -x;
        axis[n - 1 - i] = x;
    }
    axis
}

/// Positions of the two Autler-Townes lines on a coupler scan,
/// `δ/2 ± √(δ² + Ω²)/2`.
pub fn dressed_positions(omega_mw: f64, delta_mw: f64) -> (f64, f64) {
    let root = omega_mw.hypot(delta_mw) / 2.0;
    (delta_mw / 2.0 - root, delta_mw / 2.0 + root)
}

/// Default scan: `±2.5·√(Ω² + δ²)` (at least ±2π·25 MHz) in coupler units,
/// scaled for probe scans, with `points` samples.
pub fn default_axis(base: &DriveState, mode: ScanMode, config: &LadderConfig, points: usize) -> Vec<f64> {
    let eff = base.omega_mw.hypot(base.delta_mw).max(crate::units::mhz_to_rad(10.0));
    symmetric_axis(2.5 * eff * mode.axis_scale(config), points)
}

/// Sweeps `axis` and returns the thermally averaged EIT signal.
pub fn compute_spectrum(
    base: &DriveState,
    scan_mode: ScanMode,
    axis: &[f64],
    averaging: &Averaging,
    config: &LadderConfig,
) -> Result<Spectrum> {
    base.validate()?;
    config.validate()?;
    if axis.len() < 3 {
        return Err(Error::InvalidConfig("scan axis needs at least 3 points".into()));
    }
    if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("scan axis must be finite and strictly increasing".into()));
    }
    if let Averaging::Grid(g) = averaging {
        g.validate()?;
    }
    let off = DriveState { omega_c: 0.0, ..*base };
    // Without the coupler the response does not depend on Δc.
    let shared_baseline = match scan_mode {
        ScanMode::Coupler => Some(average_absorption(&off, averaging, config)?),
        ScanMode::Probe => None,
    };
    let signal = axis
        .par_iter()
        .map(|&x| -> Result<f64> {
            let full = average_absorption(&scan_mode.apply(base, x), averaging, config)?;
            let baseline = match shared_baseline {
                Some(b) => b,
                None => average_absorption(&scan_mode.apply(&off, x), averaging, config)?,
            };
            Ok(baseline - full)
        })
        .collect::<Result<Vec<f64>>>()?;
    let step = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    let mut spec = Spectrum {
        scan_mode,
        axis: axis.to_vec(),
        signal,
        drive: scan_mode.apply(base, 0.0),
        step,
        warnings: Vec::new(),
    };
    spec.warnings = spectrum_warnings(&spec, config);
    Ok(spec)
}

fn spectrum_warnings(spec: &Spectrum, config: &LadderConfig) -> Vec<SpectrumWarning> {
    let mut out = Vec::new();
    let fwhm = narrowest_fwhm(&spec.axis, &spec.signal);
    if let Some(w) = fwhm {
        let per = w / spec.step;
        if per < 8.0 {
            out.push(SpectrumWarning::CoarseAxis { points_per_fwhm: per });
        }
    }
    if spec.drive.omega_mw > 0.0 {
        let scale = spec.scan_mode.axis_scale(config);
        let (lo, hi) = dressed_positions(spec.drive.omega_mw, spec.drive.delta_mw);
        let margin = fwhm.unwrap_or(0.0);
        let (first, last) = (spec.axis[0], spec.axis[spec.axis.len() - 1]);
        for p in [lo * scale, hi * scale] {
            if p - margin < first || p + margin > last {
                out.push(SpectrumWarning::AtOutsideAxis { position: p });
            }
        }
    }
    out
}

/// Full width at half maximum of the narrower of the two tallest local
/// maxima, measured by linear interpolation of the half-height crossings.
pub(crate) fn narrowest_fwhm(axis: &[f64], signal: &[f64]) -> Option<f64> {
    let n = signal.len();
    let floor = signal.iter().copied().fold(f64::INFINITY, f64::min);
    let mut maxima: Vec<usize> = (1..n - 1)
        .filter(|&i| signal[i] > signal[i - 1] && signal[i] >= signal[i + 1])
        .collect();
    maxima.sort_by(|&a, &b| signal[b].total_cmp(&signal[a]));
    maxima
        .iter()
        .take(2)
        .filter_map(|&i| {
            let half = floor + 0.5 * (signal[i] - floor);
            if !(signal[i] > floor) {
                return None;
            }
            let mut l = i;
            while l > 0 && signal[l] > half {
                l -= 1;
            }
            let mut r = i;
            while r < n - 1 && signal[r] > half {
                r += 1;
            }
            if signal[l] > half || signal[r] > half {
                return None;
            }
            let cross = |a: usize, b: usize| axis[a] + (half - signal[a]) / (signal[b] - signal[a]) * (axis[b] - axis[a]);
            Some(cross(r - 1, r) - cross(l, l + 1))
        })
        .min_by(f64::total_cmp)
}
