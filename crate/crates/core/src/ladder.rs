//! Four-level ladder g → e → r → r′ in the rotating-wave approximation.
//!
//! Density matrices are vectorised row-major, `vec(ρ)[4i + j] = ρ[i][j]`, so
//! `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`.

use nalgebra::{DVector, SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{mhz_to_rad, CS133_MASS};

pub type Matrix4 = SMatrix<Complex64, 4, 4>;
pub type Superop = SMatrix<Complex64, 16, 16>;
pub type Vec16 = SVector<Complex64, 16>;

pub const G: usize = 0;
pub const E: usize = 1;
pub const R: usize = 2;
pub const RP: usize = 3;

/// Row-major vectorisation index of `ρ[i][j]`.
pub const fn vec_index(i: usize, j: usize) -> usize {
    4 * i + j
}

/// Atomic constants, relaxation rates and geometry. Rates are angular (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    /// Population decay e → g.
    pub gamma_e: f64,
    /// Population decay r → e.
    pub gamma_r: f64,
    /// Population decay r′ → e.
    pub gamma_rp: f64,
    /// Pure dephasing of coherences involving e.
    pub deph_probe: f64,
    /// Pure dephasing of coherences between {g, e} and {r, r′}.
    pub deph_ryd: f64,
    /// Probe wavelength, m.
    pub lambda_p: f64,
    /// Coupler wavelength, m.
    pub lambda_c: f64,
    /// Dipole moment of the r–r′ microwave transition, C·m.
    pub dipole_mw: f64,
    /// Atomic mass, kg.
    pub atom_mass: f64,
    /// Vapour temperature, K.
    pub temperature: f64,
    /// Microwave carrier frequency, Hz. Metadata only.
    pub carrier_freq: f64,
    pub level_labels: [String; 4],
}

impl Default for LadderConfig {
    /// Caesium 6S₁/₂ → 6P₃/₂ → 60S₁/₂ → 60P₁/₂ in a room-temperature cell.
    ///
    /// The Rydberg decay rates are effective values: they lump radiative
    /// decay together with transit-time loss, which dominates in a vapour
    /// cell with ~100 µm beams.
    fn default() -> Self {
        Self {
            gamma_e: mhz_to_rad(5.2),
            gamma_r: mhz_to_rad(2.0),
            gamma_rp: mhz_to_rad(2.0),
            deph_probe: 0.0,
            deph_ryd: mhz_to_rad(0.1),
            lambda_p: 852e-9,
            lambda_c: 510e-9,
            dipole_mw: 1.046e-26,
            atom_mass: CS133_MASS,
            temperature: 300.0,
            carrier_freq: 16.98e9,
            level_labels: [
                "6S1/2".to_string(),
                "6P3/2".to_string(),
                "60S1/2".to_string(),
                "60P1/2".to_string(),
            ],
        }
    }
}

impl LadderConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma_e", self.gamma_e),
            ("gamma_r", self.gamma_r),
            ("gamma_rp", self.gamma_rp),
            ("deph_probe", self.deph_probe),
            ("deph_ryd", self.deph_ryd),
        ];
        for (name, r) in rates {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {r}")));
            }
        }
        if !(self.lambda_c > 0.0 && self.lambda_p > self.lambda_c && self.lambda_p.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "wavelengths must satisfy lambda_p > lambda_c > 0, got {} and {}",
                self.lambda_p, self.lambda_c
            )));
        }
        let positive = [
            ("dipole_mw", self.dipole_mw),
            ("atom_mass", self.atom_mass),
            ("temperature", self.temperature),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {x}")));
            }
        }
        Ok(())
    }
}

/// Instantaneous drive: three Rabi frequencies and three detunings, rad/s.
///
/// A positive detuning means the field sits above its atomic transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveState {
    pub omega_p: f64,
    pub omega_c: f64,
    pub omega_mw: f64,
    pub delta_p: f64,
    pub delta_c: f64,
    pub delta_mw: f64,
}

impl Default for DriveState {
    /// Probe and coupler at the experimental Rabi frequencies, everything
    /// resonant, microwave off.
    fn default() -> Self {
        Self {
            omega_p: mhz_to_rad(12.3),
            omega_c: mhz_to_rad(2.45),
            omega_mw: 0.0,
            delta_p: 0.0,
            delta_c: 0.0,
            delta_mw: 0.0,
        }
    }
}

impl DriveState {
    pub fn zero() -> Self {
        Self {
            omega_p: 0.0,
            omega_c: 0.0,
            omega_mw: 0.0,
            delta_p: 0.0,
            delta_c: 0.0,
            delta_mw: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rabi = [("omega_p", self.omega_p), ("omega_c", self.omega_c), ("omega_mw", self.omega_mw)];
        for (name, x) in rabi {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidDrive(format!("{name} must be finite and >= 0, got {x}")));
            }
        }
        let det = [("delta_p", self.delta_p), ("delta_c", self.delta_c), ("delta_mw", self.delta_mw)];
        for (name, x) in det {
            if !x.is_finite() {
                return Err(Error::InvalidDrive(format!("{name} must be finite, got {x}")));
            }
        }
        Ok(())
    }
}

/// A 4×4 density matrix over (g, e, r, r′).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub Matrix4);

impl DensityMatrix {
    pub fn ground() -> Self {
        let mut m = Matrix4::zeros();
        m[(G, G)] = Complex64::new(1.0, 0.0);
        Self(m)
    }

    pub fn from_vec(v: &Vec16) -> Self {
        Self(Matrix4::from_fn(|i, j| v[vec_index(i, j)]))
    }

    pub fn to_vec(&self) -> Vec16 {
        Vec16::from_fn(|k, _| self.0[(k / 4, k % 4)])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.0 - self.0.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Rotating-wave Hamiltonian with ħ = 1.
///
/// The r′ diagonal is `−(Δp + Δc) + δmw`. This is the rotating frame of a
/// microwave at ω_rr′ + δmw coupling r to a lower-lying r′ (equivalently, an
/// upper r′ with δmw counted as resonance minus carrier). With this sign the
/// higher-frequency Autler-Townes line is the weaker one for δmw > 0.
pub fn build_hamiltonian(drive: &DriveState) -> Result<Matrix4> {
    drive.validate()?;
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut h = Matrix4::zeros();
    h[(E, E)] = c(-drive.delta_p);
    h[(R, R)] = c(-(drive.delta_p + drive.delta_c));
    h[(RP, RP)] = c(-(drive.delta_p + drive.delta_c) + drive.delta_mw);
    h[(G, E)] = c(drive.omega_p / 2.0);
    h[(E, G)] = c(drive.omega_p / 2.0);
    h[(E, R)] = c(drive.omega_c / 2.0);
    h[(R, E)] = c(drive.omega_c / 2.0);
    h[(R, RP)] = c(drive.omega_mw / 2.0);
    h[(RP, R)] = c(drive.omega_mw / 2.0);
    Ok(h)
}

fn kron(a: &Matrix4, b: &Matrix4) -> Superop {
    Superop::from_fn(|r, c| a[(r / 4, c / 4)] * b[(r % 4, c % 4)])
}

fn projector(levels: &[usize], amp: f64) -> Matrix4 {
    let mut m = Matrix4::zeros();
    for &k in levels {
        m[(k, k)] = Complex64::new(amp, 0.0);
    }
    m
}

fn lowering(to: usize, from: usize, amp: f64) -> Matrix4 {
    let mut m = Matrix4::zeros();
    m[(to, from)] = Complex64::new(amp, 0.0);
    m
}

/// Collapse operators: three decay channels plus two dephasing channels.
///
/// Rydberg dephasing acts collectively on {r, r′}, so it damps every
/// optical coherence to the Rydberg manifold at rate `deph_ryd` but leaves
/// the r–r′ microwave coherence alone.
pub fn collapse_operators(config: &LadderConfig) -> Vec<Matrix4> {
    let mut ops = Vec::with_capacity(5);
    let mut push = |m: Matrix4, rate: f64| {
        if rate > 0.0 {
            ops.push(m);
        }
    };
    push(lowering(G, E, config.gamma_e.sqrt()), config.gamma_e);
    push(lowering(E, R, config.gamma_r.sqrt()), config.gamma_r);
    push(lowering(E, RP, config.gamma_rp.sqrt()), config.gamma_rp);
    push(projector(&[E], (2.0 * config.deph_probe).sqrt()), config.deph_probe);
    push(projector(&[R, RP], (2.0 * config.deph_ryd).sqrt()), config.deph_ryd);
    ops
}

/// Lindblad superoperator `L` with `dρ/dt = L·vec(ρ)`.
pub fn build_liouvillian(h: &Matrix4, config: &LadderConfig) -> Result<Superop> {
    config.validate()?;
    let herm = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if herm > 1e-12 * scale {
        return Err(Error::InvalidDrive("Hamiltonian is not Hermitian".into()));
    }
    let id = Matrix4::identity();
    let mi = Complex64::new(0.0, -1.0);
    let mut l = (kron(h, &id) - kron(&id, &h.transpose())) * mi;
    let half = Complex64::new(0.5, 0.0);
    for c in collapse_operators(config) {
        let cdc = c.adjoint() * c;
        l += kron(&c, &c.conjugate());
        l -= kron(&cdc, &id) * half;
        l -= kron(&id, &cdc.transpose()) * half;
    }
    Ok(l)
}

/// Steady state of `L`: the null vector normalised to unit trace.
///
/// The equation for ρ_gg is replaced by the trace condition (scaled to the
/// magnitude of `L` to keep the system balanced) and the result solved by
/// LU. A near-zero pivot means the null space is degenerate, for example
/// when a driven level has no decay path; that is reported as an error.
pub fn steady_state(l: &Superop) -> Result<DensityMatrix> {
    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Singular("Liouvillian is identically zero".into()));
    }
    let mut a = *l;
    for k in 0..16 {
        a[(0, k)] = Complex64::new(0.0, 0.0);
    }
    for k in 0..4 {
        a[(0, vec_index(k, k))] = Complex64::new(scale, 0.0);
    }
    let mut b = Vec16::zeros();
    b[0] = Complex64::new(scale, 0.0);
    let lu = a.lu();
    let u = lu.u();
    let pivot_min = (0..16).map(|k| u[(k, k)].norm()).fold(f64::INFINITY, f64::min);
    if !(pivot_min > 1e-11 * scale) {
        return Err(Error::Singular(format!(
            "smallest pivot {pivot_min:.3e} relative to scale {scale:.3e}; \
             check that every driven level has a decay path"
        )));
    }
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::Singular("LU solve failed".into()))?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("non-finite steady state".into()));
    }
    let mut rho = DensityMatrix::from_vec(&x);
    // Remove the O(ε) anti-Hermitian part left by round-off.
    rho.0 = (rho.0 + rho.0.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(rho)
}

/// Relative residual ‖L·vec(ρ)‖ / (‖L‖·‖vec(ρ)‖).
pub fn residual(l: &Superop, rho: &DensityMatrix) -> f64 {
    let v = rho.to_vec();
    (l * v).norm() / (l.norm() * v.norm())
}

/// Decay rate of the probe coherence ρ_ge.
pub fn probe_coherence_width(config: &LadderConfig) -> f64 {
    config.gamma_e / 2.0 + config.deph_probe
}

/// Probe absorption in units of the weak-probe, resonant two-level value.
///
/// `A = Im(ρ_ge)·2γ_ge/Ωp`, where γ_ge is the ρ_ge damping rate. Returns 0
/// when the probe is off.
pub fn probe_absorption(rho: &DensityMatrix, drive: &DriveState, config: &LadderConfig) -> f64 {
    if drive.omega_p == 0.0 {
        return 0.0;
    }
    absorption_from_coherence(rho.get(G, E), drive, config)
}

pub(crate) fn absorption_from_coherence(rho_ge: Complex64, drive: &DriveState, config: &LadderConfig) -> f64 {
    rho_ge.im * 2.0 * probe_coherence_width(config) / drive.omega_p
}

/// Steady-state absorption for one atom at rest.
pub fn stationary_absorption(drive: &DriveState, config: &LadderConfig) -> Result<f64> {
    let h = build_hamiltonian(drive)?;
    let l = build_liouvillian(&h, config)?;
    let rho = steady_state(&l)?;
    Ok(probe_absorption(&rho, drive, config))
}

/// Propagates `dρ/dt = L·vec(ρ)` for a time `t` with the exact propagator
/// `exp(L·t)` (Padé approximant with scaling and squaring).
///
/// This route never touches the trace-row substitution used by
/// [`steady_state`], which makes it an independent check of that solver.
pub fn evolve(l: &Superop, rho0: &DensityMatrix, t: f64) -> DensityMatrix {
    if t <= 0.0 {
        return rho0.clone();
    }
    let p = (l * Complex64::new(t, 0.0)).exp();
    DensityMatrix::from_vec(&(p * rho0.to_vec()))
}

/// Slowest nonzero relaxation rate of `L`, from its eigenvalues.
pub fn slowest_relaxation_rate(l: &Superop) -> f64 {
    let dl = nalgebra::DMatrix::from_fn(16, 16, |r, c| l[(r, c)]);
    let scale = l.norm();
    let eig: DVector<Complex64> = dl.schur().eigenvalues().expect("complex Schur always yields eigenvalues");
    eig.iter()
        .map(|z| -z.re)
        .filter(|&r| r > 1e-9 * scale)
        .fold(f64::INFINITY, f64::min)
}
