//! External potential terms and their composition.
//!
//! Every term is complex valued; only the Casimir-Polder surface carries an
//! imaginary (absorbing) part. A [`PotentialStack`] samples as the sum of its
//! terms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Species, TrapConfig};
use crate::Complex64;

/// Smooth step `(V₀/2)(1 + tanh((x - x₀)/σ))`; `σ = 0` is the Heaviside step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TanhStep {
    pub v0: f64,
    pub sigma: f64,
    #[serde(default)]
    pub x0: f64,
}

impl TanhStep {
    pub fn new(v0: f64, sigma: f64, x0: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::Config(format!("tanh width must be >= 0, got {sigma:e}")));
        }
        Ok(TanhStep { v0, sigma, x0 })
    }

    pub fn value(&self, x: f64) -> f64 {
        let s = x - self.x0;
        if self.sigma == 0.0 {
            if s > 0.0 {
                self.v0
            } else if s < 0.0 {
                0.0
            } else {
                0.5 * self.v0
            }
        } else {
            0.5 * self.v0 * (1.0 + (s / self.sigma).tanh())
        }
    }
}

/// `(m/2)(ω_r² r² + ω_x² (x − x_c)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub mass: f64,
    pub omega_r: f64,
    pub omega_x: f64,
    #[serde(default)]
    pub center_x: f64,
}

impl Harmonic {
    pub fn from_trap(trap: &TrapConfig, species: &Species) -> Self {
        Harmonic {
            mass: species.mass,
            omega_r: trap.omega_r,
            omega_x: trap.omega_x(),
            center_x: trap.center_x,
        }
    }

    pub fn value(&self, x: f64, r: f64) -> f64 {
        let dx = x - self.center_x;
        0.5 * self.mass * (self.omega_r * self.omega_r * r * r + self.omega_x * self.omega_x * dx * dx)
    }

    /// Axial part only, for 1D models.
    pub fn axial(&self, x: f64) -> f64 {
        let dx = x - self.center_x;
        0.5 * self.mass * self.omega_x * self.omega_x * dx * dx
    }
}

/// Casimir-Polder surface at `x = Δx` with the single-correction potential
/// `−C₄ / (x'³ (x' + 3λ_a/2π²))` for `x' = Δx − x > δ` and a flat real part
/// plus a linear absorbing ramp beyond the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CasimirPolderSurface {
    /// Surface plane, m.
    pub delta_x: f64,
    pub c4: f64,
    pub lambda_a: f64,
    /// Cutoff distance from the surface, m.
    pub delta: f64,
    /// Slope of the absorbing ramp, J/m.
    pub v_im: f64,
}

/// Cutoff offset from the surface, m.
pub const CP_CUTOFF: f64 = 0.15e-6;
/// Absorber slope for Rb on silicon, J/m.
pub const CP_ABSORBER_SLOPE: f64 = 1.6e-26;

impl CasimirPolderSurface {
    pub fn new(delta_x: f64, c4: f64, lambda_a: f64, delta: f64, v_im: f64) -> Result<Self> {
        let s = CasimirPolderSurface {
            delta_x,
            c4,
            lambda_a,
            delta,
            v_im,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("CP cutoff delta must be > 0, got {:e}", self.delta)));
        }
        if !(self.v_im >= 0.0) {
            return Err(Error::Config(format!("CP absorber slope must be >= 0, got {:e}", self.v_im)));
        }
        if !(self.c4 >= 0.0) || !(self.lambda_a > 0.0) {
            return Err(Error::Config("CP surface needs C4 >= 0 and lambda_a > 0".into()));
        }
        Ok(())
    }

    /// Silicon surface for `species` with the standard cutoff and absorber.
    pub fn silicon(species: &Species, delta_x: f64) -> Self {
        CasimirPolderSurface {
            delta_x,
            c4: species.c4,
            lambda_a: species.lambda_a,
            delta: CP_CUTOFF,
            v_im: CP_ABSORBER_SLOPE,
        }
    }

    /// Retardation correction length `3λ_a / 2π²`.
    pub fn correction_length(&self) -> f64 {
        3.0 * self.lambda_a / (2.0 * PI * PI)
    }

    /// The unmodified single-correction potential at distance `xp > 0`.
    pub fn v_cp(&self, xp: f64) -> f64 {
        -self.c4 / (xp * xp * xp * (xp + self.correction_length()))
    }

    /// Position of the cutoff plane `Δx − δ`.
    pub fn cutoff_x(&self) -> f64 {
        self.delta_x - self.delta
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let xp = self.delta_x - x;
        if xp > self.delta {
            Complex64::new(self.v_cp(xp), 0.0)
        } else {
            let depth = x - self.cutoff_x();
            Complex64::new(self.v_cp(self.delta), -depth * self.v_im)
        }
    }
}

/// Exponentially decaying optical barrier `V_e exp(−x'/Λ)` in front of the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvanescentField {
    pub v_e: f64,
    pub decay_length: f64,
    pub delta_x: f64,
}

impl EvanescentField {
    pub fn new(v_e: f64, decay_length: f64, delta_x: f64) -> Result<Self> {
        if !(decay_length > 0.0) {
            return Err(Error::Config(format!(
                "evanescent decay length must be > 0, got {decay_length:e}"
            )));
        }
        Ok(EvanescentField {
            v_e,
            decay_length,
            delta_x,
        })
    }

    /// Independent of the CP cutoff; held at `V_e` inside the surface.
    pub fn value(&self, x: f64) -> f64 {
        let xp = (self.delta_x - x).max(0.0);
        self.v_e * (-xp / self.decay_length).exp()
    }
}

/// Decay length of the evanescent intensity for total internal reflection,
/// `Λ = λ / (4π sqrt(n² sin²θ − 1))`.
pub fn evanescent_decay_length(wavelength: f64, index: f64, angle: f64) -> Result<f64> {
    let s = index * angle.sin();
    if !(s > 1.0) {
        return Err(Error::Domain(format!(
            "no total internal reflection: n sin(theta) = {s} <= 1"
        )));
    }
    Ok(wavelength / (4.0 * PI * (s * s - 1.0).sqrt()))
}

/// Quadratic imaginary ramp `−i W s²` absorbing outgoing atoms at a grid
/// edge, with `s` running from 0 at `start` to 1 at `end` (either direction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub start: f64,
    pub end: f64,
    pub strength: f64,
}

impl Sponge {
    /// Absorption rate `W s²` (magnitude of the imaginary part), J.
    pub fn value(&self, x: f64) -> f64 {
        let s = ((x - self.start) / (self.end - self.start)).clamp(0.0, 1.0);
        self.strength * s * s
    }
}

/// One additive potential term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PotentialTerm {
    Tanh(TanhStep),
    Harmonic(Harmonic),
    CasimirPolder(CasimirPolderSurface),
    Evanescent(EvanescentField),
    Uniform { value: f64 },
    Sponge(Sponge),
}

impl PotentialTerm {
    pub fn sample(&self, x: f64, r: f64) -> Complex64 {
        match self {
            PotentialTerm::Tanh(t) => Complex64::new(t.value(x), 0.0),
            PotentialTerm::Harmonic(h) => Complex64::new(h.value(x, r), 0.0),
            PotentialTerm::CasimirPolder(cp) => cp.value(x),
            PotentialTerm::Evanescent(e) => Complex64::new(e.value(x), 0.0),
            PotentialTerm::Uniform { value } => Complex64::new(*value, 0.0),
            PotentialTerm::Sponge(s) => Complex64::new(0.0, -s.value(x)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialTerm::Tanh(t) => TanhStep::new(t.v0, t.sigma, t.x0).map(|_| ()),
            PotentialTerm::CasimirPolder(cp) => cp.validate(),
            PotentialTerm::Evanescent(e) => EvanescentField::new(e.v_e, e.decay_length, e.delta_x).map(|_| ()),
            PotentialTerm::Harmonic(h) => {
                if h.mass > 0.0 && h.omega_r >= 0.0 && h.omega_x >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("harmonic term needs mass > 0 and frequencies >= 0".into()))
                }
            }
            PotentialTerm::Uniform { .. } => Ok(()),
            PotentialTerm::Sponge(s) => {
                if s.start != s.end && s.strength >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("sponge needs start != end and strength >= 0".into()))
                }
            }
        }
    }
}

/// Ordered sum of potential terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialStack {
    pub terms: Vec<PotentialTerm>,
}

impl PotentialStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, term: PotentialTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn push(&mut self, term: PotentialTerm) {
        self.terms.push(term);
    }

    pub fn extend(&mut self, other: &PotentialStack) {
        self.terms.extend_from_slice(&other.terms);
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.validate())
    }

    pub fn sample(&self, x: f64, r: f64) -> Complex64 {
        self.terms
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, t| acc + t.sample(x, r))
    }

    /// First Casimir-Polder surface in the stack, if any.
    pub fn surface(&self) -> Option<&CasimirPolderSurface> {
        self.terms.iter().find_map(|t| match t {
            PotentialTerm::CasimirPolder(cp) => Some(cp),
            _ => None,
        })
    }

    /// Mutable access to every harmonic term.
    pub fn harmonics_mut(&mut self) -> impl Iterator<Item = &mut Harmonic> {
        self.terms.iter_mut().filter_map(|t| match t {
            PotentialTerm::Harmonic(h) => Some(h),
            _ => None,
        })
    }

    /// Stack without its harmonic terms.
    pub fn without_harmonic(&self) -> PotentialStack {
        PotentialStack {
            terms: self
                .terms
                .iter()
                .filter(|t| !matches!(t, PotentialTerm::Harmonic(_)))
                .copied()
                .collect(),
        }
    }

    /// Stack restricted to harmonic terms.
    pub fn harmonic_only(&self) -> PotentialStack {
        PotentialStack {
            terms: self
                .terms
                .iter()
                .filter(|t| matches!(t, PotentialTerm::Harmonic(_)))
                .copied()
                .collect(),
        }
    }
}

/// One row of an exported potential profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub re: f64,
    pub im: f64,
}

/// Uniformly sampled profile along `x` at radius `r`.
pub fn real_part_profile(
    stack: &PotentialStack,
    x_min: f64,
    x_max: f64,
    samples: usize,
    r: f64,
) -> Result<Vec<ProfileRow>> {
    if samples < 2 {
        return Err(Error::Domain(format!("profile needs >= 2 samples, got {samples}")));
    }
    if !(x_max > x_min) {
        return Err(Error::Domain(format!("empty profile range [{x_min:e}, {x_max:e}]")));
    }
    let h = (x_max - x_min) / (samples - 1) as f64;
    Ok((0..samples)
        .map(|i| {
            let x = if i + 1 == samples { x_max } else { x_min + i as f64 * h };
            let v = stack.sample(x, r);
            ProfileRow { x, re: v.re, im: v.im }
        })
        .collect())
}

/// Write a profile as CSV with header `x_m,reV_J,imV_J`.
pub fn write_profile_csv<W: std::io::Write>(rows: &[ProfileRow], mut w: W) -> Result<()> {
    writeln!(w, "x_m,reV_J,imV_J")?;
    for row in rows {
        writeln!(w, "{:e},{:e},{:e}", row.x, row.re, row.im)?;
    }
    Ok(())
}

/// Result of calibrating an evanescent barrier against a kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierCalibration {
    pub v_e: f64,
    /// Distance of the barrier maximum from the surface, m.
    pub peak_x_prime: f64,
    pub peak_height: f64,
}

const GOLDEN_TOL: f64 = 1e-10;
const BISECT_RTOL: f64 = 1e-6;

/// Combined real barrier `Re V_CP(x') + V_e exp(−x'/Λ)` as a function of `x'`.
fn barrier(cp: &CasimirPolderSurface, decay: f64, v_e: f64, xp: f64) -> f64 {
    cp.v_cp(xp) + v_e * (-xp / decay).exp()
}

/// Maximum of the combined barrier over `x' ∈ [δ, x_hi]`: a logarithmic scan
/// to bracket the peak, then golden-section refinement.
fn barrier_peak(cp: &CasimirPolderSurface, decay: f64, v_e: f64) -> (f64, f64) {
    let lo = cp.delta;
    let hi = (60.0 * decay).max(20.0 * cp.delta);
    let n = 400;
    let ratio = (hi / lo).ln() / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| lo * (ratio * i as f64).exp()).collect();
    let (mut best, mut best_v) = (0, f64::NEG_INFINITY);
    for (i, &x) in xs.iter().enumerate() {
        let v = barrier(cp, decay, v_e, x);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(n)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (barrier(cp, decay, v_e, c), barrier(cp, decay, v_e, d));
    while (b - a).abs() > GOLDEN_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = barrier(cp, decay, v_e, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = barrier(cp, decay, v_e, d);
        }
    }
    let x = 0.5 * (a + b);
    let mut out = (x, barrier(cp, decay, v_e, x));
    if best_v > out.1 {
        out = (xs[best], best_v);
    }
    out
}

/// Find the evanescent amplitude whose combined barrier with the CP
/// potential peaks exactly at `e_kin`.
pub fn calibrate_evanescent_barrier(
    cp: &CasimirPolderSurface,
    decay_length: f64,
    e_kin: f64,
) -> Result<BarrierCalibration> {
    if !(e_kin > 0.0) {
        return Err(Error::Domain(format!("kinetic energy must be > 0, got {e_kin:e}")));
    }
    if !(decay_length > 0.0) {
        return Err(Error::Domain(format!("decay length must be > 0, got {decay_length:e}")));
    }
    let height = |v_e: f64| barrier_peak(cp, decay_length, v_e).1 - e_kin;

    let mut lo = 0.0;
    let mut hi = e_kin.max(1e-40);
    let mut grow = 0;
    while height(hi) < 0.0 {
        lo = hi;
        hi *= 4.0;
        grow += 1;
        if grow > 200 || !hi.is_finite() {
            return Err(Error::CalibrationFailed {
                reason: "barrier never reaches the kinetic energy".into(),
                v_lo: lo,
                v_hi: hi,
            });
        }
    }
    while (hi - lo) > BISECT_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if height(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v_e = hi;
    let (peak_x_prime, peak_height) = barrier_peak(cp, decay_length, v_e);
    if peak_x_prime <= cp.delta * (1.0 + 1e-6) {
        return Err(Error::CalibrationFailed {
            reason: format!(
                "barrier maximum sits at the cutoff x' = {:e} m; no barrier in front of the surface",
                cp.delta
            ),
            v_lo: lo,
            v_hi: hi,
        });
    }
    Ok(BarrierCalibration {
        v_e,
        peak_x_prime,
        peak_height,
    })
}
