//! Physical constants, species, trap geometry and the derived quantities
//! every solver needs (interaction strengths, oscillator length, soliton
//! width, chemical potential, `β₄`).
//!
//! Everything is SI. Convenience units (Hz, nm, μm, mm/s) are converted at
//! the CLI boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit, kg (CODATA 2018).
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Isotope mass of ⁸⁵Rb in u.
pub const RB85_MASS_U: f64 = 84.911_789;
/// Isotope mass of ²³Na in u.
pub const NA23_MASS_U: f64 = 22.989_769;

/// Casimir-Polder coefficient for Rb on silicon, J·m⁴.
pub const C4_SILICON: f64 = 9.1e-56;

/// Critical atom number for the JILA ⁸⁵Rb parameter set.
pub const NC_JILA: f64 = 2700.0;

/// An atomic species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    /// Atomic mass, kg.
    pub mass: f64,
    /// s-wave scattering length, m (negative = attractive).
    pub a_s: f64,
    /// Effective transition wavelength, m.
    pub lambda_a: f64,
    /// Casimir-Polder coefficient, J·m⁴.
    pub c4: f64,
}

impl Species {
    pub fn new(name: &str, mass: f64, a_s: f64, lambda_a: f64, c4: f64) -> Result<Self> {
        let s = Species {
            name: name.to_string(),
            mass,
            a_s,
            lambda_a,
            c4,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidSpecies(format!(
                "{}: mass must be positive, got {:e}",
                self.name, self.mass
            )));
        }
        if !(self.lambda_a > 0.0) {
            return Err(Error::InvalidSpecies(format!(
                "{}: lambda_a must be positive, got {:e}",
                self.name, self.lambda_a
            )));
        }
        if !(self.c4 >= 0.0) {
            return Err(Error::InvalidSpecies(format!(
                "{}: C4 must be non-negative, got {:e}",
                self.name, self.c4
            )));
        }
        if !self.a_s.is_finite() {
            return Err(Error::InvalidSpecies(format!("{}: a_s not finite", self.name)));
        }
        Ok(())
    }

    /// ⁸⁵Rb with the attractive scattering length of the JILA soliton experiments.
    pub fn rb85() -> Self {
        Species {
            name: "85Rb".into(),
            mass: RB85_MASS_U * AMU,
            a_s: -0.6e-9,
            lambda_a: 780e-9,
            c4: C4_SILICON,
        }
    }

    /// ²³Na with a repulsive scattering length.
    ///
    /// Only one C₄ value is available for the silicon surface; it is reused.
    pub fn na23() -> Self {
        Species {
            name: "23Na".into(),
            mass: NA23_MASS_U * AMU,
            a_s: 2.9e-9,
            lambda_a: 590e-9,
            c4: C4_SILICON,
        }
    }

    /// Kinetic energy of one atom moving at `v`.
    pub fn kinetic_energy(&self, v: f64) -> f64 {
        0.5 * self.mass * v * v
    }

    /// de Broglie wave number `m v / ħ`.
    pub fn wave_number(&self, v: f64) -> f64 {
        self.mass * v / HBAR
    }
}

/// Cylindrically symmetric harmonic trap `V = m ω_r² (r² + λ² (x - x_c)²) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Radial angular frequency, rad/s.
    pub omega_r: f64,
    /// Axial-to-radial frequency ratio λ.
    pub lambda_ratio: f64,
    /// Axial trap centre, m.
    #[serde(default)]
    pub center_x: f64,
}

impl TrapConfig {
    pub fn new(omega_r: f64, lambda_ratio: f64) -> Result<Self> {
        let t = TrapConfig {
            omega_r,
            lambda_ratio,
            center_x: 0.0,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_r >= 0.0) || !(self.lambda_ratio >= 0.0) {
            return Err(Error::Config(format!(
                "trap frequencies must be non-negative (omega_r = {:e}, lambda = {:e})",
                self.omega_r, self.lambda_ratio
            )));
        }
        Ok(())
    }

    /// Axial angular frequency `ω_x = λ ω_r`.
    pub fn omega_x(&self) -> f64 {
        self.lambda_ratio * self.omega_r
    }

    /// JILA-like waveguide: ω_r = 2π × 17.5 Hz, λ = 0.4.
    pub fn jila() -> Self {
        TrapConfig {
            omega_r: 2.0 * PI * 17.5,
            lambda_ratio: 0.4,
            center_x: 0.0,
        }
    }

    /// Same radial confinement with the axial trap switched off.
    pub fn without_axial(self) -> Self {
        TrapConfig {
            lambda_ratio: 0.0,
            ..self
        }
    }

    /// Weak sodium trap with ω_x = 2π × 3.3 Hz (isotropic, only the axial
    /// frequency enters the planar 1D model).
    pub fn na_mit() -> Self {
        TrapConfig {
            omega_r: 2.0 * PI * 3.3,
            lambda_ratio: 1.0,
            center_x: 0.0,
        }
    }
}

/// Named bundle of species, trap and critical number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub species: Species,
    pub trap: TrapConfig,
    /// Critical atom number for 3D collapse (attractive species only).
    pub n_c: Option<f64>,
}

impl ParameterSet {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "rb85-jila" => Ok(ParameterSet {
                species: Species::rb85(),
                trap: TrapConfig::jila(),
                n_c: Some(NC_JILA),
            }),
            "na23-mit" => Ok(ParameterSet {
                species: Species::na23(),
                trap: TrapConfig::na_mit(),
                n_c: None,
            }),
            other => Err(Error::Config(format!(
                "unknown parameter preset '{other}' (known: rb85-jila, na23-mit)"
            ))),
        }
    }

    pub const PRESETS: &'static [&'static str] = &["rb85-jila", "na23-mit"];
}

/// Non-fatal conditions flagged by [`derive_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Warning {
    /// N at or above the collapse threshold.
    AboveCriticalNumber { n: f64, n_c: f64 },
    /// ħω_r does not dominate |μ|; the 1D reduction is questionable.
    OneDimensionalValidity { hbar_omega: f64, mu: f64 },
    /// a_s = 0: no nonlinearity, ξ undefined.
    NoNonlinearity,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::AboveCriticalNumber { n, n_c } => {
                write!(f, "N = {n} is at or above the critical number N_c = {n_c}")
            }
            Warning::OneDimensionalValidity { hbar_omega, mu } => write!(
                f,
                "1D validity: hbar*omega_r = {hbar_omega:e} J is not >> |mu| = {:e} J",
                mu.abs()
            ),
            Warning::NoNonlinearity => write!(f, "a_s = 0: no nonlinearity, xi undefined"),
        }
    }
}

/// Quantities derived from species, trap and atom number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// 3D interaction coefficient g = 4πħ²a_s/m, J·m³.
    pub g: f64,
    /// 1D coefficient g_1D = g / (2π l_r²), J·m.
    pub g1d: f64,
    /// Radial oscillator length, m.
    pub l_r: f64,
    /// Soliton width ξ, m. `None` without interactions.
    pub xi: Option<f64>,
    /// 1D soliton chemical potential −ħ²/(2mξ²), J (diagnostic).
    pub mu: Option<f64>,
    /// C₄ length scale, m. `None` when C₄ = 0.
    pub beta4: Option<f64>,
    pub n_c: Option<f64>,
    pub n_atoms: f64,
    pub warnings: Vec<Warning>,
}

/// 3D contact coupling `4πħ²a/m`.
pub fn coupling_3d(species: &Species) -> f64 {
    4.0 * PI * HBAR * HBAR * species.a_s / species.mass
}

/// Radial oscillator length `sqrt(ħ/(mω))`.
pub fn oscillator_length(mass: f64, omega: f64) -> f64 {
    (HBAR / (mass * omega)).sqrt()
}

/// Bright soliton width `ξ = 2ħ²/(m|g_1D|N)`.
pub fn soliton_width(mass: f64, g1d: f64, n: f64) -> Option<f64> {
    if g1d == 0.0 {
        None
    } else {
        Some(2.0 * HBAR * HBAR / (mass * g1d.abs() * n))
    }
}

pub fn derive_params(
    species: &Species,
    trap: &TrapConfig,
    n_atoms: f64,
    n_c: Option<f64>,
) -> Result<DerivedParams> {
    species.validate()?;
    if !(n_atoms > 0.0) {
        return Err(Error::Domain(format!("atom number must be positive, got {n_atoms}")));
    }
    if !(trap.omega_r > 0.0) {
        return Err(Error::Domain(format!(
            "radial trap frequency must be positive, got {:e}",
            trap.omega_r
        )));
    }
    let m = species.mass;
    let g = coupling_3d(species);
    let l_r = oscillator_length(m, trap.omega_r);
    let g1d = g / (2.0 * PI * l_r * l_r);
    let xi = soliton_width(m, g1d, n_atoms);
    let mu = xi.map(|xi| -HBAR * HBAR / (2.0 * m * xi * xi));
    let beta4 = if species.c4 > 0.0 {
        Some((2.0 * m * species.c4).sqrt() / HBAR)
    } else {
        None
    };

    let mut warnings = Vec::new();
    if xi.is_none() {
        warnings.push(Warning::NoNonlinearity);
    }
    if species.a_s < 0.0 {
        if let Some(n_c) = n_c {
            if n_atoms >= n_c {
                warnings.push(Warning::AboveCriticalNumber { n: n_atoms, n_c });
            }
        }
    }
    if let Some(mu) = mu {
        let hw = HBAR * trap.omega_r;
        if hw <= mu.abs() {
            warnings.push(Warning::OneDimensionalValidity { hbar_omega: hw, mu });
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(DerivedParams {
        g,
        g1d,
        l_r,
        xi,
        mu,
        beta4,
        n_c,
        n_atoms,
        warnings,
    })
}

/// Classical reflection/transmission threshold `sqrt(2V₀/m)` for a step of height V₀.
pub fn classical_critical_speed(v0: f64, species: &Species) -> Result<f64> {
    if !(v0 > 0.0) {
        return Err(Error::Domain(format!("step height must be positive, got {v0:e}")));
    }
    Ok((2.0 * v0 / species.mass).sqrt())
}

/// Length scale of the C₄ coefficient, `C₄ = β₄²ħ²/2m`.
pub fn low_energy_beta4(species: &Species) -> Result<f64> {
    if !(species.c4 > 0.0) {
        return Err(Error::Domain(format!("C4 must be positive, got {:e}", species.c4)));
    }
    Ok((2.0 * species.mass * species.c4).sqrt() / HBAR)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn jila_oscillator_length() {
        let d = derive_params(&Species::rb85(), &TrapConfig::jila(), 1750.0, Some(NC_JILA)).unwrap();
        // quoted as ≈ 2.6 μm
        assert!((d.l_r - 2.6e-6).abs() < 0.05e-6, "l_r = {:e}", d.l_r);
        assert!(rel(d.l_r, 2.608_078e-6) < 1e-5);
    }

    #[test]
    fn jila_soliton_width() {
        let d = derive_params(&Species::rb85(), &TrapConfig::jila(), 1750.0, Some(NC_JILA)).unwrap();
        let xi = d.xi.unwrap();
        // frozen from l_r²/(|a_s| N) with CODATA constants and the isotope mass
        assert!(rel(xi, 6.478_163e-6) < 1e-5, "xi = {xi:e}");
        // the quoted 6.4 μm is a two-digit truncation of this value
        assert!(rel(xi, 6.4e-6) < 0.015);
        assert!(d.warnings.is_empty(), "{:?}", d.warnings);
    }

    #[test]
    fn soliton_width_two_routes_agree() {
        for &n in &[100.0, 1000.0, 1750.0, 2600.0] {
            let sp = Species::rb85();
            let d = derive_params(&sp, &TrapConfig::jila(), n, None).unwrap();
            let direct = d.l_r * d.l_r / (sp.a_s.abs() * n);
            assert!(rel(d.xi.unwrap(), direct) < 1e-12);
        }
    }

    #[test]
    fn no_interaction_flags_missing_xi() {
        let mut sp = Species::rb85();
        sp.a_s = 0.0;
        let d = derive_params(&sp, &TrapConfig::jila(), 1000.0, None).unwrap();
        assert_eq!(d.g1d, 0.0);
        assert!(d.xi.is_none());
        assert!(d.warnings.contains(&Warning::NoNonlinearity));
    }

    #[test]
    fn critical_number_warning() {
        let d = derive_params(&Species::rb85(), &TrapConfig::jila(), 2700.0, Some(NC_JILA)).unwrap();
        assert!(matches!(d.warnings[0], Warning::AboveCriticalNumber { .. }));
    }

    #[test]
    fn invalid_inputs() {
        let mut sp = Species::rb85();
        sp.mass = -1.0;
        assert!(matches!(
            derive_params(&sp, &TrapConfig::jila(), 10.0, None),
            Err(Error::InvalidSpecies(_))
        ));
        assert!(derive_params(&Species::rb85(), &TrapConfig::jila(), 0.0, None).is_err());
        let flat = TrapConfig { omega_r: 0.0, ..TrapConfig::jila() };
        assert!(derive_params(&Species::rb85(), &flat, 10.0, None).is_err());
    }

    #[test]
    fn critical_speed() {
        let sp = Species::rb85();
        let vc = classical_critical_speed(1e-31, &sp).unwrap();
        assert!((vc - 1.19e-3).abs() < 0.005e-3, "vc = {vc:e}");
        let vc4 = classical_critical_speed(4e-31, &sp).unwrap();
        assert!(rel(vc4, 2.0 * vc) < 1e-14);
        assert!(classical_critical_speed(0.0, &sp).is_err());
        assert!(classical_critical_speed(-1e-31, &sp).is_err());
    }

    #[test]
    fn beta4_scalings() {
        let sp = Species::rb85();
        let b = low_energy_beta4(&sp).unwrap();
        assert!((b - 1.52e-6).abs() < 0.01e-6, "beta4 = {b:e}");
        let mut sp4 = sp.clone();
        sp4.c4 *= 4.0;
        assert!(rel(low_energy_beta4(&sp4).unwrap(), 2.0 * b) < 1e-14);
        let mut heavy = sp.clone();
        heavy.mass *= 4.0;
        assert!(rel(low_energy_beta4(&heavy).unwrap(), 2.0 * b) < 1e-14);
        let mut none = sp;
        none.c4 = 0.0;
        assert!(low_energy_beta4(&none).is_err());
    }

    #[test]
    fn derive_is_deterministic() {
        let a = derive_params(&Species::rb85(), &TrapConfig::jila(), 1234.5, Some(NC_JILA)).unwrap();
        let b = derive_params(&Species::rb85(), &TrapConfig::jila(), 1234.5, Some(NC_JILA)).unwrap();
        assert_eq!(a.xi.unwrap().to_bits(), b.xi.unwrap().to_bits());
        assert_eq!(a.g1d.to_bits(), b.g1d.to_bits());
    }

    #[test]
    fn presets() {
        assert!(ParameterSet::preset("rb85-jila").is_ok());
        assert!(ParameterSet::preset("na23-mit").is_ok());
        assert!(matches!(ParameterSet::preset("li7"), Err(Error::Config(_))));
    }
}
