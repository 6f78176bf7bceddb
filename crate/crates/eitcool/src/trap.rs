//! Trap modes, species data, and Lamb-Dicke factors.

use crate::error::Error;
use crate::units;
use crate::Result;

/// Atom/ion species data needed to convert between absolute and reduced units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalSpecies {
    pub mass_amu: f64,
    /// Wavelength of the relevant optical transition, nm.
    pub wavelength_nm: f64,
}

impl PhysicalSpecies {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_amu > 0.0) || !self.mass_amu.is_finite() {
            return Err(Error::Domain(format!("mass must be > 0 amu, got {}", self.mass_amu)));
        }
        if !(self.wavelength_nm > 0.0) || !self.wavelength_nm.is_finite() {
            return Err(Error::Domain(format!(
                "wavelength must be > 0 nm, got {}",
                self.wavelength_nm
            )));
        }
        Ok(())
    }

    /// Optical wavenumber k = 2π/λ in 1/m.
    pub fn wavenumber_per_m(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.wavelength_nm * 1e-9)
    }
}

/// One harmonic motional mode as seen by the cooling light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapMode {
    /// Mode frequency ν, MHz.
    pub frequency_mhz: f64,
    /// Lamb-Dicke factor η of the addressed transition for this mode.
    pub lamb_dicke: f64,
    /// Angular average ⟨cos²φ⟩ of the spontaneous-emission recoil projection
    /// onto the mode axis; 1/3 for isotropic emission.
    pub recoil_alpha: f64,
}

/// Isotropic spontaneous-emission recoil projection ⟨cos²φ⟩.
pub const ISOTROPIC_RECOIL_ALPHA: f64 = 1.0 / 3.0;

impl TrapMode {
    pub fn new(frequency_mhz: f64, lamb_dicke: f64, recoil_alpha: f64) -> Result<Self> {
        if !(frequency_mhz > 0.0) || !frequency_mhz.is_finite() {
            return Err(Error::Domain(format!(
                "mode frequency must be > 0 MHz, got {frequency_mhz}"
            )));
        }
        if !(lamb_dicke >= 0.0) || !lamb_dicke.is_finite() {
            return Err(Error::Domain(format!(
                "Lamb-Dicke factor must be >= 0, got {lamb_dicke}"
            )));
        }
        if !(0.0..=1.0).contains(&recoil_alpha) {
            return Err(Error::Domain(format!(
                "recoil projection must lie in [0, 1], got {recoil_alpha}"
            )));
        }
        Ok(TrapMode { frequency_mhz, lamb_dicke, recoil_alpha })
    }

    /// Build a mode computing η from species data and beam geometry.
    pub fn from_species(
        species: PhysicalSpecies,
        frequency_mhz: f64,
        axis_cosine: f64,
        recoil_alpha: f64,
    ) -> Result<Self> {
        let eta = lamb_dicke(species, frequency_mhz, axis_cosine)?;
        TrapMode::new(frequency_mhz, eta, recoil_alpha)
    }
}

/// Lamb-Dicke factor η = |cosθ| · k · √(ħ/(2M·2πν)) for a single particle.
///
/// This is the only place (together with the ion-string length scale) where
/// the MHz-and-µs convention touches absolute SI scales.
pub fn lamb_dicke(species: PhysicalSpecies, frequency_mhz: f64, axis_cosine: f64) -> Result<f64> {
    species.validate()?;
    if !(frequency_mhz > 0.0) || !frequency_mhz.is_finite() {
        return Err(Error::Domain(format!(
            "mode frequency must be > 0 MHz, got {frequency_mhz}"
        )));
    }
    if !(axis_cosine >= -1.0 && axis_cosine <= 1.0) {
        return Err(Error::Domain(format!(
            "axis cosine must lie in [-1, 1], got {axis_cosine}"
        )));
    }
    Ok(axis_cosine.abs()
        * species.wavenumber_per_m()
        * units::ground_state_size_m(species.mass_amu, frequency_mhz))
}

/// Warn when the first-order expansion in η stops being trustworthy:
/// the wavepacket spread over the occupied levels approaches the wavelength.
pub fn lamb_dicke_validity_warning(eta: f64, mean_n: f64) -> Option<String> {
    let spread = eta * mean_n.max(0.0).sqrt();
    if spread > 0.3 {
        Some(format!(
            "Lamb-Dicke expansion marginal: eta*sqrt(mean_n) = {spread:.3} > 0.3; \
             first-order sideband rates underestimate higher-order processes"
        ))
    } else {
        None
    }
}
