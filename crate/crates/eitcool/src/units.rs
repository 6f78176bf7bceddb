//! Unit conventions and physical constants.
//!
//! Every frequency-like quantity in this crate (Rabi frequency Ω, detuning Δ,
//! linewidth γ, trap frequency ν) is a plain number in MHz, used directly in
//! the equations of motion; times are in µs. A rate of 1 MHz therefore decays
//! in 1 µs, and ratios such as Ω/γ or Δ/ν need no conversion. Factors of 2π
//! enter only where an absolute physical scale is required: the Lamb-Dicke
//! factor η = k·cosθ·x₀ with x₀ = √(ħ/(2M·2πν)), and the Coulomb length
//! scale of an ion string. Those conversions live here.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Atomic mass unit, kg.
pub const AMU_KG: f64 = 1.660_539_066_60e-27;

/// Coulomb constant times elementary charge squared, e²/(4πε₀), in J·m.
pub const COULOMB_E2: f64 = 2.307_077_55e-28;

/// Convert a mode frequency in MHz to an angular frequency in rad/s.
pub fn angular_freq_rad_s(nu_mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * nu_mhz * 1e6
}

/// Ground-state wavepacket size x₀ = √(ħ/(2Mω)) in metres for a particle of
/// `mass_amu` in a harmonic mode of `nu_mhz`.
pub fn ground_state_size_m(mass_amu: f64, nu_mhz: f64) -> f64 {
    (HBAR / (2.0 * mass_amu * AMU_KG * angular_freq_rad_s(nu_mhz))).sqrt()
}

/// A decay rate in MHz is an inverse time in µs: τ[µs] = 1 / rate[MHz].
pub fn rate_mhz_to_time_us(rate_mhz: f64) -> f64 {
    1.0 / rate_mhz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_time_round_trip_is_identity() {
        // 1 MHz <-> 1 µs, and the conversion is its own inverse.
        assert_eq!(rate_mhz_to_time_us(1.0), 1.0);
        let r = 0.37;
        assert!((rate_mhz_to_time_us(rate_mhz_to_time_us(r)) - r).abs() < 1e-15);
    }

    #[test]
    fn wavepacket_size_scales_as_inverse_sqrt_of_mass_and_frequency() {
        let base = ground_state_size_m(40.0, 1.0);
        assert!((ground_state_size_m(160.0, 1.0) / base - 0.5).abs() < 1e-12);
        assert!((ground_state_size_m(40.0, 4.0) / base - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wavepacket_size_magnitude_is_nanometres_for_trapped_ions() {
        // A calcium ion in a ~MHz trap sits in a ~10 nm ground-state wavepacket.
        let x0 = ground_state_size_m(40.0, 1.62);
        assert!(x0 > 5e-9 && x0 < 15e-9, "x0 = {x0}");
    }
}
