//! Linear ion-crystal structure and per-mode cooling: equilibrium positions,
//! axial and radial normal modes, the zig-zag stability boundary, cooling
//! limits across the mode band, and the Rabi-frequency blurring figure of
//! merit for a qubit carrier drive.
//!
//! Positions are solved in the dimensionless form u_m = z_m/ℓ with
//! ℓ = (e²/(4πε₀ M (2πν_ax)²))^{1/3}, where the force balance reads
//! u_m = Σ_{j<m} (u_m−u_j)^{−2} − Σ_{j>m} (u_j−u_m)^{−2}. The axial Hessian
//! of that potential doubles as the Newton Jacobian and as the normal-mode
//! matrix; its two lowest eigenvalues are exactly 1 (center of mass) and 3
//! (breathing) for every ion count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bloch;
use crate::error::Error;
use crate::ratecool;
use crate::scheme::LevelScheme;
use crate::trap::{self, PhysicalSpecies};
use crate::units;
use crate::Result;

/// One normal mode: frequency and normalized displacement pattern.
#[derive(Debug, Clone)]
pub struct Mode {
    pub frequency_mhz: f64,
    pub eigenvector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Axial,
    Radial,
}

impl std::fmt::Display for ModeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeKind::Axial => write!(f, "axial"),
            ModeKind::Radial => write!(f, "radial"),
        }
    }
}

/// A cold linear ion crystal with its normal-mode structure.
#[derive(Debug, Clone)]
pub struct IonString {
    pub n_ions: usize,
    pub species: PhysicalSpecies,
    pub nu_axial_mhz: f64,
    /// Transverse confinement; when absent, only axial modes are computed.
    pub nu_radial_mhz: Option<f64>,
    /// Axial equilibrium positions in µm, strictly increasing, centered.
    pub positions_um: Vec<f64>,
    /// Sorted ascending in frequency; lowest is the center-of-mass mode.
    pub axial_modes: Vec<Mode>,
    /// Sorted descending from ν_rad (center of mass first). Each entry
    /// stands for two degenerate transverse directions.
    pub radial_modes: Vec<Mode>,
}

/// Length scale ℓ = (e²/(4πε₀ M (2πν_ax)²))^{1/3} in µm.
pub fn length_scale_um(species: PhysicalSpecies, nu_axial_mhz: f64) -> Result<f64> {
    species.validate()?;
    if !(nu_axial_mhz > 0.0) || !nu_axial_mhz.is_finite() {
        return Err(Error::Domain(format!(
            "axial frequency must be finite and > 0, got {nu_axial_mhz} MHz"
        )));
    }
    let mass_kg = species.mass_amu * units::AMU_KG;
    let omega = units::angular_freq_rad_s(nu_axial_mhz);
    Ok((units::COULOMB_E2 / (mass_kg * omega * omega)).cbrt() * 1e6)
}

/// Force-balance residual F_m(u) = u_m − Σ_{j<m}(u_m−u_j)^{−2}
/// + Σ_{j>m}(u_j−u_m)^{−2}; zero at equilibrium.
fn force_residual(u: &[f64]) -> DVector<f64> {
    let n = u.len();
    let mut f = DVector::zeros(n);
    for m in 0..n {
        let mut value = u[m];
        for j in 0..n {
            if j == m {
                continue;
            }
            let gap = u[m] - u[j];
            value -= gap.signum() / (gap * gap);
        }
        f[m] = value;
    }
    f
}

/// Dimensionless axial Hessian: A_mm = 1 + 2Σ_{j≠m}|u_m−u_j|^{−3},
/// A_mj = −2|u_m−u_j|^{−3}. Also the Jacobian of [`force_residual`].
fn axial_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut a = DMatrix::zeros(n, n);
    for m in 0..n {
        a[(m, m)] = 1.0;
        for j in 0..n {
            if j == m {
                continue;
            }
            let cube = (u[m] - u[j]).abs().powi(3);
            a[(m, m)] += 2.0 / cube;
            a[(m, j)] = -2.0 / cube;
        }
    }
    a
}

/// Dimensionless equilibrium positions, sorted ascending, antisymmetric.
/// Damped Newton iteration from a uniformly spaced guess.
pub fn equilibrium_positions_dimensionless(n_ions: usize) -> Result<Vec<f64>> {
    if n_ions == 0 {
        return Err(Error::Domain("an ion string needs at least one ion".into()));
    }
    if n_ions == 1 {
        return Ok(vec![0.0]);
    }

    // Quasi-uniform spacing ~ 2.018/N^0.559 seeds Newton well for N ≤ 30.
    let spacing = 2.018 / (n_ions as f64).powf(0.559);
    let mut u: Vec<f64> = (0..n_ions)
        .map(|m| (m as f64 - (n_ions as f64 - 1.0) / 2.0) * spacing)
        .collect();

    let symmetrize = |u: &mut Vec<f64>| {
        let n = u.len();
        for m in 0..n / 2 {
            let balanced = (u[m] - u[n - 1 - m]) / 2.0;
            u[m] = balanced;
            u[n - 1 - m] = -balanced;
        }
        if n % 2 == 1 {
            u[n / 2] = 0.0;
        }
    };
    symmetrize(&mut u);

    let mut residual = force_residual(&u);
    let mut residual_norm = residual.amax();
    for _ in 0..200 {
        if residual_norm < 1e-12 {
            return Ok(u);
        }
        let jacobian = axial_hessian(&u);
        let delta = jacobian
            .lu()
            .solve(&(-&residual))
            .ok_or_else(|| Error::Numerical("singular Jacobian in string equilibrium".into()))?;

        // Step damping: halve until the residual actually shrinks.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut candidate: Vec<f64> =
                u.iter().zip(delta.iter()).map(|(x, d)| x + step * d).collect();
            symmetrize(&mut candidate);
            let sorted = candidate.windows(2).all(|w| w[1] > w[0]);
            if sorted {
                let trial = force_residual(&candidate);
                let trial_norm = trial.amax();
                if trial_norm < residual_norm {
                    u = candidate;
                    residual = trial;
                    residual_norm = trial_norm;
                    accepted = true;
                    break;
                }
            }
            step /= 2.0;
        }
        if !accepted {
            return Err(Error::Numerical(format!(
                "string equilibrium stalled at residual {residual_norm:.3e} for {n_ions} ions"
            )));
        }
    }
    if residual_norm < 1e-12 {
        Ok(u)
    } else {
        Err(Error::Numerical(format!(
            "string equilibrium did not converge in 200 iterations for {n_ions} ions; \
             best residual {residual_norm:.3e}"
        )))
    }
}

/// Physical equilibrium positions in µm.
pub fn equilibrium_positions(
    n_ions: usize,
    species: PhysicalSpecies,
    nu_axial_mhz: f64,
) -> Result<Vec<f64>> {
    let scale = length_scale_um(species, nu_axial_mhz)?;
    Ok(equilibrium_positions_dimensionless(n_ions)?
        .into_iter()
        .map(|value| value * scale)
        .collect())
}

/// Sorted eigenpairs of a real symmetric matrix, with a canonical
/// eigenvector sign (largest-magnitude component positive).
fn sorted_eigenpairs(matrix: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eigen = matrix.symmetric_eigen();
    let mut pairs: Vec<(f64, Vec<f64>)> = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &value)| (value, eigen.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, vector) in &mut pairs {
        let dominant = vector
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        if vector[dominant] < 0.0 {
            for component in vector.iter_mut() {
                *component = -*component;
            }
        }
    }
    pairs
}

/// Axial normal modes from dimensionless equilibrium positions:
/// ν_q = ν_ax·√λ_q with λ the axial-Hessian eigenvalues, sorted ascending.
pub fn axial_modes(u_dimensionless: &[f64], nu_axial_mhz: f64) -> Result<Vec<Mode>> {
    let pairs = sorted_eigenpairs(axial_hessian(u_dimensionless));
    pairs
        .into_iter()
        .map(|(lambda, eigenvector)| {
            if !(lambda > 0.0) {
                return Err(Error::Domain(format!(
                    "unstable configuration: axial curvature eigenvalue {lambda:.3e} <= 0"
                )));
            }
            Ok(Mode { frequency_mhz: nu_axial_mhz * lambda.sqrt(), eigenvector })
        })
        .collect()
}

/// Radial normal modes: ν_q = √(ν_rad² − μ_q·ν_ax²) with μ_q = (λ_q − 1)/2
/// from the axial-Hessian eigenvalues (the Coulomb coupling matrix shares
/// its eigenvectors). Sorted descending; the center-of-mass mode (μ = 0)
/// sits exactly at ν_rad. Each mode stands for two degenerate transverse
/// directions.
pub fn radial_modes(
    u_dimensionless: &[f64],
    nu_axial_mhz: f64,
    nu_radial_mhz: f64,
) -> Result<Vec<Mode>> {
    if !(nu_radial_mhz > 0.0) || !nu_radial_mhz.is_finite() {
        return Err(Error::Domain(format!(
            "radial frequency must be finite and > 0, got {nu_radial_mhz} MHz"
        )));
    }
    let pairs = sorted_eigenpairs(axial_hessian(u_dimensionless));
    let mut modes = Vec::with_capacity(pairs.len());
    for (lambda, eigenvector) in pairs {
        let mu = (lambda - 1.0) / 2.0;
        let squared = nu_radial_mhz * nu_radial_mhz - mu * nu_axial_mhz * nu_axial_mhz;
        if !(squared > 0.0) {
            return Err(Error::Domain(format!(
                "zig-zag instability: transverse mode frequency squared {squared:.3e} MHz² \
                 at ν_rad = {nu_radial_mhz} MHz; stiffen the radial confinement"
            )));
        }
        modes.push(Mode { frequency_mhz: squared.sqrt(), eigenvector });
    }
    modes.sort_by(|a, b| b.frequency_mhz.total_cmp(&a.frequency_mhz));
    Ok(modes)
}

/// Empirical linear-to-zig-zag boundary: ν_rad must exceed
/// 0.73·N^0.86·ν_ax to hold N ions in a line.
pub fn zigzag_threshold_mhz(n_ions: usize, nu_axial_mhz: f64) -> Result<f64> {
    if n_ions < 2 {
        return Err(Error::Domain(
            "the zig-zag boundary needs at least two ions".into(),
        ));
    }
    Ok(0.73 * (n_ions as f64).powf(0.86) * nu_axial_mhz)
}

/// Exact zig-zag onset for a given equilibrium: the radial confinement at
/// which the softest transverse mode reaches zero, ν_ax·√μ_max.
pub fn exact_zigzag_onset_mhz(u_dimensionless: &[f64], nu_axial_mhz: f64) -> Result<f64> {
    let pairs = sorted_eigenpairs(axial_hessian(u_dimensionless));
    let lambda_max = pairs.last().map(|(value, _)| *value).ok_or_else(|| {
        Error::Domain("exact zig-zag onset needs a non-empty string".into())
    })?;
    Ok(nu_axial_mhz * ((lambda_max - 1.0) / 2.0).sqrt())
}

impl IonString {
    /// Solve the crystal and its mode structure. Radial modes require a
    /// radial confinement above the zig-zag onset.
    pub fn build(
        n_ions: usize,
        species: PhysicalSpecies,
        nu_axial_mhz: f64,
        nu_radial_mhz: Option<f64>,
    ) -> Result<IonString> {
        let scale = length_scale_um(species, nu_axial_mhz)?;
        let u = equilibrium_positions_dimensionless(n_ions)?;
        let axial = axial_modes(&u, nu_axial_mhz)?;
        let radial = match nu_radial_mhz {
            Some(nu_radial) => radial_modes(&u, nu_axial_mhz, nu_radial)?,
            None => Vec::new(),
        };
        Ok(IonString {
            n_ions,
            species,
            nu_axial_mhz,
            nu_radial_mhz,
            positions_um: u.into_iter().map(|value| value * scale).collect(),
            axial_modes: axial,
            radial_modes: radial,
        })
    }

    pub fn min_spacing_um(&self) -> Option<f64> {
        self.positions_um
            .windows(2)
            .map(|w| w[1] - w[0])
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Beam geometry for per-mode cooling of the string.
#[derive(Debug, Clone)]
pub struct CoolingGeometry {
    pub probe_lower: String,
    pub probe_upper: String,
    /// Projection of the probe beam on the mode axis.
    pub axis_cosine: f64,
    /// Average recoil projection of spontaneous emission on that axis.
    pub recoil_alpha: f64,
}

/// One row of the per-mode cooling report.
#[derive(Debug, Clone)]
pub struct ModeCoolingRow {
    pub mode_index: usize,
    pub kind: ModeKind,
    pub frequency_mhz: f64,
    pub mbar: Option<f64>,
    pub tau_us: Option<f64>,
    /// "ok", "net-heating", or "no-coupling".
    pub status: String,
}

/// Cooling limit and time constant for every mode of the string, using the
/// single-ion scattering spectrum sampled at Δ ∓ ν_q per mode.
///
/// The limit m̄_q needs no Lamb-Dicke factor (it cancels); the time constant
/// sums η_q^{(i)}² = (k·cosθ·b_q^{(i)})²·ħ/(2M·2πν_q) over the (globally
/// illuminated) ions, which for normalized eigenvectors equals the
/// single-ion factor at ν_q.
pub fn multimode_cooling(
    string: &IonString,
    scheme: &LevelScheme,
    geometry: &CoolingGeometry,
) -> Result<Vec<ModeCoolingRow>> {
    let laser = bloch::probe_laser_index(scheme, &geometry.probe_lower, &geometry.probe_upper)?;
    let delta = scheme.lasers()[laser].detuning_mhz;
    if !geometry.axis_cosine.is_finite() || geometry.axis_cosine.abs() > 1.0 {
        return Err(Error::Domain(format!(
            "beam-axis cosine must lie in [-1, 1], got {}",
            geometry.axis_cosine
        )));
    }

    let all_modes: Vec<(usize, ModeKind, &Mode)> = string
        .axial_modes
        .iter()
        .enumerate()
        .map(|(q, mode)| (q, ModeKind::Axial, mode))
        .chain(
            string
                .radial_modes
                .iter()
                .enumerate()
                .map(|(q, mode)| (q, ModeKind::Radial, mode)),
        )
        .collect();

    all_modes
        .into_par_iter()
        .map(|(q, kind, mode)| {
            if geometry.axis_cosine == 0.0 {
                return Ok(ModeCoolingRow {
                    mode_index: q,
                    kind,
                    frequency_mhz: mode.frequency_mhz,
                    mbar: None,
                    tau_us: None,
                    status: "no-coupling".into(),
                });
            }
            let reduced = ratecool::reduced_rate_coefficients(
                |x| bloch::scattering_rate_at(scheme, laser, x),
                delta,
                mode.frequency_mhz,
                geometry.axis_cosine,
                geometry.recoil_alpha,
            )?;
            let mbar = match ratecool::steady_state_n(&reduced) {
                Ok(value) => value,
                Err(Error::NetHeating { .. }) => {
                    return Ok(ModeCoolingRow {
                        mode_index: q,
                        kind,
                        frequency_mhz: mode.frequency_mhz,
                        mbar: None,
                        tau_us: None,
                        status: "net-heating".into(),
                    })
                }
                Err(e) => return Err(e),
            };

            // Σ_i η_q^{(i)}² over globally illuminated ions.
            let eta_single = trap::lamb_dicke(
                string.species,
                mode.frequency_mhz,
                geometry.axis_cosine,
            )?;
            let eta2_total: f64 = mode
                .eigenvector
                .iter()
                .map(|b| (eta_single * b) * (eta_single * b))
                .sum();
            let net = eta2_total * reduced.net_cooling_mhz();
            Ok(ModeCoolingRow {
                mode_index: q,
                kind,
                frequency_mhz: mode.frequency_mhz,
                mbar: Some(mbar),
                tau_us: Some(1.0 / net),
                status: "ok".into(),
            })
        })
        .collect()
}

/// Relative Rabi-frequency blur from spectator-mode thermal motion and the
/// usable coherent-oscillation count (its inverse).
#[derive(Debug, Clone, Copy)]
pub struct RabiBlur {
    pub relative_blur: f64,
    pub max_oscillations: f64,
}

/// ΔΩ/Ω = √( Σ_i η_i⁴ m̄_i(m̄_i+1) / (3N−1) ) over the spectator modes of an
/// N-ion string.
pub fn rabi_blur(etas: &[f64], mbars: &[f64], n_ions: usize) -> Result<RabiBlur> {
    if etas.len() != mbars.len() {
        return Err(Error::Domain(format!(
            "blur needs matching arrays, got {} Lamb-Dicke factors and {} occupations",
            etas.len(),
            mbars.len()
        )));
    }
    if n_ions < 1 {
        return Err(Error::Domain("blur needs at least one ion".into()));
    }
    let mut sum = 0.0;
    for (&eta, &mbar) in etas.iter().zip(mbars) {
        if !(mbar >= 0.0) || !eta.is_finite() {
            return Err(Error::Domain(format!(
                "invalid spectator entry η = {eta}, m̄ = {mbar}"
            )));
        }
        sum += eta.powi(4) * mbar * (mbar + 1.0);
    }
    let relative_blur = (sum / (3.0 * n_ions as f64 - 1.0)).sqrt();
    Ok(RabiBlur { relative_blur, max_oscillations: relative_blur.recip() })
}

/// Per-mode Lamb-Dicke factors of one ion for a drive at `wavelength_nm`:
/// η_q^{(i)} = k·cosθ·b_q^{(i)}·√(ħ/(2M·2πν_q)) over the axial modes.
pub fn mode_etas_for_ion(
    string: &IonString,
    wavelength_nm: f64,
    axis_cosine: f64,
    ion: usize,
) -> Result<Vec<f64>> {
    if ion >= string.n_ions {
        return Err(Error::Domain(format!(
            "ion index {ion} out of range for a {}-ion string",
            string.n_ions
        )));
    }
    let drive_species =
        PhysicalSpecies { mass_amu: string.species.mass_amu, wavelength_nm };
    string
        .axial_modes
        .iter()
        .map(|mode| {
            Ok(trap::lamb_dicke(drive_species, mode.frequency_mhz, axis_cosine)?
                * mode.eigenvector[ion])
        })
        .collect()
}
