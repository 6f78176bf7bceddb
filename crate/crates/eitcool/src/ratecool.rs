//! Rate-equation cooling engine.
//!
//! In the Lamb-Dicke regime the motion couples to the light only through
//! first-order sidebands, and the phonon number performs a birth–death
//! random walk with heating coefficient A₊ and cooling coefficient A₋
//! sampled from the internal-state scattering spectrum W:
//!
//!   A± = η² (α·W(Δ) + cos²θ · W(Δ ∓ ν))
//!
//! The cooling coefficient samples W at Δ+ν: the transitions that remove a
//! phonon sit one trap frequency above the carrier, so a narrow absorption
//! peak placed there cools. W is any nonnegative rate function of the probe
//! detuning — closed-form for a two-level atom, or the full steady-state
//! scattering rate from [`crate::bloch`].

use rayon::prelude::*;

use crate::bloch;
use crate::error::Error;
use crate::numeric;
use crate::scheme::LevelScheme;
use crate::trap::{self, PhysicalSpecies, TrapMode};
use crate::Result;

/// Heating/cooling coefficient pair, in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingRates {
    /// Phonon-gain coefficient A₊ (carrier diffusion plus blue-sideband
    /// absorption at Δ−ν).
    pub heating_mhz: f64,
    /// Phonon-loss coefficient A₋ (carrier diffusion plus red-sideband
    /// absorption at Δ+ν).
    pub cooling_mhz: f64,
}

impl CoolingRates {
    pub fn try_new(heating_mhz: f64, cooling_mhz: f64) -> Result<Self> {
        if !(heating_mhz >= 0.0) || !heating_mhz.is_finite() {
            return Err(Error::Domain(format!(
                "heating coefficient must be finite and >= 0, got {heating_mhz}"
            )));
        }
        if !(cooling_mhz >= 0.0) || !cooling_mhz.is_finite() {
            return Err(Error::Domain(format!(
                "cooling coefficient must be finite and >= 0, got {cooling_mhz}"
            )));
        }
        Ok(CoolingRates { heating_mhz, cooling_mhz })
    }

    /// Net phonon-loss rate A₋ − A₊, MHz (may be negative).
    pub fn net_cooling_mhz(&self) -> f64 {
        self.cooling_mhz - self.heating_mhz
    }

    fn require_net_cooling(&self) -> Result<f64> {
        let net = self.net_cooling_mhz();
        if net > 0.0 {
            Ok(net)
        } else {
            Err(Error::NetHeating { heating: self.heating_mhz, cooling: self.cooling_mhz })
        }
    }
}

/// Phonon-number probability distribution over n = 0..=n_max, normalized,
/// with the probability mass lost to truncation recorded alongside.
#[derive(Debug, Clone)]
pub struct PhononDistribution {
    probabilities: Vec<f64>,
    truncation_loss: f64,
}

impl PhononDistribution {
    /// Validate and renormalize. Entries may carry integrator noise down to
    /// −1e-12 (clipped); anything more negative, non-finite, or an all-zero
    /// vector is rejected.
    pub fn try_new(raw: Vec<f64>, truncation_loss: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Domain("phonon distribution must be non-empty".into()));
        }
        if !(truncation_loss >= 0.0) || !truncation_loss.is_finite() {
            return Err(Error::Domain(format!(
                "truncation loss must be finite and >= 0, got {truncation_loss}"
            )));
        }
        let mut probabilities = raw;
        for (n, p) in probabilities.iter_mut().enumerate() {
            if !p.is_finite() || *p < -1e-12 {
                return Err(Error::Numerical(format!(
                    "phonon probability p_{n} = {p:.3e} is not a valid probability"
                )));
            }
            *p = p.max(0.0);
        }
        let total: f64 = probabilities.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical(
                "phonon distribution has zero total probability".into(),
            ));
        }
        for p in &mut probabilities {
            *p /= total;
        }
        Ok(PhononDistribution { probabilities, truncation_loss })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// First moment ⟨n⟩ of the truncated distribution.
    pub fn mean_n(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Probability mass that would have escaped past n_max (thermal tail at
    /// construction, or accumulated reflected flux during evolution).
    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }
}

/// Thermal (geometric) distribution p_n ∝ (m̄/(m̄+1))ⁿ truncated at n_max and
/// renormalized; the discarded tail mass is recorded as the truncation loss.
pub fn thermal_distribution(mbar: f64, n_max: usize) -> Result<PhononDistribution> {
    if !(mbar >= 0.0) || !mbar.is_finite() {
        return Err(Error::Domain(format!(
            "thermal mean occupation must be finite and >= 0, got {mbar}"
        )));
    }
    let ratio = mbar / (mbar + 1.0);
    let mut probabilities = Vec::with_capacity(n_max + 1);
    let mut weight = 1.0 / (mbar + 1.0);
    for _ in 0..=n_max {
        probabilities.push(weight);
        weight *= ratio;
    }
    // Untruncated weights sum to exactly 1; the leftover geometric tail is
    // ratio^(n_max+1).
    let tail = ratio.powi(n_max as i32 + 1);
    PhononDistribution::try_new(probabilities, tail)
}

/// η²-free coefficient pair: α·W(Δ) + cos²θ·W(Δ∓ν). Useful when only the
/// steady-state occupation is wanted (η² cancels there) or when one spectrum
/// serves several differently-coupled modes.
pub fn reduced_rate_coefficients<F>(
    spectrum_mhz: F,
    delta_mhz: f64,
    nu_mhz: f64,
    axis_cosine: f64,
    recoil_alpha: f64,
) -> Result<CoolingRates>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(nu_mhz > 0.0) || !nu_mhz.is_finite() {
        return Err(Error::Domain(format!(
            "trap frequency must be finite and > 0, got {nu_mhz} MHz"
        )));
    }
    if !axis_cosine.is_finite() || axis_cosine.abs() > 1.0 {
        return Err(Error::Domain(format!(
            "beam-axis cosine must lie in [-1, 1], got {axis_cosine}"
        )));
    }
    if !(0.0..=1.0).contains(&recoil_alpha) || !recoil_alpha.is_finite() {
        return Err(Error::Domain(format!(
            "recoil projection factor must lie in [0, 1], got {recoil_alpha}"
        )));
    }
    let sample = |x: f64| -> Result<f64> {
        let w = spectrum_mhz(x)?;
        if !w.is_finite() || w < 0.0 {
            return Err(Error::Numerical(format!(
                "scattering spectrum returned invalid rate {w:.3e} MHz at detuning {x} MHz"
            )));
        }
        Ok(w)
    };
    let carrier = sample(delta_mhz)?;
    let blue_side = sample(delta_mhz - nu_mhz)?; // feeds phonon gain
    let red_side = sample(delta_mhz + nu_mhz)?; // feeds phonon loss
    let cos2 = axis_cosine * axis_cosine;
    CoolingRates::try_new(
        recoil_alpha * carrier + cos2 * blue_side,
        recoil_alpha * carrier + cos2 * red_side,
    )
}

/// Full coefficients A± = η²(α·W(Δ) + cos²θ·W(Δ∓ν)). η is the bare
/// Lamb-Dicke parameter k·x₀; the beam projection enters through cos θ.
pub fn rate_coefficients<F>(
    spectrum_mhz: F,
    delta_mhz: f64,
    nu_mhz: f64,
    lamb_dicke: f64,
    axis_cosine: f64,
    recoil_alpha: f64,
) -> Result<CoolingRates>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(lamb_dicke >= 0.0) || !lamb_dicke.is_finite() {
        return Err(Error::Domain(format!(
            "Lamb-Dicke parameter must be finite and >= 0, got {lamb_dicke}"
        )));
    }
    let reduced =
        reduced_rate_coefficients(spectrum_mhz, delta_mhz, nu_mhz, axis_cosine, recoil_alpha)?;
    let eta2 = lamb_dicke * lamb_dicke;
    CoolingRates::try_new(eta2 * reduced.heating_mhz, eta2 * reduced.cooling_mhz)
}

/// Coefficients for a level scheme: the spectrum is the steady-state
/// scattering rate as the probe detuning is swept, Δ is the probe's
/// configured detuning, and cos θ comes from the probe beam geometry.
pub fn scheme_rate_coefficients(
    scheme: &LevelScheme,
    probe_lower: &str,
    probe_upper: &str,
    mode: &TrapMode,
) -> Result<CoolingRates> {
    let laser = bloch::probe_laser_index(scheme, probe_lower, probe_upper)?;
    let probe = &scheme.lasers()[laser];
    rate_coefficients(
        |x| bloch::scattering_rate_at(scheme, laser, x),
        probe.detuning_mhz,
        mode.frequency_mhz,
        mode.lamb_dicke,
        probe.axis_cosine,
        mode.recoil_alpha,
    )
}

/// Steady-state mean occupation m̄ = A₊/(A₋ − A₊).
pub fn steady_state_n(rates: &CoolingRates) -> Result<f64> {
    let net = rates.require_net_cooling()?;
    Ok(rates.heating_mhz / net)
}

/// Exponential time constant τ = 1/(A₋ − A₊), in µs for rates in MHz.
pub fn cooling_time_us(rates: &CoolingRates) -> Result<f64> {
    Ok(1.0 / rates.require_net_cooling()?)
}

/// Mean occupation ⟨n(t)⟩ from the closed-form solution of
/// d⟨n⟩/dt = −(A₋−A₊)⟨n⟩ + A₊. Valid for any sign of the net rate: under
/// net heating the exact exponentially growing solution is returned.
pub fn evolve_mean_n(rates: &CoolingRates, n0: f64, times_us: &[f64]) -> Result<Vec<f64>> {
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(Error::Domain(format!(
            "initial mean occupation must be finite and >= 0, got {n0}"
        )));
    }
    let net = rates.net_cooling_mhz();
    times_us
        .iter()
        .map(|&t| {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Domain(format!(
                    "evolution times must be finite and >= 0, got {t} µs"
                )));
            }
            // n(t) = n0·e^{−rt} + A₊·(1−e^{−rt})/r, stable for r → 0.
            let value = if net == 0.0 {
                n0 + rates.heating_mhz * t
            } else {
                let decay = (-net * t).exp();
                n0 * decay - rates.heating_mhz * f64::exp_m1(-net * t) / net
            };
            Ok(value)
        })
        .collect()
}

/// Default phonon-space size for a relaxation starting near mean occupation
/// `n0`: max(60, ⌈10·(1+n0)⌉).
pub fn default_n_max(n0: f64) -> usize {
    60usize.max((10.0 * (1.0 + n0)).ceil() as usize)
}

/// Integrate the birth–death rate equations
/// dp_n/dt = A₊[n·p_{n−1} − (n+1)·p_n] + A₋[(n+1)·p_{n+1} − n·p_n]
/// for a time t. The top of the phonon space reflects (the gain term out of
/// n_max is switched off) and the probability flux that would have escaped
/// is accumulated; if that exceeds 1e-6 the truncation is reported as too
/// small. Explicit RK4 with the step chosen from the spectral bound of the
/// tridiagonal generator.
pub fn evolve_populations(
    rates: &CoolingRates,
    p0: &PhononDistribution,
    t_us: f64,
) -> Result<PhononDistribution> {
    if !(t_us >= 0.0) || !t_us.is_finite() {
        return Err(Error::Domain(format!(
            "evolution time must be finite and >= 0, got {t_us} µs"
        )));
    }
    let n_max = p0.n_max();
    let a_plus = rates.heating_mhz;
    let a_minus = rates.cooling_mhz;
    let total_rate = a_plus + a_minus;
    if t_us == 0.0 || total_rate == 0.0 {
        return PhononDistribution::try_new(
            p0.probabilities().to_vec(),
            p0.truncation_loss(),
        );
    }

    // Fastest relaxation scale ~ 2(A₊+A₋)(n_max+1); keep |λ·h| well inside
    // the RK4 stability region.
    let h_stable = 0.5 / (total_rate * (n_max as f64 + 1.0));
    let steps = (t_us / h_stable).ceil().max(1.0);
    if steps > 5e8 {
        return Err(Error::Numerical(format!(
            "population relaxation would need {steps:.1e} steps; \
             reduce the time span or the phonon-space size"
        )));
    }
    let steps = steps as usize;
    let h = t_us / steps as f64;

    // State = populations ++ accumulated escape flux (last slot).
    let deriv = |state: &[f64], out: &mut [f64]| {
        for n in 0..=n_max {
            let gain_up = if n > 0 { a_plus * n as f64 * state[n - 1] } else { 0.0 };
            let gain_down =
                if n < n_max { a_minus * (n as f64 + 1.0) * state[n + 1] } else { 0.0 };
            let loss_up = if n < n_max { a_plus * (n as f64 + 1.0) * state[n] } else { 0.0 };
            let loss_down = a_minus * n as f64 * state[n];
            out[n] = gain_up + gain_down - loss_up - loss_down;
        }
        // Flux that the reflecting top boundary refuses to emit.
        out[n_max + 1] = a_plus * (n_max as f64 + 1.0) * state[n_max];
    };

    let dim = n_max + 2;
    let mut state = Vec::with_capacity(dim);
    state.extend_from_slice(p0.probabilities());
    state.push(0.0);
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for _ in 0..steps {
        deriv(&state, &mut k1);
        for i in 0..dim {
            scratch[i] = state[i] + 0.5 * h * k1[i];
        }
        deriv(&scratch, &mut k2);
        for i in 0..dim {
            scratch[i] = state[i] + 0.5 * h * k2[i];
        }
        deriv(&scratch, &mut k3);
        for i in 0..dim {
            scratch[i] = state[i] + h * k3[i];
        }
        deriv(&scratch, &mut k4);
        for i in 0..dim {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    let leakage = state[dim - 1] + p0.truncation_loss();
    if leakage > 1e-6 {
        return Err(Error::Truncation { leakage, n_max });
    }
    state.truncate(n_max + 1);
    PhononDistribution::try_new(state, leakage)
}

/// Relax a thermal state of mean occupation `mbar0` for time `t_us`,
/// growing the phonon space (doubling, up to four times) whenever the
/// truncation proves too small.
pub fn evolve_thermal(
    rates: &CoolingRates,
    mbar0: f64,
    t_us: f64,
) -> Result<PhononDistribution> {
    let mut n_max = default_n_max(mbar0);
    let mut last_err = None;
    for _ in 0..5 {
        let p0 = thermal_distribution(mbar0, n_max)?;
        match evolve_populations(rates, &p0, t_us) {
            Ok(p) => return Ok(p),
            Err(e @ Error::Truncation { .. }) => {
                last_err = Some(e);
                n_max *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

/// One row of a trap-frequency sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub nu_mhz: f64,
    pub mbar: Option<f64>,
    pub tau_us: Option<f64>,
    /// "ok", or the reason the limit does not exist at this frequency.
    pub status: String,
}

/// Sweep the trap frequency across a band, recomputing the Lamb-Dicke
/// parameter from the species at every point (η ∝ 1/√ν) and evaluating the
/// cooling limit and time constant. Net-heating points are reported in-row
/// rather than failing the sweep; spectrum failures abort.
#[allow(clippy::too_many_arguments)]
pub fn band_sweep(
    scheme: &LevelScheme,
    probe_lower: &str,
    probe_upper: &str,
    species: &PhysicalSpecies,
    recoil_alpha: f64,
    nu_lo_mhz: f64,
    nu_hi_mhz: f64,
    points: usize,
) -> Result<Vec<SweepRow>> {
    if !(nu_lo_mhz > 0.0) || !(nu_hi_mhz >= nu_lo_mhz) || !nu_hi_mhz.is_finite() {
        return Err(Error::Domain(format!(
            "trap-frequency band must satisfy 0 < lo <= hi, got [{nu_lo_mhz}, {nu_hi_mhz}] MHz"
        )));
    }
    let degenerate = nu_lo_mhz == nu_hi_mhz;
    if !degenerate && points < 2 {
        return Err(Error::Domain(format!(
            "trap-frequency sweep needs at least 2 points, got {points}"
        )));
    }
    species.validate()?;
    let laser = bloch::probe_laser_index(scheme, probe_lower, probe_upper)?;
    let probe = scheme.lasers()[laser].clone();

    let frequencies =
        if degenerate { vec![nu_lo_mhz] } else { numeric::linspace(nu_lo_mhz, nu_hi_mhz, points) };

    frequencies
        .par_iter()
        .map(|&nu| {
            let eta = trap::lamb_dicke(*species, nu, 1.0)?;
            let rates = rate_coefficients(
                |x| bloch::scattering_rate_at(scheme, laser, x),
                probe.detuning_mhz,
                nu,
                eta,
                probe.axis_cosine,
                recoil_alpha,
            )?;
            let row = match steady_state_n(&rates) {
                Ok(mbar) => SweepRow {
                    nu_mhz: nu,
                    mbar: Some(mbar),
                    tau_us: Some(cooling_time_us(&rates)?),
                    status: "ok".into(),
                },
                Err(Error::NetHeating { .. }) => SweepRow {
                    nu_mhz: nu,
                    mbar: None,
                    tau_us: None,
                    status: "net-heating".into(),
                },
                Err(e) => return Err(e),
            };
            Ok(row)
        })
        .collect()
}

/// The rate picture assumes the probe stays below saturation. Returns a
/// warning message when the probe Rabi frequency exceeds a fifth of the
/// upper level's total decay rate.
pub fn saturation_warning(
    scheme: &LevelScheme,
    probe_lower: &str,
    probe_upper: &str,
) -> Result<Option<String>> {
    let laser = bloch::probe_laser_index(scheme, probe_lower, probe_upper)?;
    let probe = &scheme.lasers()[laser];
    let upper_index = scheme
        .index_of(&probe.upper)
        .expect("laser endpoints are validated at scheme construction");
    let linewidth = scheme.linewidth_of(upper_index);
    if linewidth > 0.0 && probe.rabi_mhz > linewidth / 5.0 {
        Ok(Some(format!(
            "probe Rabi frequency {} MHz exceeds {:.3} MHz (linewidth/5); \
             the rate picture assumes the probe transition stays below saturation",
            probe.rabi_mhz,
            linewidth / 5.0
        )))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::lambda_scheme;
    use crate::trap::ISOTROPIC_RECOIL_ALPHA;
    use nalgebra::{DMatrix, DVector};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Closed-form two-level scattering rate, W = γ·ρ_ee(Δ).
    fn two_level_w(omega: f64, gamma: f64) -> impl Fn(f64) -> crate::Result<f64> {
        move |delta: f64| {
            Ok(gamma * (omega * omega / 4.0)
                / (delta * delta + omega * omega / 2.0 + gamma * gamma / 4.0))
        }
    }

    #[test]
    fn no_projection_no_rates() {
        let rates =
            rate_coefficients(two_level_w(2.0, 20.0), -10.0, 1.0, 0.1, 0.0, 0.0).unwrap();
        assert_eq!(rates.heating_mhz, 0.0);
        assert_eq!(rates.cooling_mhz, 0.0);
        assert!(matches!(steady_state_n(&rates), Err(Error::NetHeating { .. })));
    }

    #[test]
    fn narrow_line_red_sideband_dominates() {
        // γ ≪ ν with the drive parked one trap frequency below resonance:
        // phonon-removing absorption is resonant, phonon-adding is far off.
        let rates = rate_coefficients(
            two_level_w(0.05, 0.5),
            -10.0,
            10.0,
            0.1,
            1.0,
            ISOTROPIC_RECOIL_ALPHA,
        )
        .unwrap();
        assert!(
            rates.cooling_mhz > 100.0 * rates.heating_mhz,
            "A- = {}, A+ = {}",
            rates.cooling_mhz,
            rates.heating_mhz
        );
        assert!(steady_state_n(&rates).unwrap() < 0.02);
    }

    #[test]
    fn dark_carrier_removes_the_recoil_term() {
        // Equal drive detunings put the carrier on the dark resonance, so the
        // α·W(Δ) term contributes nothing and α becomes irrelevant.
        let scheme = lambda_scheme(1.0, 20.0, 50.0, 50.0, 20.0).unwrap();
        let laser = scheme.laser_index("g", "e").unwrap();
        let spectrum = |x: f64| crate::bloch::scattering_rate_at(&scheme, laser, x);
        let with_recoil = rate_coefficients(spectrum, 50.0, 2.0, 0.145, 1.0, 1.0).unwrap();
        let without = rate_coefficients(spectrum, 50.0, 2.0, 0.145, 1.0, 0.0).unwrap();
        let scale = with_recoil.cooling_mhz;
        assert!((with_recoil.heating_mhz - without.heating_mhz).abs() < 1e-10 * scale);
        assert!((with_recoil.cooling_mhz - without.cooling_mhz).abs() < 1e-10 * scale);
    }

    #[test]
    fn broad_line_reference_occupations() {
        // Moderately saturated broad-line cooling at Δ = −γ/2 along the trap
        // axis: frozen values from the closed-form Lorentzian arithmetic.
        let w = two_level_w(6.0, 20.0);
        let fast = rate_coefficients(&w, -10.0, 3.32, 0.1, 1.0, 1.0).unwrap();
        let slow = rate_coefficients(&w, -10.0, 1.62, 0.1, 1.0, 1.0).unwrap();
        let m_fast = steady_state_n(&fast).unwrap();
        let m_slow = steady_state_n(&slow).unwrap();
        assert!((m_fast - 2.8839).abs() < 2e-3, "m_fast = {m_fast}");
        assert!((m_slow - 6.2761).abs() < 2e-3, "m_slow = {m_slow}");
    }

    #[test]
    fn zero_heating_means_ground_state() {
        let rates = CoolingRates::try_new(0.0, 1.0).unwrap();
        assert_eq!(steady_state_n(&rates).unwrap(), 0.0);
    }

    #[test]
    fn net_heating_error_carries_both_values() {
        let rates = CoolingRates::try_new(2.0, 1.0).unwrap();
        match steady_state_n(&rates) {
            Err(Error::NetHeating { heating, cooling }) => {
                assert_eq!(heating, 2.0);
                assert_eq!(cooling, 1.0);
            }
            other => panic!("expected net-heating error, got {other:?}"),
        }
        assert!(cooling_time_us(&CoolingRates::try_new(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn unit_net_rate_gives_unit_time_constant() {
        let rates = CoolingRates::try_new(0.5, 1.5).unwrap();
        assert_eq!(cooling_time_us(&rates).unwrap(), 1.0);
    }

    #[test]
    fn doubling_lamb_dicke_quarters_the_time_constant_only() {
        let w = two_level_w(2.0, 20.0);
        let base = rate_coefficients(&w, -10.0, 2.0, 0.1, 0.8, 0.3).unwrap();
        let doubled = rate_coefficients(&w, -10.0, 2.0, 0.2, 0.8, 0.3).unwrap();
        let tau_ratio = cooling_time_us(&doubled).unwrap() / cooling_time_us(&base).unwrap();
        assert!((tau_ratio - 0.25).abs() < 1e-12);
        let m_ratio = steady_state_n(&doubled).unwrap() / steady_state_n(&base).unwrap();
        assert!((m_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_is_invariant_under_lamb_dicke_and_spectrum_scaling() {
        let mut rng = StdRng::seed_from_u64(0x51de_ba9d);
        let w = two_level_w(1.0, 20.0);
        let reference = rate_coefficients(&w, -10.0, 2.0, 0.1, 1.0, 1.0 / 3.0).unwrap();
        let m_ref = steady_state_n(&reference).unwrap();
        let tau_ref = cooling_time_us(&reference).unwrap();
        for _ in 0..50 {
            let c: f64 = rng.random_range(0.1..10.0);
            let scaled_eta =
                rate_coefficients(&w, -10.0, 2.0, 0.1 * c, 1.0, 1.0 / 3.0).unwrap();
            let m = steady_state_n(&scaled_eta).unwrap();
            assert!((m - m_ref).abs() < 1e-12 * m_ref.max(1.0), "c = {c}");

            // Scaling the spectrum itself: m̄ fixed, rate 1/τ scales with c.
            let scaled_w =
                rate_coefficients(|x| Ok(two_level_w(1.0, 20.0)(x)? * c), -10.0, 2.0, 0.1, 1.0, 1.0 / 3.0)
                    .unwrap();
            let m = steady_state_n(&scaled_w).unwrap();
            let tau = cooling_time_us(&scaled_w).unwrap();
            assert!((m - m_ref).abs() < 1e-9 * m_ref.max(1.0));
            assert!((tau * c - tau_ref).abs() < 1e-9 * tau_ref);
        }
    }

    #[test]
    fn broad_line_limit_law() {
        // Weak drive at Δ = −γ/2 with the line at least ten times wider than
        // the trap frequency: m̄·ν stays within 10% of γ/2.
        let mut rng = StdRng::seed_from_u64(0xd0bb_1e);
        for _ in 0..50 {
            let gamma: f64 = rng.random_range(1.0..100.0);
            let ratio: f64 = rng.random_range(10.0..60.0);
            let nu = gamma / ratio;
            let rates = rate_coefficients(
                two_level_w(gamma / 100.0, gamma),
                -gamma / 2.0,
                nu,
                0.05,
                1.0,
                1.0,
            )
            .unwrap();
            let product = steady_state_n(&rates).unwrap() * nu;
            assert!(
                product > 0.45 * gamma && product < 0.55 * gamma,
                "γ = {gamma}, ν = {nu}: m̄ν = {product}"
            );
        }
    }

    #[test]
    fn occupation_minimum_sits_where_light_shift_matches_trap_frequency() {
        // With both detunings equal, scan the coupling strength: the best
        // limit appears where the dressed-state shift equals ν.
        let (gamma, delta, nu) = (20.0, 50.0, 2.0);
        let mut best: Option<(f64, f64)> = None;
        for i in 0..31 {
            let omega_r = 10.0 + i as f64;
            let scheme = lambda_scheme(1.0, omega_r, delta, delta, gamma).unwrap();
            let mode = TrapMode::new(nu, 0.1, ISOTROPIC_RECOIL_ALPHA).unwrap();
            let rates = scheme_rate_coefficients(&scheme, "g", "e", &mode).unwrap();
            let mbar = steady_state_n(&rates).unwrap();
            if best.map_or(true, |(_, m)| mbar < m) {
                best = Some((omega_r, mbar));
            }
        }
        let (omega_best, _) = best.unwrap();
        let shift = crate::bloch::ac_stark_shift(omega_best, delta);
        assert!(
            (shift - nu).abs() <= 0.2 * nu,
            "best coupling {omega_best} MHz gives shift {shift} MHz vs ν = {nu} MHz"
        );
    }

    #[test]
    fn thermal_distribution_reference_points() {
        let frozen = thermal_distribution(0.0, 10).unwrap();
        assert_eq!(frozen.probabilities()[0], 1.0);
        assert!(frozen.probabilities()[1..].iter().all(|&p| p == 0.0));
        assert_eq!(frozen.mean_n(), 0.0);

        let unit = thermal_distribution(1.0, 200).unwrap();
        assert!((unit.probabilities()[0] - 0.5).abs() < 1e-12);
        assert!((unit.probabilities()[1] - 0.25).abs() < 1e-12);

        for mbar in [0.3f64, 1.0, 3.7] {
            let n_max = (40.0 * (1.0 + mbar)).ceil() as usize;
            let dist = thermal_distribution(mbar, n_max).unwrap();
            assert!(
                (dist.mean_n() - mbar).abs() < 1e-9,
                "m̄ = {mbar}: first moment {}",
                dist.mean_n()
            );
            assert!(dist.truncation_loss() < 1e-7);
        }
    }

    /// Independent oracle: the steady state of the truncated birth–death
    /// generator, found as the null vector of its explicit matrix.
    fn brute_force_steady(a_plus: f64, a_minus: f64, n_max: usize) -> Vec<f64> {
        let d = n_max + 1;
        let mut gen = DMatrix::<f64>::zeros(d, d);
        for n in 0..d {
            if n < n_max {
                gen[(n + 1, n)] += a_plus * (n as f64 + 1.0);
                gen[(n, n)] -= a_plus * (n as f64 + 1.0);
            }
            if n > 0 {
                gen[(n - 1, n)] += a_minus * n as f64;
                gen[(n, n)] -= a_minus * n as f64;
            }
        }
        for col in 0..d {
            gen[(0, col)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(d);
        rhs[0] = 1.0;
        let solution = gen.full_piv_lu().solve(&rhs).unwrap();
        solution.iter().copied().collect()
    }

    #[test]
    fn relaxation_reaches_the_null_vector_thermal_state() {
        let (a_plus, a_minus, n_max) = (0.3, 1.0, 80);
        let rates = CoolingRates::try_new(a_plus, a_minus).unwrap();
        let mbar = steady_state_n(&rates).unwrap();

        let oracle = brute_force_steady(a_plus, a_minus, n_max);
        let thermal = thermal_distribution(mbar, n_max).unwrap();
        let oracle_vs_thermal = oracle
            .iter()
            .zip(thermal.probabilities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(oracle_vs_thermal < 1e-10, "null vector deviates {oracle_vs_thermal}");

        // Relax a deliberately wrong start far past the time constant.
        let start = thermal_distribution(4.0, n_max).unwrap();
        let relaxed =
            evolve_populations(&rates, &start, 60.0 * cooling_time_us(&rates).unwrap())
                .unwrap();
        let deviation = relaxed
            .probabilities()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(deviation < 1e-6, "relaxed state deviates {deviation}");
    }

    #[test]
    fn frozen_rates_freeze_the_distribution() {
        let rates = CoolingRates::try_new(0.0, 0.0).unwrap();
        let p0 = thermal_distribution(2.0, 40).unwrap();
        let p1 = evolve_populations(&rates, &p0, 17.0).unwrap();
        assert_eq!(p0.probabilities(), p1.probabilities());
        let n = evolve_mean_n(&rates, 3.0, &[0.0, 5.0]).unwrap();
        assert_eq!(n, vec![3.0, 3.0]);
    }

    #[test]
    fn first_moment_of_populations_tracks_closed_form() {
        let cases = [
            (0.2, 1.0), // net cooling
            (0.9, 1.1), // slow net cooling
            (0.12, 0.1), // net heating, short horizon
        ];
        for (a_plus, a_minus) in cases {
            let rates = CoolingRates::try_new(a_plus, a_minus).unwrap();
            let p0 = thermal_distribution(2.0, 120).unwrap();
            let t = 3.0;
            let evolved = evolve_populations(&rates, &p0, t).unwrap();
            let closed = evolve_mean_n(&rates, p0.mean_n(), &[t]).unwrap()[0];
            assert!(
                (evolved.mean_n() - closed).abs() < 1e-8,
                "A+ = {a_plus}, A- = {a_minus}: {} vs {closed}",
                evolved.mean_n()
            );
        }
    }

    #[test]
    fn evolution_endpoints_match_start_and_limit() {
        let rates = CoolingRates::try_new(0.4, 1.4).unwrap();
        let n0 = 5.0;
        let values = evolve_mean_n(&rates, n0, &[0.0, 1e4]).unwrap();
        assert_eq!(values[0], n0);
        let mbar = steady_state_n(&rates).unwrap();
        assert!((values[1] - mbar).abs() < 1e-12);
        // Decay constant equals the cooling time: at t = τ the residual has
        // shrunk by exactly 1/e.
        let tau = cooling_time_us(&rates).unwrap();
        let at_tau = evolve_mean_n(&rates, n0, &[tau]).unwrap()[0];
        assert!(((at_tau - mbar) / (n0 - mbar) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn undersized_phonon_space_is_reported_and_doubling_recovers() {
        let rates = CoolingRates::try_new(0.9, 1.0).unwrap(); // m̄ = 9
        let p0 = thermal_distribution(0.5, 5).unwrap();
        match evolve_populations(&rates, &p0, 200.0) {
            Err(Error::Truncation { leakage, n_max }) => {
                assert!(leakage > 1e-6);
                assert_eq!(n_max, 5);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
        let recovered = evolve_thermal(&rates, 0.5, 200.0).unwrap();
        assert!((recovered.mean_n() - 9.0).abs() < 0.01);
        assert!(recovered.truncation_loss() < 1e-6);
    }

    #[test]
    fn degenerate_band_equals_direct_computation() {
        let scheme = lambda_scheme(0.1, 1.2, 10.0, 10.0, 6.0).unwrap();
        let species = PhysicalSpecies { mass_amu: 86.909_180_5, wavelength_nm: 780.241 };
        let rows =
            band_sweep(&scheme, "g", "e", &species, 1.0 / 3.0, 0.04, 0.04, 7).unwrap();
        assert_eq!(rows.len(), 1);
        let eta = trap::lamb_dicke(species, 0.04, 1.0).unwrap();
        let direct = rate_coefficients(
            |x| {
                crate::bloch::scattering_rate_at(
                    &scheme,
                    scheme.laser_index("g", "e").unwrap(),
                    x,
                )
            },
            10.0,
            0.04,
            eta,
            1.0,
            1.0 / 3.0,
        )
        .unwrap();
        assert_eq!(rows[0].status, "ok");
        assert!((rows[0].mbar.unwrap() - steady_state_n(&direct).unwrap()).abs() < 1e-12);
        assert!((rows[0].tau_us.unwrap() - cooling_time_us(&direct).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn heating_points_are_reported_in_row() {
        use crate::scheme::two_level_scheme;
        // Drive above resonance: blue-sideband absorption wins, no limit.
        let scheme = two_level_scheme(0.5, 10.0, 20.0).unwrap();
        let species = PhysicalSpecies { mass_amu: 40.0, wavelength_nm: 397.0 };
        let rows = band_sweep(&scheme, "g", "e", &species, 1.0, 1.0, 2.0, 3).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.status, "net-heating");
            assert!(row.mbar.is_none() && row.tau_us.is_none());
        }
    }

    #[test]
    fn saturation_warning_threshold() {
        let quiet = lambda_scheme(1.0, 20.0, 50.0, 50.0, 20.0).unwrap();
        assert!(saturation_warning(&quiet, "g", "e").unwrap().is_none());
        let loud = lambda_scheme(5.0, 20.0, 50.0, 50.0, 20.0).unwrap();
        assert!(saturation_warning(&loud, "g", "e").unwrap().is_some());
    }
}
