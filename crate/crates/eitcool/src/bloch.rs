//! Optical Bloch equations: steady states of driven, damped level schemes,
//! photon scattering rates, absorption spectra, and resonance geometry.
//!
//! The master equation is solved in the rotating frame fixed by the scheme's
//! drive detunings. Steady states come from a dense linear solve of the
//! vectorized generator with one row replaced by the trace condition; the
//! solver refuses near-degenerate generators (population trapped in a
//! decoupled subspace) instead of returning garbage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Error;
use crate::numeric;
use crate::scheme::LevelScheme;
use crate::Result;

/// Pivot-magnitude spread beyond which the trace-replaced generator counts
/// as singular (steady state not unique to working precision).
const SINGULAR_PIVOT_RATIO: f64 = 1e13;

/// A validated density matrix: Hermitian, unit trace, positive to tolerance.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
    hermiticity_defect: f64,
    min_eigenvalue: f64,
}

impl DensityMatrix {
    /// Validate a raw matrix. The input may carry numerical noise: it must be
    /// Hermitian to 1e-10 (relative), have trace 1 to 1e-10, and eigenvalues
    /// above −1e-6. The stored matrix is exactly hermitized and renormalized;
    /// eigenvalue dips between −1e-6 and −1e-9 are tolerated as noise and
    /// reported via [`DensityMatrix::min_eigenvalue`].
    pub fn try_new(raw: DMatrix<Complex64>) -> Result<Self> {
        if raw.nrows() != raw.ncols() || raw.nrows() == 0 {
            return Err(Error::Domain(format!(
                "density matrix must be square and non-empty, got {}x{}",
                raw.nrows(),
                raw.ncols()
            )));
        }
        let magnitude = raw.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        let mut defect = 0.0f64;
        for i in 0..raw.nrows() {
            for j in i..raw.ncols() {
                defect = defect.max((raw[(i, j)] - raw[(j, i)].conj()).norm());
            }
        }
        let defect = defect / magnitude;
        if defect > 1e-10 {
            return Err(Error::Numerical(format!(
                "density matrix is not Hermitian: relative defect {defect:.3e} > 1e-10"
            )));
        }

        let mut herm = (raw.adjoint() + raw) * Complex64::new(0.5, 0.0);
        let trace = herm.trace();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "density matrix trace {} deviates from 1 beyond 1e-10",
                trace.re
            )));
        }
        herm /= Complex64::new(trace.re, 0.0);

        let min_eigenvalue = herm
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, &v| acc.min(v));
        if min_eigenvalue < -1e-6 {
            return Err(Error::Numerical(format!(
                "density matrix not positive: eigenvalue {min_eigenvalue:.3e} < -1e-6"
            )));
        }

        Ok(DensityMatrix { matrix: herm, hermiticity_defect: defect, min_eigenvalue })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Diagonal population, clipped at zero (numerical dips up to 1e-9 occur).
    pub fn population(&self, level: usize) -> f64 {
        self.matrix[(level, level)].re.max(0.0)
    }

    pub fn coherence(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Pre-symmetrization Hermiticity defect of the raw input (diagnostic).
    pub fn hermiticity_defect(&self) -> f64 {
        self.hermiticity_defect
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

/// An absorption spectrum: scattering rate versus probe detuning.
#[derive(Debug, Clone)]
pub struct Spectrum {
    detunings_mhz: Vec<f64>,
    rates_mhz: Vec<f64>,
}

impl Spectrum {
    /// Detunings must be strictly increasing; rates below −1e-12 are
    /// rejected, small negative noise above that is clipped to zero.
    pub fn try_new(detunings_mhz: Vec<f64>, rates_mhz: Vec<f64>) -> Result<Self> {
        if detunings_mhz.len() != rates_mhz.len() {
            return Err(Error::Domain(
                "spectrum detuning and rate arrays differ in length".into(),
            ));
        }
        if detunings_mhz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "spectrum detunings must be strictly increasing".into(),
            ));
        }
        let mut clipped = rates_mhz;
        for r in &mut clipped {
            if *r < -1e-12 || !r.is_finite() {
                return Err(Error::Numerical(format!(
                    "spectrum contains invalid scattering rate {r:.3e} MHz"
                )));
            }
            *r = r.max(0.0);
        }
        Ok(Spectrum { detunings_mhz, rates_mhz: clipped })
    }

    pub fn detunings_mhz(&self) -> &[f64] {
        &self.detunings_mhz
    }

    pub fn rates_mhz(&self) -> &[f64] {
        &self.rates_mhz
    }

    pub fn len(&self) -> usize {
        self.detunings_mhz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings_mhz.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.rates_mhz.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Rotating-frame Hamiltonian of a scheme: detuning-derived diagonal plus
/// Ω/2 on each driven transition.
pub fn hamiltonian(scheme: &LevelScheme) -> DMatrix<Complex64> {
    let d = scheme.dim();
    let mut h = DMatrix::zeros(d, d);
    for (i, &e) in scheme.frame_energies().iter().enumerate() {
        h[(i, i)] = Complex64::new(e, 0.0);
    }
    for laser in scheme.lasers() {
        let lo = scheme.index_of(&laser.lower).unwrap();
        let up = scheme.index_of(&laser.upper).unwrap();
        let half = Complex64::new(laser.rabi_mhz / 2.0, 0.0);
        h[(up, lo)] += half;
        h[(lo, up)] += half;
    }
    h
}

/// Dense matrix of the master-equation generator acting on vec(ρ) with
/// row-major element order (entry i·d+j is ρ_ij).
pub fn liouvillian(scheme: &LevelScheme) -> DMatrix<Complex64> {
    let d = scheme.dim();
    let n = d * d;
    let h = hamiltonian(scheme);
    let idx = |i: usize, j: usize| i * d + j;
    let mut gen = DMatrix::<Complex64>::zeros(n, n);

    // Coherent part: −i(Hρ − ρH).
    let i_unit = Complex64::new(0.0, 1.0);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                gen[(idx(i, j), idx(k, j))] -= i_unit * h[(i, k)];
                gen[(idx(i, j), idx(i, k))] += i_unit * h[(k, j)];
            }
        }
    }

    // Decay channels: γ(CρC† − ½{C†C, ρ}) with C = |to⟩⟨from|.
    for channel in scheme.decays() {
        let from = scheme.index_of(&channel.from).unwrap();
        let to = scheme.index_of(&channel.to).unwrap();
        let g = channel.rate_mhz;
        gen[(idx(to, to), idx(from, from))] += Complex64::new(g, 0.0);
        let half = Complex64::new(g / 2.0, 0.0);
        for k in 0..d {
            gen[(idx(from, k), idx(from, k))] -= half;
            gen[(idx(k, from), idx(k, from))] -= half;
        }
    }

    gen
}

/// Steady state of the master equation.
///
/// Requires at least one decay channel. If the generator has a null space
/// beyond the trace deficiency (population trapped in a decoupled subspace),
/// the decoupled levels are named in the error instead of returning an
/// arbitrary mixture.
pub fn steady_state(scheme: &LevelScheme) -> Result<DensityMatrix> {
    if scheme.decays().is_empty() {
        return Err(Error::Domain(
            "steady state requires at least one decay channel".into(),
        ));
    }
    let d = scheme.dim();
    let n = d * d;
    let gen = liouvillian(scheme);
    let scale = gen.iter().map(|c| c.norm()).fold(0.0, f64::max);

    // Replace the ρ00 equation by the trace condition Σ ρ_kk = 1.
    let mut system = gen.clone();
    for col in 0..n {
        system[(0, col)] = Complex64::new(0.0, 0.0);
    }
    for k in 0..d {
        system[(0, k * d + k)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::<Complex64>::zeros(n);
    rhs[0] = Complex64::new(1.0, 0.0);

    let lu = system.full_piv_lu();
    let u_diag: Vec<f64> = (0..n).map(|k| lu.u()[(k, k)].norm()).collect();
    let pivot_max = u_diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let pivot_min = u_diag.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(pivot_min > 0.0) || pivot_max / pivot_min > SINGULAR_PIVOT_RATIO {
        return Err(degeneracy_error(scheme));
    }
    let solution = match lu.solve(&rhs) {
        Some(x) => x,
        None => return Err(degeneracy_error(scheme)),
    };

    // The solution must actually annihilate the full generator.
    let residual = (&gen * &solution)
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if residual > 1e-7 * (1.0 + scale) {
        return Err(degeneracy_error(scheme));
    }

    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            rho[(i, j)] = solution[i * d + j];
        }
    }
    DensityMatrix::try_new(rho)
}

fn degeneracy_error(scheme: &LevelScheme) -> Error {
    let components = scheme.population_flow_components();
    if components.len() > 1 {
        // Name everything outside the largest component.
        let largest = components
            .iter()
            .enumerate()
            .max_by_key(|(_, c)| c.len())
            .map(|(i, _)| i)
            .unwrap();
        let mut subspace = Vec::new();
        for (i, component) in components.iter().enumerate() {
            if i != largest {
                subspace.extend(scheme.labels_of(component));
            }
        }
        Error::NonUniqueSteadyState { subspace }
    } else {
        Error::Numerical(
            "steady-state generator is singular beyond the trace deficiency; \
             the scheme relaxes too slowly or holds a fully dark subspace"
                .into(),
        )
    }
}

/// Total photon scattering rate W = Σ_channels γ_k ρ(from_k, from_k), MHz.
pub fn scattering_rate(scheme: &LevelScheme, rho: &DensityMatrix) -> f64 {
    scheme
        .decays()
        .iter()
        .map(|c| c.rate_mhz * rho.population(scheme.index_of(&c.from).unwrap()))
        .sum()
}

/// Convenience: steady-state scattering rate of the scheme as given.
pub fn steady_scattering_rate(scheme: &LevelScheme) -> Result<f64> {
    let rho = steady_state(scheme)?;
    Ok(scattering_rate(scheme, &rho))
}

/// Scattering rate with one laser's detuning replaced. The workhorse of
/// spectra and sideband sampling.
pub fn scattering_rate_at(
    scheme: &LevelScheme,
    probe_laser: usize,
    detuning_mhz: f64,
) -> Result<f64> {
    let shifted = scheme.with_laser_detuning(probe_laser, detuning_mhz)?;
    steady_scattering_rate(&shifted)
}

/// Absorption spectrum: steady scattering rate at each probe detuning.
/// Points are solved in parallel; any failed point aborts with an error that
/// lists where the solve broke down.
pub fn absorption_spectrum(
    scheme: &LevelScheme,
    probe_lower: &str,
    probe_upper: &str,
    detunings_mhz: &[f64],
) -> Result<Spectrum> {
    let laser = probe_laser_index(scheme, probe_lower, probe_upper)?;
    let rates: Vec<(f64, Result<f64>)> = detunings_mhz
        .par_iter()
        .map(|&delta| (delta, scattering_rate_at(scheme, laser, delta)))
        .collect();

    let failures: Vec<String> = rates
        .iter()
        .filter_map(|(delta, r)| r.as_ref().err().map(|e| format!("{delta} MHz: {e}")))
        .collect();
    if !failures.is_empty() {
        let shown = failures.iter().take(4).cloned().collect::<Vec<_>>().join("; ");
        return Err(Error::Numerical(format!(
            "spectrum solve failed at {} of {} detunings ({})",
            failures.len(),
            detunings_mhz.len(),
            shown
        )));
    }

    Spectrum::try_new(
        detunings_mhz.to_vec(),
        rates.into_iter().map(|(_, r)| r.unwrap()).collect(),
    )
}

/// Look up the laser driving `lower`-`upper`, with a domain error when absent.
pub fn probe_laser_index(scheme: &LevelScheme, lower: &str, upper: &str) -> Result<usize> {
    scheme
        .laser_index(lower, upper)
        .ok_or_else(|| Error::Domain(format!("no laser drives the {lower}-{upper} transition")))
}

/// Light shift of the narrow dressed resonance produced by a strong coupling
/// drive: δ = (√(Δ² + Ω²) − |Δ|)/2. This is the distance of the bright peak
/// from the dark-resonance point, on the side away from the coupling beam's
/// detuning sign.
pub fn ac_stark_shift(rabi_mhz: f64, detuning_mhz: f64) -> f64 {
    ((detuning_mhz * detuning_mhz + rabi_mhz * rabi_mhz).sqrt() - detuning_mhz.abs()) / 2.0
}

/// A located narrow resonance: position, height, and full width at half max.
#[derive(Debug, Clone, Copy)]
pub struct BrightResonance {
    pub detuning_mhz: f64,
    pub rate_mhz: f64,
    pub fwhm_mhz: f64,
}

/// Locate the absorption maximum inside a detuning window: coarse grid scan,
/// golden-section refinement to 1e-4 of the window width, then FWHM from
/// linear interpolation of the half-maximum crossings on the grid.
pub fn find_bright_resonance(
    scheme: &LevelScheme,
    probe_lower: &str,
    probe_upper: &str,
    window_mhz: (f64, f64),
    grid_points: usize,
) -> Result<BrightResonance> {
    let (lo, hi) = window_mhz;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!(
            "resonance window must be finite with hi > lo, got [{lo}, {hi}]"
        )));
    }
    if grid_points < 16 {
        return Err(Error::Domain(format!(
            "resonance grid needs at least 16 points, got {grid_points}"
        )));
    }
    let laser = probe_laser_index(scheme, probe_lower, probe_upper)?;

    let grid = numeric::linspace(lo, hi, grid_points);
    let rates: Vec<(f64, Result<f64>)> = grid
        .par_iter()
        .map(|&x| (x, scattering_rate_at(scheme, laser, x)))
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for (x, r) in rates {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                return Err(Error::Numerical(format!(
                    "resonance scan failed at {x} MHz: {e}"
                )))
            }
        }
    }

    let peak_index = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if peak_index == 0 || peak_index == grid.len() - 1 || values[peak_index] <= 0.0 {
        return Err(Error::NoPeak { lo, hi });
    }

    let tol = 1e-4 * (hi - lo);
    let refined = numeric::golden_max(grid[peak_index - 1], grid[peak_index + 1], tol, |x| {
        scattering_rate_at(scheme, laser, x)
    })?;
    let peak_rate = scattering_rate_at(scheme, laser, refined)?;
    let half = peak_rate / 2.0;

    // Half-max crossings on the coarse grid, linearly interpolated.
    let left = (0..peak_index)
        .rev()
        .find(|&i| values[i] < half)
        .map(|i| interp_crossing(grid[i], values[i], grid[i + 1], values[i + 1], half));
    let right = (peak_index + 1..grid.len())
        .find(|&i| values[i] < half)
        .map(|i| interp_crossing(grid[i - 1], values[i - 1], grid[i], values[i], half));
    let (left, right) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            return Err(Error::Domain(format!(
                "half-maximum crossings not contained in window [{lo}, {hi}] MHz; widen the window"
            )))
        }
    };

    Ok(BrightResonance {
        detuning_mhz: refined,
        rate_mhz: peak_rate,
        fwhm_mhz: right - left,
    })
}

fn interp_crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if (y1 - y0).abs() < f64::MIN_POSITIVE {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - y0) / (y1 - y0) * (x1 - x0)
}
