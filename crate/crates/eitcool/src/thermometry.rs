//! Simulated vibrational-state measurement: sideband-ratio thermometry with
//! shot statistics, shelving-shot synthesis, and Rabi-flop signal synthesis
//! and fitting.
//!
//! The thermal workhorse identity: for p_n geometric with mean m̄, the ratio
//! of red- to blue-sideband excitation Σp_n·sin²(x√n) / Σp_n·sin²(x√(n+1))
//! equals m̄/(m̄+1) at every pulse area x, so the ratio estimator needs no
//! pulse calibration. Flop probabilities use sin²(ηΩ√(n+1)·t) — the squared
//! two-level Rabi form with the √(n+1) blue-sideband frequency scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::ratecool;
use crate::Result;

/// Z-score of the reported two-sided intervals (95%).
const INTERVAL_Z: f64 = 1.96;
/// Bootstrap resamples behind the fit uncertainty.
const BOOTSTRAP_RESAMPLES: usize = 200;
/// Fixed stream for the (deterministic) bootstrap resampling.
const BOOTSTRAP_SEED: u64 = 0xb007_57a9;

/// Shelving outcomes on the two sidebands, `shots_per_side` each.
#[derive(Debug, Clone, Copy)]
pub struct SidebandCounts {
    pub red_excited: u64,
    pub blue_excited: u64,
    pub shots_per_side: u64,
}

impl SidebandCounts {
    pub fn new(red_excited: u64, blue_excited: u64, shots_per_side: u64) -> Result<Self> {
        if shots_per_side == 0 {
            return Err(Error::Domain("sideband counts need at least one shot".into()));
        }
        if red_excited > shots_per_side || blue_excited > shots_per_side {
            return Err(Error::Domain(format!(
                "excitation counts ({red_excited} red, {blue_excited} blue) exceed \
                 {shots_per_side} shots per side"
            )));
        }
        Ok(SidebandCounts { red_excited, blue_excited, shots_per_side })
    }
}

/// Ratio-estimator output: point estimate and 95% interval (upper may be
/// infinite when the counts cannot bound it).
#[derive(Debug, Clone, Copy)]
pub struct ThermalEstimate {
    pub mbar: f64,
    pub interval: (f64, f64),
}

fn ratio_to_mbar(ratio: f64) -> f64 {
    if ratio >= 1.0 {
        f64::INFINITY
    } else {
        ratio / (1.0 - ratio)
    }
}

/// Invert the measured sideband ratio: R = red/blue, m̄ = R/(1−R). The
/// interval propagates the two binomial standard errors through ln R (the
/// delta method on the log-ratio covers better than the plain ratio for
/// small counts), mapped through the monotone R ↦ R/(1−R). A zero red
/// count gives m̄ = 0 with a one-sided interval whose upper limit takes the
/// rule-of-three bound 3/shots for the unobserved red probability.
pub fn sideband_ratio_to_n(counts: &SidebandCounts) -> Result<ThermalEstimate> {
    let shots = counts.shots_per_side as f64;
    if counts.blue_excited == 0 {
        return Err(Error::Domain(
            "undefined sideband ratio: no blue-sideband excitation observed".into(),
        ));
    }
    let red = counts.red_excited as f64;
    let blue = counts.blue_excited as f64;

    if counts.red_excited == 0 {
        let ratio_up = (3.0 / shots) / (blue / shots);
        return Ok(ThermalEstimate { mbar: 0.0, interval: (0.0, ratio_to_mbar(ratio_up)) });
    }

    let ratio = red / blue;
    if ratio >= 1.0 {
        return Err(Error::Domain(format!(
            "sideband ratio {ratio:.3} out of thermal range [0, 1): \
             non-thermal data or failed statistics"
        )));
    }
    // Var(ln R) = relative variances of the two binomial proportions.
    let log_var = (1.0 - red / shots) / red + (1.0 - blue / shots) / blue;
    let spread = INTERVAL_Z * log_var.sqrt();
    let lo = ratio_to_mbar(ratio * (-spread).exp());
    let hi = ratio_to_mbar(ratio * spread.exp());
    Ok(ThermalEstimate { mbar: ratio_to_mbar(ratio), interval: (lo.max(0.0), hi) })
}

/// Thermal ground-state probability p₀ = 1/(m̄+1).
pub fn ground_state_probability(mbar: f64) -> f64 {
    1.0 / (mbar + 1.0)
}

/// Draw a Fock number from the geometric thermal law with mean `mbar`.
fn draw_thermal_n(rng: &mut ChaCha8Rng, mbar: f64) -> u64 {
    if mbar <= 0.0 {
        return 0;
    }
    let ratio = mbar / (mbar + 1.0);
    let u: f64 = rng.random();
    // Smallest n with CDF(n) = 1 − ratio^(n+1) ≥ u.
    ((1.0 - u).ln() / ratio.ln()).floor().max(0.0) as u64
}

/// Synthesize one shelving run: `shots` red-sideband probes and `shots`
/// blue-sideband probes on fresh thermal draws, pulse area x = ηΩt, with
/// per-shot excitation probabilities sin²(x√n) and sin²(x√(n+1)).
/// Deterministic for a given seed.
pub fn simulate_shelving(
    mbar: f64,
    eta: f64,
    omega_mhz: f64,
    pulse_time_us: f64,
    shots: u64,
    seed: u64,
) -> Result<SidebandCounts> {
    if !(mbar >= 0.0) || !mbar.is_finite() {
        return Err(Error::Domain(format!("mean occupation must be ≥ 0, got {mbar}")));
    }
    if !(eta.is_finite() && omega_mhz >= 0.0 && pulse_time_us >= 0.0) {
        return Err(Error::Domain(
            "shelving needs finite η and non-negative Ω and pulse time".into(),
        ));
    }
    if shots == 0 {
        return Err(Error::Domain("shelving needs at least one shot".into()));
    }
    let x = eta * omega_mhz * pulse_time_us;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut excite = |frequency_scale: fn(u64) -> f64| -> u64 {
        let mut count = 0;
        for _ in 0..shots {
            let n = draw_thermal_n(&mut rng, mbar);
            let p = (x * frequency_scale(n)).sin().powi(2);
            if rng.random::<f64>() < p {
                count += 1;
            }
        }
        count
    };
    let red_excited = excite(|n| (n as f64).sqrt());
    let blue_excited = excite(|n| (n as f64 + 1.0).sqrt());
    SidebandCounts::new(red_excited, blue_excited, shots)
}

/// Rabi-flop record: times, excitation probabilities, and the shot count
/// behind each point (0 = noiseless synthetic).
#[derive(Debug, Clone)]
pub struct RabiDataset {
    pub times_us: Vec<f64>,
    pub excitation: Vec<f64>,
    pub shots: u64,
}

impl RabiDataset {
    pub fn new(times_us: Vec<f64>, excitation: Vec<f64>, shots: u64) -> Result<Self> {
        if times_us.len() != excitation.len() {
            return Err(Error::Domain(format!(
                "dataset lengths differ: {} times vs {} probabilities",
                times_us.len(),
                excitation.len()
            )));
        }
        if times_us.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Domain("times must be finite and ≥ 0".into()));
        }
        if excitation.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("excitation probabilities must lie in [0, 1]".into()));
        }
        Ok(RabiDataset { times_us, excitation, shots })
    }
}

fn signal_n_max(mbar: f64) -> usize {
    (20.0 * (1.0 + mbar)).ceil().max(60.0) as usize
}

/// Model blue-sideband flop: P(t) = Σ_n p_n(m̄)·sin²(ηΩ√(n+1)·t), with an
/// optional exponential contrast decay on the oscillatory part
/// (`decay_per_us` = 0 recovers the pure form).
fn model_excitation(
    probabilities: &[f64],
    x_per_us: f64,
    decay_per_us: f64,
    t_us: f64,
) -> f64 {
    // sin²θ = (1 − cos2θ)/2; decay damps only the coherence.
    let envelope = (-decay_per_us * t_us).exp();
    let mut value = 0.0;
    for (n, p) in probabilities.iter().enumerate() {
        let theta = 2.0 * x_per_us * (n as f64 + 1.0).sqrt() * t_us;
        value += p * (1.0 - envelope * theta.cos()) / 2.0;
    }
    value.clamp(0.0, 1.0)
}

/// Noiseless blue-sideband Rabi signal for a thermal state.
pub fn rabi_signal(mbar: f64, eta: f64, omega_mhz: f64, times_us: &[f64]) -> Result<RabiDataset> {
    rabi_signal_with_decay(mbar, eta, omega_mhz, 0.0, times_us)
}

/// As [`rabi_signal`], with an exponential contrast decay rate in µs⁻¹.
pub fn rabi_signal_with_decay(
    mbar: f64,
    eta: f64,
    omega_mhz: f64,
    decay_per_us: f64,
    times_us: &[f64],
) -> Result<RabiDataset> {
    if !(mbar >= 0.0) || !mbar.is_finite() {
        return Err(Error::Domain(format!("mean occupation must be ≥ 0, got {mbar}")));
    }
    if !(decay_per_us >= 0.0) {
        return Err(Error::Domain(format!("contrast decay must be ≥ 0, got {decay_per_us}")));
    }
    let distribution = ratecool::thermal_distribution(mbar, signal_n_max(mbar))?;
    let x = eta * omega_mhz;
    let excitation: Vec<f64> = times_us
        .iter()
        .map(|&t| model_excitation(distribution.probabilities(), x, decay_per_us, t))
        .collect();
    RabiDataset::new(times_us.to_vec(), excitation, 0)
}

/// Replace each probability with a binomial sample mean over `shots`
/// measurements. Deterministic for a given seed.
pub fn with_binomial_noise(data: &RabiDataset, shots: u64, seed: u64) -> Result<RabiDataset> {
    if shots == 0 {
        return Err(Error::Domain("binomial noise needs at least one shot".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy: Vec<f64> = data
        .excitation
        .iter()
        .map(|&p| {
            let mut hits = 0u64;
            for _ in 0..shots {
                if rng.random::<f64>() < p {
                    hits += 1;
                }
            }
            hits as f64 / shots as f64
        })
        .collect();
    RabiDataset::new(data.times_us.clone(), noisy, shots)
}

/// Thermal-fit result: point estimates, bootstrap standard errors, the
/// residual sum of squares, and the implied ground-state probability.
#[derive(Debug, Clone, Copy)]
pub struct ThermalFit {
    pub mbar: f64,
    pub mbar_sigma: f64,
    pub omega_mhz: f64,
    pub omega_sigma: f64,
    pub residual_sum_squares: f64,
    pub ground_state_probability: f64,
}

/// Softplus transform keeping the fitted occupation non-negative.
fn softplus(theta: f64) -> f64 {
    if theta > 30.0 {
        theta
    } else {
        theta.exp().ln_1p()
    }
}

fn softplus_inverse(mbar: f64) -> f64 {
    if mbar > 30.0 {
        mbar
    } else {
        mbar.exp_m1().max(1e-300).ln()
    }
}

fn fit_residual(times: &[f64], excitation: &[f64], eta: f64, theta: f64, omega: f64) -> f64 {
    let mbar = softplus(theta);
    if !mbar.is_finite() || mbar > 1e4 || !omega.is_finite() {
        return f64::INFINITY;
    }
    let distribution = match ratecool::thermal_distribution(mbar, signal_n_max(mbar)) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    let x = eta * omega;
    times
        .iter()
        .zip(excitation)
        .map(|(&t, &y)| {
            let model = model_excitation(distribution.probabilities(), x, 0.0, t);
            (model - y) * (model - y)
        })
        .sum()
}

/// Two-parameter Nelder–Mead descent on (θ, Ω); returns the best vertex.
fn simplex_minimize<F: Fn(f64, f64) -> f64>(
    objective: F,
    start: (f64, f64),
    scale: (f64, f64),
    max_iterations: usize,
) -> ((f64, f64), f64) {
    let mut vertices = [
        (start, objective(start.0, start.1)),
        ((start.0 + scale.0, start.1), objective(start.0 + scale.0, start.1)),
        ((start.0, start.1 + scale.1), objective(start.0, start.1 + scale.1)),
    ];
    for _ in 0..max_iterations {
        vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = vertices[2].1 - vertices[0].1;
        let size = (vertices[1].0 .0 - vertices[0].0 .0).abs()
            + (vertices[2].0 .0 - vertices[0].0 .0).abs()
            + (vertices[1].0 .1 - vertices[0].0 .1).abs()
            + (vertices[2].0 .1 - vertices[0].0 .1).abs();
        if spread <= 1e-16 * (1.0 + vertices[0].1.abs()) && size < 1e-10 {
            break;
        }
        let best = vertices[0].0;
        let second = vertices[1].0;
        let worst = vertices[2];
        let centroid = ((best.0 + second.0) / 2.0, (best.1 + second.1) / 2.0);
        let reflect = (2.0 * centroid.0 - worst.0 .0, 2.0 * centroid.1 - worst.0 .1);
        let f_reflect = objective(reflect.0, reflect.1);
        if f_reflect < vertices[0].1 {
            let expand = (2.0 * reflect.0 - centroid.0, 2.0 * reflect.1 - centroid.1);
            let f_expand = objective(expand.0, expand.1);
            vertices[2] =
                if f_expand < f_reflect { (expand, f_expand) } else { (reflect, f_reflect) };
        } else if f_reflect < vertices[1].1 {
            vertices[2] = (reflect, f_reflect);
        } else {
            let contract = (
                centroid.0 + 0.5 * (worst.0 .0 - centroid.0),
                centroid.1 + 0.5 * (worst.0 .1 - centroid.1),
            );
            let f_contract = objective(contract.0, contract.1);
            if f_contract < worst.1 {
                vertices[2] = (contract, f_contract);
            } else {
                // Shrink toward the best vertex.
                for k in 1..3 {
                    let shrunk = (
                        best.0 + 0.5 * (vertices[k].0 .0 - best.0),
                        best.1 + 0.5 * (vertices[k].0 .1 - best.1),
                    );
                    vertices[k] = (shrunk, objective(shrunk.0, shrunk.1));
                }
            }
        }
    }
    vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
    (vertices[0].0, vertices[0].1)
}

/// Dominant angular frequency of the mean-subtracted signal on a possibly
/// uneven time grid, by direct periodogram scan.
fn dominant_angular_frequency(times: &[f64], excitation: &[f64]) -> Option<f64> {
    let span = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - times.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return None;
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mean = excitation.iter().sum::<f64>() / excitation.len() as f64;
    let (omega_lo, omega_hi) = (std::f64::consts::PI / (2.0 * span), std::f64::consts::PI / min_gap);
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..800 {
        let omega = omega_lo + (omega_hi - omega_lo) * k as f64 / 799.0;
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &y) in times.iter().zip(excitation) {
            re += (y - mean) * (omega * t).cos();
            im += (y - mean) * (omega * t).sin();
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (omega, power);
        }
    }
    Some(best.0)
}

/// Least-squares fit of (m̄, Ω) to the thermal flop model: coarse search
/// over a log grid of occupations and periodogram-anchored frequencies,
/// then simplex refinement in (softplus⁻¹ m̄, Ω). Bootstrap resampling of
/// the points supplies the standard errors.
pub fn fit_thermal(data: &RabiDataset, eta: f64) -> Result<ThermalFit> {
    if !(eta.is_finite() && eta != 0.0) {
        return Err(Error::Fit(format!("Lamb-Dicke factor {eta} cannot anchor a flop fit")));
    }
    if data.times_us.len() < 8 {
        return Err(Error::Fit(format!(
            "need at least 8 points spanning an oscillation, got {}",
            data.times_us.len()
        )));
    }
    let times = &data.times_us;
    let excitation = &data.excitation;
    let (y_min, y_max) = excitation
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if y_max - y_min < 1e-9 {
        return Err(Error::Fit(format!(
            "signal is constant at {y_max:.3}; no oscillation to fit"
        )));
    }

    // The flop oscillates at 2ηΩ√(n+1); anchor Ω on the dominant component
    // and let the coarse grid absorb the thermal frequency spread.
    let omega_anchor = dominant_angular_frequency(times, excitation)
        .ok_or_else(|| Error::Fit("time grid has no spread".into()))?
        / (2.0 * eta.abs());
    let omega_factors = [0.35, 0.5, 0.7, 0.85, 1.0, 1.15, 1.4, 2.0];
    let mbar_grid: Vec<f64> =
        (0..25).map(|k| 1e-3 * (50.0f64 / 1e-3).powf(k as f64 / 24.0)).collect();
    let mut coarse = ((0.0, omega_anchor), f64::INFINITY);
    for &factor in &omega_factors {
        let omega = omega_anchor * factor;
        for &mbar in &mbar_grid {
            let theta = softplus_inverse(mbar);
            let rss = fit_residual(times, excitation, eta, theta, omega);
            if rss < coarse.1 {
                coarse = ((theta, omega), rss);
            }
        }
    }
    if !coarse.1.is_finite() {
        return Err(Error::Fit("coarse search found no finite residual".into()));
    }

    let objective = |theta: f64, omega: f64| fit_residual(times, excitation, eta, theta, omega);
    let scale = (0.5, 0.05 * coarse.0 .1.abs().max(1e-3));
    let ((theta, omega), rss) = simplex_minimize(&objective, coarse.0, scale, 600);
    let mbar = softplus(theta);
    if !rss.is_finite() {
        return Err(Error::Fit("simplex refinement diverged".into()));
    }

    // Identifiability: under a quarter oscillation only Ω²(m̄+1) is fixed.
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pulse_area = (eta * omega).abs() * t_max;
    if pulse_area < std::f64::consts::FRAC_PI_4 {
        return Err(Error::Fit(format!(
            "data cover {:.2} rad < π/4 of the flop; occupation and Rabi frequency \
             are degenerate (only Ω²(m̄+1) is determined) — extend the scan",
            pulse_area
        )));
    }

    // Case-resampling bootstrap, refitting from the optimum.
    let estimates: Vec<(f64, f64)> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .filter_map(|resample| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED.wrapping_add(resample as u64));
            let n = times.len();
            let (mut t_sample, mut y_sample) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let pick = rng.random_range(0..n);
                t_sample.push(times[pick]);
                y_sample.push(excitation[pick]);
            }
            let resampled =
                |th: f64, om: f64| fit_residual(&t_sample, &y_sample, eta, th, om);
            let ((th, om), f) = simplex_minimize(&resampled, (theta, omega), scale, 150);
            f.is_finite().then(|| (softplus(th), om))
        })
        .collect();
    let spread = |values: &[f64]| -> f64 {
        if values.len() < 2 {
            return 0.0;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (values.len() - 1) as f64)
            .sqrt()
    };
    let mbars: Vec<f64> = estimates.iter().map(|e| e.0).collect();
    let omegas: Vec<f64> = estimates.iter().map(|e| e.1).collect();

    Ok(ThermalFit {
        mbar,
        mbar_sigma: spread(&mbars),
        omega_mhz: omega,
        omega_sigma: spread(&omegas),
        residual_sum_squares: rss,
        ground_state_probability: ground_state_probability(mbar),
    })
}
