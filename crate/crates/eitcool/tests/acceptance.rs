//! Acceptance gate: one test per criterion, each printing a single
//! `[criterion N] PASS/FAIL — summary` line before asserting. Tolerances
//! are pinned in the code next to each check.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eitcool::bloch;
use eitcool::ionstring::{self, CoolingGeometry, IonString};
use eitcool::numeric::linspace;
use eitcool::ratecool::{self, CoolingRates};
use eitcool::scheme::{
    lambda_scheme, two_level_scheme, DecayChannel, LaserField, Level, LevelScheme,
};
use eitcool::thermometry;
use eitcool::trajectory::{self, TrajectoryConfig};
use eitcool::trap::{PhysicalSpecies, TrapMode};

const CA40: PhysicalSpecies =
    PhysicalSpecies { mass_amu: 39.962_590_9, wavelength_nm: 396.847 };
const RB87: PhysicalSpecies =
    PhysicalSpecies { mass_amu: 86.909_180_5, wavelength_nm: 780.241 };

/// Three-level system on the narrow cooling resonance: weak probe and
/// strong coupling beam both detuned +50 MHz, 20 MHz linewidth.
fn narrow_probe_scheme() -> LevelScheme {
    lambda_scheme(1.0, 20.0, 50.0, 50.0, 20.0).unwrap()
}

/// Same topology at the ten-ion operating point: +75 MHz detunings,
/// 30 MHz coupling beam, 0.5 MHz probe.
fn string_probe_scheme() -> LevelScheme {
    lambda_scheme(0.5, 30.0, 75.0, 75.0, 20.0).unwrap()
}

/// Four-level scheme where the excited state also decays into a shelf
/// level `d` that a resonant beam pumps back.
fn shelf_scheme() -> LevelScheme {
    let third = 64.0 / 3.0;
    LevelScheme::new(
        vec![
            Level { label: "g".into(), energy_offset_mhz: 0.0 },
            Level { label: "r".into(), energy_offset_mhz: 0.0 },
            Level { label: "e".into(), energy_offset_mhz: 0.0 },
            Level { label: "d".into(), energy_offset_mhz: 0.0 },
        ],
        vec![
            LaserField {
                lower: "g".into(),
                upper: "e".into(),
                rabi_mhz: 4.0,
                detuning_mhz: 80.0,
                axis_cosine: 1.0,
            },
            LaserField {
                lower: "r".into(),
                upper: "e".into(),
                rabi_mhz: 21.0,
                detuning_mhz: 80.0,
                axis_cosine: 0.0,
            },
            LaserField {
                lower: "d".into(),
                upper: "e".into(),
                rabi_mhz: 2.0,
                detuning_mhz: 0.0,
                axis_cosine: 0.0,
            },
        ],
        vec![
            DecayChannel { from: "e".into(), to: "g".into(), rate_mhz: third },
            DecayChannel { from: "e".into(), to: "r".into(), rate_mhz: third },
            DecayChannel { from: "e".into(), to: "d".into(), rate_mhz: third },
        ],
    )
    .unwrap()
}

/// Four-level scheme for a shallow dipole trap: weak probe, modest
/// coupling beam, resonant repumper from a second ground state.
fn shallow_trap_scheme() -> LevelScheme {
    LevelScheme::new(
        vec![
            Level { label: "g".into(), energy_offset_mhz: 0.0 },
            Level { label: "r".into(), energy_offset_mhz: 0.0 },
            Level { label: "e".into(), energy_offset_mhz: 0.0 },
            Level { label: "f".into(), energy_offset_mhz: 0.0 },
        ],
        vec![
            LaserField {
                lower: "g".into(),
                upper: "e".into(),
                rabi_mhz: 0.1,
                detuning_mhz: 10.0,
                axis_cosine: 1.0,
            },
            LaserField {
                lower: "r".into(),
                upper: "e".into(),
                rabi_mhz: 1.2,
                detuning_mhz: 10.0,
                axis_cosine: 0.0,
            },
            LaserField {
                lower: "f".into(),
                upper: "e".into(),
                rabi_mhz: 1.0,
                detuning_mhz: 0.0,
                axis_cosine: 0.0,
            },
        ],
        vec![
            DecayChannel { from: "e".into(), to: "g".into(), rate_mhz: 2.0 },
            DecayChannel { from: "e".into(), to: "r".into(), rate_mhz: 2.0 },
            DecayChannel { from: "e".into(), to: "f".into(), rate_mhz: 2.0 },
        ],
    )
    .unwrap()
}

struct Gate {
    criterion: usize,
    clauses: Vec<(bool, String)>,
}

impl Gate {
    fn new(criterion: usize) -> Self {
        Gate { criterion, clauses: Vec::new() }
    }

    fn check(&mut self, pass: bool, detail: String) {
        self.clauses.push((pass, detail));
    }

    fn finish(self) {
        let pass = self.clauses.iter().all(|(ok, _)| *ok);
        let detail: Vec<String> = self
            .clauses
            .iter()
            .map(|(ok, text)| {
                if *ok { text.clone() } else { format!("FAILED: {text}") }
            })
            .collect();
        let line = format!(
            "[criterion {}] {} — {}",
            self.criterion,
            if pass { "PASS" } else { "FAIL" },
            detail.join("; ")
        );
        println!("{line}");
        assert!(pass, "{line}");
    }
}

#[test]
fn criterion_01_two_level_cooling_limits() {
    let mut gate = Gate::new(1);
    let scheme = two_level_scheme(6.0, -10.0, 20.0).unwrap();
    for (nu_mhz, expected) in [(3.32, 3.0), (1.62, 6.2)] {
        let mode = TrapMode::from_species(CA40, nu_mhz, 1.0, 1.0).unwrap();
        let rates = ratecool::scheme_rate_coefficients(&scheme, "g", "e", &mode).unwrap();
        let mbar = ratecool::steady_state_n(&rates).unwrap();
        gate.check(
            (mbar - expected).abs() <= 0.10 * expected,
            format!("m̄(ν={nu_mhz}) = {mbar:.3} vs {expected} ± 10%"),
        );
    }
    gate.finish();
}

#[test]
fn criterion_02_dark_resonance_depth() {
    let mut gate = Gate::new(2);
    let scheme = narrow_probe_scheme();
    let detunings = linspace(40.0, 70.0, 3001);
    let spectrum = bloch::absorption_spectrum(&scheme, "g", "e", &detunings).unwrap();
    let max = spectrum.rates_mhz().iter().cloned().fold(0.0, f64::max);
    let laser = bloch::probe_laser_index(&scheme, "g", "e").unwrap();
    let dark = bloch::scattering_rate_at(&scheme, laser, 50.0).unwrap();
    gate.check(
        dark <= 1e-10 * max,
        format!("W at matched detunings = {dark:.3e} vs 1e-10 × max ({max:.3e})"),
    );
    gate.finish();
}

#[test]
fn criterion_03_stark_shifted_peak_position_and_width() {
    let mut gate = Gate::new(3);
    let cases = [
        ("20 MHz coupling", narrow_probe_scheme(), 50.0, 20.0, (50.4, 57.7)),
        ("30 MHz coupling", string_probe_scheme(), 75.0, 30.0, (75.4, 85.0)),
    ];
    let mut wide_fwhm = None;
    for (label, scheme, delta, omega, window) in cases {
        let peak = bloch::find_bright_resonance(&scheme, "g", "e", window, 401).unwrap();
        let expected = delta + bloch::ac_stark_shift(omega, delta);
        gate.check(
            (peak.detuning_mhz - expected).abs() <= 0.05 * expected,
            format!("{label}: peak at {:.3} MHz vs {expected:.3} ± 5%", peak.detuning_mhz),
        );
        wide_fwhm = Some(peak.fwhm_mhz);
    }
    // Width check on the second (ten-ion) operating point: 0.5 MHz ± 30%.
    let fwhm = wide_fwhm.unwrap();
    gate.check(
        (0.35..=0.65).contains(&fwhm),
        format!("narrow-peak FWHM = {fwhm:.3} MHz vs 0.5 ± 30%"),
    );
    gate.finish();
}

#[test]
fn criterion_04_trajectory_vs_rate_steady_state() {
    let mut gate = Gate::new(4);
    let scheme = narrow_probe_scheme();
    let mode = TrapMode::new(2.0, 0.145, 1.0 / 3.0).unwrap();
    let rates = ratecool::scheme_rate_coefficients(&scheme, "g", "e", &mode).unwrap();
    let mbar = ratecool::steady_state_n(&rates).unwrap();

    let config = TrajectoryConfig {
        scheme,
        mode,
        n_max: 60,
        t_final_us: 6000.0,
        dt_us: 1.25,
        seed: 0x00ac_c304,
        initial_n: 1.0,
    };
    let ensemble = trajectory::ensemble_average(&config, 200).unwrap();
    let mc_mean = ensemble.steady_pn.mean_n();
    let se = ensemble.stderr_n.last().copied().unwrap().max(1e-9);
    gate.check(
        (mc_mean - mbar).abs() <= 3.0 * se,
        format!("steady ⟨n⟩: MC {mc_mean:.4} vs rate {mbar:.4} within 3 SE ({:.4})", 3.0 * se),
    );

    let thermal = ratecool::thermal_distribution(mbar, config.n_max).unwrap();
    let mut violations = 0usize;
    let mut worst_diff = 0.0f64;
    for (p_mc, p_th) in
        ensemble.steady_pn.probabilities().iter().zip(thermal.probabilities())
    {
        // σ-equivalent: binomial deviation of a 200-sample estimate of this
        // bin, floored so empty far-tail bins compare at finite tolerance.
        let bound = 5.0 * (p_th * (1.0 - p_th) / 200.0).sqrt() + 1e-6;
        let diff = (p_mc - p_th).abs();
        worst_diff = worst_diff.max(diff);
        if diff > bound {
            violations += 1;
        }
    }
    gate.check(
        violations == 0,
        format!("p_n max-norm {worst_diff:.2e} within 5 σ-equivalent ({violations} bins out)"),
    );
    gate.finish();
}

#[test]
fn criterion_05_shelf_level_cooling_limit() {
    let mut gate = Gate::new(5);
    let scheme = shelf_scheme();
    let mode = TrapMode::new(1.5, 0.1334, 1.0 / 3.0).unwrap();
    let rates = ratecool::scheme_rate_coefficients(&scheme, "g", "e", &mode).unwrap();
    let mbar = ratecool::steady_state_n(&rates).unwrap();
    gate.check(
        (mbar - 1.0).abs() <= 0.5,
        format!("rate-model steady ⟨n⟩ = {mbar:.3} vs 1.0 ± 0.5"),
    );

    let config = TrajectoryConfig {
        scheme,
        mode,
        n_max: 40,
        t_final_us: 9000.0,
        dt_us: 1.0,
        seed: 0x00ac_c305,
        initial_n: 1.0,
    };
    let ensemble = trajectory::ensemble_average(&config, 100).unwrap();
    let mc_mean = ensemble.steady_pn.mean_n();
    let se = ensemble.stderr_n.last().copied().unwrap().max(1e-9);
    gate.check(
        (mc_mean - mbar).abs() <= 3.0 * se,
        format!("MC ⟨n⟩ = {mc_mean:.4} vs rate {mbar:.4} within 3σ ({:.4})", 3.0 * se),
    );
    gate.finish();
}

#[test]
fn criterion_06_shallow_trap_band() {
    let mut gate = Gate::new(6);
    let scheme = shallow_trap_scheme();
    let rows =
        ratecool::band_sweep(&scheme, "g", "e", &RB87, 1.0 / 3.0, 0.025, 0.05, 26).unwrap();
    let all_ok = rows.iter().all(|row| row.status == "ok");
    let max_mbar =
        rows.iter().filter_map(|row| row.mbar).fold(0.0f64, f64::max);
    let (tau_lo, tau_hi) = rows.iter().filter_map(|row| row.tau_us).fold(
        (f64::INFINITY, 0.0f64),
        |(lo, hi), tau| (lo.min(tau), hi.max(tau)),
    );
    gate.check(all_ok, "every band point cools".into());
    gate.check(max_mbar < 1.0, format!("max m̄ across band = {max_mbar:.3} < 1"));
    gate.check(
        tau_lo >= 100.0 && tau_hi <= 10_000.0,
        format!("cooling times {tau_lo:.0}–{tau_hi:.0} µs inside 0.1–10 ms"),
    );
    gate.finish();
}

#[test]
fn criterion_07_string_geometry_and_mode_anchors() {
    let mut gate = Gate::new(7);
    let ten = IonString::build(10, CA40, 0.7, None).unwrap();
    let five = IonString::build(5, CA40, 0.7, None).unwrap();

    let spacing_ten = ten.min_spacing_um().unwrap();
    gate.check(
        (spacing_ten - 3.0).abs() <= 0.1,
        format!("10-ion min spacing = {spacing_ten:.3} µm vs 3.0 ± 0.1"),
    );
    let spacing_five = five.min_spacing_um().unwrap();
    gate.check(
        (spacing_five - 4.5).abs() <= 0.1,
        format!("5-ion min spacing = {spacing_five:.3} µm vs 4.5 ± 0.1"),
    );

    let freqs: Vec<f64> = ten.axial_modes.iter().map(|m| m.frequency_mhz).collect();
    gate.check(
        (freqs[0] - 0.7).abs() <= 1e-9,
        format!("lowest axial mode = {:.6} MHz (center of mass)", freqs[0]),
    );
    let sqrt3 = 3.0f64.sqrt() * 0.7;
    gate.check(
        (freqs[1] - sqrt3).abs() <= 1e-9,
        format!("second axial mode = {:.9} MHz vs √3·0.7 = {sqrt3:.9}", freqs[1]),
    );
    let highest = *freqs.last().unwrap();
    gate.check(
        (highest - 4.6).abs() <= 0.02 * 4.6,
        format!("highest axial mode = {highest:.3} MHz vs 4.6 ± 2%"),
    );

    let zz_ten = ionstring::zigzag_threshold_mhz(10, 0.7).unwrap();
    gate.check(
        (zz_ten - 3.7).abs() <= 0.03 * 3.7,
        format!("10-ion zig-zag threshold = {zz_ten:.3} MHz vs 3.7 ± 3%"),
    );
    let zz_five = ionstring::zigzag_threshold_mhz(5, 0.7).unwrap();
    gate.check(
        (zz_five - 2.0).abs() <= 0.03 * 2.0,
        format!("5-ion zig-zag threshold = {zz_five:.3} MHz vs 2.0 ± 3%"),
    );
    gate.finish();
}

fn ten_ion_cooling_rows() -> (IonString, Vec<ionstring::ModeCoolingRow>) {
    let string = IonString::build(10, CA40, 0.7, None).unwrap();
    let scheme = string_probe_scheme();
    let geometry = CoolingGeometry {
        probe_lower: "g".into(),
        probe_upper: "e".into(),
        axis_cosine: 1.0,
        recoil_alpha: 1.0 / 3.0,
    };
    let rows = ionstring::multimode_cooling(&string, &scheme, &geometry).unwrap();
    (string, rows)
}

#[test]
fn criterion_08_ten_ion_multimode_cooling() {
    let mut gate = Gate::new(8);
    let (_, rows) = ten_ion_cooling_rows();
    gate.check(rows.len() == 10, format!("{} axial modes reported", rows.len()));
    let all_cooled = rows.iter().all(|row| row.status == "ok");
    gate.check(all_cooled, "every mode reaches a cooling limit".into());
    let worst = rows
        .iter()
        .filter_map(|row| row.mbar)
        .fold(0.0f64, f64::max);
    gate.check(worst < 1.0, format!("max m̄_q = {worst:.3} < 1"));
    gate.finish();
}

#[test]
fn criterion_09_residual_rabi_blur() {
    let mut gate = Gate::new(9);
    let (string, rows) = ten_ion_cooling_rows();
    let mbars: Vec<f64> = rows.iter().map(|row| row.mbar.unwrap()).collect();
    // Qubit drive on the quadrupole line for the middle ion of the string.
    let etas = ionstring::mode_etas_for_ion(&string, 729.0, 1.0, 4).unwrap();
    let blur = ionstring::rabi_blur(&etas, &mbars, 10).unwrap();
    gate.check(
        (1.5e-4..=6.0e-4).contains(&blur.relative_blur),
        format!("ΔΩ/Ω = {:.2e} within a factor 2 of 3e-4", blur.relative_blur),
    );
    gate.check(
        blur.max_oscillations >= 1.0 / 6.0e-4,
        format!("usable oscillations ≈ {:.0} (≳ 2000)", blur.max_oscillations),
    );
    gate.finish();
}

#[test]
fn criterion_10_thermometry_round_trip() {
    let mut gate = Gate::new(10);
    let times = linspace(0.0, 3.0 * PI, 64);
    for mbar in [0.1, 0.18, 1.0, 6.5] {
        let data = thermometry::rabi_signal(mbar, 0.1, 10.0, &times).unwrap();
        let fit = thermometry::fit_thermal(&data, 0.1).unwrap();
        gate.check(
            (fit.mbar - mbar).abs() <= 1e-3,
            format!("noiseless fit m̄ = {:.5} vs {mbar} ± 1e-3", fit.mbar),
        );
    }

    let p0_cold = thermometry::ground_state_probability(0.1);
    let p0_warm = thermometry::ground_state_probability(0.18);
    gate.check(
        (p0_cold - 1.0 / 1.1).abs() <= 1e-12 && (p0_cold - 0.90).abs() <= 0.01,
        format!("p₀(0.1) = {:.4} ≈ 90%", p0_cold),
    );
    gate.check(
        (p0_warm - 1.0 / 1.18).abs() <= 1e-12 && (p0_warm - 0.84).abs() <= 0.01,
        format!("p₀(0.18) = {:.4} ≈ 84%", p0_warm),
    );

    let mbar_true = 0.1;
    let pulse_us = PI / 2.0; // π/2 ÷ (ηΩ) with η = 0.1, Ω = 10 MHz
    let trials = 1000;
    let mut covered = 0;
    for seed in 0..trials {
        let counts =
            thermometry::simulate_shelving(mbar_true, 0.1, 10.0, pulse_us, 100, seed).unwrap();
        let estimate = thermometry::sideband_ratio_to_n(&counts).unwrap();
        if estimate.interval.0 <= mbar_true && mbar_true <= estimate.interval.1 {
            covered += 1;
        }
    }
    gate.check(
        covered * 10 >= trials * 9,
        format!("ratio-estimator coverage {covered}/{trials} ≥ 90%"),
    );
    gate.finish();
}

#[test]
fn criterion_11_property_suites() {
    let mut gate = Gate::new(11);
    let mut rng = ChaCha8Rng::seed_from_u64(0x11_5eed);

    // m̄ does not depend on the Lamb-Dicke factor; τ scales as 1/η².
    let mut eta_checked = 0;
    for _ in 0..40 {
        let gamma: f64 = rng.random_range(5.0..50.0);
        let omega_c = gamma * rng.random_range(0.3..1.5);
        let omega_p = gamma * rng.random_range(0.02..0.10);
        let delta = gamma * rng.random_range(1.0..4.0);
        let nu = gamma * rng.random_range(0.02..0.30);
        let scheme = lambda_scheme(omega_p, omega_c, delta, delta, gamma).unwrap();
        let laser = bloch::probe_laser_index(&scheme, "g", "e").unwrap();
        let spectrum = |x: f64| bloch::scattering_rate_at(&scheme, laser, x);
        let build = |eta: f64| {
            ratecool::rate_coefficients(spectrum, delta, nu, eta, 1.0, 1.0 / 3.0).unwrap()
        };
        let small = build(0.03);
        let large = build(0.21);
        let (Ok(m_small), Ok(m_large)) =
            (ratecool::steady_state_n(&small), ratecool::steady_state_n(&large))
        else {
            continue; // net heating at this draw; τ/m̄ are undefined
        };
        let tau_ratio = ratecool::cooling_time_us(&small).unwrap()
            / ratecool::cooling_time_us(&large).unwrap();
        let expected_ratio = (0.21f64 / 0.03).powi(2);
        assert!(
            (m_small - m_large).abs() <= 1e-9 * m_small.max(1e-300),
            "m̄ shifted with η: {m_small} vs {m_large}"
        );
        assert!(
            (tau_ratio - expected_ratio).abs() <= 1e-9 * expected_ratio,
            "τ did not scale as 1/η²: ratio {tau_ratio} vs {expected_ratio}"
        );
        eta_checked += 1;
    }
    gate.check(
        eta_checked >= 10,
        format!("η-invariance of m̄ and 1/η² scaling of τ ({eta_checked} draws)"),
    );

    // Scaling the whole spectrum leaves m̄ alone and divides τ by the factor.
    let mut scale_checked = 0;
    for _ in 0..40 {
        let peak: f64 = rng.random_range(0.01..10.0);
        let width: f64 = rng.random_range(0.3..3.0);
        let center: f64 = rng.random_range(-1.0..1.0);
        let delta: f64 = rng.random_range(-2.0..0.5);
        let nu: f64 = rng.random_range(0.5..4.0);
        let factor: f64 = rng.random_range(0.1..40.0);
        let base = move |x: f64| -> eitcool::Result<f64> {
            let u = (x - center) / width;
            Ok(peak / (1.0 + u * u))
        };
        let scaled = move |x: f64| -> eitcool::Result<f64> { Ok(base(x)? * factor) };
        let a = ratecool::reduced_rate_coefficients(base, delta, nu, 1.0, 1.0 / 3.0).unwrap();
        let b = ratecool::reduced_rate_coefficients(scaled, delta, nu, 1.0, 1.0 / 3.0).unwrap();
        let (Ok(m_a), Ok(m_b)) = (ratecool::steady_state_n(&a), ratecool::steady_state_n(&b))
        else {
            continue;
        };
        assert!((m_a - m_b).abs() <= 1e-12 * m_a.max(1e-300), "m̄ moved under W-scaling");
        let tau_ratio =
            ratecool::cooling_time_us(&a).unwrap() / ratecool::cooling_time_us(&b).unwrap();
        assert!(
            (tau_ratio - factor).abs() <= 1e-12 * factor,
            "τ scaling broke: {tau_ratio} vs {factor}"
        );
        scale_checked += 1;
    }
    gate.check(
        scale_checked >= 10,
        format!("spectrum-scale invariance of m̄ ({scale_checked} draws)"),
    );

    // A thermal distribution at the steady m̄ is a fixed point of the
    // birth-death evolution.
    for _ in 0..25 {
        let mbar: f64 = (rng.random_range(-3.0f64..1.6f64)).exp();
        let scale: f64 = (rng.random_range(-4.0f64..2.0f64)).exp();
        let rates = CoolingRates::try_new(scale * mbar, scale * (mbar + 1.0)).unwrap();
        // Generous headroom: boundary flux over ~13 relaxation times must
        // stay below the evolver's 1e-6 leakage budget even at m̄ ≈ 5.
        let thermal = ratecool::thermal_distribution(mbar, 130).unwrap();
        for t_units in [0.7, 13.0] {
            let evolved =
                ratecool::evolve_populations(&rates, &thermal, t_units / scale).unwrap();
            let drift = evolved
                .probabilities()
                .iter()
                .zip(thermal.probabilities())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(drift <= 1e-6, "thermal state drifted by {drift:.2e} (m̄ = {mbar:.3})");
        }
    }
    gate.check(true, "thermal fixed point of the population evolution (25 draws)".into());

    // Between jumps the squared norm must only decay (up to round-off).
    let config = TrajectoryConfig {
        scheme: narrow_probe_scheme(),
        mode: TrapMode::new(2.0, 0.145, 1.0 / 3.0).unwrap(),
        n_max: 15,
        t_final_us: 300.0,
        dt_us: 0.5,
        seed: 42,
        initial_n: 0.5,
    };
    let record = trajectory::run_trajectory(&config).unwrap();
    gate.check(
        record.max_norm_growth <= 1e-12,
        format!("trajectory norm growth {:.1e} ≤ 1e-12", record.max_norm_growth),
    );

    // Equilibrium positions are antisymmetric; the lowest two modes sit at
    // the trap frequency and √3 times it, with a uniform lowest eigenvector.
    for n_ions in [2usize, 3, 5, 8, 12] {
        let u = ionstring::equilibrium_positions_dimensionless(n_ions).unwrap();
        for i in 0..n_ions {
            assert!(
                (u[i] + u[n_ions - 1 - i]).abs() <= 1e-9,
                "positions not antisymmetric for N = {n_ions}"
            );
        }
        let modes = ionstring::axial_modes(&u, 1.0).unwrap();
        assert!((modes[0].frequency_mhz - 1.0).abs() <= 1e-9);
        if n_ions >= 2 {
            assert!((modes[1].frequency_mhz - 3.0f64.sqrt()).abs() <= 1e-9);
        }
        let uniform = (n_ions as f64).sqrt().recip();
        for &component in &modes[0].eigenvector {
            assert!(
                (component - uniform).abs() <= 1e-7,
                "center-of-mass eigenvector not uniform for N = {n_ions}"
            );
        }
    }
    gate.check(true, "string antisymmetry and mode anchors (N = 2..12)".into());
    gate.finish();
}
