//! Scenario dispatch: run a validated configuration and write plot-ready
//! CSVs plus a `run_metadata.txt` sidecar (config hash, seed, version, wall
//! time, headline numbers, warnings) into the output directory. Nothing is
//! written anywhere else.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::config::{blur_ion_index, RunConfig};
use crate::csvio::{float_cell, option_cell, write_table};
use crate::error::{ConfigIssue, Error};
use crate::ionstring::{self, CoolingGeometry, IonString};
use crate::numeric::linspace;
use crate::trajectory::{self, TrajectoryConfig};
use crate::trap;
use crate::{bloch, ratecool, thermometry};
use crate::Result;

/// Everything a completed run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Headline numbers, mirrored into the metadata sidecar.
    pub summary: Vec<(String, String)>,
}

struct Sink {
    dir: PathBuf,
    files: Vec<PathBuf>,
    warnings: Vec<String>,
    summary: Vec<(String, String)>,
}

impl Sink {
    fn table(&mut self, name: &str, header: &str, rows: Vec<String>) -> Result<()> {
        let path = self.dir.join(name);
        write_table(&path, header, rows)?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)?;
        self.files.push(path);
        Ok(())
    }

    fn note(&mut self, key: &str, value: String) {
        self.summary.push((key.into(), value));
    }

    fn warn(&mut self, warning: Option<String>) {
        if let Some(message) = warning {
            self.warnings.push(message);
        }
    }
}

/// Run a configuration. `raw_config` is the config file's original bytes,
/// hashed into the metadata sidecar for provenance.
pub fn run(config: &RunConfig, raw_config: &[u8]) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&dir)?;
    let mut sink =
        Sink { dir, files: Vec::new(), warnings: Vec::new(), summary: Vec::new() };

    match config.scenario.as_str() {
        "spectrum" => run_spectrum(config, &mut sink)?,
        "cool" => run_cool(config, &mut sink)?,
        "mc" => run_mc(config, &mut sink)?,
        "string" => run_string(config, &mut sink)?,
        "thermometry" => run_thermometry(config, &mut sink)?,
        "sweep" => run_sweep(config, &mut sink)?,
        other => {
            return Err(Error::Config(vec![ConfigIssue {
                field: "scenario".into(),
                message: format!("unknown scenario `{other}`"),
            }]))
        }
    }

    let mut digest = Sha256::new();
    digest.update(raw_config);
    let hash: String = digest.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let mut metadata = String::new();
    metadata.push_str(&format!("scenario={}\n", config.scenario));
    metadata.push_str(&format!("config_sha256={hash}\n"));
    metadata.push_str(&format!("seed={}\n", config.seed));
    metadata.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
    metadata.push_str(&format!("wall_ms={}\n", started.elapsed().as_millis()));
    for (key, value) in &sink.summary {
        metadata.push_str(&format!("{key}={value}\n"));
    }
    for warning in &sink.warnings {
        metadata.push_str(&format!("warning={warning}\n"));
    }
    sink.text("run_metadata.txt", &metadata)?;

    Ok(RunOutcome { files: sink.files, warnings: sink.warnings, summary: sink.summary })
}

/// Load, run, and report one config file (the binary's whole job).
pub fn run_file(path: &Path) -> Result<RunOutcome> {
    let raw = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&raw);
    let config = crate::config::parse_config(&text)?;
    run(&config, &raw)
}

fn run_spectrum(config: &RunConfig, sink: &mut Sink) -> Result<()> {
    let block = config.spectrum.as_ref().expect("validated");
    let scheme = config.scheme()?;
    let detunings = linspace(block.detuning_min_mhz, block.detuning_max_mhz, block.points);
    let spectrum =
        bloch::absorption_spectrum(&scheme, &block.probe_lower, &block.probe_upper, &detunings)?;
    sink.table(
        "spectrum.csv",
        "detuning_mhz,rate_mhz",
        spectrum
            .detunings_mhz()
            .iter()
            .zip(spectrum.rates_mhz())
            .map(|(&x, &w)| format!("{},{}", float_cell(x), float_cell(w)))
            .collect(),
    )?;

    if let Some([lo, hi]) = block.peak_window_mhz {
        let peak = bloch::find_bright_resonance(
            &scheme,
            &block.probe_lower,
            &block.probe_upper,
            (lo, hi),
            401,
        )?;
        sink.table(
            "peak.csv",
            "detuning_mhz,rate_mhz,fwhm_mhz",
            vec![format!(
                "{},{},{}",
                float_cell(peak.detuning_mhz),
                float_cell(peak.rate_mhz),
                float_cell(peak.fwhm_mhz)
            )],
        )?;
        sink.note("peak_detuning_mhz", format!("{:.6}", peak.detuning_mhz));
        sink.note("peak_fwhm_mhz", format!("{:.6}", peak.fwhm_mhz));
    }
    sink.warn(ratecool::saturation_warning(&scheme, &block.probe_lower, &block.probe_upper)?);
    Ok(())
}

fn run_cool(config: &RunConfig, sink: &mut Sink) -> Result<()> {
    let block = config.cool.as_ref().expect("validated");
    let scheme = config.scheme()?;
    let mode = config.trap_mode()?;
    let rates =
        ratecool::scheme_rate_coefficients(&scheme, &block.probe_lower, &block.probe_upper, &mode)?;
    let times = linspace(0.0, block.t_final_us, block.points);
    let curve = ratecool::evolve_mean_n(&rates, block.initial_n, &times)?;
    sink.table(
        "mean_n_rate.csv",
        "t_us,mean_n",
        times
            .iter()
            .zip(&curve)
            .map(|(&t, &n)| format!("{},{}", float_cell(t), float_cell(n)))
            .collect(),
    )?;

    let mbar = ratecool::steady_state_n(&rates)?;
    let tau = ratecool::cooling_time_us(&rates)?;
    let n_max = block
        .n_max
        .unwrap_or_else(|| ratecool::default_n_max(block.initial_n.max(mbar)));
    let steady = ratecool::thermal_distribution(mbar, n_max)?;
    sink.table(
        "steady_pn.csv",
        "n,p_n",
        steady
            .probabilities()
            .iter()
            .enumerate()
            .map(|(n, &p)| format!("{n},{}", float_cell(p)))
            .collect(),
    )?;
    sink.note("mbar", format!("{mbar:.8}"));
    sink.note("tau_us", format!("{tau:.6}"));
    sink.warn(ratecool::saturation_warning(&scheme, &block.probe_lower, &block.probe_upper)?);
    sink.warn(trap::lamb_dicke_validity_warning(mode.lamb_dicke, block.initial_n.max(mbar)));
    Ok(())
}

fn run_mc(config: &RunConfig, sink: &mut Sink) -> Result<()> {
    let block = config.mc.as_ref().expect("validated");
    let scheme = config.scheme()?;
    let mode = config.trap_mode()?;
    let trajectory_config = TrajectoryConfig {
        scheme: scheme.clone(),
        mode,
        n_max: block.n_max,
        t_final_us: block.t_final_us,
        dt_us: block.dt_us,
        seed: config.seed,
        initial_n: block.initial_n,
    };
    let ensemble = trajectory::ensemble_average(&trajectory_config, block.trajectories)?;
    sink.table(
        "mean_n_mc.csv",
        "t_us,mean_n,stderr_n",
        ensemble
            .times_us
            .iter()
            .zip(ensemble.mean_n.iter().zip(&ensemble.stderr_n))
            .map(|(&t, (&n, &se))| {
                format!("{},{},{}", float_cell(t), float_cell(n), float_cell(se))
            })
            .collect(),
    )?;
    sink.table(
        "steady_pn.csv",
        "n,p_n",
        ensemble
            .steady_pn
            .probabilities()
            .iter()
            .enumerate()
            .map(|(n, &p)| format!("{n},{}", float_cell(p)))
            .collect(),
    )?;
    let steady_mc = ensemble.steady_pn.mean_n();
    sink.note("trajectories", format!("{}", ensemble.n_trajectories));
    sink.note("steady_mean_n_mc", format!("{steady_mc:.6}"));

    if block.compare_rate {
        let (lower, upper) = (
            block.probe_lower.as_deref().expect("validated"),
            block.probe_upper.as_deref().expect("validated"),
        );
        let rates =
            ratecool::scheme_rate_coefficients(&scheme, lower, upper, &trajectory_config.mode)?;
        let curve = ratecool::evolve_mean_n(&rates, block.initial_n, &ensemble.times_us)?;
        sink.table(
            "mean_n_rate.csv",
            "t_us,mean_n",
            ensemble
                .times_us
                .iter()
                .zip(&curve)
                .map(|(&t, &n)| format!("{},{}", float_cell(t), float_cell(n)))
                .collect(),
        )?;
        match ratecool::steady_state_n(&rates) {
            Ok(mbar) => {
                sink.note("mbar_rate", format!("{mbar:.8}"));
                sink.note("tau_rate_us", format!("{:.6}", ratecool::cooling_time_us(&rates)?));
            }
            Err(Error::NetHeating { .. }) => sink.note("mbar_rate", "net-heating".into()),
            Err(e) => return Err(e),
        }
        sink.warn(ratecool::saturation_warning(&scheme, lower, upper)?);
    }
    sink.warn(trap::lamb_dicke_validity_warning(
        trajectory_config.mode.lamb_dicke,
        block.initial_n.max(steady_mc),
    ));
    Ok(())
}

fn run_string(config: &RunConfig, sink: &mut Sink) -> Result<()> {
    let block = config.string.as_ref().expect("validated");
    let scheme = config.scheme()?;
    let species = config.physical_species()?;
    let string =
        IonString::build(block.n_ions, species, block.nu_axial_mhz, block.nu_radial_mhz)?;

    sink.table(
        "positions.csv",
        "ion_index,z_um",
        string
            .positions_um
            .iter()
            .enumerate()
            .map(|(index, &z)| format!("{index},{}", float_cell(z)))
            .collect(),
    )?;

    let geometry = CoolingGeometry {
        probe_lower: block.probe_lower.clone(),
        probe_upper: block.probe_upper.clone(),
        axis_cosine: block.axis_cosine,
        recoil_alpha: block.recoil_alpha,
    };
    let report = ionstring::multimode_cooling(&string, &scheme, &geometry)?;
    sink.table(
        "string_modes.csv",
        "mode_index,kind,freq_mhz,mbar,tau_us",
        report
            .iter()
            .map(|row| {
                format!(
                    "{},{},{},{},{}",
                    row.mode_index,
                    row.kind,
                    float_cell(row.frequency_mhz),
                    option_cell(row.mbar),
                    option_cell(row.tau_us)
                )
            })
            .collect(),
    )?;

    if let Some(spacing) = string.min_spacing_um() {
        sink.note("min_spacing_um", format!("{spacing:.6}"));
    }
    if block.n_ions >= 2 {
        let threshold = ionstring::zigzag_threshold_mhz(block.n_ions, block.nu_axial_mhz)?;
        sink.note("zigzag_threshold_mhz", format!("{threshold:.6}"));
    }
    let flagged = report.iter().filter(|row| row.status != "ok").count();
    if flagged > 0 {
        sink.warnings.push(format!("{flagged} modes are not cooled (see string_modes.csv)"));
    }

    if let Some(wavelength) = block.blur_wavelength_nm {
        let axial_mbars: Option<Vec<f64>> = report
            .iter()
            .filter(|row| row.kind == ionstring::ModeKind::Axial)
            .map(|row| row.mbar)
            .collect();
        match axial_mbars {
            Some(mbars) => {
                let ion = blur_ion_index(block);
                let etas = ionstring::mode_etas_for_ion(&string, wavelength, 1.0, ion)?;
                let blur = ionstring::rabi_blur(&etas, &mbars, block.n_ions)?;
                sink.table(
                    "blur.csv",
                    "relative_blur,max_oscillations",
                    vec![format!(
                        "{},{}",
                        float_cell(blur.relative_blur),
                        float_cell(blur.max_oscillations)
                    )],
                )?;
                sink.note("relative_blur", format!("{:.6e}", blur.relative_blur));
                sink.note("max_oscillations", format!("{:.1}", blur.max_oscillations));
            }
            None => sink.warnings.push(
                "blur report skipped: not every axial mode has a cooling limit".into(),
            ),
        }
    }
    sink.warn(ratecool::saturation_warning(&scheme, &block.probe_lower, &block.probe_upper)?);
    Ok(())
}

fn run_thermometry(config: &RunConfig, sink: &mut Sink) -> Result<()> {
    let block = config.thermometry.as_ref().expect("validated");
    let times = linspace(0.0, block.t_max_us, block.points);
    let clean = thermometry::rabi_signal(block.mbar, block.eta, block.omega_mhz, &times)?;
    let data = if block.shots_per_point > 0 {
        thermometry::with_binomial_noise(&clean, block.shots_per_point, config.seed)?
    } else {
        clean
    };
    sink.table(
        "rabi_data.csv",
        "t_us,p_excited,shots",
        data.times_us
            .iter()
            .zip(&data.excitation)
            .map(|(&t, &p)| format!("{},{},{}", float_cell(t), float_cell(p), data.shots))
            .collect(),
    )?;

    let fit = thermometry::fit_thermal(&data, block.eta)?;
    let report = format!(
        "mbar_true={}\nmbar_fit={:.8}\nmbar_sigma={:.3e}\nomega_fit_mhz={:.8}\n\
         omega_sigma_mhz={:.3e}\nresidual_sum_squares={:.6e}\nground_state_probability={:.6}\n",
        block.mbar,
        fit.mbar,
        fit.mbar_sigma,
        fit.omega_mhz,
        fit.omega_sigma,
        fit.residual_sum_squares,
        fit.ground_state_probability,
    );
    sink.text("fit_report.txt", &report)?;
    sink.note("mbar_fit", format!("{:.8}", fit.mbar));
    sink.note("ground_state_probability", format!("{:.6}", fit.ground_state_probability));

    if block.ratio_shots > 0 {
        let pulse = block.ratio_pulse_time_us.unwrap_or_else(|| {
            std::f64::consts::FRAC_PI_2 / (block.eta.abs() * block.omega_mhz)
        });
        let counts = thermometry::simulate_shelving(
            block.mbar,
            block.eta,
            block.omega_mhz,
            pulse,
            block.ratio_shots,
            trajectory::mix_seed(config.seed, 1),
        )?;
        let estimate = thermometry::sideband_ratio_to_n(&counts)?;
        let ratio_report = format!(
            "red_excited={}\nblue_excited={}\nshots_per_side={}\npulse_time_us={:.6}\n\
             mbar_estimate={:.8}\ninterval_lo={:.8}\ninterval_hi={:.8}\n",
            counts.red_excited,
            counts.blue_excited,
            counts.shots_per_side,
            pulse,
            estimate.mbar,
            estimate.interval.0,
            estimate.interval.1,
        );
        sink.text("ratio_report.txt", &ratio_report)?;
        sink.note("mbar_ratio_estimate", format!("{:.8}", estimate.mbar));
    }
    Ok(())
}

fn run_sweep(config: &RunConfig, sink: &mut Sink) -> Result<()> {
    let block = config.sweep.as_ref().expect("validated");
    let scheme = config.scheme()?;
    let species = config.physical_species()?;
    let rows = ratecool::band_sweep(
        &scheme,
        &block.probe_lower,
        &block.probe_upper,
        &species,
        block.recoil_alpha,
        block.nu_min_mhz,
        block.nu_max_mhz,
        block.points,
    )?;
    sink.table(
        "band.csv",
        "nu_mhz,mbar,tau_us,status",
        rows.iter()
            .map(|row| {
                format!(
                    "{},{},{},{}",
                    float_cell(row.nu_mhz),
                    option_cell(row.mbar),
                    option_cell(row.tau_us),
                    row.status
                )
            })
            .collect(),
    )?;
    let cooled: Vec<&ratecool::SweepRow> =
        rows.iter().filter(|row| row.status == "ok").collect();
    sink.note("band_points", format!("{}", rows.len()));
    sink.note("cooled_points", format!("{}", cooled.len()));
    if let Some(worst) =
        cooled.iter().filter_map(|row| row.mbar).max_by(|a, b| a.total_cmp(b))
    {
        sink.note("max_mbar", format!("{worst:.6}"));
    }
    sink.warn(ratecool::saturation_warning(&scheme, &block.probe_lower, &block.probe_upper)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn doppler_sweep_text(dir: &Path) -> String {
        format!(
            r#"
scenario = "sweep"
output_dir = "{}"
seed = 5

[scheme]
levels = ["g", "e"]

[[scheme.laser]]
lower = "g"
upper = "e"
rabi_mhz = 6.0
detuning_mhz = -10.0

[[scheme.decay]]
from = "e"
to = "g"
rate_mhz = 20.0

[species]
mass_amu = 39.9625909
wavelength_nm = 396.847

[sweep]
probe_lower = "g"
probe_upper = "e"
nu_min_mhz = 1.62
nu_max_mhz = 3.32
points = 2
recoil_alpha = 1.0
"#,
            dir.display()
        )
    }

    #[test]
    fn sweep_scenario_writes_band_and_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let text = doppler_sweep_text(dir.path());
        let config = parse_config(&text).unwrap();
        let outcome = run(&config, text.as_bytes()).unwrap();

        let band = std::fs::read_to_string(dir.path().join("band.csv")).unwrap();
        let lines: Vec<&str> = band.lines().collect();
        assert_eq!(lines[0], "nu_mhz,mbar,tau_us,status");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",ok") && lines[2].ends_with(",ok"));

        let metadata =
            std::fs::read_to_string(dir.path().join("run_metadata.txt")).unwrap();
        assert!(metadata.contains("scenario=sweep"));
        assert!(metadata.contains("seed=5"));
        assert!(metadata.contains("config_sha256="));
        assert!(metadata.contains("version="));
        assert!(outcome.files.iter().all(|f| f.starts_with(dir.path())));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for dir in [&dir_a, &dir_b] {
            let text = doppler_sweep_text(dir.path());
            let config = parse_config(&text).unwrap();
            run(&config, text.as_bytes()).unwrap();
        }
        let a = std::fs::read(dir_a.path().join("band.csv")).unwrap();
        let b = std::fs::read(dir_b.path().join("band.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn doppler_band_endpoints_match_the_coarse_reference() {
        // Two-level rate model, γ=20 MHz, Δ=−10 MHz: m̄ ≈ 6.2 at ν=1.62 and
        // ≈ 3.0 at ν=3.32 (both within 10%).
        let dir = tempfile::tempdir().unwrap();
        let text = doppler_sweep_text(dir.path());
        let config = parse_config(&text).unwrap();
        run(&config, text.as_bytes()).unwrap();
        let band = std::fs::read_to_string(dir.path().join("band.csv")).unwrap();
        let parse_row = |line: &str| -> (f64, f64) {
            let cells: Vec<&str> = line.split(',').collect();
            (cells[0].parse().unwrap(), cells[1].parse().unwrap())
        };
        let rows: Vec<(f64, f64)> = band.lines().skip(1).map(parse_row).collect();
        assert!((rows[0].0 - 1.62).abs() < 1e-12);
        assert!((rows[0].1 - 6.2).abs() < 0.62, "m̄(1.62) = {}", rows[0].1);
        assert!((rows[1].0 - 3.32).abs() < 1e-12);
        assert!((rows[1].1 - 3.0).abs() < 0.3, "m̄(3.32) = {}", rows[1].1);
    }

    #[test]
    fn thermometry_scenario_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"
scenario = "thermometry"
output_dir = "{}"
seed = 11

[thermometry]
mbar = 0.18
eta = 0.1
omega_mhz = 10.0
t_max_us = 9.42477796076938
points = 48
ratio_shots = 400
"#,
            dir.path().display()
        );
        let config = parse_config(&text).unwrap();
        run(&config, text.as_bytes()).unwrap();
        let report = std::fs::read_to_string(dir.path().join("fit_report.txt")).unwrap();
        let fitted: f64 = report
            .lines()
            .find_map(|line| line.strip_prefix("mbar_fit="))
            .unwrap()
            .parse()
            .unwrap();
        assert!((fitted - 0.18).abs() < 1e-3, "fit drifted: {fitted}");
        assert!(dir.path().join("ratio_report.txt").exists());
        assert!(dir.path().join("rabi_data.csv").exists());
    }

    #[test]
    fn unknown_scenario_is_a_config_error() {
        let text = r#"
scenario = "warp"
[thermometry]
mbar = 0.1
eta = 0.1
omega_mhz = 10.0
t_max_us = 5.0
points = 16
"#;
        let config = parse_config(text).unwrap();
        match run(&config, text.as_bytes()) {
            Err(e) => assert_eq!(e.exit_category().code(), 2),
            Ok(_) => panic!("expected a config error"),
        }
    }
}
