//! Run-configuration loading: TOML with strict (unknown keys rejected)
//! parsing, full-config validation that reports every problem at once, and
//! exact serialization round-trips.
//!
//! A run file names one `scenario` and carries exactly one matching scenario
//! block, plus the shared `[scheme]`, `[mode]`, and `[species]` blocks the
//! scenario needs. The documented schema lives in README.md next to the
//! bundled configs.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error};
use crate::scheme::{DecayChannel, LaserField, Level, LevelScheme};
use crate::trap::{PhysicalSpecies, TrapMode, ISOTROPIC_RECOIL_ALPHA};
use crate::trajectory::TrajectoryConfig;
use crate::Result;

pub const SCENARIO_NAMES: [&str; 6] =
    ["spectrum", "cool", "mc", "string", "thermometry", "sweep"];

fn default_output_dir() -> String {
    "out".into()
}

fn default_axis_cosine() -> f64 {
    1.0
}

fn default_recoil_alpha() -> f64 {
    ISOTROPIC_RECOIL_ALPHA
}

fn is_unit(value: &f64) -> bool {
    *value == 1.0
}

fn is_isotropic(value: &f64) -> bool {
    *value == ISOTROPIC_RECOIL_ALPHA
}

/// Top-level run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// One of `spectrum`, `cool`, `mc`, `string`, `thermometry`, `sweep`.
    pub scenario: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<SpeciesConfig>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cool: Option<CoolConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub string: Option<StringConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermometry: Option<ThermometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Level scheme: labels plus the driving and decay graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub levels: Vec<String>,
    #[serde(default)]
    pub laser: Vec<LaserConfig>,
    #[serde(default)]
    pub decay: Vec<DecayConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserConfig {
    pub lower: String,
    pub upper: String,
    pub rabi_mhz: f64,
    pub detuning_mhz: f64,
    /// Beam projection on the motional axis.
    #[serde(default = "default_axis_cosine", skip_serializing_if = "is_unit")]
    pub axis_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub from: String,
    pub to: String,
    pub rate_mhz: f64,
}

/// Trap mode: η may be given directly or derived from `[species]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub frequency_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lamb_dicke: Option<f64>,
    /// Projection used when deriving η from the species.
    #[serde(default = "default_axis_cosine", skip_serializing_if = "is_unit")]
    pub axis_cosine: f64,
    #[serde(default = "default_recoil_alpha", skip_serializing_if = "is_isotropic")]
    pub recoil_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub mass_amu: f64,
    pub wavelength_nm: f64,
}

/// Absorption-spectrum scan, with an optional narrow-peak refinement window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub probe_lower: String,
    pub probe_upper: String,
    pub detuning_min_mhz: f64,
    pub detuning_max_mhz: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_window_mhz: Option<[f64; 2]>,
}

/// Rate-equation cooling dynamics and steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolConfig {
    pub probe_lower: String,
    pub probe_upper: String,
    pub initial_n: f64,
    pub t_final_us: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
}

/// Monte-Carlo trajectory ensemble; optionally overlays the rate curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub trajectories: usize,
    pub t_final_us: f64,
    pub dt_us: f64,
    pub n_max: usize,
    pub initial_n: f64,
    #[serde(default)]
    pub compare_rate: bool,
    /// Probe transition for the rate-equation overlay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_lower: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_upper: Option<String>,
}

/// Ion-string structure and per-mode cooling report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringConfig {
    pub n_ions: usize,
    pub nu_axial_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_radial_mhz: Option<f64>,
    pub probe_lower: String,
    pub probe_upper: String,
    #[serde(default = "default_axis_cosine", skip_serializing_if = "is_unit")]
    pub axis_cosine: f64,
    #[serde(default = "default_recoil_alpha", skip_serializing_if = "is_isotropic")]
    pub recoil_alpha: f64,
    /// Qubit-drive wavelength for the Rabi-blur report (omits the report
    /// when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_wavelength_nm: Option<f64>,
    /// Addressed ion for the blur report; defaults to the middle ion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_ion: Option<usize>,
}

/// Thermometry round trip: synthesize a flop record, fit it, and optionally
/// run the sideband-ratio estimator on shelving shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometryConfig {
    pub mbar: f64,
    pub eta: f64,
    pub omega_mhz: f64,
    pub t_max_us: f64,
    pub points: usize,
    /// 0 keeps the synthetic signal noiseless.
    #[serde(default)]
    pub shots_per_point: u64,
    /// 0 skips the sideband-ratio estimator.
    #[serde(default)]
    pub ratio_shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_pulse_time_us: Option<f64>,
}

/// Cooling limit and time across a band of mode frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub probe_lower: String,
    pub probe_upper: String,
    pub nu_min_mhz: f64,
    pub nu_max_mhz: f64,
    pub points: usize,
    #[serde(default = "default_recoil_alpha", skip_serializing_if = "is_isotropic")]
    pub recoil_alpha: f64,
}

impl SchemeConfig {
    pub fn to_scheme(&self) -> Result<LevelScheme> {
        let levels: Vec<Level> = self
            .levels
            .iter()
            .map(|label| Level { label: label.clone(), energy_offset_mhz: 0.0 })
            .collect();
        let lasers: Vec<LaserField> = self
            .laser
            .iter()
            .map(|l| LaserField {
                lower: l.lower.clone(),
                upper: l.upper.clone(),
                rabi_mhz: l.rabi_mhz,
                detuning_mhz: l.detuning_mhz,
                axis_cosine: l.axis_cosine,
            })
            .collect();
        let decays: Vec<DecayChannel> = self
            .decay
            .iter()
            .map(|d| DecayChannel {
                from: d.from.clone(),
                to: d.to.clone(),
                rate_mhz: d.rate_mhz,
            })
            .collect();
        LevelScheme::new(levels, lasers, decays)
    }
}

impl SpeciesConfig {
    pub fn to_species(&self) -> PhysicalSpecies {
        PhysicalSpecies { mass_amu: self.mass_amu, wavelength_nm: self.wavelength_nm }
    }
}

impl ModeConfig {
    /// Resolve to a [`TrapMode`], deriving η from the species when not given.
    pub fn resolve(&self, species: Option<&SpeciesConfig>) -> Result<TrapMode> {
        match (self.lamb_dicke, species) {
            (Some(eta), _) => TrapMode::new(self.frequency_mhz, eta, self.recoil_alpha),
            (None, Some(sp)) => TrapMode::from_species(
                sp.to_species(),
                self.frequency_mhz,
                self.axis_cosine,
                self.recoil_alpha,
            ),
            (None, None) => Err(Error::Config(vec![ConfigIssue {
                field: "mode.lamb_dicke".into(),
                message: "set lamb_dicke directly or provide a [species] block to derive it"
                    .into(),
            }])),
        }
    }
}

/// Parse and fully validate a run file, reporting every problem found.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let config = parse_config(&text)?;
    config.validate()?;
    Ok(config)
}

/// Parse without validating (round-trip tests use this directly).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str::<RunConfig>(text).map_err(|e| {
        Error::Config(vec![ConfigIssue { field: String::new(), message: e.to_string() }])
    })
}

pub fn serialize_config(config: &RunConfig) -> Result<String> {
    toml::to_string(config)
        .map_err(|e| Error::Numerical(format!("config serialization failed: {e}")))
}

impl RunConfig {
    /// Validate everything that can be checked before running, collecting
    /// all problems instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        fn note(issues: &mut Vec<ConfigIssue>, field: &str, message: String) {
            issues.push(ConfigIssue { field: field.into(), message });
        }
        let mut issues: Vec<ConfigIssue> = Vec::new();

        if !SCENARIO_NAMES.contains(&self.scenario.as_str()) {
            note(&mut issues, 
                "scenario",
                format!("unknown scenario `{}`; expected one of {SCENARIO_NAMES:?}", self.scenario),
            );
        }
        if self.output_dir.is_empty() {
            note(&mut issues, "output_dir", "must not be empty".into());
        }

        let blocks: [(&str, bool); 6] = [
            ("spectrum", self.spectrum.is_some()),
            ("cool", self.cool.is_some()),
            ("mc", self.mc.is_some()),
            ("string", self.string.is_some()),
            ("thermometry", self.thermometry.is_some()),
            ("sweep", self.sweep.is_some()),
        ];
        let present: Vec<&str> =
            blocks.iter().filter(|(_, p)| *p).map(|(name, _)| *name).collect();
        match present.as_slice() {
            [] => note(&mut issues, "scenario", "no scenario block present; add exactly one".into()),
            [only] => {
                if *only != self.scenario && SCENARIO_NAMES.contains(&self.scenario.as_str()) {
                    note(&mut issues, 
                        "scenario",
                        format!("scenario is `{}` but the present block is [{only}]", self.scenario),
                    );
                }
            }
            many => note(&mut issues, 
                "scenario",
                format!("exactly one scenario block allowed, found {}", many.join(", ")),
            ),
        }

        // Shared blocks: validate whenever present so typos surface even in
        // scenarios that do not use them.
        let scheme = match &self.scheme {
            Some(scheme_config) => match scheme_config.to_scheme() {
                Ok(scheme) => Some(scheme),
                Err(Error::InvalidScheme(problems)) => {
                    for problem in problems {
                        note(&mut issues, "scheme", problem);
                    }
                    None
                }
                Err(e) => {
                    note(&mut issues, "scheme", e.to_string());
                    None
                }
            },
            None => None,
        };
        if let Some(species) = &self.species {
            if let Err(e) = species.to_species().validate() {
                note(&mut issues, "species", e.to_string());
            }
        }
        if let Some(mode) = &self.mode {
            match mode.resolve(self.species.as_ref()) {
                Ok(_) => {}
                Err(Error::Config(nested)) => {
                    for issue in nested {
                        issues.push(issue);
                    }
                }
                Err(e) => note(&mut issues, "mode", e.to_string()),
            }
        }

        let require_scheme = |issues: &mut Vec<ConfigIssue>| {
            if self.scheme.is_none() {
                issues.push(ConfigIssue {
                    field: "scheme".into(),
                    message: format!("the {} scenario needs a [scheme] block", self.scenario),
                });
            }
        };
        let probe_exists = |issues: &mut Vec<ConfigIssue>, field: &str, lo: &str, up: &str| {
            if let Some(s) = &scheme {
                if s.laser_index(lo, up).is_none() {
                    issues.push(ConfigIssue {
                        field: field.into(),
                        message: format!("no laser drives the {lo}-{up} transition"),
                    });
                }
            }
        };

        if let Some(block) = &self.spectrum {
            require_scheme(&mut issues);
            probe_exists(&mut issues, "spectrum.probe", &block.probe_lower, &block.probe_upper);
            if block.points < 2 {
                note(&mut issues, "spectrum.points", format!("need at least 2 grid points, got {}", block.points));
            }
            if !(block.detuning_max_mhz > block.detuning_min_mhz) {
                note(&mut issues, 
                    "spectrum.detuning_max_mhz",
                    format!(
                        "scan window [{}, {}] is empty",
                        block.detuning_min_mhz, block.detuning_max_mhz
                    ),
                );
            }
            if let Some([lo, hi]) = block.peak_window_mhz {
                if !(hi > lo) {
                    note(&mut issues, "spectrum.peak_window_mhz", format!("window [{lo}, {hi}] is empty"));
                }
            }
        }

        if let Some(block) = &self.cool {
            require_scheme(&mut issues);
            probe_exists(&mut issues, "cool.probe", &block.probe_lower, &block.probe_upper);
            if self.mode.is_none() {
                note(&mut issues, "mode", "the cool scenario needs a [mode] block".into());
            }
            if !(block.initial_n >= 0.0) {
                note(&mut issues, "cool.initial_n", format!("must be ≥ 0, got {}", block.initial_n));
            }
            if !(block.t_final_us > 0.0) {
                note(&mut issues, "cool.t_final_us", format!("must be > 0, got {}", block.t_final_us));
            }
            if block.points < 2 {
                note(&mut issues, "cool.points", format!("need at least 2 time points, got {}", block.points));
            }
        }

        if let Some(block) = &self.mc {
            require_scheme(&mut issues);
            if self.mode.is_none() {
                note(&mut issues, "mode", "the mc scenario needs a [mode] block".into());
            }
            if block.trajectories < 2 {
                note(&mut issues, "mc.trajectories", format!("need at least 2, got {}", block.trajectories));
            }
            if block.compare_rate {
                match (&block.probe_lower, &block.probe_upper) {
                    (Some(lo), Some(up)) => probe_exists(&mut issues, "mc.probe", lo, up),
                    _ => note(&mut issues, 
                        "mc.probe_lower",
                        "compare_rate needs probe_lower and probe_upper".into(),
                    ),
                }
            }
            // Surface the trajectory-grid invariants now rather than after
            // the cache build.
            if let (Some(s), Some(mode_config)) = (&scheme, &self.mode) {
                if let Ok(mode) = mode_config.resolve(self.species.as_ref()) {
                    let probe = TrajectoryConfig {
                        scheme: s.clone(),
                        mode,
                        n_max: block.n_max,
                        t_final_us: block.t_final_us,
                        dt_us: block.dt_us,
                        seed: self.seed,
                        initial_n: block.initial_n,
                    };
                    if let Err(Error::Config(nested)) = probe.validate() {
                        for issue in nested {
                            issues.push(ConfigIssue {
                                field: format!("mc.{}", issue.field),
                                message: issue.message,
                            });
                        }
                    }
                }
            }
        }

        if let Some(block) = &self.string {
            require_scheme(&mut issues);
            probe_exists(&mut issues, "string.probe", &block.probe_lower, &block.probe_upper);
            if self.species.is_none() {
                note(&mut issues, "species", "the string scenario needs a [species] block".into());
            }
            if block.n_ions == 0 {
                note(&mut issues, "string.n_ions", "need at least one ion".into());
            }
            if !(block.nu_axial_mhz > 0.0) {
                note(&mut issues, "string.nu_axial_mhz", format!("must be > 0, got {}", block.nu_axial_mhz));
            }
            if let Some(nu_radial) = block.nu_radial_mhz {
                if !(nu_radial > 0.0) {
                    note(&mut issues, "string.nu_radial_mhz", format!("must be > 0, got {nu_radial}"));
                }
            }
            if block.axis_cosine.abs() > 1.0 {
                note(&mut issues, "string.axis_cosine", format!("must lie in [-1, 1], got {}", block.axis_cosine));
            }
            if let Some(ion) = block.blur_ion {
                if ion >= block.n_ions {
                    note(&mut issues, 
                        "string.blur_ion",
                        format!("ion {ion} out of range for {} ions", block.n_ions),
                    );
                }
            }
            if let Some(wavelength) = block.blur_wavelength_nm {
                if !(wavelength > 0.0) {
                    note(&mut issues, "string.blur_wavelength_nm", format!("must be > 0, got {wavelength}"));
                }
            }
        }

        if let Some(block) = &self.thermometry {
            if !(block.mbar >= 0.0) {
                note(&mut issues, "thermometry.mbar", format!("must be ≥ 0, got {}", block.mbar));
            }
            if !(block.eta != 0.0 && block.eta.is_finite()) {
                note(&mut issues, "thermometry.eta", format!("must be finite and nonzero, got {}", block.eta));
            }
            if !(block.omega_mhz > 0.0) {
                note(&mut issues, "thermometry.omega_mhz", format!("must be > 0, got {}", block.omega_mhz));
            }
            if !(block.t_max_us > 0.0) {
                note(&mut issues, "thermometry.t_max_us", format!("must be > 0, got {}", block.t_max_us));
            }
            if block.points < 8 {
                note(&mut issues, "thermometry.points", format!("the fit needs ≥ 8 points, got {}", block.points));
            }
            if let Some(pulse) = block.ratio_pulse_time_us {
                if !(pulse > 0.0) {
                    note(&mut issues, "thermometry.ratio_pulse_time_us", format!("must be > 0, got {pulse}"));
                }
            }
        }

        if let Some(block) = &self.sweep {
            require_scheme(&mut issues);
            probe_exists(&mut issues, "sweep.probe", &block.probe_lower, &block.probe_upper);
            if self.species.is_none() {
                note(&mut issues, "species", "the sweep scenario needs a [species] block".into());
            }
            if !(block.nu_min_mhz > 0.0) {
                note(&mut issues, "sweep.nu_min_mhz", format!("must be > 0, got {}", block.nu_min_mhz));
            }
            if block.nu_max_mhz < block.nu_min_mhz {
                note(&mut issues, 
                    "sweep.nu_max_mhz",
                    format!("band [{}, {}] is reversed", block.nu_min_mhz, block.nu_max_mhz),
                );
            }
            if block.points == 0 {
                note(&mut issues, "sweep.points", "need at least one band point".into());
            }
            if block.nu_max_mhz > block.nu_min_mhz && block.points < 2 {
                note(&mut issues, 
                    "sweep.points",
                    format!("a non-degenerate band needs ≥ 2 points, got {}", block.points),
                );
            }
            if !(0.0..=1.0).contains(&block.recoil_alpha) {
                note(&mut issues, "sweep.recoil_alpha", format!("must lie in [0, 1], got {}", block.recoil_alpha));
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    /// The resolved scheme (validated configs cannot fail here).
    pub fn scheme(&self) -> Result<LevelScheme> {
        self.scheme
            .as_ref()
            .ok_or_else(|| {
                Error::Config(vec![ConfigIssue {
                    field: "scheme".into(),
                    message: "missing [scheme] block".into(),
                }])
            })?
            .to_scheme()
    }

    pub fn trap_mode(&self) -> Result<TrapMode> {
        self.mode
            .as_ref()
            .ok_or_else(|| {
                Error::Config(vec![ConfigIssue {
                    field: "mode".into(),
                    message: "missing [mode] block".into(),
                }])
            })?
            .resolve(self.species.as_ref())
    }

    pub fn physical_species(&self) -> Result<PhysicalSpecies> {
        let species = self
            .species
            .as_ref()
            .ok_or_else(|| {
                Error::Config(vec![ConfigIssue {
                    field: "species".into(),
                    message: "missing [species] block".into(),
                }])
            })?
            .to_species();
        species.validate()?;
        Ok(species)
    }
}

/// Default blur target: the middle ion of the string.
pub fn default_blur_ion(n_ions: usize) -> usize {
    (n_ions - 1) / 2
}

/// Resolve the string scenario's blur inputs (used by the runner).
pub fn blur_ion_index(block: &StringConfig) -> usize {
    block.blur_ion.unwrap_or_else(|| default_blur_ion(block.n_ions))
}
