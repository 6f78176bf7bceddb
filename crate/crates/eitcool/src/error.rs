//! Error taxonomy shared by every module, with the process exit code each
//! category maps to in the CLI.

use thiserror::Error;

/// Exit-code buckets used by the `eitcool` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCategory {
    /// Bad configuration file or command line (exit 2).
    Config,
    /// Physically inadmissible inputs or regimes (exit 3).
    PhysicsDomain,
    /// Numerical failure: non-convergence, degeneracy, truncation (exit 4).
    Numerical,
}

impl ExitCategory {
    pub fn code(self) -> i32 {
        match self {
            ExitCategory::Config => 2,
            ExitCategory::PhysicsDomain => 3,
            ExitCategory::Numerical => 4,
        }
    }
}

/// One problem found while loading or validating a run configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted path of the offending field, when known (e.g. `mode.frequency_mhz`).
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Level-scheme construction rejected the inputs (all problems listed).
    #[error("invalid level scheme:\n{}", bullet_list(.0))]
    InvalidScheme(Vec<String>),

    /// An argument is outside its physical domain (negative rate, zero mass, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The dissipative dynamics do not relax to a unique state; the listed
    /// levels form a subspace with no coupling in or out.
    #[error("non-unique steady state: levels {{{}}} are decoupled from the rest of the scheme", .subspace.join(", "))]
    NonUniqueSteadyState { subspace: Vec<String> },

    /// Heating rate meets or exceeds cooling rate: no steady occupation exists.
    #[error("net heating: heating coefficient {heating:.6e} MHz >= cooling coefficient {cooling:.6e} MHz")]
    NetHeating { heating: f64, cooling: f64 },

    /// No interior maximum found in the requested detuning window.
    #[error("no resonance peak inside detuning window [{lo}, {hi}] MHz")]
    NoPeak { lo: f64, hi: f64 },

    /// Population leaked past the Fock-space truncation beyond tolerance.
    #[error("truncation too small: estimated leakage {leakage:.3e} past n_max={n_max}; increase the phonon-space size")]
    Truncation { leakage: f64, n_max: usize },

    /// A linear solve, eigensolve, or integrator failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A fit could not be performed or the data do not constrain it.
    #[error("fit error: {0}")]
    Fit(String),

    /// Configuration file problems; every issue found is listed.
    #[error("configuration invalid:\n{}", bullet_list_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn bullet_list(items: &[String]) -> String {
    items
        .iter()
        .map(|s| format!("  - {s}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn bullet_list_issues(items: &[ConfigIssue]) -> String {
    items
        .iter()
        .map(|s| format!("  - {s}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// Which exit-code bucket this error belongs to.
    pub fn exit_category(&self) -> ExitCategory {
        match self {
            Error::Config(_) | Error::Io(_) => ExitCategory::Config,
            Error::InvalidScheme(_)
            | Error::Domain(_)
            | Error::NetHeating { .. }
            | Error::NoPeak { .. } => ExitCategory::PhysicsDomain,
            Error::NonUniqueSteadyState { .. }
            | Error::Truncation { .. }
            | Error::Numerical(_)
            | Error::Fit(_) => ExitCategory::Numerical,
        }
    }
}
