//! Internal level structure: levels, laser drives, decay channels, and the
//! rotating-frame bookkeeping they induce.
//!
//! The rotating-frame energy of each level is derived purely from laser
//! detunings: for every drive, E(upper) = E(lower) − Δ, with the first level
//! of each connected component pinned to zero. Level energy offsets are kept
//! as descriptive data (they document the physical ordering) but do not enter
//! the dynamics — detunings already encode them. A closed loop of drives is
//! accepted only when its signed detuning sum vanishes; otherwise no common
//! rotating frame exists and the scheme is rejected.

use crate::error::Error;
use crate::Result;

/// One internal atomic/ionic level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    /// Unique name used by drives and decays to refer to this level.
    pub label: String,
    /// Physical energy relative to a chosen zero, MHz. Documentation only;
    /// the dynamics are fixed by the drive detunings.
    pub energy_offset_mhz: f64,
}

/// A classical laser field driving one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserField {
    pub lower: String,
    pub upper: String,
    /// Rabi frequency Ω, MHz (non-negative).
    pub rabi_mhz: f64,
    /// Detuning Δ of the laser from the transition, MHz. Positive = blue.
    pub detuning_mhz: f64,
    /// Projection cosθ of the laser wavevector onto the trap axis, in [−1, 1].
    pub axis_cosine: f64,
}

/// A spontaneous decay channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayChannel {
    pub from: String,
    pub to: String,
    /// Partial decay rate of this channel, MHz (positive). The total rate out
    /// of a level — its linewidth — is the sum over its channels.
    pub rate_mhz: f64,
}

/// A validated level scheme with its rotating-frame energies.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelScheme {
    levels: Vec<Level>,
    lasers: Vec<LaserField>,
    decays: Vec<DecayChannel>,
    /// Rotating-frame diagonal energy per level, MHz.
    frame_energies: Vec<f64>,
}

impl LevelScheme {
    /// Validate and build a scheme. All problems found are reported together.
    pub fn new(
        levels: Vec<Level>,
        lasers: Vec<LaserField>,
        decays: Vec<DecayChannel>,
    ) -> Result<Self> {
        let mut problems = Vec::new();

        if levels.is_empty() {
            problems.push("scheme has no levels".to_string());
        }
        for (i, level) in levels.iter().enumerate() {
            if level.label.is_empty() {
                problems.push(format!("level #{i} has an empty label"));
            }
            if !level.energy_offset_mhz.is_finite() {
                problems.push(format!("level '{}': energy offset is not finite", level.label));
            }
            for other in &levels[..i] {
                if other.label == level.label {
                    problems.push(format!("duplicate level label '{}'", level.label));
                }
            }
        }

        let index_of = |label: &str| levels.iter().position(|l| l.label == label);

        for laser in &lasers {
            for end in [&laser.lower, &laser.upper] {
                if index_of(end).is_none() {
                    problems.push(format!("laser references unknown level '{end}'"));
                }
            }
            if laser.lower == laser.upper {
                problems.push(format!("laser drives level '{}' to itself", laser.lower));
            }
            if !(laser.rabi_mhz >= 0.0) || !laser.rabi_mhz.is_finite() {
                problems.push(format!(
                    "laser {}-{}: Rabi frequency must be finite and >= 0, got {}",
                    laser.lower, laser.upper, laser.rabi_mhz
                ));
            }
            if !laser.detuning_mhz.is_finite() {
                problems.push(format!(
                    "laser {}-{}: detuning is not finite",
                    laser.lower, laser.upper
                ));
            }
            if !(laser.axis_cosine >= -1.0 && laser.axis_cosine <= 1.0) {
                problems.push(format!(
                    "laser {}-{}: axis cosine must lie in [-1, 1], got {}",
                    laser.lower, laser.upper, laser.axis_cosine
                ));
            }
        }

        for decay in &decays {
            for end in [&decay.from, &decay.to] {
                if index_of(end).is_none() {
                    problems.push(format!("decay references unknown level '{end}'"));
                }
            }
            if decay.from == decay.to {
                problems.push(format!("decay from level '{}' to itself", decay.from));
            }
            if !(decay.rate_mhz > 0.0) || !decay.rate_mhz.is_finite() {
                problems.push(format!(
                    "decay {}->{}: rate must be finite and > 0, got {}",
                    decay.from, decay.to, decay.rate_mhz
                ));
            }
        }

        if !problems.is_empty() {
            return Err(Error::InvalidScheme(problems));
        }

        let frame_energies = rotating_frame(&levels, &lasers)?;

        Ok(LevelScheme { levels, lasers, decays, frame_energies })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn lasers(&self) -> &[LaserField] {
        &self.lasers
    }

    pub fn decays(&self) -> &[DecayChannel] {
        &self.decays
    }

    /// Number of levels.
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    /// Rotating-frame diagonal energies, MHz, one per level.
    pub fn frame_energies(&self) -> &[f64] {
        &self.frame_energies
    }

    /// Total decay rate out of a level (its linewidth), MHz.
    pub fn linewidth_of(&self, index: usize) -> f64 {
        let label = &self.levels[index].label;
        self.decays
            .iter()
            .filter(|d| &d.from == label)
            .map(|d| d.rate_mhz)
            .sum()
    }

    /// Index into `lasers()` of the drive on the given transition.
    pub fn laser_index(&self, lower: &str, upper: &str) -> Option<usize> {
        self.lasers
            .iter()
            .position(|f| f.lower == lower && f.upper == upper)
    }

    /// A copy of the scheme with one laser's detuning replaced (the rotating
    /// frame is rebuilt). Used for spectrum scans.
    pub fn with_laser_detuning(&self, laser_index: usize, detuning_mhz: f64) -> Result<Self> {
        let mut lasers = self.lasers.clone();
        lasers
            .get_mut(laser_index)
            .ok_or_else(|| Error::Domain(format!("no laser with index {laser_index}")))?
            .detuning_mhz = detuning_mhz;
        LevelScheme::new(self.levels.clone(), lasers, self.decays.clone())
    }

    /// Connected components of the population-flow graph (active drives plus
    /// decay channels). More than one component means population cannot move
    /// between them, so no unique steady state exists.
    pub fn population_flow_components(&self) -> Vec<Vec<usize>> {
        let n = self.levels.len();
        let mut adjacency = vec![Vec::new(); n];
        let connect = |a: usize, b: usize, adjacency: &mut Vec<Vec<usize>>| {
            adjacency[a].push(b);
            adjacency[b].push(a);
        };
        for laser in &self.lasers {
            if laser.rabi_mhz > 0.0 {
                let a = self.index_of(&laser.lower).unwrap();
                let b = self.index_of(&laser.upper).unwrap();
                connect(a, b, &mut adjacency);
            }
        }
        for decay in &self.decays {
            let a = self.index_of(&decay.from).unwrap();
            let b = self.index_of(&decay.to).unwrap();
            connect(a, b, &mut adjacency);
        }

        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut component = Vec::new();
            seen[start] = true;
            while let Some(v) = stack.pop() {
                component.push(v);
                for &w in &adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            component.sort_unstable();
            components.push(component);
        }
        components
    }

    /// Labels for a set of level indices (diagnostics).
    pub fn labels_of(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.levels[i].label.clone()).collect()
    }
}

/// Assign rotating-frame energies by walking the drive graph. Every drive
/// enforces E(upper) = E(lower) − Δ; a revisited level checks consistency.
fn rotating_frame(levels: &[Level], lasers: &[LaserField]) -> Result<Vec<f64>> {
    let n = levels.len();
    let index_of = |label: &str| levels.iter().position(|l| l.label == label).unwrap();

    // Edges as (level, level, energy step lower->upper).
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for laser in lasers {
        let lo = index_of(&laser.lower);
        let up = index_of(&laser.upper);
        adjacency[lo].push((up, -laser.detuning_mhz));
        adjacency[up].push((lo, laser.detuning_mhz));
    }

    let scale = 1.0
        + lasers
            .iter()
            .map(|f| f.detuning_mhz.abs())
            .fold(0.0, f64::max);
    let tolerance = 1e-9 * scale;

    let mut energy = vec![f64::NAN; n];
    let mut problems = Vec::new();
    for root in 0..n {
        if !energy[root].is_nan() {
            continue;
        }
        energy[root] = 0.0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(w, step) in &adjacency[v] {
                let expected = energy[v] + step;
                if energy[w].is_nan() {
                    energy[w] = expected;
                    queue.push_back(w);
                } else if (energy[w] - expected).abs() > tolerance {
                    problems.push(format!(
                        "drive loop through '{}' has inconsistent detunings: no common rotating frame \
                         (mismatch {:.3e} MHz)",
                        levels[w].label,
                        (energy[w] - expected).abs()
                    ));
                }
            }
        }
    }

    if problems.is_empty() {
        Ok(energy)
    } else {
        problems.sort();
        problems.dedup();
        Err(Error::InvalidScheme(problems))
    }
}

/// Convenience constructor for the workhorse three-level Λ scheme: a weak
/// probe `g`-`e`, a strong coupling drive `r`-`e`, and the excited level `e`
/// decaying to both ground states with equal branching.
pub fn lambda_scheme(
    rabi_probe_mhz: f64,
    rabi_coupling_mhz: f64,
    detuning_probe_mhz: f64,
    detuning_coupling_mhz: f64,
    linewidth_mhz: f64,
) -> Result<LevelScheme> {
    LevelScheme::new(
        vec![
            Level { label: "g".into(), energy_offset_mhz: 0.0 },
            Level { label: "r".into(), energy_offset_mhz: 0.0 },
            Level { label: "e".into(), energy_offset_mhz: 0.0 },
        ],
        vec![
            LaserField {
                lower: "g".into(),
                upper: "e".into(),
                rabi_mhz: rabi_probe_mhz,
                detuning_mhz: detuning_probe_mhz,
                axis_cosine: 1.0,
            },
            LaserField {
                lower: "r".into(),
                upper: "e".into(),
                rabi_mhz: rabi_coupling_mhz,
                detuning_mhz: detuning_coupling_mhz,
                axis_cosine: 0.0,
            },
        ],
        vec![
            DecayChannel { from: "e".into(), to: "g".into(), rate_mhz: linewidth_mhz / 2.0 },
            DecayChannel { from: "e".into(), to: "r".into(), rate_mhz: linewidth_mhz / 2.0 },
        ],
    )
}

/// Two-level scheme `g`-`e` with drive Ω at detuning Δ and decay γ.
pub fn two_level_scheme(rabi_mhz: f64, detuning_mhz: f64, linewidth_mhz: f64) -> Result<LevelScheme> {
    LevelScheme::new(
        vec![
            Level { label: "g".into(), energy_offset_mhz: 0.0 },
            Level { label: "e".into(), energy_offset_mhz: 0.0 },
        ],
        vec![LaserField {
            lower: "g".into(),
            upper: "e".into(),
            rabi_mhz,
            detuning_mhz,
            axis_cosine: 1.0,
        }],
        vec![DecayChannel { from: "e".into(), to: "g".into(), rate_mhz: linewidth_mhz }],
    )
}
