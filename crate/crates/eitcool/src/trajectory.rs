//! Monte-Carlo wavefunction simulation of a driven level scheme coupled to
//! one quantized harmonic mode.
//!
//! The joint state lives in (internal ⊗ Fock) space and evolves under the
//! non-Hermitian effective Hamiltonian
//!
//!   H = H_internal + ν a†a
//!       + Σ_lasers (Ω/2)(σ⁺(1 + i η cosθ (a+a†)) + h.c.)
//!       − (i/2) Σ_decays γ |upper⟩⟨upper|,
//!
//! expanded to first order in the Lamb-Dicke parameter η. Jumps are detected
//! by the decayed squared norm crossing a uniform random threshold and
//! located in time by dyadic bisection; the jump operator
//! C = √γ |lower⟩⟨upper|(1 + i η u (a+a†)) carries the emission recoil with
//! projection u drawn uniformly on [−1, 1] (isotropic pattern, ⟨u²⟩ = 1/3).
//!
//! Time stepping uses exact step propagators: exp(−iH·dt/2^k) for
//! k = 0..=20 is computed once per configuration (the finest scale by a
//! scaled Taylor expansion, the rest by repeated squaring) and shared across
//! trajectories, so the step size is limited by jump statistics, not by
//! integrator accuracy. Time is bookkept in integer ticks of dt/2^20, which
//! makes the output grid exact and keeps runs bit-reproducible for a given
//! seed regardless of thread count.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ConfigIssue, Error};
use crate::ratecool::PhononDistribution;
use crate::scheme::LevelScheme;
use crate::trap::TrapMode;
use crate::Result;

/// Finest dyadic subdivision of one step: resolution dt/2^20.
const MAX_DEPTH: usize = 20;
/// Permitted persistent step halvings before the configuration is rejected.
const MAX_HALVINGS: usize = 4;
/// Largest tolerable probability loss in a single committed step.
const MAX_STEP_DROP: f64 = 0.1;
/// Largest tolerable population in the top Fock state.
const MAX_TOP_POPULATION: f64 = 1e-4;

/// Full description of one trajectory run.
#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub scheme: LevelScheme,
    pub mode: TrapMode,
    /// Fock-space truncation: states n = 0..=n_max are kept.
    pub n_max: usize,
    pub t_final_us: f64,
    /// Output-grid spacing and base propagation step.
    pub dt_us: f64,
    pub seed: u64,
    /// Mean occupation of the initial thermal motional state.
    pub initial_n: f64,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if !(self.t_final_us > 0.0) || !self.t_final_us.is_finite() {
            issues.push(ConfigIssue {
                field: "t_final_us".into(),
                message: format!("must be finite and > 0, got {}", self.t_final_us),
            });
        }
        if !(self.dt_us > 0.0) || !self.dt_us.is_finite() {
            issues.push(ConfigIssue {
                field: "dt_us".into(),
                message: format!("must be finite and > 0, got {}", self.dt_us),
            });
        } else if self.t_final_us.is_finite() && self.dt_us > self.t_final_us {
            issues.push(ConfigIssue {
                field: "dt_us".into(),
                message: format!(
                    "step {} µs exceeds the simulated span {} µs",
                    self.dt_us, self.t_final_us
                ),
            });
        }
        if !(self.initial_n >= 0.0) || !self.initial_n.is_finite() {
            issues.push(ConfigIssue {
                field: "initial_n".into(),
                message: format!("must be finite and >= 0, got {}", self.initial_n),
            });
        } else if (self.n_max as f64) < 5.0 * (1.0 + self.initial_n) {
            issues.push(ConfigIssue {
                field: "n_max".into(),
                message: format!(
                    "phonon truncation {} is below 5·(1 + initial_n) = {}",
                    self.n_max,
                    5.0 * (1.0 + self.initial_n)
                ),
            });
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }

    fn grid_steps(&self) -> usize {
        ((self.t_final_us / self.dt_us) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Record of a single trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times_us: Vec<f64>,
    /// ⟨n(t)⟩ of the normalized state on the output grid.
    pub mean_n: Vec<f64>,
    pub jump_count: usize,
    /// Fock-state marginal averaged over the final 20% of grid points.
    pub tail_fock_average: Vec<f64>,
    /// Largest relative per-step increase of the squared norm observed
    /// (should be at the level of propagator round-off).
    pub max_norm_growth: f64,
    /// Persistent step halvings forced by the jump-probability guard.
    pub halvings: usize,
}

/// Ensemble average over independent trajectories.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times_us: Vec<f64>,
    pub mean_n: Vec<f64>,
    /// Standard error of the mean across trajectories, per grid point.
    pub stderr_n: Vec<f64>,
    /// Phonon distribution averaged over the final 20% of each trajectory.
    pub steady_pn: PhononDistribution,
    pub n_trajectories: usize,
    pub seed: u64,
}

/// Per-trajectory seed: the documented mixing function is splitmix64 applied
/// to base ⊕ (index+1)·φ64, so seeds for different indices (and different
/// bases) decorrelate even when the inputs differ in one bit.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    splitmix64(base ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Joint-space index of |level i, phonon n⟩.
#[inline]
fn joint(i: usize, n: usize, fock: usize) -> usize {
    i * fock + n
}

/// Effective non-Hermitian Hamiltonian on (internal ⊗ Fock), MHz units.
fn effective_hamiltonian(
    scheme: &LevelScheme,
    mode: &TrapMode,
    n_max: usize,
) -> DMatrix<Complex64> {
    let d = scheme.dim();
    let fock = n_max + 1;
    let dim = d * fock;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);

    for (i, &energy) in scheme.frame_energies().iter().enumerate() {
        for n in 0..fock {
            h[(joint(i, n, fock), joint(i, n, fock))] +=
                Complex64::new(energy + mode.frequency_mhz * n as f64, 0.0);
        }
    }

    for laser in scheme.lasers() {
        let lo = scheme.index_of(&laser.lower).unwrap();
        let up = scheme.index_of(&laser.upper).unwrap();
        let half = laser.rabi_mhz / 2.0;
        let eta = mode.lamb_dicke * laser.axis_cosine;
        for n in 0..fock {
            // Carrier: (Ω/2)(|up⟩⟨lo| + |lo⟩⟨up|) ⊗ 1.
            h[(joint(up, n, fock), joint(lo, n, fock))] += Complex64::new(half, 0.0);
            h[(joint(lo, n, fock), joint(up, n, fock))] += Complex64::new(half, 0.0);
            // Sidebands: (Ω/2)·iη(a+a†) on the raising part, −iη on the
            // lowering part. ⟨m|(a+a†)|n⟩ connects m = n±1.
            if n + 1 < fock {
                let element = half * eta * ((n + 1) as f64).sqrt();
                h[(joint(up, n + 1, fock), joint(lo, n, fock))] +=
                    Complex64::new(0.0, element);
                h[(joint(lo, n, fock), joint(up, n + 1, fock))] +=
                    Complex64::new(0.0, -element);
            }
            if n > 0 {
                let element = half * eta * (n as f64).sqrt();
                h[(joint(up, n - 1, fock), joint(lo, n, fock))] +=
                    Complex64::new(0.0, element);
                h[(joint(lo, n, fock), joint(up, n - 1, fock))] +=
                    Complex64::new(0.0, -element);
            }
        }
    }

    for channel in scheme.decays() {
        let from = scheme.index_of(&channel.from).unwrap();
        for n in 0..fock {
            h[(joint(from, n, fock), joint(from, n, fock))] +=
                Complex64::new(0.0, -channel.rate_mhz / 2.0);
        }
    }

    h
}

/// exp(A) for a dense complex matrix by Taylor series under scaling and
/// squaring; accurate to round-off for the small-norm steps used here.
fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let dim = a.nrows();
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * dim as f64;
    let squarings = if norm > 0.0625 { (norm / 0.0625).log2().ceil() as usize } else { 0 };
    let scaled = a / Complex64::new((1u64 << squarings.min(63)) as f64, 0.0);

    let identity = DMatrix::<Complex64>::identity(dim, dim);
    // Horner evaluation of Σ_{j≤16} B^j/j!.
    let mut result = identity.clone();
    for j in (1..=16).rev() {
        result = &identity + (&scaled * result) / Complex64::new(j as f64, 0.0);
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Shared bank of exact step propagators: powers[k] = exp(−iH·dt/2^k).
struct PropagatorCache {
    powers: Vec<DMatrix<Complex64>>,
}

impl PropagatorCache {
    fn build(scheme: &LevelScheme, mode: &TrapMode, n_max: usize, dt_us: f64) -> Self {
        let h = effective_hamiltonian(scheme, mode, n_max);
        let finest_step = dt_us / (1u64 << MAX_DEPTH) as f64;
        let generator = &h * Complex64::new(0.0, -finest_step);
        let mut powers = vec![DMatrix::zeros(0, 0); MAX_DEPTH + 1];
        powers[MAX_DEPTH] = expm(&generator);
        for k in (0..MAX_DEPTH).rev() {
            powers[k] = &powers[k + 1] * &powers[k + 1];
        }
        PropagatorCache { powers }
    }

    /// Propagator over 2^m ticks (one tick = dt/2^MAX_DEPTH).
    fn over_ticks_log2(&self, m: usize) -> &DMatrix<Complex64> {
        &self.powers[MAX_DEPTH - m]
    }
}

struct Walker<'a> {
    cache: &'a PropagatorCache,
    scheme: &'a LevelScheme,
    mode: &'a TrapMode,
    fock: usize,
    rng: ChaCha8Rng,
    psi: DVector<Complex64>,
    threshold: f64,
    /// Persistent halvings: committed steps are capped at 2^(MAX_DEPTH −
    /// halvings) ticks.
    halvings: usize,
    jump_count: usize,
    max_norm_growth: f64,
    scratch: DVector<Complex64>,
}

impl<'a> Walker<'a> {
    fn draw_threshold(rng: &mut ChaCha8Rng) -> f64 {
        loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                return r;
            }
        }
    }

    /// Advance by `ticks`, stepping in dyadic chunks, handling jumps.
    fn advance(&mut self, mut ticks: u64) -> Result<()> {
        while ticks > 0 {
            let cap = (MAX_DEPTH - self.halvings) as u32;
            let m = (63 - ticks.leading_zeros()).min(cap);
            let norm_before = self.psi.norm_squared();
            self.cache
                .over_ticks_log2(m as usize)
                .mul_to(&self.psi, &mut self.scratch);
            let norm_after = self.scratch.norm_squared();

            if norm_after <= self.threshold {
                // A jump occurred inside this chunk: bisect to a tick.
                ticks -= self.bisect_and_jump(m)?;
                continue;
            }

            let drop = 1.0 - norm_after / norm_before;
            if drop > MAX_STEP_DROP {
                if self.halvings >= MAX_HALVINGS {
                    return Err(Error::Config(vec![ConfigIssue {
                        field: "dt_us".into(),
                        message: format!(
                            "per-step decay probability {drop:.3} still exceeds {MAX_STEP_DROP} \
                             after {MAX_HALVINGS} step halvings; choose a smaller step",
                        ),
                    }]));
                }
                self.halvings += 1;
                continue;
            }

            std::mem::swap(&mut self.psi, &mut self.scratch);
            let growth = norm_after / norm_before - 1.0;
            if growth > self.max_norm_growth {
                self.max_norm_growth = growth;
            }
            self.check_truncation()?;
            ticks -= 1 << m;
        }
        Ok(())
    }

    /// The norm crossed the threshold somewhere inside a 2^m-tick chunk.
    /// Narrow the crossing to one tick, advance to it, apply the jump, and
    /// return the ticks consumed.
    fn bisect_and_jump(&mut self, chunk_log2: u32) -> Result<u64> {
        let mut consumed = 0u64;
        for m in (0..chunk_log2).rev() {
            self.cache
                .over_ticks_log2(m as usize)
                .mul_to(&self.psi, &mut self.scratch);
            if self.scratch.norm_squared() > self.threshold {
                // Crossing lies in the second half: commit the first.
                std::mem::swap(&mut self.psi, &mut self.scratch);
                consumed += 1 << m;
            }
        }
        // One final tick crosses the threshold.
        self.cache
            .over_ticks_log2(0)
            .mul_to(&self.psi, &mut self.scratch);
        std::mem::swap(&mut self.psi, &mut self.scratch);
        consumed += 1;

        self.apply_jump()?;
        self.check_truncation()?;
        Ok(consumed)
    }

    fn apply_jump(&mut self) -> Result<()> {
        // Channel probabilities ∝ γ_j · (population in the channel's upper
        // level), the squared norm of C_j|ψ⟩ at lowest Lamb-Dicke order.
        let decays = self.scheme.decays();
        let mut weights = Vec::with_capacity(decays.len());
        let mut total = 0.0;
        for channel in decays {
            let from = self.scheme.index_of(&channel.from).unwrap();
            let population: f64 = (0..self.fock)
                .map(|n| self.psi[joint(from, n, self.fock)].norm_sqr())
                .sum();
            let w = channel.rate_mhz * population;
            weights.push(w);
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::Numerical(
                "jump threshold crossed with no population in any decaying level".into(),
            ));
        }
        let mut pick: f64 = self.rng.random::<f64>() * total;
        let mut chosen = decays.len() - 1;
        for (j, w) in weights.iter().enumerate() {
            if pick < *w {
                chosen = j;
                break;
            }
            pick -= w;
        }
        let channel = &decays[chosen];
        let from = self.scheme.index_of(&channel.from).unwrap();
        let to = self.scheme.index_of(&channel.to).unwrap();

        // Emission recoil projection on the trap axis, isotropic pattern.
        let u: f64 = self.rng.random_range(-1.0..=1.0);
        let recoil = Complex64::new(0.0, self.mode.lamb_dicke * u);

        // |ψ'⟩ = |to⟩⟨from| (1 + iηu(a+a†)) |ψ⟩, then renormalize.
        let mut jumped = DVector::<Complex64>::zeros(self.psi.len());
        for n in 0..self.fock {
            let mut amplitude = self.psi[joint(from, n, self.fock)];
            if n + 1 < self.fock {
                amplitude += recoil
                    * ((n + 1) as f64).sqrt()
                    * self.psi[joint(from, n + 1, self.fock)];
            }
            if n > 0 {
                amplitude +=
                    recoil * (n as f64).sqrt() * self.psi[joint(from, n - 1, self.fock)];
            }
            jumped[joint(to, n, self.fock)] = amplitude;
        }
        let norm = jumped.norm();
        if !(norm > 0.0) {
            return Err(Error::Numerical(
                "jump operator annihilated the state".into(),
            ));
        }
        jumped /= Complex64::new(norm, 0.0);
        self.psi = jumped;
        self.jump_count += 1;
        self.threshold = Self::draw_threshold(&mut self.rng);
        Ok(())
    }

    fn check_truncation(&self) -> Result<()> {
        let total = self.psi.norm_squared();
        let dim = self.scheme.dim();
        let top: f64 = (0..dim)
            .map(|i| self.psi[joint(i, self.fock - 1, self.fock)].norm_sqr())
            .sum();
        if top > MAX_TOP_POPULATION * total {
            return Err(Error::Truncation { leakage: top / total, n_max: self.fock - 1 });
        }
        Ok(())
    }

    fn mean_n(&self) -> f64 {
        let mut weighted = 0.0;
        let mut total = 0.0;
        for i in 0..self.scheme.dim() {
            for n in 0..self.fock {
                let p = self.psi[joint(i, n, self.fock)].norm_sqr();
                weighted += n as f64 * p;
                total += p;
            }
        }
        weighted / total
    }

    fn fock_marginal(&self, accumulate: &mut [f64]) {
        let total = self.psi.norm_squared();
        for n in 0..self.fock {
            let mut p = 0.0;
            for i in 0..self.scheme.dim() {
                p += self.psi[joint(i, n, self.fock)].norm_sqr();
            }
            accumulate[n] += p / total;
        }
    }
}

/// Draw the initial Fock state from the thermal distribution of mean
/// `initial_n`, capped one headroom band below the truncation so a fresh
/// trajectory never starts against the Fock-space ceiling.
fn sample_initial_fock(rng: &mut ChaCha8Rng, initial_n: f64, n_max: usize) -> usize {
    let cap = n_max.saturating_sub((n_max / 5).max(2));
    if initial_n == 0.0 {
        return 0;
    }
    let ratio = initial_n / (initial_n + 1.0);
    // Inverse CDF over the truncated, renormalized geometric weights.
    let total = 1.0 - ratio.powi(cap as i32 + 1);
    let draw: f64 = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    let mut weight = 1.0 / (initial_n + 1.0);
    for n in 0..=cap {
        cumulative += weight;
        if draw < cumulative {
            return n;
        }
        weight *= ratio;
    }
    cap
}

fn run_with_cache(
    config: &TrajectoryConfig,
    cache: &PropagatorCache,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let fock = config.n_max + 1;
    let dim = config.scheme.dim() * fock;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n0 = sample_initial_fock(&mut rng, config.initial_n, config.n_max);
    let mut psi = DVector::<Complex64>::zeros(dim);
    psi[joint(0, n0, fock)] = Complex64::new(1.0, 0.0);
    let threshold = Walker::draw_threshold(&mut rng);

    let mut walker = Walker {
        cache,
        scheme: &config.scheme,
        mode: &config.mode,
        fock,
        rng,
        psi,
        threshold,
        halvings: 0,
        jump_count: 0,
        max_norm_growth: 0.0,
        scratch: DVector::zeros(dim),
    };

    let steps = config.grid_steps();
    let tail_start = steps - steps / 5;
    let mut times = Vec::with_capacity(steps + 1);
    let mut means = Vec::with_capacity(steps + 1);
    let mut tail = vec![0.0; fock];
    let mut tail_count = 0usize;

    for step in 0..=steps {
        times.push(step as f64 * config.dt_us);
        means.push(walker.mean_n());
        if step >= tail_start {
            walker.fock_marginal(&mut tail);
            tail_count += 1;
        }
        if step < steps {
            walker.advance(1 << MAX_DEPTH)?;
        }
    }

    for value in &mut tail {
        *value /= tail_count as f64;
    }

    Ok(TrajectoryRecord {
        times_us: times,
        mean_n: means,
        jump_count: walker.jump_count,
        tail_fock_average: tail,
        max_norm_growth: walker.max_norm_growth,
        halvings: walker.halvings,
    })
}

/// Run one trajectory with the configuration's own seed.
pub fn run_trajectory(config: &TrajectoryConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let cache =
        PropagatorCache::build(&config.scheme, &config.mode, config.n_max, config.dt_us);
    run_with_cache(config, &cache, config.seed)
}

/// Average `n_trajectories` independent trajectories. Per-trajectory seeds
/// come from [`mix_seed`]; trajectories run in parallel and are reduced in
/// index order, so results are bit-identical for a given seed regardless of
/// thread count.
pub fn ensemble_average(
    config: &TrajectoryConfig,
    n_trajectories: usize,
) -> Result<EnsembleResult> {
    config.validate()?;
    if n_trajectories < 2 {
        return Err(Error::Domain(format!(
            "ensemble needs at least 2 trajectories, got {n_trajectories}"
        )));
    }
    let cache =
        PropagatorCache::build(&config.scheme, &config.mode, config.n_max, config.dt_us);

    let outcomes: Vec<(u64, Result<TrajectoryRecord>)> = (0..n_trajectories)
        .into_par_iter()
        .map(|index| {
            let seed = mix_seed(config.seed, index as u64);
            (seed, run_with_cache(config, &cache, seed))
        })
        .collect();

    let mut records = Vec::with_capacity(n_trajectories);
    for (index, (seed, outcome)) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(record) => records.push(record),
            Err(Error::Config(issues)) => {
                return Err(Error::Config(
                    issues
                        .into_iter()
                        .map(|issue| ConfigIssue {
                            field: issue.field,
                            message: format!(
                                "trajectory {index} (seed {seed:#018x}): {}",
                                issue.message
                            ),
                        })
                        .collect(),
                ));
            }
            Err(e) => {
                return Err(Error::Numerical(format!(
                    "trajectory {index} (seed {seed:#018x}) failed: {e}"
                )));
            }
        }
    }

    let grid = records[0].times_us.clone();
    let points = grid.len();
    let mut mean_n = Vec::with_capacity(points);
    let mut stderr_n = Vec::with_capacity(points);
    let mut samples = vec![0.0; n_trajectories];
    for t in 0..points {
        for (k, record) in records.iter().enumerate() {
            samples[k] = record.mean_n[t];
        }
        let (mean, sem) = crate::numeric::mean_and_sem(&samples);
        mean_n.push(mean);
        stderr_n.push(sem);
    }

    let fock = config.n_max + 1;
    let mut marginal = vec![0.0; fock];
    for record in &records {
        for (n, p) in record.tail_fock_average.iter().enumerate() {
            marginal[n] += p;
        }
    }
    for value in &mut marginal {
        *value /= n_trajectories as f64;
    }
    let steady_pn = PhononDistribution::try_new(marginal, 0.0)?;

    Ok(EnsembleResult {
        times_us: grid,
        mean_n,
        stderr_n,
        steady_pn,
        n_trajectories,
        seed: config.seed,
    })
}
