//! Propagation of the bound-state amplitudes.
//!
//! Amplitudes are stored in the Schrödinger picture: without coupling,
//! a_i(t) = c_i e^{−iE_i (t − t₀)} where c_i is the amplitude prepared at the
//! reference time t₀. Density matrices use ρ_ij = conj(a_i) a_j, so a free
//! coherence evolves as e^{−iΔ_ij t} with Δ_ij = I_p^(i) − I_p^(j).
//!
//! Every propagator uses the same Strang splitting per step of length dt:
//! half a step of exact free phase, the coupling W(t + dt/2)·C exponentiated
//! through the eigenbasis of the real symmetric pattern C, and another half
//! step of free phase.
//!
//! The state is prepared at the reference time t₀. Grid points before t₀ carry
//! the freely evolving prepared state (so probe windows may extend into the
//! past); coupling, jumps and damping act only on steps starting at or after t₀.

pub mod density;
pub mod ensemble;
mod lindblad;
pub mod store;

pub use density::{DensityMatrixSeries, Provenance};
pub use ensemble::{ensemble_density_matrix, sub_seed, TrajectoryEnsemble};
pub use lindblad::lindblad_propagate;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::system::LevelSystem;
use crate::C64;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Upper bound on dt·ω for the fastest energy or coupling carrier.
pub const MAX_PHASE_PER_STEP: f64 = 0.1;
/// Upper bound on the first-order jump probability Γ·dt.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

/// One quantum jump. `step` indexes the propagation grid (not the recorded one):
/// the jump was applied at the start of the step from `time` to `time + dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub step: usize,
    pub time: f64,
    pub source: usize,
    pub target: usize,
    pub phase: f64,
}

/// Amplitudes a_i(t) on a uniform grid, row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveTrajectory {
    pub grid: TimeGrid,
    pub n_levels: usize,
    pub amplitudes: Vec<C64>,
    pub jumps: Vec<JumpRecord>,
}

impl WaveTrajectory {
    pub fn len(&self) -> usize {
        self.grid.count
    }

    pub fn is_empty(&self) -> bool {
        self.grid.count == 0
    }

    pub fn at(&self, k: usize) -> &[C64] {
        &self.amplitudes[k * self.n_levels..(k + 1) * self.n_levels]
    }

    pub fn amplitude(&self, k: usize, level: usize) -> C64 {
        self.amplitudes[k * self.n_levels + level]
    }

    pub fn norm_sqr(&self, k: usize) -> f64 {
        self.at(k).iter().map(|a| a.norm_sqr()).sum()
    }

    /// Σ_i a_i(t_k): the bound wave packet seen by a constant dipole.
    pub fn coherent_sum(&self) -> Vec<C64> {
        self.amplitudes.chunks_exact(self.n_levels).map(|row| row.iter().sum()).collect()
    }
}

/// Precomputed per-system step operators.
pub(crate) struct Stepper<'a> {
    system: &'a LevelSystem,
    dt: f64,
    half_free: Vec<C64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(system: &'a LevelSystem, dt: f64) -> Result<Self> {
        system.validate()?;
        let fastest = system.fastest_frequency();
        if !(dt > 0.0) || dt * fastest >= MAX_PHASE_PER_STEP {
            return Err(Error::UnderResolved(format!(
                "dt = {dt} with fastest frequency {fastest} gives dt·ω = {} (must be < {MAX_PHASE_PER_STEP})",
                dt * fastest
            )));
        }
        let half_free = system
            .levels()
            .iter()
            .map(|l| C64::from_polar(1.0, -l.energy * 0.5 * dt))
            .collect();
        let eig = SymmetricEigen::new(system.coupling_matrix().clone());
        Ok(Stepper { system, dt, half_free, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub(crate) fn dt(&self) -> f64 {
        self.dt
    }

    /// Whether the step starting at `t` belongs to the driven, dissipative evolution.
    pub(crate) fn active(&self, t: f64) -> bool {
        t >= self.system.reference_time() - 1e-9 * self.dt
    }

    fn free_step(&self, a: &mut [C64]) {
        for (x, f) in a.iter_mut().zip(&self.half_free) {
            *x *= f * f;
        }
    }

    pub(crate) fn half_free(&self) -> &[C64] {
        &self.half_free
    }

    /// exp(−i W dt C) as a dense complex matrix; `None` when W vanishes.
    pub(crate) fn coupling_propagator(&self, t: f64) -> Option<DMatrix<C64>> {
        let w = self.system.coupling_at(t + 0.5 * self.dt);
        if w == 0.0 {
            return None;
        }
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let phases: Vec<C64> =
            self.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -w * self.dt * l)).collect();
        Some(DMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| phases[k] * (v[(i, k)] * v[(j, k)])).sum()
        }))
    }

    /// Advance amplitudes from t to t + dt.
    fn unitary_step(&self, a: &mut [C64], t: f64, scratch: &mut [C64]) {
        for (x, f) in a.iter_mut().zip(&self.half_free) {
            *x *= f;
        }
        let w = self.system.coupling_at(t + 0.5 * self.dt);
        if w != 0.0 {
            let v = &self.eigenvectors;
            let n = a.len();
            for k in 0..n {
                let mut y = C64::new(0.0, 0.0);
                for i in 0..n {
                    y += a[i] * v[(i, k)];
                }
                scratch[k] = y * C64::from_polar(1.0, -w * self.dt * self.eigenvalues[k]);
            }
            for (i, x) in a.iter_mut().enumerate() {
                let mut y = C64::new(0.0, 0.0);
                for k in 0..n {
                    y += scratch[k] * v[(i, k)];
                }
                *x = y;
            }
        }
        for (x, f) in a.iter_mut().zip(&self.half_free) {
            *x *= f;
        }
    }
}

/// Amplitudes at the grid start, obtained by free evolution from the reference time.
pub(crate) fn initial_state(system: &LevelSystem, start: f64) -> Vec<C64> {
    let dt = start - system.reference_time();
    system
        .levels()
        .iter()
        .map(|l| l.amplitude * C64::from_polar(1.0, -l.energy * dt))
        .collect()
}

fn check_stride(grid: &TimeGrid, stride: usize) -> Result<()> {
    grid.validate()?;
    if stride == 0 {
        return Err(crate::error::invalid("record stride must be at least 1"));
    }
    Ok(())
}

fn evolve(
    system: &LevelSystem,
    grid: &TimeGrid,
    stride: usize,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<WaveTrajectory> {
    check_stride(grid, stride)?;
    let stepper = Stepper::new(system, grid.step)?;
    let dt = grid.step;
    let n = system.len();
    if rng.is_some() && system.max_decay_rate() * dt > MAX_JUMP_PROBABILITY {
        return Err(Error::UnderResolved(format!(
            "Γ·dt = {} exceeds {MAX_JUMP_PROBABILITY}; first-order jump probability invalid",
            system.max_decay_rate() * dt
        )));
    }
    let channels: Vec<_> = system.decays().iter().filter(|d| d.rate > 0.0).copied().collect();
    let damping: Vec<(usize, f64)> =
        channels.iter().map(|d| (d.source, (-0.5 * d.rate * dt).exp())).collect();
    let stochastic = !channels.is_empty();

    let recorded = grid.strided(stride);
    let mut amplitudes = Vec::with_capacity(recorded.count * n);
    let mut jumps = Vec::new();
    let mut a = initial_state(system, grid.start);
    let mut scratch = vec![C64::new(0.0, 0.0); n];
    amplitudes.extend_from_slice(&a);
    let steps = (recorded.count - 1) * stride;
    let mut draws = vec![0.0; channels.len()];

    for k in 0..steps {
        let t = grid.value(k);
        if !stepper.active(t) {
            stepper.free_step(&mut a);
            if (k + 1) % stride == 0 {
                amplitudes.extend_from_slice(&a);
            }
            continue;
        }
        if let (true, Some(rng)) = (stochastic, rng.as_deref_mut()) {
            for d in draws.iter_mut() {
                *d = rng.gen::<f64>();
            }
            let fired = channels
                .iter()
                .zip(&draws)
                .find(|(ch, &eps)| ch.rate * a[ch.source].norm_sqr() * dt > eps)
                .map(|(ch, _)| *ch);
            if let Some(ch) = fired {
                let phase = rng.gen::<f64>() * TAU;
                a.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                a[ch.target] = C64::from_polar(1.0, phase);
                jumps.push(JumpRecord { step: k, time: t, source: ch.source, target: ch.target, phase });
            }
        }
        stepper.unitary_step(&mut a, t, &mut scratch);
        if stochastic && rng.is_some() {
            for &(s, f) in &damping {
                a[s] *= f;
            }
            let norm = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            a.iter_mut().for_each(|x| *x /= norm);
        }
        if (k + 1) % stride == 0 {
            amplitudes.extend_from_slice(&a);
        }
    }
    Ok(WaveTrajectory { grid: recorded, n_levels: n, amplitudes, jumps })
}

/// Closed-system propagation; decay channels are ignored.
pub fn propagate_schrodinger(system: &LevelSystem, grid: &TimeGrid) -> Result<WaveTrajectory> {
    evolve(system, grid, 1, None)
}

/// As [`propagate_schrodinger`], recording every `stride`-th grid point.
pub fn propagate_schrodinger_strided(
    system: &LevelSystem,
    grid: &TimeGrid,
    stride: usize,
) -> Result<WaveTrajectory> {
    evolve(system, grid, stride, None)
}

/// Quantum-jump trajectory.
///
/// Each step draws one ε ∈ [0, 1) per channel in channel order; the first
/// channel with Γ|a_source|² dt > ε fires, collapsing the state onto its
/// target level with a uniform random phase. Between jumps the source levels
/// are damped by e^{−Γ dt/2} and the state renormalized.
pub fn propagate_mcwf(system: &LevelSystem, grid: &TimeGrid, seed: u64) -> Result<WaveTrajectory> {
    propagate_mcwf_strided(system, grid, seed, 1)
}

pub fn propagate_mcwf_strided(
    system: &LevelSystem,
    grid: &TimeGrid,
    seed: u64,
    stride: usize,
) -> Result<WaveTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    evolve(system, grid, stride, Some(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{CouplingTerm, DecayChannel, Level};

    fn grid(start: f64, dt: f64, count: usize) -> TimeGrid {
        TimeGrid::new(start, dt, count).unwrap()
    }

    #[test]
    fn single_level_period() {
        let sys = LevelSystem::new(vec![Level::new("g", -0.5, C64::new(1.0, 0.0))], vec![], vec![], 0.0).unwrap();
        // 2π/0.5 = 4π; pick dt so the period is an exact number of steps.
        let steps = 40_000;
        let dt = 4.0 * std::f64::consts::PI / steps as f64;
        let traj = propagate_schrodinger(&sys, &grid(0.0, dt, steps + 1)).unwrap();
        let end = traj.amplitude(steps, 0);
        assert!((end - C64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn resonant_rabi_transfer() {
        // Constant W couples two degenerate levels: a_e(t) = −i sin(W t).
        let w = 0.01;
        let sys = LevelSystem::new(
            vec![Level::new("a", -0.3, C64::new(1.0, 0.0)), Level::new("b", -0.3, C64::new(0.0, 0.0))],
            vec![CouplingTerm { amplitude: w, center: 0.0, width: None, frequency: 0.0, phase: std::f64::consts::FRAC_PI_2 }],
            vec![],
            0.0,
        )
        .unwrap();
        let dt = 0.05;
        let half_rabi = std::f64::consts::FRAC_PI_2 / w;
        let steps = (half_rabi / dt).round() as usize;
        let traj = propagate_schrodinger(&sys, &grid(0.0, dt, steps + 1)).unwrap();
        for k in (0..=steps).step_by(500) {
            let t = k as f64 * dt;
            let oracle = (w * t).sin().powi(2);
            assert!((traj.amplitude(k, 1).norm_sqr() - oracle).abs() < 1e-10, "t={t}");
        }
        assert!((traj.amplitude(steps, 1).norm_sqr() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_coarse_grid() {
        let sys = LevelSystem::new(vec![Level::new("g", -0.5, C64::new(1.0, 0.0))], vec![], vec![], 0.0).unwrap();
        let err = propagate_schrodinger(&sys, &grid(0.0, 0.5, 10)).unwrap_err();
        assert_eq!(err.category(), "under-resolved-grid");
    }

    #[test]
    fn rejects_large_jump_probability() {
        let sys = LevelSystem::new(
            vec![Level::new("g", -0.05, C64::new(0.0, 0.0)), Level::new("e", -0.01, C64::new(1.0, 0.0))],
            vec![],
            vec![DecayChannel::new(1, 0, 0.5)],
            0.0,
        )
        .unwrap();
        assert!(propagate_mcwf(&sys, &grid(0.0, 0.5, 10), 1).is_err());
        assert!(propagate_schrodinger(&sys, &grid(0.0, 0.5, 10)).is_ok());
    }

    #[test]
    fn strided_record_matches_full() {
        let sys = LevelSystem::new(
            vec![Level::with_population("g", -0.5, 0.5, 0.0), Level::with_population("e", -0.2, 0.5, 1.0)],
            vec![CouplingTerm { amplitude: 0.02, center: 50.0, width: Some(20.0), frequency: 0.3, phase: 0.0 }],
            vec![DecayChannel::new(1, 0, 0.01)],
            0.0,
        )
        .unwrap();
        let g = grid(0.0, 0.1, 1001);
        let full = propagate_mcwf(&sys, &g, 9).unwrap();
        let strided = propagate_mcwf_strided(&sys, &g, 9, 10).unwrap();
        assert_eq!(strided.len(), 101);
        for k in 0..101 {
            assert_eq!(strided.at(k), full.at(10 * k));
        }
        assert_eq!(strided.jumps, full.jumps);
    }
}
