//! Master-equation oracle for the quantum-jump ensemble.

use super::{initial_state, DensityMatrixSeries, Provenance, Stepper};
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use crate::system::{DecayChannel, LevelSystem};
use crate::C64;
use nalgebra::DMatrix;

/// D(ρ) = Σ_m Γ_m (|t⟩⟨s|ρ|s⟩⟨t| − ½{|s⟩⟨s|, ρ}) for ρ in the usual
/// ρ = |ψ⟩⟨ψ| orientation.
fn dissipator(rho: &DMatrix<C64>, channels: &[DecayChannel]) -> DMatrix<C64> {
    let n = rho.nrows();
    let mut d = DMatrix::zeros(n, n);
    for ch in channels {
        let (s, t, g) = (ch.source, ch.target, ch.rate);
        d[(t, t)] += rho[(s, s)] * g;
        for j in 0..n {
            d[(s, j)] -= rho[(s, j)] * (0.5 * g);
            d[(j, s)] -= rho[(j, s)] * (0.5 * g);
        }
    }
    d
}

fn dissipate(rho: &mut DMatrix<C64>, channels: &[DecayChannel], h: f64) {
    if channels.is_empty() {
        return;
    }
    let k1 = dissipator(rho, channels);
    let k2 = dissipator(&(&*rho + &k1 * C64::from(0.5 * h)), channels);
    let k3 = dissipator(&(&*rho + &k2 * C64::from(0.5 * h)), channels);
    let k4 = dissipator(&(&*rho + &k3 * C64::from(h)), channels);
    *rho += (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(h / 6.0);
}

/// Propagate dρ/dt = −i[H, ρ] + D(ρ) on `grid`, recording every `stride`-th point.
///
/// Each step is split symmetrically: free phase, dissipator, coupling unitary,
/// dissipator, free phase (the dissipator half steps use RK4).
pub fn lindblad_propagate(system: &LevelSystem, grid: &TimeGrid, stride: usize) -> Result<DensityMatrixSeries> {
    grid.validate()?;
    if stride == 0 {
        return Err(invalid("record stride must be at least 1"));
    }
    let stepper = Stepper::new(system, grid.step)?;
    let dt = stepper.dt();
    let n = system.len();
    let channels: Vec<_> = system.decays().iter().filter(|d| d.rate > 0.0).copied().collect();
    let f = stepper.half_free();
    let free = DMatrix::from_fn(n, n, |i, j| f[i] * f[j].conj());

    let a = initial_state(system, grid.start);
    let mut rho = DMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj());
    let recorded = grid.strided(stride);
    let mut times = Vec::with_capacity(recorded.count);
    let mut matrices = Vec::with_capacity(recorded.count);
    times.push(recorded.value(0));
    matrices.push(rho.transpose());
    let steps = (recorded.count - 1) * stride;
    for k in 0..steps {
        let t = grid.value(k);
        if !stepper.active(t) {
            rho.component_mul_assign(&free);
            rho.component_mul_assign(&free);
            if (k + 1) % stride == 0 {
                times.push(recorded.value((k + 1) / stride));
                matrices.push(rho.transpose());
            }
            continue;
        }
        rho.component_mul_assign(&free);
        dissipate(&mut rho, &channels, 0.5 * dt);
        if let Some(u) = stepper.coupling_propagator(t) {
            rho = &u * &rho * u.adjoint();
        }
        dissipate(&mut rho, &channels, 0.5 * dt);
        rho.component_mul_assign(&free);
        if (k + 1) % stride == 0 {
            times.push(recorded.value((k + 1) / stride));
            matrices.push(rho.transpose());
        }
    }
    DensityMatrixSeries::new(times, matrices, Provenance::LindbladOracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate_schrodinger;
    use crate::system::{CouplingTerm, Level};

    fn grid(count: usize) -> TimeGrid {
        TimeGrid::new(0.0, 0.1, count).unwrap()
    }

    #[test]
    fn closed_limit_matches_pure_state() {
        let sys = LevelSystem::new(
            vec![
                Level::with_population("g", -0.5, 0.7, 0.0),
                Level::with_population("e", -0.2, 0.3, 0.4),
                Level::with_population("f", -0.1, 0.0, 0.0),
            ],
            vec![CouplingTerm { amplitude: 0.03, center: 60.0, width: Some(25.0), frequency: 0.3, phase: 0.0 }],
            vec![],
            0.0,
        )
        .unwrap();
        let g = grid(1501);
        let rho = lindblad_propagate(&sys, &g, 10).unwrap();
        let traj = propagate_schrodinger(&sys, &g).unwrap();
        for (k, m) in rho.matrices.iter().enumerate() {
            let a = traj.at(10 * k);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((m[(i, j)] - a[i].conj() * a[j]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn coherence_decays_at_half_rate() {
        let gamma = 0.01;
        let sys = LevelSystem::new(
            vec![Level::with_population("g", -0.5, 0.5, 0.0), Level::with_population("e", -0.3, 0.5, 0.0)],
            vec![],
            vec![DecayChannel::new(1, 0, gamma)],
            0.0,
        )
        .unwrap();
        let rho = lindblad_propagate(&sys, &grid(3001), 100).unwrap();
        for (t, m) in rho.times.iter().zip(&rho.matrices) {
            assert!((m[(1, 0)].norm() - 0.5 * (-0.5 * gamma * t).exp()).abs() < 1e-9);
            assert!((m[(1, 1)].re - 0.5 * (-gamma * t).exp()).abs() < 1e-9);
        }
        assert!(rho.max_trace_error() < 1e-10, "{}", rho.max_trace_error());
        assert!(rho.max_hermiticity_error() < 1e-12);
    }
}
