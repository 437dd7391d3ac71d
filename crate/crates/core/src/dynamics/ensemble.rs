//! Ensembles of quantum-jump trajectories and their density matrix.

use super::{propagate_mcwf_strided, DensityMatrixSeries, Provenance, WaveTrajectory};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::system::LevelSystem;
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Seed of trajectory `index`, a splitmix64 hash of the master seed and index.
/// Independent of scheduling, so parallel and sequential generation agree.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub master_seed: u64,
    pub sub_seeds: Vec<u64>,
    pub system_hash: String,
    pub trajectories: Vec<WaveTrajectory>,
}

impl TrajectoryEnsemble {
    /// Generate `count` trajectories on `grid`, keeping every `stride`-th point.
    pub fn generate(
        system: &LevelSystem,
        grid: &TimeGrid,
        count: usize,
        master_seed: u64,
        stride: usize,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let sub_seeds: Vec<u64> = (0..count as u64).map(|i| sub_seed(master_seed, i)).collect();
        let trajectories = sub_seeds
            .par_iter()
            .map(|&s| propagate_mcwf_strided(system, grid, s, stride))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryEnsemble { master_seed, sub_seeds, system_hash: system.hash(), trajectories })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        self.trajectories.first().map(|t| &t.grid)
    }

    pub fn n_levels(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.n_levels)
    }

    pub fn jump_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.jumps.len()).sum()
    }
}

/// ρ_ij(t) = (1/N) Σ_s conj(a_i^(s)(t)) a_j^(s)(t) on the shared grid.
pub fn ensemble_density_matrix(ensemble: &TrajectoryEnsemble) -> Result<DensityMatrixSeries> {
    let first = ensemble.trajectories.first().ok_or(Error::EmptyEnsemble)?;
    let grid = first.grid;
    let n = first.n_levels;
    if ensemble.trajectories.iter().any(|t| t.grid != grid || t.n_levels != n) {
        return Err(crate::error::invalid("trajectories do not share one grid"));
    }
    let inv = 1.0 / ensemble.len() as f64;
    let matrices = (0..grid.count)
        .into_par_iter()
        .map(|k| {
            let mut m = DMatrix::<C64>::zeros(n, n);
            for traj in &ensemble.trajectories {
                let a = traj.at(k);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] += a[i].conj() * a[j];
                    }
                }
            }
            m * C64::from(inv)
        })
        .collect();
    DensityMatrixSeries::new(grid.values(), matrices, Provenance::EnsembleTruth)
}
