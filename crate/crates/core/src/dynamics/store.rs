//! Binary persistence of trajectory ensembles.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! 8 bytes   magic "THZENS01"
//! 8 bytes   u64 length L of the JSON header
//! L bytes   UTF-8 JSON header (see `Header`)
//! payload   f64 pairs (Re a, Im a), ordered by trajectory, then time, then level
//! ```
//!
//! The header carries the shared time grid, level count, seeds, system hash,
//! the jump records of every trajectory and free-form provenance pairs.

use super::{JumpRecord, TrajectoryEnsemble, WaveTrajectory};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"THZENS01";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    n_levels: usize,
    n_trajectories: usize,
    grid: TimeGrid,
    master_seed: u64,
    sub_seeds: Vec<u64>,
    system_hash: String,
    jumps: Vec<Vec<JumpRecord>>,
    #[serde(default)]
    provenance: Vec<(String, String)>,
}

pub fn write_ensemble<W: Write>(ensemble: &TrajectoryEnsemble, provenance: &[(String, String)], out: &mut W) -> Result<()> {
    let grid = *ensemble.grid().ok_or(Error::EmptyEnsemble)?;
    let header = Header {
        n_levels: ensemble.n_levels(),
        n_trajectories: ensemble.len(),
        grid,
        master_seed: ensemble.master_seed,
        sub_seeds: ensemble.sub_seeds.clone(),
        system_hash: ensemble.system_hash.clone(),
        jumps: ensemble.trajectories.iter().map(|t| t.jumps.clone()).collect(),
        provenance: provenance.to_vec(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::with_capacity(16 * grid.count * header.n_levels);
    for traj in &ensemble.trajectories {
        buf.clear();
        for a in &traj.amplitudes {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_ensemble<R: Read>(input: &mut R) -> Result<TrajectoryEnsemble> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a trajectory ensemble file".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| Error::Format(e.to_string()))?;
    if header.jumps.len() != header.n_trajectories || header.sub_seeds.len() != header.n_trajectories {
        return Err(Error::Format("header trajectory counts disagree".into()));
    }
    let per_traj = header.grid.count * header.n_levels;
    let mut bytes = vec![0u8; 16 * per_traj];
    let mut trajectories = Vec::with_capacity(header.n_trajectories);
    for jumps in header.jumps {
        input.read_exact(&mut bytes)?;
        let amplitudes = bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        trajectories.push(WaveTrajectory { grid: header.grid, n_levels: header.n_levels, amplitudes, jumps });
    }
    Ok(TrajectoryEnsemble {
        master_seed: header.master_seed,
        sub_seeds: header.sub_seeds,
        system_hash: header.system_hash,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{DecayChannel, Level, LevelSystem};

    #[test]
    fn round_trip_is_exact() {
        let sys = LevelSystem::new(
            vec![Level::with_population("a", -0.3, 0.2, 0.0), Level::with_population("b", -0.1, 0.8, 1.3)],
            vec![],
            vec![DecayChannel::new(1, 0, 0.02)],
            0.0,
        )
        .unwrap();
        let g = TimeGrid::new(-10.0, 0.1, 501).unwrap();
        let ens = TrajectoryEnsemble::generate(&sys, &g, 4, 11, 1).unwrap();
        let mut buf = Vec::new();
        write_ensemble(&ens, &[("seed".into(), "11".into())], &mut buf).unwrap();
        let back = read_ensemble(&mut &buf[..]).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn rejects_foreign_file() {
        let junk = b"NOTANENSEMBLE___".to_vec();
        assert!(matches!(read_ensemble(&mut &junk[..]), Err(Error::Format(_))));
    }
}
