//! Density-matrix histories ρ_ij(τ).

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    EnsembleTruth,
    LindbladOracle,
    Reconstructed,
    Model,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::EnsembleTruth => "ensemble-truth",
            Provenance::LindbladOracle => "lindblad-oracle",
            Provenance::Reconstructed => "reconstructed",
            Provenance::Model => "model",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Provenance::EnsembleTruth, Provenance::LindbladOracle, Provenance::Reconstructed, Provenance::Model]
            .into_iter()
            .find(|p| p.as_str() == s)
    }
}

/// ρ(τ) with ρ_ij = ⟨conj(a_i) a_j⟩ on a list of delays.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixSeries {
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<C64>>,
    pub provenance: Provenance,
}

impl DensityMatrixSeries {
    pub fn new(times: Vec<f64>, matrices: Vec<DMatrix<C64>>, provenance: Provenance) -> Result<Self> {
        if times.len() != matrices.len() {
            return Err(crate::error::invalid("time and matrix counts differ"));
        }
        let n = matrices.first().map_or(0, |m| m.nrows());
        if matrices.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(crate::error::invalid("density matrices must be square and equally sized"));
        }
        Ok(DensityMatrixSeries { times, matrices, provenance })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    pub fn element(&self, i: usize, j: usize) -> Vec<C64> {
        self.matrices.iter().map(|m| m[(i, j)]).collect()
    }

    pub fn population(&self, i: usize) -> Vec<f64> {
        self.matrices.iter().map(|m| m[(i, i)].re).collect()
    }

    /// Entries at the requested delays, which must lie on `grid` (the grid of `self.times`).
    pub fn sample(&self, grid: &UniformGrid, delays: &[f64]) -> Result<Self> {
        let mut times = Vec::with_capacity(delays.len());
        let mut matrices = Vec::with_capacity(delays.len());
        for &tau in delays {
            let k = grid
                .index_of(tau)
                .filter(|&k| k < self.len())
                .ok_or_else(|| Error::Coverage(format!("delay {tau} is not on the density-matrix grid")))?;
            times.push(tau);
            matrices.push(self.matrices[k].clone());
        }
        Ok(DensityMatrixSeries { times, matrices, provenance: self.provenance })
    }

    /// Subset of entries whose time satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(f64) -> bool) -> Self {
        let (times, matrices) = self
            .times
            .iter()
            .zip(&self.matrices)
            .filter(|(t, _)| keep(**t))
            .map(|(t, m)| (*t, m.clone()))
            .unzip();
        DensityMatrixSeries { times, matrices, provenance: self.provenance }
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    pub fn max_trace_error(&self) -> f64 {
        self.matrices.iter().map(|m| (m.trace() - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max)
    }

    /// max over τ, i, j of |ρ_ij − ρ'_ij|; series must share times.
    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() || self.dim() != other.dim() {
            return Err(crate::error::invalid("density series shapes differ"));
        }
        Ok(self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max))
    }

    /// TSV with `# key = value` header lines, then one row per delay:
    /// `time` followed by `re_i_j im_i_j` for every i ≥ j.
    pub fn write_tsv<W: Write>(&self, out: &mut W, header: &[(String, String)], time_origin: f64) -> Result<()> {
        let mut text = String::new();
        writeln!(text, "# provenance = {}", self.provenance.as_str()).unwrap();
        writeln!(text, "# levels = {}", self.dim()).unwrap();
        writeln!(text, "# time_origin = {time_origin:e}").unwrap();
        for (k, v) in header {
            writeln!(text, "# {k} = {v}").unwrap();
        }
        let n = self.dim();
        text.push_str("time");
        for i in 0..n {
            for j in 0..=i {
                write!(text, "\tre_{i}_{j}\tim_{i}_{j}").unwrap();
            }
        }
        text.push('\n');
        for (t, m) in self.times.iter().zip(&self.matrices) {
            write!(text, "{:e}", t - time_origin).unwrap();
            for i in 0..n {
                for j in 0..=i {
                    let z = m[(i, j)];
                    write!(text, "\t{:e}\t{:e}", z.re, z.im).unwrap();
                }
            }
            text.push('\n');
        }
        out.write_all(text.as_bytes())?;
        Ok(())
    }

    /// Inverse of [`write_tsv`](Self::write_tsv); times are restored to absolute values.
    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut provenance = None;
        let mut n = None;
        let mut origin = 0.0;
        let mut times = Vec::new();
        let mut matrices = Vec::new();
        let mut seen_columns = false;
        for line in input.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    match k.trim() {
                        "provenance" => provenance = Provenance::parse(v.trim()),
                        "levels" => n = v.trim().parse::<usize>().ok(),
                        "time_origin" => origin = parse_f64(v.trim())?,
                        _ => {}
                    }
                }
                continue;
            }
            if !seen_columns {
                seen_columns = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let n = n.ok_or_else(|| Error::Format("missing level count".into()))?;
            let fields: Vec<f64> = line.split('\t').map(parse_f64).collect::<Result<_>>()?;
            if fields.len() != 1 + n * (n + 1) {
                return Err(Error::Format(format!("expected {} columns, got {}", 1 + n * (n + 1), fields.len())));
            }
            times.push(fields[0] + origin);
            let mut m = DMatrix::zeros(n, n);
            let mut c = 1;
            for i in 0..n {
                for j in 0..=i {
                    let z = C64::new(fields[c], fields[c + 1]);
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                    c += 2;
                }
            }
            matrices.push(m);
        }
        let provenance = provenance.ok_or_else(|| Error::Format("missing provenance".into()))?;
        DensityMatrixSeries::new(times, matrices, provenance)
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Format(format!("not a number: '{s}'")))
}
