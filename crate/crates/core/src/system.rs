//! The bound multilevel system: energies, couplings, decay channels and the
//! initial state.

use crate::error::{invalid, Result};
use crate::C64;
use nalgebra::DMatrix;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub label: String,
    /// Bound-state energy E_i < 0 (hartree).
    pub energy: f64,
    /// Amplitude c_i at the reference time.
    pub amplitude: C64,
}

impl Level {
    pub fn new(label: impl Into<String>, energy: f64, amplitude: C64) -> Self {
        Level { label: label.into(), energy, amplitude }
    }

    /// Level prepared with population `population` and phase `phase`.
    pub fn with_population(label: impl Into<String>, energy: f64, population: f64, phase: f64) -> Self {
        Level::new(label, energy, C64::from_polar(population.max(0.0).sqrt(), phase))
    }

    pub fn ionization_potential(&self) -> f64 {
        -self.energy
    }
}

/// One term of the coupling W(t):
/// `amplitude · exp(−(t−center)²/width²) · sin(frequency·t + phase)`.
/// A `width` of `None` means an unwindowed sinusoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingTerm {
    pub amplitude: f64,
    pub center: f64,
    pub width: Option<f64>,
    pub frequency: f64,
    pub phase: f64,
}

impl CouplingTerm {
    pub fn value(&self, t: f64) -> f64 {
        let window = match self.width {
            Some(w) => {
                let x = (t - self.center) / w;
                (-x * x).exp()
            }
            None => 1.0,
        };
        self.amplitude * window * (self.frequency * t + self.phase).sin()
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.amplitude, self.center, self.frequency, self.phase]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("coupling term parameters must be finite"));
        }
        if let Some(w) = self.width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("coupling window width must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Population-transfer jump channel with collapse operator √Γ |target⟩⟨source|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayChannel {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

impl DecayChannel {
    pub fn new(source: usize, target: usize, rate: f64) -> Self {
        DecayChannel { source, target, rate }
    }
}

/// H(t) = Σ_i E_i |i⟩⟨i| + W(t) Σ_{i≠j} C_ij |i⟩⟨j|, plus decay channels.
///
/// The coupling pattern C defaults to one for every off-diagonal element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSystem {
    levels: Vec<Level>,
    coupling: Vec<CouplingTerm>,
    #[serde(serialize_with = "ser_matrix")]
    coupling_matrix: DMatrix<f64>,
    decays: Vec<DecayChannel>,
    reference_time: f64,
}

fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

/// Tolerance on Σ|c_i|² at the reference time.
pub const NORM_TOLERANCE: f64 = 1e-12;

impl LevelSystem {
    pub fn new(
        levels: Vec<Level>,
        coupling: Vec<CouplingTerm>,
        decays: Vec<DecayChannel>,
        reference_time: f64,
    ) -> Result<Self> {
        let n = levels.len();
        let coupling_matrix = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        let system = LevelSystem { levels, coupling, coupling_matrix, decays, reference_time };
        system.validate()?;
        Ok(system)
    }

    /// Replace the coupling pattern C; it must be real symmetric with zero diagonal.
    pub fn with_coupling_matrix(mut self, matrix: DMatrix<f64>) -> Result<Self> {
        self.coupling_matrix = matrix;
        self.validate()?;
        Ok(self)
    }

    /// Same system with a different initial state.
    pub fn with_amplitudes(mut self, amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.len() != self.levels.len() {
            return Err(invalid("amplitude count does not match level count"));
        }
        for (level, &a) in self.levels.iter_mut().zip(amplitudes) {
            level.amplitude = a;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.levels.len();
        if n == 0 {
            return Err(invalid("level system has no levels"));
        }
        for level in &self.levels {
            if !(level.energy < 0.0 && level.energy.is_finite()) {
                return Err(invalid(format!(
                    "level '{}' must be bound (E < 0), got {}",
                    level.label, level.energy
                )));
            }
            if !(level.amplitude.re.is_finite() && level.amplitude.im.is_finite()) {
                return Err(invalid(format!("level '{}' has a non-finite amplitude", level.label)));
            }
        }
        let norm: f64 = self.levels.iter().map(|l| l.amplitude.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(invalid(format!("initial state norm is {norm}, expected 1")));
        }
        for term in &self.coupling {
            term.validate()?;
        }
        let c = &self.coupling_matrix;
        if c.nrows() != n || c.ncols() != n {
            return Err(invalid("coupling matrix dimension does not match level count"));
        }
        for i in 0..n {
            if c[(i, i)] != 0.0 {
                return Err(invalid("coupling matrix must have a zero diagonal"));
            }
            for j in 0..i {
                if c[(i, j)] != c[(j, i)] || !c[(i, j)].is_finite() {
                    return Err(invalid("coupling matrix must be finite and symmetric"));
                }
            }
        }
        for d in &self.decays {
            if d.source >= n || d.target >= n {
                return Err(invalid(format!(
                    "decay channel {}→{} references a missing level",
                    d.source, d.target
                )));
            }
            if d.source == d.target {
                return Err(invalid("decay channel must connect distinct levels"));
            }
            if !(d.rate >= 0.0 && d.rate.is_finite()) {
                return Err(invalid(format!("decay rate must be non-negative, got {}", d.rate)));
            }
        }
        if !self.reference_time.is_finite() {
            return Err(invalid("reference time must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn coupling_terms(&self) -> &[CouplingTerm] {
        &self.coupling
    }

    pub fn coupling_matrix(&self) -> &DMatrix<f64> {
        &self.coupling_matrix
    }

    pub fn decays(&self) -> &[DecayChannel] {
        &self.decays
    }

    pub fn reference_time(&self) -> f64 {
        self.reference_time
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn ionization_potentials(&self) -> Vec<f64> {
        self.levels.iter().map(Level::ionization_potential).collect()
    }

    pub fn initial_amplitudes(&self) -> Vec<C64> {
        self.levels.iter().map(|l| l.amplitude).collect()
    }

    /// W(t).
    pub fn coupling_at(&self, t: f64) -> f64 {
        self.coupling.iter().map(|c| c.value(t)).sum()
    }

    /// Largest angular frequency the propagator must resolve.
    pub fn fastest_frequency(&self) -> f64 {
        let e = self.levels.iter().map(|l| l.energy.abs()).fold(0.0, f64::max);
        self.coupling.iter().map(|c| c.frequency.abs()).fold(e, f64::max)
    }

    pub fn max_decay_rate(&self) -> f64 {
        self.decays.iter().map(|d| d.rate).fold(0.0, f64::max)
    }

    pub fn has_decay(&self) -> bool {
        self.decays.iter().any(|d| d.rate > 0.0)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    /// SHA-256 over the canonical JSON form of the system.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("level system serializes");
        hex_digest(&json)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
