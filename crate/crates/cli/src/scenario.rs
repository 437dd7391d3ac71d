//! Scenario files: TOML with an explicit unit next to every dimensioned value.
//!
//! ```toml
//! [system]
//! energy_unit = "eV"        # level energies, coupling amplitudes and frequencies, decay rates (ħ = 1)
//! time_unit = "au"          # reference_time, coupling centers and widths
//! reference_time = 0.0      # t₀, where the initial amplitudes are prepared
//! coupling_matrix = [[0, 1], [1, 0]]   # optional, defaults to all off-diagonal ones
//!
//! [[system.levels]]
//! label = "g"
//! energy = -13.6
//! population = 0.5
//! phase = 0.0               # rad
//!
//! [[system.couplings]]      # W(t) = amplitude e^{-((t-center)/width)²} sin(frequency t + phase)
//! amplitude = 0.02
//! center = 4100.0
//! width = 60.0              # omit for a constant envelope
//! frequency = 0.324
//! phase = 0.0
//!
//! [[system.decays]]
//! from = "e2"
//! to = "e1"
//! rate = 0.007
//!
//! [xuv]
//! field_unit = "au"         # au | MV/cm
//! peak_field = 0.005
//! photon_energy_unit = "au" # au | eV
//! photon_energy = 2.0
//! duration_unit = "fs"      # au | fs
//! fwhm = 5.0                # FWHM of the Gaussian field envelope
//!
//! [thz]                     # omit to disable streaking entirely
//! field_unit = "au"
//! peak_field = 0.001
//! frequency_unit = "THz"    # THz (cyclic) | au (angular)
//! frequency = 4.0
//! envelope_cycles = 2.0
//!
//! [grids]
//! time_unit = "au"          # time_step and every delay value
//! time_step = 0.1
//! delay_start = 0.0         # relative to reference_time
//! delay_stop = 100.0
//! delay_step = 0.5
//! momentum_start = 1.55     # momenta are always a.u.
//! momentum_stop = 2.15
//! momentum_step = 0.001
//!
//! [ensemble]
//! trajectories = 1
//! seed = 1
//!
//! [quick]                   # optional overrides applied by --quick
//! delay_step = 1.0
//! momentum_step = 0.002
//! trajectories = 1
//!
//! [reconstruction]          # optional
//! window_widths = 3.0
//! suppression_floor = 1e-3
//! population_method = "peak-values"    # peak-values | window-least-squares
//! calibration = "absolute"             # absolute | self
//! reference_delay = 0.0                # for calibration = "self", grids.time_unit
//!
//! [phase]                   # optional single-delay readout
//! delay = 0.0               # grids.time_unit, relative to reference_time
//! pairs = [["e", "g"]]      # defaults to every measurable pair
//!
//! [slice]                   # optional
//! delays = [0.0]            # momentum cuts w(p; τ); defaults to the first delay
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thzstreak::fields::{FieldConfig, ThzPulse, XuvPulse};
use thzstreak::grid::{DelayGrid, MomentumGrid, UniformGrid};
use thzstreak::reconstruction::{Calibration, PopulationMethod, ReconstructionSettings};
use thzstreak::system::{CouplingTerm, DecayChannel, Level, LevelSystem};
use thzstreak::units::{fwhm_to_sigma, EnergyUnit, FieldUnit, FrequencyUnit, TimeUnit};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemSpec,
    pub xuv: XuvSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thz: Option<ThzSpec>,
    pub grids: GridSpec,
    pub ensemble: EnsembleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quick: Option<QuickSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<SliceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub energy_unit: EnergyUnit,
    pub time_unit: TimeUnit,
    pub reference_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_matrix: Option<Vec<Vec<f64>>>,
    pub levels: Vec<LevelSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub couplings: Vec<CouplingSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decays: Vec<DecaySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub label: String,
    pub energy: f64,
    pub population: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub amplitude: f64,
    pub center: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub from: String,
    pub to: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XuvSpec {
    pub field_unit: FieldUnit,
    pub peak_field: f64,
    pub photon_energy_unit: EnergyUnit,
    pub photon_energy: f64,
    pub duration_unit: TimeUnit,
    pub fwhm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThzSpec {
    pub field_unit: FieldUnit,
    pub peak_field: f64,
    pub frequency_unit: FrequencyUnit,
    pub frequency: f64,
    #[serde(default = "default_cycles")]
    pub envelope_cycles: f64,
}

fn default_cycles() -> f64 {
    ThzPulse::DEFAULT_ENVELOPE_CYCLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub time_unit: TimeUnit,
    pub time_step: f64,
    pub delay_start: f64,
    pub delay_stop: f64,
    pub delay_step: f64,
    pub momentum_start: f64,
    pub momentum_stop: f64,
    pub momentum_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub trajectories: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuickSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    Absolute,
    #[serde(rename = "self")]
    SelfCalibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_widths: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppression_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_method: Option<PopulationMethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_delay: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationMethodSpec {
    PeakValues,
    WindowLeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub delay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[String; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    #[serde(default)]
    pub delays: Vec<f64>,
}

/// Everything the pipeline needs, in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub system: LevelSystem,
    pub labels: Vec<String>,
    /// THz-on configuration when a `[thz]` table is present.
    pub fields: FieldConfig,
    pub time_step: f64,
    /// Absolute delays (XUV centers).
    pub delays: DelayGrid,
    pub momenta: MomentumGrid,
    pub trajectories: usize,
    pub seed: u64,
    pub reconstruction: ReconstructionSettings,
    /// Absolute readout delay and (i, j) index pairs; `None` pairs means every measurable pair.
    pub phase_delay: f64,
    pub phase_pairs: Option<Vec<(usize, usize)>>,
    /// Absolute delays of the momentum cuts.
    pub slice_delays: Vec<f64>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical serialized form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy with the `[quick]` overrides folded in and the table removed.
    pub fn quick(&self) -> Scenario {
        let mut s = self.clone();
        if let Some(q) = s.quick.take() {
            let g = &mut s.grids;
            g.time_step = q.time_step.unwrap_or(g.time_step);
            g.delay_start = q.delay_start.unwrap_or(g.delay_start);
            g.delay_stop = q.delay_stop.unwrap_or(g.delay_stop);
            g.delay_step = q.delay_step.unwrap_or(g.delay_step);
            g.momentum_step = q.momentum_step.unwrap_or(g.momentum_step);
            s.ensemble.trajectories = q.trajectories.unwrap_or(s.ensemble.trajectories);
        }
        s
    }

    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.ensemble.seed = seed;
        self
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let sys = &self.system;
        let e = |x: f64| sys.energy_unit.to_au(x);
        let t = |x: f64| sys.time_unit.to_au(x);
        if sys.levels.is_empty() {
            return Err(config_err("system.levels is empty"));
        }
        let labels: Vec<String> = sys.levels.iter().map(|l| l.label.clone()).collect();
        for (k, l) in labels.iter().enumerate() {
            if labels[..k].contains(l) {
                return Err(config_err(format!("duplicate level label '{l}'")));
            }
        }
        let index = |label: &str| {
            labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| config_err(format!("unknown level label '{label}'")))
        };
        let mut levels = Vec::with_capacity(sys.levels.len());
        for l in &sys.levels {
            if !(l.population >= 0.0 && l.population.is_finite()) {
                return Err(config_err(format!("level '{}' population must be non-negative", l.label)));
            }
            levels.push(Level::with_population(l.label.clone(), e(l.energy), l.population, l.phase));
        }
        let couplings = sys
            .couplings
            .iter()
            .map(|c| CouplingTerm {
                amplitude: e(c.amplitude),
                center: t(c.center),
                width: c.width.map(t),
                frequency: e(c.frequency),
                phase: c.phase,
            })
            .collect();
        let decays = sys
            .decays
            .iter()
            .map(|d| Ok(DecayChannel::new(index(&d.from)?, index(&d.to)?, e(d.rate))))
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut system = LevelSystem::new(levels, couplings, decays, t(sys.reference_time))?;
        if let Some(rows) = &sys.coupling_matrix {
            let n = labels.len();
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(config_err(format!("coupling_matrix must be {n}×{n}")));
            }
            system = system.with_coupling_matrix(nalgebra_from_rows(rows))?;
        }

        let x = &self.xuv;
        if !(x.fwhm > 0.0) {
            return Err(config_err(format!("xuv.fwhm must be positive, got {}", x.fwhm)));
        }
        let xuv = XuvPulse::new(
            x.field_unit.to_au(x.peak_field),
            x.photon_energy_unit.to_au(x.photon_energy),
            fwhm_to_sigma(x.duration_unit.to_au(x.fwhm)),
            0.0,
        )?;
        let thz = match &self.thz {
            Some(z) => Some(ThzPulse::new(z.field_unit.to_au(z.peak_field), z.frequency_unit.to_au(z.frequency), z.envelope_cycles)?),
            None => None,
        };
        let fields = FieldConfig::new(xuv, thz)?;

        let g = &self.grids;
        let gt = |x: f64| g.time_unit.to_au(x);
        let t0 = system.reference_time();
        let time_step = gt(g.time_step);
        if !(time_step > 0.0 && time_step.is_finite()) {
            return Err(config_err(format!("grids.time_step must be positive, got {}", g.time_step)));
        }
        let delays = UniformGrid::from_range(t0 + gt(g.delay_start), t0 + gt(g.delay_stop), gt(g.delay_step))?;
        let momenta = UniformGrid::from_range(g.momentum_start, g.momentum_stop, g.momentum_step)?;
        if !(momenta.start > 0.0) {
            return Err(config_err("grids.momentum_start must be positive"));
        }
        if self.ensemble.trajectories == 0 {
            return Err(config_err("ensemble.trajectories must be at least 1"));
        }

        let mut reconstruction = ReconstructionSettings::default();
        if let Some(r) = &self.reconstruction {
            if let Some(w) = r.window_widths {
                if !(w > 0.0) {
                    return Err(config_err("reconstruction.window_widths must be positive"));
                }
                reconstruction.window_widths = w;
            }
            if let Some(f) = r.suppression_floor {
                if !(f > 0.0 && f < 1.0) {
                    return Err(config_err("reconstruction.suppression_floor must lie in (0, 1)"));
                }
                reconstruction.suppression_floor = f;
            }
            if let Some(m) = r.population_method {
                reconstruction.population_method = match m {
                    PopulationMethodSpec::PeakValues => PopulationMethod::PeakValues,
                    PopulationMethodSpec::WindowLeastSquares => PopulationMethod::WindowLeastSquares,
                };
            }
            reconstruction.calibration = match (r.calibration.unwrap_or(CalibrationMode::Absolute), r.reference_delay) {
                (CalibrationMode::Absolute, None) => Calibration::Absolute,
                (CalibrationMode::Absolute, Some(_)) => {
                    return Err(config_err("reconstruction.reference_delay requires calibration = \"self\""))
                }
                (CalibrationMode::SelfCalibrated, d) => Calibration::SelfCalibrated { reference_delay: t0 + gt(d.unwrap_or(g.delay_start)) },
            };
        }

        let (phase_delay, phase_pairs) = match &self.phase {
            Some(p) => {
                let pairs = match &p.pairs {
                    Some(list) => Some(
                        list.iter()
                            .map(|[a, b]| {
                                let (i, j) = (index(a)?, index(b)?);
                                if i == j {
                                    return Err(config_err(format!("phase pair ({a}, {b}) is not a coherence")));
                                }
                                Ok((i.max(j), i.min(j)))
                            })
                            .collect::<Result<Vec<_>, CliError>>()?,
                    ),
                    None => None,
                };
                (t0 + gt(p.delay), pairs)
            }
            None => (delays.start, None),
        };
        if !delays.contains(phase_delay) || delays.index_of(phase_delay).is_none() {
            return Err(config_err("phase.delay must be a point of the delay grid"));
        }
        let slice_delays: Vec<f64> = match &self.slice {
            Some(s) if !s.delays.is_empty() => s.delays.iter().map(|&d| t0 + gt(d)).collect(),
            _ => vec![delays.start],
        };
        if slice_delays.iter().any(|&d| delays.index_of(d).is_none()) {
            return Err(config_err("slice.delays must be points of the delay grid"));
        }

        Ok(Resolved {
            system,
            labels,
            fields,
            time_step,
            delays,
            momenta,
            trajectories: self.ensemble.trajectories,
            seed: self.ensemble.seed,
            reconstruction,
            phase_delay,
            phase_pairs,
            slice_delays,
        })
    }
}

fn nalgebra_from_rows(rows: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let n = rows.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j])
}
