//! Density-matrix reconstruction from a THz-off / THz-on spectrogram pair.
//!
//! Pass one reads populations from the THz-off spectrogram, where every peak is
//! a narrow Gaussian of known shape and the coherence terms are suppressed: the
//! signal at the photoline centers p_ii is unmixed through the small matrix of
//! Gaussian overlaps (or, optionally, fitted over a window around each peak).
//! Pass two subtracts the population model (with the THz-broadened shape) from
//! the THz-on spectrogram and fits the remaining coherence fringes by linear
//! least squares over the momentum samples within a few widths of the measurable
//! p_ij. The design matrices depend only on the grids, so their pseudo-inverses
//! are computed once and applied to every delay.
//!
//! Each coherence ρ_ij enters the THz-on signal as
//! 2[Re ρ_ij cos θ_ij(p) − Im ρ_ij sin θ_ij(p)] env_ij(p), so the fit yields the
//! complex element directly and the single-delay phase φ_ij = −arg ρ_ij.

use crate::dynamics::{DensityMatrixSeries, Provenance};
use crate::error::{invalid, Error, Result};
use crate::grid::UniformGrid;
use crate::model::PeakModelParams;
use crate::spectrogram::Spectrogram;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Calibration {
    /// Use the analytic prefactor |p| π E₀²/(2|b|) as is.
    Absolute,
    /// Rescale everything so that Σ_i ρ̂_ii = 1 at the delay nearest `reference_delay`.
    SelfCalibrated { reference_delay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationMethod {
    /// Solve the overlap system at the grid points nearest to each p_ii.
    PeakValues,
    /// Least squares over all samples within `window_widths` of any p_ii.
    WindowLeastSquares,
}

impl PopulationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PopulationMethod::PeakValues => "peak-values",
            PopulationMethod::WindowLeastSquares => "window-least-squares",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionSettings {
    /// Half-width of the fitted momentum window around each peak, in peak widths.
    pub window_widths: f64,
    /// Coherences whose suppression factor falls below this are not measurable.
    pub suppression_floor: f64,
    /// Largest tolerated condition number of a design matrix.
    pub condition_limit: f64,
    /// Smallest |ρ̂_ij| for which a phase is reported.
    pub amplitude_floor: f64,
    /// Minimum momentum samples per fringe wavelength for a phase fit.
    pub samples_per_fringe: f64,
    pub population_method: PopulationMethod,
    pub calibration: Calibration,
}

impl Default for ReconstructionSettings {
    fn default() -> Self {
        ReconstructionSettings {
            window_widths: 3.0,
            suppression_floor: 1e-3,
            condition_limit: 1e8,
            amplitude_floor: 1e-3,
            samples_per_fringe: 8.0,
            population_method: PopulationMethod::PeakValues,
            calibration: Calibration::Absolute,
        }
    }
}

/// A linear least-squares problem on fixed momentum samples.
struct LinearFit {
    samples: Vec<usize>,
    design: DMatrix<f64>,
    pinv: DMatrix<f64>,
    condition: f64,
}

impl LinearFit {
    fn new(samples: Vec<usize>, design: DMatrix<f64>, limit: f64, what: &str) -> Result<Self> {
        if design.nrows() < design.ncols() {
            return Err(Error::IllConditioned(format!(
                "{what}: {} momentum samples for {} unknowns",
                design.nrows(),
                design.ncols()
            )));
        }
        let svd = design.clone().svd(true, true);
        let max = svd.singular_values.max();
        let min = svd.singular_values.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= limit) {
            return Err(Error::IllConditioned(format!(
                "{what}: condition number {condition:.3e} exceeds {limit:.1e}"
            )));
        }
        let pinv = svd.pseudo_inverse(0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
        Ok(LinearFit { samples, design, pinv, condition })
    }

    /// Coefficients and rms residual for data y on the fit samples.
    fn solve(&self, y: &DVector<f64>) -> (DVector<f64>, f64) {
        let c = &self.pinv * y;
        let r = y - &self.design * &c;
        (c, (r.norm_squared() / y.len() as f64).sqrt())
    }
}

/// Momentum indices within `half_widths[k]` of `centers[k]` for any k.
fn window_samples(momenta: &UniformGrid, centers: &[(f64, f64)]) -> Result<Vec<usize>> {
    for &(c, _) in centers {
        if !momenta.contains(c) {
            return Err(Error::Coverage(format!(
                "peak at p = {c:.4} lies outside the momentum grid [{:.4}, {:.4}]",
                momenta.start,
                momenta.last()
            )));
        }
    }
    Ok((0..momenta.count)
        .filter(|&k| {
            let p = momenta.value(k);
            centers.iter().any(|&(c, h)| (p - c).abs() <= h)
        })
        .collect())
}

/// Normalized signal w / (|p| π E₀²/(2|b|)) on the samples at one delay.
fn normalized(spec: &Spectrogram, params: &PeakModelParams, delay: usize, samples: &[usize]) -> DVector<f64> {
    let row = spec.row(delay);
    DVector::from_iterator(
        samples.len(),
        samples.iter().map(|&k| row[k] / params.signal_scale(spec.momenta.value(k))),
    )
}

/// Populations per delay from one spectrogram, modelling only population peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationFit {
    /// ρ̂_ii, indexed [delay][level].
    pub populations: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub condition: f64,
}

/// Match Σ_i ρ_ii e^{−Ω_ii²/|bσ|²} to each delay slice of `spec`, using the
/// streaking slope in `params`. No check is made that the THz is off.
pub fn fit_populations(spec: &Spectrogram, params: &PeakModelParams, settings: &ReconstructionSettings) -> Result<PopulationFit> {
    let n = params.n_levels();
    let centers: Vec<(f64, f64)> = (0..n)
        .map(|i| (params.characteristic_momentum(i, i), settings.window_widths * params.width(i, i)))
        .collect();
    let samples = match settings.population_method {
        PopulationMethod::WindowLeastSquares => window_samples(&spec.momenta, &centers)?,
        PopulationMethod::PeakValues => {
            window_samples(&spec.momenta, &centers)?;
            let mut s: Vec<usize> = centers.iter().map(|&(c, _)| spec.momenta.nearest_index(c)).collect();
            s.sort_unstable();
            s.dedup();
            s
        }
    };
    let design = DMatrix::from_fn(samples.len(), n, |r, i| params.population_basis(spec.momenta.value(samples[r]), i));
    let fit = LinearFit::new(samples, design, settings.condition_limit, "population peaks")
        .map_err(|e| match e {
            Error::IllConditioned(m) => Error::IllConditioned(format!(
                "{m}; the XUV bandwidth cannot resolve the levels"
            )),
            other => other,
        })?;
    let (populations, residuals) = (0..spec.delays.count)
        .into_par_iter()
        .map(|d| {
            let (c, r) = fit.solve(&normalized(spec, params, d, &fit.samples));
            (c.iter().copied().collect::<Vec<_>>(), r)
        })
        .unzip();
    Ok(PopulationFit { populations, residuals, condition: fit.condition })
}

/// Populations from a THz-off spectrogram.
pub fn extract_populations(spec_off: &Spectrogram, ionization_potentials: &[f64], settings: &ReconstructionSettings) -> Result<PopulationFit> {
    if spec_off.metadata.thz_on() {
        return Err(invalid("population extraction requires a THz-off spectrogram"));
    }
    let params = PeakModelParams::from_fields(&spec_off.metadata.fields, ionization_potentials.to_vec())?;
    fit_populations(spec_off, &params, settings)
}

/// Measurability of one coherence peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairStatus {
    pub i: usize,
    pub j: usize,
    pub momentum: f64,
    pub width: f64,
    pub suppression: f64,
    pub fringe_wavenumber: f64,
    pub measurable: bool,
}

fn pair_status(params: &PeakModelParams, settings: &ReconstructionSettings) -> Vec<PairStatus> {
    params
        .pairs()
        .into_iter()
        .map(|(i, j)| {
            let suppression = params.suppression(i, j);
            PairStatus {
                i,
                j,
                momentum: params.characteristic_momentum(i, j),
                width: params.width(i, j),
                suppression,
                fringe_wavenumber: params.fringe_wavenumber(i, j),
                measurable: suppression >= settings.suppression_floor,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceFit {
    /// Pairs that were fitted, in column order.
    pub pairs: Vec<PairStatus>,
    /// ρ̂_ij per delay and fitted pair.
    pub coherences: Vec<Vec<C64>>,
    /// Population-model signal subtracted at each p_ij, per delay and fitted pair.
    pub background: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub condition: f64,
}

/// Coherences from a THz-on spectrogram, given the populations at every delay.
///
/// With `requested = None` every measurable pair is fitted and the others are
/// skipped; explicitly requested pairs below the suppression floor are an error.
pub fn extract_coherences(
    spec_on: &Spectrogram,
    populations: &[Vec<f64>],
    ionization_potentials: &[f64],
    requested: Option<&[(usize, usize)]>,
    settings: &ReconstructionSettings,
) -> Result<CoherenceFit> {
    if !spec_on.metadata.thz_on() {
        return Err(invalid("coherence extraction requires a THz-on spectrogram"));
    }
    if populations.len() != spec_on.delays.count {
        return Err(invalid("populations do not cover the THz-on delay grid"));
    }
    let params = PeakModelParams::from_fields(&spec_on.metadata.fields, ionization_potentials.to_vec())?;
    let n = params.n_levels();
    if populations.iter().any(|row| row.len() != n) {
        return Err(invalid("population rows do not match the level count"));
    }
    let status = pair_status(&params, settings);
    let pairs: Vec<PairStatus> = match requested {
        None => status.into_iter().filter(|s| s.measurable).collect(),
        Some(list) => list
            .iter()
            .map(|&(a, b)| {
                let (i, j) = if a > b { (a, b) } else { (b, a) };
                let s = status
                    .iter()
                    .find(|s| s.i == i && s.j == j)
                    .copied()
                    .ok_or_else(|| invalid(format!("no coherence between levels {a} and {b}")))?;
                if !s.measurable {
                    return Err(Error::Suppressed(format!(
                        "pair ({i},{j}) suppression {:.3e} is below the floor {:.1e}; increase the THz field",
                        s.suppression, settings.suppression_floor
                    )));
                }
                Ok(s)
            })
            .collect::<Result<_>>()?,
    };
    if pairs.is_empty() {
        let count = spec_on.delays.count;
        return Ok(CoherenceFit {
            pairs,
            coherences: vec![Vec::new(); count],
            background: vec![Vec::new(); count],
            residuals: vec![0.0; count],
            condition: 1.0,
        });
    }
    let centers: Vec<(f64, f64)> = pairs.iter().map(|s| (s.momentum, settings.window_widths * s.width)).collect();
    let samples = window_samples(&spec_on.momenta, &centers)?;
    let momenta: Vec<f64> = samples.iter().map(|&k| spec_on.momenta.value(k)).collect();
    let design = DMatrix::from_fn(samples.len(), 2 * pairs.len(), |r, c| {
        let s = &pairs[c / 2];
        let p = momenta[r];
        let env = 2.0 * params.coherence_envelope(p, s.i, s.j);
        let theta = params.coherence_phase(p, s.i, s.j);
        if c % 2 == 0 { env * theta.cos() } else { -env * theta.sin() }
    });
    let fit = LinearFit::new(samples, design, settings.condition_limit, "coherence fringes")?;
    let pop_basis = DMatrix::from_fn(momenta.len(), n, |r, i| params.population_basis(momenta[r], i));
    let results: Vec<(Vec<C64>, Vec<f64>, f64)> = (0..spec_on.delays.count)
        .into_par_iter()
        .map(|d| {
            let rho = DVector::from_column_slice(&populations[d]);
            let y = normalized(spec_on, &params, d, &fit.samples) - &pop_basis * &rho;
            let (c, r) = fit.solve(&y);
            let coh = (0..pairs.len()).map(|k| C64::new(c[2 * k], c[2 * k + 1])).collect();
            let bg = pairs
                .iter()
                .map(|s| {
                    let p = s.momentum;
                    params.signal_scale(p) * (0..n).map(|i| rho[i] * params.population_basis(p, i)).sum::<f64>()
                })
                .collect();
            (coh, bg, r)
        })
        .collect();
    let mut coherences = Vec::with_capacity(results.len());
    let mut background = Vec::with_capacity(results.len());
    let mut residuals = Vec::with_capacity(results.len());
    for (c, b, r) in results {
        coherences.push(c);
        background.push(b);
        residuals.push(r);
    }
    Ok(CoherenceFit { pairs, coherences, background, residuals, condition: fit.condition })
}

/// Single-delay phase readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseFit {
    pub i: usize,
    pub j: usize,
    pub delay: f64,
    /// φ_ij ∈ (−π, π].
    pub phase: f64,
    pub coherence_re: f64,
    pub coherence_im: f64,
    pub fringe_wavenumber: f64,
    pub rms_residual: f64,
}

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI { y - 2.0 * PI } else { y }
}

/// Fit the THz-on momentum slice at delay `tau` around p_ij with free
/// populations and coherences, and return φ_ij = −arg ρ̂_ij.
pub fn extract_phase(
    spec_on: &Spectrogram,
    tau: f64,
    pair: (usize, usize),
    ionization_potentials: &[f64],
    settings: &ReconstructionSettings,
) -> Result<PhaseFit> {
    if !spec_on.metadata.thz_on() {
        return Err(invalid("phase readout requires a THz-on spectrogram"));
    }
    let params = PeakModelParams::from_fields(&spec_on.metadata.fields, ionization_potentials.to_vec())?;
    let n = params.n_levels();
    let (i, j) = if pair.0 > pair.1 { pair } else { (pair.1, pair.0) };
    if i >= n || i == j {
        return Err(invalid(format!("({}, {}) is not a coherence of a {n}-level system", pair.0, pair.1)));
    }
    let d = spec_on
        .delays
        .index_of(tau)
        .ok_or_else(|| Error::Coverage(format!("delay {tau} is not on the spectrogram delay grid")))?;
    let suppression = params.suppression(i, j);
    if suppression < settings.suppression_floor {
        return Err(Error::Suppressed(format!(
            "pair ({i},{j}) suppression {suppression:.3e} is below the floor {:.1e}",
            settings.suppression_floor
        )));
    }
    let k = params.fringe_wavenumber(i, j);
    let needed = 2.0 * PI / k.abs() / settings.samples_per_fringe;
    if spec_on.momenta.step > needed * (1.0 + 1e-9) {
        return Err(Error::UnderResolved(format!(
            "momentum step {} exceeds {needed:.3e} (fewer than {} samples per fringe)",
            spec_on.momenta.step, settings.samples_per_fringe
        )));
    }
    let p_ij = params.characteristic_momentum(i, j);
    let samples = window_samples(&spec_on.momenta, &[(p_ij, settings.window_widths * params.width(i, j))])?;
    let momenta: Vec<f64> = samples.iter().map(|&s| spec_on.momenta.value(s)).collect();

    // Every peak that reaches into the window is fitted alongside the target.
    const RELEVANCE: f64 = 1e-4;
    let pops: Vec<usize> = (0..n)
        .filter(|&l| momenta.iter().any(|&p| params.population_basis(p, l) > RELEVANCE))
        .collect();
    let mut cohs: Vec<(usize, usize)> = params
        .pairs()
        .into_iter()
        .filter(|&(a, b)| {
            (a, b) != (i, j)
                && params.suppression(a, b) >= settings.suppression_floor
                && momenta.iter().any(|&p| params.coherence_envelope(p, a, b) > RELEVANCE)
        })
        .collect();
    cohs.insert(0, (i, j));
    let cols = pops.len() + 2 * cohs.len();
    let design = DMatrix::from_fn(momenta.len(), cols, |r, c| {
        let p = momenta[r];
        if c < pops.len() {
            return params.population_basis(p, pops[c]);
        }
        let (a, b) = cohs[(c - pops.len()) / 2];
        let env = 2.0 * params.coherence_envelope(p, a, b);
        let theta = params.coherence_phase(p, a, b);
        if (c - pops.len()).is_multiple_of(2) { env * theta.cos() } else { -env * theta.sin() }
    });
    let fit = LinearFit::new(samples, design, settings.condition_limit, "single-delay slice")
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let (c, rms) = fit.solve(&normalized(spec_on, &params, d, &fit.samples));
    let rho = C64::new(c[pops.len()], c[pops.len() + 1]);
    if rho.norm() < settings.amplitude_floor {
        return Err(Error::FitFailure(format!(
            "fitted |ρ_{i}{j}| = {:.3e} is below the amplitude floor {:.1e}",
            rho.norm(),
            settings.amplitude_floor
        )));
    }
    Ok(PhaseFit {
        i,
        j,
        delay: tau,
        phase: wrap_phase(-rho.arg()),
        coherence_re: rho.re,
        coherence_im: rho.im,
        fringe_wavenumber: k,
        rms_residual: rms,
    })
}

/// Sanity flag raised on a reconstructed element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditFlag {
    /// Delay relative to the time origin; absent for grid-independent flags.
    pub delay: Option<f64>,
    pub kind: &'static str,
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayAudit {
    pub delay: f64,
    pub trace: f64,
    pub population_residual: f64,
    pub coherence_residual: f64,
    /// Population-model signal subtracted at each fitted p_ij, in fitted-pair order.
    pub background: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionAudit {
    pub population_method: &'static str,
    pub coherence_method: &'static str,
    pub imaginary_part_method: &'static str,
    pub window_widths: f64,
    pub suppression_floor: f64,
    pub calibration: Calibration,
    pub calibration_scale: f64,
    pub population_condition: f64,
    pub coherence_condition: f64,
    pub time_origin: f64,
    pub pairs: Vec<PairStatus>,
    pub delays: Vec<DelayAudit>,
    pub flags: Vec<AuditFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub series: DensityMatrixSeries,
    pub audit: ReconstructionAudit,
}

/// Populations from `spec_off`, then coherences from `spec_on`.
pub fn reconstruct(
    spec_off: &Spectrogram,
    spec_on: &Spectrogram,
    ionization_potentials: &[f64],
    settings: &ReconstructionSettings,
) -> Result<ReconstructionResult> {
    let (a, b) = (&spec_off.delays, &spec_on.delays);
    let tol = 1e-9 * a.step.abs().max(1.0);
    if a.count != b.count || (a.start - b.start).abs() > tol || (a.step - b.step).abs() > tol {
        return Err(invalid("THz-off and THz-on spectrograms must share one delay grid"));
    }
    let n = ionization_potentials.len();
    let pops = extract_populations(spec_off, ionization_potentials, settings)?;
    let cohs = extract_coherences(spec_on, &pops.populations, ionization_potentials, None, settings)?;
    let on_params = PeakModelParams::from_fields(&spec_on.metadata.fields, ionization_potentials.to_vec())?;

    let delays = a.values();
    let scale = match settings.calibration {
        Calibration::Absolute => 1.0,
        Calibration::SelfCalibrated { reference_delay } => {
            let d = a.nearest_index(reference_delay);
            let trace: f64 = pops.populations[d].iter().sum();
            if !(trace > 0.0) {
                return Err(Error::FitFailure(format!("reference trace {trace} is not positive")));
            }
            1.0 / trace
        }
    };
    let origin = spec_on.metadata.time_origin;
    let mut matrices = Vec::with_capacity(delays.len());
    let mut flags = Vec::new();
    let mut audits = Vec::with_capacity(delays.len());
    for (d, &tau) in delays.iter().enumerate() {
        let mut m = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(scale * pops.populations[d][i], 0.0);
        }
        for (k, s) in cohs.pairs.iter().enumerate() {
            let z = cohs.coherences[d][k] * scale;
            m[(s.i, s.j)] = z;
            m[(s.j, s.i)] = z.conj();
        }
        let rel = tau - origin;
        for i in 0..n {
            let v = m[(i, i)].re;
            if !(-0.05..=1.05).contains(&v) {
                flags.push(AuditFlag { delay: Some(rel), kind: "population-out-of-range", i, j: i, value: v, bound: if v < 0.0 { -0.05 } else { 1.05 } });
            }
        }
        for s in &cohs.pairs {
            let bound = (m[(s.i, s.i)].re.max(0.0) * m[(s.j, s.j)].re.max(0.0)).sqrt() + 0.1;
            let v = m[(s.i, s.j)].re;
            if v.abs() > bound {
                flags.push(AuditFlag { delay: Some(rel), kind: "coherence-exceeds-cauchy-schwarz", i: s.i, j: s.j, value: v, bound });
            }
        }
        audits.push(DelayAudit {
            delay: rel,
            trace: (0..n).map(|i| m[(i, i)].re).sum(),
            population_residual: pops.residuals[d],
            coherence_residual: cohs.residuals[d],
            background: cohs.background[d].clone(),
        });
        matrices.push(m);
    }
    let all_pairs = pair_status(&on_params, settings);
    for s in all_pairs.iter().filter(|s| !s.measurable) {
        flags.push(AuditFlag { delay: None, kind: "coherence-suppressed", i: s.i, j: s.j, value: s.suppression, bound: settings.suppression_floor });
    }
    let audit = ReconstructionAudit {
        population_method: settings.population_method.as_str(),
        coherence_method: "least-squares fringe fit after population-background subtraction",
        imaginary_part_method: "fringe-phase fit (sin θ quadrature column)",
        window_widths: settings.window_widths,
        suppression_floor: settings.suppression_floor,
        calibration: settings.calibration,
        calibration_scale: scale,
        population_condition: pops.condition,
        coherence_condition: cohs.condition,
        time_origin: origin,
        pairs: all_pairs,
        delays: audits,
        flags,
    };
    Ok(ReconstructionResult {
        series: DensityMatrixSeries::new(delays, matrices, Provenance::Reconstructed)?,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldConfig, ThzPulse, XuvPulse};
    use crate::model::model_signal;
    use crate::spectrogram::SpectrogramMetadata;

    const IPS: [f64; 2] = [0.5, 0.125];

    fn fields(thz: bool) -> FieldConfig {
        let xuv = XuvPulse::new(0.005, 2.0, 87.78, 0.0).unwrap();
        FieldConfig::new(xuv, thz.then(|| ThzPulse::new(0.001, 6.0793e-4, 2.0).unwrap())).unwrap()
    }

    fn rho(phi: f64, tau: f64) -> DMatrix<C64> {
        let a = [C64::from_polar(0.6f64.sqrt(), 0.5 * tau), C64::from_polar(0.4f64.sqrt(), 0.125 * tau + phi)];
        DMatrix::from_fn(2, 2, |i, j| a[i].conj() * a[j])
    }

    fn model_spec(thz: bool, phi: f64) -> Spectrogram {
        let f = fields(thz);
        let params = PeakModelParams::from_fields(&f, IPS.to_vec()).unwrap();
        let momenta = UniformGrid::from_range(1.5, 2.2, 0.001).unwrap();
        let delays = UniformGrid::from_range(0.0, 20.0, 2.0).unwrap();
        let values = delays
            .values()
            .iter()
            .flat_map(|&t| momenta.values().into_iter().map(move |p| (t, p)))
            .map(|(t, p)| model_signal(&rho(phi, t), &params, p).max(0.0))
            .collect();
        let metadata = SpectrogramMetadata { fields: f, ensemble_size: 1, master_seed: 0, system_hash: String::new(), time_origin: 0.0, extra: vec![] };
        Spectrogram::new(momenta, delays, values, metadata).unwrap()
    }

    #[test]
    fn exact_on_model_input() {
        let s = ReconstructionSettings::default();
        let r = reconstruct(&model_spec(false, 0.3), &model_spec(true, 0.3), &IPS, &s).unwrap();
        for (k, m) in r.series.matrices.iter().enumerate() {
            let truth = rho(0.3, r.series.times[k]);
            assert!((m - &truth).iter().all(|z| z.norm() < 1e-9), "delay {}", r.series.times[k]);
        }
        assert!(r.audit.flags.is_empty());
    }

    #[test]
    fn phase_readout_on_model_input() {
        let s = ReconstructionSettings::default();
        for phi in [0.0, 1.0, -2.5] {
            let f = extract_phase(&model_spec(true, phi), 0.0, (1, 0), &IPS, &s).unwrap();
            assert!((f.phase - phi).abs() < 1e-8, "{phi}: {}", f.phase);
        }
    }

    #[test]
    fn wrong_spectrogram_kind_rejected() {
        let s = ReconstructionSettings::default();
        assert!(extract_populations(&model_spec(true, 0.0), &IPS, &s).is_err());
        assert!(extract_phase(&model_spec(false, 0.0), 0.0, (1, 0), &IPS, &s).is_err());
    }

    #[test]
    fn coarse_momentum_grid_rejected() {
        let mut spec = model_spec(true, 0.0);
        let s = ReconstructionSettings { samples_per_fringe: 100.0, ..Default::default() };
        let err = extract_phase(&spec, 0.0, (1, 0), &IPS, &s).unwrap_err();
        assert_eq!(err.category(), "under-resolved-grid");
        spec.metadata.fields.thz.as_mut().unwrap().peak_field = 1e-6;
        let err = extract_phase(&spec, 0.0, (1, 0), &IPS, &ReconstructionSettings::default()).unwrap_err();
        assert!(matches!(err, Error::Suppressed(_)));
    }

    #[test]
    fn wraps_phase() {
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
    }
}
