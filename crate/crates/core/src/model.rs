//! Closed-form Gaussian-peak model of the streaked photoelectron spectrum.
//!
//! In the slowly-varying-envelope regime with a linearized THz vector potential
//! A(t) ≈ α (t − τ), the spectrum is
//!
//! |M_p(τ)|² = π E₀² / (2|b|) · [W_pop + W_coh],  b(p) = 1/σ² − iαp,
//!
//! W_pop = Σ_i ρ_ii e^{−Ω_ii²/|bσ|²},
//! W_coh = 2 Σ_{j<i} Re[ρ_ij e^{iαpΩ_ijΔ_ij/|b|²}] e^{−Ω_ij²/|bσ|²} e^{−(Δ_ij/2)²/|bσ|²},
//!
//! with Ω_ij(p) = p²/2 + (I_p^(i) + I_p^(j))/2 − ω and Δ_ij = I_p^(i) − I_p^(j).
//! The measured signal is w = |p| |M_p|².

use crate::dynamics::DensityMatrixSeries;
use crate::error::{invalid, Error, Result};
use crate::fields::FieldConfig;
use crate::grid::{DelayGrid, MomentumGrid};
use crate::C64;
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct PeakModelParams {
    pub omega_xuv: f64,
    pub sigma: f64,
    /// Streaking slope α = −E₀^THz (zero without THz).
    pub alpha: f64,
    pub peak_field: f64,
    pub ionization_potentials: Vec<f64>,
}

/// Photoline momentum p_ij = √(2(ω − (I_p^(i) + I_p^(j))/2)).
pub fn characteristic_momentum(omega: f64, ip_i: f64, ip_j: f64) -> Result<f64> {
    let excess = omega - 0.5 * (ip_i + ip_j);
    if excess < 0.0 {
        return Err(Error::BelowThreshold(format!(
            "ω = {omega} lies below the mean ionization potential {}",
            0.5 * (ip_i + ip_j)
        )));
    }
    Ok((2.0 * excess).sqrt())
}

impl PeakModelParams {
    pub fn new(omega_xuv: f64, sigma: f64, alpha: f64, peak_field: f64, ionization_potentials: Vec<f64>) -> Result<Self> {
        let params = PeakModelParams { omega_xuv, sigma, alpha, peak_field, ionization_potentials };
        params.validate()?;
        Ok(params)
    }

    pub fn from_fields(fields: &FieldConfig, ionization_potentials: Vec<f64>) -> Result<Self> {
        PeakModelParams::new(
            fields.xuv.omega,
            fields.xuv.sigma,
            fields.streaking_slope(),
            fields.xuv.peak_field,
            ionization_potentials,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_xuv > 0.0 && self.sigma > 0.0 && self.peak_field > 0.0) {
            return Err(invalid("model requires positive ω, σ and peak field"));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("streaking slope must be finite"));
        }
        if self.ionization_potentials.is_empty() || self.ionization_potentials.iter().any(|ip| !(*ip > 0.0)) {
            return Err(invalid("ionization potentials must be positive"));
        }
        for (i, &a) in self.ionization_potentials.iter().enumerate() {
            for &b in &self.ionization_potentials[..=i] {
                characteristic_momentum(self.omega_xuv, a, b)?;
            }
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        PeakModelParams { alpha, ..self.clone() }
    }

    pub fn n_levels(&self) -> usize {
        self.ionization_potentials.len()
    }

    /// Pairs (i, j) with j < i.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_levels();
        (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect()
    }

    pub fn delta(&self, i: usize, j: usize) -> f64 {
        self.ionization_potentials[i] - self.ionization_potentials[j]
    }

    pub fn b(&self, p: f64) -> C64 {
        C64::new(1.0 / (self.sigma * self.sigma), -self.alpha * p)
    }

    /// |b(p)σ|² = 1/σ² + (αpσ)².
    pub fn b_sigma_sqr(&self, p: f64) -> f64 {
        let s = self.sigma;
        1.0 / (s * s) + (self.alpha * p * s).powi(2)
    }

    pub fn omega_ij(&self, p: f64, i: usize, j: usize) -> f64 {
        0.5 * p * p + 0.5 * (self.ionization_potentials[i] + self.ionization_potentials[j]) - self.omega_xuv
    }

    /// π E₀² / (2|b(p)|).
    pub fn prefactor(&self, p: f64) -> f64 {
        PI * self.peak_field * self.peak_field / (2.0 * self.b(p).norm())
    }

    /// Factor converting W_pop + W_coh into the signal w: |p| π E₀²/(2|b|).
    pub fn signal_scale(&self, p: f64) -> f64 {
        p.abs() * self.prefactor(p)
    }

    pub fn characteristic_momentum(&self, i: usize, j: usize) -> f64 {
        characteristic_momentum(self.omega_xuv, self.ionization_potentials[i], self.ionization_potentials[j])
            .expect("validated above threshold")
    }

    /// 1/e half-width in momentum of the peak at p_ij: |b(p_ij)σ| / p_ij.
    pub fn width(&self, i: usize, j: usize) -> f64 {
        let p = self.characteristic_momentum(i, j);
        self.b_sigma_sqr(p).sqrt() / p
    }

    /// e^{−(Δ_ij/2)²/|bσ|²} at p_ij.
    pub fn suppression(&self, i: usize, j: usize) -> f64 {
        let p = self.characteristic_momentum(i, j);
        (-(0.5 * self.delta(i, j)).powi(2) / self.b_sigma_sqr(p)).exp()
    }

    /// Fringe wavenumber K = Δ α p_ij² / (1/σ⁴ + α² p_ij²).
    pub fn fringe_wavenumber(&self, i: usize, j: usize) -> f64 {
        let p = self.characteristic_momentum(i, j);
        let a = self.alpha;
        self.delta(i, j) * a * p * p / (self.sigma.powi(-4) + a * a * p * p)
    }

    /// e^{−Ω_ii²/|bσ|²}.
    pub fn population_basis(&self, p: f64, i: usize) -> f64 {
        (-self.omega_ij(p, i, i).powi(2) / self.b_sigma_sqr(p)).exp()
    }

    /// Phase θ_ij(p) = αpΩ_ijΔ_ij/|b|² of the coherence term.
    pub fn coherence_phase(&self, p: f64, i: usize, j: usize) -> f64 {
        self.alpha * p * self.omega_ij(p, i, j) * self.delta(i, j) / self.b(p).norm_sqr()
    }

    /// e^{−Ω_ij²/|bσ|²} e^{−(Δ_ij/2)²/|bσ|²}.
    pub fn coherence_envelope(&self, p: f64, i: usize, j: usize) -> f64 {
        let bs = self.b_sigma_sqr(p);
        (-(self.omega_ij(p, i, j).powi(2) + (0.5 * self.delta(i, j)).powi(2)) / bs).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelTerms {
    pub w_pop: f64,
    pub w_coh: f64,
    /// |M_p|² = π E₀²/(2|b|) (W_pop + W_coh).
    pub total: f64,
}

/// Model terms at momentum `p` for the density matrix `rho` (ρ_ij = ⟨conj(a_i) a_j⟩).
pub fn model_spectrum(rho: &DMatrix<C64>, params: &PeakModelParams, p: f64) -> ModelTerms {
    let n = params.n_levels();
    let w_pop: f64 = (0..n).map(|i| rho[(i, i)].re * params.population_basis(p, i)).sum();
    let w_coh: f64 = params
        .pairs()
        .into_iter()
        .map(|(i, j)| {
            let phase = C64::from_polar(1.0, params.coherence_phase(p, i, j));
            2.0 * (rho[(i, j)] * phase).re * params.coherence_envelope(p, i, j)
        })
        .sum();
    ModelTerms { w_pop, w_coh, total: params.prefactor(p) * (w_pop + w_coh) }
}

/// Model signal w = |p| |M_p|².
pub fn model_signal(rho: &DMatrix<C64>, params: &PeakModelParams, p: f64) -> f64 {
    p.abs() * model_spectrum(rho, params, p).total
}

/// φ_ij(τ) = Δ_ij τ + φ_i − φ_j for free evolution from phases φ_i at τ = 0.
pub fn free_relative_phase(delta: f64, tau: f64, phi_i: f64, phi_j: f64) -> f64 {
    delta * tau + phi_i - phi_j
}

/// Argument −K (p − p_ij) + φ_ij of the fringe cosine near p_ij.
pub fn fringe_phase_law(params: &PeakModelParams, i: usize, j: usize, p: f64, phi_ij: f64) -> f64 {
    -params.fringe_wavenumber(i, j) * (p - params.characteristic_momentum(i, j)) + phi_ij
}

/// Per-peak diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakReport {
    pub i: usize,
    pub j: usize,
    pub momentum: f64,
    pub width: f64,
    pub suppression: f64,
    pub fringe_wavenumber: f64,
    /// |p| π E₀²/(2|b|) × weight at p_ij: signal per unit ρ_ij (twice for coherences).
    pub amplitude: f64,
}

/// Population peaks (i = j) followed by coherence peaks (j < i).
pub fn peak_table(params: &PeakModelParams) -> Vec<PeakReport> {
    let n = params.n_levels();
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    pairs.extend(params.pairs());
    pairs
        .into_iter()
        .map(|(i, j)| {
            let p = params.characteristic_momentum(i, j);
            let (suppression, weight) = if i == j { (1.0, 1.0) } else { let s = params.suppression(i, j); (s, 2.0 * s) };
            PeakReport {
                i,
                j,
                momentum: p,
                width: params.width(i, j),
                suppression,
                fringe_wavenumber: if i == j { 0.0 } else { params.fringe_wavenumber(i, j) },
                amplitude: params.signal_scale(p) * weight,
            }
        })
        .collect()
}

/// Model spectrogram values (delay-major) for a density series sampled at `delays`.
pub fn model_spectrogram_values(
    series: &DensityMatrixSeries,
    params: &PeakModelParams,
    momenta: &MomentumGrid,
    delays: &DelayGrid,
) -> Result<Vec<f64>> {
    if series.len() != delays.count {
        return Err(invalid("density series length does not match the delay grid"));
    }
    if series.dim() != params.n_levels() {
        return Err(invalid("density matrix dimension does not match the level count"));
    }
    let p = momenta.values();
    Ok(series
        .matrices
        .iter()
        .flat_map(|rho| p.iter().map(move |&pk| model_signal(rho, params, pk).max(0.0)))
        .collect())
}
