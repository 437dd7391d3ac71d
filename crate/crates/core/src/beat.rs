//! Least-squares analysis of beating in delay traces.

use crate::error::{invalid, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Fitted oscillation at a fixed angular frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub frequency: f64,
    pub amplitude: f64,
    /// Phase ϕ of amplitude·cos(ω t + ϕ), with t measured from the trace start.
    pub phase: f64,
    pub rms_residual: f64,
}

fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    svd.solve(y, 1e-12 * svd.singular_values.max())
        .map_err(|e| Error::FitFailure(format!("least squares failed: {e}")))
}

fn check(t: &[f64], y: &[f64]) -> Result<()> {
    if t.len() != y.len() {
        return Err(invalid("time and value arrays differ in length"));
    }
    if t.len() < 8 {
        return Err(invalid("at least 8 samples are needed for a harmonic fit"));
    }
    Ok(())
}

/// Fit y ≈ c₀ + c₁t + c₂t² + Σ (terms) at frequency ω, optionally letting the
/// oscillation amplitude drift linearly in time.
fn fit(t: &[f64], y: &[f64], omega: f64, drifting: bool) -> Result<(Harmonic, f64)> {
    check(t, y)?;
    let t0 = t[0];
    let span = (t[t.len() - 1] - t0).max(f64::MIN_POSITIVE);
    let cols = if drifting { 7 } else { 5 };
    let x = DMatrix::from_fn(t.len(), cols, |r, c| {
        let s = t[r] - t0;
        let u = 2.0 * s / span - 1.0;
        match c {
            0 => 1.0,
            1 => u,
            2 => u * u,
            3 => (omega * s).cos(),
            4 => (omega * s).sin(),
            5 => u * (omega * s).cos(),
            _ => u * (omega * s).sin(),
        }
    });
    let yv = DVector::from_column_slice(y);
    let c = lstsq(&x, &yv)?;
    let resid = &yv - &x * &c;
    let rms = (resid.norm_squared() / t.len() as f64).sqrt();
    let (a, b) = (c[3], c[4]);
    let harmonic = Harmonic { frequency: omega, amplitude: a.hypot(b), phase: (-b).atan2(a), rms_residual: rms };
    Ok((harmonic, resid.norm_squared()))
}

/// Amplitude of the component at angular frequency `omega` after removing a
/// quadratic background.
pub fn harmonic_amplitude(t: &[f64], y: &[f64], omega: f64) -> Result<Harmonic> {
    fit(t, y, omega, false).map(|(h, _)| h)
}

/// Angular frequency in [`lo`, `hi`] that best explains the trace as a
/// (possibly linearly drifting) sinusoid on a quadratic background.
pub fn dominant_frequency(t: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<f64> {
    check(t, y)?;
    if !(hi > lo && lo > 0.0) {
        return Err(invalid("frequency search interval must be positive and non-empty"));
    }
    let span = t[t.len() - 1] - t[0];
    // Scan finer than the Fourier resolution 2π/span, then refine by golden section.
    let n = ((hi - lo) * span / (2.0 * std::f64::consts::PI) * 20.0).ceil().max(50.0) as usize;
    let cost = |w: f64| fit(t, y, w, true).map(|(_, r)| r);
    let grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let costs = grid.iter().map(|&w| cost(w)).collect::<Result<Vec<_>>>()?;
    let best = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c)?, cost(d)?);
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d)?;
        }
        if (b - a).abs() < 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Angular frequency ω of a complex trace z ∝ e^{−iωt}, from the unwrapped
/// phase by least squares weighted with |z|². Consecutive samples must be
/// closer than half a period.
pub fn phase_frequency(t: &[f64], z: &[crate::C64]) -> Result<f64> {
    if t.len() != z.len() {
        return Err(invalid("time and value arrays differ in length"));
    }
    if t.len() < 3 {
        return Err(invalid("at least 3 samples are needed for a phase slope"));
    }
    let mut phase = Vec::with_capacity(z.len());
    let mut last = z[0].arg();
    phase.push(last);
    for w in z.windows(2) {
        let step = (w[1] * w[0].conj()).arg();
        last += step;
        phase.push(last);
    }
    let (mut sw, mut st, mut sp, mut stt, mut stp) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&tk, &pk), zk) in t.iter().zip(&phase).zip(z) {
        let w = zk.norm_sqr();
        sw += w;
        st += w * tk;
        sp += w * pk;
        stt += w * tk * tk;
        stp += w * tk * pk;
    }
    let denom = sw * stt - st * st;
    if !(denom > 0.0) {
        return Err(Error::FitFailure("trace has no weight to fit a phase slope".into()));
    }
    Ok(-(sw * stp - st * sp) / denom)
}
