//! Strong-field-approximation amplitudes and ensemble spectrograms.
//!
//! With a constant dipole the direct-ionization amplitude of a bound wave
//! packet with Schrödinger-picture amplitudes a_i(t) is
//!
//! M_p(τ) = ∫ dt E_X(t) e^{iS_p(t)} Σ_i a_i(t),   S_p(t) = ½∫^t [p + A(t″)]² dt″,
//!
//! evaluated over the window |t − τ| ≤ 5σ. Only the XUV field E_X ionizes; the
//! THz pulse enters through the full vector potential A in the action. The
//! probe depends only on t − τ, so the factor E e^{iS_p} is tabulated once per
//! momentum and reused for every delay.

use crate::dynamics::{TrajectoryEnsemble, WaveTrajectory};
use crate::error::{invalid, Error, Result};
use crate::fields::{FieldConfig, Waveform};
use crate::grid::{DelayGrid, MomentumGrid, TimeGrid};
use crate::spectrogram::{Spectrogram, SpectrogramMetadata};
use crate::C64;
use nalgebra::{DMatrix, DMatrixView};
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Minimum samples per period of the fastest integrand phase.
pub const SAMPLES_PER_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Half-width of the integration window in units of σ.
    pub window_sigmas: f64,
    /// Keep the ½A² term of the action. Disabling it leaves the action linear
    /// in A, which is the form the closed-form peak model is derived from.
    pub ponderomotive: bool,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { window_sigmas: 5.0, ponderomotive: true }
    }
}

/// Tabulated w_k E(s_k) e^{iS_p(s_k)} on s_k = k·h, |k| ≤ K, for each momentum.
#[derive(Debug, Clone)]
pub struct SfaKernel {
    momenta: Vec<f64>,
    half_span: usize,
    step: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SfaKernel {
    pub fn new(fields: &FieldConfig, momenta: &[f64], step: f64, settings: QuadratureSettings) -> Result<Self> {
        fields.xuv.validate()?;
        if !(settings.window_sigmas > 0.0) {
            return Err(invalid("integration window must be positive"));
        }
        if momenta.is_empty() {
            return Err(invalid("no momenta requested"));
        }
        let fields = fields.centered_at(0.0);
        let half_span = (settings.window_sigmas * fields.xuv.sigma / step).ceil() as usize;
        let len = 2 * half_span + 1;
        let s0 = -(half_span as f64) * step;
        let s = |k: usize| s0 + k as f64 * step;

        // Cumulative ∫A and ½∫A² from the window start, Simpson per interval.
        let a: Vec<f64> = (0..len).map(|k| fields.vector_potential_at(s(k))).collect();
        let mut f = vec![0.0; len];
        let mut g = vec![0.0; len];
        for k in 1..len {
            let mid = fields.vector_potential_at(s(k) - 0.5 * step);
            f[k] = f[k - 1] + step / 6.0 * (a[k - 1] + 4.0 * mid + a[k]);
            if settings.ponderomotive {
                g[k] = g[k - 1] + step / 12.0 * (a[k - 1].powi(2) + 4.0 * mid * mid + a[k].powi(2));
            }
        }
        let e: Vec<f64> = (0..len)
            .map(|k| {
                let w = if k == 0 || k == len - 1 { 0.5 } else { 1.0 };
                w * step * fields.xuv.field_at(s(k))
            })
            .collect();

        let mut re = Vec::with_capacity(momenta.len() * len);
        let mut im = Vec::with_capacity(momenta.len() * len);
        for &p in momenta {
            for k in 0..len {
                let phase = 0.5 * p * p * (s(k) - s0) + p * f[k] + g[k];
                let (sin, cos) = phase.sin_cos();
                re.push(e[k] * cos);
                im.push(e[k] * sin);
            }
        }
        Ok(SfaKernel { momenta: momenta.to_vec(), half_span, step, re, im })
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    /// Number of samples on each side of the window center.
    pub fn half_span(&self) -> usize {
        self.half_span
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn window_len(&self) -> usize {
        2 * self.half_span + 1
    }

    /// M_p for momentum index `ip`, given Σ_i a_i on the window (split into parts).
    pub fn amplitude(&self, ip: usize, psi_re: &[f64], psi_im: &[f64]) -> C64 {
        let len = self.window_len();
        let kr = &self.re[ip * len..(ip + 1) * len];
        let ki = &self.im[ip * len..(ip + 1) * len];
        complex_dot(kr, ki, &psi_re[..len], &psi_im[..len])
    }
}

impl SfaKernel {
    /// |M_p|² for every momentum and every window, as a (windows × momenta)
    /// matrix. The kernel rows are the columns of an L × P column-major view,
    /// so the four real products below are plain matrix multiplications.
    fn amplitudes_sqr(&self, windows: &[(&[f64], &[f64])]) -> DMatrix<f64> {
        let len = self.window_len();
        let np = self.momenta.len();
        let t = windows.len();
        let xr = DMatrix::from_fn(t, len, |r, k| windows[r].0[k]);
        let xi = DMatrix::from_fn(t, len, |r, k| windows[r].1[k]);
        let kr = DMatrixView::from_slice(&self.re, len, np);
        let ki = DMatrixView::from_slice(&self.im, len, np);
        let mut mr = DMatrix::zeros(t, np);
        let mut mi = DMatrix::zeros(t, np);
        mr.gemm(1.0, &xr, &kr, 0.0);
        mr.gemm(-1.0, &xi, &ki, 1.0);
        mi.gemm(1.0, &xr, &ki, 0.0);
        mi.gemm(1.0, &xi, &kr, 1.0);
        mr.component_mul_assign(&mr.clone());
        mi.component_mul_assign(&mi.clone());
        mr + mi
    }
}

/// Trajectories of one system that start from the same amplitudes and whose
/// jump histories agree up to `t_end` carry bit-identical amplitudes there.
/// Returns (representative, multiplicity) in first-seen order.
fn identical_windows(trajectories: &[WaveTrajectory], t_end: f64) -> Vec<(usize, usize)> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let history = |s: usize| trajectories[s].jumps.iter().take_while(|j| j.time < t_end);
    for s in 0..trajectories.len() {
        let found = groups.iter_mut().find(|(r, _)| {
            let same_start = trajectories[*r].at(0).iter().zip(trajectories[s].at(0)).all(|(a, b)| {
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            });
            same_start
                && history(*r).map(|j| (j.step, j.source, j.target, j.phase.to_bits()))
                .eq(history(s).map(|j| (j.step, j.source, j.target, j.phase.to_bits())))
        });
        match found {
            Some(g) => g.1 += 1,
            None => groups.push((s, 1)),
        }
    }
    groups
}

/// Σ_k (kr + i ki)(pr + i pi) with independent partial sums so the loop vectorizes.
fn complex_dot(kr: &[f64], ki: &[f64], pr: &[f64], pi: &[f64]) -> C64 {
    const LANES: usize = 4;
    let mut acc_re = [0.0; LANES];
    let mut acc_im = [0.0; LANES];
    let chunks = kr.len() / LANES;
    for c in 0..chunks {
        let o = c * LANES;
        for l in 0..LANES {
            let (a, b, x, y) = (kr[o + l], ki[o + l], pr[o + l], pi[o + l]);
            acc_re[l] += a * x - b * y;
            acc_im[l] += a * y + b * x;
        }
    }
    let mut re = acc_re.iter().sum::<f64>();
    let mut im = acc_im.iter().sum::<f64>();
    for k in chunks * LANES..kr.len() {
        re += kr[k] * pr[k] - ki[k] * pi[k];
        im += kr[k] * pi[k] + ki[k] * pr[k];
    }
    C64::new(re, im)
}

/// Reject quadrature steps that sample the fastest phase fewer than 20 times per period.
pub fn check_quadrature_step(fields: &FieldConfig, p_max: f64, max_ip: f64, step: f64) -> Result<()> {
    let fastest = fields.xuv.omega.max(0.5 * p_max * p_max + max_ip);
    let limit = TAU / fastest / SAMPLES_PER_PERIOD;
    if step > limit * (1.0 + 1e-9) {
        return Err(Error::UnderResolved(format!(
            "quadrature step {step} exceeds {limit:.4} (fastest integrand frequency {fastest:.4})"
        )));
    }
    Ok(())
}

/// Coherent sum Σ_i a_i, split into real and imaginary parts.
struct Packet {
    grid: TimeGrid,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Packet {
    fn new(traj: &WaveTrajectory) -> Self {
        let psi = traj.coherent_sum();
        Packet { grid: traj.grid, re: psi.iter().map(|z| z.re).collect(), im: psi.iter().map(|z| z.im).collect() }
    }

    /// First sample of the integration window centered at `tau`.
    fn window_start(&self, tau: f64, half_span: usize) -> Result<usize> {
        let center = self.grid.index_of(tau).ok_or_else(|| {
            Error::Coverage(format!("delay {tau} does not fall on the trajectory time grid"))
        })?;
        if center < half_span || center + half_span >= self.grid.count {
            return Err(Error::Coverage(format!(
                "trajectory [{}, {}] does not cover the window around delay {tau}",
                self.grid.start,
                self.grid.last()
            )));
        }
        Ok(center - half_span)
    }
}

/// M_p(τ) for one trajectory; `max_ip` is the largest ionization potential in the system.
pub fn sfa_amplitude(trajectory: &WaveTrajectory, fields: &FieldConfig, p: f64, tau: f64, max_ip: f64) -> Result<C64> {
    let step = trajectory.grid.step;
    check_quadrature_step(fields, p.abs(), max_ip, step)?;
    let kernel = SfaKernel::new(fields, &[p], step, QuadratureSettings::default())?;
    let packet = Packet::new(trajectory);
    let start = packet.window_start(tau, kernel.half_span())?;
    Ok(kernel.amplitude(0, &packet.re[start..], &packet.im[start..]))
}

/// w(p; τ) = (1/N) Σ_s |p| |M_p^(s)(τ)|² over trajectories of one system.
pub fn spectrogram_values(
    trajectories: &[WaveTrajectory],
    fields: &FieldConfig,
    momenta: &MomentumGrid,
    delays: &DelayGrid,
    max_ip: f64,
    settings: QuadratureSettings,
) -> Result<Vec<f64>> {
    let first = trajectories.first().ok_or(Error::EmptyEnsemble)?;
    momenta.validate()?;
    delays.validate()?;
    if momenta.start <= 0.0 {
        return Err(invalid("momenta must be positive"));
    }
    let step = first.grid.step;
    if trajectories.iter().any(|t| t.grid != first.grid) {
        return Err(invalid("trajectories do not share one time grid"));
    }
    check_quadrature_step(fields, momenta.last(), max_ip, step)?;
    let p = momenta.values();
    let kernel = SfaKernel::new(fields, &p, step, settings)?;
    let packets: Vec<Packet> = trajectories.iter().map(Packet::new).collect();
    let taus = delays.values();
    let starts = taus
        .iter()
        .map(|&tau| packets[0].window_start(tau, kernel.half_span()))
        .collect::<Result<Vec<_>>>()?;
    let inv_n = 1.0 / trajectories.len() as f64;
    let len = kernel.window_len();
    let rows: Vec<Vec<f64>> = starts
        .par_iter()
        .zip(&taus)
        .map(|(&start, &tau)| {
            let groups = identical_windows(trajectories, tau + kernel.half_span() as f64 * step);
            let windows: Vec<(&[f64], &[f64])> = groups
                .iter()
                .map(|&(s, _)| (&packets[s].re[start..start + len], &packets[s].im[start..start + len]))
                .collect();
            let m2 = kernel.amplitudes_sqr(&windows);
            (0..p.len())
                .map(|ip| {
                    let total: f64 = groups.iter().enumerate().map(|(r, &(_, count))| count as f64 * m2[(r, ip)]).sum();
                    total * p[ip].abs() * inv_n
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    Ok(rows.concat())
}

/// Ensemble spectrogram, normalized per atom.
pub fn spectrogram(
    ensemble: &TrajectoryEnsemble,
    fields: &FieldConfig,
    momenta: &MomentumGrid,
    delays: &DelayGrid,
    max_ip: f64,
    settings: QuadratureSettings,
) -> Result<Spectrogram> {
    let values = spectrogram_values(&ensemble.trajectories, fields, momenta, delays, max_ip, settings)?;
    let metadata = SpectrogramMetadata {
        fields: fields.centered_at(0.0),
        ensemble_size: ensemble.len(),
        master_seed: ensemble.master_seed,
        system_hash: ensemble.system_hash.clone(),
        time_origin: 0.0,
        extra: Vec::new(),
    };
    Spectrogram::new(*momenta, *delays, values, metadata)
}
