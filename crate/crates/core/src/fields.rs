//! XUV and THz probe waveforms.
//!
//! Both pulses are described by their electric field E(t) and vector potential
//! A(t), related by E = −dA/dt. The THz pulse is always centered on the XUV
//! pulse such that A_THz vanishes at the XUV center (zero-crossing lock); near
//! that instant A_THz(t) ≈ α (t − τ) with α = −E₀^THz.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// A linearly polarized waveform.
pub trait Waveform {
    fn field_at(&self, t: f64) -> f64;
    fn vector_potential_at(&self, t: f64) -> f64;
}

/// Fourier-limited XUV pulse with Gaussian envelope
/// E(t) = E₀ exp(−(t−τ)²/2σ²) cos(ω (t−τ)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XuvPulse {
    pub peak_field: f64,
    pub omega: f64,
    pub sigma: f64,
    pub center: f64,
}

impl XuvPulse {
    pub fn new(peak_field: f64, omega: f64, sigma: f64, center: f64) -> Result<Self> {
        let pulse = XuvPulse { peak_field, omega, sigma, center };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_field > 0.0 && self.peak_field.is_finite()) {
            return Err(invalid(format!("XUV peak field must be positive, got {}", self.peak_field)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(invalid(format!("XUV photon energy must be positive, got {}", self.omega)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("XUV envelope width must be positive, got {}", self.sigma)));
        }
        if !self.center.is_finite() {
            return Err(invalid("XUV center must be finite"));
        }
        Ok(())
    }

    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.sigma;
        self.peak_field * (-0.5 * x * x).exp()
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }
}

impl Waveform for XuvPulse {
    fn field_at(&self, t: f64) -> f64 {
        self.envelope(t) * (self.omega * (t - self.center)).cos()
    }

    /// A = −∫E dt, evaluated through the asymptotic integration-by-parts
    /// series in 1/(ωσ). Six terms leave a residual of order He₆(x)/(ωσ)⁶.
    fn vector_potential_at(&self, t: f64) -> f64 {
        let s = t - self.center;
        let x = s / self.sigma;
        let g = (-0.5 * x * x).exp();
        if g == 0.0 {
            return 0.0;
        }
        // g⁽ⁿ⁾(s) = (−1/σ)ⁿ Heₙ(x) g(s), probabilists' Hermite polynomials.
        let x2 = x * x;
        let he = [
            1.0,
            x,
            x2 - 1.0,
            x * (x2 - 3.0),
            x2 * x2 - 6.0 * x2 + 3.0,
            x * (x2 * x2 - 10.0 * x2 + 15.0),
        ];
        let w = self.omega;
        let inv = -1.0 / self.sigma;
        let (sin, cos) = (w * s).sin_cos();
        let mut deriv = [0.0; 6];
        let mut scale = 1.0;
        for (n, d) in deriv.iter_mut().enumerate() {
            *d = scale * he[n] * g;
            scale *= inv;
        }
        let integral = deriv[0] * sin / w + deriv[1] * cos / w.powi(2)
            - deriv[2] * sin / w.powi(3)
            - deriv[3] * cos / w.powi(4)
            + deriv[4] * sin / w.powi(5)
            + deriv[5] * cos / w.powi(6);
        -self.peak_field * integral
    }
}

/// Single-cycle THz pulse,
/// A(t) = −(E₀/ω) sin(ω (t−τ)) g(t−τ) with g(s) = cos²(πs/D) for |s| < D/2,
/// where D spans `envelope_cycles` carrier periods. A(τ) = 0 and dA/dt(τ) = −E₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThzPulse {
    pub peak_field: f64,
    pub omega: f64,
    pub envelope_cycles: f64,
    pub center: f64,
}

impl ThzPulse {
    pub const DEFAULT_ENVELOPE_CYCLES: f64 = 2.0;

    pub fn new(peak_field: f64, omega: f64, envelope_cycles: f64) -> Result<Self> {
        let pulse = ThzPulse { peak_field, omega, envelope_cycles, center: 0.0 };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_field >= 0.0 && self.peak_field.is_finite()) {
            return Err(invalid(format!("THz peak field must be non-negative, got {}", self.peak_field)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(invalid(format!("THz frequency must be positive, got {}", self.omega)));
        }
        if !(self.envelope_cycles >= 1.0 && self.envelope_cycles.is_finite()) {
            return Err(invalid(format!(
                "THz envelope must span at least one cycle, got {}",
                self.envelope_cycles
            )));
        }
        Ok(())
    }

    /// Full duration D of the sin² envelope.
    pub fn envelope_duration(&self) -> f64 {
        self.envelope_cycles * TAU / self.omega
    }

    /// Streaking slope α = dA/dt at the center.
    pub fn slope(&self) -> f64 {
        -self.peak_field
    }

    fn envelope_and_derivative(&self, s: f64) -> (f64, f64) {
        let d = self.envelope_duration();
        if s.abs() >= 0.5 * d {
            return (0.0, 0.0);
        }
        let c = (PI * s / d).cos();
        (c * c, -(PI / d) * (TAU * s / d).sin())
    }
}

impl Waveform for ThzPulse {
    fn field_at(&self, t: f64) -> f64 {
        let s = t - self.center;
        let (g, dg) = self.envelope_and_derivative(s);
        let (sin, cos) = (self.omega * s).sin_cos();
        self.peak_field * (cos * g + sin * dg / self.omega)
    }

    fn vector_potential_at(&self, t: f64) -> f64 {
        let s = t - self.center;
        let (g, _) = self.envelope_and_derivative(s);
        -(self.peak_field / self.omega) * (self.omega * s).sin() * g
    }
}

/// The probe: an XUV pulse and an optional THz pulse locked to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub xuv: XuvPulse,
    pub thz: Option<ThzPulse>,
}

impl FieldConfig {
    pub fn new(xuv: XuvPulse, thz: Option<ThzPulse>) -> Result<Self> {
        xuv.validate()?;
        if let Some(thz) = &thz {
            thz.validate()?;
        }
        Ok(FieldConfig { xuv, thz: thz.map(|p| ThzPulse { center: xuv.center, ..p }) })
    }

    /// Same probe moved so that both pulses are centered at `delay`.
    pub fn centered_at(&self, delay: f64) -> Self {
        FieldConfig {
            xuv: self.xuv.with_center(delay),
            thz: self.thz.map(|p| ThzPulse { center: delay, ..p }),
        }
    }

    pub fn center(&self) -> f64 {
        self.xuv.center
    }

    pub fn without_thz(&self) -> Self {
        FieldConfig { xuv: self.xuv, thz: None }
    }

    pub fn thz_on(&self) -> bool {
        self.thz.is_some()
    }

    /// Streaking slope α; zero without THz.
    pub fn streaking_slope(&self) -> f64 {
        self.thz.map_or(0.0, |p| p.slope())
    }
}

impl Waveform for FieldConfig {
    fn field_at(&self, t: f64) -> f64 {
        self.xuv.field_at(t) + self.thz.map_or(0.0, |p| p.field_at(t))
    }

    fn vector_potential_at(&self, t: f64) -> f64 {
        self.xuv.vector_potential_at(t) + self.thz.map_or(0.0, |p| p.vector_potential_at(t))
    }
}

/// Largest Simpson panel used by [`action_phase`].
pub const ACTION_STEP: f64 = 0.05;

/// Volkov phase S_p(t) = ½ ∫_{t_start}^{t} [p + A(t″)]² dt″, by composite
/// Simpson quadrature with panels no wider than [`ACTION_STEP`].
pub fn action_phase<W: Waveform + ?Sized>(p: f64, waveform: &W, t_start: f64, t: f64) -> f64 {
    let span = t - t_start;
    if span == 0.0 {
        return 0.0;
    }
    let panels = (span.abs() / ACTION_STEP).ceil().max(1.0) as usize;
    let h = span / panels as f64;
    let kinetic = |u: f64| {
        let k = p + waveform.vector_potential_at(u);
        0.5 * k * k
    };
    let mut acc = 0.0;
    let mut left = kinetic(t_start);
    for n in 0..panels {
        let a = t_start + n as f64 * h;
        let right = kinetic(a + h);
        acc += left + 4.0 * kinetic(a + 0.5 * h) + right;
        left = right;
    }
    acc * h / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{fs_to_au, fwhm_to_sigma, thz_to_au};
    use proptest::prelude::*;

    fn paper_xuv() -> XuvPulse {
        XuvPulse::new(0.005, 2.0, fwhm_to_sigma(fs_to_au(5.0)), 0.0).unwrap()
    }

    fn paper_thz(e0: f64) -> ThzPulse {
        ThzPulse::new(e0, thz_to_au(4.0), 2.0).unwrap()
    }

    fn central_derivative<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn thz_zero_crossing_lock() {
        let xuv = paper_xuv().with_center(1234.5);
        let fields = FieldConfig::new(xuv, Some(paper_thz(0.001))).unwrap();
        let thz = fields.thz.unwrap();
        assert_eq!(thz.center, 1234.5);
        assert_eq!(thz.vector_potential_at(1234.5), 0.0);
        let slope = central_derivative(|t| thz.vector_potential_at(t), 1234.5, 1e-2);
        assert!((slope + 0.001).abs() < 1e-6 * 0.001, "slope {slope}");
    }

    #[test]
    fn xuv_gaussian_tail() {
        let xuv = paper_xuv();
        let t = 10.0 * xuv.sigma;
        assert!(xuv.field_at(t).abs() < xuv.peak_field * (-50.0f64).exp());
    }

    #[test]
    fn field_is_minus_derivative_of_vector_potential() {
        let fields = FieldConfig::new(paper_xuv(), Some(paper_thz(0.001))).unwrap();
        let sigma = fields.xuv.sigma;
        let scale = fields.xuv.peak_field;
        let h = 1e-4;
        let n = 4001;
        for k in 0..n {
            let t = -5.0 * sigma + 10.0 * sigma * k as f64 / (n - 1) as f64;
            let e = fields.field_at(t);
            let fd = -central_derivative(|u| fields.vector_potential_at(u), t, h);
            assert!((e - fd).abs() < 1e-6 * scale, "t={t}: E={e}, -dA/dt={fd}");
        }
    }

    #[test]
    fn free_action() {
        struct NoField;
        impl Waveform for NoField {
            fn field_at(&self, _: f64) -> f64 {
                0.0
            }
            fn vector_potential_at(&self, _: f64) -> f64 {
                0.0
            }
        }
        assert!((action_phase(1.0, &NoField, 0.0, 2.0) - 1.0).abs() < 1e-14);
    }

    struct LinearRamp {
        slope: f64,
        center: f64,
    }

    impl Waveform for LinearRamp {
        fn field_at(&self, _: f64) -> f64 {
            -self.slope
        }
        fn vector_potential_at(&self, t: f64) -> f64 {
            self.slope * (t - self.center)
        }
    }

    #[test]
    fn linear_streaking_action_matches_expansion() {
        // ½∫_τ^t (p + α(u−τ))² du = (p²/2)(t−τ) + (αp/2)(t−τ)² + (α²/6)(t−τ)³;
        // the first two terms are the streaking-regime expansion.
        let (p, alpha, tau) = (1.84, -0.001, 300.0);
        let ramp = LinearRamp { slope: alpha, center: tau };
        for &s in &[-250.0, -60.0, 0.0, 17.0, 263.0] {
            let numeric = action_phase(p, &ramp, tau, tau + s);
            let expansion = 0.5 * p * p * s + 0.5 * alpha * p * s * s;
            let exact = expansion + alpha * alpha * s.powi(3) / 6.0;
            assert!((numeric - exact).abs() < 1e-9 * exact.abs().max(1.0), "s={s}");
            assert!((numeric - expansion).abs() <= alpha * alpha * s.abs().powi(3) / 6.0 + 1e-9);
        }
    }

    #[test]
    fn small_slope_limit_is_continuous() {
        let p = 1.3;
        let free = action_phase(p, &LinearRamp { slope: 0.0, center: 0.0 }, 0.0, 50.0);
        let mut last = f64::INFINITY;
        for &alpha in &[1e-3, 1e-4, 1e-5, 1e-6] {
            let s = action_phase(p, &LinearRamp { slope: alpha, center: 0.0 }, 0.0, 50.0);
            let gap = (s - free).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-2);
    }

    #[test]
    fn invalid_pulses_rejected() {
        assert!(XuvPulse::new(0.005, 2.0, -1.0, 0.0).is_err());
        assert!(XuvPulse::new(0.0, 2.0, 80.0, 0.0).is_err());
        assert!(XuvPulse::new(0.005, 0.0, 80.0, 0.0).is_err());
        assert!(ThzPulse::new(0.001, 0.0, 2.0).is_err());
        assert!(ThzPulse::new(0.001, 1e-3, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn lock_holds_for_any_parameters(
            e0 in 1e-5f64..1e-2,
            thz in 0.5f64..10.0,
            cycles in 1.0f64..4.0,
            center in -1e4f64..1e4,
        ) {
            let xuv = XuvPulse::new(0.005, 2.0, 80.0, center).unwrap();
            let fields = FieldConfig::new(xuv, Some(ThzPulse::new(e0, thz_to_au(thz), cycles).unwrap())).unwrap();
            let pulse = fields.thz.unwrap();
            prop_assert_eq!(pulse.vector_potential_at(center), 0.0);
            let h = 1e-3 / pulse.omega;
            let slope = central_derivative(|t| pulse.vector_potential_at(t), center, h);
            prop_assert!((slope + e0).abs() < 1e-6 * e0);
        }
    }
}
