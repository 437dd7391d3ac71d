//! Uniform grids in time, delay and momentum.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// `count` points `start + k·step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

/// Propagation / recording grid for amplitudes.
pub type TimeGrid = UniformGrid;
/// Grid of XUV center times τ.
pub type DelayGrid = UniformGrid;
/// Longitudinal photoelectron momenta along the polarization axis.
pub type MomentumGrid = UniformGrid;

/// Relative slack, in units of the step, when locating a value on a grid.
const INDEX_TOLERANCE: f64 = 1e-6;

impl UniformGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        let g = UniformGrid { start, step, count };
        g.validate()?;
        Ok(g)
    }

    /// Grid from `start` to `stop` inclusive (stop is rounded to the nearest point).
    pub fn from_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if !(stop >= start) {
            return Err(invalid(format!("grid range [{start}, {stop}] is empty")));
        }
        let count = ((stop - start) / step + INDEX_TOLERANCE).floor() as usize + 1;
        UniformGrid::new(start, step, count)
    }

    /// Smallest grid with step `step`, aligned to `origin` (origin is a grid
    /// point if extended), that contains [t_min, t_max].
    pub fn covering(t_min: f64, t_max: f64, step: f64, origin: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if !(t_max >= t_min) {
            return Err(invalid("covering grid requires t_max >= t_min"));
        }
        let k0 = ((t_min - origin) / step + INDEX_TOLERANCE).floor();
        let k1 = ((t_max - origin) / step - INDEX_TOLERANCE).ceil();
        UniformGrid::new(origin + k0 * step, step, (k1 - k0) as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("grid step must be positive, got {}", self.step)));
        }
        if !self.start.is_finite() {
            return Err(invalid("grid start must be finite"));
        }
        if self.count == 0 {
            return Err(invalid("grid must contain at least one point"));
        }
        Ok(())
    }

    pub fn value(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.value(self.count - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Index of the grid point equal to `x` (within a millionth of a step).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let k = ((x - self.start) / self.step).round();
        if k < 0.0 || k >= self.count as f64 {
            return None;
        }
        let k = k as usize;
        ((self.value(k) - x).abs() <= INDEX_TOLERANCE * self.step).then_some(k)
    }

    /// Index of the point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let k = ((x - self.start) / self.step).round();
        k.clamp(0.0, (self.count - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start - INDEX_TOLERANCE * self.step && x <= self.last() + INDEX_TOLERANCE * self.step
    }

    /// Every `stride`-th point; the last point is kept only if it falls on the stride.
    pub fn strided(&self, stride: usize) -> UniformGrid {
        let stride = stride.max(1);
        UniformGrid { start: self.start, step: self.step * stride as f64, count: (self.count - 1) / stride + 1 }
    }

    /// Same grid moved by `offset`.
    pub fn shifted(&self, offset: f64) -> UniformGrid {
        UniformGrid { start: self.start + offset, ..*self }
    }

    /// Ratio `other.step / self.step` if it is a positive integer and the grids share points.
    pub fn stride_to(&self, other: &UniformGrid) -> Option<usize> {
        let ratio = other.step / self.step;
        let r = ratio.round();
        if r < 1.0 || (ratio - r).abs() > INDEX_TOLERANCE {
            return None;
        }
        self.index_of(other.start).map(|_| r as usize)
    }
}
