//! Euclidean prox-structure on a box `Q = [lo_1, hi_1] x ... x [lo_n, hi_n]`.
//!
//! With `d(x) = ½‖x‖²` the Bregman divergence is `V(x, y) = ½‖y − x‖²` and the
//! mirror step `argmin_{y ∈ Q} ⟨v, y⟩ + V(x, y)` is the projection of `x − v`
//! onto the box, i.e. a coordinatewise clamp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxGeometry {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Norm exponent of the primal space. Only used when reporting the
    /// Nemirovski constant; the prox-function is always Euclidean.
    norm_p: f64,
}

impl ProxGeometry {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidArgument("box must have at least one coordinate".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), actual: upper.len() });
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "coordinate {j}: bounds [{lo}, {hi}] do not form a closed interval"
                )));
            }
        }
        Ok(Self { lower, upper, norm_p: 2.0 })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn with_norm_p(mut self, p: f64) -> Self {
        self.norm_p = p;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn norm_p(&self) -> f64 {
        self.norm_p
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| lo <= v && v <= hi)
    }

    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        if let Some(j) = (0..x.len()).find(|&j| !(self.lower[j] <= x[j] && x[j] <= self.upper[j])) {
            return Err(Error::Domain(format!(
                "coordinate {j} = {} not in [{}, {}]",
                x[j], self.lower[j], self.upper[j]
            )));
        }
        Ok(())
    }

    pub fn clamp_coord(&self, j: usize, value: f64) -> f64 {
        value.clamp(self.lower[j], self.upper[j])
    }

    /// `argmin_{x ∈ Q} ½‖x‖²`: the origin clamped into the box.
    pub fn initial_point(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.clamp_coord(j, 0.0)).collect()
    }

    /// Prox-function `d(x) = ½‖x‖²`.
    pub fn prox_function(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    /// `V(x, y) = d(y) − d(x) − ⟨∇d(x), y − x⟩ = ½‖y − x‖²`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>()
    }

    /// `sup_{y ∈ Q} d(y) − d(x⁰)`.
    pub fn prox_diameter_sq(&self) -> f64 {
        let far: f64 = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
            .sum();
        0.5 * far - self.prox_function(&self.initial_point())
    }

    /// Mirror step `argmin_{y ∈ Q} ⟨v, y⟩ + V(x, y)`.
    pub fn mirror_step(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_contains(x)?;
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: v.len() });
        }
        let mut out = x.to_vec();
        self.mirror_step_in_place(&mut out, v);
        Ok(out)
    }

    /// In-place mirror step for callers that maintain `x ∈ Q` themselves.
    pub fn mirror_step_in_place(&self, x: &mut [f64], v: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (j, (xj, vj)) in x.iter_mut().zip(v).enumerate() {
            *xj = self.clamp_coord(j, *xj - vj);
        }
    }
}
