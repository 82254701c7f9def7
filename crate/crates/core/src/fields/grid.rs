use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of real variables on one grid.
pub const MAX_DIM: usize = 4;

/// Uniform periodic sampling of the cube `[-L, L)^dim` with `N` points per
/// axis. Sample `j` on an axis sits at `-L + j h` with `h = 2L / N`, so the
/// origin is node `N / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_extent: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_extent: f64, points: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::BadDimension { got: dim, max: MAX_DIM });
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::BadExtent(half_extent));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::BadPointCount(points));
        }
        Ok(Self {
            dim,
            half_extent,
            points,
        })
    }

    /// Grid whose dual has the same half extent, `L = sqrt(pi N / 2)`.
    pub fn self_dual(dim: usize, points: usize) -> Result<Self> {
        Self::new(dim, (PI * points as f64 / 2.0).sqrt(), points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.points as f64
    }

    /// Spacing of the frequency grid, `pi / L`.
    pub fn dual_spacing(&self) -> f64 {
        PI / self.half_extent
    }

    /// Largest representable frequency magnitude, `pi / h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    /// Total number of sample sites, `N^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.half_extent + j as f64 * self.spacing()
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.coord(j)).collect()
    }

    /// The frequency grid on which `fourier` places its output.
    pub fn dual(&self) -> GridSpec {
        GridSpec {
            dim: self.dim,
            half_extent: self.nyquist(),
            points: self.points,
        }
    }

    /// Same axis conventions, different dimension.
    pub fn with_dim(&self, dim: usize) -> Result<GridSpec> {
        GridSpec::new(dim, self.half_extent, self.points)
    }

    /// Multi-index of flat position `flat` in row-major order (last axis fastest).
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.points;
            flat /= self.points;
        }
    }

    /// Coordinates of flat position `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; MAX_DIM];
        self.unravel(flat, &mut idx[..self.dim]);
        for (o, &i) in out.iter_mut().zip(&idx[..self.dim]) {
            *o = self.coord(i);
        }
    }

    /// Whether a point lies in the sampled box (half-open on every axis).
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .all(|&c| c >= -self.half_extent && c < self.half_extent)
    }

    pub(crate) fn same_axes(&self, other: &GridSpec) -> bool {
        self.points == other.points
            && (self.half_extent - other.half_extent).abs() <= 1e-12 * self.half_extent
    }

    pub(crate) fn approx_eq(&self, other: &GridSpec) -> bool {
        self.dim == other.dim && self.same_axes(other)
    }
}

/// Same as [`GridSpec::new`].
pub fn make_grid(dim: usize, half_extent: f64, points: usize) -> Result<GridSpec> {
    GridSpec::new(dim, half_extent, points)
}
