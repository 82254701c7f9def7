//! Uniform grids, sampled complex fields, quadrature and the Fourier
//! transform normalized as `(2 pi)^(-d/2) \int e^{-i x.xi} f(x) dx`.

mod fft;
mod grid;
pub mod interp;
pub mod io;

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

pub use grid::{make_grid, GridSpec, MAX_DIM};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Default negativity tolerance, relative to the field's peak magnitude.
pub const EPS_NEG: f64 = 1e-10;

/// Complex samples on a [`GridSpec`], row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: GridSpec,
    samples: Vec<Complex64>,
    nonnegative: bool,
}

impl Field {
    pub fn new(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::SampleCount {
                got: samples.len(),
                expected: grid.len(),
            });
        }
        Ok(Self {
            grid,
            samples,
            nonnegative: false,
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
            nonnegative: true,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut x = [0.0; MAX_DIM];
        let samples = (0..grid.len())
            .map(|k| {
                grid.point(k, &mut x[..grid.dim()]);
                f(&x[..grid.dim()])
            })
            .collect();
        Self {
            grid,
            samples,
            nonnegative: false,
        }
    }

    pub fn from_real_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Samples a real function that is known to be nonnegative and sets the
    /// positivity flag.
    pub fn from_nonnegative_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_real_fn(grid, f).into_nonnegative(EPS_NEG)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        self.nonnegative = false;
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let bound = tol * self.peak();
        self.samples.iter().all(|z| z.im.abs() <= bound)
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Verifies samples are real and `>= -eps_neg * peak`, clamps the
    /// rounding-level negatives to zero and sets the positivity flag.
    pub fn into_nonnegative(mut self, eps_neg: f64) -> Result<Self> {
        self.check_finite()?;
        let tol = eps_neg * self.peak();
        for z in &self.samples {
            if z.im.abs() > tol {
                return Err(Error::Negativity {
                    value: -z.im.abs(),
                    tolerance: tol,
                });
            }
            if z.re < -tol {
                return Err(Error::Negativity {
                    value: z.re,
                    tolerance: tol,
                });
            }
        }
        for z in &mut self.samples {
            *z = Complex64::new(z.re.max(0.0), 0.0);
        }
        self.nonnegative = true;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid,
            samples: self.samples.iter().map(|&z| f(z)).collect(),
            nonnegative: false,
        }
    }

    /// Pointwise map that also receives the sample coordinates.
    pub fn map_with_coords(&self, f: impl Fn(&[f64], Complex64) -> Complex64) -> Field {
        let mut x = [0.0; MAX_DIM];
        let d = self.dim();
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                self.grid.point(k, &mut x[..d]);
                f(&x[..d], z)
            })
            .collect();
        Field {
            grid: self.grid,
            samples,
            nonnegative: false,
        }
    }

    pub fn abs(&self) -> Field {
        Field {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .map(|z| Complex64::new(z.norm(), 0.0))
                .collect(),
            nonnegative: true,
        }
    }

    pub fn abs_sq(&self) -> Field {
        Field {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .map(|z| Complex64::new(z.norm_sqr(), 0.0))
                .collect(),
            nonnegative: true,
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        Field {
            grid: self.grid,
            samples: self.samples.iter().map(|z| z * c).collect(),
            nonnegative: self.nonnegative && c >= 0.0,
        }
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        if !self.grid.approx_eq(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a * b)
                .collect(),
            nonnegative: self.nonnegative && other.nonnegative,
        })
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        if !self.grid.approx_eq(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `h^dim * sum(samples)`: the periodized rectangle rule.
    pub fn integrate(&self) -> Result<Complex64> {
        self.check_finite()?;
        let re = pairwise_sum(self.samples.iter().map(|z| z.re));
        let im = pairwise_sum(self.samples.iter().map(|z| z.im));
        Ok(Complex64::new(re, im) * self.grid.cell_volume())
    }

    /// `(\int |f|^q)^{1/q}`.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::BadExponent(q));
        }
        self.check_finite()?;
        let s = pairwise_sum(self.samples.iter().map(|z| abs_pow(*z, q)));
        Ok((s * self.grid.cell_volume()).powf(1.0 / q))
    }

    /// Fourier transform, sampled on `grid().dual()`.
    pub fn fourier(&self) -> Result<Field> {
        self.check_finite()?;
        let dual = self.grid.dual();
        let scale = (self.grid.spacing() / (2.0 * PI).sqrt()).powi(self.dim() as i32);
        let samples = transform(&self.samples, &self.grid, FftDirection::Forward, scale);
        Ok(Field {
            grid: dual,
            samples,
            nonnegative: false,
        })
    }

    /// Inverse of [`Field::fourier`]; the input lives on a frequency grid and
    /// the output on its dual.
    pub fn inverse_fourier(&self) -> Result<Field> {
        self.check_finite()?;
        let primal = self.grid.dual();
        let scale = (self.grid.spacing() / (2.0 * PI).sqrt()).powi(self.dim() as i32);
        let samples = transform(&self.samples, &self.grid, FftDirection::Inverse, scale);
        Ok(Field {
            grid: primal,
            samples,
            nonnegative: false,
        })
    }

    /// Spectral partial derivatives, one field per axis. The Nyquist mode is
    /// dropped so real input gives real output.
    pub fn gradient(&self) -> Result<Vec<Field>> {
        let spec = self.fourier()?;
        let nyquist = spec.grid().half_extent();
        (0..self.dim())
            .map(|k| {
                spec.map_with_coords(|xi, z| {
                    if (xi[k] + nyquist).abs() < 1e-9 * nyquist {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z * Complex64::new(0.0, xi[k])
                    }
                })
                .inverse_fourier()
            })
            .collect()
    }

    /// `f^alpha` for a nonnegative field, `alpha` in `[1/2, 1]`.
    pub fn pointwise_power(&self, alpha: f64) -> Result<Field> {
        if !(0.5..=1.0).contains(&alpha) {
            return Err(Error::PowerOutOfRange(alpha));
        }
        let base = if self.nonnegative {
            self.clone()
        } else {
            self.clone().into_nonnegative(EPS_NEG)?
        };
        Ok(Field {
            grid: base.grid,
            samples: base
                .samples
                .iter()
                .map(|z| Complex64::new(z.re.powf(alpha), 0.0))
                .collect(),
            nonnegative: true,
        })
    }

    /// Largest coordinate magnitude (max norm) at which `|f|` exceeds
    /// `rel_tol * peak`. Zero for the zero field.
    pub fn support_radius(&self, rel_tol: f64) -> f64 {
        let bound = rel_tol * self.peak();
        let d = self.dim();
        let n = self.grid.points();
        let mut radius: f64 = 0.0;
        let mut idx = [0usize; MAX_DIM];
        for (k, z) in self.samples.iter().enumerate() {
            if z.norm() > bound && bound > 0.0 {
                self.grid.unravel(k, &mut idx[..d]);
                for &i in &idx[..d] {
                    // Half a cell of slack so the estimate is not grid-biased.
                    let c = self.grid.coord(i).abs() + 0.5 * self.grid.spacing();
                    radius = radius.max(c);
                }
                debug_assert!(idx[..d].iter().all(|&i| i < n));
            }
        }
        radius
    }
}

/// Outer product of fields; dimensions add and all factors must share the
/// per-axis sampling.
pub fn tensor_product(factors: &[&Field]) -> Result<Field> {
    let first = factors.first().ok_or(Error::GridMismatch)?;
    let mut dim = 0;
    for f in factors {
        if !f.grid.same_axes(&first.grid) {
            return Err(Error::GridMismatch);
        }
        dim += f.dim();
    }
    let grid = first.grid.with_dim(dim)?;
    let mut samples = vec![Complex64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(samples.len() * f.samples.len());
        for a in &samples {
            next.extend(f.samples.iter().map(|b| a * b));
        }
        samples = next;
    }
    Ok(Field {
        grid,
        samples,
        nonnegative: factors.iter().all(|f| f.nonnegative),
    })
}

/// `|z|^q`, using integer powers of `|z|^2` where possible.
#[inline]
pub(crate) fn abs_pow(z: Complex64, q: f64) -> f64 {
    let n2 = z.norm_sqr();
    let half = 0.5 * q;
    if half.fract() == 0.0 && half <= 16.0 {
        n2.powi(half as i32)
    } else if q == 1.0 {
        n2.sqrt()
    } else {
        n2.powf(half)
    }
}

fn transform(
    input: &[Complex64],
    grid: &GridSpec,
    direction: FftDirection,
    scale: f64,
) -> Vec<Complex64> {
    let n = grid.points();
    let d = grid.dim();
    let mut data = input.to_vec();
    fft::checkerboard(&mut data, n, d);
    fft::fft_nd(&mut data, n, d, direction);
    fft::checkerboard(&mut data, n, d);
    for v in &mut data {
        *v *= scale;
    }
    data
}
