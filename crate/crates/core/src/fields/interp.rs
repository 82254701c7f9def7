//! Band-limited resampling and fast local interpolation of sampled fields.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use super::{Field, GridSpec};
use crate::error::{Error, Result};

/// Periodic sinc: the cardinal function of the trigonometric interpolant on
/// `N` nodes with spacing `h` over a box of length `2L = N h`, evaluated at
/// offset `y` from a node. The Nyquist mode is split symmetrically so real
/// data interpolate to real values.
fn periodic_sinc(y: f64, grid: &GridSpec) -> f64 {
    let h = grid.spacing();
    if y.abs() < 1e-13 * h {
        return 1.0;
    }
    let l = grid.half_extent();
    (PI * y / h).sin() / (grid.points() as f64 * (PI * y / (2.0 * l)).tan())
}

/// Row-major `targets.len() x N` matrix evaluating the trigonometric
/// interpolant of one source axis at `targets`; rows for targets outside the
/// source box are zero.
pub(crate) fn axis_matrix(source: &GridSpec, targets: &[f64]) -> Vec<f64> {
    let n = source.points();
    let l = source.half_extent();
    let mut m = vec![0.0; targets.len() * n];
    for (i, &x) in targets.iter().enumerate() {
        if x < -l || x >= l {
            continue;
        }
        let row = &mut m[i * n..(i + 1) * n];
        for (j, v) in row.iter_mut().enumerate() {
            *v = periodic_sinc(x - source.coord(j), source);
        }
    }
    m
}

/// Applies `matrix` (`n_out x n_in`) along every axis of a cube.
pub(crate) fn apply_separable(data: &[Complex64], n_in: usize, dim: usize, matrix: &[f64], n_out: usize) -> Vec<Complex64> {
    let mut shape = vec![n_in; dim];
    let mut cur = data.to_vec();
    for axis in 0..dim {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut next = vec![Complex64::new(0.0, 0.0); outer * n_out * inner];
        for o in 0..outer {
            for i in 0..n_out {
                let row = &matrix[i * n_in..(i + 1) * n_in];
                let dst = &mut next[(o * n_out + i) * inner..(o * n_out + i + 1) * inner];
                for (j, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let src = &cur[(o * n_in + j) * inner..(o * n_in + j + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s * w;
                    }
                }
            }
        }
        shape[axis] = n_out;
        cur = next;
    }
    cur
}

/// Evaluates the band-limited interpolant of `field` on every node of
/// `target`, treating the field as zero outside its box.
pub fn resample(field: &Field, target: &GridSpec) -> Result<Field> {
    if target.dim() != field.dim() {
        return Err(Error::GridMismatch);
    }
    let matrix = axis_matrix(field.grid(), &target.axis());
    let samples = apply_separable(
        field.samples(),
        field.grid().points(),
        field.dim(),
        &matrix,
        target.points(),
    );
    let out = Field::new(*target, samples)?;
    if field.is_nonnegative() {
        // Interpolation ringing is rounding-level for resolved data.
        Ok(out.map(|z| Complex64::new(z.re, 0.0)).into_nonnegative_lenient())
    } else {
        Ok(out)
    }
}

/// `g(x) = f(factor * x)` on the same grid, by band-limited interpolation.
/// Points with `factor * x` outside the box evaluate to zero.
pub fn dilate(field: &Field, factor: f64) -> Result<Field> {
    let grid = *field.grid();
    let targets: Vec<f64> = grid.axis().iter().map(|x| factor * x).collect();
    let matrix = axis_matrix(&grid, &targets);
    let samples = apply_separable(field.samples(), grid.points(), grid.dim(), &matrix, grid.points());
    Field::new(grid, samples)
}

impl Field {
    /// Clamps negatives to zero and sets the positivity flag without a
    /// tolerance check; for values known to be nonnegative up to ringing.
    pub(crate) fn into_nonnegative_lenient(mut self) -> Field {
        for z in self.samples.iter_mut() {
            *z = Complex64::new(z.re.max(0.0), 0.0);
        }
        self.nonnegative = true;
        self
    }
}

/// Values that can be interpolated linearly.
pub trait Sample: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl Sample for f64 {}
impl Sample for Complex64 {}

const STENCIL: usize = 6;

#[inline]
fn lagrange_weights(t: f64) -> [f64; STENCIL] {
    // Nodes at 0..6, t measured in node units.
    const DENOM: [f64; STENCIL] = [-120.0, 24.0, -12.0, 12.0, -24.0, 120.0];
    let d: [f64; STENCIL] = std::array::from_fn(|k| t - k as f64);
    let mut w = [0.0; STENCIL];
    for k in 0..STENCIL {
        let mut p = 1.0;
        for (m, dm) in d.iter().enumerate() {
            if m != k {
                p *= dm;
            }
        }
        w[k] = p / DENOM[k];
    }
    w
}

/// Locates the stencil for coordinate `x` on an axis starting at `origin`
/// with spacing `h` and `n` nodes. Returns the first stencil node and the
/// Lagrange weights, or `None` outside the box.
#[inline]
fn stencil(x: f64, origin: f64, h: f64, n: usize) -> Option<(isize, [f64; STENCIL])> {
    let u = (x - origin) / h;
    if !(u >= 0.0 && u < n as f64) {
        return None;
    }
    let i0 = u.floor() as isize - 2;
    Some((i0, lagrange_weights(u - i0 as f64)))
}

/// Six-point Lagrange interpolation on a band-limited upsampling of a 1-D
/// field. Zero outside the box.
#[derive(Debug, Clone)]
pub struct Interpolator1<T: Sample> {
    origin: f64,
    h: f64,
    values: Vec<T>,
}

/// Tensor six-point interpolation on an upsampled 2-D field.
#[derive(Debug, Clone)]
pub struct Interpolator2<T: Sample> {
    origin: f64,
    h: f64,
    n: usize,
    values: Vec<T>,
}

fn upsampled(field: &Field, factor: usize) -> Result<Field> {
    let g = field.grid();
    let fine = GridSpec::new(g.dim(), g.half_extent(), g.points() * factor)?;
    resample(field, &fine)
}

impl Interpolator1<Complex64> {
    pub fn new(field: &Field, factor: usize) -> Result<Self> {
        if field.dim() != 1 {
            return Err(Error::GridMismatch);
        }
        let fine = upsampled(field, factor)?;
        Ok(Self {
            origin: -fine.grid().half_extent(),
            h: fine.grid().spacing(),
            values: fine.into_samples(),
        })
    }
}

impl Interpolator1<f64> {
    /// Interpolates the real part only.
    pub fn new_real(field: &Field, factor: usize) -> Result<Self> {
        if field.dim() != 1 {
            return Err(Error::GridMismatch);
        }
        let fine = upsampled(field, factor)?;
        Ok(Self {
            origin: -fine.grid().half_extent(),
            h: fine.grid().spacing(),
            values: fine.samples().iter().map(|z| z.re).collect(),
        })
    }
}

impl<T: Sample> Interpolator1<T> {
    /// Builds from values already on a fine uniform axis.
    pub fn from_values(origin: f64, h: f64, values: Vec<T>) -> Self {
        Self { origin, h, values }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> T {
        let n = self.values.len();
        let Some((i0, w)) = stencil(x, self.origin, self.h, n) else {
            return T::default();
        };
        let mut acc = T::default();
        for (k, wk) in w.iter().enumerate() {
            let i = i0 + k as isize;
            if i >= 0 && (i as usize) < n {
                acc = acc + self.values[i as usize] * *wk;
            }
        }
        acc
    }
}

/// Tensor six-point interpolation of a complex field of any dimension, on a
/// band-limited upsampling. Zero outside the box.
#[derive(Debug, Clone)]
pub struct InterpolatorN {
    dim: usize,
    origin: f64,
    h: f64,
    n: usize,
    values: Vec<Complex64>,
}

impl InterpolatorN {
    pub fn new(field: &Field, factor: usize) -> Result<Self> {
        let fine = upsampled(field, factor)?;
        Ok(Self {
            dim: fine.dim(),
            origin: -fine.grid().half_extent(),
            h: fine.grid().spacing(),
            n: fine.grid().points(),
            values: fine.into_samples(),
        })
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let d = self.dim;
        let n = self.n;
        let mut starts = [0isize; super::grid::MAX_DIM];
        let mut weights = [[0.0; STENCIL]; super::grid::MAX_DIM];
        for a in 0..d {
            match stencil(x[a], self.origin, self.h, n) {
                Some((i0, w)) => {
                    starts[a] = i0;
                    weights[a] = w;
                }
                None => return Complex64::new(0.0, 0.0),
            }
        }
        // Odometer over the leading axes; the last axis is a contiguous dot.
        let last = d - 1;
        let mut digits = [0usize; super::grid::MAX_DIM];
        let mut acc = Complex64::new(0.0, 0.0);
        'outer: loop {
            let mut offset = 0usize;
            let mut weight = 1.0;
            let mut inside = true;
            for a in 0..last {
                let i = starts[a] + digits[a] as isize;
                if i < 0 || i as usize >= n {
                    inside = false;
                    break;
                }
                offset = offset * n + i as usize;
                weight *= weights[a][digits[a]];
            }
            if inside {
                let row = &self.values[offset * n..(offset + 1) * n];
                let mut inner = Complex64::new(0.0, 0.0);
                for (k, wk) in weights[last].iter().enumerate() {
                    let j = starts[last] + k as isize;
                    if j >= 0 && (j as usize) < n {
                        inner += row[j as usize] * *wk;
                    }
                }
                acc += inner * weight;
            }
            for a in (0..last).rev() {
                digits[a] += 1;
                if digits[a] < STENCIL {
                    continue 'outer;
                }
                digits[a] = 0;
            }
            break;
        }
        acc
    }
}

impl Interpolator2<f64> {
    pub fn new_real(field: &Field, factor: usize) -> Result<Self> {
        if field.dim() != 2 {
            return Err(Error::GridMismatch);
        }
        let fine = upsampled(field, factor)?;
        Ok(Self {
            origin: -fine.grid().half_extent(),
            h: fine.grid().spacing(),
            n: fine.grid().points(),
            values: fine.samples().iter().map(|z| z.re).collect(),
        })
    }
}

impl<T: Sample> Interpolator2<T> {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> T {
        let n = self.n;
        let (Some((i0, wx)), Some((j0, wy))) = (
            stencil(x, self.origin, self.h, n),
            stencil(y, self.origin, self.h, n),
        ) else {
            return T::default();
        };
        let mut acc = T::default();
        for (a, wa) in wx.iter().enumerate() {
            let i = i0 + a as isize;
            if i < 0 || i as usize >= n {
                continue;
            }
            let row = &self.values[i as usize * n..(i as usize + 1) * n];
            let mut inner = T::default();
            for (b, wb) in wy.iter().enumerate() {
                let j = j0 + b as isize;
                if j >= 0 && (j as usize) < n {
                    inner = inner + row[j as usize] * *wb;
                }
            }
            acc = acc + inner * *wa;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    #[test]
    fn resample_onto_wider_coarser_grid() {
        let src = make_grid(1, 10.0, 256).unwrap();
        let f = Field::from_real_fn(src, |x| (-(x[0] - 0.3).powi(2)).exp());
        let dst = make_grid(1, 14.0, 128).unwrap();
        let r = resample(&f, &dst).unwrap();
        let expect = Field::from_real_fn(dst, |x| (-(x[0] - 0.3).powi(2)).exp());
        assert!(r.max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn resample_2d() {
        let src = make_grid(2, 8.0, 64).unwrap();
        let f = Field::from_real_fn(src, |x| (-(x[0] * x[0] + 0.5 * x[1] * x[1])).exp());
        let dst = make_grid(2, 6.0, 32).unwrap();
        let r = resample(&f, &dst).unwrap();
        let expect = Field::from_real_fn(dst, |x| (-(x[0] * x[0] + 0.5 * x[1] * x[1])).exp());
        assert!(r.max_abs_diff(&expect).unwrap() < 1e-10);
    }

    #[test]
    fn dilation_matches_analytic() {
        let g = make_grid(1, 12.0, 256).unwrap();
        let f = Field::from_real_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        let d = dilate(&f, 0.6).unwrap();
        let expect = Field::from_real_fn(g, |x| (-0.36 * x[0] * x[0] / 2.0).exp());
        assert!(d.max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn lagrange_weights_partition_unity() {
        for t in [2.0, 2.3, 2.5, 2.99] {
            let w = lagrange_weights(t);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        let w = lagrange_weights(3.0);
        assert!((w[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_interpolators() {
        let g = make_grid(1, 8.0, 128).unwrap();
        let f = Field::from_real_fn(g, |x| (-(x[0] - 0.2).powi(2)).exp());
        let it = Interpolator1::new_real(&f, 8).unwrap();
        for x in [-1.234, 0.0, 0.777, 2.5] {
            assert!((it.eval(x) - (-(x - 0.2f64).powi(2)).exp()).abs() < 1e-9);
        }
        assert_eq!(it.eval(9.0), 0.0);

        let g2 = make_grid(2, 8.0, 64).unwrap();
        let f2 = Field::from_real_fn(g2, |x| (-(x[0] * x[0] + (x[1] - 0.5).powi(2))).exp());
        let it2 = Interpolator2::new_real(&f2, 4).unwrap();
        for (x, y) in [(0.1, -0.3), (1.11, 0.77)] {
            let exact = (-(x * x + (y - 0.5f64).powi(2))).exp();
            assert!((it2.eval(x, y) - exact).abs() < 1e-7);
        }
    }
}
