//! Space integrals `\int |e^{isDelta} f|^q dx` for all real `s`.
//!
//! A field with significant support in `|x| <= R` and significant spectrum
//! in `|xi| <= Xi` is moved onto a working grid of half extent `2R` and
//! Nyquist frequency `2Xi`. For `|s| <= s* = R / (2 Xi)` the evolution is a
//! plain Fourier multiplier; the solution spreads by at most `2 |s| Xi <= R`.
//! For `|s| > s*` the kernel is factored as
//!
//! `e^{isDelta} f(x) = (4 pi i s)^(-d/2) e^{i|x|^2/4s} (2 pi)^(d/2) g^(x / 2s)`
//!
//! with `g = e^{i|y|^2/4s} f`, whose spectrum lies in `|xi| <= Xi + R/(2|s|)
//! <= 2 Xi`. Then `\int |u|^q dx = (2|s|)^(d - dq/2) \int |g^|^q dxi`, and both
//! branches are alias-free on the same grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::interp::resample;
use crate::fields::{abs_pow, Field, GridSpec};
use crate::numeric::pairwise_sum;

/// Relative amplitude defining the significant support of the data.
pub const GRID_TAIL: f64 = 1e-8;
const GRID_SLACK: f64 = 1.1;

/// Largest working grid, points per axis, by dimension.
fn max_points(dim: usize) -> usize {
    match dim {
        1 => 1 << 15,
        2 => 1 << 10,
        _ => 1 << 7,
    }
}

/// A field prepared for evaluating `\int |e^{isDelta} f|^q dx` at any `s`.
#[derive(Debug, Clone)]
pub struct Propagator {
    field: Field,
    spectrum: Field,
    radius: f64,
    band: f64,
    real: bool,
}

impl Propagator {
    /// Resamples `f` onto its balanced working grid.
    pub fn new(f: &Field) -> Result<Self> {
        if !f.is_finite() {
            return Err(Error::NonFinite);
        }
        let grid = f.grid();
        if f.peak() == 0.0 {
            return Ok(Self {
                field: f.clone(),
                spectrum: Field::zeros(grid.dual()),
                radius: grid.half_extent(),
                band: grid.nyquist(),
                real: true,
            });
        }
        let radius = significant_radius(f)?;
        let band = significant_radius(&f.fourier()?)?;
        if radius >= grid.half_extent() {
            return Err(Error::Resolution(format!(
                "data reach the box edge (radius {radius:.3} vs half extent {:.3})",
                grid.half_extent()
            )));
        }
        if band >= 0.95 * grid.nyquist() {
            return Err(Error::Resolution(format!(
                "spectrum reaches the Nyquist frequency (band {band:.3} vs {:.3})",
                grid.nyquist()
            )));
        }
        let working = balanced_grid(grid.dim(), radius, band)?;
        let field = resample(f, &working)?;
        Self::on_grid(field, radius, band)
    }

    /// Uses `field` as is; its grid must already have half extent near
    /// `2 * radius` or more and Nyquist frequency near `2 * band` or more.
    pub(crate) fn on_grid(field: Field, radius: f64, band: f64) -> Result<Self> {
        let g = field.grid();
        let short = 1.0 / GRID_SLACK.sqrt() - 1e-12;
        if g.half_extent() < 2.0 * radius * short || g.nyquist() < 2.0 * band * short {
            return Err(Error::Resolution("working grid is not balanced".into()));
        }
        let spectrum = field.fourier()?;
        let real = field.is_real(1e-14);
        Ok(Self {
            field,
            spectrum,
            radius,
            band,
            real,
        })
    }

    pub fn working_grid(&self) -> &GridSpec {
        self.field.grid()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    /// Time at which the direct and lens branches meet; also the natural
    /// time scale of the data.
    pub fn crossover(&self) -> f64 {
        self.radius / (2.0 * self.band)
    }

    /// Whether `|e^{-isDelta} f| = |e^{isDelta} f|`, true for real data.
    pub fn is_time_symmetric(&self) -> bool {
        self.real
    }

    /// `\int |e^{isDelta} f|^q dx`.
    pub fn lq_integral(&self, s: f64, q: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::BadExponent(q));
        }
        if !s.is_finite() {
            return Err(Error::Config(format!("time {s} is not finite")));
        }
        let d = self.field.dim();
        if s.abs() <= self.crossover() {
            let axis = self.spectrum.grid().axis();
            let chirp = chirp(&axis, -s);
            let u = Field::new(*self.spectrum.grid(), separable_product(self.spectrum.samples(), &chirp, d))?
                .inverse_fourier()?;
            Ok(power_sum(&u, q))
        } else {
            let axis = self.field.grid().axis();
            let chirp = chirp(&axis, 1.0 / (4.0 * s));
            let gh = Field::new(*self.field.grid(), separable_product(self.field.samples(), &chirp, d))?.fourier()?;
            let factor = (2.0 * s.abs()).powf(d as f64 * (1.0 - q / 2.0));
            Ok(factor * power_sum(&gh, q))
        }
    }
}

/// `exp(i c x_j^2)` along a uniform axis, by a two-term recurrence that is
/// re-anchored every few steps.
fn chirp(axis: &[f64], c: f64) -> Vec<Complex64> {
    const ANCHOR: usize = 32;
    let n = axis.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let h = if n > 1 { axis[1] - axis[0] } else { 0.0 };
    let step2 = Complex64::from_polar(1.0, 2.0 * c * h * h);
    let mut value = Complex64::new(1.0, 0.0);
    let mut ratio = Complex64::new(1.0, 0.0);
    for (j, &x) in axis.iter().enumerate() {
        if j % ANCHOR == 0 {
            value = Complex64::from_polar(1.0, c * x * x);
            ratio = Complex64::from_polar(1.0, c * (2.0 * x * h + h * h));
        } else {
            value *= ratio;
            ratio *= step2;
        }
        out.push(value);
    }
    out
}

/// `data[j] * prod_k chirp[j_k]` over a row-major cube.
fn separable_product(data: &[Complex64], chirp: &[Complex64], dim: usize) -> Vec<Complex64> {
    let n = chirp.len();
    match dim {
        1 => data.iter().zip(chirp).map(|(a, b)| a * b).collect(),
        _ => {
            let mut out = Vec::with_capacity(data.len());
            let mut idx = vec![0usize; dim];
            for &z in data {
                let w = idx.iter().fold(Complex64::new(1.0, 0.0), |acc, &i| acc * chirp[i]);
                out.push(z * w);
                for slot in idx.iter_mut().rev() {
                    *slot += 1;
                    if *slot < n {
                        break;
                    }
                    *slot = 0;
                }
            }
            out
        }
    }
}

/// Level above which a flat outer floor counts as unresolved data rather
/// than rounding noise.
const NOISE_CEILING: f64 = 1e-4;

/// Support radius at relative level [`GRID_TAIL`], raised above the
/// rounding-noise floor when there is one. Derived data such as square
/// roots of evolved densities carry a floor of amplified rounding error;
/// the floor is the largest modulus over the outer shell `|x|_inf >= 3L/4`.
pub(crate) fn significant_radius(f: &Field) -> Result<f64> {
    Ok(f.support_radius(significant_level(f)?))
}

/// The relative level used by [`significant_radius`].
pub(crate) fn significant_level(f: &Field) -> Result<f64> {
    let grid = f.grid();
    let peak = f.peak();
    if peak == 0.0 {
        return Ok(GRID_TAIL);
    }
    let d = grid.dim();
    let edge = 0.75 * grid.half_extent();
    let mut x = vec![0.0; d];
    let mut shell = Vec::new();
    for (k, z) in f.samples().iter().enumerate() {
        grid.point(k, &mut x);
        if x.iter().any(|v| v.abs() >= edge) {
            shell.push(z.norm());
        }
    }
    let floor = shell.iter().fold(0.0f64, |m, v| m.max(*v)) / peak;
    if floor > NOISE_CEILING {
        return Err(Error::Resolution(format!(
            "no decay towards the box edge (outer level {floor:.2e} of peak)"
        )));
    }
    Ok(GRID_TAIL.max(10.0 * floor))
}

fn power_sum(f: &Field, q: f64) -> f64 {
    pairwise_sum(f.samples().iter().map(|z| abs_pow(*z, q))) * f.grid().cell_volume()
}

/// Smallest power-of-two grid with half extent `>= 2 radius` and Nyquist
/// `>= 2 band`; leftover slack is shared evenly between space and frequency.
pub(crate) fn balanced_grid(dim: usize, radius: f64, band: f64) -> Result<GridSpec> {
    let l = 2.0 * radius;
    let k = 2.0 * band;
    let exact = 2.0 * l * k / std::f64::consts::PI;
    // A few percent short of the bounds only moves the effective tail
    // level slightly, and saves doubling the grid.
    let points = ((exact / GRID_SLACK).ceil() as usize).next_power_of_two().max(16);
    if points > max_points(dim) {
        return Err(Error::Resolution(format!(
            "working grid needs {points} points per axis in dimension {dim}"
        )));
    }
    let stretch = (points as f64 / exact).sqrt();
    GridSpec::new(dim, l * stretch, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    #[test]
    fn chirp_matches_direct_phases() {
        let axis: Vec<f64> = (0..300).map(|j| -7.0 + j as f64 * 0.05).collect();
        let c = chirp(&axis, 3.7);
        for (x, z) in axis.iter().zip(&c) {
            assert!((z - Complex64::from_polar(1.0, 3.7 * x * x)).norm() < 1e-12);
        }
    }

    #[test]
    fn balanced_grid_meets_both_bounds() {
        let g = balanced_grid(1, 5.0, 10.0).unwrap();
        assert!(g.half_extent() >= 10.0 / GRID_SLACK.sqrt());
        assert!(g.nyquist() >= 20.0 / GRID_SLACK.sqrt());
        assert!(balanced_grid(2, 50.0, 100.0).is_err());
    }

    #[test]
    fn gaussian_space_integrals_for_all_times() {
        // |e^{isDelta} e^{-x^2}|^6 integrates to sqrt(pi/6) (1 + 16 s^2)^-1.
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_real_fn(g, |x| (-x[0] * x[0]).exp());
        let p = Propagator::new(&f).unwrap();
        assert!(p.is_time_symmetric());
        assert!((p.crossover() - 0.25).abs() < 0.01);
        for s in [0.0, 0.1, 0.25, 0.3, 2.0, -7.5, 300.0] {
            let exact = (std::f64::consts::PI / 6.0).sqrt() / (1.0 + 16.0 * s * s);
            let got = p.lq_integral(s, 6.0).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-11, "s={s}: {got} vs {exact}");
        }
    }

    #[test]
    fn two_dimensional_quartic_integrals() {
        // |e^{isDelta} e^{-|x|^2}|^4 integrates to (pi/4) (1 + 16 s^2)^-1.
        let g = make_grid(2, 8.0, 64).unwrap();
        let f = Field::from_real_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let p = Propagator::new(&f).unwrap();
        for s in [0.05, 0.6, 40.0] {
            let exact = std::f64::consts::PI / 4.0 / (1.0 + 16.0 * s * s);
            let got = p.lq_integral(s, 4.0).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-10, "s={s}");
        }
    }

    #[test]
    fn noise_floor_is_ignored() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let noisy = Field::from_real_fn(g, |x| (-x[0] * x[0]).exp() + 1e-9 * (37.0 * x[0]).sin().abs());
        let p = Propagator::new(&noisy).unwrap();
        assert!(p.radius() < 5.0, "{}", p.radius());
        let flat = Field::from_real_fn(g, |x| (-x[0] * x[0]).exp() + 1e-3);
        assert!(Propagator::new(&flat).is_err());
    }

    #[test]
    fn rejects_unresolved_data() {
        let g = make_grid(1, 4.0, 64).unwrap();
        let wide = Field::from_real_fn(g, |x| (-x[0] * x[0] / 4.0).exp());
        assert!(matches!(Propagator::new(&wide), Err(Error::Resolution(_))));
    }
}
