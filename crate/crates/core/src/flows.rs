//! Heat, Schrödinger and Mehler semigroups on sampled fields, exact Gaussian
//! evolutions, and the sliding-Gaussian rescaling.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::interp::{apply_separable, dilate};
use crate::fields::{Field, GridSpec, EPS_NEG};

/// Relative amplitude below which a field or its spectrum counts as zero for
/// support and aliasing estimates.
pub const TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Heat,
    Schrodinger,
    Mehler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Spectral,
    Kernel,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub kind: FlowKind,
    pub time: f64,
    pub route: Route,
}

impl FlowParams {
    pub fn new(kind: FlowKind, time: f64, route: Route) -> Result<Self> {
        if !time.is_finite() {
            return Err(Error::Config(format!("flow time {time} is not finite")));
        }
        if kind != FlowKind::Schrodinger && time < 0.0 {
            return Err(Error::NegativeTime(time));
        }
        Ok(Self { kind, time, route })
    }

    pub fn heat(t: f64) -> Result<Self> {
        Self::new(FlowKind::Heat, t, Route::Spectral)
    }

    pub fn schrodinger(s: f64) -> Result<Self> {
        Self::new(FlowKind::Schrodinger, s, Route::Spectral)
    }

    pub fn mehler(t: f64) -> Result<Self> {
        Self::new(FlowKind::Mehler, t, Route::Spectral)
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }
}

/// `A exp(-a |x - c|^2)` with complex `A` and complex width `a`, `Re a > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub amplitude: Complex64,
    pub center: Vec<f64>,
    pub width: Complex64,
}

impl GaussianSpec {
    pub fn new(amplitude: Complex64, center: Vec<f64>, width: Complex64) -> Result<Self> {
        if !(width.re > 0.0 && width.is_finite()) {
            return Err(Error::BadWidth(width.re));
        }
        if center.is_empty() || center.len() > crate::fields::MAX_DIM {
            return Err(Error::BadDimension {
                got: center.len(),
                max: crate::fields::MAX_DIM,
            });
        }
        Ok(Self {
            amplitude,
            center,
            width,
        })
    }

    /// Centered real Gaussian `exp(-a|x|^2)` scaled to unit L2 norm.
    pub fn normalized(dim: usize, a: f64) -> Result<Self> {
        let amp = (2.0 * a / PI).powf(dim as f64 / 4.0);
        Self::new(Complex64::new(amp, 0.0), vec![0.0; dim], Complex64::new(a, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        self.amplitude * (-self.width * r2).exp()
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<Field> {
        if grid.dim() != self.dim() {
            return Err(Error::GridMismatch);
        }
        Ok(Field::from_fn(*grid, |x| self.eval(x)))
    }

    pub fn l2_norm(&self) -> f64 {
        let d = self.dim() as f64;
        self.amplitude.norm() * (PI / (2.0 * self.width.re)).powf(d / 4.0)
    }

    /// `\int |g|^q dx`.
    pub fn lq_integral(&self, q: f64) -> f64 {
        let d = self.dim() as f64;
        self.amplitude.norm().powf(q) * (PI / (q * self.width.re)).powf(d / 2.0)
    }
}

/// Exact evolution of a Gaussian. Heat maps `a` to `a / (1 + 4ta)` and
/// Schrödinger to `a / (1 + 4isa)`, with amplitude factor `(1 + 4ta)^(-d/2)`
/// resp. `(1 + 4isa)^(-d/2)`. The power is taken along the path from time 0
/// so that it never jumps across a branch cut.
pub fn gaussian_evolve_closed(g: &GaussianSpec, flow: &FlowParams) -> Result<GaussianSpec> {
    let unit = match flow.kind {
        FlowKind::Heat => Complex64::new(1.0, 0.0),
        FlowKind::Schrodinger => Complex64::new(0.0, 1.0),
        FlowKind::Mehler => return Err(Error::UnsupportedRoute("mehler")),
    };
    let time = flow.time;
    if flow.kind == FlowKind::Heat && time < 0.0 {
        return Err(Error::NegativeTime(time));
    }
    let factor = |tau: f64| Complex64::new(1.0, 0.0) + 4.0 * tau * unit * g.width;
    let end = factor(time);
    if end.norm() == 0.0 {
        return Err(Error::BranchCut);
    }
    let log_end = tracked_log(&factor, time)?;
    let half_d = g.dim() as f64 / 2.0;
    let width = g.width / end;
    if !(width.re > 0.0) {
        return Err(Error::BadWidth(width.re));
    }
    Ok(GaussianSpec {
        amplitude: g.amplitude * (-half_d * log_end).exp(),
        center: g.center.clone(),
        width,
    })
}

/// `log(path(end))` continued from `log(path(0)) = 0` along `[0, end]`.
fn tracked_log(path: &impl Fn(f64) -> Complex64, end: f64) -> Result<Complex64> {
    const STEPS: usize = 256;
    let mut arg = 0.0;
    let mut prev = path(0.0);
    for k in 1..=STEPS {
        let z = path(end * k as f64 / STEPS as f64);
        if z.norm() == 0.0 {
            return Err(Error::BranchCut);
        }
        let step = (z / prev).arg();
        if step.abs() > PI / 2.0 {
            // Too coarse to resolve the winding.
            return Err(Error::BranchCut);
        }
        arg += step;
        prev = z;
    }
    Ok(Complex64::new(prev.norm().ln(), arg))
}

/// Multiplies the spectrum by `m(|xi|^2)`.
fn fourier_multiply(f: &Field, m: impl Fn(f64) -> Complex64) -> Result<Field> {
    let spec = f.fourier()?;
    let spec = spec.map_with_coords(|xi, z| z * m(xi.iter().map(|v| v * v).sum()));
    spec.inverse_fourier()
}

/// `e^{t Delta} f` via the multiplier `exp(-t |xi|^2)` on the periodic box.
/// Nonnegative inputs stay flagged nonnegative after clamping rounding-level
/// negatives.
pub fn heat_evolve(f: &Field, t: f64) -> Result<Field> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let out = fourier_multiply(f, |k2| Complex64::new((-t * k2).exp(), 0.0))?;
    if f.is_nonnegative() {
        out.into_nonnegative(EPS_NEG)
    } else {
        Ok(out)
    }
}

/// Distance over which the heat kernel at time `t` stays above `tol`
/// relative to its peak.
pub fn heat_spread(t: f64, tol: f64) -> f64 {
    (4.0 * t * (1.0 / tol).ln()).sqrt()
}

/// Samples of `(4 pi t)^(-d/2) exp(-|x|^2 / 4t)`.
pub fn heat_kernel(t: f64, grid: &GridSpec) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let d = grid.dim() as f64;
    let c = (4.0 * PI * t).powf(-d / 2.0);
    Field::from_nonnegative_fn(*grid, |x| {
        c * (-x.iter().map(|v| v * v).sum::<f64>() / (4.0 * t)).exp()
    })
}

/// Separable Gaussian quadrature `out(x) = \int k(x - b v) f(v) dv` with
/// `k(y) = (2 pi var)^(-1/2) exp(-y^2 / 2 var)` per axis, from the nodes of
/// `f` to the nodes of `target`.
fn gaussian_transfer(f: &Field, target: &GridSpec, var: f64, b: f64, a: f64) -> Result<Field> {
    if target.dim() != f.dim() {
        return Err(Error::GridMismatch);
    }
    let src = f.grid();
    let h = src.spacing();
    let norm = h / (2.0 * PI * var).sqrt();
    let sources = src.axis();
    let mut matrix = Vec::with_capacity(target.points() * src.points());
    for x in target.axis() {
        for &v in &sources {
            let y = a * x - b * v;
            matrix.push(norm * (-y * y / (2.0 * var)).exp());
        }
    }
    let samples = apply_separable(f.samples(), src.points(), f.dim(), &matrix, target.points());
    let out = Field::new(*target, samples)?;
    Ok(if f.is_nonnegative() {
        out.into_nonnegative(EPS_NEG)?
    } else {
        out
    })
}

/// Trapezoid error of a Gaussian of variance `var` sampled at spacing `h`
/// is about `exp(-2 pi^2 var / h^2)`; demand it below 1e-15.
fn check_kernel_resolution(var: f64, h: f64) -> Result<()> {
    let exponent = 2.0 * PI * PI * var / (h * h);
    if exponent < 35.0 {
        return Err(Error::Resolution(format!(
            "gaussian kernel of variance {var:.3e} under-resolved at spacing {h:.3e}"
        )));
    }
    Ok(())
}

/// `H_t * f` by direct quadrature, evaluated on the nodes of `target`. No
/// periodization, so the target may be larger than the source box.
pub fn heat_evolve_kernel(f: &Field, t: f64, target: &GridSpec) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    check_kernel_resolution(2.0 * t, f.grid().spacing())?;
    gaussian_transfer(f, target, 2.0 * t, 1.0, 1.0)
}

/// Relative level below which densities are treated as zero when sizing
/// grids for open (non-periodic) evolutions.
pub const DENSITY_TAIL: f64 = 1e-24;

/// `e^{t Delta} f` on the whole space. Uses the periodic multiplier when the
/// evolved density stays inside the box, and otherwise direct quadrature
/// onto an enlarged grid whose spacing coarsens with `sqrt(t)`.
pub fn heat_evolve_open(f: &Field, t: f64) -> Result<Field> {
    let mut out = heat_evolve_open_all(std::slice::from_ref(f), t)?;
    Ok(out.remove(0))
}

/// [`heat_evolve_open`] for several fields on one grid, all sized by the
/// widest of them.
pub fn heat_evolve_open_all(fields: &[Field], t: f64) -> Result<Vec<Field>> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid();
    if fields.iter().any(|f| !f.grid().approx_eq(grid)) {
        return Err(Error::GridMismatch);
    }
    let radius = fields.iter().fold(0.0f64, |r, f| r.max(f.support_radius(DENSITY_TAIL)));
    let needed = radius + heat_spread(t, DENSITY_TAIL);
    if needed <= grid.half_extent() {
        return fields.iter().map(|f| heat_evolve(f, t)).collect();
    }
    if check_kernel_resolution(2.0 * t, grid.spacing()).is_err() {
        // Kernel narrower than the mesh: the periodic multiplier on a
        // zero-padded box is exact instead.
        let points = ((2.0 * needed / grid.spacing()).ceil() as usize).next_power_of_two();
        if points > 1 << 16 {
            return Err(Error::Resolution(format!("open heat grid needs {points} points per axis")));
        }
        return fields.iter().map(|f| heat_evolve(&zero_pad(f, points)?, t)).collect();
    }
    let mut h = grid.spacing();
    while 2.0 * h <= 0.3 * t.sqrt() {
        h *= 2.0;
    }
    let points = ((2.0 * needed / h).ceil() as usize).next_power_of_two().max(8);
    if points > 1 << 16 {
        return Err(Error::Resolution(format!("open heat grid needs {points} points per axis")));
    }
    let target = GridSpec::new(grid.dim(), 0.5 * h * points as f64, points)?;
    fields.iter().map(|f| heat_evolve_kernel(f, t, &target)).collect()
}

/// `f` extended by zeros to a centred box of `points` nodes per axis with
/// the same spacing.
pub fn zero_pad(f: &Field, points: usize) -> Result<Field> {
    let grid = f.grid();
    let n = grid.points();
    if points < n {
        return Err(Error::Config(format!("cannot pad {n} points down to {points}")));
    }
    let target = GridSpec::new(grid.dim(), 0.5 * grid.spacing() * points as f64, points)?;
    let offset = (points - n) / 2;
    let mut samples = vec![Complex64::new(0.0, 0.0); target.len()];
    let mut idx = [0usize; crate::fields::MAX_DIM];
    for (k, z) in f.samples().iter().enumerate() {
        grid.unravel(k, &mut idx[..grid.dim()]);
        let flat = idx[..grid.dim()].iter().fold(0, |acc, &j| acc * points + j + offset);
        samples[flat] = *z;
    }
    let out = Field::new(target, samples)?;
    Ok(if f.is_nonnegative() {
        out.into_nonnegative(0.0)?
    } else {
        out
    })
}

/// Mehler evolution on the input grid, by the spectral route when the
/// periodic heat step cannot wrap around and by direct quadrature otherwise.
pub fn mehler_evolve_open(f: &Field, t: f64) -> Result<Field> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    let tau = -0.5 * (-2.0 * t).exp_m1();
    let needed = f.support_radius(DENSITY_TAIL) + heat_spread(tau, DENSITY_TAIL);
    if t == 0.0 || needed <= f.grid().half_extent() {
        mehler_evolve(f, t)
    } else {
        mehler_evolve_kernel(f, t)
    }
}

/// `e^{isDelta} f` via the multiplier `exp(-is|xi|^2)`. Fails when the
/// spreading of the data's significant frequencies would wrap around the
/// periodic box.
pub fn schrodinger_evolve(f: &Field, s: f64) -> Result<Field> {
    if !s.is_finite() {
        return Err(Error::Config(format!("time {s} is not finite")));
    }
    if s == 0.0 {
        return Ok(f.clone());
    }
    let spec = f.fourier()?;
    let radius = f.support_radius(TAIL);
    let band = spec.support_radius(TAIL);
    let spread = 2.0 * s.abs() * band;
    let half_extent = f.grid().half_extent();
    if radius + spread > half_extent {
        return Err(Error::Aliasing {
            s,
            radius,
            spread,
            half_extent,
        });
    }
    spec.map_with_coords(|xi, z| {
        let k2: f64 = xi.iter().map(|v| v * v).sum();
        z * Complex64::from_polar(1.0, -s * k2)
    })
    .inverse_fourier()
}

/// `e^{tL} f(x) = (e^{tau Delta} f)(e^{-t} x)` with `tau = (1 - e^{-2t}) / 2`:
/// heat evolution followed by band-limited dilation.
pub fn mehler_evolve(f: &Field, t: f64) -> Result<Field> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let tau = -0.5 * (-2.0 * t).exp_m1();
    let heated = heat_evolve(f, tau)?;
    let out = dilate(&heated, (-t).exp())?;
    if f.is_nonnegative() {
        out.into_nonnegative(EPS_NEG)
    } else {
        Ok(out)
    }
}

/// Mehler evolution by direct quadrature against the Gaussian density of
/// variance `1 - e^{-2t}`.
pub fn mehler_evolve_kernel(f: &Field, t: f64) -> Result<Field> {
    mehler_evolve_onto(f, t, f.grid())
}

/// [`mehler_evolve_kernel`] evaluated on the nodes of `target`.
pub fn mehler_evolve_onto(f: &Field, t: f64, target: &GridSpec) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let var = -(-2.0 * t).exp_m1();
    check_kernel_resolution(var, f.grid().spacing())?;
    gaussian_transfer(f, target, var, 1.0, (-t).exp())
}

/// `u~(t, x) = (4 pi)^(-d/2) \int exp(-|x - t v|^2 / 4) |f(v)|^2 dv` on the
/// nodes of `target`.
pub fn sliding_gaussian(f: &Field, t: f64, target: &GridSpec) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    // In v the integrand has variance 2 / t^2.
    check_kernel_resolution(2.0 / (t * t), f.grid().spacing())?;
    let density = f.abs_sq();
    gaussian_transfer(&density, target, 2.0, t, 1.0)
}

/// Dispatches a sampled field through `flow`. The kernel routes keep the
/// input grid.
pub fn evolve(f: &Field, flow: &FlowParams) -> Result<Field> {
    match (flow.kind, flow.route) {
        (_, Route::ClosedForm) => Err(Error::ClosedFormNeedsGaussian),
        (FlowKind::Heat, Route::Spectral) => heat_evolve(f, flow.time),
        (FlowKind::Heat, Route::Kernel) => heat_evolve_kernel(f, flow.time, f.grid()),
        (FlowKind::Schrodinger, Route::Spectral) => schrodinger_evolve(f, flow.time),
        (FlowKind::Schrodinger, Route::Kernel) => Err(Error::UnsupportedRoute("schrodinger")),
        (FlowKind::Mehler, Route::Spectral) => mehler_evolve(f, flow.time),
        (FlowKind::Mehler, Route::Kernel) => mehler_evolve_kernel(f, flow.time),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    fn gauss(a: f64) -> impl Fn(&[f64]) -> f64 {
        move |x| (-a * x.iter().map(|v| v * v).sum::<f64>()).exp()
    }

    fn bump(x: &[f64]) -> f64 {
        (-(x[0] - 1.0).powi(2)).exp() + 0.5 * (-2.0 * (x[0] + 1.5).powi(2)).exp()
    }

    #[test]
    fn heat_of_gaussian() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_nonnegative_fn(g, gauss(1.0)).unwrap();
        for t in [0.1, 0.5, 2.0] {
            let u = heat_evolve(&f, t).unwrap();
            assert!(u.is_nonnegative());
            let c = 1.0 + 4.0 * t;
            let expect = Field::from_real_fn(g, |x| c.powf(-0.5) * (-x[0] * x[0] / c).exp());
            assert!(u.max_abs_diff(&expect).unwrap() < 1e-12);
        }
        assert_eq!(heat_evolve(&f, 0.0).unwrap(), f);
        assert!(matches!(heat_evolve(&f, -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn heat_conserves_mass_and_is_a_semigroup() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_nonnegative_fn(g, bump).unwrap();
        let m0 = f.integrate().unwrap().re;
        let u = heat_evolve(&f, 0.7).unwrap();
        assert!((u.integrate().unwrap().re - m0).abs() < 1e-12);
        let two_step = heat_evolve(&heat_evolve(&f, 0.3).unwrap(), 0.4).unwrap();
        assert!(two_step.max_abs_diff(&u).unwrap() < 1e-10);
    }

    #[test]
    fn heat_kernel_values() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let k = heat_kernel(1.0, &g).unwrap();
        assert!((k.integrate().unwrap().re - 1.0).abs() < 1e-12);
        assert!((k.samples()[128].re - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!(heat_kernel(0.0, &g).is_err());
        let h = heat_kernel(1.0, &g).unwrap().pointwise_power(0.5).unwrap();
        let expect = Field::from_real_fn(g, |x| (4.0 * PI).powf(-0.25) * (-x[0] * x[0] / 8.0).exp());
        assert!(h.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn kernel_route_matches_multiplier() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_nonnegative_fn(g, bump).unwrap();
        for t in [0.05, 0.5, 1.5] {
            let a = heat_evolve(&f, t).unwrap();
            let b = heat_evolve_kernel(&f, t, &g).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-8);
        }
        assert!(matches!(heat_evolve_kernel(&f, 1e-4, &g), Err(Error::Resolution(_))));
    }

    #[test]
    fn schrodinger_of_gaussian() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_real_fn(g, gauss(1.0));
        let n0 = f.lq_norm(2.0).unwrap();
        for s in [0.05, -0.2, 0.4] {
            let u = schrodinger_evolve(&f, s).unwrap();
            let c = 1.0 + 16.0 * s * s;
            let expect = Field::from_real_fn(g, |x| c.powf(-0.25) * (-x[0] * x[0] / c).exp());
            assert!(u.abs().max_abs_diff(&expect).unwrap() < 1e-12);
            assert!((u.lq_norm(2.0).unwrap() - n0).abs() < 1e-12);
        }
        assert_eq!(schrodinger_evolve(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn schrodinger_flags_wraparound() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_real_fn(g, gauss(1.0));
        assert!(matches!(schrodinger_evolve(&f, 3.0), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn closed_form_gaussians() {
        let g = GaussianSpec::new(Complex64::new(1.0, 0.0), vec![0.0], Complex64::new(1.0, 0.0)).unwrap();
        let h = gaussian_evolve_closed(&g, &FlowParams::heat(0.25).unwrap()).unwrap();
        assert!((h.width - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((h.amplitude - Complex64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        let id = gaussian_evolve_closed(&g, &FlowParams::schrodinger(0.0).unwrap()).unwrap();
        assert_eq!(id, g);
        assert!(GaussianSpec::new(Complex64::new(1.0, 0.0), vec![0.0], Complex64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn closed_form_matches_spectral_schrodinger() {
        let grid = make_grid(1, 16.0, 256).unwrap();
        let g = GaussianSpec::new(Complex64::new(0.7, 0.2), vec![0.5], Complex64::new(1.3, 0.4)).unwrap();
        let f = g.sample(&grid).unwrap();
        for s in [-0.3, 0.1, 0.35] {
            let u = schrodinger_evolve(&f, s).unwrap();
            let exact = gaussian_evolve_closed(&g, &FlowParams::schrodinger(s).unwrap())
                .unwrap()
                .sample(&grid)
                .unwrap();
            assert!(u.max_abs_diff(&exact).unwrap() < 1e-10, "s={s}");
        }
    }

    #[test]
    fn closed_form_tracks_branch_in_two_dimensions() {
        // d = 2 takes a full power of (1 + 4isa); its argument passes pi/2
        // for large s and the tracked power must stay continuous.
        let g = GaussianSpec::new(Complex64::new(1.0, 0.0), vec![0.0, 0.0], Complex64::new(1.0, 2.0)).unwrap();
        let a = gaussian_evolve_closed(&g, &FlowParams::schrodinger(5.0).unwrap()).unwrap();
        let direct = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) + Complex64::new(0.0, 20.0) * g.width);
        assert!((a.amplitude - direct).norm() < 1e-12);
    }

    #[test]
    fn mehler_fixes_constants_and_matches_kernel_route() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let one = Field::from_real_fn(g, |_| 1.0);
        // Heat on the periodic box leaves constants alone; the dilation keeps
        // interior points inside the box.
        let u = mehler_evolve(&one, 0.8).unwrap();
        let interior: f64 = u.samples()[64..192].iter().map(|z| (z.re - 1.0).abs()).fold(0.0, f64::max);
        assert!(interior < 1e-12);

        let f = Field::from_nonnegative_fn(g, bump).unwrap();
        for t in [0.1, 0.7, 2.0] {
            let a = mehler_evolve(&f, t).unwrap();
            let b = mehler_evolve_kernel(&f, t).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn mehler_tends_to_gaussian_average() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_nonnegative_fn(g, bump).unwrap();
        let avg = f
            .map_with_coords(|x, z| z * (-x[0] * x[0] / 2.0).exp() / (2.0 * PI).sqrt())
            .integrate()
            .unwrap()
            .re;
        let u = mehler_evolve(&f, 25.0).unwrap();
        for k in [100, 128, 150] {
            assert!((u.samples()[k].re - avg).abs() < 1e-8);
        }
    }

    #[test]
    fn sliding_gaussian_identities() {
        let g = make_grid(1, 16.0, 512).unwrap();
        let f = Field::from_real_fn(g, bump);
        let m2 = f.lq_norm(2.0).unwrap().powi(2);
        let t = 2.0;
        let target = make_grid(1, 32.0, 512).unwrap();
        let u = sliding_gaussian(&f, t, &target).unwrap();
        assert!((u.integrate().unwrap().re - m2).abs() < 1e-10);
        // Compare with t^-d u(t^-2, x/t), u = H * |f|^2.
        let dens = f.abs_sq();
        let tau = 1.0 / (t * t);
        for &x in &[-3.0, 0.0, 1.75, 4.25] {
            let direct: f64 = dens
                .samples()
                .iter()
                .enumerate()
                .map(|(j, z)| {
                    let y = x / t - g.coord(j);
                    z.re * (-y * y / (4.0 * tau)).exp()
                })
                .sum::<f64>()
                * g.spacing()
                / (4.0 * PI * tau).sqrt()
                / t;
            let k = ((x + 32.0) / target.spacing()).round() as usize;
            assert!((target.coord(k) - x).abs() < 1e-12);
            assert!((u.samples()[k].re - direct).abs() <= 1e-8 * direct.abs().max(1e-300));
        }
    }

    #[test]
    fn open_heat_evolution_avoids_wraparound() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_nonnegative_fn(g, gauss(1.0)).unwrap();
        for t in [0.01, 0.5, 10.0] {
            let u = heat_evolve_open(&f, t).unwrap();
            let c = 1.0 + 4.0 * t;
            let expect = Field::from_real_fn(*u.grid(), |x| c.powf(-0.5) * (-x[0] * x[0] / c).exp());
            assert!(u.max_abs_diff(&expect).unwrap() < 1e-13, "t={t}");
            assert!(u.grid().half_extent() >= 16.0);
            let mass = u.integrate().unwrap().re;
            assert!((mass - PI.sqrt()).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn short_time_on_a_tight_box_pads_with_zeros() {
        // The density reaches the box edge, and at t = 0.01 the kernel is
        // narrower than the mesh, so neither the plain multiplier nor the
        // kernel quadrature applies.
        let g = make_grid(2, 4.0, 64).unwrap();
        let f = Field::from_nonnegative_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        let t = 0.01;
        let u = heat_evolve_open(&f, t).unwrap();
        assert!(u.grid().half_extent() > 4.0);
        assert_eq!(u.grid().spacing(), g.spacing());
        let c = 1.0 + 4.0 * t;
        let expect = Field::from_real_fn(*u.grid(), |x| (-(x[0] * x[0] + x[1] * x[1]) / c).exp() / c);
        // Truncation at the old box edge is at the e^-16 level.
        assert!(u.max_abs_diff(&expect).unwrap() < 1e-6);
        let inner = u.map_with_coords(|x, z| if x[0].abs().max(x[1].abs()) < 2.0 { z } else { 0.0.into() });
        let inner_expect = expect.map_with_coords(|x, z| if x[0].abs().max(x[1].abs()) < 2.0 { z } else { 0.0.into() });
        assert!(inner.max_abs_diff(&inner_expect).unwrap() < 1e-12);
    }

    #[test]
    fn zero_padding_keeps_nodes_aligned() {
        let g = make_grid(2, 2.0, 16).unwrap();
        let f = Field::from_real_fn(g, |x| x[0] + 10.0 * x[1]);
        let p = zero_pad(&f, 64).unwrap();
        assert_eq!(p.grid().spacing(), g.spacing());
        let mut x = [0.0; 2];
        for (k, z) in p.samples().iter().enumerate() {
            p.grid().point(k, &mut x);
            let inside = x.iter().all(|v| *v >= -2.0 && *v < 2.0 - 1e-12);
            let expect = if inside { x[0] + 10.0 * x[1] } else { 0.0 };
            assert!((z.re - expect).abs() < 1e-12);
        }
        assert!(zero_pad(&f, 8).is_err());
    }

    #[test]
    fn evolve_dispatch() {
        let g = make_grid(1, 16.0, 256).unwrap();
        let f = Field::from_real_fn(g, gauss(1.0));
        let p = FlowParams::heat(0.5).unwrap();
        assert_eq!(evolve(&f, &p).unwrap(), heat_evolve(&f, 0.5).unwrap());
        assert!(matches!(
            evolve(&f, &p.with_route(Route::ClosedForm)),
            Err(Error::ClosedFormNeedsGaussian)
        ));
        assert!(FlowParams::mehler(-1.0).is_err());
        assert!(FlowParams::schrodinger(-1.0).is_ok());
    }
}
