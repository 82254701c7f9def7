//! The modified norms `|||f|||_p`, `p > p(d)`.
//!
//! With `z = sqrt(zeta) c` the inner integral becomes `(2 pi)^(d/2)
//! e^{isDelta} g` for `g^(xi) = e^{-zeta |xi - c|^2} f^(xi)`, so
//!
//! `|||f|||_p^p = K (2 pi)^(pd/2) \int dzeta zeta^(nu-1)/Gamma(nu) zeta^(d/2)
//!   \int dc Phi(c, zeta)`,  `Phi = \int\int |e^{isDelta} g|^p dx ds`.
//!
//! Each `Phi` is a space-time Lebesgue integral evaluated with the
//! [`Propagator`] on a grid fitted to `g`, after shifting the spectrum of `g`
//! to the origin (a Galilean boost, which leaves `Phi` unchanged).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{balanced_grid, significant_level, significant_radius, Propagator, GRID_TAIL};
use super::{algebraic_tail, integrate_s, p_of_d, SRule};
use crate::error::{Error, Result};
use crate::fields::interp::Interpolator1;
use crate::fields::{Field, EPS_NEG};
use crate::flows::{heat_evolve_open, GaussianSpec};
use crate::numeric::{gamma, gauss_legendre_on, pairwise_sum};

/// Exponent and quadrature sizes for `|||.|||_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedNormSpec {
    pub d: usize,
    pub p: f64,
    /// Gauss-Legendre nodes in `w = zeta^nu` below the split point.
    #[serde(default = "default_zeta_inner")]
    pub zeta_inner_nodes: usize,
    /// Gauss-Legendre nodes for the algebraic tail above the split point.
    #[serde(default = "default_zeta_outer")]
    pub zeta_outer_nodes: usize,
    /// Core nodes of the split s-rule; each tail gets twice as many.
    #[serde(default = "default_s_core")]
    pub s_nodes: usize,
    /// Relative change at which trapezoid halving in `c` stops.
    #[serde(default = "default_c_tolerance")]
    pub c_tolerance: f64,
}

fn default_zeta_inner() -> usize {
    24
}
fn default_zeta_outer() -> usize {
    12
}
fn default_s_core() -> usize {
    12
}
fn default_c_tolerance() -> f64 {
    1e-6
}

impl ModifiedNormSpec {
    pub fn new(d: usize, p: f64) -> Result<Self> {
        let spec = Self {
            d,
            p,
            zeta_inner_nodes: default_zeta_inner(),
            zeta_outer_nodes: default_zeta_outer(),
            s_nodes: default_s_core(),
            c_tolerance: default_c_tolerance(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 3 {
            return Err(Error::BadDimension { got: self.d, max: 3 });
        }
        if !self.p.is_finite() {
            return Err(Error::BadExponent(self.p));
        }
        let nu = self.nu();
        if !(nu > 0.0) {
            return Err(Error::NonPositiveNu(nu));
        }
        if self.zeta_inner_nodes == 0 || self.zeta_outer_nodes == 0 || self.s_nodes == 0 {
            return Err(Error::Config("quadrature node counts must be positive".into()));
        }
        if !(self.c_tolerance > 0.0) {
            return Err(Error::Config("c_tolerance must be positive".into()));
        }
        Ok(())
    }

    /// `nu = d (p - p(d)) / 4`.
    pub fn nu(&self) -> f64 {
        self.d as f64 * (self.p - p_of_d(self.d)) / 4.0
    }

    /// `(p(d)/pi)^(d/2) / (2 pi)^(d+2)`.
    fn prefactor(&self) -> f64 {
        let d = self.d as f64;
        (p_of_d(self.d) / PI).powf(d / 2.0) / (2.0 * PI).powf(d + 2.0)
    }

    /// Decay exponent in `s` of `\int |e^{isDelta} g|^p dx`.
    fn s_decay(&self) -> f64 {
        self.d as f64 * (self.p / 2.0 - 1.0)
    }

    /// Nodes and weights for `\int_0^inf F(zeta) zeta^(nu-1)/Gamma(nu)
    /// dzeta`, split at `zeta0`: `w = zeta^nu` below, an algebraic tail map
    /// above.
    fn zeta_rule(&self, zeta0: f64) -> Result<Vec<(f64, f64)>> {
        let nu = self.nu();
        let top = zeta0.powf(nu);
        let inv = 1.0 / gamma(nu + 1.0);
        let mut out: Vec<(f64, f64)> = gauss_legendre_on(self.zeta_inner_nodes, 0.0, top)
            .into_iter()
            .map(|(w, wt)| (w.powf(1.0 / nu), wt * inv))
            .collect();
        let decay = 1.0 + self.d as f64 * (self.p - 2.0) / 4.0;
        let g = 1.0 / gamma(nu);
        out.extend(
            algebraic_tail(zeta0, decay, self.zeta_outer_nodes)?
                .into_iter()
                .map(|(z, wt)| (z, wt * z.powf(nu - 1.0) * g)),
        );
        Ok(out)
    }
}

/// `C_{d,m}^{2m} = pi^nu / (2^(nu+1) m^d Gamma(nu+1)) (p(d)/2)^(d/2)`, the
/// sharp constant of `|||f|||_{2m} <= C \|f\|_2`, returned as `C`.
pub fn sharp_modified_constant(d: usize, m: usize) -> Result<f64> {
    let spec = ModifiedNormSpec::new(d, 2.0 * m as f64)?;
    let nu = spec.nu();
    let df = d as f64;
    let power = PI.powf(nu) / (2f64.powf(nu + 1.0) * (m as f64).powf(df) * gamma(nu + 1.0))
        * (p_of_d(d) / 2.0).powf(df / 2.0);
    Ok(power.powf(1.0 / (2.0 * m as f64)))
}

/// `|||g|||_p` for `g = A e^{-a|x - x0|^2}` with real `a`. The `(z, x)`
/// integrals are exact; `s` and `zeta` use the same rules as
/// [`modified_norm`].
pub fn modified_norm_gaussian(g: &GaussianSpec, mspec: &ModifiedNormSpec) -> Result<f64> {
    mspec.validate()?;
    if g.dim() != mspec.d {
        return Err(Error::GridMismatch);
    }
    if g.width.im != 0.0 {
        return Err(Error::ClosedFormNeedsGaussian);
    }
    let (d, p, a) = (mspec.d as f64, mspec.p, g.width.re);
    let b = 1.0 / (4.0 * a);
    let base = g.amplitude.norm().powf(p) * (2.0 * a).powf(-d * p / 2.0);
    let zx_integral = |zeta: f64, s: f64| {
        let modulus = Complex64::new(zeta + b, s).norm();
        base * (PI / modulus).powf(d * p / 2.0) * (4.0 * PI * a.sqrt() * modulus / p).powf(d)
    };
    let nodes = mspec.zeta_rule(b)?;
    let terms = nodes
        .par_iter()
        .map(|&(zeta, w)| {
            let rule = SRule::split(zeta + b, mspec.s_decay(), mspec.s_nodes)?;
            Ok(w * integrate_s(&rule, true, |s| Ok(zx_integral(zeta, s)))?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((mspec.prefactor() * pairwise_sum(terms)).powf(1.0 / p))
}

/// Precomputed spectral data of a 1-D field.
struct Spectrum {
    samples: Vec<Complex64>,
    coords: Vec<f64>,
    weight: f64,
    modulus: Interpolator1<Complex64>,
    /// Range of frequencies where `|f^|` is not negligible.
    lo: f64,
    hi: f64,
    fine_step: f64,
    radius: f64,
    real: bool,
    /// Mean and variance of the density `|f^|^p`.
    center: f64,
    variance: f64,
}

impl Spectrum {
    fn new(f: &Field, p: f64) -> Result<Self> {
        let grid = f.grid();
        let fh = f.fourier()?;
        let radius = significant_radius(f)?;
        if radius >= grid.half_extent() {
            return Err(Error::Resolution("data reach the box edge".into()));
        }
        if significant_radius(&fh)? >= 0.95 * grid.nyquist() {
            return Err(Error::Resolution("spectrum reaches the Nyquist frequency".into()));
        }
        let peak = fh.peak();
        let floor = significant_level(&fh)? * peak;
        let dual = fh.grid();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (j, z) in fh.samples().iter().enumerate() {
            let xi = dual.coord(j);
            let r = z.norm();
            if r > floor {
                lo = lo.min(xi - dual.spacing());
                hi = hi.max(xi + dual.spacing());
            }
            let w = (r / peak).powf(p);
            m0 += w;
            m1 += w * xi;
            m2 += w * xi * xi;
        }
        let center = m1 / m0;
        Ok(Self {
            samples: f.samples().to_vec(),
            coords: grid.axis(),
            weight: grid.spacing() / (2.0 * PI).sqrt(),
            modulus: Interpolator1::new(&fh, 8)?,
            lo,
            hi,
            fine_step: dual.spacing() / 4.0,
            radius,
            real: f.is_real(1e-14),
            center,
            variance: (m2 / m0 - center * center).max(0.0),
        })
    }

    /// `f^(start + j step)`, `j < n`, as exact Riemann sums of the Fourier
    /// integral.
    fn evaluate(&self, start: f64, step: f64, n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (x, fx) in self.coords.iter().zip(&self.samples) {
            if *fx == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut w = fx * Complex64::from_polar(self.weight, -start * x);
            let r = Complex64::from_polar(1.0, -step * x);
            for o in out.iter_mut() {
                *o += w;
                w *= r;
            }
        }
        out
    }
}

/// `\int\int |e^{isDelta} g|^p dx ds` for `g^ = e^{-zeta |xi - c|^2} f^`.
fn phi(spec: &Spectrum, mspec: &ModifiedNormSpec, c: f64, zeta: f64) -> Result<f64> {
    let log_tail = (1.0 / GRID_TAIL).ln();
    let window = (log_tail / zeta).sqrt();
    let lo = spec.lo.max(c - window);
    let hi = spec.hi.min(c + window);
    if !(hi > lo) {
        return Ok(0.0);
    }
    // Locate the significant support of the product on a fine axis.
    let step = spec.fine_step.min(window / 50.0);
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let logs: Vec<f64> = (0..n)
        .map(|j| {
            let xi = lo + j as f64 * step;
            let r = spec.modulus.eval(xi).norm();
            if r > 0.0 {
                r.ln() - zeta * (xi - c) * (xi - c)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Ok(0.0);
    }
    let cut = top - log_tail;
    let first = logs.iter().position(|&l| l > cut).unwrap_or(0);
    let last = logs.iter().rposition(|&l| l > cut).unwrap_or(n - 1);
    let xi_lo = lo + first as f64 * step - step;
    let xi_hi = lo + last as f64 * step + step;
    let shift = 0.5 * (xi_lo + xi_hi);
    let band = 0.5 * (xi_hi - xi_lo);
    let radius = spec.radius + (4.0 * zeta * log_tail).sqrt();

    let working = balanced_grid(1, radius, band)?;
    let dual = working.dual();
    let start = dual.coord(0) + shift;
    let values = spec.evaluate(start, dual.spacing(), dual.points());
    let windowed: Vec<Complex64> = values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let xi = start + j as f64 * dual.spacing();
            v * (-zeta * (xi - c) * (xi - c)).exp()
        })
        .collect();
    let g = Field::new(dual, windowed)?.inverse_fourier()?;
    let prop = Propagator::on_grid(g, radius, band)?;
    let rule = SRule::split(prop.crossover(), mspec.s_decay(), mspec.s_nodes)?;
    integrate_s(&rule, prop.is_time_symmetric(), |s| prop.lq_integral(s, mspec.p))
}

/// Largest number of trapezoid halvings in `c`.
const MAX_HALVINGS: usize = 8;
/// Relative level below which `Phi` ends the march outwards in `c`.
const C_TAIL: f64 = 1e-14;

/// `\int Phi(c, zeta) dc` by a trapezoid rule, halved until converged.
fn c_integral(spec: &Spectrum, mspec: &ModifiedNormSpec, zeta: f64) -> Result<f64> {
    let p = mspec.p;
    let sigma = (1.0 / (2.0 * p * zeta) + spec.variance).sqrt();
    let center = if spec.real { 0.0 } else { spec.center };
    let eval = |k: f64, h: f64| phi(spec, mspec, center + k * h, zeta);

    // March outwards on the coarse lattice.
    let h = sigma;
    let mut values: Vec<(f64, f64)> = vec![(0.0, eval(0.0, h)?)];
    let mut peak = values[0].1;
    let directions: &[f64] = if spec.real { &[1.0] } else { &[1.0, -1.0] };
    for &dir in directions {
        let mut k = 1.0;
        let mut quiet = 0;
        loop {
            let v = eval(dir * k, h)?;
            peak = peak.max(v);
            values.push((dir * k, v));
            quiet = if v <= C_TAIL * peak { quiet + 1 } else { 0 };
            if quiet >= 2 && k * h >= 3.0 * sigma {
                break;
            }
            k += 1.0;
            if k > 4096.0 {
                return Err(Error::Resolution("c-integral does not decay".into()));
            }
        }
    }
    let total = |vals: &[(f64, f64)], h: f64| {
        let s = pairwise_sum(vals.iter().map(|&(k, v)| if spec.real && k != 0.0 { 2.0 * v } else { v }));
        s * h
    };
    let mut h = h;
    let mut estimate = total(&values, h);
    for _ in 0..MAX_HALVINGS {
        // Midpoints in units of the halved step.
        let kmin = values.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let kmax = values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let mids: Vec<f64> = {
            let mut m = Vec::new();
            let mut k = kmin + 0.5;
            while k < kmax {
                m.push(k);
                k += 1.0;
            }
            m
        };
        let new = mids
            .iter()
            .map(|&k| Ok((k, eval(k, h)?)))
            .collect::<Result<Vec<_>>>()?;
        values = values
            .into_iter()
            .map(|(k, v)| (2.0 * k, v))
            .chain(new.into_iter().map(|(k, v)| (2.0 * k, v)))
            .collect();
        values.sort_by(|a, b| a.0.total_cmp(&b.0));
        h *= 0.5;
        let refined = total(&values, h);
        let change = (refined - estimate).abs();
        estimate = refined;
        if change <= mspec.c_tolerance * refined.abs() {
            return Ok(estimate);
        }
    }
    Err(Error::Resolution("c-integral did not converge".into()))
}

/// `|||f|||_p` for a sampled field. One-dimensional data only.
pub fn modified_norm(f: &Field, mspec: &ModifiedNormSpec) -> Result<f64> {
    mspec.validate()?;
    if f.dim() != mspec.d {
        return Err(Error::GridMismatch);
    }
    if mspec.d != 1 {
        return Err(Error::UnsupportedRoute("modified norm of sampled data in dimension > 1"));
    }
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    if f.peak() == 0.0 {
        return Ok(0.0);
    }
    let spec = Spectrum::new(f, mspec.p)?;
    let band = significant_radius(&f.fourier()?)?;
    let zeta0 = spec.radius / (2.0 * band);
    let nodes = mspec.zeta_rule(zeta0)?;
    let terms = nodes
        .par_iter()
        .map(|&(zeta, w)| Ok(w * zeta.sqrt() * c_integral(&spec, mspec, zeta)?))
        .collect::<Result<Vec<f64>>>()?;
    let scale = mspec.prefactor() * (2.0 * PI).powf(mspec.p / 2.0);
    Ok((scale * pairwise_sum(terms)).powf(1.0 / mspec.p))
}

/// `t^{d(alpha - 1/2)/2} |||(e^{tDelta} f)^alpha|||_p` for nonnegative `f`.
pub fn q_modified(f: &Field, mspec: &ModifiedNormSpec, alpha: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if !(0.5..=1.0).contains(&alpha) {
        return Err(Error::PowerOutOfRange(alpha));
    }
    let f = if f.is_nonnegative() {
        f.clone()
    } else {
        f.clone().into_nonnegative(EPS_NEG)?
    };
    let profile = heat_evolve_open(&f, t)?.pointwise_power(alpha)?;
    let factor = t.powf(mspec.d as f64 * (alpha - 0.5) / 2.0);
    Ok(factor * modified_norm(&profile, mspec)?)
}
