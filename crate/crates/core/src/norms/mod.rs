//! Mixed space-time norms of Schrödinger evolutions, the heat-flow and
//! Mehler-flow monotone quantities built from them, and the modified norms.

mod engine;
mod modified;
mod series;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::interp::resample;
use crate::fields::{Field, GridSpec, EPS_NEG};
use crate::flows::{
    gaussian_evolve_closed, heat_evolve_open, heat_spread, mehler_evolve_open,
    sliding_gaussian, FlowParams, GaussianSpec, DENSITY_TAIL,
};
use crate::numeric::pairwise_sum;

pub use engine::{Propagator, GRID_TAIL};
pub use modified::{
    modified_norm, modified_norm_gaussian, q_modified, sharp_modified_constant, ModifiedNormSpec,
};
pub use series::MonotoneSeries;

/// `2 + 4/d`, the exponent at which the diagonal Strichartz norm is
/// admissible.
pub fn p_of_d(d: usize) -> f64 {
    2.0 + 4.0 / d as f64
}

/// Exponents and s-axis quadrature settings for `L^p_s L^q_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    /// Scale of the s-axis substitution; `None` picks the natural time scale
    /// of the data.
    #[serde(default)]
    pub s_scale: Option<f64>,
    #[serde(default = "default_s_nodes")]
    pub s_nodes: usize,
}

fn default_s_nodes() -> usize {
    257
}

impl MixedNormSpec {
    pub fn new(d: usize, p: f64, q: f64) -> Result<Self> {
        let spec = Self {
            d,
            p,
            q,
            s_scale: None,
            s_nodes: default_s_nodes(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 3 {
            return Err(Error::BadDimension { got: self.d, max: 3 });
        }
        for e in [self.p, self.q] {
            if !(e >= 1.0 && e.is_finite()) {
                return Err(Error::BadExponent(e));
            }
        }
        if let Some(l) = self.s_scale {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("s_scale must be positive, got {l}")));
            }
        }
        if self.s_nodes < 3 || self.s_nodes.is_multiple_of(2) {
            return Err(Error::Config(format!("s_nodes must be odd and >= 3, got {}", self.s_nodes)));
        }
        Ok(())
    }

    pub fn with_s_nodes(mut self, n: usize) -> Result<Self> {
        self.s_nodes = n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_s_scale(mut self, scale: f64) -> Result<Self> {
        self.s_scale = Some(scale);
        self.validate()?;
        Ok(self)
    }

    /// `p, q >= 2`, `(d, p, q) != (2, 2, inf)` and `2/p + d/q = d/2`.
    pub fn admissible(&self) -> bool {
        let d = self.d as f64;
        self.p >= 2.0
            && self.q >= 2.0
            && !(self.d == 2 && self.p == 2.0 && self.q.is_infinite())
            && (2.0 / self.p + d / self.q - d / 2.0).abs() < 1e-12
    }

    /// `q` is an even integer dividing `p`.
    pub fn even_divides(&self) -> bool {
        let q_even = self.q.fract() == 0.0 && (self.q as i64) % 2 == 0;
        q_even && (self.p / self.q).fract().abs() < 1e-12
    }

    /// Inside the hypotheses under which the heat-flow quantity is proved
    /// monotone.
    pub fn within_hypotheses(&self) -> bool {
        self.admissible() && self.even_divides()
    }

    /// `beta` with `(\int |e^{isDelta} f|^q dx)^(p/q) ~ |s|^-beta` at large
    /// `|s|`.
    pub fn decay_exponent(&self) -> f64 {
        self.d as f64 * (self.p / 2.0 - self.p / self.q)
    }

    /// Closed-form Strichartz norm of the unit-norm Gaussian `c e^{-|x|^2}`,
    /// which is the sharp constant whenever Gaussians are extremal.
    pub fn gaussian_value(&self) -> Result<f64> {
        let (d, p, q) = (self.d as f64, self.p, self.q);
        let gamma = d * p * (q - 2.0) / (4.0 * q);
        if gamma <= 0.5 {
            return Err(Error::NotIntegrable(2.0 * gamma));
        }
        let s_integral = 0.25 * PI.sqrt() * crate::numeric::gamma(gamma - 0.5) / crate::numeric::gamma(gamma);
        let value = (2.0 / PI).powf(d * p / 4.0) * (PI / q).powf(d * p / (2.0 * q)) * s_integral;
        Ok(value.powf(1.0 / p))
    }

    /// The three sharp constants known in closed form.
    pub fn sharp_constant(&self) -> Option<f64> {
        match (self.d, self.p, self.q) {
            (1, p, q) if p == 6.0 && q == 6.0 => Some(12f64.powf(-1.0 / 12.0)),
            (2, p, q) if p == 4.0 && q == 4.0 => Some(2f64.powf(-0.5)),
            (1, p, q) if p == 8.0 && q == 4.0 => Some(2f64.powf(-0.25)),
            _ => None,
        }
    }
}

/// Quadrature over the time axis `s in R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SRule {
    /// `s = scale tan(theta)` with the midpoint rule on `(-pi/2, pi/2)`.
    /// Spectrally accurate when the integrand decays like `s^-2`.
    Tan { scale: f64, nodes: usize },
    /// Gauss-Legendre on `[-scale, scale]` and, on each tail, Gauss-Legendre
    /// in `v` with `|s| = scale v^(-2/(decay-1))`; for integrands decaying
    /// like `|s|^-decay`.
    Split {
        scale: f64,
        decay: f64,
        inner_nodes: usize,
        outer_nodes: usize,
    },
    /// Gauss-Legendre on a finite window.
    Window { start: f64, end: f64, nodes: usize },
}

/// One time node with its quadrature weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SNode {
    pub s: f64,
    pub weight: f64,
}

/// Gauss-Legendre nodes for `\int_start^inf F`, where `F ~ x^-decay`, in the
/// variable `v` with `x = start v^(-2/(decay-1))`; the mapped integrand
/// vanishes linearly at `v = 0`.
pub(crate) fn algebraic_tail(start: f64, decay: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if !(decay > 1.0) {
        return Err(Error::NotIntegrable(decay));
    }
    let gamma = 2.0 / (decay - 1.0);
    Ok(crate::numeric::gauss_legendre_on(n, 0.0, 1.0)
        .into_iter()
        .map(|(v, w)| {
            let x = start * v.powf(-gamma);
            (x, w * gamma * x / v)
        })
        .collect())
}

impl SRule {
    /// Tan rule for admissible exponents, split rule otherwise.
    pub fn for_spec(spec: &MixedNormSpec, natural_scale: f64) -> Result<Self> {
        let scale = spec.s_scale.unwrap_or(natural_scale);
        let beta = spec.decay_exponent();
        if (beta - 2.0).abs() < 1e-12 {
            Ok(SRule::Tan {
                scale,
                nodes: spec.s_nodes,
            })
        } else {
            Self::split(scale, beta, spec.s_nodes / 4 + 1)
        }
    }

    /// Split rule with `2n` nodes per tail and `n` in the core.
    pub fn split(scale: f64, decay: f64, n: usize) -> Result<Self> {
        if !(decay > 1.0) {
            return Err(Error::NotIntegrable(decay));
        }
        Ok(SRule::Split {
            scale,
            decay,
            inner_nodes: n,
            outer_nodes: 2 * n,
        })
    }

    /// Nodes in increasing order of `s`; every rule is symmetric about 0.
    pub fn nodes(&self) -> Vec<SNode> {
        match *self {
            SRule::Tan { scale, nodes } => (0..nodes)
                .map(|k| {
                    let theta = -0.5 * PI + (k as f64 + 0.5) * PI / nodes as f64;
                    let c = theta.cos();
                    SNode {
                        s: if 2 * k + 1 == nodes { 0.0 } else { scale * theta.tan() },
                        weight: scale * PI / (nodes as f64 * c * c),
                    }
                })
                .collect(),
            SRule::Split {
                scale,
                decay,
                inner_nodes,
                outer_nodes,
            } => {
                let tail = algebraic_tail(scale, decay, outer_nodes).unwrap_or_default();
                let mut out: Vec<SNode> = tail.iter().map(|&(s, weight)| SNode { s: -s, weight }).collect();
                out.extend(
                    crate::numeric::gauss_legendre_on(inner_nodes, -scale, scale)
                        .into_iter()
                        .map(|(s, weight)| SNode { s, weight }),
                );
                out.extend(tail.iter().rev().map(|&(s, weight)| SNode { s, weight }));
                out.sort_by(|a, b| a.s.total_cmp(&b.s));
                out
            }
            SRule::Window { start, end, nodes } => crate::numeric::gauss_legendre_on(nodes, start, end)
                .into_iter()
                .map(|(s, weight)| SNode { s, weight })
                .collect(),
        }
    }
}

/// Largest ratio of an outermost tan-rule term to the mean term tolerated
/// before the integrand is declared not to decay fast enough.
const TAN_EDGE_RATIO: f64 = 10.0;

/// `\sum_k w_k F(s_k)` over the rule. When `symmetric`, `F(-s) = F(s)` is
/// used to halve the evaluations. Evaluation is parallel; the reduction
/// order is fixed.
pub(crate) fn integrate_s(
    rule: &SRule,
    symmetric: bool,
    f: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<f64> {
    let nodes = rule.nodes();
    let symmetric = symmetric && !matches!(rule, SRule::Window { .. });
    let values: Vec<f64> = if symmetric {
        let n = nodes.len();
        let half: Vec<usize> = (0..n).filter(|&k| nodes[k].s >= 0.0).collect();
        let vals = half
            .par_iter()
            .map(|&k| f(nodes[k].s))
            .collect::<Result<Vec<f64>>>()?;
        let mut full = vec![0.0; n];
        for (&k, v) in half.iter().zip(&vals) {
            full[k] = *v;
        }
        for k in 0..n {
            if nodes[k].s < 0.0 {
                full[k] = full[n - 1 - k];
            }
        }
        full
    } else {
        nodes.par_iter().map(|n| f(n.s)).collect::<Result<Vec<f64>>>()?
    };
    let terms: Vec<f64> = nodes.iter().zip(&values).map(|(n, v)| n.weight * v).collect();
    let total = pairwise_sum(terms.iter().copied());
    if matches!(rule, SRule::Tan { .. }) && total > 0.0 {
        let edge = terms[0].abs().max(terms[terms.len() - 1].abs());
        let ratio = edge * terms.len() as f64 / total;
        if ratio > TAN_EDGE_RATIO {
            return Err(Error::InsufficientCoverage(ratio));
        }
    }
    Ok(total)
}

/// A family of fields `u(s_k, .)` at the nodes of an s-rule.
#[derive(Debug, Clone)]
pub struct SFamily {
    pub rule: SRule,
    pub fields: Vec<Field>,
}

impl SFamily {
    /// Samples `u` at every node of `rule`.
    pub fn from_fn(rule: SRule, u: impl Fn(f64) -> Result<Field>) -> Result<Self> {
        let fields = rule.nodes().iter().map(|n| u(n.s)).collect::<Result<Vec<_>>>()?;
        Ok(Self { rule, fields })
    }
}

/// `(\int (\int |u(s,x)|^q dx)^(p/q) ds)^(1/p)` over a sampled family.
pub fn mixed_norm(family: &SFamily, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    let nodes = family.rule.nodes();
    if nodes.len() != family.fields.len() {
        return Err(Error::Config(format!(
            "family has {} fields for {} s-nodes",
            family.fields.len(),
            nodes.len()
        )));
    }
    let inner = family
        .fields
        .iter()
        .map(|u| Ok(u.lq_norm(spec.q)?.powf(spec.p)))
        .collect::<Result<Vec<f64>>>()?;
    let lookup = |s: f64| -> Result<f64> {
        let k = nodes
            .iter()
            .position(|n| n.s == s)
            .ok_or_else(|| Error::Config("node lookup failed".into()))?;
        Ok(inner[k])
    };
    Ok(integrate_s(&family.rule, false, lookup)?.powf(1.0 / spec.p))
}

/// `\| e^{isDelta} f \|_{L^p_s L^q_x}`.
pub fn strichartz_norm(f: &Field, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    if f.dim() != spec.d {
        return Err(Error::GridMismatch);
    }
    let prop = Propagator::new(f)?;
    strichartz_with(&prop, spec)
}

pub(crate) fn strichartz_with(prop: &Propagator, spec: &MixedNormSpec) -> Result<f64> {
    let rule = SRule::for_spec(spec, prop.crossover())?;
    let ratio = spec.p / spec.q;
    let total = integrate_s(&rule, prop.is_time_symmetric(), |s| {
        Ok(prop.lq_integral(s, spec.q)?.powf(ratio))
    })?;
    Ok(total.powf(1.0 / spec.p))
}

/// Strichartz norm of an analytic Gaussian: exact space integrals, the same
/// s-quadrature.
pub fn strichartz_norm_gaussian(g: &GaussianSpec, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    if g.dim() != spec.d {
        return Err(Error::GridMismatch);
    }
    let rule = SRule::for_spec(spec, 1.0 / (4.0 * g.width.norm()))?;
    let total = integrate_s(&rule, g.width.im == 0.0, |s| {
        let u = gaussian_evolve_closed(g, &FlowParams::schrodinger(s)?)?;
        Ok(u.lq_integral(spec.q).powf(spec.p / spec.q))
    })?;
    Ok(total.powf(1.0 / spec.p))
}

/// `(e^{tDelta} |f|^2)^(1/2)` on a grid large enough to hold it.
pub fn quadratic_heat_profile(f: &Field, t: f64) -> Result<Field> {
    let density = f.abs_sq();
    heat_evolve_open(&density, t)?.pointwise_power(0.5)
}

/// `Q_{p,q}(t) = \| e^{isDelta} (e^{tDelta}|f|^2)^(1/2) \|`.
pub fn q_flow(f: &Field, spec: &MixedNormSpec, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    strichartz_norm(&quadratic_heat_profile(f, t)?, spec)
}

/// The same quantity through the sliding Gaussian: `\| e^{isDelta}
/// u~(t)^(1/2) \|`, equal to `q_flow` at time `t^-2`.
pub fn q_flow_rescaled(f: &Field, spec: &MixedNormSpec, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let radius = f.abs_sq().support_radius(DENSITY_TAIL);
    let spread = (4.0 * (1.0 / DENSITY_TAIL).ln()).sqrt();
    let h = 0.25f64.min(f.grid().spacing() * t.max(1.0));
    let points = ((2.0 * (t * radius + spread) / h).ceil() as usize).next_power_of_two();
    let target = GridSpec::new(f.dim(), 0.5 * h * points as f64, points)?;
    let profile = sliding_gaussian(f, t, &target)?.pointwise_power(0.5)?;
    strichartz_norm(&profile, spec)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.5..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::PowerOutOfRange(alpha))
    }
}

/// `(e^{tDelta} f)^alpha` for nonnegative `f`.
pub fn powered_heat_profile(f: &Field, alpha: f64, t: f64) -> Result<Field> {
    check_alpha(alpha)?;
    let f = if f.is_nonnegative() {
        f.clone()
    } else {
        f.clone().into_nonnegative(EPS_NEG)?
    };
    heat_evolve_open(&f, t)?.pointwise_power(alpha)
}

/// `t^{d(alpha - 1/2)/2} \| e^{isDelta} (e^{tDelta} f)^alpha \|` for
/// nonnegative `f`.
pub fn q_mitigated(f: &Field, spec: &MixedNormSpec, alpha: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let profile = powered_heat_profile(f, alpha, t)?;
    let factor = t.powf(spec.d as f64 * (alpha - 0.5) / 2.0);
    Ok(factor * strichartz_norm(&profile, spec)?)
}

/// Fraction of the box inside which evolved profiles must have decayed.
const INNER_FRACTION: f64 = 0.75;

/// `e^{tL}` of each density on one grid, zero-padded when
/// `e^{-|x|^2/2} e^{tL} rho` outgrows the input box.
pub(crate) fn mehler_evolve_padded(densities: &[Field], t: f64) -> Result<Vec<Field>> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let Some(first) = densities.first() else {
        return Ok(Vec::new());
    };
    let grid = *first.grid();
    if densities.iter().any(|f| !f.grid().approx_eq(&grid)) {
        return Err(Error::GridMismatch);
    }
    // The weighted profile is below the tail level beyond both the Gaussian
    // weight's reach and the dilated support of the evolved density.
    let tau = -0.5 * (-2.0 * t).exp_m1();
    let radius = densities
        .iter()
        .fold(0.0f64, |r, f| r.max(f.support_radius(DENSITY_TAIL)));
    let weight_reach = (2.0 * (1.0 / DENSITY_TAIL).ln()).sqrt();
    let evolved_reach = t.exp() * (radius + heat_spread(tau, DENSITY_TAIL));
    let needed = weight_reach.min(evolved_reach) / INNER_FRACTION;
    if needed <= grid.half_extent() {
        return densities.iter().map(|f| mehler_evolve_open(f, t)).collect();
    }
    let h = grid.spacing();
    let points = ((2.0 * needed / h).ceil() as usize).next_power_of_two();
    let target = GridSpec::new(grid.dim(), 0.5 * h * points as f64, points)?;
    densities
        .iter()
        .map(|f| mehler_evolve_open(&resample(f, &target)?.into_nonnegative(EPS_NEG)?, t))
        .collect()
}

pub(crate) fn gaussian_weight(x: &[f64]) -> f64 {
    (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
}

/// `(e^{-|x|^2/2} e^{tL} |f|^2)^(1/2)`, on a grid enlarged when the
/// profile outgrows the input box.
pub fn mehler_profile(f: &Field, t: f64) -> Result<Field> {
    let evolved = mehler_evolve_padded(&[f.abs_sq()], t)?.remove(0);
    evolved
        .map_with_coords(|x, z| z * gaussian_weight(x))
        .into_nonnegative(EPS_NEG)?
        .pointwise_power(0.5)
}

/// `\| e^{isDelta} (e^{-|x|^2/2} e^{tL}|f|^2)^(1/2) \|`.
pub fn q_mehler(f: &Field, spec: &MixedNormSpec, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    strichartz_norm(&mehler_profile(f, t)?, spec)
}

/// Large-time limit of `q_mehler`: `\| e^{isDelta} e^{-|x|^2/4} \|
/// (\int |f|^2 d gamma)^(1/2)`.
pub fn q_mehler_limit(f: &Field, spec: &MixedNormSpec) -> Result<f64> {
    let d = f.dim() as f64;
    let gaussian_mass = f
        .abs_sq()
        .map_with_coords(|x, z| z * (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp())
        .integrate()?
        .re
        / (2.0 * PI).powf(d / 2.0);
    let g = GaussianSpec::new(Complex64::new(1.0, 0.0), vec![0.0; f.dim()], Complex64::new(0.25, 0.0))?;
    Ok(strichartz_norm_gaussian(&g, spec)? * gaussian_mass.sqrt())
}

/// Limits of `q_flow` as `t -> 0` and `t -> infinity`: the norm of `|f|` and
/// the norm of `H_1^(1/2)` times `\|f\|_2`.
pub fn limit_values(f: &Field, spec: &MixedNormSpec) -> Result<(f64, f64)> {
    let q_zero = strichartz_norm(&f.abs(), spec)?;
    // H_1^(1/2) = (4 pi)^(-d/4) exp(-|x|^2 / 8).
    let d = f.dim() as f64;
    let h = GaussianSpec::new(
        Complex64::new((4.0 * PI).powf(-d / 4.0), 0.0),
        vec![0.0; f.dim()],
        Complex64::new(0.125, 0.0),
    )?;
    let q_infinity = strichartz_norm_gaussian(&h, spec)? * f.lq_norm(2.0)?;
    Ok((q_zero, q_infinity))
}
