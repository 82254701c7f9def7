//! Quadratic forms `int F (PF)` for tensor powers `F = f x ... x f`, with
//! `P` the average over isometries fixing the diagonal subspace. Points are
//! written `X = w + v` with `w` in the fixed subspace and `v` in its
//! complement; `F` is evaluated exactly from an interpolant of `f`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::group::{diagonal_subspace, sample_group, InvarianceGroup, Sampler, MAX_AMBIENT};
use crate::error::{Error, Result};
use crate::fields::interp::{Interpolator1, Interpolator2};
use crate::fields::{Field, EPS_NEG};
use crate::flows::heat_evolve_open;
use crate::norms::p_of_d;
use crate::numeric::{gamma, gauss_legendre_on, pairwise_sum};

/// Quadrature sizes for the tensor forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormQuadrature {
    /// Gauss-Legendre nodes per fixed-subspace axis.
    pub w_nodes: usize,
    /// Gauss-Legendre nodes in the complement radius.
    pub r_nodes: usize,
    /// Polar angle nodes on the sphere (three-dimensional complements) or
    /// angle nodes on the circle (`q66_derivative`).
    pub angle_nodes: usize,
}

impl Default for FormQuadrature {
    fn default() -> Self {
        Self {
            w_nodes: 32,
            r_nodes: 32,
            angle_nodes: 8,
        }
    }
}

/// Monte Carlo value with its standard error (zero for deterministic
/// groups).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HzVariant {
    /// `(1,6,6)`: `F = f x f x f` on `R^3`, constant `1/(2 sqrt 3)`.
    D1Sextic,
    /// `(2,4,4)`: `F = f x f` on `R^4`, constant `1/4`.
    D2Quartic,
}

impl HzVariant {
    /// `(m, d)`: tensor power and dimension of `f`.
    pub fn shape(self) -> (usize, usize) {
        match self {
            HzVariant::D1Sextic => (3, 1),
            HzVariant::D2Quartic => (2, 2),
        }
    }

    pub fn constant(self) -> f64 {
        match self {
            HzVariant::D1Sextic => 1.0 / (2.0 * 3f64.sqrt()),
            HzVariant::D2Quartic => 0.25,
        }
    }

    /// The Strichartz exponent `p = q = 2m`.
    pub fn exponent(self) -> f64 {
        2.0 * self.shape().0 as f64
    }

    pub fn name(self) -> &'static str {
        match self {
            HzVariant::D1Sextic => "d1_sextic",
            HzVariant::D2Quartic => "d2_quartic",
        }
    }
}

/// The group for an HZ variant, with `count` angles.
pub fn hz_group(variant: HzVariant, count: usize) -> Result<InvarianceGroup> {
    let (m, d) = variant.shape();
    sample_group(m * d, diagonal_subspace(m, d), count, 0)
}

/// The group fixing `1_1, ..., 1_d` in `(R^d)^m`.
pub fn diagonal_group(m: usize, d: usize, count: usize, seed: u64) -> Result<InvarianceGroup> {
    if m * d > MAX_AMBIENT {
        return Err(Error::TooManyDimensions(m * d));
    }
    sample_group(m * d, diagonal_subspace(m, d), count, seed)
}

/// Interpolant of a real function on `R` or `R^2`.
enum Factor {
    One(Interpolator1<f64>),
    Two(Interpolator2<f64>),
}

const UPSAMPLE: usize = 4;

impl Factor {
    fn new(f: &Field) -> Result<Self> {
        match f.dim() {
            1 => Ok(Factor::One(Interpolator1::new_real(f, UPSAMPLE)?)),
            2 => Ok(Factor::Two(Interpolator2::new_real(f, 2)?)),
            d => Err(Error::BadDimension { got: d, max: 2 }),
        }
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Factor::One(i) => i.eval(x[0]),
            Factor::Two(i) => i.eval(x[0], x[1]),
        }
    }
}

/// `prod_i f(X_i)` over the `m` blocks of length `d`.
#[inline]
fn tensor_value(factor: &Factor, d: usize, x: &[f64]) -> f64 {
    x.chunks(d).map(|b| factor.eval(b)).product()
}

/// Level below which `f` counts as zero when bounding the quadrature box.
const SUPPORT_LEVEL: f64 = 1e-13;
/// Half-width of the quadrature window in standard deviations of `|f|^2`.
const WINDOW: f64 = 9.0;

/// Quadrature nodes: `w` over the fixed subspace (product rule) and `r`
/// over the complement radius.
struct Nodes {
    w: Vec<(Vec<f64>, f64)>,
    r: Vec<(f64, f64)>,
}

/// Mean and largest per-axis standard deviation of the density `|f|^2`.
fn moments(f: &Field) -> (Vec<f64>, f64) {
    let g = f.grid();
    let d = g.dim();
    let mut x = vec![0.0; d];
    let mut mass = 0.0;
    let mut first = vec![0.0; d];
    let mut second = vec![0.0; d];
    for (k, z) in f.samples().iter().enumerate() {
        g.point(k, &mut x);
        let rho = z.norm_sqr();
        mass += rho;
        for a in 0..d {
            first[a] += rho * x[a];
            second[a] += rho * x[a] * x[a];
        }
    }
    let mean: Vec<f64> = first.iter().map(|s| s / mass).collect();
    let sigma = (0..d)
        .map(|a| (second[a] / mass - mean[a] * mean[a]).max(0.0).sqrt())
        .fold(0.0f64, f64::max);
    (mean, sigma)
}

/// `F` and `F(rho .)` share `w` and `r`, so `F PF` lives where `|F|^2`
/// does: `w` within a window around `sqrt(m)` times the mean of `|f|^2` and
/// `r` up to the typical spread plus a window. Both are clipped to the box
/// outside which `F` vanishes.
fn nodes(f: &Field, m: usize, quad: &FormQuadrature) -> Nodes {
    let d = f.dim();
    let radius = f.support_radius(SUPPORT_LEVEL);
    let (mean, sigma) = moments(f);
    let sm = (m as f64).sqrt();
    let bound = sm * radius;
    let mut w: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for mu in mean {
        let lo = (sm * mu - WINDOW * sigma).max(-bound);
        let hi = (sm * mu + WINDOW * sigma).min(bound);
        let axis = composite(quad.w_nodes, lo, hi);
        w = w
            .into_iter()
            .flat_map(|(p, wt)| {
                axis.iter().map(move |(x, a)| {
                    let mut q = p.clone();
                    q.push(*x);
                    (q, wt * a)
                })
            })
            .collect();
    }
    let spread = (((m - 1) * d) as f64).sqrt() * sigma + WINDOW * sigma;
    let r = composite(quad.r_nodes, 0.0, spread.min(((m * d) as f64).sqrt() * radius));
    Nodes { w, r }
}

const PANEL_NODES: usize = 8;

/// Gauss-Legendre on equal panels of [`PANEL_NODES`] nodes, about `n` in
/// total. The box is sized for the widest factor, so the integrand may be
/// much narrower than it.
fn composite(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let panels = n.div_ceil(PANEL_NODES).max(1);
    let width = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|k| {
            let lo = a + k as f64 * width;
            gauss_legendre_on(PANEL_NODES, lo, lo + width)
        })
        .collect()
}

/// `(theta, phi, weight)` on the unit sphere: Gauss-Legendre in
/// `cos(theta)` times equispaced `phi`.
fn sphere_nodes(n: usize) -> Vec<([f64; 3], f64)> {
    let polar = gauss_legendre_on(n, -1.0, 1.0);
    let n_phi = 2 * n;
    let mut out = Vec::with_capacity(n * n_phi);
    for (c, wc) in polar {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            out.push(([s * phi.cos(), s * phi.sin(), c], wc * 2.0 * PI / n_phi as f64));
        }
    }
    out
}

fn check_shape(f: &Field, m: usize, group: &InvarianceGroup) -> Result<usize> {
    let d = f.dim();
    if group.ambient_dim() != m * d || group.fixed().len() != d {
        return Err(Error::GridMismatch);
    }
    Ok(d)
}

/// `int F (PF)` with `F = f^{(x) m}`.
pub fn tensor_form(f: &Field, m: usize, group: &InvarianceGroup, quad: &FormQuadrature) -> Result<FormEstimate> {
    let d = check_shape(f, m, group)?;
    let f = f.clone().into_nonnegative(EPS_NEG)?;
    let factor = Factor::new(&f)?;
    let nodes = nodes(&f, m, quad);
    match (group.sampler(), group.complement_dim()) {
        (Sampler::AngleQuadrature, 2) => Ok(FormEstimate {
            value: planar_form(&factor, d, group, &nodes),
            std_error: 0.0,
        }),
        (Sampler::HaarMonteCarlo, 3) => Ok(spherical_form(&factor, d, group, &nodes, quad.angle_nodes)),
        (_, k) => Err(Error::BadSubspace(format!("no quadrature for a {k}-dimensional complement"))),
    }
}

/// Plane complement: on the angle grid the dihedral average is constant
/// along each orbit, so `int F PF = int dw int r dr 2 pi (PG)^2` with
/// `PG(w, r)` the average of `F(w + r rho e_1)`.
fn planar_form(factor: &Factor, d: usize, group: &InvarianceGroup, nodes: &Nodes) -> f64 {
    let n = group.ambient_dim();
    let per_w: Vec<f64> = nodes
        .w
        .par_iter()
        .map(|(w, ww)| {
            let mut x = [0.0; MAX_AMBIENT];
            let mut v = [0.0; 2];
            let terms = nodes.r.iter().map(|(r, wr)| {
                let pg: f64 = (0..group.len())
                    .map(|i| {
                        group.rotate(i, &[*r, 0.0], &mut v);
                        group.embed(w, &v, &mut x[..n]);
                        group.weights()[i] * tensor_value(factor, d, &x[..n])
                    })
                    .sum();
                wr * r * 2.0 * PI * pg * pg
            });
            ww * pairwise_sum(terms)
        })
        .collect();
    pairwise_sum(per_w)
}

/// Three-dimensional complement with Monte Carlo elements: integrates the
/// U-statistic `sum_{k != l} F(rho_k X) F(rho_l X) / (K (K-1))`, an unbiased
/// estimate of `(PF)^2`, in spherical coordinates. The standard error comes
/// from the first-order projection of the U-statistic.
fn spherical_form(factor: &Factor, d: usize, group: &InvarianceGroup, nodes: &Nodes, polar: usize) -> FormEstimate {
    let n = group.ambient_dim();
    let kk = group.len();
    let sphere = sphere_nodes(polar);
    let per_w: Vec<(f64, Vec<f64>)> = nodes
        .w
        .par_iter()
        .map(|(w, ww)| {
            let mut total = 0.0;
            let mut partial = vec![0.0; kk];
            let mut values = vec![0.0; kk];
            let mut x = [0.0; MAX_AMBIENT];
            let mut v = [0.0; 3];
            for (r, wr) in &nodes.r {
                for (omega, wo) in &sphere {
                    let base = [r * omega[0], r * omega[1], r * omega[2]];
                    for (i, slot) in values.iter_mut().enumerate() {
                        group.rotate(i, &base, &mut v);
                        group.embed(w, &v, &mut x[..n]);
                        *slot = tensor_value(factor, d, &x[..n]);
                    }
                    let s: f64 = values.iter().sum();
                    let q: f64 = values.iter().map(|g| g * g).sum();
                    let weight = ww * wr * r * r * wo;
                    total += weight * (s * s - q);
                    for (p, g) in partial.iter_mut().zip(&values) {
                        *p += weight * g * (s - g);
                    }
                }
            }
            (total, partial)
        })
        .collect();
    let pairs = (kk * (kk - 1)) as f64;
    let total = pairwise_sum(per_w.iter().map(|(t, _)| *t)) / pairs;
    let h1: Vec<f64> = (0..kk)
        .map(|k| pairwise_sum(per_w.iter().map(|(_, p)| p[k])) / (kk - 1) as f64)
        .collect();
    let mean = h1.iter().sum::<f64>() / kk as f64;
    let var = h1.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (kk - 1) as f64;
    FormEstimate {
        value: total,
        std_error: 2.0 * (var / kk as f64).sqrt(),
    }
}

/// Right side of the HZ representation: `c int F (PF)` with
/// `F = f x ... x f`. Equals the `p = q` Strichartz norm to the power `p`.
pub fn hz_form(f: &Field, variant: HzVariant, group: &InvarianceGroup) -> Result<f64> {
    hz_form_with(f, variant, group, &FormQuadrature::default())
}

pub fn hz_form_with(f: &Field, variant: HzVariant, group: &InvarianceGroup, quad: &FormQuadrature) -> Result<f64> {
    let (m, d) = variant.shape();
    if f.dim() != d {
        return Err(Error::BadDimension { got: f.dim(), max: d });
    }
    Ok(variant.constant() * tensor_form(f, m, group, quad)?.value)
}

/// `nu = d (2m - p(d)) / 4`.
pub fn modified_nu(m: usize, d: usize) -> f64 {
    d as f64 * (2.0 * m as f64 - p_of_d(d)) / 4.0
}

/// Projection representation of `|||f|||_{2m}^{2m}`, estimated with the
/// sampled group `group` (from [`diagonal_group`]).
pub fn modified_rep(f: &Field, m: usize, group: &InvarianceGroup) -> Result<FormEstimate> {
    modified_rep_with(f, m, group, &FormQuadrature::default())
}

pub fn modified_rep_with(f: &Field, m: usize, group: &InvarianceGroup, quad: &FormQuadrature) -> Result<FormEstimate> {
    let d = f.dim();
    if m * d > MAX_AMBIENT {
        return Err(Error::TooManyDimensions(m * d));
    }
    let nu = modified_nu(m, d);
    if !(nu > 0.0) {
        return Err(Error::NonPositiveNu(nu));
    }
    let c = PI.powf(nu) / (2f64.powf(nu + 1.0) * (m as f64).powi(d as i32) * gamma(nu + 1.0))
        * (p_of_d(d) / 2.0).powf(d as f64 / 2.0);
    let est = tensor_form(f, m, group, quad)?;
    Ok(FormEstimate {
        value: c * est.value,
        std_error: c * est.std_error,
    })
}

/// Relative level of `e^{tDelta}|f|^2` below which log-derivatives are not
/// trusted and the integrand is dropped.
const LOG_MASK: f64 = 1e-12;

/// `d/dt Q_{6,6}(t)^6` from the explicit formula: the Haar average of
/// `|V(X) - rho^t V(rho X)|^2 (U(X) U(rho X))^(1/2)` over `R^3`, divided by
/// `8 sqrt 3`, where `U = (e^{tDelta}|f|^2)^{(x)3}` and `V = grad log U`.
pub fn q66_derivative(f: &Field, t: f64, group: &InvarianceGroup) -> Result<f64> {
    q66_derivative_with(f, t, group, &FormQuadrature::default())
}

pub fn q66_derivative_with(f: &Field, t: f64, group: &InvarianceGroup, quad: &FormQuadrature) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if f.dim() != 1 {
        return Err(Error::BadDimension { got: f.dim(), max: 1 });
    }
    check_shape(f, 3, group)?;
    if group.complement_dim() != 2 {
        return Err(Error::BadSubspace("expected a plane complement".into()));
    }
    let h = heat_evolve_open(&f.abs_sq(), t)?;
    let dh = h.gradient()?.remove(0);
    let hi = Interpolator1::new_real(&h, UPSAMPLE)?;
    let di = Interpolator1::new_real(&dh, UPSAMPLE)?;
    let floor = LOG_MASK * h.peak();
    let nodes = nodes(&h.pointwise_power(0.5)?, 3, quad);
    let n_theta = 4 * quad.angle_nodes;
    let matrices: Vec<Vec<f64>> = (0..group.len()).map(|i| group.ambient_matrix(i)).collect();

    // (sqrt U, V) at a point, or None where a factor is below the floor.
    let eval = |x: &[f64]| -> Option<(f64, [f64; 3])> {
        let mut root = 1.0;
        let mut v = [0.0; 3];
        for a in 0..3 {
            let hv = hi.eval(x[a]);
            if hv <= floor {
                return None;
            }
            root *= hv.sqrt();
            v[a] = di.eval(x[a]) / hv;
        }
        Some((root, v))
    };

    let per_w: Vec<f64> = nodes
        .w
        .par_iter()
        .map(|(w, ww)| {
            let mut x = [0.0; 3];
            let mut y = [0.0; 3];
            let mut acc = Vec::with_capacity(nodes.r.len());
            for (r, wr) in &nodes.r {
                let mut ring = 0.0;
                for j in 0..n_theta {
                    let (s, c) = (2.0 * PI * j as f64 / n_theta as f64).sin_cos();
                    group.embed(w, &[r * c, r * s], &mut x);
                    let Some((ux, vx)) = eval(&x) else { continue };
                    for (m, wt) in matrices.iter().zip(group.weights()) {
                        for a in 0..3 {
                            y[a] = (0..3).map(|b| m[a * 3 + b] * x[b]).sum();
                        }
                        let Some((uy, vy)) = eval(&y) else { continue };
                        let mut diff2 = 0.0;
                        for a in 0..3 {
                            let back: f64 = (0..3).map(|b| m[b * 3 + a] * vy[b]).sum();
                            diff2 += (vx[a] - back).powi(2);
                        }
                        ring += wt * diff2 * ux * uy;
                    }
                }
                acc.push(wr * r * ring * 2.0 * PI / n_theta as f64);
            }
            ww * pairwise_sum(acc)
        })
        .collect();
    Ok(pairwise_sum(per_w) / (8.0 * 3f64.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;
    use crate::norms::{sharp_modified_constant, strichartz_norm, MixedNormSpec};

    fn bump(x: f64) -> f64 {
        (-(x - 0.7).powi(2)).exp() + 0.5 * (-2.0 * (x + 0.8).powi(2)).exp()
    }

    #[test]
    fn gaussian_collapses_to_closed_form() {
        let g = make_grid(1, 8.0, 128).unwrap();
        let f = Field::from_real_fn(g, |x| (-x[0] * x[0]).exp());
        let group = hz_group(HzVariant::D1Sextic, 32).unwrap();
        let got = hz_form(&f, HzVariant::D1Sextic, &group).unwrap();
        let exact = 12f64.powf(-0.5) * (PI / 2.0).powf(1.5);
        assert!((got / exact - 1.0).abs() < 1e-6, "{got} vs {exact}");
    }

    #[test]
    fn sextic_form_matches_strichartz_norm() {
        let g = make_grid(1, 8.0, 128).unwrap();
        let f = Field::from_real_fn(g, |x| bump(x[0]));
        let group = hz_group(HzVariant::D1Sextic, 64).unwrap();
        let lhs = strichartz_norm(&f, &MixedNormSpec::new(1, 6.0, 6.0).unwrap()).unwrap().powi(6);
        let rhs = hz_form(&f, HzVariant::D1Sextic, &group).unwrap();
        assert!((rhs / lhs - 1.0).abs() < 1e-4, "{rhs} vs {lhs}");
    }

    #[test]
    fn quartic_form_matches_strichartz_norm() {
        let g = make_grid(2, 8.0, 64).unwrap();
        let f = Field::from_real_fn(g, |x| bump(x[0]) * (-(x[1] - 0.3).powi(2)).exp());
        let group = hz_group(HzVariant::D2Quartic, 32).unwrap();
        let quad = FormQuadrature {
            w_nodes: 24,
            r_nodes: 24,
            ..Default::default()
        };
        let lhs = strichartz_norm(&f, &MixedNormSpec::new(2, 4.0, 4.0).unwrap()).unwrap().powi(4);
        let rhs = hz_form_with(&f, HzVariant::D2Quartic, &group, &quad).unwrap();
        assert!((rhs / lhs - 1.0).abs() < 1e-3, "{rhs} vs {lhs}");
    }

    #[test]
    fn modified_rep_of_gaussian_is_sharp() {
        let g = make_grid(1, 8.0, 128).unwrap();
        let f = Field::from_real_fn(g, |x| (-x[0] * x[0]).exp());
        let group = diagonal_group(4, 1, 64, 3).unwrap();
        let est = modified_rep(&f, 4, &group).unwrap();
        let norm2 = (PI / 2.0).sqrt();
        let exact = sharp_modified_constant(1, 4).unwrap().powi(8) * norm2.powi(4);
        assert!((est.value / exact - 1.0).abs() < 1e-6, "{} vs {exact}", est.value);
        assert!(est.std_error < 1e-6 * exact);
    }

    #[test]
    fn modified_rep_guards() {
        let g = make_grid(2, 8.0, 32).unwrap();
        let f = Field::from_real_fn(g, |x| (-x[0] * x[0] - x[1] * x[1]).exp());
        let group = diagonal_group(2, 2, 16, 0).unwrap();
        assert!(matches!(modified_rep(&f, 2, &group), Err(Error::NonPositiveNu(_))));
        let g1 = make_grid(1, 8.0, 32).unwrap();
        let f1 = Field::from_real_fn(g1, |x| (-x[0] * x[0]).exp());
        assert!(matches!(modified_rep(&f1, 5, &group), Err(Error::TooManyDimensions(5))));
    }

    #[test]
    fn q66_derivative_vanishes_on_gaussians() {
        let g = make_grid(1, 8.0, 128).unwrap();
        let f = Field::from_real_fn(g, |x| (-x[0] * x[0]).exp());
        let group = hz_group(HzVariant::D1Sextic, 16).unwrap();
        let d = q66_derivative(&f, 0.3, &group).unwrap();
        assert!(d.abs() < 1e-8, "{d}");
        let b = Field::from_real_fn(g, |x| bump(x[0]));
        assert!(q66_derivative(&b, 0.3, &group).unwrap() > 0.0);
    }
}
