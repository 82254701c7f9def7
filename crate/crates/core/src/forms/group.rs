use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::interp::InterpolatorN;
use crate::fields::{Field, EPS_NEG};

/// Largest ambient dimension handled by the group averages.
pub const MAX_AMBIENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// `O(1) = {1, -1}`.
    Sign,
    /// `K` equispaced rotations and `K` reflections of the plane.
    AngleQuadrature,
    /// Seeded Haar samples, in pairs of opposite determinant.
    HaarMonteCarlo,
}

/// A discretized Haar measure on the isometries of `R^n` that fix a
/// subspace `W` pointwise. Elements act on coordinates in an orthonormal
/// basis of the complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceGroup {
    ambient_dim: usize,
    fixed: Vec<Vec<f64>>,
    complement: Vec<Vec<f64>>,
    sampler: Sampler,
    count: usize,
    seed: u64,
    /// Row-major `k x k` matrices, `k` the complement dimension.
    elements: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal vectors spanning the complement of `basis` in `R^n`.
fn complement_basis(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        // Two Gram-Schmidt passes keep rounding at the 1e-16 level.
        for _ in 0..2 {
            for b in basis.iter().chain(out.iter()) {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            out.push(v);
        }
    }
    out
}

/// The vectors `(e_j, ..., e_j) / sqrt(m)` in `(R^d)^m`, `j = 1..d`.
pub fn diagonal_subspace(m: usize, d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|j| {
            let mut v = vec![0.0; m * d];
            for i in 0..m {
                v[i * d + j] = 1.0 / (m as f64).sqrt();
            }
            v
        })
        .collect()
}

/// Haar sample of `SO(k)`: QR of a Gaussian matrix with the sign fixed so
/// that `R` has positive diagonal, then one column flipped if needed.
fn haar_rotation(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..k).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let c = dot(&cols[j], &cols[i]);
                let (head, tail) = cols.split_at_mut(j);
                tail[0].iter_mut().zip(&head[i]).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        cols[j].iter_mut().for_each(|x| *x /= norm);
    }
    let mut m: Vec<f64> = (0..k * k).map(|idx| cols[idx % k][idx / k]).collect();
    if determinant(&m, k) < 0.0 {
        (0..k).for_each(|r| m[r * k] = -m[r * k]);
    }
    m
}

fn determinant(m: &[f64], k: usize) -> f64 {
    match k {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            // Cofactor expansion along the first row.
            (0..k)
                .map(|c| {
                    let minor: Vec<f64> = (1..k)
                        .flat_map(|r| (0..k).filter(move |&j| j != c).map(move |j| (r, j)))
                        .map(|(r, j)| m[r * k + j])
                        .collect();
                    let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                    sign * m[c] * determinant(&minor, k - 1)
                })
                .sum()
        }
    }
}

/// Builds the discretized Haar measure of the isometries of `R^n` fixing
/// `span(fixed)`. `count` is the number of angles for a plane complement
/// and the number of samples otherwise; `seed` drives the sampler.
pub fn sample_group(ambient_dim: usize, fixed: Vec<Vec<f64>>, count: usize, seed: u64) -> Result<InvarianceGroup> {
    if ambient_dim > MAX_AMBIENT {
        return Err(Error::TooManyDimensions(ambient_dim));
    }
    for (i, a) in fixed.iter().enumerate() {
        if a.len() != ambient_dim {
            return Err(Error::BadSubspace(format!(
                "basis vector {i} has length {} in dimension {ambient_dim}",
                a.len()
            )));
        }
        for (j, b) in fixed.iter().enumerate().take(i + 1) {
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot(a, b) - target).abs() > 1e-14 {
                return Err(Error::BadSubspace(format!("basis not orthonormal at ({i}, {j})")));
            }
        }
    }
    let complement = complement_basis(&fixed, ambient_dim);
    let k = complement.len();
    if k < 1 {
        return Err(Error::BadSubspace("the subspace has no complement".into()));
    }
    if count < 1 || (k >= 3 && count < 2) {
        return Err(Error::Config(format!("group sample count {count} too small")));
    }
    let (sampler, elements) = match k {
        1 => (Sampler::Sign, vec![vec![1.0], vec![-1.0]]),
        2 => {
            let mut el = Vec::with_capacity(2 * count);
            for j in 0..count {
                let (s, c) = (2.0 * PI * j as f64 / count as f64).sin_cos();
                el.push(vec![c, -s, s, c]);
            }
            for j in 0..count {
                let (s, c) = (2.0 * PI * j as f64 / count as f64).sin_cos();
                el.push(vec![c, s, s, -c]);
            }
            (Sampler::AngleQuadrature, el)
        }
        _ => {
            // Element i uses stream i / 2; odd elements flip the last
            // column, so determinants +1 and -1 appear equally often.
            let el = (0..count)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream((i / 2) as u64);
                    let mut m = haar_rotation(k, &mut rng);
                    if i % 2 == 1 {
                        (0..k).for_each(|r| m[r * k + k - 1] = -m[r * k + k - 1]);
                    }
                    m
                })
                .collect();
            (Sampler::HaarMonteCarlo, el)
        }
    };
    let weights = vec![1.0 / elements.len() as f64; elements.len()];
    Ok(InvarianceGroup {
        ambient_dim,
        fixed,
        complement,
        sampler,
        count,
        seed,
        elements,
        weights,
    })
}

impl InvarianceGroup {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn complement_dim(&self) -> usize {
        self.complement.len()
    }

    pub fn fixed(&self) -> &[Vec<f64>] {
        &self.fixed
    }

    pub fn complement(&self) -> &[Vec<f64>] {
        &self.complement
    }

    pub fn sampler(&self) -> Sampler {
        self.sampler
    }

    /// The requested angle or sample count.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Element `i` acting on complement coordinates.
    pub fn complement_matrix(&self, i: usize) -> &[f64] {
        &self.elements[i]
    }

    /// `out = R_i v` in complement coordinates.
    #[inline]
    pub fn rotate(&self, i: usize, v: &[f64], out: &mut [f64]) {
        let k = self.complement.len();
        let m = &self.elements[i];
        for r in 0..k {
            out[r] = (0..k).map(|c| m[r * k + c] * v[c]).sum();
        }
    }

    /// Element `i` as a row-major `n x n` matrix on the ambient space.
    pub fn ambient_matrix(&self, i: usize) -> Vec<f64> {
        let n = self.ambient_dim;
        let k = self.complement.len();
        let m = &self.elements[i];
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let mut acc: f64 = self.fixed.iter().map(|w| w[r] * w[c]).sum();
                for a in 0..k {
                    for b in 0..k {
                        acc += self.complement[a][r] * m[a * k + b] * self.complement[b][c];
                    }
                }
                out[r * n + c] = acc;
            }
        }
        out
    }

    /// Ambient point with coordinates `w` along the fixed basis and `v`
    /// along the complement basis.
    #[inline]
    pub fn embed(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (c, b) in w.iter().zip(&self.fixed) {
            out.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        for (c, b) in v.iter().zip(&self.complement) {
            out.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
    }
}

/// Relative level above which data near the box edge make out-of-box
/// samples count as leakage.
const LEAKAGE_LEVEL: f64 = 1e-10;

/// Multilinear interpolation, zero outside the sampled box.
fn multilinear(field: &Field, x: &[f64]) -> (Complex64, bool) {
    let g = field.grid();
    let n = g.points();
    let d = g.dim();
    let h = g.spacing();
    let mut base = [0usize; MAX_AMBIENT];
    let mut frac = [0.0; MAX_AMBIENT];
    let mut upper_inside = [true; MAX_AMBIENT];
    for a in 0..d {
        let u = (x[a] + g.half_extent()) / h;
        if !(u >= 0.0 && u <= (n - 1) as f64 + 1.0) || u.is_nan() {
            return (Complex64::new(0.0, 0.0), true);
        }
        let i = (u.floor() as usize).min(n - 1);
        base[a] = i;
        frac[a] = u - i as f64;
        upper_inside[a] = i + 1 < n;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for corner in 0..(1usize << d) {
        let mut weight = 1.0;
        let mut flat = 0usize;
        let mut skip = false;
        for a in 0..d {
            let up = (corner >> a) & 1 == 1;
            if up && !upper_inside[a] {
                skip = true;
                break;
            }
            weight *= if up { frac[a] } else { 1.0 - frac[a] };
            flat = flat * n + base[a] + up as usize;
        }
        if !skip && weight != 0.0 {
            acc += field.samples()[flat] * weight;
        }
    }
    (acc, false)
}

/// Largest `|F|` within two cells of the box edge, relative to the peak.
fn edge_level(field: &Field) -> f64 {
    let g = field.grid();
    let edge = g.half_extent() - 2.0 * g.spacing();
    let peak = field.peak();
    if peak == 0.0 {
        return 0.0;
    }
    let mut x = vec![0.0; g.dim()];
    let mut worst = 0.0f64;
    for (flat, z) in field.samples().iter().enumerate() {
        g.point(flat, &mut x);
        if x.iter().any(|c| c.abs() >= edge) {
            worst = worst.max(z.norm());
        }
    }
    worst / peak
}

/// How `F(rho X)` is read off the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Multilinear, `O(h^2)`.
    Multilinear,
    /// Six-point Lagrange on a two-fold band-limited upsampling.
    BandLimited,
}

/// `PF(X) = sum_rho w_rho F(rho X)` with multilinear interpolation.
pub fn project_invariant(field: &Field, group: &InvarianceGroup) -> Result<Field> {
    project_invariant_with(field, group, Interpolation::Multilinear)
}

pub fn project_invariant_with(field: &Field, group: &InvarianceGroup, interpolation: Interpolation) -> Result<Field> {
    let g = *field.grid();
    if g.dim() != group.ambient_dim() {
        return Err(Error::GridMismatch);
    }
    let n = g.dim();
    let fine = match interpolation {
        Interpolation::Multilinear => None,
        Interpolation::BandLimited => Some(InterpolatorN::new(field, 2)?),
    };
    let read = |y: &[f64]| -> (Complex64, bool) {
        match &fine {
            None => multilinear(field, y),
            Some(interp) => (interp.eval(y), !g.contains(y)),
        }
    };
    let matrices: Vec<Vec<f64>> = (0..group.len()).map(|i| group.ambient_matrix(i)).collect();
    let results: Vec<(Complex64, bool)> = (0..g.len())
        .into_par_iter()
        .map(|flat| {
            let mut x = [0.0; MAX_AMBIENT];
            g.point(flat, &mut x[..n]);
            let mut y = [0.0; MAX_AMBIENT];
            let mut acc = Complex64::new(0.0, 0.0);
            let mut outside = false;
            for (m, w) in matrices.iter().zip(group.weights()) {
                for r in 0..n {
                    y[r] = (0..n).map(|c| m[r * n + c] * x[c]).sum();
                }
                let (v, out) = read(&y[..n]);
                outside |= out;
                acc += v * *w;
            }
            (acc, outside)
        })
        .collect();
    if results.iter().any(|(_, out)| *out) {
        let level = edge_level(field);
        if level > LEAKAGE_LEVEL {
            return Err(Error::BoundaryLeakage(level));
        }
    }
    let out = Field::new(g, results.into_iter().map(|(z, _)| z).collect())?;
    if field.is_nonnegative() {
        out.into_nonnegative(EPS_NEG)
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_grid;

    fn check_group(group: &InvarianceGroup) {
        let n = group.ambient_dim();
        let total: f64 = group.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        for i in 0..group.len() {
            let m = group.ambient_matrix(i);
            for r in 0..n {
                for c in 0..n {
                    let g: f64 = (0..n).map(|k| m[k * n + r] * m[k * n + c]).sum();
                    let e = if r == c { 1.0 } else { 0.0 };
                    assert!((g - e).abs() < 1e-12);
                }
            }
            for w in group.fixed() {
                for r in 0..n {
                    let y: f64 = (0..n).map(|c| m[r * n + c] * w[c]).sum();
                    assert!((y - w[r]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn plane_complement_gets_angles_and_reflections() {
        let s = 1.0 / 3f64.sqrt();
        let g = sample_group(3, vec![vec![s, s, s]], 64, 0).unwrap();
        assert_eq!(g.sampler(), Sampler::AngleQuadrature);
        assert_eq!(g.len(), 128);
        check_group(&g);
        let dets: Vec<f64> = (0..g.len()).map(|i| determinant(g.complement_matrix(i), 2)).collect();
        assert_eq!(dets.iter().filter(|d| **d > 0.0).count(), 64);

        let g = sample_group(4, diagonal_subspace(2, 2), 16, 0).unwrap();
        assert_eq!(g.complement_dim(), 2);
        check_group(&g);
    }

    #[test]
    fn haar_samples_pair_determinants_and_repeat() {
        let g = sample_group(4, diagonal_subspace(4, 1), 32, 7).unwrap();
        assert_eq!(g.sampler(), Sampler::HaarMonteCarlo);
        assert_eq!(g.complement_dim(), 3);
        check_group(&g);
        for i in 0..g.len() {
            let det = determinant(g.complement_matrix(i), 3);
            assert!((det - if i % 2 == 0 { 1.0 } else { -1.0 }).abs() < 1e-12);
        }
        assert_eq!(g, sample_group(4, diagonal_subspace(4, 1), 32, 7).unwrap());
        assert_ne!(g, sample_group(4, diagonal_subspace(4, 1), 32, 8).unwrap());
        // The first elements do not depend on how many are drawn.
        let longer = sample_group(4, diagonal_subspace(4, 1), 64, 7).unwrap();
        assert_eq!(g.complement_matrix(5), longer.complement_matrix(5));
    }

    #[test]
    fn rejects_bad_subspaces() {
        assert!(matches!(
            sample_group(2, vec![vec![1.0, 1.0]], 8, 0),
            Err(Error::BadSubspace(_))
        ));
        assert!(matches!(
            sample_group(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], 8, 0),
            Err(Error::BadSubspace(_))
        ));
        assert!(matches!(
            sample_group(5, vec![], 8, 0),
            Err(Error::TooManyDimensions(5))
        ));
    }

    #[test]
    fn projection_fixes_radial_and_is_idempotent() {
        let grid = make_grid(3, 6.0, 64).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let group = sample_group(3, vec![vec![s, s, s]], 32, 0).unwrap();
        let radial = Field::from_real_fn(grid, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp());
        let p = project_invariant(&radial, &group).unwrap();
        assert!(p.max_abs_diff(&radial).unwrap() < 0.02);

        let bump = Field::from_real_fn(grid, |x| {
            (-(x[0] - 0.5).powi(2) - 2.0 * x[1] * x[1] - (x[2] + 0.3).powi(2)).exp()
        });
        let once = project_invariant(&bump, &group).unwrap();
        // Self-adjointness: int (PF) G = int F (PG).
        let other = Field::from_real_fn(grid, |x| (-(x[0] + 0.4).powi(2) - x[1] * x[1] - 3.0 * x[2] * x[2]).exp());
        let pg = project_invariant(&other, &group).unwrap();
        let a = once.mul(&other).unwrap().integrate().unwrap().re;
        let b = bump.mul(&pg).unwrap().integrate().unwrap().re;
        assert!((a / b - 1.0).abs() < 1e-2);
    }

    #[test]
    fn band_limited_projection_is_idempotent() {
        let grid = make_grid(3, 6.0, 64).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let group = sample_group(3, vec![vec![s, s, s]], 8, 0).unwrap();
        let bump = Field::from_real_fn(grid, |x| {
            (-((x[0] - 0.3).powi(2) + x[1] * x[1] + (x[2] + 0.2).powi(2))).exp()
        });
        let once = project_invariant_with(&bump, &group, Interpolation::BandLimited).unwrap();
        let twice = project_invariant_with(&once, &group, Interpolation::BandLimited).unwrap();
        let diff = once.max_abs_diff(&twice).unwrap();
        assert!(diff < 1e-6 * once.peak(), "{diff}");
        assert!(once.max_abs_diff(&bump).unwrap() > 1e-2);
    }

    #[test]
    fn leakage_is_flagged() {
        let grid = make_grid(2, 4.0, 32).unwrap();
        let group = sample_group(2, vec![], 8, 0).unwrap();
        let wide = Field::from_real_fn(grid, |x| (-0.1 * x[1] * x[1]).exp());
        assert!(matches!(project_invariant(&wide, &group), Err(Error::BoundaryLeakage(_))));
        let big = make_grid(2, 8.0, 64).unwrap();
        let tight = Field::from_real_fn(big, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        assert!(project_invariant(&tight, &group).is_ok());
    }
}
