//! Cauchy-Schwarz functionals `Lambda(t) = int u_1^{1/2} u_2^{1/2}` along
//! the heat and Mehler flows, with their derivative formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, EPS_NEG};
use crate::flows::heat_evolve_open_all;
use crate::norms::{gaussian_weight, mehler_evolve_padded};
use crate::numeric::pairwise_sum;

/// Relative level below which an evolved density's log-gradient is treated
/// as unreliable; the weighted integrand there is below rounding anyway.
pub const LOG_MASK: f64 = 1e-12;

fn nonnegative_pair(f1: &Field, f2: &Field, t: f64) -> Result<[Field; 2]> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if !f1.grid().approx_eq(f2.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok([f1.clone().into_nonnegative(EPS_NEG)?, f2.clone().into_nonnegative(EPS_NEG)?])
}

fn real(f: &Field) -> Vec<f64> {
    f.samples().iter().map(|z| z.re.max(0.0)).collect()
}

fn root_product(u1: &[f64], u2: &[f64]) -> Vec<f64> {
    u1.iter().zip(u2).map(|(a, b)| (a * b).sqrt()).collect()
}

/// `(1/4) int |grad log e_1 - grad log e_2|^2 w` over points where both
/// `e_j` clear the mask.
fn log_gradient_term(e: &[Field; 2], w: &[f64]) -> Result<f64> {
    let vals = [real(&e[0]), real(&e[1])];
    let grads = [e[0].gradient()?, e[1].gradient()?];
    let floors = [LOG_MASK * e[0].peak(), LOG_MASK * e[1].peak()];
    let terms = (0..w.len()).map(|k| {
        if vals[0][k] <= floors[0] || vals[1][k] <= floors[1] {
            return 0.0;
        }
        let mut s = 0.0;
        for (a1, a2) in grads[0].iter().zip(&grads[1]) {
            let g1 = a1.samples()[k].re / vals[0][k];
            let g2 = a2.samples()[k].re / vals[1][k];
            s += (g1 - g2).powi(2);
        }
        0.25 * s * w[k]
    });
    Ok(pairwise_sum(terms) * e[0].grid().cell_volume())
}

/// `int (e^{tDelta} f_1)^{1/2} (e^{tDelta} f_2)^{1/2}`.
pub fn lambda_heat(f1: &Field, f2: &Field, t: f64) -> Result<f64> {
    let [a, b] = nonnegative_pair(f1, f2, t)?;
    let u = heat_evolve_open_all(&[a, b], t)?;
    let w = root_product(&real(&u[0]), &real(&u[1]));
    Ok(pairwise_sum(w) * u[0].grid().cell_volume())
}

/// `Lambda'(t)` for the heat flow:
/// `(1/4) int |grad log u_1 - grad log u_2|^2 u_1^{1/2} u_2^{1/2}` with
/// `u_j = e^{tDelta} f_j` and spectral gradients.
pub fn lambda_heat_derivative(f1: &Field, f2: &Field, t: f64) -> Result<f64> {
    let [a, b] = nonnegative_pair(f1, f2, t)?;
    let u = heat_evolve_open_all(&[a, b], t)?;
    let w = root_product(&real(&u[0]), &real(&u[1]));
    log_gradient_term(&[u[0].clone(), u[1].clone()], &w)
}

/// Mehler-flow functional and the two parts of its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MehlerTerms {
    pub lambda: f64,
    /// `(1/4) int |v_1 - v_2|^2 (u_1 u_2)^{1/2}`, nonnegative.
    pub first: f64,
    /// `int (<x, (v_1 + v_2)/2> + n) (u_1 u_2)^{1/2}`, zero in exact
    /// arithmetic.
    pub second: f64,
}

impl MehlerTerms {
    pub fn derivative(&self) -> f64 {
        self.first + self.second
    }
}

/// `Lambda`, `I` and `II` for `u_j = e^{-|x|^2/2} e^{tL} f_j`, with
/// `v_j = grad log u_j`.
pub fn lambda_mehler_terms(f1: &Field, f2: &Field, t: f64) -> Result<MehlerTerms> {
    let [a, b] = nonnegative_pair(f1, f2, t)?;
    let e = mehler_evolve_padded(&[a, b], t)?;
    let grid = *e[0].grid();
    let weight: Vec<f64> = (0..grid.len())
        .map(|k| {
            let mut x = [0.0; 4];
            grid.point(k, &mut x[..grid.dim()]);
            gaussian_weight(&x[..grid.dim()])
        })
        .collect();
    let u1: Vec<f64> = real(&e[0]).iter().zip(&weight).map(|(a, g)| a * g).collect();
    let u2: Vec<f64> = real(&e[1]).iter().zip(&weight).map(|(a, g)| a * g).collect();
    let w = root_product(&u1, &u2);
    let volume = grid.cell_volume();
    let lambda = pairwise_sum(w.iter().copied()) * volume;
    // At large t the e_j no longer decay towards the box edge, so their
    // periodic spectral gradients ring; the weighted u_j do decay.
    let weighted = |u: &[f64]| Field::new(grid, u.iter().map(|v| (*v).into()).collect());
    let first = log_gradient_term(&[weighted(&u1)?, weighted(&u2)?], &w)?;
    // II = int (n w + x . grad w); grad w is taken spectrally from w itself
    // so no division is involved.
    let wf = Field::new(grid, w.iter().map(|v| (*v).into()).collect())?;
    let grad = wf.gradient()?;
    let n = grid.dim() as f64;
    let terms = (0..grid.len()).map(|k| {
        let mut x = [0.0; 4];
        grid.point(k, &mut x[..grid.dim()]);
        let flux: f64 = (0..grid.dim()).map(|a| x[a] * grad[a].samples()[k].re).sum();
        n * w[k] + flux
    });
    let second = pairwise_sum(terms) * volume;
    Ok(MehlerTerms { lambda, first, second })
}
