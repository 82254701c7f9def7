use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::reflect;
use super::scan::ScanConfig;
use crate::error::{Error, Result};
use crate::fields::{make_grid, Field, GridSpec};
use crate::flows::GaussianSpec;
use crate::forms::{hz_group, lambda_heat, lambda_heat_derivative, lambda_mehler_terms, q66_derivative, HzVariant};
use crate::norms::{
    modified_norm, q_flow, sharp_modified_constant, strichartz_norm, MixedNormSpec, ModifiedNormSpec,
};

/// Explicit derivative formulas that can be checked against finite
/// differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeIdentity {
    /// `Lambda'` along the heat flow for `|f|^2` and its reflection.
    LambdaHeat,
    /// `I + II` along the Mehler flow, same pair.
    LambdaMehler,
    /// `d/dt Q_{6,6}^6`, one-dimensional data.
    Q66,
}

/// Relative step of the centred difference.
pub const FD_STEP: f64 = 1e-4;

/// Angles of the planar group in the `Q_{6,6}` formula.
const Q66_ANGLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeNode {
    pub t: f64,
    pub explicit: f64,
    pub finite_difference: f64,
    pub rel_deviation: f64,
    /// `II / I` for the Mehler identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub identity: DerivativeIdentity,
    pub nodes: Vec<DerivativeNode>,
    pub max_rel_deviation: f64,
    pub worst_t: f64,
    /// `max |II| / I` over the nodes, Mehler identity only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_second_ratio: Option<f64>,
}

/// Resolution of the difference quotient relative to `|value| / t`: values
/// carry ~1e-11 relative error, divided by the relative step 1e-4.
const FD_RESOLUTION: f64 = 1e-7;

/// Relative deviation of two derivative values, measured against the
/// difference quotient's resolution when both are smaller than it, so that
/// derivatives that have decayed to (or are identically) zero compare as
/// agreeing.
fn deviation(explicit: f64, fd: f64, value: f64, t: f64) -> f64 {
    let scale = explicit.abs().max(fd.abs()).max(FD_RESOLUTION * value.abs() / t);
    if scale == 0.0 {
        0.0
    } else {
        (explicit - fd).abs() / scale
    }
}

/// Compares an explicit derivative with centred differences of step
/// `1e-4 t` at every node of the config's time grid.
pub fn derivative_check(identity: DerivativeIdentity, data: &Field, config: &ScanConfig) -> Result<DerivativeReport> {
    config.validate()?;
    let rho = data.abs_sq();
    let pair = (reflect(&rho), rho);
    let sextic = MixedNormSpec::new(1, 6.0, 6.0)?;
    let group = match identity {
        DerivativeIdentity::Q66 => {
            if data.dim() != 1 {
                return Err(Error::BadDimension { got: data.dim(), max: 1 });
            }
            Some(hz_group(HzVariant::D1Sextic, Q66_ANGLES)?)
        }
        _ => None,
    };
    // (value, explicit derivative, II/I)
    let at = |t: f64| -> Result<(f64, f64, Option<f64>)> {
        match identity {
            DerivativeIdentity::LambdaHeat => Ok((lambda_heat(&pair.0, &pair.1, t)?, lambda_heat_derivative(&pair.0, &pair.1, t)?, None)),
            DerivativeIdentity::LambdaMehler => {
                let m = lambda_mehler_terms(&pair.0, &pair.1, t)?;
                let ratio = if m.lambda > 0.0 { m.second.abs() / m.lambda } else { 0.0 };
                Ok((m.lambda, m.derivative(), Some(ratio)))
            }
            DerivativeIdentity::Q66 => Ok((q_flow(data, &sextic, t)?.powi(6), q66_derivative(data, t, group.as_ref().expect("built above"))?, None)),
        }
    };
    let value = |t: f64| at(t).map(|v| v.0);
    let nodes = config
        .times()
        .par_iter()
        .map(|&t| {
            let h = FD_STEP * t;
            if !(h > 0.0) || t - h == t || t + h == t {
                return Err(Error::StepUnderflow(t));
            }
            let (v, explicit, second_ratio) = at(t)?;
            let fd = (value(t + h)? - value(t - h)?) / (2.0 * h);
            Ok(DerivativeNode {
                t,
                explicit,
                finite_difference: fd,
                rel_deviation: deviation(explicit, fd, v, t),
                second_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = nodes
        .iter()
        .max_by(|a, b| a.rel_deviation.total_cmp(&b.rel_deviation))
        .expect("at least three nodes");
    Ok(DerivativeReport {
        identity,
        max_rel_deviation: worst.rel_deviation,
        worst_t: worst.t,
        max_second_ratio: nodes.iter().filter_map(|n| n.second_ratio).reduce(f64::max),
        nodes,
    })
}

/// Grids on which the constants are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridQuality {
    pub grid_1d: GridSpec,
    pub grid_2d: GridSpec,
    #[serde(default)]
    pub s_nodes: Option<usize>,
}

impl Default for GridQuality {
    fn default() -> Self {
        Self {
            grid_1d: make_grid(1, 16.0, 256).expect("valid grid"),
            grid_2d: make_grid(2, 8.0, 128).expect("valid grid"),
            s_nodes: None,
        }
    }
}

impl GridQuality {
    /// The same point count and extent in both dimensions.
    pub fn uniform(half_extent: f64, points: usize) -> Result<Self> {
        Ok(Self {
            grid_1d: make_grid(1, half_extent, points)?,
            grid_2d: make_grid(2, half_extent, points)?,
            s_nodes: None,
        })
    }
}

/// A measured sharp constant next to its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub label: String,
    pub d: usize,
    pub p: f64,
    /// `None` for the modified norm, which has a single exponent.
    pub q: Option<f64>,
    /// `NaN` when the evaluation failed; see `error`.
    pub measured: f64,
    pub exact: f64,
    /// The closed form `exact` was evaluated from.
    pub formula: String,
    pub rel_err: f64,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ConstantReport {
    fn new(label: String, (d, p, q): (usize, f64, Option<f64>), measured: Result<f64>, exact: f64, formula: &str, grid: GridSpec) -> Self {
        let (measured, error) = match measured {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        Self {
            label,
            d,
            p,
            q,
            measured,
            exact,
            formula: formula.into(),
            rel_err: (measured - exact).abs() / exact,
            grid,
            error,
        }
    }

    /// Within `tol`; a failed evaluation never passes.
    pub fn within(&self, tol: f64) -> bool {
        self.rel_err <= tol
    }
}

/// Strichartz norms of the sampled unit Gaussian for the three sharp
/// triples, and the modified norm for `d = 1`, `p = 8`, against their
/// closed forms. An evaluation that fails on the given grids is recorded in
/// its report, not raised.
pub fn constants_report(quality: &GridQuality) -> Result<Vec<ConstantReport>> {
    let triples: [(usize, f64, f64, &str); 3] = [
        (1, 6.0, 6.0, "12^(-1/12)"),
        (2, 4.0, 4.0, "2^(-1/2)"),
        (1, 8.0, 4.0, "2^(-1/4)"),
    ];
    let mut out = Vec::new();
    for (d, p, q, formula) in triples {
        let grid = if d == 1 { quality.grid_1d } else { quality.grid_2d };
        let f = GaussianSpec::normalized(d, 1.0)?.sample(&grid)?;
        let mut spec = MixedNormSpec::new(d, p, q)?;
        if let Some(n) = quality.s_nodes {
            spec = spec.with_s_nodes(n)?;
        }
        let measured = strichartz_norm(&f, &spec).and_then(|v| Ok(v / f.lq_norm(2.0)?));
        let exact = spec.sharp_constant().expect("one of the sharp triples");
        out.push(ConstantReport::new(format!("C({d},{p},{q})"), (d, p, Some(q)), measured, exact, formula, grid));
    }
    let grid = quality.grid_1d;
    let f = GaussianSpec::normalized(1, 1.0)?.sample(&grid)?;
    let measured = modified_norm(&f, &ModifiedNormSpec::new(1, 8.0)?).and_then(|v| Ok(v / f.lq_norm(2.0)?));
    out.push(ConstantReport::new(
        "C_mod(1,4)".into(),
        (1, 8.0, None),
        measured,
        sharp_modified_constant(1, 4)?,
        "(pi^nu / (2^(nu+1) m^d Gamma(nu+1)) (p(d)/2)^(d/2))^(1/2m), d=1, m=4, nu=1/2",
        grid,
    ));
    Ok(out)
}
