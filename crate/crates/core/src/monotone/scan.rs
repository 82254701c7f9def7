use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::reflect;
use crate::error::{Error, Result};
use crate::fields::{Field, EPS_NEG};
use crate::flows::GaussianSpec;
use crate::forms::{lambda_heat, lambda_mehler_terms};
use crate::norms::{
    limit_values, q_flow, q_mehler, q_mehler_limit, q_mitigated, q_modified, strichartz_norm, strichartz_norm_gaussian,
    MixedNormSpec, ModifiedNormSpec, MonotoneSeries,
};

/// Monotone quantity to scan, with its own parameters. The exponent triple
/// of the Strichartz-type quantities lives in [`ScanConfig::triple`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    QFlow,
    QMehler,
    QMitigated { alpha: f64 },
    QModified { alpha: f64, p: f64 },
    LambdaHeat,
    LambdaMehler,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::QFlow => "q_flow",
            Quantity::QMehler => "q_mehler",
            Quantity::QMitigated { .. } => "q_mitigated",
            Quantity::QModified { .. } => "q_modified",
            Quantity::LambdaHeat => "lambda_heat",
            Quantity::LambdaMehler => "lambda_mehler",
        }
    }

    fn needs_triple(&self) -> bool {
        matches!(self, Quantity::QFlow | Quantity::QMehler | Quantity::QMitigated { .. })
    }
}

/// Exponents `(d, p, q)` of a mixed norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub d: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub t_count: usize,
    pub grid_kind: GridKind,
    /// Relative slack for drops and for the limit sandwich.
    pub tolerance: f64,
    pub seed: u64,
    pub quantity: Quantity,
    #[serde(default)]
    pub triple: Option<Triple>,
    /// Overrides the s-axis node count of the norm evaluations.
    #[serde(default)]
    pub s_nodes: Option<usize>,
}

impl ScanConfig {
    /// Geometric grid of 20 times over `[1e-2, 10]`.
    pub fn new(quantity: Quantity, triple: Option<Triple>) -> Self {
        Self {
            t_min: 1e-2,
            t_max: 10.0,
            t_count: 20,
            grid_kind: GridKind::Geometric,
            tolerance: 1e-5,
            seed: 0,
            quantity,
            triple,
            s_nodes: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.t_count < 3 {
            return Err(Error::Config(format!("t_count must be >= 3, got {}", self.t_count)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be nonnegative, got {}", self.tolerance)));
        }
        if self.quantity.needs_triple() && self.triple.is_none() {
            return Err(Error::Config(format!("{} needs an exponent triple", self.quantity.name())));
        }
        match self.quantity {
            Quantity::QMitigated { alpha } | Quantity::QModified { alpha, .. } if !(0.5..=1.0).contains(&alpha) => {
                Err(Error::PowerOutOfRange(alpha))
            }
            _ => Ok(()),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.t_count;
        let mut t: Vec<f64> = (0..n)
            .map(|i| {
                let u = i as f64 / (n - 1) as f64;
                match self.grid_kind {
                    GridKind::Geometric => self.t_min * (self.t_max / self.t_min).powf(u),
                    GridKind::Linear => self.t_min + (self.t_max - self.t_min) * u,
                }
            })
            .collect();
        t[n - 1] = self.t_max;
        t
    }

    /// The mixed-norm spec for the configured triple.
    pub fn mixed_spec(&self) -> Result<Option<MixedNormSpec>> {
        let Some(tr) = self.triple else {
            return Ok(None);
        };
        let spec = MixedNormSpec::new(tr.d, tr.p, tr.q)?;
        Ok(Some(match self.s_nodes {
            Some(n) => spec.with_s_nodes(n)?,
            None => spec,
        }))
    }

    fn modified_spec(&self, d: usize, p: f64) -> Result<ModifiedNormSpec> {
        let mut spec = ModifiedNormSpec::new(d, p)?;
        if let Some(n) = self.s_nodes {
            spec.s_nodes = n;
            spec.validate()?;
        }
        Ok(spec)
    }

    /// Whether the configured quantity is proved monotone for admissible
    /// data.
    pub fn within_hypotheses(&self) -> Result<bool> {
        Ok(match self.quantity {
            Quantity::QFlow | Quantity::QMehler | Quantity::QMitigated { .. } => {
                self.mixed_spec()?.is_some_and(|s| s.within_hypotheses())
            }
            Quantity::QModified { p, .. } => p.fract() == 0.0 && (p as i64) % 2 == 0,
            Quantity::LambdaHeat | Quantity::LambdaMehler => true,
        })
    }

    pub fn label(&self) -> String {
        let name = self.quantity.name();
        let triple = self.triple.map(|t| format!("{},{},{}", t.d, t.p, t.q));
        match (self.quantity, triple) {
            (Quantity::QMitigated { alpha }, Some(tr)) => format!("{name}(alpha={alpha};{tr})"),
            (Quantity::QModified { alpha, p }, _) => format!("{name}(alpha={alpha};p={p})"),
            (_, Some(tr)) if self.quantity.needs_triple() => format!("{name}({tr})"),
            _ => name.to_string(),
        }
    }
}

/// Everything one evaluation needs, prepared once per scan.
struct Evaluator {
    quantity: Quantity,
    data: Field,
    spec: Option<MixedNormSpec>,
    modified: Option<ModifiedNormSpec>,
    /// `|f|^2` and its reflection, for the Lambda functionals.
    densities: Option<(Field, Field)>,
}

impl Evaluator {
    fn new(data: &Field, config: &ScanConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.mixed_spec()?;
        if let Some(s) = spec {
            if s.d != data.dim() {
                return Err(Error::Config(format!(
                    "triple has d = {} but data has dimension {}",
                    s.d,
                    data.dim()
                )));
            }
        }
        let modified = match config.quantity {
            Quantity::QModified { p, .. } => {
                if data.dim() != 1 {
                    return Err(Error::UnsupportedRoute("modified norm of sampled data in dimension > 1"));
                }
                Some(config.modified_spec(data.dim(), p)?)
            }
            _ => None,
        };
        let densities = match config.quantity {
            Quantity::LambdaHeat | Quantity::LambdaMehler => {
                let rho = data.abs_sq();
                Some((reflect(&rho), rho))
            }
            _ => None,
        };
        let data = match config.quantity {
            Quantity::QMitigated { .. } | Quantity::QModified { .. } => data.clone().into_nonnegative(EPS_NEG)?,
            _ => data.clone(),
        };
        Ok(Self {
            quantity: config.quantity,
            data,
            spec,
            modified,
            densities,
        })
    }

    fn eval(&self, t: f64) -> Result<f64> {
        let spec = || self.spec.as_ref().expect("validated");
        match self.quantity {
            Quantity::QFlow => q_flow(&self.data, spec(), t),
            Quantity::QMehler => q_mehler(&self.data, spec(), t),
            Quantity::QMitigated { alpha } => q_mitigated(&self.data, spec(), alpha, t),
            Quantity::QModified { alpha, .. } => q_modified(&self.data, self.modified.as_ref().expect("validated"), alpha, t),
            Quantity::LambdaHeat => {
                let (a, b) = self.densities.as_ref().expect("validated");
                lambda_heat(a, b, t)
            }
            Quantity::LambdaMehler => {
                let (a, b) = self.densities.as_ref().expect("validated");
                Ok(lambda_mehler_terms(a, b, t)?.lambda)
            }
        }
    }
}

/// Evaluates the configured quantity at every time node, in parallel.
/// Failed nodes are recorded in the series rather than aborting it; only an
/// unusable configuration is an error.
pub fn scan(data: &Field, config: &ScanConfig) -> Result<MonotoneSeries> {
    let evaluator = Evaluator::new(data, config)?;
    let times = config.times();
    let results: Vec<Result<f64>> = times.par_iter().map(|&t| evaluator.eval(t)).collect();
    let mut values = Vec::with_capacity(times.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                values.push(f64::NAN);
                failures.push((i, e.to_string()));
            }
        }
    }
    let series = MonotoneSeries::with_failures(config.label(), times, values, config.tolerance, failures)?;
    Ok(if config.within_hypotheses()? {
        series
    } else {
        series.outside_hypotheses()
    })
}

/// Limits of a monotone quantity at `t -> 0` and `t -> infinity`, and
/// whether a series stays between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    /// `None` when the small-time limit cannot be resolved on the data's
    /// grid; only the upper limit is checked then.
    pub lower: Option<f64>,
    pub upper: f64,
    /// Worst excursion outside `[lower, upper]`, relative to `upper`.
    pub excursion: f64,
    pub holds: bool,
}

/// `\| e^{isDelta} a e^{-w|x|^2} \|` for the configured triple.
fn gaussian_norm(spec: &MixedNormSpec, amplitude: f64, width: f64) -> Result<f64> {
    let g = GaussianSpec::new(Complex64::new(amplitude, 0.0), vec![0.0; spec.d], Complex64::new(width, 0.0))?;
    strichartz_norm_gaussian(&g, spec)
}

/// Computes the two limits where they are available in closed form and
/// checks `series` against them. `None` for the modified quantity.
pub fn limit_check(data: &Field, config: &ScanConfig, series: &MonotoneSeries) -> Result<Option<LimitCheck>> {
    let ev = Evaluator::new(data, config)?;
    let d = data.dim() as f64;
    let volume = data.grid().cell_volume();
    let (lower, upper) = match config.quantity {
        Quantity::QFlow => {
            let (lower, upper) = limit_values(&ev.data, ev.spec.as_ref().expect("validated"))?;
            (Some(lower), upper)
        }
        Quantity::QMehler => {
            let spec = ev.spec.as_ref().expect("validated");
            let weighted = ev
                .data
                .abs_sq()
                .map_with_coords(|x, z| z * (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp())
                .into_nonnegative(EPS_NEG)?
                .pointwise_power(0.5)?;
            (Some(strichartz_norm(&weighted, spec)?), q_mehler_limit(&ev.data, spec)?)
        }
        Quantity::QMitigated { alpha } => {
            // (e^{tDelta} f)^alpha ~ M^alpha H_t^alpha, whose scaled norm is
            // t-independent.
            let spec = ev.spec.as_ref().expect("validated");
            let mass = ev.data.integrate()?.re;
            let upper = mass.powf(alpha) * gaussian_norm(spec, (4.0 * PI).powf(-d * alpha / 2.0), alpha / 4.0)?;
            // f^(1/2) decays more slowly than f and may not fit the box.
            let lower = if alpha == 0.5 {
                ev.data
                    .pointwise_power(0.5)
                    .and_then(|r| strichartz_norm(&r, spec))
                    .ok()
            } else {
                Some(0.0)
            };
            (lower, upper)
        }
        Quantity::QModified { .. } => return Ok(None),
        Quantity::LambdaHeat => {
            let (a, b) = ev.densities.as_ref().expect("validated");
            let overlap: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x.re * y.re).max(0.0).sqrt()).sum();
            let masses = a.integrate()?.re * b.integrate()?.re;
            (Some(overlap * volume), masses.sqrt())
        }
        Quantity::LambdaMehler => {
            let (a, b) = ev.densities.as_ref().expect("validated");
            let grid = *a.grid();
            let mut x = [0.0; 4];
            let (mut overlap, mut ga, mut gb) = (0.0, 0.0, 0.0);
            for k in 0..grid.len() {
                grid.point(k, &mut x[..grid.dim()]);
                let w = (-0.5 * x[..grid.dim()].iter().map(|v| v * v).sum::<f64>()).exp();
                let (p, q) = (a.samples()[k].re.max(0.0), b.samples()[k].re.max(0.0));
                overlap += w * (p * q).sqrt();
                ga += w * p;
                gb += w * q;
            }
            // Gaussian means m_j = int f_j dgamma; the limit is
            // int e^{-|x|^2/2} (m_1 m_2)^(1/2) = (2 pi)^(d/2) (m_1 m_2)^(1/2).
            let norm = (2.0 * PI).powf(-d / 2.0) * volume;
            let means = (ga * norm) * (gb * norm);
            (Some(overlap * volume), (2.0 * PI).powf(d / 2.0) * means.sqrt())
        }
    };
    let slack = config.tolerance * upper.abs();
    let excursion = series
        .values
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| (lower.unwrap_or(f64::NEG_INFINITY) - v).max(v - upper).max(0.0))
        .fold(0.0f64, f64::max);
    Ok(Some(LimitCheck {
        lower,
        upper,
        excursion: if upper != 0.0 { excursion / upper.abs() } else { excursion },
        holds: excursion <= slack,
    }))
}
