use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values of a monotone quantity over increasing times, with a
/// nondecreasing verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSeries {
    pub quantity: String,
    pub t_values: Vec<f64>,
    pub values: Vec<f64>,
    /// Relative slack: a drop is tolerated up to `tolerance * max |value|`.
    pub tolerance: f64,
    pub verdict: bool,
    /// Largest drop `values[i-1] - values[i]` relative to `max |value|`.
    pub worst_violation: f64,
    /// Index of the node ending the worst drop, if any drop occurred.
    pub worst_index: Option<usize>,
    /// Whether the quantity is evaluated inside the hypotheses that
    /// guarantee monotonicity.
    pub within_hypotheses: bool,
    /// Nodes whose evaluation failed, with the error text. Failed nodes
    /// carry `NaN` in `values` and force a negative verdict.
    #[serde(default)]
    pub failures: Vec<(usize, String)>,
}

impl MonotoneSeries {
    pub fn new(quantity: impl Into<String>, t_values: Vec<f64>, values: Vec<f64>, tolerance: f64) -> Result<Self> {
        Self::with_failures(quantity, t_values, values, tolerance, Vec::new())
    }

    pub fn with_failures(
        quantity: impl Into<String>,
        t_values: Vec<f64>,
        values: Vec<f64>,
        tolerance: f64,
        failures: Vec<(usize, String)>,
    ) -> Result<Self> {
        if t_values.len() != values.len() {
            return Err(Error::Config(format!(
                "{} times but {} values",
                t_values.len(),
                values.len()
            )));
        }
        if t_values.windows(2).any(|w| !(w[1] > w[0])) || t_values.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("times must be positive and increasing".into()));
        }
        if !(tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be nonnegative, got {tolerance}")));
        }
        let scale = values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0;
        let mut worst_index = None;
        for i in 1..values.len() {
            let drop = values[i - 1] - values[i];
            if drop.is_finite() && drop > 0.0 {
                let rel = if scale > 0.0 { drop / scale } else { 0.0 };
                if rel > worst {
                    worst = rel;
                    worst_index = Some(i);
                }
            }
        }
        Ok(Self {
            quantity: quantity.into(),
            verdict: worst <= tolerance && failures.is_empty(),
            t_values,
            values,
            tolerance,
            worst_violation: worst,
            worst_index,
            within_hypotheses: true,
            failures,
        })
    }

    pub fn outside_hypotheses(mut self) -> Self {
        self.within_hypotheses = false;
        self
    }

    /// `max / min - 1` over the finite values.
    pub fn spread(&self) -> f64 {
        let finite = self.values.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi / lo - 1.0
    }

    /// Rows `t,value,delta,violation`: `delta` is the change from the
    /// previous node and `violation` the relative drop at this node.
    pub fn to_csv(&self) -> Result<String> {
        let scale = self
            .values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Config(e.to_string());
        w.write_record(["t", "value", "delta", "violation"]).map_err(err)?;
        for i in 0..self.values.len() {
            let delta = if i == 0 { 0.0 } else { self.values[i] - self.values[i - 1] };
            let violation = if scale > 0.0 && delta < 0.0 { -delta / scale } else { 0.0 };
            w.write_record([
                format!("{:.17e}", self.t_values[i]),
                format!("{:.17e}", self.values[i]),
                format!("{:.17e}", delta),
                format!("{:.17e}", violation),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
