//! Reproducible runs of the sharp-constant, monotonicity and identity
//! checks: config handling, the three commands and their output files.

pub mod config;
mod output;

use serde::Serialize;
use serde_json::{json, Value};
use strichartz_core::forms::{diagonal_group, hz_form, hz_group, modified_rep, FormReport, HzVariant};
use strichartz_core::monotone::{
    constants_report, derivative_check, limit_check, scan, DerivativeIdentity, DerivativeReport, GridQuality,
    Quantity,
};
use strichartz_core::norms::{modified_norm, q_flow, q_flow_rescaled, strichartz_norm, MixedNormSpec, ModifiedNormSpec};
use strichartz_core::{Error, Field, GridSpec};

pub use config::{CheckName, Command, Overrides, RunConfig};
pub use output::{write_outputs, Manifest, MANIFEST_VERSION};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILED: i32 = 2;
pub const EXIT_OUTSIDE: i32 = 3;

/// Agreement demanded of `I + II` with the finite difference in the Mehler
/// check, whose tolerance applies to `|II| / I`.
const MEHLER_DERIVATIVE_TOLERANCE: f64 = 1e-3;

#[derive(Debug)]
pub enum CliError {
    /// Unusable configuration; nothing is written.
    Invalid(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Result of a command before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
    /// `t,value,delta,violation` rows, scans only.
    pub series_csv: Option<String>,
    pub grids: Vec<GridSpec>,
    /// Seed that determined the data, when the data is seeded.
    pub data_seed: Option<u64>,
}

/// Runs `command` on a resolved config inside a pool of the configured
/// size.
pub fn execute(command: Command, config: &RunConfig) -> Result<Outcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = config.threads {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start {:?} threads: {e}", config.threads)))?;
    pool.install(|| match command {
        Command::Constants => cmd_constants(config),
        Command::Scan => cmd_scan(config),
        Command::Check => cmd_check(config),
    })
}

/// Resolves, executes and writes a run. Returns the exit code.
pub fn run(command: Command, config: RunConfig) -> Result<i32, CliError> {
    let config = config.resolve(command)?;
    let outcome = execute(command, &config)?;
    write_outputs(command, &config, &outcome)?;
    Ok(outcome.code)
}

fn data_on(config: &RunConfig, grid: &GridSpec) -> Result<Field, CliError> {
    Ok(config.data.build(grid, config.seed)?)
}

pub fn cmd_constants(config: &RunConfig) -> Result<Outcome, CliError> {
    let quality = GridQuality {
        grid_1d: config.grid.resolve(1)?,
        grid_2d: config.grid.resolve(2)?,
        s_nodes: config.scan.s_nodes,
    };
    let tol = config.tolerance();
    let reports = constants_report(&quality)?;
    let passed = reports.iter().all(|r| r.within(tol));
    Ok(Outcome {
        code: if passed { EXIT_OK } else { EXIT_FAILED },
        report: json!({
            "command": "constants",
            "tolerance": tol,
            "passed": passed,
            "constants": reports,
        }),
        series_csv: None,
        grids: vec![quality.grid_1d, quality.grid_2d],
        data_seed: None,
    })
}

pub fn cmd_scan(config: &RunConfig) -> Result<Outcome, CliError> {
    let grid = config.grid.resolve(config.scan_dim())?;
    let data = data_on(config, &grid)?;
    let sc = config.scan_config()?;
    let series = scan(&data, &sc)?;
    // Limits need finite values to compare; a failed limit evaluation is
    // reported rather than fatal.
    let limits = match limit_check(&data, &sc, &series) {
        Ok(l) => json!(l),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let limits_hold = limits.get("holds").and_then(Value::as_bool).unwrap_or(limits.is_null());
    let passed = series.verdict && limits_hold;
    let code = if !series.within_hypotheses {
        EXIT_OUTSIDE
    } else if passed {
        EXIT_OK
    } else {
        EXIT_FAILED
    };
    let note = (!series.within_hypotheses).then_some("no guarantee: outside the hypotheses under which the quantity is proved monotone");
    Ok(Outcome {
        code,
        report: json!({
            "command": "scan",
            "quantity": sc.label(),
            "data": config.data.to_string(),
            "data_seed": config.data.effective_seed(config.seed),
            "grid": grid,
            "tolerance": sc.tolerance,
            "within_hypotheses": series.within_hypotheses,
            "note": note,
            "verdict": series.verdict,
            "worst_violation": series.worst_violation,
            "limits": limits,
            "passed": passed,
            "series": series,
        }),
        series_csv: Some(series.to_csv()?),
        grids: vec![grid],
        data_seed: config.data.effective_seed(config.seed),
    })
}

/// Outcome of one identity check.
#[derive(Debug, Clone, Serialize)]
struct CheckReport {
    command: &'static str,
    check: CheckName,
    data: String,
    grid: GridSpec,
    tolerance: f64,
    lhs: f64,
    rhs: f64,
    rel_err: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    details: Value,
}

/// `(lhs, rhs, rel_err, extra pass condition, details)`.
type CheckValues = (f64, f64, f64, bool, Value);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs()
}

fn derivative_values(r: &DerivativeReport) -> (f64, f64) {
    let worst = r.nodes.iter().find(|n| n.t == r.worst_t).expect("worst node is a node");
    (worst.finite_difference, worst.explicit)
}

fn evaluate_check(name: CheckName, config: &RunConfig, f: &Field, grid: &GridSpec) -> Result<CheckValues, Error> {
    let samples = config.check.samples.expect("resolved");
    let hz = |variant: HzVariant| -> Result<CheckValues, Error> {
        let (m, d) = variant.shape();
        let spec = MixedNormSpec::new(d, 2.0 * m as f64, 2.0 * m as f64)?;
        let lhs = strichartz_norm(f, &spec)?.powf(variant.exponent());
        let rhs = hz_form(f, variant, &hz_group(variant, samples)?)?;
        let form = FormReport::new(variant.name(), lhs, rhs, samples, None, *grid);
        Ok((lhs, rhs, form.rel_err, true, json!(form)))
    };
    match name {
        CheckName::HzD1 => hz(HzVariant::D1Sextic),
        CheckName::HzD2 => hz(HzVariant::D2Quartic),
        CheckName::ModifiedRep => {
            let lhs = modified_norm(f, &ModifiedNormSpec::new(1, 8.0)?)?.powi(8);
            let est = modified_rep(f, 4, &diagonal_group(4, 1, samples, config.seed)?)?;
            let form = FormReport::new("modified_rep", lhs, est.value, samples, Some(config.seed), *grid);
            Ok((lhs, est.value, form.rel_err, true, json!({ "form": form, "std_error": est.std_error })))
        }
        CheckName::Csform | CheckName::MehlerII | CheckName::Q66 => {
            let identity = match name {
                CheckName::Csform => DerivativeIdentity::LambdaHeat,
                CheckName::MehlerII => DerivativeIdentity::LambdaMehler,
                _ => DerivativeIdentity::Q66,
            };
            // Only the time grid of the scan section is used.
            let mut times = config.scan_config().map_err(|e| Error::Config(e.to_string()))?;
            times.quantity = Quantity::LambdaHeat;
            let r = derivative_check(identity, f, &times)?;
            let (lhs, rhs) = derivative_values(&r);
            if name == CheckName::MehlerII {
                let ratio = r.max_second_ratio.unwrap_or(0.0);
                let consistent = r.max_rel_deviation <= MEHLER_DERIVATIVE_TOLERANCE;
                Ok((lhs, rhs, ratio, consistent, json!(r)))
            } else {
                Ok((lhs, rhs, r.max_rel_deviation, true, json!(r)))
            }
        }
        CheckName::Rescaled => {
            let tr = config.triple.expect("resolved");
            let spec = MixedNormSpec::new(tr.d, tr.p, tr.q)?;
            let t = config.check.t;
            let lhs = q_flow(f, &spec, t.powi(-2))?;
            let rhs = q_flow_rescaled(f, &spec, t)?;
            Ok((lhs, rhs, rel(lhs, rhs), true, json!({ "t": t, "flow_time": t.powi(-2) })))
        }
        CheckName::FourierInvariance => {
            let tr = config.triple.expect("resolved");
            let spec = MixedNormSpec::new(tr.d, tr.p, tr.q)?;
            let fhat = f.fourier()?;
            let lhs = strichartz_norm(f, &spec)?;
            let rhs = strichartz_norm(&fhat, &spec)?;
            let mut worst = rel(lhs, rhs);
            let mut details = json!({ "strichartz": { "f": lhs, "fourier": rhs, "rel_err": worst } });
            if tr.d == 1 {
                let m8 = ModifiedNormSpec::new(1, 8.0)?;
                let (a, b) = (modified_norm(f, &m8)?, modified_norm(&fhat, &m8)?);
                worst = worst.max(rel(a, b));
                details["modified_8"] = json!({ "f": a, "fourier": b, "rel_err": rel(a, b) });
            }
            Ok((lhs, rhs, worst, true, details))
        }
    }
}

pub fn cmd_check(config: &RunConfig) -> Result<Outcome, CliError> {
    let name = config.check.name.expect("resolved");
    if name == CheckName::FourierInvariance {
        let tr = config.triple.expect("resolved");
        if tr.p != tr.q {
            return Err(CliError::Invalid(format!("Fourier invariance needs p = q, got ({},{},{})", tr.d, tr.p, tr.q)));
        }
    }
    let grid = config.grid.resolve(name.dim(config.triple))?;
    let f = data_on(config, &grid)?;
    let tol = config.tolerance();
    let mut report = CheckReport {
        command: "check",
        check: name,
        data: config.data.to_string(),
        grid,
        tolerance: tol,
        lhs: f64::NAN,
        rhs: f64::NAN,
        rel_err: f64::NAN,
        passed: false,
        error: None,
        details: Value::Null,
    };
    match evaluate_check(name, config, &f, &grid) {
        Ok((lhs, rhs, rel_err, extra, details)) => {
            report.lhs = lhs;
            report.rhs = rhs;
            report.rel_err = rel_err;
            report.passed = rel_err <= tol && extra;
            report.details = details;
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    Ok(Outcome {
        code: if report.passed { EXIT_OK } else { EXIT_FAILED },
        report: json!(report),
        series_csv: None,
        grids: vec![grid],
        data_seed: config.data.effective_seed(config.seed),
    })
}
