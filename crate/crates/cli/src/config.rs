use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strichartz_core::monotone::{DataSource, GridKind, Quantity, ScanConfig, Triple};
use strichartz_core::{make_grid, GridSpec};

use crate::CliError;

/// Spatial grid; a missing field takes the default for the run's dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L", alias = "l", default)]
    pub l: Option<f64>,
    #[serde(rename = "N", alias = "n", default)]
    pub n: Option<usize>,
}

impl GridConfig {
    /// `L = 16, N = 256` in one dimension and `L = 8, N = 128` in two.
    pub fn resolve(&self, dim: usize) -> Result<GridSpec, CliError> {
        let (l, n) = if dim == 1 { (16.0, 256) } else { (8.0, 128) };
        Ok(make_grid(dim, self.l.unwrap_or(l), self.n.unwrap_or(n))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "default_quantity")]
    pub quantity: Quantity,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_count")]
    pub t_count: usize,
    #[serde(default = "default_grid_kind")]
    pub grid_kind: GridKind,
    #[serde(default)]
    pub s_nodes: Option<usize>,
}

fn default_quantity() -> Quantity {
    Quantity::QFlow
}
fn default_t_min() -> f64 {
    1e-2
}
fn default_t_max() -> f64 {
    10.0
}
fn default_t_count() -> usize {
    20
}
fn default_grid_kind() -> GridKind {
    GridKind::Geometric
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            quantity: default_quantity(),
            t_min: default_t_min(),
            t_max: default_t_max(),
            t_count: default_t_count(),
            grid_kind: default_grid_kind(),
            s_nodes: None,
        }
    }
}

/// Identity checks run by the `check` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CheckName {
    HzD1,
    HzD2,
    ModifiedRep,
    Csform,
    #[serde(rename = "mehler_II", alias = "mehler_ii")]
    #[value(name = "mehler_II", alias = "mehler_ii")]
    MehlerII,
    Q66,
    Rescaled,
    FourierInvariance,
}

impl CheckName {
    pub fn default_tolerance(self) -> f64 {
        match self {
            CheckName::HzD1 | CheckName::HzD2 | CheckName::Csform | CheckName::FourierInvariance => 1e-3,
            CheckName::ModifiedRep | CheckName::Q66 => 1e-2,
            CheckName::MehlerII => 1e-6,
            CheckName::Rescaled => 1e-4,
        }
    }

    /// Dimension of the data the check runs on.
    pub fn dim(self, triple: Option<Triple>) -> usize {
        match self {
            CheckName::HzD2 => 2,
            CheckName::FourierInvariance => triple.map_or(1, |t| t.d),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default)]
    pub name: Option<CheckName>,
    /// Time of the rescaling identity.
    #[serde(default = "default_check_t")]
    pub t: f64,
    /// Group size: angles for the planar groups, Haar samples for the
    /// modified representation.
    #[serde(default)]
    pub samples: Option<usize>,
}

fn default_check_t() -> f64 {
    2.0
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            name: None,
            t: default_check_t(),
            samples: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Constants,
    Scan,
    Check,
}

/// Everything a run depends on. Parsed from JSON, then overridden by flags,
/// then resolved so that every default is written out explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_data")]
    pub data: DataSource,
    #[serde(default)]
    pub triple: Option<Triple>,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub check: CheckSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_data() -> DataSource {
    DataSource::Gaussian
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Flag values; `None` leaves the config value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
    pub grid_l: Option<f64>,
    pub threads: Option<usize>,
    pub tolerance: Option<f64>,
    pub data: Option<DataSource>,
    pub triple: Option<Triple>,
    pub quantity: Option<Quantity>,
    pub check: Option<CheckName>,
    pub t: Option<f64>,
    pub samples: Option<usize>,
}

impl RunConfig {
    /// Reads a config file. A run manifest is accepted too: its recorded
    /// config is replayed.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("malformed JSON: {e}")))?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => map
                .remove("config")
                .ok_or_else(|| CliError::Invalid("manifest has no config".into()))?,
            other => other,
        };
        serde_json::from_value(value).map_err(|e| CliError::Invalid(format!("invalid config: {e}")))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.out {
            self.out = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.grid_n {
            self.grid.n = Some(v);
        }
        if let Some(v) = o.grid_l {
            self.grid.l = Some(v);
        }
        if let Some(v) = o.threads {
            self.threads = Some(v);
        }
        if let Some(v) = o.tolerance {
            self.tolerance = Some(v);
        }
        if let Some(v) = o.data {
            self.data = v;
        }
        if let Some(v) = o.triple {
            self.triple = Some(v);
        }
        if let Some(v) = o.quantity {
            self.scan.quantity = v;
        }
        if let Some(v) = o.check {
            self.check.name = Some(v);
        }
        if let Some(v) = o.t {
            self.check.t = v;
        }
        if let Some(v) = o.samples {
            self.check.samples = Some(v);
        }
    }

    /// Fills every command-dependent default so that the recorded config
    /// replays without relying on defaults.
    pub fn resolve(mut self, command: Command) -> Result<Self, CliError> {
        if let Some(tol) = self.tolerance {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(CliError::Invalid(format!("tolerance must be a nonnegative number, got {tol}")));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Invalid("threads must be positive".into()));
        }
        match command {
            Command::Constants => {
                self.tolerance.get_or_insert(1e-4);
            }
            Command::Scan => {
                self.tolerance.get_or_insert(1e-5);
                let needs_triple = matches!(
                    self.scan.quantity,
                    Quantity::QFlow | Quantity::QMehler | Quantity::QMitigated { .. }
                );
                if needs_triple && self.triple.is_none() {
                    self.triple = Some(Triple { d: 1, p: 6.0, q: 6.0 });
                }
                self.scan_config()?.validate()?;
                self.grid.resolve(self.scan_dim())?;
            }
            Command::Check => {
                let name = self
                    .check
                    .name
                    .ok_or_else(|| CliError::Invalid("no check named (use --check or check.name)".into()))?;
                self.tolerance.get_or_insert(name.default_tolerance());
                if self.check.samples.is_none() {
                    self.check.samples = Some(match name {
                        CheckName::HzD1 => 64,
                        CheckName::HzD2 => 32,
                        CheckName::Q66 => 32,
                        CheckName::ModifiedRep => 256,
                        _ => 0,
                    });
                }
                if name == CheckName::FourierInvariance || name == CheckName::Rescaled {
                    self.triple.get_or_insert(Triple { d: 1, p: 6.0, q: 6.0 });
                }
                if !(self.check.t > 0.0 && self.check.t.is_finite()) {
                    return Err(CliError::Invalid(format!("check t must be positive, got {}", self.check.t)));
                }
                self.grid.resolve(name.dim(self.triple))?;
            }
        }
        Ok(self)
    }

    /// Dimension of scan data: the triple's, else one.
    pub fn scan_dim(&self) -> usize {
        self.triple.map_or(1, |t| t.d)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.expect("resolved")
    }

    pub fn scan_config(&self) -> Result<ScanConfig, CliError> {
        let s = &self.scan;
        Ok(ScanConfig {
            t_min: s.t_min,
            t_max: s.t_max,
            t_count: s.t_count,
            grid_kind: s.grid_kind,
            tolerance: self.tolerance.unwrap_or(1e-5),
            seed: self.seed,
            quantity: s.quantity,
            triple: self.triple,
            s_nodes: s.s_nodes,
        })
    }
}

/// `d,p,q`, e.g. `1,6,6`.
pub fn parse_triple(s: &str) -> Result<Triple, String> {
    let s = s.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected d,p,q, got {s:?}"));
    }
    let d = parts[0].parse().map_err(|_| format!("bad dimension {:?}", parts[0]))?;
    let p = parts[1].parse().map_err(|_| format!("bad p {:?}", parts[1]))?;
    let q = parts[2].parse().map_err(|_| format!("bad q {:?}", parts[2]))?;
    Ok(Triple { d, p, q })
}

/// `q_flow`, `q_mehler`, `q_mitigated(0.75)`, `q_modified(1,8)`,
/// `lambda_heat`, `lambda_mehler`.
pub fn parse_quantity(s: &str) -> Result<Quantity, String> {
    let s = s.trim();
    let (name, args) = match s.split_once('(') {
        Some((n, rest)) => (
            n,
            rest.strip_suffix(')')
                .ok_or_else(|| format!("unclosed parenthesis in {s:?}"))?
                .split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad number {a:?} in {s:?}")))
                .collect::<Result<Vec<f64>, String>>()?,
        ),
        None => (s, Vec::new()),
    };
    match (name, args.as_slice()) {
        ("q_flow", []) => Ok(Quantity::QFlow),
        ("q_mehler", []) => Ok(Quantity::QMehler),
        ("q_mitigated", [alpha]) => Ok(Quantity::QMitigated { alpha: *alpha }),
        ("q_modified", [alpha, p]) => Ok(Quantity::QModified { alpha: *alpha, p: *p }),
        ("lambda_heat", []) => Ok(Quantity::LambdaHeat),
        ("lambda_mehler", []) => Ok(Quantity::LambdaMehler),
        _ => Err(format!("unknown quantity {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = RunConfig::parse("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.data, DataSource::Gaussian);
        assert_eq!(c.scan.t_count, 20);
    }

    #[test]
    fn unknown_fields_and_bad_json_are_rejected() {
        assert!(RunConfig::parse("{").is_err());
        assert!(RunConfig::parse(r#"{"sead": 3}"#).is_err());
        assert!(RunConfig::parse(r#"{"grid": {"N": "many"}}"#).is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let mut c = RunConfig::parse(r#"{"seed": 3, "grid": {"N": 64, "L": 12}, "data": {"random_bump": 1}}"#).unwrap();
        c.apply(Overrides {
            seed: Some(9),
            grid_n: Some(128),
            data: Some("two_bump".parse().unwrap()),
            ..Default::default()
        });
        assert_eq!(c.seed, 9);
        assert_eq!(c.grid, GridConfig { l: Some(12.0), n: Some(128) });
        assert_eq!(c.data, DataSource::TwoBump);
    }

    #[test]
    fn resolution_fills_defaults() {
        let c = RunConfig::default().resolve(Command::Scan).unwrap();
        assert_eq!(c.tolerance, Some(1e-5));
        assert_eq!(c.triple, Some(Triple { d: 1, p: 6.0, q: 6.0 }));
        let mut c = RunConfig::default();
        c.check.name = Some(CheckName::ModifiedRep);
        let c = c.resolve(Command::Check).unwrap();
        assert_eq!((c.tolerance, c.check.samples), (Some(1e-2), Some(256)));
        assert!(RunConfig::default().resolve(Command::Check).is_err());
        let mut c = RunConfig::default();
        c.grid.n = Some(100);
        assert!(c.resolve(Command::Scan).is_err());
    }

    #[test]
    fn manifest_is_accepted_as_config() {
        let c = RunConfig {
            seed: 5,
            ..Default::default()
        };
        let manifest = serde_json::json!({"manifest_version": 1, "config": c});
        assert_eq!(RunConfig::parse(&manifest.to_string()).unwrap(), c);
    }

    #[test]
    fn short_forms() {
        assert_eq!(parse_triple("(2,4,4)").unwrap(), Triple { d: 2, p: 4.0, q: 4.0 });
        assert!(parse_triple("1,6").is_err());
        assert_eq!(parse_quantity("q_mitigated(0.75)").unwrap(), Quantity::QMitigated { alpha: 0.75 });
        assert_eq!(parse_quantity("q_modified(1, 8)").unwrap(), Quantity::QModified { alpha: 1.0, p: 8.0 });
        assert!(parse_quantity("q_flow(1)").is_err());
        assert!(parse_quantity("q_mitigated(0.75").is_err());
    }
}
