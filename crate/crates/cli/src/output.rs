use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strichartz_core::GridSpec;

use crate::config::{Command, RunConfig};
use crate::{CliError, Outcome};

pub const MANIFEST_VERSION: u32 = 1;

/// Everything needed to repeat a run: the fully resolved config plus what
/// the run actually used. Passing the manifest back as `--config` replays
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub grids: Vec<GridSpec>,
    pub seed: u64,
    pub data_seed: Option<u64>,
    pub tolerance: f64,
    pub threads: usize,
    pub exit_code: i32,
    pub outputs: Vec<String>,
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename, so
/// readers never see a partial file.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, dir.join(name))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// `report.json`, `series.csv` for scans, and `manifest.json` last.
pub fn write_outputs(command: Command, config: &RunConfig, outcome: &Outcome) -> Result<(), CliError> {
    let dir = &config.out;
    fs::create_dir_all(dir)?;
    let mut outputs = vec!["report.json".to_string()];
    let report = serde_json::to_string_pretty(&outcome.report).expect("reports serialize");
    write_atomic(dir, "report.json", report.as_bytes())?;
    if let Some(csv) = &outcome.series_csv {
        write_atomic(dir, "series.csv", csv.as_bytes())?;
        outputs.push("series.csv".into());
    }
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: "strichartz".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: config.clone(),
        grids: outcome.grids.clone(),
        seed: config.seed,
        data_seed: outcome.data_seed,
        tolerance: config.tolerance(),
        threads: config.threads.unwrap_or_else(rayon::current_num_threads),
        exit_code: outcome.code,
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize");
    write_atomic(dir, "manifest.json", text.as_bytes())
}
