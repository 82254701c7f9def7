use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use strichartz_cli::config::{parse_quantity, parse_triple};
use strichartz_cli::{run, CheckName, CliError, Command, Overrides, RunConfig, EXIT_INVALID};
use strichartz_core::monotone::{DataSource, Quantity, Triple};

#[derive(Parser, Debug)]
#[command(name = "strichartz", version, about = "Sharp Strichartz constants and monotone heat-flow quantities")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Measure the sharp constants on Gaussians and compare with their
    /// closed forms.
    Constants(Common),
    /// Evaluate a monotone quantity over a time grid.
    Scan {
        #[command(flatten)]
        common: Common,
        /// q_flow, q_mehler, q_mitigated(alpha), q_modified(alpha,p),
        /// lambda_heat or lambda_mehler.
        #[arg(long, value_parser = parse_quantity)]
        quantity: Option<Quantity>,
    },
    /// Run one identity check.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        check: Option<CheckName>,
        /// Time of the rescaling identity.
        #[arg(long)]
        t: Option<f64>,
        /// Group angles or Haar samples.
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run config, or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random data and Haar samples.
    #[arg(long)]
    seed: Option<u64>,
    /// Points per axis, a power of two.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Half-width of the box.
    #[arg(long)]
    grid_l: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Relative tolerance; the default depends on the command.
    #[arg(long)]
    tolerance: Option<f64>,
    /// gaussian, two_bump, random_bump, random_bump(seed) or file:<path>.
    #[arg(long)]
    data: Option<DataSource>,
    /// Exponents d,p,q.
    #[arg(long, value_parser = parse_triple)]
    triple: Option<Triple>,
}

impl Common {
    fn load(&self, extra: Overrides) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        config.apply(Overrides {
            out: self.out.clone(),
            seed: self.seed,
            grid_n: self.grid_n,
            grid_l: self.grid_l,
            threads: self.threads,
            tolerance: self.tolerance,
            data: self.data.clone(),
            triple: self.triple,
            ..extra
        });
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Sub::Constants(common) => common.load(Overrides::default()).and_then(|c| run(Command::Constants, c)),
        Sub::Scan { common, quantity } => common
            .load(Overrides {
                quantity,
                ..Default::default()
            })
            .and_then(|c| run(Command::Scan, c)),
        Sub::Check {
            common,
            check,
            t,
            samples,
        } => common
            .load(Overrides {
                check,
                t,
                samples,
                ..Default::default()
            })
            .and_then(|c| run(Command::Check, c)),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("strichartz: {e}");
            ExitCode::from(EXIT_INVALID as u8)
        }
    }
}
