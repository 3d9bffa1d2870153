use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nccarq::experiments::{
    cmd_analytic, cmd_simulate, cmd_sweep, cmd_validate, Tolerances, EXIT_VALIDATION,
};
use nccarq::scenario::{load_scenario, parse_assignment, parse_values, Axis, Scenario, SweepSpec};
use nccarq::{Error, Result};

/// Analytical model and Monte Carlo simulator for network-coded cooperative
/// ARQ under correlated shadowing.
#[derive(Parser)]
#[command(name = "nccarq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical model, one CSV row.
    Analytic(Common),
    /// Monte Carlo simulation, one CSV row with standard errors.
    Simulate(Common),
    /// Consistency checks plus model-vs-simulator comparison; exits 4 on failure.
    Validate(Common),
    /// One row per axis value, analytic and simulated columns side by side.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// sigma, rho, n or mu.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Skip the simulator columns.
        #[arg(long)]
        analytic_only: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (flat key = value); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    /// Quadrature order.
    #[arg(long)]
    quadrature: Option<usize>,
    /// Simulator threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Override a scenario key, e.g. --set rho=0.9; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let base = match &self.config {
            Some(p) => load_scenario(p)?,
            None => Scenario::default(),
        };
        let mut overrides = self
            .overrides
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<Result<Vec<_>>>()?;
        let flags = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("rounds", self.rounds.map(|v| v.to_string())),
            ("quadrature", self.quadrature.map(|v| v.to_string())),
            ("workers", self.workers.map(|v| v.to_string())),
        ];
        overrides.extend(
            flags
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
        );
        let s = base.with_overrides(&overrides)?;
        s.validate()?;
        Ok(s)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => {
                Box::new(BufWriter::new(File::create(p).map_err(|e| {
                    Error::Io(format!("cannot create {}: {e}", p.display()))
                })?))
            }
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analytic(c) => {
            let s = c.scenario()?;
            cmd_analytic(&s, c.output()?)?;
        }
        Command::Simulate(c) => {
            let s = c.scenario()?;
            cmd_simulate(&s, c.output()?)?;
        }
        Command::Validate(c) => {
            let s = c.scenario()?;
            let report = cmd_validate(&s, &Tolerances::default())?;
            let mut out = c.output()?;
            out.write_all(report.render().as_bytes())?;
            out.flush()?;
            return Ok(report.passed());
        }
        Command::Sweep {
            common,
            axis,
            values,
            analytic_only,
        } => {
            let axis: Axis = axis.parse()?;
            let spec = SweepSpec::new(axis, parse_values(&values)?, common.scenario()?)?;
            cmd_sweep(&spec, !analytic_only, common.output()?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION as u8),
        Err(e) => {
            eprintln!("nccarq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
