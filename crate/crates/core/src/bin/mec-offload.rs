use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use mec_offload::experiment::{
    self, presets, ExperimentSpec, InterferenceMode, ResultRow, Sweep,
};
use mec_offload::{Error, ScenarioConfig, SchemeId};

#[derive(Parser)]
#[command(version, about = "Multi-cell MEC task offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an arbitrary experiment from a scenario config.
    Run(Common),
    /// All schemes including exhaustive search on the small network.
    Fig2(Common),
    /// Utility against the number of users per cell.
    Fig3 {
        #[command(flatten)]
        common: Common,
        /// Alternate 500/2000 Megacycle workloads across cells.
        #[arg(long)]
        non_uniform: bool,
    },
    /// Utility against task workload or input size.
    Fig4 {
        #[command(flatten)]
        common: Common,
        /// Sweep the input size instead of the workload.
        #[arg(long)]
        input: bool,
    },
    /// Delay and energy against the time preference.
    Fig5 {
        #[command(flatten)]
        common: Common,
        /// Total users, spread evenly over the cells.
        #[arg(long, default_value_t = 14)]
        users: usize,
    },
    /// Approximated versus exact interference across power budgets.
    Fig6(Common),
    /// Single-threaded runtime comparison.
    Table1(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON); replaces the preset scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for the drops.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drops: Option<usize>,
    /// Output CSV; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated scheme names, e.g. `hJTORA,DORA`.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// approx, exact or both.
    #[arg(long)]
    interference: Option<String>,
    /// Sweep as `name=v1,v2,...`; names: users_per_cell, c_u, d_u, beta_t, P_u_dbm.
    #[arg(long)]
    sweep: Option<String>,
    /// Local-search improvement parameter.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Errors in user input map to exit code 1, everything else to 2.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => Failure::Config(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

fn configure(mut spec: ExperimentSpec, c: &Common) -> Result<ExperimentSpec, Failure> {
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Config)?;
        let cfg = ScenarioConfig::from_json(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Failure::Config)?;
        spec.master_seed = cfg.seed;
        spec.scenario = cfg;
    }
    if let Some(seed) = c.seed {
        spec.master_seed = seed;
    }
    if let Some(drops) = c.drops {
        spec.drops = drops;
    }
    if let Some(names) = &c.schemes {
        spec.schemes = names
            .iter()
            .map(|n| n.parse::<SchemeId>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(mode) = &c.interference {
        spec.interference = mode.parse::<InterferenceMode>()?;
    }
    if let Some(sweep) = &c.sweep {
        spec.sweep = Some(sweep.parse::<Sweep>()?);
    }
    if let Some(eps) = c.eps {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Failure::Config(anyhow::anyhow!("--eps must be positive, got {eps}")));
        }
        spec.params.search.eps = eps;
    }
    if let Some(threads) = c.threads {
        spec.threads = Some(threads.max(1));
    }
    spec.sweep_points()?;
    Ok(spec)
}

fn write_output(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_rows(spec: &ExperimentSpec, out: Option<&PathBuf>) -> Result<(), Failure> {
    info!(
        "{} drops x {} sweep points, schemes {:?}",
        spec.drops,
        spec.sweep.as_ref().map_or(1, |s| s.values.len()),
        spec.schemes
    );
    let rows: Vec<ResultRow> = experiment::run(spec)?;
    write_output(&experiment::render_csv(&rows), out)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(c) => {
            let spec = ExperimentSpec::new(ScenarioConfig::default(), vec![SchemeId::Hjtora], 100);
            let spec = configure(spec, &c)?;
            run_rows(&spec, c.out.as_ref())
        }
        Command::Fig2(c) => run_rows(&configure(presets::fig2(), &c)?, c.out.as_ref()),
        Command::Fig3 { common, non_uniform } => {
            run_rows(&configure(presets::fig3(non_uniform), &common)?, common.out.as_ref())
        }
        Command::Fig4 { common, input } => {
            let spec = if input {
                presets::fig4_input()
            } else {
                presets::fig4_workload()
            };
            run_rows(&configure(spec, &common)?, common.out.as_ref())
        }
        Command::Fig5 { common, users } => {
            run_rows(&configure(presets::fig5(users), &common)?, common.out.as_ref())
        }
        Command::Fig6(c) => {
            let spec = configure(presets::fig6(), &c)?;
            let rows = experiment::fig6_gap(&spec)?;
            write_output(&experiment::render_gap_csv(&rows), c.out.as_ref())
        }
        Command::Table1(c) => run_rows(&configure(presets::table1(), &c)?, c.out.as_ref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
