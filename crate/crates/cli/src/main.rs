//! `growth-centers` command-line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommandKind, RunConfig};
use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "growth-centers", version, about = "Simulate and analyse coupled autocatalytic growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Source {
    /// System definition JSON.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Built-in scenario name (see `scenario --list`).
    #[arg(long)]
    scenario: Option<String>,
    /// Integration step in months.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon in months.
    #[arg(long)]
    t_end: Option<f64>,
    /// Seed for random initial states and seeded scenarios.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct Out {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Solver {
    /// Power-iteration tolerance.
    #[arg(long, default_value_t = config::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = config::DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Debug, Args)]
struct Spatial {
    /// Layout CSV (`id,x_km,y_km,area_km2`) in unit order.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Activity level for the threshold-crossing map.
    #[arg(long, default_value_t = config::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = growth_centers::spatial::DEFAULT_BAND_WIDTH_KM)]
    band_width_km: f64,
}

#[derive(Debug, Args)]
struct Panel {
    /// County attributes CSV.
    #[arg(long)]
    attributes: PathBuf,
    /// Long-format activity CSV.
    #[arg(long)]
    activity: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a system: trajectory and growth-rate CSVs plus charts.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Growth-rate window in months (default 1).
        #[arg(long)]
        window: Option<f64>,
        #[command(flatten)]
        out: Out,
    },
    /// Steady shares and asymptotic growth rate.
    SteadyState {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        out: Out,
    },
    /// Steady state, J-curve, dispersion, histogram and, with a layout, spatial maps.
    Report {
        #[command(flatten)]
        source: Source,
        /// Analyse this trajectory CSV instead of simulating.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        solver: Solver,
        #[command(flatten)]
        spatial: Spatial,
        /// Histogram bins.
        #[arg(long, default_value_t = config::DEFAULT_BINS)]
        bins: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Moran's index per distance band.
    Moran {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        spatial: Spatial,
        /// Snapshot time; defaults to the final sample.
        #[arg(long)]
        at: Option<f64>,
        /// Random relabellings for a permutation null (0 = none).
        #[arg(long, default_value_t = 0)]
        shuffles: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Trough, recovery rate and logistic extrapolation gap of the average.
    Jcurve {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Export a built-in scenario as a system JSON (and layout CSV).
    Scenario {
        #[arg(long, required_unless_present = "list")]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the scenario names and exit.
        #[arg(long)]
        list: bool,
        #[arg(long, required_unless_present = "list")]
        out: Option<PathBuf>,
    },
    /// Validate a county panel and write it back normalized.
    Ingest {
        #[command(flatten)]
        panel: Panel,
        #[command(flatten)]
        out: Out,
    },
    /// Yearly correlations of activity with education and density.
    Correlate {
        #[command(flatten)]
        panel: Panel,
        #[command(flatten)]
        out: Out,
    },
    /// Repeat the run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Write to this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_source(mut c: RunConfig, s: Source) -> RunConfig {
    c.system = s.system;
    c.scenario = s.scenario;
    c.dt = s.dt;
    c.t_end = s.t_end;
    c.seed = s.seed;
    c
}

fn with_spatial(mut c: RunConfig, s: Spatial) -> RunConfig {
    c.layout = s.layout;
    c.threshold = s.threshold;
    c.band_width_km = s.band_width_km;
    c
}

fn with_panel(mut c: RunConfig, p: Panel) -> RunConfig {
    c.attributes = Some(p.attributes);
    c.activity = Some(p.activity);
    c
}

/// `None` when there is nothing to run (`scenario --list`).
fn to_config(command: Command) -> Result<Option<RunConfig>> {
    let config = match command {
        Command::Simulate { source, window, out } => {
            let mut c = with_source(RunConfig::new(CommandKind::Simulate, out.out), source);
            c.window = window;
            c
        }
        Command::SteadyState { source, solver, out } => {
            let mut c = with_source(RunConfig::new(CommandKind::SteadyState, out.out), source);
            c.tol = solver.tol;
            c.max_iter = solver.max_iter;
            c
        }
        Command::Report { source, trajectory, solver, spatial, bins, out } => {
            let mut c = with_spatial(with_source(RunConfig::new(CommandKind::Report, out.out), source), spatial);
            c.trajectory = trajectory;
            c.tol = solver.tol;
            c.max_iter = solver.max_iter;
            c.bins = bins;
            c
        }
        Command::Moran { source, trajectory, spatial, at, shuffles, out } => {
            let mut c = with_spatial(with_source(RunConfig::new(CommandKind::Moran, out.out), source), spatial);
            c.trajectory = trajectory;
            c.at = at;
            c.shuffles = shuffles;
            c
        }
        Command::Jcurve { source, trajectory, out } => {
            let mut c = with_source(RunConfig::new(CommandKind::Jcurve, out.out), source);
            c.trajectory = trajectory;
            c
        }
        Command::Scenario { list: true, .. } => {
            for name in growth_centers::scenarios::SCENARIO_NAMES {
                println!("{name}");
            }
            return Ok(None);
        }
        Command::Scenario { scenario, seed, out, .. } => {
            let out = out.ok_or_else(|| CliError::Input("--out is required".into()))?;
            let mut c = RunConfig::new(CommandKind::Scenario, out);
            c.scenario = scenario;
            c.seed = seed;
            c
        }
        Command::Ingest { panel, out } => with_panel(RunConfig::new(CommandKind::Ingest, out.out), panel),
        Command::Correlate { panel, out } => with_panel(RunConfig::new(CommandKind::Correlate, out.out), panel),
        Command::Rerun { manifest, out } => {
            let mut c = output::Manifest::load(&manifest)?.config;
            if let Some(out) = out {
                c.out = out;
            }
            c
        }
    };
    Ok(Some(config))
}

fn execute(command: Command) -> Result<()> {
    let Some(mut config) = to_config(command)? else {
        return Ok(());
    };
    let (artifacts, seed) = commands::run(&mut config)?;
    for notice in artifacts.notices() {
        eprintln!("note: {notice}");
    }
    for path in output::commit(&config, seed, artifacts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
