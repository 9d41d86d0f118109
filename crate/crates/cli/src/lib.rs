//! Command-line driver: scenario files, reference presets, sweeps and
//! machine-readable results.

pub mod error;
pub mod golden;
pub mod presets;
pub mod record;
pub mod run;
pub mod scenario;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

pub use error::CliError;
pub use presets::Preset;
pub use record::ResultRecord;
pub use run::{Command, Settings, Target};
pub use scenario::{parse_cost, parse_scenario, Scenario};
pub use sweep::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    /// One JSON object per line.
    #[default]
    Record,
    /// CSV: prices for nep/opt/nbs/metrics/sweep, checks for paper-examples.
    Table,
}

/// Equilibria, optima and bargaining outcomes of routing games on parallel links.
#[derive(Debug, Parser)]
#[command(name = "routebargain", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    /// Preset name or scenario file, and for sweeps NAME=START..END[:STEP].
    pub targets: Vec<String>,

    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,

    /// Built-in scenario: paper-nbs-3user, paper-hetero[(eps)],
    /// paper-poa-growth[(N)] or symmetric.
    #[arg(long)]
    pub preset: Option<String>,

    /// Sweep parameter, NAME=START..END[:STEP].
    #[arg(long)]
    pub param: Option<String>,

    /// KKT tolerance.
    #[arg(long)]
    pub tol: Option<f64>,

    /// Best-response sweeps before giving up.
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,

    /// Seed for the bargaining restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write results here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Record)]
    pub format: Format,
}

/// What a run produced. `failure` is set when the output is complete but
/// the run still counts as failed, such as a failed golden check.
#[derive(Debug)]
pub struct Report {
    pub output: String,
    pub failure: Option<CliError>,
}

fn is_grid(token: &str) -> bool {
    token.contains('=') && token.contains("..")
}

fn resolve(cli: &Cli) -> Result<(Option<Target>, Option<Grid>), CliError> {
    let mut target = None;
    let mut grid = None;
    let mut set_target = |t: Target| {
        if target.replace(t).is_some() {
            return Err(CliError::Usage("more than one scenario or preset given".into()));
        }
        Ok(())
    };
    if let Some(path) = &cli.scenario {
        set_target(Target::Scenario(scenario::load_scenario(path)?))?;
    }
    if let Some(name) = &cli.preset {
        set_target(Target::Preset(Preset::parse(name)?))?;
    }
    let mut grid_specs: Vec<&str> = cli.param.iter().map(String::as_str).collect();
    for token in &cli.targets {
        if is_grid(token) {
            grid_specs.push(token);
        } else if token.ends_with(".toml") || Path::new(token).is_file() {
            set_target(Target::Scenario(scenario::load_scenario(Path::new(token))?))?;
        } else {
            set_target(Target::Preset(Preset::parse(token)?))?;
        }
    }
    match grid_specs.as_slice() {
        [] => {}
        [spec] => grid = Some(Grid::parse(spec)?),
        _ => return Err(CliError::Usage("sweeps vary exactly one parameter".into())),
    }
    Ok((target, grid))
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

fn render(records: &[ResultRecord], command: Command, format: Format) -> String {
    match format {
        Format::Record => records.iter().map(|r| r.to_json() + "\n").collect(),
        Format::Table if command == Command::PaperExamples => sweep::check_table(records),
        Format::Table => sweep::price_table(records),
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::validation("tol", format!("must be positive, got {t}")));
        }
    }
    if cli.max_iters == Some(0) {
        return Err(CliError::validation("max-iters", "must be at least 1"));
    }
    let settings = Settings {
        tol: cli.tol,
        max_iters: cli.max_iters,
        seed: cli.seed,
    };
    let (target, grid) = resolve(cli)?;
    if grid.is_some() && cli.command != Command::Sweep {
        return Err(CliError::Usage(format!("{} takes no sweep parameter", cli.command.name())));
    }

    let (records, failure) = match cli.command {
        Command::PaperExamples => {
            if target.is_some() {
                return Err(CliError::Usage("paper-examples runs the built-in presets only".into()));
            }
            let records = thread_pool(cli.jobs)?.install(|| run::paper_examples(&settings))?;
            let total: usize = records.iter().map(|r| r.checks.len()).sum();
            let failed = records.iter().flat_map(|r| &r.checks).filter(|c| !c.pass).count();
            let failure = (failed > 0).then_some(CliError::ChecksFailed { failed, total });
            (records, failure)
        }
        Command::Sweep => {
            let target = target.ok_or_else(|| CliError::Usage("sweep needs a preset or scenario".into()))?;
            let grid = grid.ok_or_else(|| CliError::Usage("sweep needs NAME=START..END[:STEP]".into()))?;
            let records = thread_pool(cli.jobs)?.install(|| run::sweep(&target, &grid, &settings))?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            let failure = (failed > 0).then_some(CliError::SweepFailed {
                failed,
                total: records.len(),
            });
            (records, failure)
        }
        command => {
            let target = target
                .ok_or_else(|| CliError::Usage(format!("{} needs a preset or scenario", command.name())))?;
            let scenario = target.scenario()?;
            (vec![run::solve(command, &scenario, &settings)?], None)
        }
    };
    Ok(Report {
        output: render(&records, cli.command, cli.format),
        failure,
    })
}
