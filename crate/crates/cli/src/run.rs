//! Command execution.

use clap::ValueEnum;
use log::{info, warn};
use rayon::prelude::*;
use routebargain_core::{
    nash_equilibrium, social_optimum, BargainOptions, PriceReport, SolveCache, SolverOptions,
};

use crate::error::CliError;
use crate::golden;
use crate::presets::Preset;
use crate::record::{BargainRecord, Parameter, ResultRecord, SolveRecord};
use crate::scenario::Scenario;
use crate::sweep::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Nash equilibrium profile and costs.
    Nep,
    /// Social optimum (weighted when the scenario gives weights).
    Opt,
    /// Bargaining outcome together with its disagreement point.
    Nbs,
    /// Everything above plus the efficiency ratios.
    Metrics,
    /// Runs the reference presets and checks their known values.
    PaperExamples,
    /// Metrics over a one-parameter grid.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Nep => "nep",
            Command::Opt => "opt",
            Command::Nbs => "nbs",
            Command::Metrics => "metrics",
            Command::PaperExamples => "paper-examples",
            Command::Sweep => "sweep",
        }
    }
}

/// Command-line overrides; they win over a scenario's `[solver]` table.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Settings {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: u64,
}

impl Settings {
    pub fn options(&self, scenario: &Scenario) -> (SolverOptions, BargainOptions) {
        let mut solver = SolverOptions::default();
        let mut bargain = BargainOptions {
            seed: self.seed,
            ..BargainOptions::default()
        };
        if let Some(t) = self.tol.or(scenario.solver.tol_kkt) {
            solver.tol_kkt = t;
        }
        if let Some(k) = self.max_iters.or(scenario.solver.max_iters) {
            solver.max_iters = k;
        }
        if let Some(e) = scenario.solver.epsilon_rule {
            bargain.epsilon = e;
        }
        (solver, bargain)
    }
}

/// What a run is about: a preset or a scenario file.
#[derive(Debug, Clone)]
pub enum Target {
    Preset(Preset),
    Scenario(Scenario),
}

impl Target {
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        match self {
            Target::Preset(p) => p.scenario(),
            Target::Scenario(s) => Ok(s.clone()),
        }
    }

    /// The scenario with one parameter set to `value`.
    pub fn instantiate(&self, name: &str, value: f64) -> Result<Scenario, CliError> {
        let mut scenario = if name == "demand_scale" {
            if !(value.is_finite() && value > 0.0) {
                return Err(CliError::validation("demand_scale", format!("must be positive, got {value}")));
            }
            self.scenario()?.scale_demands(value)?
        } else {
            match self {
                Target::Preset(p) => p.with_param(name, value)?.scenario()?,
                Target::Scenario(_) => {
                    return Err(CliError::validation(
                        "param",
                        format!("scenario files only sweep demand_scale, not \"{name}\""),
                    ));
                }
            }
        };
        if name == "demand_scale" {
            scenario.name = format!("{} (demand_scale={value})", scenario.name);
        }
        Ok(scenario)
    }
}

/// Runs `nep`, `opt`, `nbs` or `metrics` on one scenario.
pub fn solve(command: Command, scenario: &Scenario, settings: &Settings) -> Result<ResultRecord, CliError> {
    let game = &scenario.game;
    let (solver, bargain) = settings.options(scenario);
    let weights = scenario.weights.as_deref();
    let mut record = ResultRecord::new(&scenario.name, command.name(), game);
    info!("{}: {} on {} users, {} links", scenario.name, command.name(), game.n_users(), game.n_links());
    match command {
        Command::Nep => {
            let nep = nash_equilibrium(game, &solver)?;
            record.nep = Some(SolveRecord::new(game, &nep));
        }
        Command::Opt => {
            let opt = social_optimum(game, weights, &solver)?;
            record.optimum = Some(SolveRecord::new(game, &opt));
        }
        Command::Nbs | Command::Metrics | Command::Sweep => {
            let cache = SolveCache::compute(game, &solver, &bargain)?;
            record.nep = Some(SolveRecord::new(game, &cache.base.nep));
            record.optimum = Some(SolveRecord::new(game, &cache.base.optimum));
            record.bargained = Some(BargainRecord::from(&cache.outcome));
            if command != Command::Nbs {
                record.prices = Some(PriceReport::compute(game, &cache, weights, &solver)?);
            }
        }
        Command::PaperExamples => unreachable!("paper-examples runs presets, not one scenario"),
    }
    Ok(record)
}

/// Solves every grid point; the result keeps grid order. Solver failures
/// become records with `error` set so the rest of the sweep survives.
pub fn sweep(target: &Target, grid: &Grid, settings: &Settings) -> Result<Vec<ResultRecord>, CliError> {
    // Build every point first so bad input fails before any solving.
    let scenarios = grid
        .values
        .iter()
        .map(|&v| target.instantiate(&grid.name, v).map(|s| (v, s)))
        .collect::<Result<Vec<_>, _>>()?;
    let records = scenarios
        .par_iter()
        .map(|(value, scenario)| {
            let parameter = Parameter {
                name: grid.name.clone(),
                value: *value,
            };
            match solve(Command::Sweep, scenario, settings) {
                Ok(mut r) => {
                    r.parameter = Some(parameter);
                    r
                }
                Err(CliError::Solver(e)) => {
                    warn!("{}: {e}", scenario.name);
                    let mut r = ResultRecord::new(&scenario.name, Command::Sweep.name(), &scenario.game);
                    r.parameter = Some(parameter);
                    r.error = Some(e.to_string());
                    r
                }
                Err(e) => unreachable!("inputs were validated up front: {e}"),
            }
        })
        .collect();
    Ok(records)
}

/// Solves the reference presets and attaches their checks.
pub fn paper_examples(settings: &Settings) -> Result<Vec<ResultRecord>, CliError> {
    let presets = golden::presets();
    let mut records = presets
        .par_iter()
        .map(|p| {
            let scenario = p.scenario()?;
            let mut record = match solve(Command::Metrics, &scenario, settings) {
                Ok(r) => r,
                Err(CliError::Solver(e)) => {
                    let mut r = ResultRecord::new(&scenario.name, Command::Metrics.name(), &scenario.game);
                    r.error = Some(e.to_string());
                    r
                }
                Err(e) => return Err(e),
            };
            record.command = Command::PaperExamples.name().into();
            record.checks = golden::checks(p, &record);
            Ok(record)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    golden::cross_checks(&presets, &mut records);
    Ok(records)
}
