//! Scenario files: TOML with a small cost-model language.
//!
//! ```toml
//! name = "two links"
//! weights = [1, 3]            # optional, normalized on load
//!
//! links = [{ capacity = 20 }, {}]
//!
//! [[users]]
//! demand = 0.5
//! costs = ["mm1(20)", "linear(1, 0.5) * 2"]
//!
//! [solver]                    # optional
//! tol_kkt = 1e-8
//! max_iters = 5000
//! epsilon_rule = "half-surplus"   # or a positive number
//! ```

use std::path::Path;

use routebargain_core::{CostModel, EpsilonRule, Game, UserInput};
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    links: Vec<RawLink>,
    users: Vec<RawUser>,
    weights: Option<Vec<f64>>,
    solver: Option<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    capacity: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    demand: f64,
    costs: Vec<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol_kkt: Option<f64>,
    max_iters: Option<usize>,
    epsilon_rule: Option<RawEpsilon>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawEpsilon {
    Fixed(f64),
    Named(String),
}

/// Solver settings a scenario may override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverOverrides {
    pub tol_kkt: Option<f64>,
    pub max_iters: Option<usize>,
    pub epsilon_rule: Option<EpsilonRule>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Capacities as written, in file order.
    pub capacities: Vec<Option<f64>>,
    pub users: Vec<UserInput>,
    /// Normalized to sum to one.
    pub weights: Option<Vec<f64>>,
    pub solver: SolverOverrides,
    pub game: Game,
}

impl Scenario {
    /// Wraps an already built game, e.g. one of the reference instances.
    pub fn from_game(name: impl Into<String>, game: Game) -> Self {
        let capacities = game.links().iter().map(|l| l.capacity).collect();
        let users = game
            .users()
            .iter()
            .map(|u| UserInput::new(u.demand, u.cost_models.clone()))
            .collect();
        Self {
            name: name.into(),
            capacities,
            users,
            weights: None,
            solver: SolverOverrides::default(),
            game,
        }
    }

    /// Rebuilds the scenario with every demand multiplied by `factor`.
    pub fn scale_demands(&self, factor: f64) -> Result<Self, CliError> {
        let users: Vec<UserInput> = self
            .users
            .iter()
            .map(|u| UserInput::new(u.demand * factor, u.cost_models.clone()))
            .collect();
        let game = Game::new(self.capacities.clone(), users.clone())
            .map_err(|e| CliError::validation("demand_scale", e.to_string()))?;
        Ok(Self {
            users,
            game,
            ..self.clone()
        })
    }
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| CliError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;

    if raw.links.is_empty() {
        return Err(CliError::validation("links", "at least one link is required"));
    }
    if raw.users.is_empty() {
        return Err(CliError::validation("users", "at least one user is required"));
    }
    let mut capacities = Vec::with_capacity(raw.links.len());
    for (l, link) in raw.links.iter().enumerate() {
        if let Some(c) = link.capacity {
            if !(c.is_finite() && c > 0.0) {
                return Err(CliError::validation(format!("links[{l}].capacity"), format!("must be positive, got {c}")));
            }
        }
        capacities.push(link.capacity);
    }

    let mut users = Vec::with_capacity(raw.users.len());
    for (i, u) in raw.users.iter().enumerate() {
        if !(u.demand.is_finite() && u.demand > 0.0) {
            return Err(CliError::validation(format!("users[{i}].demand"), format!("must be positive, got {}", u.demand)));
        }
        if u.costs.len() != capacities.len() {
            return Err(CliError::validation(
                format!("users[{i}].costs"),
                format!("expected one cost model per link ({}), got {}", capacities.len(), u.costs.len()),
            ));
        }
        let mut models = Vec::with_capacity(u.costs.len());
        for (l, spec) in u.costs.iter().enumerate() {
            let model = parse_cost(spec.get_ref()).map_err(|message| CliError::Parse {
                line: line_of(text, spec.span().start),
                message,
            })?;
            model
                .validate()
                .map_err(|reason| CliError::validation(format!("users[{i}].costs[{l}]"), reason))?;
            models.push(model);
        }
        users.push(UserInput::new(u.demand, models));
    }

    let weights = match raw.weights {
        None => None,
        Some(w) => {
            
            if w.len() != users.len() {
                return Err(CliError::validation("weights", format!("expected {} weights, got {}", users.len(), w.len())));
            }
            if w.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(CliError::validation("weights", "weights must be positive"));
            }
            let sum: f64 = w.iter().sum();
            Some(w.iter().map(|a| a / sum).collect())
        }
    };

    let mut solver = SolverOverrides::default();
    if let Some(s) = raw.solver {
        if let Some(t) = s.tol_kkt {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::validation("solver.tol_kkt", format!("must be positive, got {t}")));
            }
            solver.tol_kkt = Some(t);
        }
        if let Some(k) = s.max_iters {
            if k == 0 {
                return Err(CliError::validation("solver.max_iters", "must be at least 1"));
            }
            solver.max_iters = Some(k);
        }
        if let Some(e) = s.epsilon_rule {
            solver.epsilon_rule = Some(match e {
                RawEpsilon::Fixed(x) if x.is_finite() && x > 0.0 => EpsilonRule::Fixed(x),
                RawEpsilon::Fixed(x) => {
                    return Err(CliError::validation("solver.epsilon_rule", format!("must be positive, got {x}")));
                }
                RawEpsilon::Named(n) if n == "half-surplus" => EpsilonRule::HalfSurplusPerUser,
                RawEpsilon::Named(n) => {
                    return Err(CliError::validation(
                        "solver.epsilon_rule",
                        format!("expected \"half-surplus\" or a number, got \"{n}\""),
                    ));
                }
            });
        }
    }

    let game = Game::new(capacities.clone(), users.clone()).map_err(|e| CliError::validation("game", e.to_string()))?;
    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| "scenario".into()),
        capacities,
        users,
        weights,
        solver,
        game,
    })
}

/// Parses `mm1(c)`, `linear(a, b)` or `power(a, b, d)`, optionally followed
/// by `* w`.
pub fn parse_cost(spec: &str) -> Result<CostModel, String> {
    let (body, weight) = match spec.split_once('*') {
        Some((b, w)) => {
            let w = w.trim();
            let w: f64 = w.parse().map_err(|_| format!("weight \"{w}\" is not a number"))?;
            (b.trim(), Some(w))
        }
        None => (spec.trim(), None),
    };
    let open = body.find('(').ok_or_else(|| format!("expected form(args) in \"{spec}\""))?;
    if !body.ends_with(')') {
        return Err(format!("missing closing parenthesis in \"{spec}\""));
    }
    let name = body[..open].trim().to_ascii_lowercase();
    let args = body[open + 1..body.len() - 1]
        .split(',')
        .map(|a| {
            let a = a.trim();
            a.parse::<f64>().map_err(|_| format!("argument \"{a}\" of {name} is not a number"))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("{name} takes {n} argument(s), got {}", args.len()))
        }
    };
    let model = match name.as_str() {
        "mm1" => {
            arity(1)?;
            CostModel::mm1(args[0])
        }
        "linear" => {
            arity(2)?;
            CostModel::linear(args[0], args[1])
        }
        "power" => {
            arity(3)?;
            CostModel::power(args[0], args[1], args[2])
        }
        other => return Err(format!("unknown cost form \"{other}\" (expected mm1, linear or power)")),
    };
    Ok(match weight {
        Some(w) => model.weighted(w),
        None => model,
    })
}
