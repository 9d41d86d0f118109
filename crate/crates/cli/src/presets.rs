//! Built-in reference scenarios.

use std::fmt;

use routebargain_core::{instances, CostModel, Game, UserInput};

use crate::error::CliError;
use crate::scenario::Scenario;

pub const DEFAULT_HETERO_EPS: f64 = 0.05;
pub const DEFAULT_POA_N: usize = 5;
pub const DEFAULT_POA_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// Three users on M/M/1 links of capacity 20 and 10.
    NbsThreeUser,
    /// Two users for whom equilibrium and bargaining coincide.
    Hetero { eps: f64 },
    /// `n` identical users on a cheap-but-flat and a steep link.
    PoaGrowth { n: usize, eps: f64 },
    /// One user, two identical M/M/1 links.
    Symmetric,
}

pub const PRESET_NAMES: [&str; 4] = ["paper-nbs-3user", "paper-hetero", "paper-poa-growth", "symmetric"];

impl Preset {
    /// Parses `name` or `name(arg)`, e.g. `paper-hetero(0.02)`.
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let spec = spec.trim();
        let (name, arg) = match spec.split_once('(') {
            Some((name, rest)) => {
                let arg = rest
                    .strip_suffix(')')
                    .ok_or_else(|| CliError::validation("preset", format!("missing ')' in \"{spec}\"")))?;
                (name.trim(), Some(arg.trim()))
            }
            None => (spec, None),
        };
        let number = |what: &str| -> Result<Option<f64>, CliError> {
            arg.map(|a| {
                a.parse::<f64>()
                    .map_err(|_| CliError::validation(what, format!("\"{a}\" is not a number")))
            })
            .transpose()
        };
        let preset = match name {
            "paper-nbs-3user" | "symmetric" if arg.is_some() => {
                return Err(CliError::validation("preset", format!("{name} takes no argument")));
            }
            "paper-nbs-3user" => Preset::NbsThreeUser,
            "symmetric" => Preset::Symmetric,
            "paper-hetero" => Preset::Hetero {
                eps: number("eps")?.unwrap_or(DEFAULT_HETERO_EPS),
            },
            "paper-poa-growth" => Preset::PoaGrowth {
                n: number("N")?.map_or(Ok(DEFAULT_POA_N), as_count)?,
                eps: DEFAULT_POA_EPS,
            },
            other => {
                return Err(CliError::validation(
                    "preset",
                    format!("unknown preset \"{other}\" (known: {})", PRESET_NAMES.join(", ")),
                ));
            }
        };
        preset.check()?;
        Ok(preset)
    }

    /// Names of the parameters `with_param` accepts.
    pub fn parameters(&self) -> &'static [&'static str] {
        match self {
            Preset::Hetero { .. } => &["eps", "demand_scale"],
            Preset::PoaGrowth { .. } => &["N", "eps", "demand_scale"],
            Preset::NbsThreeUser | Preset::Symmetric => &["demand_scale"],
        }
    }

    /// Sets one of the preset's own parameters. `demand_scale` is handled
    /// on the built scenario instead.
    pub fn with_param(self, name: &str, value: f64) -> Result<Self, CliError> {
        let preset = match (self, name) {
            (Preset::Hetero { .. }, "eps") => Preset::Hetero { eps: value },
            (Preset::PoaGrowth { eps, .. }, "N") => Preset::PoaGrowth {
                n: as_count(value)?,
                eps,
            },
            (Preset::PoaGrowth { n, .. }, "eps") => Preset::PoaGrowth { n, eps: value },
            _ => {
                return Err(CliError::validation(
                    "param",
                    format!("{self} has no parameter \"{name}\" (has: {})", self.parameters().join(", ")),
                ));
            }
        };
        preset.check()?;
        Ok(preset)
    }

    fn check(&self) -> Result<(), CliError> {
        match *self {
            Preset::Hetero { eps } if !(eps > 0.0 && eps < 0.1) => {
                Err(CliError::validation("eps", format!("must lie in (0, 0.1), got {eps}")))
            }
            Preset::PoaGrowth { n, .. } if n < 1 => Err(CliError::validation("N", "must be at least 1")),
            Preset::PoaGrowth { eps, .. } if !(eps.is_finite() && eps > 0.0) => {
                Err(CliError::validation("eps", format!("must be positive, got {eps}")))
            }
            _ => Ok(()),
        }
    }

    pub fn game(&self) -> Result<Game, CliError> {
        let game = match *self {
            Preset::NbsThreeUser => instances::nbs_three_user(),
            Preset::Hetero { eps } => instances::heterogeneous_pair(eps),
            Preset::PoaGrowth { n, eps } => instances::high_poa(n, eps),
            Preset::Symmetric => Game::new(
                vec![None, None],
                vec![UserInput::new(1.0, vec![CostModel::mm1(2.0), CostModel::mm1(2.0)])],
            ),
        };
        game.map_err(|e| CliError::validation("game", e.to_string()))
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        Ok(Scenario::from_game(self.to_string(), self.game()?))
    }
}

fn as_count(value: f64) -> Result<usize, CliError> {
    if value.fract() != 0.0 || !(1.0..=1e6).contains(&value) {
        return Err(CliError::validation("N", format!("must be a positive integer, got {value}")));
    }
    Ok(value as usize)
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::NbsThreeUser => write!(f, "paper-nbs-3user"),
            Preset::Hetero { eps } => write!(f, "paper-hetero({eps})"),
            Preset::PoaGrowth { n, eps } if *eps == DEFAULT_POA_EPS => write!(f, "paper-poa-growth({n})"),
            Preset::PoaGrowth { n, eps } => write!(f, "paper-poa-growth({n}, eps={eps})"),
            Preset::Symmetric => write!(f, "symmetric"),
        }
    }
}
