//! Machine-readable results.

use routebargain_core::{
    BargainMethod, BargainOutcome, CostVector, Game, NbsCertainty, PriceReport, SolveReport, StrategyProfile,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Significant digits kept for every number written out.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<Parameter>,
    /// Links in solver order; flow columns follow this order.
    pub links: Vec<LinkRecord>,
    pub demands: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nep: Option<SolveRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<SolveRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bargained: Option<BargainRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<PriceReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    /// Set when the solve failed; the other sections are then partial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    /// 1-based position in the scenario.
    pub index: usize,
    pub capacity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub flows: Vec<Vec<f64>>,
    pub link_totals: Vec<f64>,
    pub costs: CostVector,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BargainRecord {
    pub flows: Vec<Vec<f64>>,
    pub link_totals: Vec<f64>,
    pub costs: CostVector,
    pub disagreement: Vec<f64>,
    pub nash_product: f64,
    pub method: BargainMethod,
    pub iterations: usize,
    pub certainty: Option<NbsCertainty>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl ResultRecord {
    pub fn new(scenario: &str, command: &str, game: &Game) -> Self {
        Self {
            scenario: scenario.to_string(),
            command: command.to_string(),
            parameter: None,
            links: game
                .links()
                .iter()
                .map(|l| LinkRecord {
                    index: l.index,
                    capacity: l.capacity,
                })
                .collect(),
            demands: game.demands(),
            nep: None,
            optimum: None,
            bargained: None,
            prices: None,
            checks: Vec::new(),
            error: None,
        }
    }

    /// True unless a solve failed or reported non-convergence.
    pub fn converged(&self) -> bool {
        self.error.is_none() && self.nep.iter().chain(&self.optimum).all(|s| s.converged)
    }

    /// Checks every flow matrix in the record against `game`.
    pub fn validate_against(&self, game: &Game) -> Result<(), CliError> {
        let matrices = [
            ("nep", self.nep.as_ref().map(|s| &s.flows)),
            ("optimum", self.optimum.as_ref().map(|s| &s.flows)),
            ("bargained", self.bargained.as_ref().map(|s| &s.flows)),
        ];
        for (field, flows) in matrices {
            let Some(flows) = flows else { continue };
            if flows.len() != game.n_users() || flows.iter().any(|r| r.len() != game.n_links()) {
                return Err(CliError::validation(field, "flow matrix does not match the game's shape"));
            }
            StrategyProfile::from_rows(flows.clone())
                .validate(game)
                .map_err(|e| CliError::validation(field, e.to_string()))?;
        }
        Ok(())
    }

    /// Serializes to one line of JSON with rounded numbers.
    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("records serialize");
        round_numbers(&mut value);
        serde_json::to_string(&value).expect("values serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

impl SolveRecord {
    pub fn new(game: &Game, report: &SolveReport) -> Self {
        Self {
            flows: report.profile.rows(),
            link_totals: report.link_totals(),
            costs: game.evaluate_cost(&report.profile).unwrap_or_else(|_| CostVector {
                per_user: vec![f64::INFINITY; game.n_users()],
                system: f64::INFINITY,
            }),
            kkt_residual: report.kkt_residual,
            iterations: report.iterations,
            converged: report.converged,
        }
    }
}

impl From<&BargainOutcome> for BargainRecord {
    fn from(o: &BargainOutcome) -> Self {
        Self {
            flows: o.profile.rows(),
            link_totals: o.profile.link_totals(),
            costs: o.costs.clone(),
            disagreement: o.disagreement.per_user.clone(),
            nash_product: o.nash_product,
            method: o.method,
            iterations: o.iterations,
            certainty: o.certainty,
        }
    }
}

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn round_numbers(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_significant(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}
