//! Bargained strategy profiles with the Nash equilibrium as disagreement point.

mod exchange;
mod general;
mod two_user;

pub use exchange::{flow_exchange, ExchangeReport};
pub use general::nbs_general;
pub use two_user::{nbs_two_user, triangle_vertices};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CostVector, Game, Homogeneity, StrategyProfile, TOL_FEAS};
use crate::solvers::{nash_equilibrium, social_optimum, SolveReport, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BargainMethod {
    Proportional,
    FlowExchange,
    TwoUserClosedForm,
    IdenticalUsers,
    NashProductAscent,
    CoincidesWithNep,
}

/// How much trust a numerically found bargaining outcome deserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NbsCertainty {
    /// Every perturbed ascent converged to the same cost vector.
    MultiStartAgreement,
    /// The reported outcome comes from one run without corroboration.
    SingleRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BargainOutcome {
    pub profile: StrategyProfile,
    pub costs: CostVector,
    pub disagreement: CostVector,
    pub nash_product: f64,
    pub method: BargainMethod,
    /// Exchange events or ascent iterations, depending on the method.
    pub iterations: usize,
    pub certainty: Option<NbsCertainty>,
}

impl BargainOutcome {
    pub(crate) fn new(
        game: &Game,
        profile: StrategyProfile,
        disagreement: &CostVector,
        method: BargainMethod,
    ) -> Self {
        let costs = game.evaluate_unchecked(&profile);
        let nash_product = nash_product(&costs, disagreement);
        Self {
            profile,
            costs,
            disagreement: disagreement.clone(),
            nash_product,
            method,
            iterations: 0,
            certainty: None,
        }
    }

    /// `J_hat^i - J^i` per user.
    pub fn gains(&self) -> Vec<f64> {
        self.disagreement
            .per_user
            .iter()
            .zip(&self.costs.per_user)
            .map(|(d, c)| d - c)
            .collect()
    }
}

/// `prod_i (d_i - c_i)` when every factor is non-negative, zero otherwise.
pub fn nash_product(costs: &CostVector, disagreement: &CostVector) -> f64 {
    let mut product = 1.0;
    for (d, c) in disagreement.per_user.iter().zip(&costs.per_user) {
        let gain = d - c;
        if !(gain >= 0.0) {
            return 0.0;
        }
        product *= gain;
    }
    product
}

/// Equilibrium and optimum of one game, solved once and shared by every
/// bargaining and price computation.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub nep: SolveReport,
    pub nep_costs: CostVector,
    pub optimum: SolveReport,
}

impl Baseline {
    pub fn compute(game: &Game, opts: &SolverOptions) -> Result<Self> {
        let nep = nash_equilibrium(game, opts)?;
        let optimum = social_optimum(game, None, opts)?;
        Ok(Self::from_parts(game, nep, optimum))
    }

    pub fn from_parts(game: &Game, nep: SolveReport, optimum: SolveReport) -> Self {
        let nep_costs = game.evaluate_unchecked(&nep.profile);
        Self {
            nep,
            nep_costs,
            optimum,
        }
    }

    pub fn optimum_cost(&self) -> f64 {
        self.optimum.objective
    }

    /// Total surplus available to bargaining, `J_hat_sys - J*_sys`.
    pub fn surplus(&self) -> f64 {
        self.nep_costs.system - self.optimum.objective
    }

    pub fn price_of_anarchy(&self) -> f64 {
        self.nep_costs.system / self.optimum.objective
    }

    pub(crate) fn coincides(&self, game: &Game) -> BargainOutcome {
        let mut out = BargainOutcome::new(
            game,
            self.nep.profile.clone(),
            &self.nep_costs,
            BargainMethod::CoincidesWithNep,
        );
        out.nash_product = 0.0;
        out
    }
}

/// Per-user gain threshold used by [`flow_exchange`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    /// `(J_hat_sys - J*_sys) / (2N)`.
    HalfSurplusPerUser,
    Fixed(f64),
}

impl EpsilonRule {
    pub fn epsilon(&self, base: &Baseline, n_users: usize) -> f64 {
        match *self {
            EpsilonRule::HalfSurplusPerUser => base.surplus() / (2.0 * n_users as f64),
            EpsilonRule::Fixed(e) => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BargainOptions {
    pub epsilon: EpsilonRule,
    /// Perturbed restarts of the Nash-product ascent, on top of the given start.
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stationarity threshold on the projected gradient of the log product.
    pub tol_grad: f64,
}

impl Default for BargainOptions {
    fn default() -> Self {
        Self {
            epsilon: EpsilonRule::HalfSurplusPerUser,
            restarts: 5,
            seed: 0,
            max_iters: 50_000,
            tol_grad: 1e-8,
        }
    }
}

/// Every user ships its demand share `r^i / R` of each aggregate link flow.
pub fn proportional_profile(game: &Game, aggregate: &[f64]) -> Result<StrategyProfile> {
    if aggregate.len() != game.n_links() || aggregate.iter().any(|&f| !(f >= 0.0)) {
        return Err(Error::InfeasibleProfile("aggregate flows must be non-negative, one per link".into()));
    }
    let sum: f64 = aggregate.iter().sum();
    let total = game.total_demand();
    if (sum - total).abs() > TOL_FEAS * total.max(1.0) {
        return Err(Error::InfeasibleProfile(format!(
            "aggregate flows sum to {sum}, total demand is {total}"
        )));
    }
    Ok(crate::solvers::proportional_split(game, aggregate))
}

/// Bargaining outcome for users with equal demands and shared latencies:
/// the proportional split of the social optimum, `J*_sys / N` each.
pub fn nbs_identical(game: &Game, base: &Baseline) -> Result<BargainOutcome> {
    if !game.homogeneity().is_homogeneous() {
        return Err(Error::NotHomogeneous);
    }
    let r0 = game.users()[0].demand;
    if game.users().iter().any(|u| (u.demand - r0).abs() > 1e-12 * r0) {
        return Err(Error::NotIdentical);
    }
    let profile = proportional_profile(game, &base.optimum.link_totals())?;
    Ok(BargainOutcome::new(game, profile, &base.nep_costs, BargainMethod::IdenticalUsers))
}

/// Picks the strongest available construction for the game at hand.
pub fn bargain(game: &Game, base: &Baseline, opts: &BargainOptions) -> Result<BargainOutcome> {
    let n = game.n_users();
    let homogeneous = game.homogeneity().is_homogeneous();
    if homogeneous {
        match nbs_identical(game, base) {
            Err(Error::NotIdentical) => {}
            other => return other,
        }
    }
    if n == 2 && game.homogeneity() == Homogeneity::HomogeneousH5 {
        return nbs_two_user(game, base);
    }
    let start = if homogeneous {
        if base.surplus() <= 1e-12 * base.nep_costs.system {
            return Ok(base.coincides(game));
        }
        let eps = opts.epsilon.epsilon(base, n);
        match flow_exchange(game, &base.nep_costs, &base.optimum, eps) {
            Ok(ex) => ex.outcome.profile,
            Err(e) => {
                debug!("flow exchange unavailable ({e}); ascending from the equilibrium");
                base.nep.profile.clone()
            }
        }
    } else {
        base.nep.profile.clone()
    };
    nbs_general(game, base, &start, opts)
}
