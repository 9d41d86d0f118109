//! Efficiency ratios: anarchy, selfishness, isolation and heterogeneity.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bargaining::{bargain, BargainMethod, BargainOptions, BargainOutcome, Baseline, NbsCertainty};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::solvers::waterfill::water_fill;
use crate::solvers::{check_weights, perceived_optimum, social_optimum, SolveReport, SolverOptions};

/// Relative tolerance for comparisons along the benchmark chain.
const CHAIN_TOL: f64 = 1e-6;

/// Equilibrium, optimum and bargaining outcome of one game, solved once so
/// every ratio is taken between the same numbers.
#[derive(Debug, Clone)]
pub struct SolveCache {
    pub base: Baseline,
    pub outcome: BargainOutcome,
}

impl SolveCache {
    pub fn compute(game: &Game, solver: &SolverOptions, bargaining: &BargainOptions) -> Result<Self> {
        let base = Baseline::compute(game, solver)?;
        let outcome = bargain(game, &base, bargaining)?;
        Ok(Self { base, outcome })
    }
}

pub fn price_of_anarchy(base: &Baseline) -> f64 {
    base.nep_costs.system / base.optimum.objective
}

pub fn price_of_selfishness(base: &Baseline, outcome: &BargainOutcome) -> f64 {
    outcome.costs.system / base.optimum.objective
}

pub fn price_of_isolation(base: &Baseline, outcome: &BargainOutcome) -> f64 {
    base.nep_costs.system / outcome.costs.system
}

/// Minimal system cost when all traffic `R` is routed under user `i`'s own
/// cost models, `J_sys^{i*}`, for every user.
pub fn perceived_optima(game: &Game, opts: &SolverOptions) -> Result<Vec<f64>> {
    (0..game.n_users())
        .into_par_iter()
        .map(|i| perceived_optimum(game, i, opts).map(|r| r.objective))
        .collect()
}

/// `PoH^i = (J_hat^i / r^i) / (J_sys^{i*} / R)` per user and their maximum.
pub fn price_of_heterogeneity(game: &Game, base: &Baseline, opts: &SolverOptions) -> Result<(Vec<f64>, f64)> {
    let perceived = perceived_optima(game, opts)?;
    Ok(poh_from(game, base, &perceived))
}

fn poh_from(game: &Game, base: &Baseline, perceived: &[f64]) -> (Vec<f64>, f64) {
    let total = game.total_demand();
    let per_user: Vec<f64> = game
        .users()
        .iter()
        .zip(&base.nep_costs.per_user)
        .zip(perceived)
        .map(|((u, j), p)| (j / u.demand) / (p / total))
        .collect();
    let worst = per_user.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (per_user, worst)
}

/// `(min a / max a, max a / min a)`: how far a weighted social cost can
/// stray from the unweighted one, relative to it.
pub fn weighted_envelope(game: &Game, weights: &[f64]) -> Result<(f64, f64)> {
    check_weights(weights, game.n_users())?;
    let lo = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo / hi, hi / lo))
}

/// Bargained weighted social cost over the weighted optimum.
pub fn weighted_price_of_selfishness(
    game: &Game,
    weights: &[f64],
    outcome: &BargainOutcome,
    opts: &SolverOptions,
) -> Result<f64> {
    let optimum = social_optimum(game, Some(weights), opts)?;
    let best = game.weighted_system_cost(&optimum.profile, weights);
    Ok(game.weighted_system_cost(&outcome.profile, weights) / best)
}

/// A feasible reply of one user to the equilibrium flows of the others whose
/// cost sits between its equilibrium cost and its perceived system optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub flows: Vec<f64>,
    /// The user's cost when shipping `flows` against the others' equilibrium flows.
    pub cost: f64,
    /// `J_sys^{i*}`.
    pub perceived_optimum: f64,
    /// Optimal perceived cost on each successively restricted link set.
    pub restricted_values: Vec<f64>,
}

/// Builds the benchmark reply by repeatedly optimizing the user's perceived
/// system cost over the links where the others' equilibrium flow does not
/// exceed the current optimal flow, until that link set stops shrinking.
pub fn benchmark_strategy(game: &Game, user: usize, nep: &SolveReport) -> Result<Benchmark> {
    let u = &game.users()[user];
    let l = game.n_links();
    let totals = nep.link_totals();
    let others: Vec<f64> = (0..l).map(|k| (totals[k] - nep.profile.get(user, k)).max(0.0)).collect();
    let scale = game.total_demand().max(1.0);

    let mut links: Vec<usize> = (0..l).collect();
    let mut carried: f64 = others.iter().sum();
    let mut values = Vec::new();
    let mut optimum = vec![0.0; l];
    let mut settled = false;
    for _ in 0..=l {
        let models: Vec<_> = links.iter().map(|&k| &u.cost_models[k]).collect();
        let zeros = vec![0.0; links.len()];
        let wf = water_fill(&models, &zeros, u.demand + carried)
            .ok_or_else(|| Error::ConstructionFailed(format!("restricted links cannot carry user {user}'s share")))?;
        optimum.iter_mut().for_each(|x| *x = 0.0);
        for (&k, &f) in links.iter().zip(&wf.flows) {
            optimum[k] = f;
        }
        let value: f64 = links.iter().map(|&k| u.cost_models[k].value(optimum[k], optimum[k])).sum();
        if let Some(&prev) = values.last() {
            if value > prev * (1.0 + CHAIN_TOL) {
                return Err(Error::ConstructionFailed(format!(
                    "restricted optimum rose from {prev} to {value}"
                )));
            }
        }
        values.push(value);
        let keep: Vec<usize> = links
            .iter()
            .copied()
            .filter(|&k| others[k] <= optimum[k] + 1e-12 * scale)
            .collect();
        if keep.len() == links.len() {
            settled = true;
            break;
        }
        if keep.is_empty() {
            return Err(Error::ConstructionFailed("restricted link set became empty".into()));
        }
        carried -= links.iter().filter(|k| !keep.contains(k)).map(|&k| others[k]).sum::<f64>();
        links = keep;
    }
    if !settled {
        return Err(Error::ConstructionFailed(format!("link set did not settle within {l} restrictions")));
    }

    let mut flows = vec![0.0; l];
    for &k in &links {
        flows[k] = (optimum[k] - others[k]).max(0.0);
    }
    // Undo the rounding of the clamp so the reply carries exactly r^i.
    let sum: f64 = flows.iter().sum();
    if sum > 0.0 {
        flows.iter_mut().for_each(|x| *x *= u.demand / sum);
    }
    let after: Vec<f64> = (0..l).map(|k| others[k] + flows[k]).collect();
    let cost = game.user_cost(user, &flows, &after);
    let perceived = values[0];
    let equilibrium = game.user_cost(user, nep.profile.row(user), &totals);
    let slack = CHAIN_TOL * perceived.abs().max(1e-12);
    if !(equilibrium <= cost + slack && cost <= perceived + slack) {
        return Err(Error::ConstructionFailed(format!(
            "chain broken for user {user}: equilibrium {equilibrium}, benchmark {cost}, perceived optimum {perceived}"
        )));
    }
    debug!("benchmark for user {user}: {} restrictions, cost {cost}", values.len() - 1);
    Ok(Benchmark {
        flows,
        cost,
        perceived_optimum: perceived,
        restricted_values: values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceBounds {
    /// `R / r^i`.
    pub poh_bound_per_user: Vec<f64>,
    pub weighted_envelope: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub poa: f64,
    pub pos: f64,
    pub poi: f64,
    pub poh_per_user: Vec<f64>,
    pub poh: f64,
    pub bounds: PriceBounds,
    pub weighted_pos: Option<f64>,
    pub bargain_method: BargainMethod,
    pub nbs_certainty: Option<NbsCertainty>,
}

impl PriceReport {
    pub fn compute(game: &Game, cache: &SolveCache, weights: Option<&[f64]>, opts: &SolverOptions) -> Result<Self> {
        let (poh_per_user, poh) = price_of_heterogeneity(game, &cache.base, opts)?;
        let total = game.total_demand();
        let (weighted_envelope, weighted_pos) = match weights {
            Some(w) => (
                Some(weighted_envelope(game, w)?),
                Some(weighted_price_of_selfishness(game, w, &cache.outcome, opts)?),
            ),
            None => (None, None),
        };
        Ok(Self {
            poa: price_of_anarchy(&cache.base),
            pos: price_of_selfishness(&cache.base, &cache.outcome),
            poi: price_of_isolation(&cache.base, &cache.outcome),
            poh_per_user,
            poh,
            bounds: PriceBounds {
                poh_bound_per_user: game.users().iter().map(|u| total / u.demand).collect(),
                weighted_envelope,
            },
            weighted_pos,
            bargain_method: cache.outcome.method,
            nbs_certainty: cache.outcome.certainty,
        })
    }
}
