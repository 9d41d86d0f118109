//! Social and perceived system optima.

use log::debug;

use super::nash::{initial_profile, nash_equilibrium, StartRule};
use super::ascent::ascend;
use super::waterfill::{kkt_residual, water_fill};
use super::{SolveReport, SolverOptions};
use crate::error::{Error, Result};
use crate::game::{Game, StrategyProfile};

pub(crate) fn check_weights(weights: &[f64], n_users: usize) -> Result<()> {
    if weights.len() != n_users {
        return Err(Error::InvalidWeights(format!(
            "expected {n_users} weights, got {}",
            weights.len()
        )));
    }
    if weights.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return Err(Error::InvalidWeights("weights must be positive".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Splits aggregate link flows among users in proportion to demand.
pub(crate) fn proportional_split(game: &Game, aggregate: &[f64]) -> StrategyProfile {
    let total = game.total_demand();
    let mut p = StrategyProfile::zeros(game.n_users(), game.n_links());
    for (i, u) in game.users().iter().enumerate() {
        for (x, f) in p.row_mut(i).iter_mut().zip(aggregate) {
            *x = u.demand / total * f;
        }
    }
    p
}

/// Minimizes the (optionally weighted) sum of user costs.
///
/// Homogeneous games without weights reduce to one water-filling over
/// aggregate link flows; users then split each link in proportion to
/// demand. Everything else runs projected gradient descent over the
/// per-user demand simplices.
pub fn social_optimum(game: &Game, weights: Option<&[f64]>, opts: &SolverOptions) -> Result<SolveReport> {
    if let Some(w) = weights {
        check_weights(w, game.n_users())?;
    }
    match (weights, game.shared_models()) {
        (None, Some(models)) => {
            let refs: Vec<_> = models.iter().collect();
            let zeros = vec![0.0; game.n_links()];
            let total = game.total_demand();
            let wf = water_fill(&refs, &zeros, total).ok_or(Error::CapacityExhausted {
                user: 0,
                demand: total,
            })?;
            let marginals: Vec<f64> = refs
                .iter()
                .zip(&wf.flows)
                .map(|(m, &f)| m.marginal(f, f))
                .collect();
            let (mu, residual) = kkt_residual(&marginals, &wf.flows);
            let profile = proportional_split(game, &wf.flows);
            let objective = game.evaluate_unchecked(&profile).system;
            Ok(SolveReport {
                profile,
                multipliers: vec![mu],
                kkt_residual: residual,
                iterations: 1,
                converged: residual <= opts.tol_kkt,
                objective,
            })
        }
        _ => {
            let alphas = weights.map_or_else(|| vec![1.0; game.n_users()], <[f64]>::to_vec);
            let mut starts = vec![match game.shared_models() {
                // Weighted homogeneous: the unweighted optimum is a good start.
                Some(_) => social_optimum(game, None, opts)?.profile,
                None => initial_profile(game, StartRule::CapacityProportional),
            }];
            // With user-specific costs or weights the objective need not be
            // jointly convex. Descending from the equilibrium as well keeps
            // the result no worse than it.
            if let Ok(nep) = nash_equilibrium(game, opts) {
                starts.push(nep.profile);
            }
            let mut best: Option<SolveReport> = None;
            let mut first_err = None;
            for start in starts {
                match descend(game, &alphas, start, opts) {
                    Ok(r) => {
                        let v = game.weighted_system_cost(&r.profile, &alphas);
                        if best.as_ref().is_none_or(|b| v < game.weighted_system_cost(&b.profile, &alphas)) {
                            best = Some(r);
                        }
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            best.ok_or_else(|| first_err.expect("at least one start"))
        }
    }
}

/// Gradient of `sum_i a_i J^i` with respect to every `f_l^j`.
pub(crate) fn weighted_gradient(game: &Game, alphas: &[f64], p: &StrategyProfile) -> Vec<f64> {
    let (n, l) = (game.n_users(), game.n_links());
    let totals = p.link_totals();
    // Cross terms: every user's cost reacts to the link total.
    let cross: Vec<f64> = (0..l)
        .map(|k| {
            (0..n)
                .map(|i| alphas[i] * game.model(i, k).total_partial(p.get(i, k), totals[k]))
                .sum()
        })
        .collect();
    let mut g = vec![0.0; n * l];
    for j in 0..n {
        for k in 0..l {
            let m = game.model(j, k);
            let x = p.get(j, k);
            let own = alphas[j] * m.marginal(x, totals[k]);
            g[j * l + k] = own + cross[k] - alphas[j] * m.total_partial(x, totals[k]);
        }
    }
    g
}

fn descent_residual(game: &Game, g: &[f64], p: &StrategyProfile) -> (Vec<f64>, f64) {
    let l = game.n_links();
    let mut multipliers = Vec::with_capacity(game.n_users());
    let mut worst: f64 = 0.0;
    for i in 0..game.n_users() {
        let (mu, r) = kkt_residual(&g[i * l..(i + 1) * l], p.row(i));
        multipliers.push(mu);
        worst = worst.max(r);
    }
    (multipliers, worst)
}

fn descend(game: &Game, alphas: &[f64], start: StrategyProfile, opts: &SolverOptions) -> Result<SolveReport> {
    if !game.weighted_system_cost(&start, alphas).is_finite() {
        return Err(Error::CapacityExhausted {
            user: 0,
            demand: game.total_demand(),
        });
    }
    let run = ascend(
        &game.demands(),
        start,
        |p| -game.weighted_system_cost(p, alphas),
        |p| weighted_gradient(game, alphas, p).into_iter().map(|x| -x).collect(),
        |p, g| {
            let descent: Vec<f64> = g.iter().map(|x| -x).collect();
            descent_residual(game, &descent, p).1
        },
        1.0,
        opts.descent_max_iters,
        opts.tol_kkt,
    );
    if run.residual > opts.tol_kkt {
        return Err(Error::NoConvergence {
            iterations: run.iterations,
            residual: run.residual,
        });
    }
    debug!("social optimum after {} descent steps", run.iterations);
    let g = weighted_gradient(game, alphas, &run.profile);
    let (multipliers, residual) = descent_residual(game, &g, &run.profile);
    let objective = game.evaluate_unchecked(&run.profile).system;
    Ok(SolveReport {
        profile: run.profile,
        multipliers,
        kkt_residual: residual,
        iterations: run.iterations,
        converged: true,
        objective,
    })
}

/// Optimum of the whole system traffic routed under one user's own cost
/// models: `min sum_l J_l^i(f_l, f_l)` subject to `sum_l f_l = R`.
/// The returned profile splits the optimal link flows by demand.
pub fn perceived_optimum(game: &Game, user: usize, opts: &SolverOptions) -> Result<SolveReport> {
    let u = &game.users()[user];
    let refs: Vec<_> = u.cost_models.iter().collect();
    let zeros = vec![0.0; game.n_links()];
    let total = game.total_demand();
    let wf = water_fill(&refs, &zeros, total).ok_or(Error::CapacityExhausted {
        user: u.index,
        demand: total,
    })?;
    let marginals: Vec<f64> = refs.iter().zip(&wf.flows).map(|(m, &f)| m.marginal(f, f)).collect();
    let (mu, residual) = kkt_residual(&marginals, &wf.flows);
    let objective = refs.iter().zip(&wf.flows).map(|(m, &f)| m.value(f, f)).sum();
    Ok(SolveReport {
        profile: proportional_split(game, &wf.flows),
        multipliers: vec![mu],
        kkt_residual: residual,
        iterations: 1,
        converged: residual <= opts.tol_kkt,
        objective,
    })
}
