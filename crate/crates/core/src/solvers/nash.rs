//! Nash equilibrium by round-robin best-response dynamics.

use log::debug;

use super::waterfill::{kkt_residual, water_fill};
use super::{SolveReport, SolverOptions};
use crate::error::{Error, Result};
use crate::game::{Game, StrategyProfile};

/// Initial profile for best-response dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRule {
    /// Each user spreads its demand in proportion to link capacity, or
    /// evenly over uncapacitated links when there are any. Costs start finite.
    CapacityProportional,
    /// Users pile onto the lowest-index links, filling each up to 90% of
    /// its remaining capacity before moving on.
    FirstLinks,
}

pub fn initial_profile(game: &Game, rule: StartRule) -> StrategyProfile {
    let (n, l) = (game.n_users(), game.n_links());
    let mut p = StrategyProfile::zeros(n, l);
    let caps: Vec<Option<f64>> = (0..l).map(|k| game.effective_capacity(k)).collect();
    match rule {
        StartRule::CapacityProportional => {
            let shares: Vec<f64> = if caps.iter().any(Option::is_none) {
                let open = caps.iter().filter(|c| c.is_none()).count() as f64;
                caps.iter().map(|c| if c.is_none() { 1.0 / open } else { 0.0 }).collect()
            } else {
                let total: f64 = caps.iter().map(|c| c.unwrap()).sum();
                caps.iter().map(|c| c.unwrap() / total).collect()
            };
            for (i, u) in game.users().iter().enumerate() {
                for (x, s) in p.row_mut(i).iter_mut().zip(&shares) {
                    *x = u.demand * s;
                }
            }
        }
        StartRule::FirstLinks => {
            let mut used = vec![0.0; l];
            for (i, u) in game.users().iter().enumerate() {
                let mut left = u.demand;
                for k in 0..l {
                    if left <= 0.0 {
                        break;
                    }
                    let room = match caps[k] {
                        Some(c) if k + 1 < l => 0.9 * (c - used[k]).max(0.0),
                        _ => f64::INFINITY,
                    };
                    let x = left.min(room);
                    p.set(i, k, x);
                    used[k] += x;
                    left -= x;
                }
                if left > 0.0 {
                    // The last link could not absorb the rest; fall back.
                    return initial_profile(game, StartRule::CapacityProportional);
                }
            }
        }
    }
    p
}

/// Cost-minimizing response of `user` to fixed aggregate flows of the
/// others. Returns the per-link flows and the user's multiplier.
pub fn best_response(game: &Game, user: usize, others: &[f64]) -> Result<(Vec<f64>, f64)> {
    let u = &game.users()[user];
    let models: Vec<_> = u.cost_models.iter().collect();
    let wf = water_fill(&models, others, u.demand).ok_or(Error::CapacityExhausted {
        user: u.index,
        demand: u.demand,
    })?;
    Ok((wf.flows, wf.level))
}

/// Per-user multipliers and the largest KKT violation of a profile.
pub(crate) fn equilibrium_residual(game: &Game, profile: &StrategyProfile) -> (Vec<f64>, f64) {
    let totals = profile.link_totals();
    let mut multipliers = Vec::with_capacity(game.n_users());
    let mut worst: f64 = 0.0;
    for i in 0..game.n_users() {
        let row = profile.row(i);
        let marginals: Vec<f64> = (0..game.n_links())
            .map(|l| game.model(i, l).marginal(row[l], totals[l]))
            .collect();
        let (lambda, res) = kkt_residual(&marginals, row);
        multipliers.push(lambda);
        worst = worst.max(res);
    }
    (multipliers, worst)
}

/// Smallest relaxation factor used by damped best responses.
const MIN_RELAX: f64 = 1.0 / 64.0;

pub fn nash_equilibrium(game: &Game, opts: &SolverOptions) -> Result<SolveReport> {
    let start = initial_profile(game, StartRule::CapacityProportional);
    nash_equilibrium_from(game, &start, opts)
}

pub fn nash_equilibrium_from(
    game: &Game,
    start: &StrategyProfile,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    start.validate(game)?;
    let (n, l) = (game.n_users(), game.n_links());
    let mut profile = start.clone();
    let mut totals = profile.link_totals();
    let mut history: Vec<f64> = Vec::new();
    let mut damped = false;
    let mut relax = opts.damping;
    let mut last_switch = 0;
    let mut residual = f64::INFINITY;

    for sweep in 1..=opts.max_iters {
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            let old = profile.row(i).to_vec();
            let others: Vec<f64> = totals.iter().zip(&old).map(|(t, x)| (t - x).max(0.0)).collect();
            let (mut br, _) = best_response(game, i, &others)?;
            // Rounding in the fill leaves specks on links that should be
            // idle; they would otherwise count as used in the residual.
            snap_row(&mut br, game.users()[i].demand, opts.snap);
            let mut new = br.clone();
            if damped {
                for ((x, o), b) in new.iter_mut().zip(&old).zip(&br) {
                    *x = o + relax * (b - o);
                }
                // The relaxed point may overload a link the others have since filled.
                let finite = (0..l).all(|k| game.model(i, k).admits(others[k] + new[k]) || new[k] == 0.0);
                if !finite {
                    new = br;
                }
            }
            for k in 0..l {
                max_change = max_change.max((new[k] - old[k]).abs());
                totals[k] = others[k] + new[k];
            }
            profile.row_mut(i).copy_from_slice(&new);
        }
        totals = profile.link_totals();
        residual = equilibrium_residual(game, &profile).1;
        history.push(residual);

        if max_change < opts.tol_step && residual < opts.tol_kkt {
            let report = finish(game, profile, sweep, opts);
            debug!(
                "nash equilibrium after {sweep} sweeps (residual {:.2e}, damped {damped})",
                report.kkt_residual
            );
            return Ok(report);
        }
        // Stalling again under damping means the relaxation is still too
        // aggressive for this game; keep halving it.
        let w = opts.oscillation_window;
        if sweep > last_switch + w && residual >= history[sweep - 1 - w] {
            if damped {
                relax = (0.5 * relax).max(MIN_RELAX);
            }
            debug!("best response stalled at sweep {sweep}; relaxation {relax}");
            damped = true;
            last_switch = sweep;
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual,
    })
}

fn finish(game: &Game, mut profile: StrategyProfile, sweeps: usize, opts: &SolverOptions) -> SolveReport {
    snap_dust(game, &mut profile, opts.snap);
    let (multipliers, residual) = equilibrium_residual(game, &profile);
    let objective = game.evaluate_unchecked(&profile).system;
    SolveReport {
        profile,
        multipliers,
        kkt_residual: residual,
        iterations: sweeps,
        converged: residual <= opts.tol_kkt,
        objective,
    }
}

/// Zeroes flows below `threshold` and rescales each row back to its demand.
pub(crate) fn snap_dust(game: &Game, profile: &mut StrategyProfile, threshold: f64) {
    for (i, u) in game.users().iter().enumerate() {
        snap_row(profile.row_mut(i), u.demand, threshold);
    }
}

fn snap_row(row: &mut [f64], demand: f64, threshold: f64) {
    let mut changed = false;
    for x in row.iter_mut() {
        if *x < threshold && *x != 0.0 {
            *x = 0.0;
            changed = true;
        }
    }
    if changed {
        let sum: f64 = row.iter().sum();
        for x in row.iter_mut() {
            *x *= demand / sum;
        }
    }
}
