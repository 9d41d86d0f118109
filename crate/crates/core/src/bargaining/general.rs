//! Nash-product maximization by projected gradient ascent.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{proportional_profile, BargainMethod, BargainOptions, BargainOutcome, Baseline, NbsCertainty};
use crate::error::{Error, Result};
use crate::game::{Game, StrategyProfile};
use crate::solvers::waterfill::kkt_residual;
use crate::solvers::{ascend, weighted_gradient, Ascent};

/// Smallest relative gain that still counts as a strict improvement.
const ESSENTIAL: f64 = 1e-9;

/// `J_hat^i - J^i(p)`; `None` when some cost is infinite.
fn gains(game: &Game, disagreement: &[f64], p: &StrategyProfile) -> Option<Vec<f64>> {
    let costs = game.evaluate_unchecked(p);
    if !costs.is_finite() {
        return None;
    }
    Some(disagreement.iter().zip(&costs.per_user).map(|(d, c)| d - c).collect())
}

fn log_product(g: &[f64]) -> f64 {
    if g.iter().all(|&x| x > 0.0) {
        g.iter().map(|x| x.ln()).sum()
    } else {
        f64::NEG_INFINITY
    }
}

/// Projected-gradient stationarity of a maximization over the demand simplices.
fn stationarity(game: &Game, grad: &[f64], p: &StrategyProfile) -> f64 {
    let l = game.n_links();
    (0..game.n_users())
        .map(|i| {
            let descent: Vec<f64> = grad[i * l..(i + 1) * l].iter().map(|g| -g).collect();
            kkt_residual(&descent, p.row(i)).1
        })
        .fold(0.0, f64::max)
}

/// Projected-gradient stationarity relative to `max(1, |grad|_inf)`:
/// gradients of log products grow like 1 / gain, and rounding grows with them.
fn relative_stationarity(game: &Game, p: &StrategyProfile, grad: &[f64]) -> f64 {
    let size = grad.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    stationarity(game, grad, p) / size
}

/// Ascends the log Nash product from a point where every gain is positive.
fn maximize_product(game: &Game, d: &[f64], start: StrategyProfile, opts: &BargainOptions) -> Ascent {
    let first = 0.1 * gains(game, d, &start).map_or(1.0, |g| g.iter().cloned().fold(f64::INFINITY, f64::min));
    ascend(
        &game.demands(),
        start,
        |p| gains(game, d, p).map_or(f64::NEG_INFINITY, |g| log_product(&g)),
        |p| {
            let g = gains(game, d, p).expect("ascent stays in the domain");
            let coef: Vec<f64> = g.iter().map(|x| 1.0 / x).collect();
            weighted_gradient(game, &coef, p).into_iter().map(|x| -x).collect()
        },
        |p, g| relative_stationarity(game, p, g),
        first,
        opts.max_iters,
        opts.tol_grad,
    )
}

/// Smooth minimum of the relative gains `(J_hat^i - J^i) / J_hat^i`.
fn soft_min(rel: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let lo = rel.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = rel.iter().map(|r| (-(r - lo) / tau).exp()).collect();
    let s: f64 = w.iter().sum();
    (lo - tau * s.ln(), w.into_iter().map(|x| x / s).collect())
}

/// Stationarity reachable in floating point: gains are differences of costs,
/// so their relative rounding error is about `eps * J_hat / G`, and the
/// gradient of the log product inherits it.
fn noise_floor(game: &Game, d: &[f64], p: &StrategyProfile) -> f64 {
    gains(game, d, p).map_or(0.0, |g| {
        let worst = g.iter().zip(d).map(|(g, d)| d.abs() / g).fold(0.0, f64::max);
        1e3 * f64::EPSILON * worst
    })
}

/// Looks for a profile that strictly improves every user on the equilibrium
/// by pushing up a smoothed minimum of relative gains.
fn find_essential(game: &Game, d: &[f64], starts: &[StrategyProfile]) -> Option<StrategyProfile> {
    let scale: Vec<f64> = d.iter().map(|&x| if x > 0.0 { x } else { 1.0 }).collect();
    let rel = |p: &StrategyProfile| -> Option<Vec<f64>> {
        gains(game, d, p).map(|g| g.iter().zip(&scale).map(|(a, s)| a / s).collect())
    };
    let worst = |p: &StrategyProfile| rel(p).map_or(f64::NEG_INFINITY, |r| r.iter().cloned().fold(f64::INFINITY, f64::min));
    let mut best: Option<(f64, StrategyProfile)> = None;
    for start in starts {
        if !worst(start).is_finite() {
            continue;
        }
        let mut p = start.clone();
        for tau in [1e-2, 1e-3, 1e-4, 1e-5] {
            let run = ascend(
                &game.demands(),
                p,
                |q| rel(q).map_or(f64::NEG_INFINITY, |r| soft_min(&r, tau).0),
                |q| {
                    let (_, w) = soft_min(&rel(q).expect("ascent stays in the domain"), tau);
                    let coef: Vec<f64> = w.iter().zip(&scale).map(|(a, s)| a / s).collect();
                    weighted_gradient(game, &coef, q).into_iter().map(|x| -x).collect()
                },
                |q, g| relative_stationarity(game, q, g),
                1e-3,
                2_000,
                1e-12,
            );
            p = run.profile;
            if worst(&p) > ESSENTIAL {
                return Some(p);
            }
        }
        let w = worst(&p);
        if best.as_ref().is_none_or(|(b, _)| w > *b) {
            best = Some((w, p));
        }
    }
    debug!("no strictly improving profile found (best relative gain {:?})", best.map(|b| b.0));
    None
}

/// Pulls `start` a fraction of the way towards a random profile, backing off
/// until every gain stays positive.
fn perturb(game: &Game, d: &[f64], start: &StrategyProfile, rng: &mut ChaCha8Rng) -> StrategyProfile {
    let (n, l) = (game.n_users(), game.n_links());
    let mut target = StrategyProfile::zeros(n, l);
    for (i, u) in game.users().iter().enumerate() {
        let raw: Vec<f64> = (0..l).map(|_| rng.gen::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        for (x, r) in target.row_mut(i).iter_mut().zip(&raw) {
            *x = u.demand * r / s;
        }
    }
    let mut t = 0.1;
    for _ in 0..40 {
        let mut q = start.clone();
        for (x, y) in q.as_mut_slice().iter_mut().zip(target.as_slice()) {
            *x = (1.0 - t) * *x + t * y;
        }
        if gains(game, d, &q).is_some_and(|g| log_product(&g).is_finite()) {
            return q;
        }
        t *= 0.5;
    }
    start.clone()
}

/// Maximizes the Nash product `prod_i (J_hat^i - J^i)` over all strategy
/// profiles, with the equilibrium as disagreement point.
///
/// If `start` does not improve every user, a strictly improving profile is
/// searched for first; when none exists the equilibrium itself is returned
/// with [`BargainMethod::CoincidesWithNep`]. The ascent is then repeated
/// from `opts.restarts` seeded perturbations and the best run is kept.
pub fn nbs_general(
    game: &Game,
    base: &Baseline,
    start: &StrategyProfile,
    opts: &BargainOptions,
) -> Result<BargainOutcome> {
    start.validate(game)?;
    let d = base.nep_costs.per_user.as_slice();
    let interior = |p: &StrategyProfile| gains(game, d, p).is_some_and(|g| log_product(&g).is_finite());
    let origin = if interior(start) {
        start.clone()
    } else {
        let mut seeds = vec![start.clone(), base.nep.profile.clone()];
        if let Ok(p) = proportional_profile(game, &base.optimum.link_totals()) {
            seeds.push(p);
        }
        match find_essential(game, d, &seeds) {
            Some(p) => p,
            None => return Ok(base.coincides(game)),
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![origin.clone()];
    for _ in 0..opts.restarts {
        starts.push(perturb(game, d, &origin, &mut rng));
    }
    let runs: Vec<Ascent> = starts
        .into_par_iter()
        .map(|s| maximize_product(game, d, s, opts))
        .collect();

    for (k, r) in runs.iter().enumerate() {
        debug!("run {k}: value {}, {} iterations, residual {:.2e}", r.value, r.iterations, r.residual);
    }
    let best = runs
        .iter()
        .enumerate()
        // Equal products fall back to the lexicographically smaller profile,
        // so the pick never depends on how runs were scheduled.
        .max_by(|a, b| {
            a.1.value.total_cmp(&b.1.value).then_with(|| {
                let (x, y) = (a.1.profile.as_slice(), b.1.profile.as_slice());
                y.iter().zip(x).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .map(|(i, _)| i)
        .expect("at least one run");
    let converged = |r: &Ascent| r.residual < opts.tol_grad.max(noise_floor(game, d, &r.profile));
    let b = &runs[best];
    let best_costs = game.evaluate_unchecked(&b.profile).per_user;
    let agree = runs.len() > 1
        && runs.iter().all(|r| {
            converged(r)
                && game
                    .evaluate_unchecked(&r.profile)
                    .per_user
                    .iter()
                    .zip(&best_costs)
                    .all(|(x, y)| (x - y).abs() <= 1e-6 * (1.0 + y.abs()))
        });
    debug!(
        "nash product ascent: best run {best} of {}, {} iterations, residual {:.2e}, agreement {agree}",
        runs.len(),
        b.iterations,
        b.residual
    );

    let mut out = BargainOutcome::new(game, b.profile.clone(), &base.nep_costs, BargainMethod::NashProductAscent);
    out.iterations = b.iterations;
    out.certainty = Some(if agree {
        NbsCertainty::MultiStartAgreement
    } else {
        NbsCertainty::SingleRun
    });
    if !converged(b) {
        return Err(Error::BargainNoConvergence {
            iterations: b.iterations,
            best: Box::new(out),
        });
    }
    Ok(out)
}
