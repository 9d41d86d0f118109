//! Redistribution of an optimal aggregate so every user gains at least `epsilon`.

use log::debug;

use super::{proportional_profile, BargainMethod, BargainOutcome};
use crate::error::{Error, Result};
use crate::game::{CostVector, Game, StrategyProfile};
use crate::solvers::SolveReport;

#[derive(Debug, Clone)]
pub struct ExchangeReport {
    pub outcome: BargainOutcome,
    /// Number of pairwise flow swaps performed.
    pub events: usize,
    pub epsilon: f64,
}

/// Starting from the demand-proportional split of the optimal aggregate,
/// swaps flow between users on different links until every user's gain over
/// the equilibrium is at least `epsilon`. Link totals never change, so each
/// link keeps its optimal unit price `T_l(f*_l)`.
///
/// A needy user (no strict gain) hands flow on its costliest used link to a
/// donor (gain above `epsilon`), who returns the same amount on its cheapest
/// used link. Each swap ends by emptying a link for one of the two users or
/// by settling one of their gains at `epsilon`. Once nobody is needy, users
/// with gains in `(0, epsilon)` are lifted the same way while partners remain.
pub fn flow_exchange(
    game: &Game,
    nep: &CostVector,
    optimum: &SolveReport,
    epsilon: f64,
) -> Result<ExchangeReport> {
    let models = game.shared_models().ok_or(Error::NotHomogeneous)?;
    let (n, l) = (game.n_users(), game.n_links());
    let totals = optimum.link_totals();
    let prices: Vec<f64> = models.iter().zip(&totals).map(|(m, &f)| m.latency(f)).collect();
    let mut order: Vec<usize> = (0..l).filter(|&k| totals[k] > 0.0).collect();
    order.sort_by(|&a, &b| prices[a].total_cmp(&prices[b]));

    let mut profile = proportional_profile(game, &totals)?;
    let mut gains: Vec<f64> = (0..n)
        .map(|i| nep.per_user[i] - profile.row(i).iter().zip(&prices).map(|(x, p)| x * p).sum::<f64>())
        .collect();
    let surplus: f64 = gains.iter().sum();
    // Gains within rounding of a threshold count as reaching it.
    let slack = 1e-12 * nep.system.max(1.0);
    if surplus <= slack {
        // Equilibrium already optimal: nothing to redistribute.
        return Ok(ExchangeReport {
            outcome: BargainOutcome::new(game, profile, nep, BargainMethod::FlowExchange),
            events: 0,
            epsilon,
        });
    }
    if !(epsilon > 0.0) || epsilon * n as f64 > surplus + slack {
        return Err(Error::NotEssentialHere(format!(
            "epsilon {epsilon} exceeds the per-user share of surplus {surplus}"
        )));
    }

    let mut ex = Exchange {
        n,
        prices: &prices,
        order: &order,
        profile: &mut profile,
        gains: &mut gains,
        epsilon,
        slack,
        events: 0,
        cap: 10 * n * l + 10,
    };
    // Users without a strict gain must be lifted; being stuck here is fatal.
    if !ex.run(0.0)? {
        return Err(Error::NotEssentialHere(
            "a user without gain holds no flow on a link costlier than some donor's".into(),
        ));
    }
    // Then lift the remaining users below epsilon as far as prices allow.
    ex.run(epsilon)?;
    let events = ex.events;
    debug!("flow exchange settled after {events} events (epsilon {epsilon:.3e})");

    let mut outcome = BargainOutcome::new(game, profile, nep, BargainMethod::FlowExchange);
    outcome.iterations = events;
    Ok(ExchangeReport {
        outcome,
        events,
        epsilon,
    })
}

struct Exchange<'a> {
    n: usize,
    prices: &'a [f64],
    order: &'a [usize],
    profile: &'a mut StrategyProfile,
    gains: &'a mut [f64],
    epsilon: f64,
    slack: f64,
    events: usize,
    cap: usize,
}

impl Exchange<'_> {
    /// Swaps flow until no user has gain at or below `floor`. Returns
    /// `false` when some user is left there without an exchange partner.
    fn run(&mut self, floor: f64) -> Result<bool> {
        let n = self.n;
        loop {
            let needy: Vec<bool> = self.gains.iter().map(|&g| g <= floor + self.slack && g < self.epsilon - self.slack).collect();
            if !needy.contains(&true) {
                return Ok(true);
            }
            let donor: Vec<bool> = self.gains.iter().map(|&g| g > self.epsilon + self.slack).collect();
            let profile = &*self.profile;
            let holder = |k: usize, set: &[bool]| (0..n).find(|&i| set[i] && profile.get(i, k) > 0.0);
            let cheap = self.order.iter().position(|&k| holder(k, &donor).is_some());
            let dear = self.order.iter().rposition(|&k| holder(k, &needy).is_some());
            let (a, b) = match (cheap, dear) {
                (Some(a), Some(b)) if a < b && self.prices[self.order[b]] > self.prices[self.order[a]] => {
                    (self.order[a], self.order[b])
                }
                _ => return Ok(false),
            };
            let k = holder(a, &donor).expect("located above");
            let m = holder(b, &needy).expect("located above");
            let rate = self.prices[b] - self.prices[a];
            let limits = [
                profile.get(k, a),
                profile.get(m, b),
                (self.gains[k] - self.epsilon) / rate,
                (self.epsilon - self.gains[m]) / rate,
            ];
            let (which, delta) = limits
                .iter()
                .copied()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("four limits");
            let p = &mut *self.profile;
            p.set(m, b, p.get(m, b) - delta);
            p.set(m, a, p.get(m, a) + delta);
            p.set(k, a, p.get(k, a) - delta);
            p.set(k, b, p.get(k, b) + delta);
            self.gains[m] += delta * rate;
            self.gains[k] -= delta * rate;
            // Settle the binding quantity exactly so rounding cannot revisit it.
            match which {
                0 => p.set(k, a, 0.0),
                1 => p.set(m, b, 0.0),
                2 => self.gains[k] = self.epsilon,
                _ => self.gains[m] = self.epsilon,
            }
            self.events += 1;
            if self.events > self.cap {
                return Err(Error::NotEssentialHere(format!(
                    "exchange did not settle after {} events",
                    self.cap
                )));
            }
        }
    }
}
