use super::{BargainMethod, BargainOutcome, Baseline};
use crate::error::{Error, Result};
use crate::game::{Game, Homogeneity, StrategyProfile};

/// User 1's share of the optimal aggregate when it takes whole links in `order`.
fn greedy_fill(totals: &[f64], order: &[usize], demand: f64) -> Vec<f64> {
    let mut x = vec![0.0; totals.len()];
    let mut left = demand;
    for &k in order {
        let take = left.min(totals[k]);
        x[k] = take;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    x
}

struct Segment {
    totals: Vec<f64>,
    prices: Vec<f64>,
    cheap: Vec<f64>,
    dear: Vec<f64>,
}

fn segment(game: &Game, base: &Baseline) -> Result<Segment> {
    if game.n_users() != 2 {
        return Err(Error::WrongArity {
            expected: 2,
            found: game.n_users(),
        });
    }
    if game.homogeneity() != Homogeneity::HomogeneousH5 {
        return Err(Error::NotHomogeneous);
    }
    let models = game.shared_models().ok_or(Error::NotHomogeneous)?;
    let totals = base.optimum.link_totals();
    let prices: Vec<f64> = models.iter().zip(&totals).map(|(m, &f)| m.latency(f)).collect();
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| prices[a].total_cmp(&prices[b]));
    let r1 = game.users()[0].demand;
    let cheap = greedy_fill(&totals, &order, r1);
    order.reverse();
    let dear = greedy_fill(&totals, &order, r1);
    Ok(Segment {
        totals,
        prices,
        cheap,
        dear,
    })
}

fn cost_pair(seg: &Segment, x1: &[f64]) -> (f64, f64) {
    let mut c = (0.0, 0.0);
    for k in 0..x1.len() {
        c.0 += x1[k] * seg.prices[k];
        c.1 += (seg.totals[k] - x1[k]).max(0.0) * seg.prices[k];
    }
    c
}

/// Profile on the optimal aggregate giving user 1 the cost closest to
/// `target`. User 1's cost is linear along the segment between the two
/// greedy fills, so the interpolation weight is solved directly.
fn realize(game: &Game, seg: &Segment, target: f64) -> StrategyProfile {
    let lo = cost_pair(seg, &seg.cheap).0;
    let hi = cost_pair(seg, &seg.dear).0;
    let t = if hi - lo > 0.0 {
        ((target - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut profile = StrategyProfile::zeros(2, game.n_links());
    for k in 0..seg.totals.len() {
        let x1 = (1.0 - t) * seg.cheap[k] + t * seg.dear[k];
        profile.set(0, k, x1);
        profile.set(1, k, (seg.totals[k] - x1).max(0.0));
    }
    profile
}

/// Profiles realizing the corners of the bargaining triangle: user 1 at its
/// equilibrium cost on the optimal aggregate, user 2 at its equilibrium cost
/// on the optimal aggregate, and the equilibrium itself.
pub fn triangle_vertices(game: &Game, base: &Baseline) -> Result<[StrategyProfile; 3]> {
    let seg = segment(game, base)?;
    let d = &base.nep_costs.per_user;
    let j_star = base.optimum_cost();
    Ok([
        realize(game, &seg, d[0]),
        realize(game, &seg, j_star - d[1]),
        base.nep.profile.clone(),
    ])
}

/// Two users sharing M/M/1 links: the bargaining outcome splits the surplus
/// equally, `J^1 = (J* + J_hat^1 - J_hat^2) / 2`, realized on the optimal
/// aggregate.
pub fn nbs_two_user(game: &Game, base: &Baseline) -> Result<BargainOutcome> {
    let seg = segment(game, base)?;
    let d = &base.nep_costs.per_user;
    let target = 0.5 * (base.optimum_cost() + d[0] - d[1]);
    let profile = realize(game, &seg, target);
    Ok(BargainOutcome::new(game, profile, &base.nep_costs, BargainMethod::TwoUserClosedForm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::SolverOptions;

    #[test]
    fn gains_are_equal() {
        let game = Game::mm1(&[9.0, 5.0, 2.0], &[1.0, 6.0]).unwrap();
        let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
        let out = nbs_two_user(&game, &base).unwrap();
        let g = out.gains();
        assert!(g[0] > 0.0 && (g[0] - g[1]).abs() < 1e-9, "{g:?}");
        assert!((out.costs.system - base.optimum_cost()).abs() < 1e-9);
    }

    #[test]
    fn triangle_corners_are_realized() {
        let game = Game::mm1(&[4.0, 3.0], &[2.0, 2.5]).unwrap();
        let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
        let d = &base.nep_costs.per_user;
        let j = base.optimum_cost();
        let want = [(d[0], j - d[0]), (j - d[1], d[1]), (d[0], d[1])];
        let corners = triangle_vertices(&game, &base).unwrap();
        for (p, w) in corners.iter().zip(want) {
            let c = game.evaluate_cost(p).unwrap();
            assert!((c.per_user[0] - w.0).abs() < 1e-9 && (c.per_user[1] - w.1).abs() < 1e-9);
        }
    }

    #[test]
    fn arity_is_checked() {
        let game = Game::mm1(&[4.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        let base = Baseline::compute(&game, &SolverOptions::default()).unwrap();
        assert!(matches!(
            nbs_two_user(&game, &base),
            Err(Error::WrongArity { expected: 2, found: 3 })
        ));
    }
}
