//! Reference games and seeded random instance generators.

use rand::Rng;

use crate::cost::CostModel;
use crate::error::Result;
use crate::game::{Game, UserInput};

/// Three users on M/M/1 links of capacity 20 and 10 with demands
/// 0.1, 7.45 and 7.45; the bargaining outcome is not socially optimal here.
pub fn nbs_three_user() -> Result<Game> {
    Game::mm1(&[20.0, 10.0], &[0.1, 7.45, 7.45])
}

/// Two users with half a unit each on two links, where the second user
/// finds the second link prohibitively expensive (`0 < eps < 0.1`).
/// Equilibrium and bargaining outcome coincide, and both are far from the
/// social optimum as `eps` shrinks.
pub fn heterogeneous_pair(eps: f64) -> Result<Game> {
    let first = UserInput::new(
        0.5,
        vec![CostModel::linear(0.0, 1.0), CostModel::linear(1.0, 1.0).weighted(2.0)],
    );
    let second = UserInput::new(
        0.5,
        vec![
            CostModel::mm1(1.0 + eps),
            CostModel::linear(1.0, 1.0).weighted(2.0 / (eps * eps)),
        ],
    );
    Game::new(vec![None, None], vec![first, second])
}

/// `n` identical users sharing one unit of demand over a link with
/// latency `1 + eps f` and a link with latency `f^n`.
pub fn high_poa(n: usize, eps: f64) -> Result<Game> {
    let models = vec![CostModel::linear(1.0, eps), CostModel::power(0.0, 1.0, n as f64)];
    Game::homogeneous(models, &vec![1.0 / n as f64; n])
}

/// Lower bound on the anarchy price of [`high_poa`].
pub fn high_poa_lower_bound(n: usize, eps: f64) -> f64 {
    let n = n as f64;
    0.25 / ((1.0 + eps) * (1.0 - n * (n + 1.0).powf(-(n + 1.0) / n)))
}

/// Random M/M/1 game with `n_users` users and `n_links` links. Total demand
/// is a random fraction in `[0.3, 0.85]` of the summed capacity.
pub fn random_mm1<R: Rng + ?Sized>(rng: &mut R, n_users: usize, n_links: usize) -> Result<Game> {
    let caps: Vec<f64> = (0..n_links).map(|_| rng.gen_range(1.0..20.0)).collect();
    let load = rng.gen_range(0.3..0.85) * caps.iter().sum::<f64>();
    let raw: Vec<f64> = (0..n_users).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let demands: Vec<f64> = raw.iter().map(|x| x / total * load).collect();
    Game::mm1(&caps, &demands)
}

/// Random standard-cost game mixing M/M/1, linear and power forms with
/// user-specific parameters and weights.
pub fn random_standard<R: Rng + ?Sized>(rng: &mut R, n_users: usize, n_links: usize) -> Result<Game> {
    let demands: Vec<f64> = (0..n_users).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = demands.iter().sum();
    let users = demands
        .iter()
        .map(|&r| {
            let models = (0..n_links)
                .map(|_| {
                    let w = rng.gen_range(0.5..3.0);
                    match rng.gen_range(0..3) {
                        // Generous capacity keeps every link usable for the whole demand.
                        0 => CostModel::mm1(total * rng.gen_range(1.2..3.0)),
                        1 => CostModel::linear(rng.gen_range(0.0..2.0), rng.gen_range(0.2..3.0)),
                        _ => CostModel::power(
                            rng.gen_range(0.0..1.0),
                            rng.gen_range(0.2..2.0),
                            rng.gen_range(1.0..4.0),
                        ),
                    }
                    .weighted(w)
                })
                .collect();
            UserInput::new(r, models)
        })
        .collect();
    Game::new(vec![None; n_links], users)
}
