//! Game description, strategy profiles and cost evaluation.

use serde::{Deserialize, Serialize};

use crate::cost::{CostForm, CostModel};
use crate::error::{Error, Result};

/// Absolute tolerance on per-user demand constraints.
pub const TOL_FEAS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    /// Capacity, when the link has one. Only M/M/1 links do.
    pub capacity: Option<f64>,
    /// 1-based position of the link as supplied by the caller.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub demand: f64,
    /// 1-based position of the user as supplied by the caller.
    pub index: usize,
    /// One model per link, in the game's link order.
    pub cost_models: Vec<CostModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Homogeneity {
    /// Identical M/M/1 latencies of residual capacity for every user.
    HomogeneousH5,
    /// Identical per-link latencies for every user.
    HomogeneousH14,
    Standard,
}

impl Homogeneity {
    pub fn is_homogeneous(self) -> bool {
        !matches!(self, Homogeneity::Standard)
    }
}

/// Caller-side user description; links are given in caller order.
#[derive(Debug, Clone, PartialEq)]
pub struct UserInput {
    pub demand: f64,
    pub cost_models: Vec<CostModel>,
}

impl UserInput {
    pub fn new(demand: f64, cost_models: Vec<CostModel>) -> Self {
        Self { demand, cost_models }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    links: Vec<LinkSpec>,
    users: Vec<UserSpec>,
    homogeneity: Homogeneity,
}

impl Game {
    /// Builds and validates a game. `capacities[l]` may be `None`; for links
    /// where every user has the same M/M/1 model the capacity is inferred.
    /// Links are reordered by descending capacity when every link has one.
    pub fn new(capacities: Vec<Option<f64>>, users: Vec<UserInput>) -> Result<Self> {
        let n_links = capacities.len();
        if n_links == 0 {
            return Err(Error::InvalidGame("at least one link is required".into()));
        }
        if users.is_empty() {
            return Err(Error::InvalidGame("at least one user is required".into()));
        }
        for (i, u) in users.iter().enumerate() {
            if !(u.demand.is_finite() && u.demand > 0.0) {
                return Err(Error::InvalidGame(format!(
                    "user {}: demand must be positive, got {}",
                    i + 1,
                    u.demand
                )));
            }
            if u.cost_models.len() != n_links {
                return Err(Error::InvalidGame(format!(
                    "user {}: expected {} cost models, got {}",
                    i + 1,
                    n_links,
                    u.cost_models.len()
                )));
            }
            for (l, m) in u.cost_models.iter().enumerate() {
                m.validate()
                    .map_err(|e| Error::InvalidGame(format!("user {} link {}: {e}", i + 1, l + 1)))?;
            }
        }

        let mut links = Vec::with_capacity(n_links);
        for (l, cap) in capacities.into_iter().enumerate() {
            let inferred = shared_mm1_capacity(users.iter().map(|u| &u.cost_models[l]));
            let capacity = match (cap, inferred) {
                (Some(c), _) if !(c.is_finite() && c > 0.0) => {
                    return Err(Error::InvalidGame(format!(
                        "link {}: capacity must be positive, got {c}",
                        l + 1
                    )));
                }
                (Some(c), Some(m)) if (c - m).abs() > 1e-12 * c => {
                    return Err(Error::InvalidGame(format!(
                        "link {}: capacity {c} disagrees with mm1({m}) cost models",
                        l + 1
                    )));
                }
                (Some(c), _) => Some(c),
                (None, inferred) => inferred,
            };
            links.push(LinkSpec { capacity, index: l + 1 });
        }

        // Stable sort so equal capacities keep caller order.
        let mut order: Vec<usize> = (0..n_links).collect();
        if links.iter().all(|l| l.capacity.is_some()) {
            order.sort_by(|&a, &b| {
                links[b]
                    .capacity
                    .partial_cmp(&links[a].capacity)
                    .expect("finite capacities")
            });
        }
        let links: Vec<LinkSpec> = order.iter().map(|&l| links[l].clone()).collect();
        let users: Vec<UserSpec> = users
            .into_iter()
            .enumerate()
            .map(|(i, u)| UserSpec {
                demand: u.demand,
                index: i + 1,
                cost_models: order.iter().map(|&l| u.cost_models[l]).collect(),
            })
            .collect();

        let homogeneity = classify(&users);
        let game = Self {
            links,
            users,
            homogeneity,
        };
        game.check_capacity()?;
        Ok(game)
    }

    /// Convenience constructor for games where every user shares the same
    /// per-link models.
    pub fn homogeneous(models: Vec<CostModel>, demands: &[f64]) -> Result<Self> {
        let caps = vec![None; models.len()];
        let users = demands
            .iter()
            .map(|&r| UserInput::new(r, models.clone()))
            .collect();
        Self::new(caps, users)
    }

    /// M/M/1 parallel links with the given capacities, one model shared by all users.
    pub fn mm1(capacities: &[f64], demands: &[f64]) -> Result<Self> {
        Self::homogeneous(capacities.iter().map(|&c| CostModel::mm1(c)).collect(), demands)
    }

    fn check_capacity(&self) -> Result<()> {
        let total = self.total_demand();
        let mut room = 0.0;
        for l in 0..self.n_links() {
            match self.effective_capacity(l) {
                None => return Ok(()),
                Some(c) => room += c,
            }
        }
        if total < room {
            Ok(())
        } else {
            Err(Error::InvalidGame(format!(
                "total demand {total} must be below the summed capacity {room}"
            )))
        }
    }

    /// Smallest M/M/1 capacity any user sees on link `l`.
    pub fn effective_capacity(&self, l: usize) -> Option<f64> {
        self.users
            .iter()
            .filter_map(|u| u.cost_models[l].capacity())
            .reduce(f64::min)
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn users(&self) -> &[UserSpec] {
        &self.users
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn homogeneity(&self) -> Homogeneity {
        self.homogeneity
    }

    pub fn demands(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.demand).collect()
    }

    pub fn total_demand(&self) -> f64 {
        self.users.iter().map(|u| u.demand).sum()
    }

    pub fn model(&self, user: usize, link: usize) -> &CostModel {
        &self.users[user].cost_models[link]
    }

    /// Per-link models shared by every user, if the game is homogeneous.
    pub fn shared_models(&self) -> Option<&[CostModel]> {
        self.homogeneity
            .is_homogeneous()
            .then(|| self.users[0].cost_models.as_slice())
    }

    /// `dJ_l^i / df_l^i` at the given own and total link flow.
    pub fn marginal_cost(&self, user: usize, link: usize, own: f64, total: f64) -> Result<f64> {
        if !(own >= 0.0 && total >= own) {
            return Err(Error::DomainError(format!(
                "need 0 <= own ({own}) <= total ({total})"
            )));
        }
        let m = self.model(user, link);
        if !m.admits(total) {
            return Err(Error::DomainError(format!(
                "link {} total flow {total} at or above capacity",
                self.links[link].index
            )));
        }
        Ok(m.marginal(own, total))
    }

    /// Per-user and system costs of a feasible profile.
    pub fn evaluate_cost(&self, profile: &StrategyProfile) -> Result<CostVector> {
        profile.validate(self)?;
        Ok(self.evaluate_unchecked(profile))
    }

    pub(crate) fn evaluate_unchecked(&self, profile: &StrategyProfile) -> CostVector {
        let totals = profile.link_totals();
        let per_user: Vec<f64> = (0..self.n_users())
            .map(|i| self.user_cost(i, profile.row(i), &totals))
            .collect();
        CostVector::from_per_user(per_user)
    }

    pub(crate) fn user_cost(&self, user: usize, own: &[f64], totals: &[f64]) -> f64 {
        own.iter()
            .zip(totals)
            .zip(&self.users[user].cost_models)
            .map(|((&x, &f), m)| m.value(x, f))
            .sum()
    }

    /// Weighted social cost `sum_i a_i J^i`.
    pub fn weighted_system_cost(&self, profile: &StrategyProfile, weights: &[f64]) -> f64 {
        let costs = self.evaluate_unchecked(profile);
        costs.per_user.iter().zip(weights).map(|(j, a)| j * a).sum()
    }
}

fn shared_mm1_capacity<'a>(mut models: impl Iterator<Item = &'a CostModel>) -> Option<f64> {
    let first = models.next()?.capacity()?;
    models
        .all(|m| m.capacity() == Some(first))
        .then_some(first)
}

fn classify(users: &[UserSpec]) -> Homogeneity {
    let shared = &users[0].cost_models;
    if !users.iter().all(|u| &u.cost_models == shared) {
        return Homogeneity::Standard;
    }
    // H5 needs one latency function of residual capacity on every link.
    let w = shared[0].weight;
    let h5 = shared
        .iter()
        .all(|m| matches!(m.form, CostForm::Mm1 { .. }) && m.weight == w);
    if h5 {
        Homogeneity::HomogeneousH5
    } else {
        Homogeneity::HomogeneousH14
    }
}

/// Per-user per-link flows, row-major (user, link).
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    n_users: usize,
    n_links: usize,
    flows: Vec<f64>,
}

impl StrategyProfile {
    pub fn zeros(n_users: usize, n_links: usize) -> Self {
        Self {
            n_users,
            n_links,
            flows: vec![0.0; n_users * n_links],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_users = rows.len();
        let n_links = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_links), "ragged flow matrix");
        Self {
            n_users,
            n_links,
            flows: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_links(&self) -> usize {
        self.n_links
    }

    pub fn get(&self, user: usize, link: usize) -> f64 {
        self.flows[user * self.n_links + link]
    }

    pub fn set(&mut self, user: usize, link: usize, value: f64) {
        self.flows[user * self.n_links + link] = value;
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.flows[user * self.n_links..(user + 1) * self.n_links]
    }

    pub fn row_mut(&mut self, user: usize) -> &mut [f64] {
        &mut self.flows[user * self.n_links..(user + 1) * self.n_links]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_users).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flows
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.flows
    }

    /// Aggregate flow per link.
    pub fn link_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_links];
        for i in 0..self.n_users {
            for (t, x) in totals.iter_mut().zip(self.row(i)) {
                *t += x;
            }
        }
        totals
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.flows
            .iter()
            .zip(&other.flows)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, game: &Game) -> Result<()> {
        if self.n_users != game.n_users() || self.n_links != game.n_links() {
            return Err(Error::InfeasibleProfile(format!(
                "profile is {}x{}, game is {}x{}",
                self.n_users,
                self.n_links,
                game.n_users(),
                game.n_links()
            )));
        }
        for (i, u) in game.users().iter().enumerate() {
            let row = self.row(i);
            if let Some(l) = row.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InfeasibleProfile(format!(
                    "user {} link {}: flow {} is negative or non-finite",
                    u.index,
                    l + 1,
                    row[l]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - u.demand).abs() > TOL_FEAS {
                return Err(Error::InfeasibleProfile(format!(
                    "user {}: flows sum to {sum}, demand is {}",
                    u.index, u.demand
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    pub per_user: Vec<f64>,
    pub system: f64,
}

impl CostVector {
    pub fn from_per_user(per_user: Vec<f64>) -> Self {
        let system = per_user.iter().sum();
        Self { per_user, system }
    }

    pub fn is_finite(&self) -> bool {
        self.system.is_finite()
    }
}
