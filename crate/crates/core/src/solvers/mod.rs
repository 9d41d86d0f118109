//! Equilibrium and optimum solvers.

mod ascent;
mod nash;
mod optimum;
mod simplex;
pub mod waterfill;

pub use nash::{best_response, initial_profile, nash_equilibrium, nash_equilibrium_from, StartRule};
pub use optimum::{perceived_optimum, social_optimum};
pub(crate) use ascent::{ascend, Ascent};
pub(crate) use optimum::{check_weights, proportional_split, weighted_gradient};
pub use simplex::project_onto_simplex;

use crate::game::StrategyProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on the KKT residual required for convergence.
    pub tol_kkt: f64,
    /// Largest flow change in a sweep that still counts as settled.
    pub tol_step: f64,
    /// Best-response sweeps before giving up.
    pub max_iters: usize,
    /// Projected-descent iterations before giving up.
    pub descent_max_iters: usize,
    /// Relaxation applied once best-response dynamics start oscillating.
    pub damping: f64,
    /// Sweeps over which a non-decreasing residual counts as oscillation.
    pub oscillation_window: usize,
    /// Flows below this are zeroed after convergence.
    pub snap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-7,
            tol_step: 1e-9,
            max_iters: 10_000,
            descent_max_iters: 200_000,
            damping: 0.5,
            oscillation_window: 50,
            snap: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub profile: StrategyProfile,
    /// One multiplier per user for equilibria, a single one for aggregate optima.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Value of the solved objective: system cost for equilibria and
    /// social optima, the user's perceived system cost for perceived optima.
    pub objective: f64,
}

impl SolveReport {
    pub fn link_totals(&self) -> Vec<f64> {
        self.profile.link_totals()
    }
}
