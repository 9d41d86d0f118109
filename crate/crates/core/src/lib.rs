//! Equilibria, optima and bargained outcomes of atomic splittable routing
//! games over parallel links, with the efficiency ratios between them.
//!
//! ```
//! use routebargain_core::{instances, BargainOptions, PriceReport, SolveCache, SolverOptions};
//!
//! let game = instances::nbs_three_user().unwrap();
//! let opts = SolverOptions::default();
//! let cache = SolveCache::compute(&game, &opts, &BargainOptions::default()).unwrap();
//! let prices = PriceReport::compute(&game, &cache, None, &opts).unwrap();
//! assert!(1.0 < prices.pos && prices.pos < prices.poa);
//! ```

pub mod bargaining;
pub mod cost;
pub mod error;
pub mod game;
pub mod instances;
pub mod metrics;
pub mod solvers;

pub use bargaining::{
    bargain, flow_exchange, nash_product, nbs_general, nbs_identical, nbs_two_user, proportional_profile,
    BargainMethod, BargainOptions, BargainOutcome, Baseline, EpsilonRule, NbsCertainty,
};
pub use cost::{CostForm, CostModel};
pub use error::{Error, Result};
pub use game::{CostVector, Game, Homogeneity, StrategyProfile, UserInput};
pub use metrics::{PriceReport, SolveCache};
pub use solvers::{nash_equilibrium, perceived_optimum, social_optimum, SolveReport, SolverOptions};
