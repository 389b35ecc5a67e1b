//! Maintenance policies for deteriorating assets whose model is only known
//! through a posterior sample.
//!
//! The crate covers the whole pipeline from condition signals to policies:
//!
//! * [`fractal`]: fractal values of a longitudinal level signal from
//!   Richardson-plot regressions.
//! * [`model`], [`simulator`]: an action-conditioned autoregressive hidden
//!   Markov model of track condition with truncated Student's t emissions.
//! * [`inference`]: Metropolis-within-Gibbs posterior sampling of that model.
//! * [`mdp`], [`pomdp`]: exact dynamic programming and the Q_MDP belief
//!   planner, both robust over a posterior ensemble.
//! * [`evaluation`]: Monte Carlo policy comparison with common random numbers.

pub mod error;
pub mod evaluation;
pub mod fractal;
pub mod inference;
pub mod mdp;
pub mod model;
pub mod pomdp;
pub mod presets;
pub mod prob;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    Action, CostTable, Dataset, Horizon, ModelSample, ObservationParams, PomdpModel, PosteriorEnsemble, PriorConfig,
    Series, State, TransitionSet,
};
