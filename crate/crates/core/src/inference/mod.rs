//! Posterior sampling of the hidden Markov model.

pub mod diagnostics;
pub mod emission;
pub mod ffbs;
pub mod mcmc;
pub mod updates;

pub use diagnostics::{compute_diagnostics, Diagnostics, ParamDiagnostic};
pub use emission::{emission_loglik, loglik_matrix};
pub use ffbs::{backward_sample, forward_filter, ForwardPass};
pub use mcmc::{dataset_loglik, run_mcmc, McmcConfig};
pub use updates::{update_obs_params, update_transitions, ObsGroups, ObsParam};
