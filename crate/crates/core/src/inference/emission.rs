//! Observation log-likelihoods of the autoregressive emission model.

use crate::model::{Action, ObservationParams, Series, State};

/// `log p(z | z_prev, a_prev, s)`; `prev` is `None` for the first observation
/// of a series. Infeasible observations and degenerate parameters give
/// negative infinity.
pub fn emission_loglik(z: f64, prev: Option<(f64, Action)>, s: State, obs: &ObservationParams) -> f64 {
    if !(z <= 0.0) {
        return f64::NEG_INFINITY;
    }
    match obs.emission(s, prev) {
        Ok(e) if e.dist.mass() > 0.0 => e.logpdf(z),
        _ => f64::NEG_INFINITY,
    }
}

/// Emission log-likelihoods of a whole series, `[t * n_states + s]`.
pub fn loglik_matrix(series: &Series, obs: &ObservationParams) -> Vec<f64> {
    let ns = obs.n_states();
    let mut out = Vec::with_capacity(series.len() * ns);
    for t in 0..series.len() {
        let prev = series.prev_action(t).map(|a| (series.observations[t - 1], a));
        for s in 0..ns {
            out.push(emission_loglik(series.observations[t], prev, s, obs));
        }
    }
    out
}
