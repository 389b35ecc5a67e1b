//! Probability kernels shared by the simulator, inference and evaluation.

mod dirichlet;
mod scalar;
mod student_t;
mod summary;

use rand::Rng;

pub use dirichlet::{sample_dirichlet, DirichletParams};
pub use scalar::ScalarPrior;
pub use student_t::{TruncStudentT, MIN_TRUNCATION_MASS};
pub use summary::{equal_tailed, hdi, mean_and_se, summarize, IntervalKind, SummaryStats};

use crate::model::{EmissionParams, EmissionPrior, ObservationParams, PriorConfig};

/// Log-density of `d` at `x`.
pub fn trunc_t_logpdf(x: f64, d: &TruncStudentT) -> f64 {
    d.logpdf(x)
}

/// One draw from `d`.
pub fn trunc_t_sample<R: Rng + ?Sized>(d: &TruncStudentT, rng: &mut R) -> crate::Result<f64> {
    d.sample(rng)
}

fn sample_block<R: Rng + ?Sized>(p: &EmissionPrior, n: usize, rng: &mut R) -> EmissionParams {
    EmissionParams {
        mu: (0..n).map(|s| p.mu.get(s).sample(rng)).collect(),
        sigma: (0..n).map(|s| p.sigma.get(s).sample(rng)).collect(),
        nu: (0..n).map(|s| p.nu.get(s).sample(rng)).collect(),
    }
}

/// Draws observation parameters from their priors.
///
/// Initial-observation locations are returned sorted in decreasing order,
/// the labelling convention that makes state 0 the best condition.
pub fn prior_sample<R: Rng + ?Sized>(priors: &PriorConfig, rng: &mut R) -> ObservationParams {
    let n = priors.n_states();
    let deterioration = sample_block(&priors.deterioration, n, rng);
    let repair = sample_block(&priors.repair, n, rng);
    let k_repair = (1..priors.n_actions()).map(|_| priors.k_repair.sample(rng)).collect();
    let mut initial = sample_block(&priors.initial, n, rng);
    initial.mu.sort_by(|a, b| b.total_cmp(a));
    ObservationParams {
        deterioration,
        repair,
        k_repair,
        initial,
    }
}
