//! Shared fixtures for the benchmarks.

use robmaint::fractal::{LevelSignal, DEFAULT_SPACING_M};
use robmaint::presets::{railway_truth, synthetic_posterior};
use robmaint::simulator::{generate_dataset, Behavior};
use robmaint::{Dataset, PomdpModel, PosteriorEnsemble};

/// `n` posterior-like samples around the reference parameters.
pub fn ensemble(n: usize) -> PosteriorEnsemble {
    synthetic_posterior(&railway_truth(), n, 200.0, 0.1, 1).expect("preset ensemble")
}

/// A dataset of the usual shape, 62 series of 20 observations.
pub fn dataset() -> Dataset {
    let mut rng = robmaint::rng::seeded(1);
    generate_dataset(
        &railway_truth(),
        &PomdpModel::railway(),
        62,
        20,
        &Behavior::default_for(4, 3),
        &mut rng,
    )
    .expect("preset dataset")
}

/// A rough level signal `length_m` long.
pub fn signal(length_m: f64) -> LevelSignal {
    LevelSignal::from_fn(length_m, DEFAULT_SPACING_M, |x| {
        3.0 * (x / 11.0).sin() + 0.8 * (x / 2.1).cos() + 0.2 * (x * 7.3).sin()
    })
    .expect("valid signal")
}
