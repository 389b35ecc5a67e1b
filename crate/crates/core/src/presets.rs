//! Reference parameters shaped like an inferred railway deterioration model,
//! and synthetic posterior ensembles built around them.
//!
//! These values are illustrative: do-nothing keeps the track in its current
//! condition with high probability, tamping mostly holds or improves by one
//! level, renewal sends most tracks back to the best condition. They are used
//! by tests, benchmarks and the CLI when no inferred ensemble is available.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::model::{ChainMeta, EmissionParams, ModelSample, ObservationParams, PosteriorEnsemble, TransitionSet};
use crate::prob::DirichletParams;
use crate::rng;

/// Four states, three actions.
pub fn railway_truth() -> ModelSample {
    let transitions = TransitionSet::from_rows(
        vec![
            vec![
                vec![0.940, 0.050, 0.008, 0.002],
                vec![0.005, 0.920, 0.065, 0.010],
                vec![0.002, 0.003, 0.900, 0.095],
                vec![0.002, 0.002, 0.006, 0.990],
            ],
            vec![
                vec![0.970, 0.025, 0.004, 0.001],
                vec![0.550, 0.430, 0.015, 0.005],
                vec![0.100, 0.450, 0.430, 0.020],
                vec![0.020, 0.050, 0.330, 0.600],
            ],
            vec![
                vec![0.950, 0.040, 0.007, 0.003],
                vec![0.850, 0.120, 0.020, 0.010],
                vec![0.800, 0.100, 0.080, 0.020],
                vec![0.700, 0.120, 0.080, 0.100],
            ],
        ],
        vec![0.45, 0.30, 0.15, 0.10],
    )
    .expect("static shapes");
    let obs = ObservationParams {
        deterioration: EmissionParams {
            mu: vec![-0.01, -0.04, -0.08, -0.14],
            sigma: vec![0.010, 0.012, 0.015, 0.020],
            nu: vec![4.0, 4.0, 5.0, 6.0],
        },
        repair: EmissionParams {
            mu: vec![-0.15, -0.30, -0.50, -0.75],
            sigma: vec![0.04, 0.045, 0.05, 0.055],
            nu: vec![8.0, 8.0, 8.0, 8.0],
        },
        k_repair: vec![0.6, 0.25],
        initial: EmissionParams {
            mu: vec![-0.25, -0.55, -0.90, -1.30],
            sigma: vec![0.08, 0.10, 0.12, 0.15],
            nu: vec![10.0, 10.0, 10.0, 10.0],
        },
    };
    ModelSample {
        transitions,
        obs,
        log_post: None,
    }
}

/// A synthetic posterior around `center`.
///
/// Transition rows are drawn from `Dirichlet(concentration * row)`;
/// observation scalars get multiplicative log-normal jitter with standard
/// deviation `obs_jitter` (logit scale for the autoregressive coefficients).
/// Each sample's `log_post` is the log-density of its perturbation, so
/// samples near the center rank highest.
pub fn synthetic_posterior(
    center: &ModelSample,
    n: usize,
    concentration: f64,
    obs_jitter: f64,
    seed: u64,
) -> Result<PosteriorEnsemble> {
    let (ns, na) = (center.n_states(), center.n_actions());
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng::stream(seed, &[i as u64]);
        let mut log_post = 0.0;
        let mut draw_row = |row: &[f64], rng: &mut rng::StreamRng| -> Result<Vec<f64>> {
            let alpha = DirichletParams::new(row.iter().map(|p| concentration * p.max(1e-6)).collect())?;
            let x = alpha.sample(rng);
            log_post += alpha.logpdf(&x);
            Ok(x)
        };
        let initial = draw_row(center.transitions.initial(), &mut rng)?;
        let mut rows = Vec::with_capacity(na);
        for a in 0..na {
            rows.push(
                (0..ns)
                    .map(|s| draw_row(center.transitions.row(a, s), &mut rng))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let transitions = TransitionSet::from_rows(rows, initial)?;

        let mut jitter = |x: f64, rng: &mut rng::StreamRng| -> f64 {
            let e: f64 = StandardNormal.sample(rng);
            log_post -= 0.5 * e * e;
            x * (obs_jitter * e).exp()
        };
        let mut block = |e: &EmissionParams, rng: &mut rng::StreamRng| EmissionParams {
            mu: e.mu.iter().map(|&v| jitter(v, rng)).collect(),
            sigma: e.sigma.iter().map(|&v| jitter(v, rng)).collect(),
            nu: e.nu.iter().map(|&v| jitter(v, rng)).collect(),
        };
        let deterioration = block(&center.obs.deterioration, &mut rng);
        let repair = block(&center.obs.repair, &mut rng);
        let mut initial_obs = block(&center.obs.initial, &mut rng);
        initial_obs.mu.sort_by(|a, b| b.total_cmp(a));
        let k_repair = center
            .obs
            .k_repair
            .iter()
            .map(|&k| {
                let e: f64 = StandardNormal.sample(&mut rng);
                log_post -= 0.5 * e * e;
                let logit = (k / (1.0 - k)).ln() + obs_jitter * e;
                1.0 / (1.0 + (-logit).exp())
            })
            .collect();
        samples.push(ModelSample {
            transitions,
            obs: ObservationParams {
                deterioration,
                repair,
                k_repair,
                initial: initial_obs,
            },
            log_post: Some(log_post),
        });
    }
    PosteriorEnsemble::new(
        samples,
        vec![ChainMeta {
            chain: 0,
            seed,
            n_draws: n,
        }],
    )
}

/// Uniformly random row-stochastic transitions for `n_states` x `n_actions`.
pub fn random_transitions<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> TransitionSet {
    let flat = DirichletParams::uniform(n_states);
    let rows = (0..n_actions)
        .map(|_| (0..n_states).map(|_| flat.sample(rng)).collect())
        .collect();
    TransitionSet::from_rows(rows, flat.sample(rng)).expect("consistent shapes")
}
