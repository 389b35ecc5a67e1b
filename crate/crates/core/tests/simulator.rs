mod common;

use proptest::prelude::*;

use common::{tan_quadrature, OracleT};
use robmaint::model::EmissionParams;
use robmaint::presets::{railway_truth, synthetic_posterior};
use robmaint::rng::{seeded, stream};
use robmaint::simulator::{
    generate_dataset, initial, rollout, rollout_coupled, step, Behavior, FixedAction, StatePolicy,
};
use robmaint::PomdpModel;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn observations_are_never_positive(seed in any::<u64>(), policy in prop::collection::vec(0usize..3, 4)) {
        let model = PomdpModel::railway();
        let env = synthetic_posterior(&railway_truth(), 1, 20.0, 0.4, seed).unwrap().samples()[0].clone();
        let tr = rollout(&mut StatePolicy(policy), &env, &model, 60, &mut seeded(seed)).unwrap();
        prop_assert!(tr.observations.iter().all(|&z| z <= 0.0));
        prop_assert_eq!(tr.observations.len(), 61);
        prop_assert_eq!(tr.states.len(), 61);
    }
}

#[test]
fn heavy_tails_still_respect_the_ceiling() {
    let model = PomdpModel::railway();
    let mut env = railway_truth();
    env.obs.deterioration = EmissionParams::constant(4, 0.05, 0.3, 0.7);
    env.obs.repair = EmissionParams::constant(4, -0.01, 0.5, 0.8);
    env.obs.initial = EmissionParams::constant(4, -0.01, 0.5, 0.8);
    for k in 0..200 {
        let tr = rollout(
            &mut StatePolicy(vec![0, 1, 2, 2]),
            &env,
            &model,
            40,
            &mut stream(3, &[k]),
        )
        .unwrap();
        assert!(tr.observations.iter().all(|&z| z <= 0.0));
    }
}

#[test]
fn tamping_mostly_lands_in_the_best_state() {
    let model = PomdpModel::railway();
    let env = railway_truth();
    let mut rng = seeded(8);
    for s in 0..4 {
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[step(&model, s, 2, -0.8, &env, &mut rng).unwrap().next_state] += 1;
        }
        let best = counts.iter().enumerate().max_by_key(|(_, c)| **c).unwrap().0;
        assert_eq!(best, 0, "from s{s}: {counts:?}");
    }
}

#[test]
fn deterioration_steps_match_the_truncated_mean() {
    let env = railway_truth();
    let z_prev = -0.02;
    let mut rng = seeded(4);
    for s in 0..4 {
        let e = env.obs.emission(s, Some((z_prev, 0))).unwrap();
        let n = 100_000;
        let steps: Vec<f64> = (0..n).map(|_| e.sample(&mut rng).unwrap() - z_prev).collect();
        let mean = steps.iter().sum::<f64>() / n as f64;
        let sd = (steps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let d = &env.obs.deterioration;
        let oracle = OracleT::new(d.mu[s], d.sigma[s], d.nu[s], f64::NEG_INFINITY, -z_prev);
        let expected = tan_quadrature(
            &|x| x * oracle.pdf(x),
            d.mu[s],
            d.sigma[s],
            f64::NEG_INFINITY,
            -z_prev,
            1e-12,
        );
        assert!(
            (mean - expected).abs() < 4.0 * sd / (n as f64).sqrt(),
            "s{s}: {mean} vs {expected}"
        );
    }
}

#[test]
fn coupled_rollouts_repeat_and_share_draws() {
    let model = PomdpModel::railway();
    let env = railway_truth();
    let run = |a| rollout_coupled(&mut FixedAction(a), &env, &model, 30, |t| stream(12, &[t as u64])).unwrap();
    assert_eq!(run(1), run(1));
    // the same initial draw whatever the policy
    assert_eq!(run(0).observations[0], run(2).observations[0]);
    assert_eq!(run(0).states[0], run(2).states[0]);
}

#[test]
fn datasets_contain_both_kinds_of_action() {
    let model = PomdpModel::railway();
    let data = generate_dataset(
        &railway_truth(),
        &model,
        62,
        20,
        &Behavior::default_for(4, 3),
        &mut seeded(1),
    )
    .unwrap();
    assert_eq!(data.series.len(), 62);
    assert!(data.series.iter().all(|s| s.len() == 20));
    let actions: Vec<usize> = data.series.iter().flat_map(|s| s.actions.iter().copied()).collect();
    for a in 0..3 {
        assert!(actions.contains(&a), "action {a} never taken");
    }
    let never = generate_dataset(&railway_truth(), &model, 3, 10, &Behavior::NeverRepair, &mut seeded(1)).unwrap();
    assert!(never.series.iter().all(|s| s.actions.iter().all(|&a| a == 0)));
}

#[test]
fn initial_draw_follows_the_initial_distribution() {
    let env = railway_truth();
    let mut rng = seeded(21);
    let n = 40_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        let (s, z) = initial(&env, &mut rng).unwrap();
        assert!(z <= 0.0);
        counts[s] += 1;
    }
    for (c, p) in counts.iter().zip(env.transitions.initial()) {
        let f = *c as f64 / n as f64;
        assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{f} vs {p}");
    }
}
