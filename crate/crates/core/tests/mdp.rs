mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{bare_sample, Mdp};
use robmaint::mdp::{
    backward_induction, mean_parameter_policy, optimality_counts, q_value_iteration, q_value_iteration_traced,
    EnsembleQ, QTable,
};
use robmaint::presets::{railway_truth, random_transitions, synthetic_posterior};
use robmaint::rng::seeded;
use robmaint::{CostTable, Horizon, ModelSample, PomdpModel, PosteriorEnsemble};

fn random_problem(seed: u64, ns: usize, na: usize, gamma: f64) -> (ModelSample, PomdpModel) {
    let mut rng = seeded(seed);
    let sample = bare_sample(random_transitions(ns, na, &mut rng));
    let action_cost = (0..na)
        .map(|_| (0..ns).map(|_| -rng.random_range(0.0..100.0)).collect())
        .collect();
    let state_cost = (0..ns).map(|_| -rng.random_range(0.0..1000.0)).collect();
    let model = PomdpModel::new(
        CostTable::new(action_cost, state_cost).unwrap(),
        gamma,
        Horizon::Infinite,
    )
    .unwrap();
    (sample, model)
}

fn shifted(model: &PomdpModel, c: f64, scale: f64) -> PomdpModel {
    let costs = &model.costs;
    let action_cost = (0..model.n_actions)
        .map(|a| (0..model.n_states).map(|s| scale * costs.action_cost(a, s)).collect())
        .collect();
    let state_cost = (0..model.n_states).map(|s| scale * costs.state_cost(s) + c).collect();
    PomdpModel::new(
        CostTable::new(action_cost, state_cost).unwrap(),
        model.gamma,
        model.horizon,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sweeps_contract(seed in any::<u64>(), gamma in 0.5..0.995f64) {
        let (sample, model) = random_problem(seed, 4, 3, gamma);
        let mut trace = Vec::new();
        q_value_iteration_traced(&sample.transitions, &model, 1e-6, |r| trace.push(r)).unwrap();
        for (k, w) in trace.windows(2).enumerate() {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            prop_assert!(w[1] <= gamma.powi(k as i32 + 1) * trace[0] * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn result_is_a_fixed_point(seed in any::<u64>(), gamma in 0.5..0.995f64) {
        let (sample, model) = random_problem(seed, 4, 3, gamma);
        let q = q_value_iteration(&sample, &model, 1e-6).unwrap();
        let mdp = Mdp::of(&sample, &model);
        for s in 0..4 {
            for a in 0..3 {
                let backed: f64 = mdp.r[s][a]
                    + gamma * (0..4).map(|n| mdp.p[a][s][n] * q.value(n)).sum::<f64>();
                prop_assert!((backed - q.q(s, a)).abs() <= 1e-6 * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn uniform_shift_moves_values_not_actions(seed in any::<u64>(), c in -500.0..0.0f64) {
        let (sample, model) = random_problem(seed, 4, 3, 0.95);
        let moved = shifted(&model, c, 1.0);
        let (q, r) = (q_value_iteration(&sample, &model, 1e-9).unwrap(), q_value_iteration(&sample, &moved, 1e-9).unwrap());
        for s in 0..4 {
            for a in 0..3 {
                prop_assert!((r.q(s, a) - q.q(s, a) - c / 0.05).abs() < 1e-6);
            }
        }
        prop_assert_eq!(q.policy(), r.policy());
    }

    #[test]
    fn scaling_costs_keeps_actions(seed in any::<u64>(), scale in 0.01..100.0f64) {
        let (sample, model) = random_problem(seed, 4, 3, 0.9);
        let q = q_value_iteration(&sample, &model, 1e-9).unwrap();
        let r = q_value_iteration(&sample, &shifted(&model, 0.0, scale), 1e-9 * scale).unwrap();
        prop_assert_eq!(q.policy(), r.policy());
    }

    #[test]
    fn robust_action_is_argmax_of_mean_q(seed in any::<u64>()) {
        let (_, model) = random_problem(seed, 4, 3, 0.95);
        let mut rng = seeded(seed ^ 0xabc);
        let samples: Vec<ModelSample> = (0..6).map(|_| bare_sample(random_transitions(4, 3, &mut rng))).collect();
        let q = EnsembleQ::solve_samples(&samples, &model, 1e-8).unwrap();
        for s in 0..4 {
            let mean: Vec<f64> = (0..3)
                .map(|a| (0..6).map(|i| q.table(i, 0).q(s, a)).sum::<f64>() / 6.0)
                .collect();
            let best = (0..3).fold(0, |b, a| if mean[a] > mean[b] { a } else { b });
            prop_assert_eq!(q.robust_action(s, 0), best);
        }
    }
}

#[test]
fn zero_rewards_give_zero_q() {
    let model = PomdpModel::new(CostTable::zeros(3, 4), 0.99, Horizon::Infinite).unwrap();
    let q = q_value_iteration(&railway_truth(), &model, 1e-9).unwrap();
    assert!(q.values().iter().all(|&v| v == 0.0));
}

#[test]
fn one_step_schedule_is_the_reward() {
    let model = PomdpModel::railway();
    let sched = backward_induction(&railway_truth(), &model, 1).unwrap();
    for s in 0..4 {
        for a in 0..3 {
            assert_eq!(sched.at(0).q(s, a), model.reward(s, a).unwrap());
        }
    }
}

#[test]
fn long_schedules_approach_the_stationary_solution() {
    let model = PomdpModel::railway();
    let truth = railway_truth();
    let q = q_value_iteration(&truth, &model, 1e-8).unwrap();
    let h = 3000;
    let sched = backward_induction(&truth, &model, h).unwrap();
    let bound = model.gamma.powi(h as i32) * 8050.0 / (1.0 - model.gamma) + 1e-8 / (1.0 - model.gamma);
    for s in 0..4 {
        for a in 0..3 {
            assert!((sched.at(0).q(s, a) - q.q(s, a)).abs() <= bound);
        }
    }
}

#[test]
fn short_schedules_match_the_decision_tree() {
    let (sample, model) = random_problem(17, 2, 2, 0.9);
    let mdp = Mdp::of(&sample, &model);
    let sched = backward_induction(&sample, &model.with_horizon(Horizon::Finite(3)).unwrap(), 3).unwrap();
    for t in 0..3 {
        for s in 0..2 {
            for a in 0..2 {
                assert!((sched.at(t).q(s, a) - mdp.tree_q(s, a, 3 - t)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn identical_samples_agree_everywhere() {
    let model = PomdpModel::railway();
    let truth = railway_truth();
    let e = PosteriorEnsemble::new(vec![truth.clone(); 5], Vec::new()).unwrap();
    let single = q_value_iteration(&truth, &model, 1e-6).unwrap().policy();
    let q = EnsembleQ::solve(&e, &model, 1e-6).unwrap();
    assert_eq!(q.robust_policy(0), single);
    assert_eq!(mean_parameter_policy(&e, &model, 1e-6).unwrap()[0], single);
    for (s, row) in optimality_counts(&e, &model).unwrap().iter().enumerate() {
        assert_eq!(row[single[s]], 5);
    }
}

#[test]
fn counts_partition_the_ensemble() {
    let model = PomdpModel::railway();
    let e = synthetic_posterior(&railway_truth(), 200, 30.0, 0.2, 6).unwrap();
    for row in optimality_counts(&e, &model).unwrap() {
        assert_eq!(row.iter().sum::<usize>(), 200);
    }
}

#[test]
fn ensemble_order_follows_sample_order() {
    let model = PomdpModel::railway();
    let e = synthetic_posterior(&railway_truth(), 64, 30.0, 0.2, 8).unwrap();
    let q = EnsembleQ::solve(&e, &model, 1e-6).unwrap();
    for (i, s) in e.samples().iter().enumerate() {
        assert_eq!(q.table(i, 0), &q_value_iteration(s, &model, 1e-6).unwrap());
    }
}

#[test]
fn two_point_example_picks_by_expectation() {
    // Q_A favours action 1 by 10, Q_B favours action 2 by 4
    let qa = QTable::from_values(1, 3, vec![0.0, 10.0, 0.0]).unwrap();
    let qb = QTable::from_values(1, 3, vec![0.0, 0.0, 4.0]).unwrap();
    let mean: Vec<f64> = (0..3).map(|a| (qa.q(0, a) + qb.q(0, a)) / 2.0).collect();
    assert_eq!(robmaint::mdp::argmax(&mean), 1);
}
