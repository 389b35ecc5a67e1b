use robmaint::evaluation::{
    compare_policies, episode_returns, evaluate_policy, percentile_indices, EvalConfig, QmdpPlanner,
};
use robmaint::presets::{railway_truth, synthetic_posterior};
use robmaint::simulator::{FixedAction, SchedulePolicy};
use robmaint::PomdpModel;

fn cfg(n_sims: usize, seed: u64) -> EvalConfig {
    EvalConfig {
        n_sims,
        horizon: 30,
        seed,
        planning_samples: 10,
        ..Default::default()
    }
}

#[test]
fn standard_error_shrinks_with_the_root_of_n() {
    let model = PomdpModel::railway();
    let ens = synthetic_posterior(&railway_truth(), 30, 100.0, 0.2, 2).unwrap();
    // returns are heavy-tailed, so the smaller run needs a few thousand
    let small = evaluate_policy(|| Ok(FixedAction(1)), &ens, &model, &cfg(2000, 1)).unwrap();
    let large = evaluate_policy(|| Ok(FixedAction(1)), &ens, &model, &cfg(8000, 1)).unwrap();
    let ratio = large.se / small.se;
    assert!((ratio - 0.5).abs() <= 0.1, "se ratio {ratio}");
}

#[test]
fn same_seed_gives_the_same_report() {
    let model = PomdpModel::railway();
    let ens = synthetic_posterior(&railway_truth(), 12, 100.0, 0.2, 5).unwrap();
    let c = EvalConfig {
        full_observability: true,
        ..cfg(60, 8)
    };
    let a = compare_policies(&ens, &model, &c).unwrap();
    let b = compare_policies(&ens, &model, &c).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let other = compare_policies(&ens, &model, &EvalConfig { seed: 9, ..c }).unwrap();
    assert_ne!(a, other);
    let names: Vec<&str> = a.rows.iter().map(|r| r.policy.as_str()).collect();
    assert_eq!(
        names,
        [
            "robust_qmdp",
            "mean_qmdp",
            "percentile_0",
            "percentile_25",
            "percentile_50",
            "percentile_75",
            "percentile_100",
            "always_a1",
            "robust_mdp_full_observability"
        ]
    );
}

#[test]
fn policies_share_environments() {
    // a policy that ignores its state sees the same simulations whichever
    // way it is wrapped
    let model = PomdpModel::railway();
    let ens = synthetic_posterior(&railway_truth(), 8, 100.0, 0.2, 4).unwrap();
    let c = cfg(40, 6);
    let fixed = episode_returns(|| Ok(FixedAction(2)), &ens, &model, &c).unwrap();
    let schedule = vec![vec![2; 4]; c.horizon];
    let sched = episode_returns(|| Ok(SchedulePolicy(schedule.clone())), &ens, &model, &c).unwrap();
    assert_eq!(fixed, sched);
}

#[test]
fn seeing_the_state_does_not_hurt() {
    let model = PomdpModel::railway();
    let ens = synthetic_posterior(&railway_truth(), 10, 200.0, 0.1, 7).unwrap();
    let c = cfg(1500, 3);
    let planner = QmdpPlanner::new(ens.samples().to_vec(), &model, c.horizon).unwrap();
    let schedule = planner.q().robust_schedule();
    let partial = evaluate_policy(|| planner.agent(), &ens, &model, &c).unwrap();
    let full = evaluate_policy(|| Ok(SchedulePolicy(schedule.clone())), &ens, &model, &c).unwrap();
    assert!(
        full.mean >= partial.mean - 3.0 * full.se.hypot(partial.se),
        "{full:?} vs {partial:?}"
    );
}

#[test]
fn percentiles_use_nearest_rank() {
    let ens = synthetic_posterior(&railway_truth(), 8, 100.0, 0.2, 1).unwrap();
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| {
        let lp = |i: usize| ens.samples()[i].log_post.unwrap();
        lp(a).total_cmp(&lp(b))
    });
    // ranks ceil(p n) clamped to [1, n]: 1, 2, 4, 6, 8
    let idx = percentile_indices(&ens, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    assert_eq!(idx, [order[0], order[1], order[3], order[5], order[7]]);
    assert!(percentile_indices(&ens, &[1.5]).is_err());
}

#[test]
fn csv_has_one_row_per_policy() {
    let model = PomdpModel::railway();
    let ens = synthetic_posterior(&railway_truth(), 6, 100.0, 0.2, 2).unwrap();
    let report = compare_policies(&ens, &model, &cfg(20, 1)).unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "policy,mean,se,hdi_lo,hdi_hi");
    assert_eq!(lines.len(), report.rows.len() + 1);
    assert!(lines[1].starts_with("robust_qmdp,"));
}
