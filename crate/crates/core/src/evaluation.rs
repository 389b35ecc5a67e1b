//! Monte Carlo policy evaluation over ensemble-sampled environments.
//!
//! Simulation `i` draws its environment uniformly from the ensemble with the
//! stream `(seed, i)` and runs step `t` on the stream `(seed, i, t)`. Every
//! policy evaluated with the same seed meets the same environments, and
//! transitions are drawn by inversion from shared uniforms, so trajectories
//! of different policies stay strongly coupled.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::EnsembleQ;
use crate::model::{Action, Horizon, ModelSample, PomdpModel, PosteriorEnsemble};
use crate::pomdp::QmdpAgent;
use crate::prob::{summarize, IntervalKind, SummaryStats};
use crate::rng::stream;
use crate::simulator::{rollout_coupled, FixedAction, Policy, SchedulePolicy};

/// Percentiles of the benchmark policies, as fractions.
pub const BENCHMARK_PERCENTILES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_sims: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Interval mass of the reported cost interval.
    pub mass: f64,
    pub interval: IntervalKind,
    /// Score discounted instead of plain sums.
    pub discounted: bool,
    /// Planning samples of the robust Q_MDP policy; 0 keeps them all.
    pub planning_samples: usize,
    /// Also evaluate the robust MDP policy with the true state visible.
    pub full_observability: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_sims: 2000,
            horizon: 50,
            seed: 0,
            mass: 0.95,
            interval: IntervalKind::Hdi,
            discounted: false,
            planning_samples: 500,
            full_observability: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sims == 0 || self.horizon == 0 {
            return Err(Error::InvalidParameter(
                "evaluation needs n_sims >= 1 and horizon >= 1".into(),
            ));
        }
        if !(self.mass > 0.0 && self.mass <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "interval mass {} not in (0, 1]",
                self.mass
            )));
        }
        Ok(())
    }
}

/// Return of every simulation, in simulation order.
pub fn episode_returns<F, P>(
    make: F,
    ensemble: &PosteriorEnsemble,
    model: &PomdpModel,
    cfg: &EvalConfig,
) -> Result<Vec<f64>>
where
    F: Fn() -> Result<P> + Sync,
    P: Policy,
{
    cfg.validate()?;
    (0..cfg.n_sims)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, &[i as u64]);
            let env = &ensemble.samples()[rng.random_range(0..ensemble.len())];
            let mut policy = make()?;
            let tr = rollout_coupled(&mut policy, env, model, cfg.horizon, |t| {
                stream(cfg.seed, &[i as u64, t as u64])
            })?;
            Ok(if cfg.discounted {
                tr.discounted_return(model.gamma)
            } else {
                tr.total_reward()
            })
        })
        .collect()
}

/// Mean, standard error and interval of the simulated returns.
pub fn evaluate_policy<F, P>(
    make: F,
    ensemble: &PosteriorEnsemble,
    model: &PomdpModel,
    cfg: &EvalConfig,
) -> Result<SummaryStats>
where
    F: Fn() -> Result<P> + Sync,
    P: Policy,
{
    let returns = episode_returns(make, ensemble, model, cfg)?;
    summarize(&returns, cfg.mass, cfg.interval)
}

/// Indices of the samples at the requested `log_post` percentiles
/// (fractions in `[0, 1]`, nearest rank).
pub fn percentile_indices(ensemble: &PosteriorEnsemble, percentiles: &[f64]) -> Result<Vec<usize>> {
    let mut order: Vec<(f64, usize)> = ensemble
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| s.log_post.map(|lp| (lp, i)).ok_or(Error::MissingLogPosterior(i)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = order.len();
    percentiles
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("percentile {p} not in [0, 1]")));
            }
            let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
            Ok(order[rank - 1].1)
        })
        .collect()
}

pub fn percentile_samples(ensemble: &PosteriorEnsemble, percentiles: &[f64]) -> Result<Vec<ModelSample>> {
    Ok(percentile_indices(ensemble, percentiles)?
        .into_iter()
        .map(|i| ensemble.samples()[i].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: String,
    pub stats: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<PolicyRow>,
    pub n_sims: usize,
    pub horizon: usize,
    pub seed: u64,
    pub discounted: bool,
}

impl EvalReport {
    pub fn get(&self, policy: &str) -> Option<&SummaryStats> {
        self.rows.iter().find(|r| r.policy == policy).map(|r| &r.stats)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["policy", "mean", "se", "hdi_lo", "hdi_hi"])?;
        for r in &self.rows {
            let s = &r.stats;
            out.write_record([
                r.policy.clone(),
                s.mean.to_string(),
                s.se.to_string(),
                s.hdi_lo.to_string(),
                s.hdi_hi.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Robust Q_MDP planner over `samples`, solved for a finite horizon.
pub struct QmdpPlanner {
    samples: Vec<ModelSample>,
    q: EnsembleQ,
}

impl QmdpPlanner {
    pub fn new(samples: Vec<ModelSample>, model: &PomdpModel, horizon: usize) -> Result<Self> {
        let planning = model.with_horizon(Horizon::Finite(horizon))?;
        let q = EnsembleQ::solve_samples(&samples, &planning, crate::mdp::DEFAULT_TOL)?;
        Ok(QmdpPlanner { samples, q })
    }

    pub fn agent(&self) -> Result<QmdpAgent<'_>> {
        QmdpAgent::new(&self.samples, &self.q)
    }

    pub fn samples(&self) -> &[ModelSample] {
        &self.samples
    }

    pub fn q(&self) -> &EnsembleQ {
        &self.q
    }
}

/// Name of the always-`a` benchmark.
pub fn always_name(a: Action) -> String {
    format!("always_a{a}")
}

/// Evaluates the robust Q_MDP policy, the posterior-mean Q_MDP policy, five
/// percentile-sample Q_MDP policies and always-a1, all on the same
/// simulation streams.
pub fn compare_policies(ensemble: &PosteriorEnsemble, model: &PomdpModel, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if model.n_actions < 2 {
        return Err(Error::InvalidParameter("the roster needs at least two actions".into()));
    }
    let h = cfg.horizon;
    let mut planners: Vec<(String, QmdpPlanner)> = Vec::new();
    let robust = QmdpPlanner::new(ensemble.thinned(cfg.planning_samples).samples().to_vec(), model, h)?;
    planners.push(("robust_qmdp".into(), robust));
    planners.push((
        "mean_qmdp".into(),
        QmdpPlanner::new(vec![ensemble.mean_sample()], model, h)?,
    ));
    let picks = percentile_samples(ensemble, &BENCHMARK_PERCENTILES)?;
    for (p, sample) in BENCHMARK_PERCENTILES.iter().zip(picks) {
        planners.push((
            format!("percentile_{}", (p * 100.0).round()),
            QmdpPlanner::new(vec![sample], model, h)?,
        ));
    }

    let mut rows = Vec::new();
    for (name, planner) in &planners {
        let stats = evaluate_policy(|| planner.agent(), ensemble, model, cfg)?;
        rows.push(PolicyRow {
            policy: name.clone(),
            stats,
        });
    }
    rows.push(PolicyRow {
        policy: always_name(1),
        stats: evaluate_policy(|| Ok(FixedAction(1)), ensemble, model, cfg)?,
    });
    if cfg.full_observability {
        let schedule = planners[0].1.q.robust_schedule();
        rows.push(PolicyRow {
            policy: "robust_mdp_full_observability".into(),
            stats: evaluate_policy(|| Ok(SchedulePolicy(schedule.clone())), ensemble, model, cfg)?,
        });
    }
    Ok(EvalReport {
        rows,
        n_sims: cfg.n_sims,
        horizon: h,
        seed: cfg.seed,
        discounted: cfg.discounted,
    })
}
