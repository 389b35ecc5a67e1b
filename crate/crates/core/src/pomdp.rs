//! Belief tracking and the Q_MDP planner.
//!
//! Beliefs start at the planning sample's `T0`. The first action is chosen on
//! that prior alone; the first update after it folds in the likelihood of
//! `z_0` together with the transition and `z_1`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::emission_loglik;
use crate::mdp::{argmax, EnsembleQ, QSchedule, QTable};
use crate::model::{Action, ModelSample, PomdpModel, State};
use crate::simulator::{rollout, Policy, Trajectory};

/// Smallest likelihood a state may receive during robust tracking.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

const SUM_TOL: f64 = 1e-10;

/// Probability vector over hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("belief over no states"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "belief has negative or NaN entries: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidParameter(format!("belief sums to {sum}")));
        }
        Ok(Belief { probs })
    }

    pub fn uniform(n_states: usize) -> Self {
        Belief {
            probs: vec![1.0 / n_states as f64; n_states],
        }
    }

    pub fn one_hot(n_states: usize, s: State) -> Self {
        let mut probs = vec![0.0; n_states];
        probs[s] = 1.0;
        Belief { probs }
    }

    /// The sample's initial state distribution.
    pub fn initial(sample: &ModelSample) -> Self {
        Belief {
            probs: sample.transitions.initial().to_vec(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    /// Most probable state, ties to the lowest index.
    pub fn mode(&self) -> State {
        argmax(&self.probs)
    }
}

/// `Σ_s p(s' | s, a) b(s)`.
pub fn predict(b: &Belief, a: Action, sample: &ModelSample) -> Vec<f64> {
    let ns = b.n_states();
    let mut out = vec![0.0; ns];
    for (s, w) in b.probs.iter().enumerate() {
        if *w > 0.0 {
            for (o, p) in out.iter_mut().zip(sample.transitions.row(a, s)) {
                *o += w * p;
            }
        }
    }
    out
}

/// Weighs `prior` by the likelihoods and normalizes. With `floor` set, no
/// state's likelihood drops below it and the flag reports whether any did.
fn weigh(prior: Vec<f64>, logliks: &[f64], floor: Option<f64>) -> Result<(Belief, bool)> {
    let mut floored = false;
    let logs: Vec<f64> = match floor {
        Some(f) => {
            let lf = f.ln();
            logliks
                .iter()
                .map(|&l| {
                    if l.is_nan() || l < lf {
                        floored = true;
                        lf
                    } else {
                        l
                    }
                })
                .collect()
        }
        None => logliks.to_vec(),
    };
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::ImpossibleObservation);
    }
    let mut w: Vec<f64> = prior.iter().zip(&logs).map(|(p, l)| p * (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ImpossibleObservation);
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok((Belief { probs: w }, floored))
}

fn check_observation(z: f64) -> Result<()> {
    if z > 0.0 || z.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "observation {z} is not a non-positive number"
        )));
    }
    Ok(())
}

/// Bayes update after action `a` moved the system and `z` was observed.
pub fn belief_update(b: &Belief, a: Action, z_prev: f64, z: f64, sample: &ModelSample) -> Result<Belief> {
    update(b, a, z_prev, z, sample, None).map(|(b, _)| b)
}

/// Like [`belief_update`] but floors every state's likelihood at
/// [`LIKELIHOOD_FLOOR`] instead of failing; the flag reports flooring.
pub fn belief_update_floored(
    b: &Belief,
    a: Action,
    z_prev: f64,
    z: f64,
    sample: &ModelSample,
) -> Result<(Belief, bool)> {
    update(b, a, z_prev, z, sample, Some(LIKELIHOOD_FLOOR))
}

fn update(
    b: &Belief,
    a: Action,
    z_prev: f64,
    z: f64,
    sample: &ModelSample,
    floor: Option<f64>,
) -> Result<(Belief, bool)> {
    check_observation(z_prev)?;
    check_observation(z)?;
    if b.n_states() != sample.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "belief over {} states, model has {}",
            b.n_states(),
            sample.n_states()
        )));
    }
    if a >= sample.n_actions() {
        return Err(Error::IndexOutOfRange {
            what: "action",
            index: a,
            limit: sample.n_actions(),
        });
    }
    let logs: Vec<f64> = (0..b.n_states())
        .map(|s| emission_loglik(z, Some((z_prev, a)), s, &sample.obs))
        .collect();
    weigh(predict(b, a, sample), &logs, floor)
}

/// Conditions a belief on the first observation `z0`.
pub fn condition_initial(b: &Belief, z0: f64, sample: &ModelSample, floored: bool) -> Result<(Belief, bool)> {
    check_observation(z0)?;
    let logs: Vec<f64> = (0..b.n_states())
        .map(|s| emission_loglik(z0, None, s, &sample.obs))
        .collect();
    weigh(b.probs.clone(), &logs, floored.then_some(LIKELIHOOD_FLOOR))
}

fn weighted_q(b: &Belief, q: &QTable, out: &mut [f64]) {
    for (s, w) in b.probs.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(q.row(s)) {
            *o += w * v;
        }
    }
}

/// `argmax_a Σ_s b(s) Q(s, a)`, ties to the lowest action.
pub fn qmdp_action(b: &Belief, q: &QTable) -> Result<Action> {
    robust_qmdp_action(std::slice::from_ref(b), &[q])
}

/// Action maximizing the ensemble mean of belief-weighted Q-values, each
/// sample with its own belief.
pub fn robust_qmdp_action(beliefs: &[Belief], qtables: &[&QTable]) -> Result<Action> {
    if beliefs.is_empty() {
        return Err(Error::EmptyInput("no beliefs"));
    }
    if beliefs.len() != qtables.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} beliefs for {} Q-tables",
            beliefs.len(),
            qtables.len()
        )));
    }
    let na = qtables[0].n_actions();
    let mut acc = vec![0.0; na];
    for (b, q) in beliefs.iter().zip(qtables) {
        if q.n_states() != b.n_states() || q.n_actions() != na {
            return Err(Error::DimensionMismatch("belief and Q-table shapes differ".into()));
        }
        weighted_q(b, q, &mut acc);
    }
    Ok(argmax(&acc))
}

/// Optimistic value `max_a Σ_s b0(s) Q_0(s, a)`.
pub fn v_qmdp_bound(b0: &Belief, schedule: &QSchedule) -> f64 {
    let q = schedule.at(0);
    let mut acc = vec![0.0; q.n_actions()];
    weighted_q(b0, q, &mut acc);
    acc.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Robust Q_MDP controller with one belief per planning sample.
pub struct QmdpAgent<'a> {
    samples: &'a [ModelSample],
    q: &'a EnsembleQ,
    beliefs: Vec<Belief>,
    pending_z0: Option<f64>,
    floored: usize,
    trace: Vec<Vec<f64>>,
}

impl<'a> QmdpAgent<'a> {
    pub fn new(samples: &'a [ModelSample], q: &'a EnsembleQ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("no planning samples"));
        }
        if samples.len() != q.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} planning samples for {} Q-schedules",
                samples.len(),
                q.len()
            )));
        }
        let mut agent = QmdpAgent {
            samples,
            q,
            beliefs: Vec::new(),
            pending_z0: None,
            floored: 0,
            trace: Vec::new(),
        };
        agent.restart();
        Ok(agent)
    }

    fn restart(&mut self) {
        self.beliefs = self.samples.iter().map(Belief::initial).collect();
        self.pending_z0 = None;
        self.floored = 0;
        self.trace = vec![self.mean_belief()];
    }

    pub fn beliefs(&self) -> &[Belief] {
        &self.beliefs
    }

    /// Belief averaged over planning samples.
    pub fn mean_belief(&self) -> Vec<f64> {
        let n = self.beliefs.len() as f64;
        let mut m = vec![0.0; self.beliefs[0].n_states()];
        for b in &self.beliefs {
            for (x, p) in m.iter_mut().zip(&b.probs) {
                *x += p / n;
            }
        }
        m
    }

    /// Mean beliefs so far, the prior first.
    pub fn trace(&self) -> &[Vec<f64>] {
        &self.trace
    }

    /// Per-sample updates that needed likelihood flooring this episode.
    pub fn floored_steps(&self) -> usize {
        self.floored
    }
}

impl Policy for QmdpAgent<'_> {
    fn reset(&mut self, z0: f64) -> Result<()> {
        self.restart();
        self.pending_z0 = Some(z0);
        Ok(())
    }

    fn act(&mut self, t: usize, _state: State) -> Result<Action> {
        let tables: Vec<&QTable> = (0..self.q.len()).map(|i| self.q.table(i, t)).collect();
        robust_qmdp_action(&self.beliefs, &tables)
    }

    fn observe(&mut self, action: Action, z_prev: f64, z: f64) -> Result<()> {
        let z0 = self.pending_z0.take();
        let updated: Vec<(Belief, usize)> = self
            .beliefs
            .par_iter()
            .zip(self.samples.par_iter())
            .map(|(b, p)| -> Result<(Belief, usize)> {
                let mut hits = 0;
                let start = match z0 {
                    Some(z0) => {
                        let (b0, f) = condition_initial(b, z0, p, true)?;
                        hits += f as usize;
                        b0
                    }
                    None => b.clone(),
                };
                let (b1, f) = belief_update_floored(&start, action, z_prev, z, p)?;
                Ok((b1, hits + f as usize))
            })
            .collect::<Result<_>>()?;
        self.floored += updated.iter().map(|(_, f)| f).sum::<usize>();
        self.beliefs = updated.into_iter().map(|(b, _)| b).collect();
        self.trace.push(self.mean_belief());
        Ok(())
    }
}

/// One Q_MDP episode and its belief trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub trajectory: Trajectory,
    /// `H + 1` beliefs averaged over planning samples; entry `t` is what the
    /// planner knew when choosing action `t`.
    pub beliefs: Vec<Vec<f64>>,
    pub floored_steps: usize,
}

/// Runs the robust Q_MDP planner for `horizon` steps in the environment
/// `true_params`.
pub fn run_qmdp_episode<R: Rng + ?Sized>(
    true_params: &ModelSample,
    planning: &[ModelSample],
    q: &EnsembleQ,
    model: &PomdpModel,
    horizon: usize,
    rng: &mut R,
) -> Result<Episode> {
    let mut agent = QmdpAgent::new(planning, q)?;
    let trajectory = rollout(&mut agent, true_params, model, horizon, rng)?;
    Ok(Episode {
        trajectory,
        beliefs: agent.trace,
        floored_steps: agent.floored,
    })
}
