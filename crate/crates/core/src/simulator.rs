//! Generative environment: hidden condition states, autoregressive fractal
//! value observations and maintenance costs.
//!
//! Time step `t` covers six months. At each step the controller picks `a_t`
//! from what it knows, pays `reward(s_t, a_t)`, the state moves to
//! `s_{t+1} ~ p(. | s_t, a_t)` and the observation `z_{t+1}` is emitted from
//! `s_{t+1}`. A trajectory of horizon `H` has `H` actions and rewards and
//! `H + 1` states and observations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Dataset, ModelSample, PomdpModel, Series, State};

/// Months of deterioration represented by one step.
pub const MONTHS_PER_STEP: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: State,
    pub observation: f64,
    pub reward: f64,
}

/// Draws an index from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Initial hidden state and first observation.
pub fn initial<R: Rng + ?Sized>(p: &ModelSample, rng: &mut R) -> Result<(State, f64)> {
    let s0 = sample_categorical(p.transitions.initial(), rng);
    let z0 = p.obs.emission(s0, None)?.sample(rng)?;
    Ok((s0, z0))
}

/// One environment transition.
pub fn step<R: Rng + ?Sized>(
    model: &PomdpModel,
    s: State,
    a: Action,
    z_prev: f64,
    p: &ModelSample,
    rng: &mut R,
) -> Result<StepOutcome> {
    let reward = model.reward(s, a)?;
    if z_prev > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "previous observation {z_prev} is positive"
        )));
    }
    let next_state = sample_categorical(p.transitions.row(a, s), rng);
    let observation = p.obs.emission(next_state, Some((z_prev, a)))?.sample(rng)?;
    Ok(StepOutcome {
        next_state,
        observation,
        reward,
    })
}

/// A controller driven through an episode.
///
/// `act` receives the true state so that fully observable controllers can be
/// expressed; belief-based controllers ignore it and learn from `observe`.
pub trait Policy {
    /// Called once per episode with the first observation.
    fn reset(&mut self, _z0: f64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, t: usize, state: State) -> Result<Action>;

    /// Called after every transition with the action taken, the previous and
    /// the new observation.
    fn observe(&mut self, _action: Action, _z_prev: f64, _z: f64) -> Result<()> {
        Ok(())
    }
}

/// Always the same action.
#[derive(Debug, Clone, Copy)]
pub struct FixedAction(pub Action);

impl Policy for FixedAction {
    fn act(&mut self, _t: usize, _state: State) -> Result<Action> {
        Ok(self.0)
    }
}

/// Stationary fully observable policy, one action per state.
#[derive(Debug, Clone)]
pub struct StatePolicy(pub Vec<Action>);

impl Policy for StatePolicy {
    fn act(&mut self, _t: usize, state: State) -> Result<Action> {
        Ok(self.0[state])
    }
}

/// Time-dependent fully observable policy, `actions[t][state]`.
#[derive(Debug, Clone)]
pub struct SchedulePolicy(pub Vec<Vec<Action>>);

impl Policy for SchedulePolicy {
    fn act(&mut self, t: usize, state: State) -> Result<Action> {
        let row = self
            .0
            .get(t)
            .or(self.0.last())
            .ok_or(Error::EmptyInput("empty schedule"))?;
        Ok(row[state])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
    pub observations: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
    }
}

/// Runs `policy` for `horizon` steps in the environment `p`.
pub fn rollout<P: Policy + ?Sized, R: Rng + ?Sized>(
    policy: &mut P,
    p: &ModelSample,
    model: &PomdpModel,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("rollout horizon must be at least 1".into()));
    }
    let (s0, z0) = initial(p, rng)?;
    let mut tr = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon),
        observations: Vec::with_capacity(horizon + 1),
        rewards: Vec::with_capacity(horizon),
    };
    tr.states.push(s0);
    tr.observations.push(z0);
    policy.reset(z0)?;
    let (mut s, mut z) = (s0, z0);
    for t in 0..horizon {
        let a = policy.act(t, s)?;
        if a >= model.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "policy action",
                index: a,
                limit: model.n_actions,
            });
        }
        let out = step(model, s, a, z, p, rng)?;
        policy.observe(a, z, out.observation)?;
        tr.actions.push(a);
        tr.rewards.push(out.reward);
        tr.states.push(out.next_state);
        tr.observations.push(out.observation);
        s = out.next_state;
        z = out.observation;
    }
    Ok(tr)
}

/// Like [`rollout`] but with a fresh stream per step: `rng_at(0)` draws the
/// initial state and observation, `rng_at(t + 1)` drives step `t`. Policies
/// run on the same streams see the same uniforms at every step, so their
/// trajectories stay coupled until their actions differ.
pub fn rollout_coupled<P, R, F>(
    policy: &mut P,
    p: &ModelSample,
    model: &PomdpModel,
    horizon: usize,
    mut rng_at: F,
) -> Result<Trajectory>
where
    P: Policy + ?Sized,
    R: Rng,
    F: FnMut(usize) -> R,
{
    if horizon == 0 {
        return Err(Error::InvalidParameter("rollout horizon must be at least 1".into()));
    }
    let (s0, z0) = initial(p, &mut rng_at(0))?;
    let mut tr = Trajectory {
        states: vec![s0],
        actions: Vec::with_capacity(horizon),
        observations: vec![z0],
        rewards: Vec::with_capacity(horizon),
    };
    policy.reset(z0)?;
    let (mut s, mut z) = (s0, z0);
    for t in 0..horizon {
        let a = policy.act(t, s)?;
        if a >= model.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "policy action",
                index: a,
                limit: model.n_actions,
            });
        }
        let out = step(model, s, a, z, p, &mut rng_at(t + 1))?;
        policy.observe(a, z, out.observation)?;
        tr.actions.push(a);
        tr.rewards.push(out.reward);
        tr.states.push(out.next_state);
        tr.observations.push(out.observation);
        s = out.next_state;
        z = out.observation;
    }
    Ok(tr)
}

/// How actions are chosen when generating synthetic datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    NeverRepair,
    /// Repair with probability `repair_prob[s]` in hidden state `s`; the
    /// repair action is drawn with weights `repair_weights` over actions
    /// `1..n_actions`.
    StateDependent {
        repair_prob: Vec<f64>,
        repair_weights: Vec<f64>,
    },
}

impl Behavior {
    /// Repair probability growing quadratically from 2% in the best state to
    /// 35% in the worst; tamping chosen 60% of the time among repairs.
    pub fn default_for(n_states: usize, n_actions: usize) -> Self {
        let repair_prob = (0..n_states)
            .map(|s| {
                let x = s as f64 / (n_states - 1).max(1) as f64;
                0.02 + 0.33 * x * x
            })
            .collect();
        let repair_weights = (1..n_actions)
            .map(|a| if a == 1 { 0.6 } else { 0.4 / (n_actions - 2) as f64 })
            .collect();
        Behavior::StateDependent {
            repair_prob,
            repair_weights,
        }
    }

    fn choose<R: Rng + ?Sized>(&self, s: State, rng: &mut R) -> Action {
        match self {
            Behavior::NeverRepair => 0,
            Behavior::StateDependent {
                repair_prob,
                repair_weights,
            } => {
                if rng.random::<f64>() < repair_prob[s] {
                    let total: f64 = repair_weights.iter().sum();
                    let w: Vec<f64> = repair_weights.iter().map(|w| w / total).collect();
                    1 + sample_categorical(&w, rng)
                } else {
                    0
                }
            }
        }
    }
}

/// Simulates `n_series` series of `length` observations under `behavior`.
pub fn generate_dataset<R: Rng + ?Sized>(
    p: &ModelSample,
    model: &PomdpModel,
    n_series: usize,
    length: usize,
    behavior: &Behavior,
    rng: &mut R,
) -> Result<Dataset> {
    if n_series == 0 || length < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least one series of length >= 2, got {n_series} x {length}"
        )));
    }
    if let Behavior::StateDependent {
        repair_prob,
        repair_weights,
    } = behavior
    {
        if repair_prob.len() != model.n_states || repair_weights.len() + 1 != model.n_actions {
            return Err(Error::DimensionMismatch("behavior does not match the model".into()));
        }
    }
    let mut series = Vec::with_capacity(n_series);
    for i in 0..n_series {
        let (mut s, mut z) = initial(p, rng)?;
        let mut obs = vec![z];
        let mut actions = Vec::with_capacity(length - 1);
        for _ in 1..length {
            let a = behavior.choose(s, rng);
            let out = step(model, s, a, z, p, rng)?;
            actions.push(a);
            obs.push(out.observation);
            s = out.next_state;
            z = out.observation;
        }
        series.push(Series::new(format!("s{i:03}"), obs, actions)?);
    }
    Ok(Dataset { series })
}
