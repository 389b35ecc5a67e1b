//! Dynamic programming under full observability: Q-value iteration, finite
//! horizon backward induction and robust action selection over a posterior
//! ensemble.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Horizon, ModelSample, PomdpModel, PosteriorEnsemble, State, TransitionSet};

pub const DEFAULT_TOL: f64 = 1e-6;
/// Hard stop for value iteration; far above what γ = 0.995 needs.
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Q-values `[state][action]` stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm difference of the last two sweeps.
    pub residual: f64,
}

impl QTable {
    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch(format!(
                "{} Q-values for {n_states} x {n_actions}",
                values.len()
            )));
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
            iterations: 0,
            residual: 0.0,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable::from_values(n_states, n_actions, vec![0.0; n_states * n_actions]).expect("sized")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn q(&self, s: State, a: Action) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: State) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// `max_a Q(s, a)`.
    pub fn value(&self, s: State) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, s: State) -> Action {
        argmax(self.row(s))
    }

    pub fn policy(&self) -> Vec<Action> {
        (0..self.n_states).map(|s| self.greedy(s)).collect()
    }
}

/// Per-step Q-tables `t = 0..H-1` of a finite-horizon problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSchedule {
    tables: Vec<QTable>,
}

impl QSchedule {
    pub fn horizon(&self) -> usize {
        self.tables.len()
    }

    /// Table for step `t`; steps past the horizon reuse the last table.
    pub fn at(&self, t: usize) -> &QTable {
        &self.tables[t.min(self.tables.len() - 1)]
    }

    pub fn tables(&self) -> &[QTable] {
        &self.tables
    }

    /// `policy()[t][s]`.
    pub fn policy(&self) -> Vec<Vec<Action>> {
        self.tables.iter().map(QTable::policy).collect()
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> Action {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_problem(t: &TransitionSet, model: &PomdpModel) -> Result<()> {
    if t.n_states() != model.n_states || t.n_actions() != model.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "transitions are {}x{}, model is {}x{}",
            t.n_states(),
            t.n_actions(),
            model.n_states,
            model.n_actions
        )));
    }
    t.check_stochastic()
}

/// One Bellman backup `R + γ P max Q` of `q` into `out`; returns the smallest
/// and largest entry of `out - q`.
fn backup(t: &TransitionSet, rewards: &[f64], gamma: f64, q: &[f64], v: &mut [f64], out: &mut [f64]) -> (f64, f64) {
    let (ns, na) = (t.n_states(), t.n_actions());
    for (s, vs) in v.iter_mut().enumerate() {
        *vs = q[s * na..(s + 1) * na]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let p = t.as_flat();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in 0..na {
        for s in 0..ns {
            let row = &p[(a * ns + s) * ns..(a * ns + s + 1) * ns];
            let ev: f64 = row.iter().zip(v.iter()).map(|(p, v)| p * v).sum();
            let i = s * na + a;
            let new = rewards[i] + gamma * ev;
            lo = lo.min(new - q[i]);
            hi = hi.max(new - q[i]);
            out[i] = new;
        }
    }
    (lo, hi)
}

/// Value iteration on the Q-function, starting from zero. `trace` receives
/// every sweep's sup-norm change.
///
/// Stopping uses the span of the change rather than its sup-norm: once
/// `T(Q) - Q` lies within `[lo, hi]` with `hi - lo <= 2 tol`, the result is
/// `Q + (lo + hi) / (2 (1 - γ))`, whose Bellman residual is at most
/// `(hi - lo) / 2`. The span shrinks with the mixing of the chain, not just
/// with `γ`, which matters close to `γ = 1`.
pub fn q_value_iteration_traced(
    t: &TransitionSet,
    model: &PomdpModel,
    tol: f64,
    mut trace: impl FnMut(f64),
) -> Result<QTable> {
    check_problem(t, model)?;
    if !(model.gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "value iteration needs a discount below 1, got {}",
            model.gamma
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let (ns, na) = (model.n_states, model.n_actions);
    let rewards = model.reward_matrix();
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    for it in 1..=MAX_ITERATIONS {
        let (lo, hi) = backup(t, &rewards, model.gamma, &q, &mut v, &mut next);
        trace(lo.abs().max(hi.abs()));
        let half_span = 0.5 * (hi - lo);
        if half_span <= tol {
            let shift = 0.5 * (lo + hi) / (1.0 - model.gamma);
            q.iter_mut().for_each(|x| *x += shift);
            let mut table = QTable::from_values(ns, na, q)?;
            table.iterations = it;
            table.residual = half_span;
            return Ok(table);
        }
        std::mem::swap(&mut q, &mut next);
    }
    Err(Error::InvalidParameter(format!(
        "value iteration did not reach {tol} in {MAX_ITERATIONS} sweeps"
    )))
}

pub fn q_value_iteration(sample: &ModelSample, model: &PomdpModel, tol: f64) -> Result<QTable> {
    q_value_iteration_traced(&sample.transitions, model, tol, |_| {})
}

/// Backward induction with terminal value 0.
pub fn backward_induction(sample: &ModelSample, model: &PomdpModel, horizon: usize) -> Result<QSchedule> {
    let t = &sample.transitions;
    check_problem(t, model)?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let (ns, na) = (model.n_states, model.n_actions);
    let rewards = model.reward_matrix();
    let mut v = vec![0.0; ns];
    let mut tables = Vec::with_capacity(horizon);
    let mut q = vec![0.0; ns * na];
    for _ in 0..horizon {
        let mut next = vec![0.0; ns * na];
        backup(t, &rewards, model.gamma, &q, &mut v, &mut next);
        tables.push(QTable::from_values(ns, na, next.clone())?);
        q = next;
    }
    // first backup used Q_H = 0 regardless of the max over it
    tables.reverse();
    Ok(QSchedule { tables })
}

/// Q-tables of every ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleQ {
    horizon: Horizon,
    /// `schedules[i][t]`; a single table per sample for infinite horizons.
    schedules: Vec<Vec<QTable>>,
}

impl EnsembleQ {
    /// Solves every member in parallel; results keep the ensemble order.
    pub fn solve(ensemble: &PosteriorEnsemble, model: &PomdpModel, tol: f64) -> Result<Self> {
        Self::solve_samples(ensemble.samples(), model, tol)
    }

    pub fn solve_samples(samples: &[ModelSample], model: &PomdpModel, tol: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("empty ensemble"));
        }
        let schedules = samples
            .par_iter()
            .map(|s| match model.horizon {
                Horizon::Infinite => q_value_iteration(s, model, tol).map(|q| vec![q]),
                Horizon::Finite(h) => backward_induction(s, model, h).map(|q| q.tables),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleQ {
            horizon: model.horizon,
            schedules,
        })
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.schedules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedules.is_empty()
    }

    /// Table of sample `i` at step `t` (ignored for infinite horizons).
    pub fn table(&self, i: usize, t: usize) -> &QTable {
        let sched = &self.schedules[i];
        &sched[t.min(sched.len() - 1)]
    }

    /// Mean over samples of `Q(., ., t)`.
    pub fn mean_table(&self, t: usize) -> QTable {
        let first = self.table(0, t);
        let mut acc = vec![0.0; first.values.len()];
        for i in 0..self.len() {
            for (a, v) in acc.iter_mut().zip(&self.table(i, t).values) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        QTable::from_values(first.n_states, first.n_actions, acc).expect("same shape")
    }

    /// Action maximizing the ensemble-mean Q-value.
    pub fn robust_action(&self, s: State, t: usize) -> Action {
        let n_actions = self.table(0, t).n_actions;
        let mut mean = vec![0.0; n_actions];
        for i in 0..self.len() {
            for (m, q) in mean.iter_mut().zip(self.table(i, t).row(s)) {
                *m += q;
            }
        }
        argmax(&mean)
    }

    pub fn robust_policy(&self, t: usize) -> Vec<Action> {
        self.mean_table(t).policy()
    }

    /// `robust_schedule()[t][s]`; one row for infinite horizons.
    pub fn robust_schedule(&self) -> Vec<Vec<Action>> {
        (0..self.schedules[0].len()).map(|t| self.robust_policy(t)).collect()
    }

    /// `counts[s][a]`: members for which `a` is greedy in `s` at step `t`.
    pub fn optimality_counts(&self, t: usize) -> Vec<Vec<usize>> {
        let first = self.table(0, t);
        let mut counts = vec![vec![0; first.n_actions]; first.n_states];
        for i in 0..self.len() {
            let q = self.table(i, t);
            for (s, row) in counts.iter_mut().enumerate() {
                row[q.greedy(s)] += 1;
            }
        }
        counts
    }
}

/// Robust action in state `s` (step `t` for finite horizons).
pub fn robust_action(ensemble: &PosteriorEnsemble, model: &PomdpModel, s: State, t: Option<usize>) -> Result<Action> {
    if s >= model.n_states {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: s,
            limit: model.n_states,
        });
    }
    Ok(EnsembleQ::solve(ensemble, model, DEFAULT_TOL)?.robust_action(s, t.unwrap_or(0)))
}

pub fn optimality_counts(ensemble: &PosteriorEnsemble, model: &PomdpModel) -> Result<Vec<Vec<usize>>> {
    Ok(EnsembleQ::solve(ensemble, model, DEFAULT_TOL)?.optimality_counts(0))
}

/// Greedy policy of the element-wise mean parameters, `[t][s]` (one row for
/// infinite horizons).
pub fn mean_parameter_policy(ensemble: &PosteriorEnsemble, model: &PomdpModel, tol: f64) -> Result<Vec<Vec<Action>>> {
    let mean = ensemble.mean_sample();
    Ok(match model.horizon {
        Horizon::Infinite => vec![q_value_iteration(&mean, model, tol)?.policy()],
        Horizon::Finite(h) => backward_induction(&mean, model, h)?.policy(),
    })
}
