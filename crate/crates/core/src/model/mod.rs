//! The decision problem and the parameter containers of the generative model.
//!
//! States are condition levels ordered from best (`0`) to worst; actions are
//! do-nothing (`0`) followed by repair actions of increasing intensity. Every
//! repair action carries its own autoregressive coefficient in the repair
//! emission.

pub mod io;
pub mod priors;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::TruncStudentT;

pub use io::{Dataset, Series};
pub use priors::{EmissionPrior, PerState, PriorConfig};

pub type State = usize;
pub type Action = usize;

/// The action that lets the system deteriorate.
pub const DO_NOTHING: Action = 0;

/// Row-sum tolerance for stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Costs as nonpositive rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    /// `[action][state]`
    action_cost: Vec<Vec<f64>>,
    /// `[state]`, charged on the state occupied when the action is chosen.
    state_cost: Vec<f64>,
}

impl CostTable {
    pub fn new(action_cost: Vec<Vec<f64>>, state_cost: Vec<f64>) -> Result<Self> {
        let ns = state_cost.len();
        if action_cost.iter().any(|row| row.len() != ns) {
            return Err(Error::DimensionMismatch(format!(
                "action cost rows must have {ns} entries"
            )));
        }
        let all = action_cost.iter().flatten().chain(&state_cost);
        if let Some(c) = all.copied().find(|c| !(c.is_finite() && *c <= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "cost entry {c} is not a finite nonpositive value"
            )));
        }
        Ok(CostTable {
            action_cost,
            state_cost,
        })
    }

    /// The railway maintenance costs: do-nothing, tamping, renewal plus
    /// tamping, and the per-state condition cost.
    pub fn railway() -> Self {
        CostTable {
            action_cost: vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![-50.0, -50.0, -50.0, -50.0],
                vec![-2050.0, -2710.0, -3370.0, -4050.0],
            ],
            state_cost: vec![-100.0, -200.0, -1000.0, -8000.0],
        }
    }

    pub fn zeros(n_actions: usize, n_states: usize) -> Self {
        CostTable {
            action_cost: vec![vec![0.0; n_states]; n_actions],
            state_cost: vec![0.0; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_cost.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_cost.len()
    }

    pub fn action_cost(&self, a: Action, s: State) -> f64 {
        self.action_cost[a][s]
    }

    pub fn state_cost(&self, s: State) -> f64 {
        self.state_cost[s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Infinite,
    Finite(usize),
}

/// The fixed decision problem shared by every parameter sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PomdpModel {
    pub n_states: usize,
    pub n_actions: usize,
    pub costs: CostTable,
    pub gamma: f64,
    pub horizon: Horizon,
}

impl PomdpModel {
    pub fn new(costs: CostTable, gamma: f64, horizon: Horizon) -> Result<Self> {
        let (n_states, n_actions) = (costs.n_states(), costs.n_actions());
        if n_states < 2 || n_actions < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 states and 2 actions, got {n_states} and {n_actions}"
            )));
        }
        let gamma_ok = match horizon {
            Horizon::Infinite => (0.0..1.0).contains(&gamma),
            Horizon::Finite(h) => h >= 1 && (0.0..=1.0).contains(&gamma),
        };
        if !gamma_ok {
            return Err(Error::InvalidParameter(format!(
                "discount {gamma} invalid for horizon {horizon:?}"
            )));
        }
        Ok(PomdpModel {
            n_states,
            n_actions,
            costs,
            gamma,
            horizon,
        })
    }

    /// Four condition states, three actions, a 0.995 discount per six-month
    /// step and the railway cost table.
    pub fn railway() -> Self {
        PomdpModel::new(CostTable::railway(), 0.995, Horizon::Infinite).expect("valid defaults")
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self> {
        PomdpModel::new(self.costs.clone(), self.gamma, horizon)
    }

    pub fn reward(&self, s: State, a: Action) -> Result<f64> {
        if s >= self.n_states {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                limit: self.n_states,
            });
        }
        if a >= self.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                limit: self.n_actions,
            });
        }
        Ok(self.costs.action_cost(a, s) + self.costs.state_cost(s))
    }

    /// Rewards laid out `[state * n_actions + action]`.
    pub fn reward_matrix(&self) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.n_states * self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                r.push(self.costs.action_cost(a, s) + self.costs.state_cost(s));
            }
        }
        r
    }
}

/// Per-action transition matrices `p(s' | s, a)` and the initial state
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSet {
    n_states: usize,
    n_actions: usize,
    /// `[(a * n_states + s) * n_states + s']`
    matrices: Vec<f64>,
    initial: Vec<f64>,
}

impl TransitionSet {
    /// Builds from nested `[action][state][next_state]` rows. Only shapes are
    /// checked here; see [`validate`] for the probabilistic invariants.
    pub fn from_rows(rows: Vec<Vec<Vec<f64>>>, initial: Vec<f64>) -> Result<Self> {
        let n_actions = rows.len();
        let n_states = initial.len();
        if n_actions == 0 || n_states == 0 {
            return Err(Error::DimensionMismatch("empty transition set".into()));
        }
        let mut matrices = Vec::with_capacity(n_actions * n_states * n_states);
        for (a, m) in rows.iter().enumerate() {
            if m.len() != n_states || m.iter().any(|r| r.len() != n_states) {
                return Err(Error::DimensionMismatch(format!(
                    "transition matrix for action {a} is not {n_states}x{n_states}"
                )));
            }
            matrices.extend(m.iter().flatten());
        }
        Ok(TransitionSet {
            n_states,
            n_actions,
            matrices,
            initial,
        })
    }

    pub fn identity(n_states: usize, n_actions: usize) -> Self {
        let mut matrices = vec![0.0; n_actions * n_states * n_states];
        for a in 0..n_actions {
            for s in 0..n_states {
                matrices[(a * n_states + s) * n_states + s] = 1.0;
            }
        }
        TransitionSet {
            n_states,
            n_actions,
            matrices,
            initial: vec![1.0 / n_states as f64; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, a: Action, s: State) -> &[f64] {
        let start = (a * self.n_states + s) * self.n_states;
        &self.matrices[start..start + self.n_states]
    }

    pub fn row_mut(&mut self, a: Action, s: State) -> &mut [f64] {
        let start = (a * self.n_states + s) * self.n_states;
        &mut self.matrices[start..start + self.n_states]
    }

    pub fn p(&self, a: Action, s: State, next: State) -> f64 {
        self.matrices[(a * self.n_states + s) * self.n_states + next]
    }

    /// The whole `[a][s][s']` block, row-major.
    pub fn as_flat(&self) -> &[f64] {
        &self.matrices
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn initial_mut(&mut self) -> &mut [f64] {
        &mut self.initial
    }

    /// First non-stochastic row, if any.
    pub fn check_stochastic(&self) -> Result<()> {
        for a in 0..self.n_actions {
            for s in 0..self.n_states {
                let row = self.row(a, s);
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::NotStochastic {
                        action: a,
                        state: s,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Student's t parameters per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub nu: Vec<f64>,
}

impl EmissionParams {
    pub fn constant(n_states: usize, mu: f64, sigma: f64, nu: f64) -> Self {
        EmissionParams {
            mu: vec![mu; n_states],
            sigma: vec![sigma; n_states],
            nu: vec![nu; n_states],
        }
    }

    fn len(&self) -> usize {
        self.mu.len()
    }
}

/// Observation model parameters.
///
/// * `deterioration`: the step `z_t - z_{t-1}` after do-nothing, truncated
///   above at `-z_{t-1}`.
/// * `repair`: `z_t` after a repair, located at `k_a * z_{t-1} + mu_r`,
///   truncated above at `0`.
/// * `initial`: the first observation of a series, truncated above at `0`.
///
/// Emissions condition on the state reached after the transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationParams {
    pub deterioration: EmissionParams,
    pub repair: EmissionParams,
    /// One coefficient per repair action, `k_repair[a - 1]`.
    pub k_repair: Vec<f64>,
    pub initial: EmissionParams,
}

/// An emission distribution: `z = offset + x`, `x ~ dist`.
#[derive(Debug, Clone, Copy)]
pub struct Emission {
    pub dist: TruncStudentT,
    pub offset: f64,
}

impl Emission {
    pub fn logpdf(&self, z: f64) -> f64 {
        self.dist.logpdf(z - self.offset)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        // the offset addition can round a hair above zero
        Ok((self.offset + self.dist.sample(rng)?).min(0.0))
    }
}

/// Which emission branch applies to an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionBranch {
    Initial,
    Deterioration,
    Repair(Action),
}

impl EmissionBranch {
    pub fn of(prev_action: Option<Action>) -> Self {
        match prev_action {
            None => EmissionBranch::Initial,
            Some(DO_NOTHING) => EmissionBranch::Deterioration,
            Some(a) => EmissionBranch::Repair(a),
        }
    }
}

impl ObservationParams {
    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    /// Autoregressive coefficient of repair action `a` (`a >= 1`).
    pub fn k(&self, a: Action) -> f64 {
        self.k_repair[a - 1]
    }

    /// Emission of the observation taken in state `s`, given the previous
    /// observation and the action that led here (`None` for the first one).
    pub fn emission(&self, s: State, prev: Option<(f64, Action)>) -> Result<Emission> {
        match prev {
            None => Ok(Emission {
                dist: TruncStudentT::upper(self.initial.mu[s], self.initial.sigma[s], self.initial.nu[s], 0.0)?,
                offset: 0.0,
            }),
            Some((z_prev, DO_NOTHING)) => Ok(Emission {
                dist: TruncStudentT::upper(
                    self.deterioration.mu[s],
                    self.deterioration.sigma[s],
                    self.deterioration.nu[s],
                    -z_prev,
                )?,
                offset: z_prev,
            }),
            Some((z_prev, a)) => {
                if a > self.k_repair.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "repair action",
                        index: a,
                        limit: self.k_repair.len() + 1,
                    });
                }
                Ok(Emission {
                    dist: TruncStudentT::upper(
                        self.k(a) * z_prev + self.repair.mu[s],
                        self.repair.sigma[s],
                        self.repair.nu[s],
                        0.0,
                    )?,
                    offset: 0.0,
                })
            }
        }
    }
}

/// One posterior draw: a complete plausible environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSample {
    pub transitions: TransitionSet,
    pub obs: ObservationParams,
    /// Unnormalized log-posterior, when known.
    pub log_post: Option<f64>,
}

impl ModelSample {
    pub fn n_states(&self) -> usize {
        self.transitions.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.n_actions()
    }

    /// Number of scalars in the flat layout.
    pub fn flat_len(n_states: usize, n_actions: usize) -> usize {
        n_states + n_actions * n_states * n_states + 9 * n_states + (n_actions - 1)
    }

    /// Names of the flat layout, matching [`ModelSample::to_flat`].
    pub fn parameter_names(n_states: usize, n_actions: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(Self::flat_len(n_states, n_actions));
        names.extend((0..n_states).map(|s| format!("T0[{s}]")));
        for a in 0..n_actions {
            for s in 0..n_states {
                names.extend((0..n_states).map(|t| format!("T[a{a}][{s},{t}]")));
            }
        }
        for block in ["d", "r"] {
            for field in ["mu", "sigma", "nu"] {
                names.extend((0..n_states).map(|s| format!("{field}_{block}[s{s}]")));
            }
        }
        names.extend((1..n_actions).map(|a| format!("k_r[a{a}]")));
        for field in ["mu", "sigma", "nu"] {
            names.extend((0..n_states).map(|s| format!("{field}_0[s{s}]")));
        }
        names
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::flat_len(self.n_states(), self.n_actions()));
        v.extend_from_slice(self.transitions.initial());
        v.extend_from_slice(self.transitions.as_flat());
        for e in [&self.obs.deterioration, &self.obs.repair] {
            v.extend_from_slice(&e.mu);
            v.extend_from_slice(&e.sigma);
            v.extend_from_slice(&e.nu);
        }
        v.extend_from_slice(&self.obs.k_repair);
        v.extend_from_slice(&self.obs.initial.mu);
        v.extend_from_slice(&self.obs.initial.sigma);
        v.extend_from_slice(&self.obs.initial.nu);
        v
    }

    pub fn from_flat(n_states: usize, n_actions: usize, flat: &[f64], log_post: Option<f64>) -> Result<Self> {
        let expected = Self::flat_len(n_states, n_actions);
        if flat.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "flat sample has {} values, expected {expected}",
                flat.len()
            )));
        }
        let mut rest = flat;
        let mut take = |n: usize| -> Vec<f64> {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        let initial = take(n_states);
        let matrices = take(n_actions * n_states * n_states);
        let emission = |take: &mut dyn FnMut(usize) -> Vec<f64>| EmissionParams {
            mu: take(n_states),
            sigma: take(n_states),
            nu: take(n_states),
        };
        let deterioration = emission(&mut take);
        let repair = emission(&mut take);
        let k_repair = take(n_actions - 1);
        let init = emission(&mut take);
        Ok(ModelSample {
            transitions: TransitionSet {
                n_states,
                n_actions,
                matrices,
                initial,
            },
            obs: ObservationParams {
                deterioration,
                repair,
                k_repair,
                initial: init,
            },
            log_post,
        })
    }
}

/// Provenance of one MCMC chain inside an ensemble.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain: usize,
    pub seed: u64,
    pub n_draws: usize,
}

/// Ordered collection of posterior draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    n_states: usize,
    n_actions: usize,
    samples: Vec<ModelSample>,
    chains: Vec<ChainMeta>,
}

impl PosteriorEnsemble {
    pub fn new(samples: Vec<ModelSample>, chains: Vec<ChainMeta>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or(Error::EmptyInput("posterior ensemble without samples"))?;
        let (n_states, n_actions) = (first.n_states(), first.n_actions());
        for (i, s) in samples.iter().enumerate() {
            if s.n_states() != n_states
                || s.n_actions() != n_actions
                || s.obs.n_states() != n_states
                || s.obs.k_repair.len() + 1 != n_actions
            {
                return Err(Error::DimensionMismatch(format!(
                    "sample {i} does not match {n_states} states x {n_actions} actions"
                )));
            }
        }
        Ok(PosteriorEnsemble {
            n_states,
            n_actions,
            samples,
            chains,
        })
    }

    /// Ensemble holding a single known environment.
    pub fn single(sample: ModelSample) -> Self {
        PosteriorEnsemble::new(vec![sample], Vec::new()).expect("one sample")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[ModelSample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> Option<&ModelSample> {
        self.samples.get(i)
    }

    pub fn chains(&self) -> &[ChainMeta] {
        &self.chains
    }

    /// Keeps the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices
            .iter()
            .map(|&i| {
                self.samples.get(i).cloned().ok_or(Error::IndexOutOfRange {
                    what: "sample",
                    index: i,
                    limit: self.samples.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PosteriorEnsemble::new(samples, self.chains.clone())
    }

    /// Every `stride`-th sample, at most `max` of them.
    pub fn thinned(&self, max: usize) -> Self {
        if max == 0 || max >= self.samples.len() {
            return self.clone();
        }
        let idx: Vec<usize> = (0..max).map(|i| i * self.samples.len() / max).collect();
        self.subset(&idx).expect("indices in range")
    }

    /// Element-wise mean of all parameters, rows renormalized.
    pub fn mean_sample(&self) -> ModelSample {
        let n = self.samples.len() as f64;
        let len = ModelSample::flat_len(self.n_states, self.n_actions);
        let mut acc = vec![0.0; len];
        for s in &self.samples {
            for (a, v) in acc.iter_mut().zip(s.to_flat()) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        let mut mean = ModelSample::from_flat(self.n_states, self.n_actions, &acc, None).expect("layout matches");
        normalize(mean.transitions.initial_mut());
        for a in 0..self.n_actions {
            for s in 0..self.n_states {
                normalize(mean.transitions.row_mut(a, s));
            }
        }
        mean
    }
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
}

/// One broken invariant of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

fn violation(path: impl Into<String>, message: &str) -> Violation {
    Violation {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Checks every invariant of `sample` against `model`. An empty list means
/// the sample is valid.
pub fn validate(sample: &ModelSample, model: &PomdpModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let (ns, na) = (model.n_states, model.n_actions);
    let tr = &sample.transitions;
    if tr.n_states() != ns || tr.n_actions() != na {
        out.push(violation("transitions", "dimension mismatch"));
        return out;
    }
    let check_prob = |path: String, row: &[f64], out: &mut Vec<Violation>| {
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            out.push(violation(path.clone(), "entry outside [0, 1]"));
        }
        if (row.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
            out.push(violation(path, "row not stochastic"));
        }
    };
    if tr.initial().len() != ns {
        out.push(violation("transitions.initial", "dimension mismatch"));
    } else {
        check_prob("transitions.initial".into(), tr.initial(), &mut out);
    }
    for a in 0..na {
        for s in 0..ns {
            check_prob(format!("transitions[a{a}][s{s}]"), tr.row(a, s), &mut out);
        }
    }

    let obs = &sample.obs;
    let blocks = [
        ("deterioration", &obs.deterioration),
        ("repair", &obs.repair),
        ("initial", &obs.initial),
    ];
    for (name, e) in blocks {
        if e.mu.len() != ns || e.sigma.len() != ns || e.nu.len() != ns {
            out.push(violation(format!("obs.{name}"), "dimension mismatch"));
            continue;
        }
        for s in 0..ns {
            if !e.mu[s].is_finite() {
                out.push(violation(format!("obs.{name}.mu[s{s}]"), "location not finite"));
            }
            if !(e.sigma[s] > 0.0 && e.sigma[s].is_finite()) {
                out.push(violation(format!("obs.{name}.sigma[s{s}]"), "scale nonpositive"));
            }
            if !(e.nu[s] > 0.0) {
                out.push(violation(
                    format!("obs.{name}.nu[s{s}]"),
                    "degrees of freedom nonpositive",
                ));
            }
        }
    }
    for (name, e) in [("repair", &obs.repair), ("initial", &obs.initial)] {
        for (s, &mu) in e.mu.iter().enumerate() {
            if mu > 0.0 {
                out.push(violation(format!("obs.{name}.mu[s{s}]"), "location positive"));
            }
        }
    }
    if obs.k_repair.len() + 1 != na {
        out.push(violation("obs.k_repair", "dimension mismatch"));
    }
    for (i, &k) in obs.k_repair.iter().enumerate() {
        if !(k > 0.0 && k < 1.0) {
            out.push(violation(
                format!("obs.k_repair[a{}]", i + 1),
                "autoregressive coefficient outside (0, 1)",
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn railway_rewards() {
        let m = PomdpModel::railway();
        assert_eq!(m.reward(0, 0).unwrap(), -100.0);
        assert_eq!(m.reward(3, 2).unwrap(), -12_050.0);
        assert_eq!(m.reward(1, 1).unwrap(), -250.0);
        assert!(m.reward(4, 0).is_err());
        assert!(m.reward(0, 3).is_err());
    }

    #[test]
    fn zero_costs_give_zero_rewards() {
        let m = PomdpModel::new(CostTable::zeros(3, 4), 0.9, Horizon::Infinite).unwrap();
        assert!(m.reward_matrix().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn model_rejects_bad_discount() {
        assert!(PomdpModel::new(CostTable::railway(), 1.0, Horizon::Infinite).is_err());
        assert!(PomdpModel::new(CostTable::railway(), 1.0, Horizon::Finite(10)).is_ok());
        assert!(CostTable::new(vec![vec![1.0, 0.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn flat_layout_round_trips() {
        let s = presets::railway_truth();
        let flat = s.to_flat();
        assert_eq!(flat.len(), ModelSample::flat_len(4, 3));
        assert_eq!(ModelSample::parameter_names(4, 3).len(), flat.len());
        let back = ModelSample::from_flat(4, 3, &flat, s.log_post).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validate_reports_broken_row() {
        let model = PomdpModel::railway();
        let mut s = presets::railway_truth();
        let row = s.transitions.row_mut(0, 1);
        let excess: f64 = row.iter().sum::<f64>() - 0.98;
        row[1] -= excess;
        let v = validate(&s, &model);
        assert!(v
            .iter()
            .any(|v| v.message == "row not stochastic" && v.path == "transitions[a0][s1]"));
    }

    #[test]
    fn validate_reports_negative_scale() {
        let model = PomdpModel::railway();
        let mut s = presets::railway_truth();
        s.obs.deterioration.sigma[1] = -0.1;
        let v = validate(&s, &model);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "scale nonpositive");
        assert_eq!(v[0].path, "obs.deterioration.sigma[s1]");
    }

    #[test]
    fn mean_sample_rows_are_stochastic() {
        let e = presets::synthetic_posterior(&presets::railway_truth(), 40, 80.0, 0.1, 3).unwrap();
        let m = e.mean_sample();
        for a in 0..3 {
            for s in 0..4 {
                assert!((m.transitions.row(a, s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert!(validate(&m, &PomdpModel::railway()).is_empty());
    }
}
