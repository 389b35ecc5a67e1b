//! Conditional updates of one Gibbs sweep: conjugate Dirichlet draws for the
//! transitions, scalar random-walk Metropolis for the observation
//! parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::emission::emission_loglik;
use crate::model::{
    Action, EmissionParams, EmissionPrior, ObservationParams, PriorConfig, Series, State, TransitionSet,
};
use crate::prob::ScalarPrior;

/// Conjugate draw of every transition row and the initial distribution.
pub fn update_transitions<R: Rng + ?Sized>(
    paths: &[Vec<State>],
    series: &[Series],
    priors: &PriorConfig,
    rng: &mut R,
) -> Result<TransitionSet> {
    if paths.len() != series.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} paths for {} series",
            paths.len(),
            series.len()
        )));
    }
    let (ns, na) = (priors.n_states(), priors.n_actions());
    let mut init = vec![0.0; ns];
    let mut counts = vec![vec![vec![0.0; ns]; ns]; na];
    for (path, s) in paths.iter().zip(series) {
        if path.len() != s.len() {
            return Err(Error::DimensionMismatch(format!(
                "path of {} for series `{}`",
                path.len(),
                s.id
            )));
        }
        init[path[0]] += 1.0;
        for (t, &a) in s.actions.iter().enumerate() {
            counts[a][path[t]][path[t + 1]] += 1.0;
        }
    }
    let initial = priors.alpha0.posterior(&init)?.sample(rng);
    let rows = counts
        .iter()
        .enumerate()
        .map(|(a, m)| {
            m.iter()
                .enumerate()
                .map(|(s, c)| Ok(priors.alpha_t[a][s].posterior(c)?.sample(rng)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    TransitionSet::from_rows(rows, initial)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Deterioration,
    Repair,
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Mu,
    Sigma,
    Nu,
}

/// One scalar observation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObsParam {
    Emission {
        block: Block,
        field: Field,
        state: State,
    },
    /// Autoregressive coefficient of repair action `a >= 1`.
    K(Action),
}

impl ObsParam {
    /// Every scalar, in update order.
    pub fn all(n_states: usize, n_actions: usize) -> Vec<ObsParam> {
        let mut out = Vec::with_capacity(9 * n_states + n_actions - 1);
        for block in [Block::Deterioration, Block::Repair, Block::Initial] {
            for field in [Field::Mu, Field::Sigma, Field::Nu] {
                for state in 0..n_states {
                    out.push(ObsParam::Emission { block, field, state });
                }
            }
        }
        out.extend((1..n_actions).map(ObsParam::K));
        out
    }

    pub fn name(&self) -> String {
        match self {
            ObsParam::Emission { block, field, state } => {
                let b = match block {
                    Block::Deterioration => "deterioration",
                    Block::Repair => "repair",
                    Block::Initial => "initial",
                };
                let f = match field {
                    Field::Mu => "mu",
                    Field::Sigma => "sigma",
                    Field::Nu => "nu",
                };
                format!("obs.{b}.{f}[s{state}]")
            }
            ObsParam::K(a) => format!("obs.k_repair[a{a}]"),
        }
    }

    /// Starting random-walk scale on the proposal scale of the parameter.
    pub fn default_scale(&self) -> f64 {
        match self {
            ObsParam::Emission {
                field: Field::Mu,
                block: Block::Deterioration,
                ..
            } => 0.005,
            ObsParam::Emission { field: Field::Mu, .. } => 0.03,
            ObsParam::Emission {
                field: Field::Sigma, ..
            } => 0.15,
            ObsParam::Emission { field: Field::Nu, .. } => 0.5,
            ObsParam::K(_) => 0.3,
        }
    }

    pub fn get(&self, obs: &ObservationParams) -> f64 {
        match *self {
            ObsParam::Emission { block, field, state } => field_of(block_of(obs, block), field)[state],
            ObsParam::K(a) => obs.k(a),
        }
    }

    pub fn set(&self, obs: &mut ObservationParams, value: f64) {
        match *self {
            ObsParam::Emission { block, field, state } => {
                let e = match block {
                    Block::Deterioration => &mut obs.deterioration,
                    Block::Repair => &mut obs.repair,
                    Block::Initial => &mut obs.initial,
                };
                let v = match field {
                    Field::Mu => &mut e.mu,
                    Field::Sigma => &mut e.sigma,
                    Field::Nu => &mut e.nu,
                };
                v[state] = value;
            }
            ObsParam::K(a) => obs.k_repair[a - 1] = value,
        }
    }

    fn prior<'a>(&self, priors: &'a PriorConfig) -> &'a ScalarPrior {
        match *self {
            ObsParam::Emission { block, field, state } => {
                let p: &EmissionPrior = match block {
                    Block::Deterioration => &priors.deterioration,
                    Block::Repair => &priors.repair,
                    Block::Initial => &priors.initial,
                };
                match field {
                    Field::Mu => p.mu.get(state),
                    Field::Sigma => p.sigma.get(state),
                    Field::Nu => p.nu.get(state),
                }
            }
            ObsParam::K(_) => &priors.k_repair,
        }
    }
}

fn block_of(obs: &ObservationParams, block: Block) -> &EmissionParams {
    match block {
        Block::Deterioration => &obs.deterioration,
        Block::Repair => &obs.repair,
        Block::Initial => &obs.initial,
    }
}

fn field_of(e: &EmissionParams, field: Field) -> &[f64] {
    match field {
        Field::Mu => &e.mu,
        Field::Sigma => &e.sigma,
        Field::Nu => &e.nu,
    }
}

/// Observations grouped by emission branch and hidden state under fixed
/// state paths.
#[derive(Debug, Clone, Default)]
pub struct ObsGroups {
    /// `[s]`: first observations.
    pub initial: Vec<Vec<f64>>,
    /// `[s]`: `(z, z_prev)` after do-nothing.
    pub deterioration: Vec<Vec<(f64, f64)>>,
    /// `[s]`: `(z, z_prev, a)` after a repair.
    pub repair: Vec<Vec<(f64, f64, Action)>>,
}

impl ObsGroups {
    pub fn new(paths: &[Vec<State>], series: &[Series], n_states: usize) -> Self {
        let mut g = ObsGroups {
            initial: vec![Vec::new(); n_states],
            deterioration: vec![Vec::new(); n_states],
            repair: vec![Vec::new(); n_states],
        };
        for (path, s) in paths.iter().zip(series) {
            g.initial[path[0]].push(s.observations[0]);
            for t in 1..s.len() {
                let (z, zp, a) = (s.observations[t], s.observations[t - 1], s.actions[t - 1]);
                if a == 0 {
                    g.deterioration[path[t]].push((z, zp));
                } else {
                    g.repair[path[t]].push((z, zp, a));
                }
            }
        }
        g
    }

    /// Log-likelihood of the observations governed by `(block, s)`.
    pub fn block_loglik(&self, obs: &ObservationParams, block: Block, s: State) -> f64 {
        match block {
            Block::Initial => self.initial[s].iter().map(|&z| emission_loglik(z, None, s, obs)).sum(),
            Block::Deterioration => self.deterioration[s]
                .iter()
                .map(|&(z, zp)| emission_loglik(z, Some((zp, 0)), s, obs))
                .sum(),
            Block::Repair => self.repair[s]
                .iter()
                .map(|&(z, zp, a)| emission_loglik(z, Some((zp, a)), s, obs))
                .sum(),
        }
    }

    /// Log-likelihood of every observation that followed repair action `a`.
    pub fn action_loglik(&self, obs: &ObservationParams, a: Action) -> f64 {
        let mut ll = 0.0;
        for (s, group) in self.repair.iter().enumerate() {
            for &(z, zp, b) in group {
                if b == a {
                    ll += emission_loglik(z, Some((zp, a)), s, obs);
                }
            }
        }
        ll
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Proposes a new value and returns it with the log-Jacobian of the
/// transform, or `None` if the proposal leaves the support.
fn propose<R: Rng + ?Sized>(
    p: &ObsParam,
    obs: &ObservationParams,
    x: f64,
    scale: f64,
    rng: &mut R,
) -> Option<(f64, f64)> {
    let e: f64 = StandardNormal.sample(rng);
    match *p {
        ObsParam::Emission {
            field: Field::Mu,
            block,
            state,
        } => {
            let y = x + scale * e;
            match block {
                Block::Deterioration => Some((y, 0.0)),
                Block::Repair => (y <= 0.0).then_some((y, 0.0)),
                Block::Initial => {
                    let mu = &obs.initial.mu;
                    let above = state.checked_sub(1).map_or(0.0, |i| mu[i]);
                    let below = mu.get(state + 1).copied().unwrap_or(f64::NEG_INFINITY);
                    (y <= above && y >= below).then_some((y, 0.0))
                }
            }
        }
        ObsParam::Emission { .. } => {
            let y = x * (scale * e).exp();
            (y > 0.0 && y.is_finite()).then(|| (y, y.ln() - x.ln()))
        }
        ObsParam::K(_) => {
            let y = expit(logit(x) + scale * e);
            (y > 0.0 && y < 1.0).then(|| (y, (y * (1.0 - y)).ln() - (x * (1.0 - x)).ln()))
        }
    }
}

/// One Metropolis step per observation scalar, in [`ObsParam::all`] order.
/// Returns the updated parameters and which proposals were accepted.
pub fn update_obs_params<R: Rng + ?Sized>(
    groups: &ObsGroups,
    current: &ObservationParams,
    priors: &PriorConfig,
    scales: &[f64],
    rng: &mut R,
) -> Result<(ObservationParams, Vec<bool>)> {
    let ns = current.n_states();
    let params = ObsParam::all(ns, current.k_repair.len() + 1);
    if scales.len() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} proposal scales for {} parameters",
            scales.len(),
            params.len()
        )));
    }
    let mut obs = current.clone();
    let blocks = [Block::Deterioration, Block::Repair, Block::Initial];
    let mut cache: Vec<Vec<f64>> = blocks
        .iter()
        .map(|&b| (0..ns).map(|s| groups.block_loglik(&obs, b, s)).collect())
        .collect();
    let mut accepted = vec![false; params.len()];
    for (i, p) in params.iter().enumerate() {
        let x = p.get(&obs);
        let Some((y, log_jac)) = propose(p, &obs, x, scales[i], rng) else {
            continue;
        };
        let prior = p.prior(priors);
        let lp_new = prior.logpdf(y);
        if lp_new == f64::NEG_INFINITY {
            continue;
        }
        let lp_old = prior.logpdf(x);
        let mut proposal = obs.clone();
        p.set(&mut proposal, y);
        let (ll_old, ll_new) = match *p {
            ObsParam::Emission { block, state, .. } => {
                let bi = blocks.iter().position(|b| *b == block).expect("known block");
                (cache[bi][state], groups.block_loglik(&proposal, block, state))
            }
            ObsParam::K(a) => (groups.action_loglik(&obs, a), groups.action_loglik(&proposal, a)),
        };
        let log_ratio = (lp_new + ll_new + log_jac) - (lp_old + ll_old);
        if log_ratio.is_nan() || ll_new == f64::NEG_INFINITY {
            continue;
        }
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            obs = proposal;
            accepted[i] = true;
            match *p {
                ObsParam::Emission { block, state, .. } => {
                    let bi = blocks.iter().position(|b| *b == block).expect("known block");
                    cache[bi][state] = ll_new;
                }
                ObsParam::K(_) => {
                    for s in 0..ns {
                        cache[1][s] = groups.block_loglik(&obs, Block::Repair, s);
                    }
                }
            }
        }
    }
    ridge_move(groups, &mut obs, priors, rng);
    Ok((obs, accepted))
}

/// Coordinates of one emission group used by joint moves:
/// `(mu, ln sigma, ln nu)`.
pub fn group_coords(obs: &ObservationParams, block: Block, s: State) -> [f64; 3] {
    let e = block_of(obs, block);
    [e.mu[s], e.sigma[s].ln(), e.nu[s].ln()]
}

fn block_of_mut(obs: &mut ObservationParams, block: Block) -> &mut EmissionParams {
    match block {
        Block::Deterioration => &mut obs.deterioration,
        Block::Repair => &mut obs.repair,
        Block::Initial => &mut obs.initial,
    }
}

fn mu_admissible(obs: &ObservationParams, block: Block, s: State, mu: f64) -> bool {
    match block {
        Block::Deterioration => true,
        Block::Repair => mu <= 0.0,
        Block::Initial => {
            let m = &obs.initial.mu;
            let above = s.checked_sub(1).map_or(0.0, |i| m[i]);
            let below = m.get(s + 1).copied().unwrap_or(f64::NEG_INFINITY);
            mu <= above && mu >= below
        }
    }
}

/// Random-walk Metropolis on all three parameters of group `(block, s)` at
/// once, stepping `chol * e` in group coordinates. `chol` is lower
/// triangular. Returns whether the move was accepted.
pub fn group_move<R: Rng + ?Sized>(
    groups: &ObsGroups,
    obs: &mut ObservationParams,
    priors: &PriorConfig,
    block: Block,
    s: State,
    chol: &[[f64; 3]; 3],
    rng: &mut R,
) -> bool {
    let x = group_coords(obs, block, s);
    let e: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let y: [f64; 3] = std::array::from_fn(|i| x[i] + (0..=i).map(|j| chol[i][j] * e[j]).sum::<f64>());
    let (sigma, nu) = (y[1].exp(), y[2].exp());
    if !mu_admissible(obs, block, s, y[0]) || !(sigma > 0.0 && sigma.is_finite() && nu > 0.0 && nu.is_finite()) {
        return false;
    }
    let prior = match block {
        Block::Deterioration => &priors.deterioration,
        Block::Repair => &priors.repair,
        Block::Initial => &priors.initial,
    };
    // density in group coordinates carries the log-scale Jacobian
    let log_prior = |c: &[f64; 3]| {
        prior.mu.get(s).logpdf(c[0])
            + prior.sigma.get(s).logpdf(c[1].exp())
            + prior.nu.get(s).logpdf(c[2].exp())
            + c[1]
            + c[2]
    };
    let lp_new = log_prior(&y);
    if lp_new == f64::NEG_INFINITY {
        return false;
    }
    let mut proposal = obs.clone();
    let e = block_of_mut(&mut proposal, block);
    e.mu[s] = y[0];
    e.sigma[s] = sigma;
    e.nu[s] = nu;
    let ll_new = groups.block_loglik(&proposal, block, s);
    if ll_new == f64::NEG_INFINITY {
        return false;
    }
    let log_ratio = lp_new + ll_new - log_prior(&x) - groups.block_loglik(obs, block, s);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        *obs = proposal;
        return true;
    }
    false
}

/// Coordinates of the repair level move: `logit k_a` for every repair
/// action, then every repair location.
pub fn repair_coords(obs: &ObservationParams) -> Vec<f64> {
    obs.k_repair
        .iter()
        .map(|&k| logit(k))
        .chain(obs.repair.mu.iter().copied())
        .collect()
}

/// Random-walk Metropolis on [`repair_coords`] jointly, stepping `chol * e`
/// with a lower-triangular `chol`.
pub fn repair_move<R: Rng + ?Sized>(
    groups: &ObsGroups,
    obs: &mut ObservationParams,
    priors: &PriorConfig,
    chol: &[Vec<f64>],
    rng: &mut R,
) -> bool {
    let x = repair_coords(obs);
    let d = x.len();
    let e: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let y: Vec<f64> = (0..d)
        .map(|i| x[i] + (0..=i).map(|j| chol[i][j] * e[j]).sum::<f64>())
        .collect();
    let nk = obs.k_repair.len();
    let mut proposal = obs.clone();
    for (k, &c) in proposal.k_repair.iter_mut().zip(&y[..nk]) {
        *k = expit(c);
    }
    proposal.repair.mu.copy_from_slice(&y[nk..]);
    if proposal.k_repair.iter().any(|&k| !(k > 0.0 && k < 1.0)) || proposal.repair.mu.iter().any(|&m| !(m <= 0.0)) {
        return false;
    }
    let ns = obs.n_states();
    // logit Jacobian k(1 - k) for every coefficient
    let log_target = |o: &ObservationParams| -> f64 {
        let prior: f64 = o
            .k_repair
            .iter()
            .map(|&k| priors.k_repair.logpdf(k) + (k * (1.0 - k)).ln())
            .sum::<f64>()
            + (0..ns)
                .map(|s| priors.repair.mu.get(s).logpdf(o.repair.mu[s]))
                .sum::<f64>();
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        prior + (0..ns).map(|s| groups.block_loglik(o, Block::Repair, s)).sum::<f64>()
    };
    let new = log_target(&proposal);
    if new == f64::NEG_INFINITY {
        return false;
    }
    let log_ratio = new - log_target(obs);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        *obs = proposal;
        return true;
    }
    false
}

/// Step size of the joint repair move, on the scale of `k`.
const RIDGE_SCALE: f64 = 0.05;

/// Shifts every `k_a` by `d` and every repair location by `-d * mean(z_prev)`,
/// which keeps the typical post-repair level in place. Single-site updates
/// crawl along that ridge.
fn ridge_move<R: Rng + ?Sized>(
    groups: &ObsGroups,
    obs: &mut ObservationParams,
    priors: &PriorConfig,
    rng: &mut R,
) -> bool {
    let prev: Vec<f64> = groups.repair.iter().flatten().map(|&(_, zp, _)| zp).collect();
    if prev.is_empty() || obs.k_repair.is_empty() {
        return false;
    }
    let zbar = prev.iter().sum::<f64>() / prev.len() as f64;
    let e: f64 = StandardNormal.sample(rng);
    let d = RIDGE_SCALE * e;
    let mut proposal = obs.clone();
    for k in proposal.k_repair.iter_mut() {
        *k += d;
    }
    for m in proposal.repair.mu.iter_mut() {
        *m -= d * zbar;
    }
    if proposal.k_repair.iter().any(|&k| !(k > 0.0 && k < 1.0)) || proposal.repair.mu.iter().any(|&m| m > 0.0) {
        return false;
    }
    let ns = obs.n_states();
    let log_target = |o: &ObservationParams| -> f64 {
        let prior: f64 = o.k_repair.iter().map(|&k| priors.k_repair.logpdf(k)).sum::<f64>()
            + (0..ns)
                .map(|s| priors.repair.mu.get(s).logpdf(o.repair.mu[s]))
                .sum::<f64>();
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        prior + (0..ns).map(|s| groups.block_loglik(o, Block::Repair, s)).sum::<f64>()
    };
    let new = log_target(&proposal);
    if new == f64::NEG_INFINITY {
        return false;
    }
    let log_ratio = new - log_target(obs);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        *obs = proposal;
        return true;
    }
    false
}
