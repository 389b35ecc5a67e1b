//! Metropolis-within-Gibbs sampler over transitions, observation parameters
//! and hidden state paths.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::diagnostics::{compute_diagnostics, Diagnostics};
use crate::inference::ffbs::{backward_sample, forward_filter};
use crate::inference::updates::{
    group_coords, group_move, repair_coords, repair_move, update_obs_params, update_transitions, Block, Field,
    ObsGroups, ObsParam,
};
use crate::model::{
    ChainMeta, Dataset, EmissionParams, EmissionPrior, ModelSample, ObservationParams, PomdpModel, PosteriorEnsemble,
    PriorConfig, State, TransitionSet,
};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub n_burnin: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Starting random-walk scales in [`ObsParam::all`] order; per-kind
    /// defaults when absent.
    pub proposal_scales: Option<Vec<f64>>,
    /// Burn-in sweeps between scale adjustments.
    pub adapt_every: usize,
    /// Short runs from varied starting points before burn-in. Every chain
    /// starts from a jittered copy of the best one; 0 disables them.
    pub n_pilots: usize,
    /// Sweeps per pilot run.
    pub pilot_sweeps: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_chains: 4,
            n_burnin: 4000,
            n_samples: 3000,
            seed: 0,
            proposal_scales: None,
            adapt_every: 50,
            n_pilots: 10,
            pilot_sweeps: 150,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self, n_params: usize) -> Result<()> {
        if self.n_chains == 0 || self.n_samples == 0 || self.adapt_every == 0 {
            return Err(Error::InvalidParameter(
                "chains, samples and the adaptation interval must be at least 1".into(),
            ));
        }
        if let Some(s) = &self.proposal_scales {
            if s.len() != n_params {
                return Err(Error::DimensionMismatch(format!(
                    "{} proposal scales for {n_params} parameters",
                    s.len()
                )));
            }
            if s.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidParameter("proposal scales must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Acceptance window targeted during burn-in.
pub const TARGET_ACCEPT: (f64, f64) = (0.30, 0.45);

fn check_inputs(dataset: &Dataset, model: &PomdpModel, priors: &PriorConfig) -> Result<()> {
    if !dataset.series.iter().any(|s| s.len() >= 2) {
        return Err(Error::EmptyInput(
            "dataset needs a series with at least two observations",
        ));
    }
    priors.validate()?;
    if priors.n_states() != model.n_states || priors.n_actions() != model.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "priors are {}x{}, model is {}x{}",
            priors.n_states(),
            priors.n_actions(),
            model.n_states,
            model.n_actions
        )));
    }
    for s in &dataset.series {
        if let Some(&a) = s.actions.iter().find(|&&a| a >= model.n_actions) {
            return Err(Error::IndexOutOfRange {
                what: "dataset action",
                index: a,
                limit: model.n_actions,
            });
        }
        if s.observations.iter().any(|z| !(*z <= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "series `{}` has a positive value",
                s.id
            )));
        }
    }
    Ok(())
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let i = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[i]
}

/// Where a chain's observation parameters start.
#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    /// State `s` takes the `levels[s]` quantile of the relevant observations.
    Quantiles(Vec<f64>),
    /// Prior means of the locations.
    PriorMeans,
}

impl StartPoint {
    /// Evenly spaced levels `1 - (s + 0.5) / n`, best state highest.
    pub fn even(n_states: usize) -> Self {
        StartPoint::Quantiles(
            (0..n_states)
                .map(|s| 1.0 - (s as f64 + 0.5) / n_states as f64)
                .collect(),
        )
    }

    /// Sorted uniform levels, best state highest.
    pub fn random<R: Rng + ?Sized>(n_states: usize, rng: &mut R) -> Self {
        let mut v: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.02..0.98)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        StartPoint::Quantiles(v)
    }
}

fn start_block(
    mut values: Vec<f64>,
    n_states: usize,
    start: &StartPoint,
    prior: &EmissionPrior,
    fallback_sigma: f64,
    cap: f64,
) -> EmissionParams {
    values.sort_by(f64::total_cmp);
    let sigma = if values.is_empty() {
        fallback_sigma
    } else {
        let spread = quantile(&values, 0.9) - quantile(&values, 0.1);
        (spread / (2.0 * n_states as f64)).max(fallback_sigma * 0.1).max(1e-3)
    };
    let mu = match start {
        StartPoint::Quantiles(levels) if !values.is_empty() => levels.iter().map(|&p| quantile(&values, p)).collect(),
        _ => (0..n_states).map(|s| prior.mu.get(s).mean()).collect::<Vec<_>>(),
    };
    EmissionParams {
        mu: mu.into_iter().map(|m| m.min(cap)).collect(),
        sigma: vec![sigma; n_states],
        nu: vec![10.0; n_states],
    }
}

/// Data-driven starting values with multiplicative jitter of standard
/// deviation `jitter` on the log scale.
pub fn initial_obs_params<R: Rng + ?Sized>(
    dataset: &Dataset,
    priors: &PriorConfig,
    start: &StartPoint,
    rng: &mut R,
    jitter: f64,
) -> ObservationParams {
    let ns = priors.n_states();
    let k0 = 0.5;
    let mut z0 = Vec::new();
    let mut deltas = Vec::new();
    let mut resid = Vec::new();
    for s in &dataset.series {
        z0.push(s.observations[0]);
        for t in 1..s.len() {
            let (z, zp) = (s.observations[t], s.observations[t - 1]);
            if s.actions[t - 1] == 0 {
                deltas.push(z - zp);
            } else {
                resid.push(z - k0 * zp);
            }
        }
    }
    let mut obs = ObservationParams {
        deterioration: start_block(deltas, ns, start, &priors.deterioration, 0.01, f64::INFINITY),
        repair: start_block(resid, ns, start, &priors.repair, 0.05, -1e-3),
        k_repair: vec![k0; priors.n_actions() - 1],
        initial: start_block(z0, ns, start, &priors.initial, 0.05, -1e-3),
    };
    if jitter > 0.0 {
        for p in ObsParam::all(ns, priors.n_actions()) {
            if matches!(p, ObsParam::K(_)) {
                continue;
            }
            let e: f64 = StandardNormal.sample(rng);
            let v = p.get(&obs) * (jitter * e).exp();
            p.set(&mut obs, v);
        }
    }
    obs.initial.mu.sort_by(|a, b| b.total_cmp(a));
    obs
}

fn prior_mean_transitions(priors: &PriorConfig) -> Result<TransitionSet> {
    let rows = priors
        .alpha_t
        .iter()
        .map(|m| m.iter().map(|r| r.mean()).collect())
        .collect();
    TransitionSet::from_rows(rows, priors.alpha0.mean())
}

/// State paths and total log-likelihood of `sample` over the dataset.
pub fn sample_paths<R: Rng + ?Sized>(
    dataset: &Dataset,
    sample: &ModelSample,
    rng: &mut R,
) -> Result<(Vec<Vec<State>>, f64)> {
    let mut loglik = 0.0;
    let mut paths = Vec::with_capacity(dataset.series.len());
    for s in &dataset.series {
        let f = forward_filter(s, sample)?;
        loglik += f.loglik;
        paths.push(backward_sample(&f.filtered, sample, &s.actions, rng));
    }
    Ok((paths, loglik))
}

/// Total marginal log-likelihood, states summed out.
pub fn dataset_loglik(dataset: &Dataset, sample: &ModelSample) -> Result<f64> {
    dataset
        .series
        .iter()
        .map(|s| forward_filter(s, sample).map(|f| f.loglik))
        .sum()
}

struct ChainOutput {
    samples: Vec<ModelSample>,
    accepted: Vec<usize>,
}

const BLOCKS: [Block; 3] = [Block::Deterioration, Block::Repair, Block::Initial];

/// What a learned joint move updates.
#[derive(Debug, Clone, Copy)]
enum JointTarget {
    /// `(mu, ln sigma, ln nu)` of one emission group.
    Group(Block, State),
    /// Repair coefficients and repair locations together.
    RepairLevel,
}

impl JointTarget {
    fn coords(self, obs: &ObservationParams) -> Vec<f64> {
        match self {
            JointTarget::Group(b, s) => group_coords(obs, b, s).to_vec(),
            JointTarget::RepairLevel => repair_coords(obs),
        }
    }
}

/// Burn-in statistics and the learned proposal of one joint move, an
/// adaptive random walk whose covariance tracks the burn-in draws.
#[derive(Debug, Clone)]
struct JointAdapt {
    target: JointTarget,
    n: f64,
    sum: Vec<f64>,
    cross: Vec<Vec<f64>>,
    scale: f64,
    accepted: usize,
    chol: Option<Vec<Vec<f64>>>,
}

impl JointAdapt {
    fn new(target: JointTarget, dim: usize) -> Self {
        JointAdapt {
            target,
            n: 0.0,
            sum: vec![0.0; dim],
            cross: vec![vec![0.0; dim]; dim],
            // the usual optimal random-walk factor
            scale: 2.38 * 2.38 / dim as f64,
            accepted: 0,
            chol: None,
        }
    }

    fn record(&mut self, x: &[f64]) {
        self.n += 1.0;
        for (i, xi) in x.iter().enumerate() {
            self.sum[i] += xi;
            for (j, xj) in x.iter().enumerate() {
                self.cross[i][j] += xi * xj;
            }
        }
    }

    /// Refreshes the Cholesky factor from the running covariance and tunes
    /// the overall scale to the acceptance of the last window.
    fn refresh(&mut self, window: usize) {
        if self.chol.is_some() {
            let rate = self.accepted as f64 / window as f64;
            if rate < 0.15 {
                self.scale *= 0.7;
            } else if rate > 0.40 {
                self.scale *= 1.4;
            }
        }
        self.accepted = 0;
        if self.n < 50.0 {
            return;
        }
        let d = self.sum.len();
        let mut cov = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                cov[i][j] = self.scale * (self.cross[i][j] / self.n - self.sum[i] * self.sum[j] / (self.n * self.n));
            }
            cov[i][i] += 1e-10;
        }
        self.chol = cholesky(&cov);
    }

    fn step<R: Rng + ?Sized>(
        &mut self,
        groups: &ObsGroups,
        obs: &mut ObservationParams,
        priors: &PriorConfig,
        rng: &mut R,
    ) {
        let Some(chol) = &self.chol else {
            return;
        };
        let ok = match self.target {
            JointTarget::Group(b, s) => {
                let c: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| chol[i][j]));
                group_move(groups, obs, priors, b, s, &c, rng)
            }
            JointTarget::RepairLevel => repair_move(groups, obs, priors, chol, rng),
        };
        self.accepted += ok as usize;
    }
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

struct ChainState {
    sample: ModelSample,
    paths: Vec<Vec<State>>,
    scales: Vec<f64>,
    window: Vec<usize>,
    joints: Vec<JointAdapt>,
    sweeps: usize,
}

impl ChainState {
    fn new<R: Rng + ?Sized>(
        dataset: &Dataset,
        priors: &PriorConfig,
        obs: ObservationParams,
        scales: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        let sample = ModelSample {
            transitions: prior_mean_transitions(priors)?,
            obs,
            log_post: None,
        };
        let (paths, _) = sample_paths(dataset, &sample, rng)?;
        let window = vec![0; scales.len()];
        let mut joints: Vec<JointAdapt> = BLOCKS
            .iter()
            .flat_map(|&b| (0..priors.n_states()).map(move |s| JointAdapt::new(JointTarget::Group(b, s), 3)))
            .collect();
        if priors.n_actions() > 1 {
            let dim = priors.n_actions() - 1 + priors.n_states();
            joints.push(JointAdapt::new(JointTarget::RepairLevel, dim));
        }
        Ok(ChainState {
            sample,
            paths,
            scales,
            window,
            joints,
            sweeps: 0,
        })
    }

    /// One Gibbs sweep: transitions, then observation parameters, then
    /// paths under the new parameters. Returns acceptance flags and the
    /// log-posterior of the new parameters.
    fn sweep<R: Rng + ?Sized>(
        &mut self,
        dataset: &Dataset,
        priors: &PriorConfig,
        adapt_every: Option<usize>,
        rng: &mut R,
    ) -> Result<(Vec<bool>, f64)> {
        let ns = priors.n_states();
        let transitions = update_transitions(&self.paths, &dataset.series, priors, rng)?;
        let groups = ObsGroups::new(&self.paths, &dataset.series, ns);
        let (mut obs, acc) = update_obs_params(&groups, &self.sample.obs, priors, &self.scales, rng)?;
        for j in self.joints.iter_mut() {
            j.step(&groups, &mut obs, priors, rng);
        }
        self.sample = ModelSample {
            transitions,
            obs,
            log_post: None,
        };
        let (paths, loglik) = sample_paths(dataset, &self.sample, rng)?;
        self.paths = paths;
        self.sweeps += 1;
        if let Some(every) = adapt_every {
            for j in self.joints.iter_mut() {
                j.record(&j.target.coords(&self.sample.obs));
            }
            for (w, a) in self.window.iter_mut().zip(&acc) {
                *w += *a as usize;
            }
            if self.sweeps % every == 0 {
                for (scale, w) in self.scales.iter_mut().zip(self.window.iter_mut()) {
                    let rate = *w as f64 / every as f64;
                    if rate < TARGET_ACCEPT.0 {
                        *scale *= 0.7;
                    } else if rate > TARGET_ACCEPT.1 {
                        *scale *= 1.4;
                    }
                    *w = 0;
                }
                for j in self.joints.iter_mut() {
                    j.refresh(every);
                }
            }
        }
        Ok((acc, priors.log_prior(&self.sample) + loglik))
    }
}

/// Seed path of pilot runs, disjoint from chain indices.
const PILOT_STREAM: u64 = 1 << 32;

/// Where the pilot pool ended up: parameters and adapted scales.
struct PilotStart {
    sample: ModelSample,
    scales: Vec<f64>,
}

/// Short adaptive runs from varied starting points; returns the end state of
/// the run with the highest mean log-posterior over its last quarter.
fn pilot_pool(dataset: &Dataset, priors: &PriorConfig, cfg: &McmcConfig, scales: &[f64]) -> Result<Option<PilotStart>> {
    if cfg.n_pilots == 0 || cfg.pilot_sweeps == 0 {
        return Ok(None);
    }
    let ns = priors.n_states();
    let runs = (0..cfg.n_pilots)
        .into_par_iter()
        .map(|k| -> Result<(f64, PilotStart)> {
            let mut rng = seeded(derive_seed(cfg.seed, &[PILOT_STREAM, k as u64]));
            let (start, jitter) = match k {
                0 => (StartPoint::even(ns), 0.0),
                1 => (StartPoint::PriorMeans, 0.0),
                _ => (StartPoint::random(ns, &mut rng), 0.1),
            };
            let obs = initial_obs_params(dataset, priors, &start, &mut rng, jitter);
            let mut state = ChainState::new(dataset, priors, obs, scales.to_vec(), &mut rng)?;
            let tail = (cfg.pilot_sweeps / 4).max(1);
            let mut score = 0.0;
            for it in 0..cfg.pilot_sweeps {
                let (_, lp) = state.sweep(dataset, priors, Some(cfg.adapt_every), &mut rng)?;
                if it + tail >= cfg.pilot_sweeps {
                    score += lp / tail as f64;
                }
            }
            Ok((
                score,
                PilotStart {
                    sample: state.sample,
                    scales: state.scales,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    // first best wins so the choice does not depend on scheduling
    let mut best: Option<(f64, PilotStart)> = None;
    for (score, run) in runs {
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, run));
        }
    }
    Ok(best.map(|(_, r)| r))
}

fn jittered(obs: &ObservationParams, jitter: f64, rng: &mut impl Rng) -> ObservationParams {
    let mut out = obs.clone();
    for p in ObsParam::all(obs.n_states(), obs.k_repair.len() + 1) {
        if matches!(p, ObsParam::K(_)) {
            continue;
        }
        let e: f64 = StandardNormal.sample(rng);
        let v = p.get(&out) * (jitter * e).exp();
        p.set(&mut out, v);
    }
    out.initial.mu.sort_by(|a, b| b.total_cmp(a));
    out
}

fn run_chain(
    dataset: &Dataset,
    priors: &PriorConfig,
    cfg: &McmcConfig,
    chain: usize,
    pilot: Option<&PilotStart>,
) -> Result<ChainOutput> {
    let ns = priors.n_states();
    let params = ObsParam::all(ns, priors.n_actions());
    let mut rng = seeded(derive_seed(cfg.seed, &[chain as u64]));
    let jitter = if chain == 0 { 0.0 } else { 0.1 };
    let mut state = match pilot {
        Some(p) => {
            let obs = jittered(&p.sample.obs, jitter, &mut rng);
            let mut st = ChainState::new(dataset, priors, obs, p.scales.clone(), &mut rng)?;
            st.sample.transitions = p.sample.transitions.clone();
            st.paths = sample_paths(dataset, &st.sample, &mut rng)?.0;
            st
        }
        None => {
            let scales = cfg
                .proposal_scales
                .clone()
                .unwrap_or_else(|| params.iter().map(ObsParam::default_scale).collect());
            let obs = initial_obs_params(dataset, priors, &StartPoint::even(ns), &mut rng, jitter);
            ChainState::new(dataset, priors, obs, scales, &mut rng)?
        }
    };

    let mut accepted = vec![0usize; params.len()];
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_burnin {
        state.sweep(dataset, priors, Some(cfg.adapt_every), &mut rng)?;
    }
    for _ in 0..cfg.n_samples {
        let (acc, lp) = state.sweep(dataset, priors, None, &mut rng)?;
        for (c, a) in accepted.iter_mut().zip(&acc) {
            *c += *a as usize;
        }
        let mut stored = state.sample.clone();
        stored.log_post = Some(lp);
        samples.push(stored);
    }
    Ok(ChainOutput { samples, accepted })
}

fn group_name(p: &ObsParam) -> String {
    match p {
        ObsParam::Emission { block, field, .. } => {
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
            format!("{b}.{f}")
        }
        ObsParam::K(_) => "k_repair".into(),
    }
}

/// Runs `cfg.n_chains` independent chains (in parallel) and pools their
/// kept draws in chain order.
pub fn run_mcmc(
    dataset: &Dataset,
    model: &PomdpModel,
    priors: &PriorConfig,
    cfg: &McmcConfig,
) -> Result<(PosteriorEnsemble, Diagnostics)> {
    check_inputs(dataset, model, priors)?;
    let params = ObsParam::all(model.n_states, model.n_actions);
    cfg.validate(params.len())?;
    let scales = cfg
        .proposal_scales
        .clone()
        .unwrap_or_else(|| params.iter().map(ObsParam::default_scale).collect());
    let pilot = pilot_pool(dataset, priors, cfg, &scales)?;
    let outputs = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(dataset, priors, cfg, c, pilot.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let mut accept_rate: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for out in &outputs {
        for (p, &c) in params.iter().zip(&out.accepted) {
            let e = accept_rate.entry(group_name(p)).or_insert((0.0, 0));
            e.0 += c as f64 / cfg.n_samples as f64;
            e.1 += 1;
        }
    }
    let names = ModelSample::parameter_names(model.n_states, model.n_actions);
    let draws: Vec<Vec<Vec<f64>>> = outputs
        .iter()
        .map(|o| o.samples.iter().map(ModelSample::to_flat).collect())
        .collect();
    let mut diagnostics = if cfg.n_samples >= 4 {
        compute_diagnostics(&names, &draws)?
    } else {
        Diagnostics {
            n_chains: cfg.n_chains,
            n_draws: cfg.n_samples,
            ..Default::default()
        }
    };
    diagnostics.accept_rate = accept_rate.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();

    let chains = (0..cfg.n_chains)
        .map(|c| ChainMeta {
            chain: c,
            seed: derive_seed(cfg.seed, &[c as u64]),
            n_draws: cfg.n_samples,
        })
        .collect();
    let samples = outputs.into_iter().flat_map(|o| o.samples).collect();
    Ok((PosteriorEnsemble::new(samples, chains)?, diagnostics))
}
