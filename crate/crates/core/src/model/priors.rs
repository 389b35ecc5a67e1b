use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmissionParams, ModelSample, ObservationParams, State, TransitionSet, DO_NOTHING};
use crate::prob::{DirichletParams, ScalarPrior};

/// One prior for every state, or one per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerState {
    Shared(ScalarPrior),
    Each(Vec<ScalarPrior>),
}

impl PerState {
    pub fn get(&self, s: State) -> &ScalarPrior {
        match self {
            PerState::Shared(p) => p,
            PerState::Each(v) => &v[s],
        }
    }

    fn check(&self, n_states: usize) -> Result<()> {
        match self {
            PerState::Shared(p) => p.validate(),
            PerState::Each(v) if v.len() == n_states => v.iter().try_for_each(ScalarPrior::validate),
            PerState::Each(v) => Err(Error::DimensionMismatch(format!(
                "{} per-state priors for {n_states} states",
                v.len()
            ))),
        }
    }

    fn all(&self, n_states: usize) -> impl Iterator<Item = &ScalarPrior> {
        (0..n_states).map(move |s| self.get(s))
    }
}

/// Priors of one Student's t emission block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionPrior {
    pub mu: PerState,
    pub sigma: PerState,
    pub nu: PerState,
}

/// Prior over every parameter of a [`ModelSample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Concentration of the initial state distribution.
    pub alpha0: DirichletParams,
    /// Row concentrations, `[action][state]`.
    pub alpha_t: Vec<Vec<DirichletParams>>,
    pub deterioration: EmissionPrior,
    pub repair: EmissionPrior,
    pub initial: EmissionPrior,
    /// Shared by every repair action.
    pub k_repair: ScalarPrior,
}

fn scale_prior() -> PerState {
    PerState::Shared(ScalarPrior::TruncNormal {
        mean: 0.05,
        sd: 0.05,
        lb: Some(0.0),
        ub: None,
    })
}

fn dof_prior() -> PerState {
    PerState::Shared(ScalarPrior::Gamma { shape: 2.0, rate: 0.1 })
}

impl PriorConfig {
    /// Default priors for `n_states` x `n_actions`.
    ///
    /// Deterioration drifts and initial locations get per-state priors whose
    /// means decrease with the state index, so that worse states are
    /// expected to deteriorate faster and start lower; all other emission
    /// parameters share one prior across states.
    ///
    /// Do-nothing rows favour staying (6) and a one-level deterioration (2),
    /// allow larger deterioration (0.5) and nearly forbid improvement (0.05).
    /// Repair rows put 2 on staying and on every improvement and 0.05 on
    /// deterioration. The initial distribution is flat.
    pub fn default_for(n_states: usize, n_actions: usize) -> Self {
        let mut alpha_t = Vec::with_capacity(n_actions);
        for a in 0..n_actions {
            let rows = (0..n_states)
                .map(|s| {
                    let alpha = (0..n_states)
                        .map(|t| match (a == DO_NOTHING, t.cmp(&s)) {
                            (true, std::cmp::Ordering::Equal) => 6.0,
                            (true, std::cmp::Ordering::Greater) if t == s + 1 => 2.0,
                            (true, std::cmp::Ordering::Greater) => 0.5,
                            (true, std::cmp::Ordering::Less) => 0.05,
                            (false, std::cmp::Ordering::Greater) => 0.05,
                            (false, _) => 2.0,
                        })
                        .collect();
                    DirichletParams::new(alpha).expect("positive defaults")
                })
                .collect();
            alpha_t.push(rows);
        }
        PriorConfig {
            alpha0: DirichletParams::uniform(n_states),
            alpha_t,
            deterioration: EmissionPrior {
                mu: PerState::Each(
                    (0..n_states)
                        .map(|s| ScalarPrior::Normal {
                            mean: -0.01 - 0.03 * s as f64,
                            sd: 0.03,
                        })
                        .collect(),
                ),
                sigma: scale_prior(),
                nu: dof_prior(),
            },
            repair: EmissionPrior {
                mu: PerState::Shared(ScalarPrior::TruncNormal {
                    mean: -0.2,
                    sd: 0.2,
                    lb: None,
                    ub: Some(0.0),
                }),
                sigma: scale_prior(),
                nu: dof_prior(),
            },
            initial: EmissionPrior {
                mu: PerState::Each(
                    (0..n_states)
                        .map(|s| ScalarPrior::TruncNormal {
                            mean: -0.2 - 0.3 * s as f64,
                            sd: 0.3,
                            lb: None,
                            ub: Some(0.0),
                        })
                        .collect(),
                ),
                sigma: scale_prior(),
                nu: dof_prior(),
            },
            k_repair: ScalarPrior::Beta { alpha: 2.0, beta: 2.0 },
        }
    }

    pub fn n_states(&self) -> usize {
        self.alpha0.len()
    }

    pub fn n_actions(&self) -> usize {
        self.alpha_t.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ns = self.n_states();
        if self.alpha_t.len() < 2 {
            return Err(Error::InvalidParameter("priors need at least 2 actions".into()));
        }
        for (a, rows) in self.alpha_t.iter().enumerate() {
            if rows.len() != ns || rows.iter().any(|r| r.len() != ns) {
                return Err(Error::DimensionMismatch(format!(
                    "transition prior for action {a} is not {ns}x{ns}"
                )));
            }
        }
        for block in [&self.deterioration, &self.repair, &self.initial] {
            block.mu.check(ns)?;
            block.sigma.check(ns)?;
            block.nu.check(ns)?;
        }
        self.k_repair.validate()?;
        for (name, p) in [
            ("sigma", &self.deterioration.sigma),
            ("sigma", &self.repair.sigma),
            ("sigma", &self.initial.sigma),
            ("nu", &self.deterioration.nu),
            ("nu", &self.repair.nu),
            ("nu", &self.initial.nu),
        ] {
            if p.all(ns).any(|p| p.support().0 < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} prior must be supported on positive values"
                )));
            }
        }
        let (klo, khi) = self.k_repair.support();
        if klo < 0.0 || khi > 1.0 {
            return Err(Error::InvalidParameter("k_repair prior must live in (0, 1)".into()));
        }
        for p in [&self.repair.mu, &self.initial.mu] {
            if p.all(ns).any(|p| p.support().1 > 0.0) {
                return Err(Error::InvalidParameter(
                    "repair and initial location priors must be truncated at 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// Draws transition matrices from their Dirichlet priors.
    pub fn sample_transitions<R: Rng + ?Sized>(&self, rng: &mut R) -> TransitionSet {
        let rows = self
            .alpha_t
            .iter()
            .map(|m| m.iter().map(|r| r.sample(rng)).collect())
            .collect();
        TransitionSet::from_rows(rows, self.alpha0.sample(rng)).expect("prior dimensions")
    }

    /// Draws a complete model from the prior. Initial locations are sorted so
    /// the best state has the highest one.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelSample {
        let ns = self.n_states();
        let mut block = |p: &EmissionPrior| EmissionParams {
            mu: (0..ns).map(|s| p.mu.get(s).sample(rng)).collect(),
            sigma: (0..ns).map(|s| p.sigma.get(s).sample(rng)).collect(),
            nu: (0..ns).map(|s| p.nu.get(s).sample(rng)).collect(),
        };
        let deterioration = block(&self.deterioration);
        let repair = block(&self.repair);
        let mut initial = block(&self.initial);
        initial.mu.sort_by(|a, b| b.total_cmp(a));
        let k_repair = (1..self.n_actions()).map(|_| self.k_repair.sample(rng)).collect();
        ModelSample {
            transitions: self.sample_transitions(rng),
            obs: ObservationParams {
                deterioration,
                repair,
                k_repair,
                initial,
            },
            log_post: None,
        }
    }

    /// Log prior density of the transition block.
    pub fn log_prior_transitions(&self, t: &TransitionSet) -> f64 {
        let mut lp = self.alpha0.logpdf(t.initial());
        for (a, rows) in self.alpha_t.iter().enumerate() {
            for (s, alpha) in rows.iter().enumerate() {
                lp += alpha.logpdf(t.row(a, s));
            }
        }
        lp
    }

    /// Log prior density of the observation block.
    pub fn log_prior_obs(&self, obs: &ObservationParams) -> f64 {
        let block = |p: &EmissionPrior, e: &EmissionParams| -> f64 {
            let mut lp = 0.0;
            for s in 0..e.mu.len() {
                lp += p.mu.get(s).logpdf(e.mu[s]) + p.sigma.get(s).logpdf(e.sigma[s]) + p.nu.get(s).logpdf(e.nu[s]);
            }
            lp
        };
        block(&self.deterioration, &obs.deterioration)
            + block(&self.repair, &obs.repair)
            + block(&self.initial, &obs.initial)
            + obs.k_repair.iter().map(|&k| self.k_repair.logpdf(k)).sum::<f64>()
    }

    pub fn log_prior(&self, sample: &ModelSample) -> f64 {
        self.log_prior_transitions(&sample.transitions) + self.log_prior_obs(&sample.obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_draws_are_valid_models() {
        let p = PriorConfig::default_for(4, 3);
        let model = crate::PomdpModel::railway();
        let mut rng = crate::rng::seeded(4);
        for _ in 0..200 {
            let m = p.sample_model(&mut rng);
            assert!(crate::model::validate(&m, &model).is_empty());
            assert!(p.log_prior(&m).is_finite());
        }
    }

    #[test]
    fn default_rows_follow_the_regularization_pattern() {
        let p = PriorConfig::default_for(4, 3);
        p.validate().unwrap();
        assert_eq!(p.alpha_t[0][1].alpha(), &[0.05, 6.0, 2.0, 0.5]);
        assert_eq!(p.alpha_t[0][3].alpha(), &[0.05, 0.05, 0.05, 6.0]);
        assert_eq!(p.alpha_t[1][2].alpha(), &[2.0, 2.0, 2.0, 0.05]);
        assert_eq!(p.alpha_t[2][0].alpha(), &[2.0, 0.05, 0.05, 0.05]);
        assert_eq!(p.alpha0.alpha(), &[1.0; 4]);
        assert!((p.deterioration.mu.get(2).mean() + 0.07).abs() < 1e-12);
    }

    #[test]
    fn per_state_lists_must_match() {
        let mut p = PriorConfig::default_for(4, 3);
        p.repair.nu = PerState::Each(vec![*p.repair.nu.get(0); 3]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn priors_round_trip_through_toml_like_json() {
        let p = PriorConfig::default_for(3, 2);
        let s = serde_json::to_string(&p).unwrap();
        let back: PriorConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
