//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver, filter or distribution code under test.

#![allow(dead_code)]

use statrs::distribution::{ContinuousCDF, StudentsT};

use robmaint::model::{EmissionParams, ObservationParams, TransitionSet};
use robmaint::{ModelSample, PomdpModel, Series};

/// A sample with the given transitions and flat, unremarkable emissions.
pub fn bare_sample(transitions: TransitionSet) -> ModelSample {
    let ns = transitions.n_states();
    let na = transitions.n_actions();
    ModelSample {
        transitions,
        obs: ObservationParams {
            deterioration: EmissionParams::constant(ns, -0.05, 0.05, 5.0),
            repair: EmissionParams::constant(ns, -0.3, 0.1, 5.0),
            k_repair: vec![0.5; na - 1],
            initial: EmissionParams::constant(ns, -0.5, 0.1, 5.0),
        },
        log_post: None,
    }
}

/// `p[a][s][s']` and `r[s][a]` as plain nested vectors.
pub struct Mdp {
    pub p: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl Mdp {
    pub fn of(sample: &ModelSample, model: &PomdpModel) -> Self {
        let (ns, na) = (model.n_states, model.n_actions);
        let p = (0..na)
            .map(|a| (0..ns).map(|s| sample.transitions.row(a, s).to_vec()).collect())
            .collect();
        let r = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| model.costs.action_cost(a, s) + model.costs.state_cost(s))
                    .collect()
            })
            .collect();
        Mdp {
            p,
            r,
            gamma: model.gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.r.len()
    }

    pub fn n_actions(&self) -> usize {
        self.p.len()
    }

    /// `Q_d(s, a)` by walking the full decision tree of depth `d`; cost grows
    /// as `(|A| |S|)^d`.
    pub fn tree_q(&self, s: usize, a: usize, depth: usize) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        let mut q = self.r[s][a];
        if depth > 1 {
            for next in 0..self.n_states() {
                let best = (0..self.n_actions())
                    .map(|b| self.tree_q(next, b, depth - 1))
                    .fold(f64::NEG_INFINITY, f64::max);
                q += self.gamma * self.p[a][s][next] * best;
            }
        }
        q
    }

    /// Depth-`d` Q-table by stage-wise recursion, `[s][a]`.
    pub fn staged_q(&self, depth: usize) -> Vec<Vec<f64>> {
        let (ns, na) = (self.n_states(), self.n_actions());
        let mut q = vec![vec![0.0; na]; ns];
        for _ in 0..depth {
            let v: Vec<f64> = q
                .iter()
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect();
            q = (0..ns)
                .map(|s| {
                    (0..na)
                        .map(|a| self.r[s][a] + self.gamma * (0..ns).map(|n| self.p[a][s][n] * v[n]).sum::<f64>())
                        .collect()
                })
                .collect();
        }
        q
    }
}

/// Truncated Student's t density on `[lb, ub]`, built from the library
/// distribution rather than the crate's kernels.
pub struct OracleT {
    base: StudentsT,
    mu: f64,
    sigma: f64,
    mass: f64,
}

impl OracleT {
    pub fn new(mu: f64, sigma: f64, nu: f64, lb: f64, ub: f64) -> Self {
        let base = StudentsT::new(0.0, 1.0, nu).unwrap();
        let mass = base.cdf((ub - mu) / sigma) - base.cdf((lb - mu) / sigma);
        OracleT { base, mu, sigma, mass }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        use statrs::distribution::Continuous;
        self.base.pdf((x - self.mu) / self.sigma) / (self.sigma * self.mass)
    }
}

/// Emission densities `[t][s]` of a series, straight from the model
/// definition: the first observation from the initial block, a do-nothing
/// step `z_t - z_{t-1}` truncated at `-z_{t-1}`, a repair level truncated at
/// zero.
pub fn emission_table(sample: &ModelSample, series: &Series) -> Vec<Vec<f64>> {
    let o = &sample.obs;
    let z = &series.observations;
    (0..z.len())
        .map(|t| {
            (0..sample.n_states())
                .map(|s| {
                    if t == 0 {
                        let e = &o.initial;
                        return OracleT::new(e.mu[s], e.sigma[s], e.nu[s], f64::NEG_INFINITY, 0.0).pdf(z[0]);
                    }
                    let a = series.actions[t - 1];
                    if a == 0 {
                        let e = &o.deterioration;
                        OracleT::new(e.mu[s], e.sigma[s], e.nu[s], f64::NEG_INFINITY, -z[t - 1]).pdf(z[t] - z[t - 1])
                    } else {
                        let e = &o.repair;
                        let loc = o.k_repair[a - 1] * z[t - 1] + e.mu[s];
                        OracleT::new(loc, e.sigma[s], e.nu[s], f64::NEG_INFINITY, 0.0).pdf(z[t])
                    }
                })
                .collect()
        })
        .collect()
}

/// Every state path of length `n` over `ns` states, first state slowest.
pub fn all_paths(ns: usize, n: usize) -> Vec<Vec<usize>> {
    (0..ns.pow(n as u32))
        .map(|mut k| {
            let mut path = vec![0; n];
            for t in (0..n).rev() {
                path[t] = k % ns;
                k /= ns;
            }
            path
        })
        .collect()
}

/// Joint density `p(z, path | θ)` of every path, in [`all_paths`] order.
pub fn path_weights(sample: &ModelSample, series: &Series) -> Vec<f64> {
    let e = emission_table(sample, series);
    let tr = &sample.transitions;
    all_paths(sample.n_states(), series.len())
        .iter()
        .map(|p| {
            let mut w = tr.initial()[p[0]] * e[0][p[0]];
            for t in 1..p.len() {
                w *= tr.p(series.actions[t - 1], p[t - 1], p[t]) * e[t][p[t]];
            }
            w
        })
        .collect()
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Integral of a density with heavy tails over `[lb, ub]` (either end may be
/// infinite) after `x = mu + sigma tan θ`, which maps the real line onto a
/// bounded interval.
pub fn tan_quadrature(pdf: &dyn Fn(f64) -> f64, mu: f64, sigma: f64, lb: f64, ub: f64, tol: f64) -> f64 {
    let to_theta = |x: f64| ((x - mu) / sigma).atan();
    let g = |th: f64| {
        let c = th.cos();
        if c <= 0.0 {
            return 0.0;
        }
        pdf(mu + sigma * th.tan()) * sigma / (c * c)
    };
    let (a, b) = (to_theta(lb), to_theta(ub));
    // the endpoints of ±π/2 carry zero weight for any proper density
    let eps = 1e-12;
    simpson(
        &g,
        a.max(-std::f64::consts::FRAC_PI_2 + eps),
        b.min(std::f64::consts::FRAC_PI_2 - eps),
        tol,
    )
}

/// Sup-distance between the empirical CDF of `sorted` and `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(usize, f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(i, x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Combined standard error of a difference of independent means.
pub fn combined_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
}
