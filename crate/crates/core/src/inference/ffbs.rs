//! Forward filtering, backward sampling of hidden state paths.

use rand::Rng;

use crate::error::{Error, Result};
use crate::inference::emission::loglik_matrix;
use crate::model::{Action, ModelSample, Series, State};
use crate::simulator::sample_categorical;

/// Output of the forward recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// `log p(z_0..z_T | a, θ)`.
    pub loglik: f64,
    /// `filtered[t][s] = p(s_t = s | z_0..z_t)`.
    pub filtered: Vec<Vec<f64>>,
}

/// Normalizes `weights * exp(logs - max)` in place into `out`; returns the
/// log of the normalizer or `None` when every term vanishes.
fn weigh(prior: &[f64], logs: &[f64], out: &mut [f64]) -> Option<f64> {
    let m = prior
        .iter()
        .zip(logs)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let mut total = 0.0;
    for ((o, p), l) in out.iter_mut().zip(prior).zip(logs) {
        *o = if *p > 0.0 { p * (l - m).exp() } else { 0.0 };
        total += *o;
    }
    if !(total > 0.0) {
        return None;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Some(m + total.ln())
}

/// Forward recursion from precomputed emission log-likelihoods
/// (`[t * n_states + s]`).
pub fn forward_from_logliks(actions: &[Action], emissions: &[f64], sample: &ModelSample) -> Result<ForwardPass> {
    let ns = sample.n_states();
    let n = emissions.len() / ns;
    if n == 0 {
        return Err(Error::EmptyInput("series without observations"));
    }
    let tr = &sample.transitions;
    let mut filtered = Vec::with_capacity(n);
    let mut cur = vec![0.0; ns];
    let mut loglik = weigh(tr.initial(), &emissions[..ns], &mut cur).ok_or(Error::Underflow { t: 0 })?;
    let mut pred = vec![0.0; ns];
    for t in 1..n {
        let a = actions[t - 1];
        pred.iter_mut().for_each(|p| *p = 0.0);
        for (s, w) in cur.iter().enumerate() {
            if *w > 0.0 {
                for (p, q) in pred.iter_mut().zip(tr.row(a, s)) {
                    *p += w * q;
                }
            }
        }
        filtered.push(std::mem::replace(&mut cur, vec![0.0; ns]));
        loglik += weigh(&pred, &emissions[t * ns..(t + 1) * ns], &mut cur).ok_or(Error::Underflow { t })?;
    }
    filtered.push(cur);
    Ok(ForwardPass { loglik, filtered })
}

/// Forward recursion over one series.
pub fn forward_filter(series: &Series, sample: &ModelSample) -> Result<ForwardPass> {
    forward_from_logliks(&series.actions, &loglik_matrix(series, &sample.obs), sample)
}

/// Draws a state path from `p(s_0..s_T | z, a, θ)` given the forward pass.
pub fn backward_sample<R: Rng + ?Sized>(
    filtered: &[Vec<f64>],
    sample: &ModelSample,
    actions: &[Action],
    rng: &mut R,
) -> Vec<State> {
    let n = filtered.len();
    let ns = sample.n_states();
    let mut path = vec![0; n];
    path[n - 1] = sample_categorical(&filtered[n - 1], rng);
    let mut w = vec![0.0; ns];
    for t in (0..n - 1).rev() {
        let next = path[t + 1];
        let a = actions[t];
        let mut total = 0.0;
        for (s, ws) in w.iter_mut().enumerate() {
            *ws = filtered[t][s] * sample.transitions.p(a, s, next);
            total += *ws;
        }
        w.iter_mut().for_each(|x| *x /= total);
        path[t] = sample_categorical(&w, rng);
    }
    path
}
