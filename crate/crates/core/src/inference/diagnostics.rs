//! Convergence diagnostics: rank-normalized split R-hat and bulk effective
//! sample size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostic {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
    /// Every draw identical; `rhat` is reported as 1.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_chains: usize,
    pub n_draws: usize,
    pub params: Vec<ParamDiagnostic>,
    /// Post burn-in acceptance fraction per observation parameter group.
    pub accept_rate: BTreeMap<String, f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.params.iter().map(|p| p.rhat).fold(1.0, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.params.iter().map(|p| p.ess).fold(f64::INFINITY, f64::min)
    }

    pub fn get(&self, name: &str) -> Option<&ParamDiagnostic> {
        self.params.iter().find(|p| p.name == name)
    }
}

fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Splits every chain into halves, dropping the middle draw of odd chains.
fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        out.push(c[..h].to_vec());
        out.push(c[c.len() - h..].to_vec());
    }
    out
}

/// Normal scores of pooled average ranks.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut idx: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = idx.len() as f64;
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && idx[j + 1].0 == idx[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = normal_quantile((rank - 0.375) / (total + 0.25));
        for &(_, c, k) in &idx[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Classic potential scale reduction of equal-length chains; `None` when the
/// within-chain variance vanishes.
fn psrf(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| var(c)).sum::<f64>() / chains.len() as f64;
    let b = n * var(&means);
    if !(w > 0.0) {
        return None;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Some((var_plus / w).sqrt())
}

/// Split R-hat on rank-normalized draws and their folded version, whichever
/// is larger.
pub fn rank_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let sp = split(chains);
    let bulk = psrf(&rank_normalize(&sp))?;
    let mut pooled: Vec<f64> = sp.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let med = pooled[pooled.len() / 2];
    let folded: Vec<Vec<f64>> = sp.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let tail = psrf(&rank_normalize(&folded)).unwrap_or(1.0);
    Some(bulk.max(tail))
}

fn autocov(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence.
pub fn ess(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len() as f64;
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| var(c)).sum::<f64>() / m;
    if !(w > 0.0) {
        return None;
    }
    let b = if chains.len() > 1 { nf * var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    let rho = |lag: usize| -> f64 {
        let acov = chains.iter().map(|c| autocov(c, lag)).sum::<f64>() / m;
        1.0 - (w - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    let total = m * nf;
    Some((total / tau.max(1.0 / total.log10().max(1.0))).min(total))
}

/// Diagnostics of `draws[chain][draw][param]`.
pub fn compute_diagnostics(names: &[String], draws: &[Vec<Vec<f64>>]) -> Result<Diagnostics> {
    if draws.is_empty() {
        return Err(Error::EmptyInput("no chains"));
    }
    let n = draws[0].len();
    if n < 4 || draws.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter(format!(
            "diagnostics need equal chains of at least 4 draws, got {:?}",
            draws.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let mut params = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let chains: Vec<Vec<f64>> = draws.iter().map(|c| c.iter().map(|d| d[j]).collect()).collect();
        let first = chains[0][0];
        let constant = chains.iter().flatten().all(|&x| x == first);
        let (rhat, ess_v) = if constant {
            (1.0, (draws.len() * n) as f64)
        } else {
            let sp = split(&chains);
            let z = rank_normalize(&sp);
            (
                rank_rhat(&chains).unwrap_or(1.0),
                ess(&z).unwrap_or((draws.len() * n) as f64),
            )
        };
        params.push(ParamDiagnostic {
            name: name.clone(),
            rhat,
            ess: ess_v,
            zero_variance: constant,
        });
    }
    Ok(Diagnostics {
        n_chains: draws.len(),
        n_draws: n,
        params,
        accept_rate: BTreeMap::new(),
    })
}
