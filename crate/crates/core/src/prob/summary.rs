use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Location, precision and spread of a sample of returns or draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Standard error of the mean, `sd / sqrt(n)`.
    pub se: f64,
    pub hdi_lo: f64,
    pub hdi_hi: f64,
    pub mass: f64,
}

/// How the interval columns of a [`SummaryStats`] are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// Minimal-width window.
    #[default]
    Hdi,
    /// Equal-tailed quantiles.
    EqualTailed,
}

fn check(samples: &[f64], mass: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("interval of an empty sample"));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::InvalidParameter(format!("interval mass {mass} not in (0, 1]")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("sample contains NaN".into()));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of sorted points a window of `mass` must cover.
fn window_len(n: usize, mass: f64) -> usize {
    // the slack keeps 0.95 * 100 from rounding up to 96
    let k = (mass * n as f64 - 1e-9 * n as f64).ceil() as usize;
    k.clamp(1, n)
}

/// Highest density interval: the narrowest window over the sorted samples
/// that contains `ceil(mass * n)` points. Ties go to the leftmost window.
pub fn hdi(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    check(samples, mass)?;
    let v = sorted(samples);
    let k = window_len(v.len(), mass);
    let mut best = (v[0], v[k - 1]);
    for i in 1..=v.len() - k {
        if v[i + k - 1] - v[i] < best.1 - best.0 {
            best = (v[i], v[i + k - 1]);
        }
    }
    Ok(best)
}

/// Equal-tailed interval from nearest-rank quantiles.
pub fn equal_tailed(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    check(samples, mass)?;
    let v = sorted(samples);
    let n = v.len();
    let tail = 0.5 * (1.0 - mass);
    let rank = |p: f64| -> usize { ((p * n as f64).ceil() as usize).clamp(1, n) - 1 };
    Ok((v[rank(tail)], v[rank(1.0 - tail)]))
}

pub fn mean_and_se(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("mean of an empty sample"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

pub fn summarize(samples: &[f64], mass: f64, kind: IntervalKind) -> Result<SummaryStats> {
    let (mean, se) = mean_and_se(samples)?;
    let (hdi_lo, hdi_hi) = match kind {
        IntervalKind::Hdi => hdi(samples, mass)?,
        IntervalKind::EqualTailed => equal_tailed(samples, mass)?,
    };
    Ok(SummaryStats {
        mean,
        se,
        hdi_lo,
        hdi_hi,
        mass,
    })
}
