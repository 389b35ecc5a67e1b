//! Fractal values of a longitudinal level signal.
//!
//! A 150 m window is walked with `i` equal dividers for every `i` in
//! `5..=580`. The polyline length `L` over the divider points is plotted
//! against the divider length `λ = 150 / i` m on log-log axes, and the plot is
//! split into long, mid and short wavelength sections. Each fractal value is
//! the least-squares slope over one section.
//!
//! Horizontal positions are converted to millimetres before chord lengths are
//! taken, so `L` and `λ` are both in mm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WINDOW_M: f64 = 150.0;
pub const SHIFT_M: f64 = 1.0;
pub const DEFAULT_SPACING_M: f64 = 0.25;
pub const MIN_DIVIDERS: usize = 5;
pub const MAX_DIVIDERS: usize = 580;
/// `log10(20000 mm / 4)`: long-wave section lies at or above.
pub const LONG_MID_DELIMITER: f64 = 3.698_970_004_336_018_8;
/// `log10(3000 mm / 4)`: short-wave section lies strictly below.
pub const MID_SHORT_DELIMITER: f64 = 2.875_061_263_391_700_3;

const MM_PER_M: f64 = 1000.0;
// Tolerance in metres when checking that a window fits the signal.
const FIT_EPS: f64 = 1e-9;

/// A band-pass filtered longitudinal level record, `samples` in mm spaced
/// `spacing` m apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSignal {
    samples: Vec<f64>,
    spacing: f64,
}

impl LevelSignal {
    pub fn new(samples: Vec<f64>, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("spacing {spacing} must be positive")));
        }
        if samples.len() < 2 {
            return Err(Error::EmptyInput("level signal needs at least two samples"));
        }
        if let Some(i) = samples.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
        }
        Ok(LevelSignal { samples, spacing })
    }

    /// Samples a function of position (m) every `spacing` m over `length_m`.
    pub fn from_fn(length_m: f64, spacing: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = (length_m / spacing + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|k| f(k as f64 * spacing)).collect(), spacing)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Distance from the first to the last sample, m.
    pub fn length_m(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.spacing
    }

    /// Linear interpolation at position `x` m.
    pub fn level_at(&self, x: f64) -> f64 {
        let u = (x / self.spacing).max(0.0);
        let k = (u.floor() as usize).min(self.samples.len() - 2);
        let w = u - k as f64;
        self.samples[k] + w * (self.samples[k + 1] - self.samples[k])
    }

    /// Subtracts a centred moving average over `width_m`; a crude high-pass
    /// for synthetic data, not a substitute for proper filtering.
    pub fn detrended(&self, width_m: f64) -> Result<Self> {
        let half = ((width_m / self.spacing) / 2.0).round() as usize;
        if half == 0 {
            return Err(Error::InvalidParameter(format!(
                "width {width_m} m shorter than the spacing"
            )));
        }
        let n = self.samples.len();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        for y in &self.samples {
            prefix.push(prefix.last().unwrap() + y);
        }
        let out = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(half);
                let hi = (k + half + 1).min(n);
                self.samples[k] - (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            })
            .collect();
        Self::new(out, self.spacing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractalTriple {
    pub short: f64,
    pub mid: f64,
    pub long: f64,
    /// Window start, m.
    pub window_start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Long,
    Mid,
    Short,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::Long => "long",
            Section::Mid => "mid",
            Section::Short => "short",
        }
    }

    /// Section of a divider length given as `log10(λ / mm)`.
    pub fn of(log_lambda: f64) -> Section {
        if log_lambda >= LONG_MID_DELIMITER {
            Section::Long
        } else if log_lambda >= MID_SHORT_DELIMITER {
            Section::Mid
        } else {
            Section::Short
        }
    }
}

/// Divider length for `i` dividers, mm.
pub fn divider_length_mm(i: usize) -> f64 {
    WINDOW_M / i as f64 * MM_PER_M
}

/// Polyline length (mm) over `divider_count` equal dividers of the window
/// starting at `start_m`.
pub fn polyline_length(signal: &LevelSignal, start_m: f64, divider_count: usize) -> Result<f64> {
    if !(MIN_DIVIDERS..=MAX_DIVIDERS).contains(&divider_count) {
        return Err(Error::IndexOutOfRange {
            what: "divider count",
            index: divider_count,
            limit: MAX_DIVIDERS + 1,
        });
    }
    if start_m < 0.0 || start_m + WINDOW_M > signal.length_m() + FIT_EPS {
        return Err(Error::SignalTooShort {
            length_m: signal.length_m() - start_m.max(0.0),
            required_m: WINDOW_M,
        });
    }
    let step = WINDOW_M / divider_count as f64;
    let dx = step * MM_PER_M;
    // sum chord excesses over the straight length so a flat window is exact
    let mut prev = signal.level_at(start_m);
    let mut excess = 0.0;
    for j in 1..=divider_count {
        let y = signal.level_at(start_m + j as f64 * step);
        let dy = y - prev;
        excess += dy * dy / (dx.hypot(dy) + dx);
        prev = y;
    }
    Ok(WINDOW_M * MM_PER_M + excess)
}

/// All polyline lengths of one window, `(divider_count, L)`.
pub fn richardson_lengths(signal: &LevelSignal, start_m: f64) -> Result<Vec<(usize, f64)>> {
    (MIN_DIVIDERS..=MAX_DIVIDERS)
        .map(|i| polyline_length(signal, start_m, i).map(|l| (i, l)))
        .collect()
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    // anchoring y on the first point keeps constant data exactly flat
    let y0 = points[0].1;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1 - y0).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y - y0 - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Section slopes of `log10 L` against `log10 λ`; `lengths` holds
/// `(λ in mm, L)` pairs.
pub fn richardson_slopes(lengths: &[(f64, f64)], window_start: f64) -> Result<FractalTriple> {
    if lengths.is_empty() {
        return Err(Error::EmptyInput("no polyline lengths"));
    }
    let mut sections: [Vec<(f64, f64)>; 3] = Default::default();
    for &(lambda, l) in lengths {
        if !(lambda > 0.0 && l > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lengths must be positive, got L({lambda}) = {l}"
            )));
        }
        let x = lambda.log10();
        let idx = match Section::of(x) {
            Section::Long => 0,
            Section::Mid => 1,
            Section::Short => 2,
        };
        sections[idx].push((x, l.log10()));
    }
    let slope = |idx: usize, section: Section| {
        ols_slope(&sections[idx]).ok_or(Error::SparseSection {
            section: section.name(),
            points: sections[idx].len(),
        })
    };
    Ok(FractalTriple {
        long: slope(0, Section::Long)?,
        mid: slope(1, Section::Mid)?,
        short: slope(2, Section::Short)?,
        window_start,
    })
}

/// Fractal triple of the window starting at `start_m`.
pub fn window_fractal(signal: &LevelSignal, start_m: f64) -> Result<FractalTriple> {
    let lengths: Vec<(f64, f64)> = richardson_lengths(signal, start_m)?
        .into_iter()
        .map(|(i, l)| (divider_length_mm(i), l))
        .collect();
    richardson_slopes(&lengths, start_m)
}

/// Number of windows a signal of `length_m` holds.
pub fn window_count(length_m: f64) -> usize {
    if length_m + FIT_EPS < WINDOW_M {
        0
    } else {
        ((length_m - WINDOW_M) / SHIFT_M + FIT_EPS).floor() as usize + 1
    }
}

/// One triple per 150 m window, shifted by 1 m.
pub fn sliding_fractal(signal: &LevelSignal) -> Result<Vec<FractalTriple>> {
    let n = window_count(signal.length_m());
    if n == 0 {
        return Err(Error::SignalTooShort {
            length_m: signal.length_m(),
            required_m: WINDOW_M,
        });
    }
    (0..n)
        .into_par_iter()
        .map(|k| window_fractal(signal, k as f64 * SHIFT_M))
        .collect()
}

/// Mean long-wave value per consecutive `segment_m` of track, keyed by
/// window start. Segments without any window start are skipped.
pub fn segment_means(triples: &[FractalTriple], segment_m: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for t in triples {
        let seg = (t.window_start / segment_m + FIT_EPS).floor();
        let start = seg * segment_m;
        match out.last_mut() {
            Some(last) if last.0 == start => {
                last.1 += t.long;
                last.2 += 1;
            }
            _ => out.push((start, t.long, 1)),
        }
    }
    out.into_iter().map(|(s, sum, n)| (s, sum / n as f64)).collect()
}
