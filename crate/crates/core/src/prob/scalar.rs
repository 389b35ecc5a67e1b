//! Scalar prior families used for the observation parameters.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Upper tail of the standard normal.
pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Inverse of [`normal_sf`] for `q` in (0, 1).
pub(crate) fn normal_isf(q: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * q)
}

fn normal_interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_sf(-b) - normal_sf(-a)
    } else {
        1.0 - normal_sf(-a) - normal_sf(b)
    }
}

/// A one-dimensional prior.
///
/// Truncation bounds are optional so that configuration files never need to
/// spell out infinities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScalarPrior {
    Normal {
        mean: f64,
        sd: f64,
    },
    TruncNormal {
        mean: f64,
        sd: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lb: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ub: Option<f64>,
    },
    /// Shape/rate parameterization.
    Gamma {
        shape: f64,
        rate: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
}

impl ScalarPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalarPrior::Normal { mean, sd } => mean.is_finite() && sd > 0.0,
            ScalarPrior::TruncNormal { mean, sd, lb, ub } => {
                let (lo, hi) = (lb.unwrap_or(f64::NEG_INFINITY), ub.unwrap_or(f64::INFINITY));
                mean.is_finite()
                    && sd > 0.0
                    && lo < hi
                    && normal_interval_mass((lo - mean) / sd, (hi - mean) / sd) > 1e-12
            }
            ScalarPrior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            ScalarPrior::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid prior {self:?}")))
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ScalarPrior::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ScalarPrior::TruncNormal { lb, ub, .. } => (lb.unwrap_or(f64::NEG_INFINITY), ub.unwrap_or(f64::INFINITY)),
            ScalarPrior::Gamma { .. } => (0.0, f64::INFINITY),
            ScalarPrior::Beta { .. } => (0.0, 1.0),
        }
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NEG_INFINITY;
        }
        match *self {
            ScalarPrior::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            ScalarPrior::TruncNormal { mean, sd, .. } => {
                let (lo, hi) = self.support();
                if x < lo || x > hi {
                    return f64::NEG_INFINITY;
                }
                let z = (x - mean) / sd;
                let mass = normal_interval_mass((lo - mean) / sd, (hi - mean) / sd);
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln() - mass.ln()
            }
            ScalarPrior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            ScalarPrior::Beta { alpha, beta } => {
                if x <= 0.0 || x >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                (alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_beta(alpha, beta)
            }
        }
    }

    /// Mean of the untruncated family; for `TruncNormal` the truncated mean.
    pub fn mean(&self) -> f64 {
        match *self {
            ScalarPrior::Normal { mean, .. } => mean,
            ScalarPrior::TruncNormal { mean, sd, .. } => {
                let (lo, hi) = self.support();
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let phi = |z: f64| {
                    if z.is_infinite() {
                        0.0
                    } else {
                        (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
                    }
                };
                mean + sd * (phi(a) - phi(b)) / normal_interval_mass(a, b)
            }
            ScalarPrior::Gamma { shape, rate } => shape / rate,
            ScalarPrior::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarPrior::Normal { mean, sd } => Normal::new(mean, sd).expect("validated prior").sample(rng),
            ScalarPrior::TruncNormal { mean, sd, .. } => {
                let (lo, hi) = self.support();
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                mean + sd * sample_std_trunc_normal(a, b, rng)
            }
            ScalarPrior::Gamma { shape, rate } => {
                let g = Gamma::new(shape, 1.0 / rate).expect("validated prior");
                // a gamma draw of exactly zero is possible for tiny shapes
                g.sample(rng).max(f64::MIN_POSITIVE)
            }
            ScalarPrior::Beta { alpha, beta } => {
                let b = Beta::new(alpha, beta).expect("validated prior");
                let x: f64 = b.sample(rng);
                x.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
            }
        }
    }
}

fn sample_std_trunc_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let mass = normal_interval_mass(a, b);
    if mass > 0.1 {
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        loop {
            let z: f64 = n.sample(rng);
            if z >= a && z <= b {
                return z;
            }
        }
    }
    let u: f64 = rng.random();
    let z = if a >= 0.0 {
        let (sa, sb) = (normal_sf(a), normal_sf(b));
        normal_isf(sb + (1.0 - u) * (sa - sb))
    } else if b <= 0.0 {
        let (sa, sb) = (normal_sf(-b), normal_sf(-a));
        -normal_isf(sb + u * (sa - sb))
    } else {
        let p = normal_sf(-a) + u * mass;
        if p < 0.5 {
            -normal_isf(p)
        } else {
            normal_isf(1.0 - p)
        }
    };
    z.clamp(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn draws_respect_support() {
        let priors = [
            ScalarPrior::TruncNormal {
                mean: 0.05,
                sd: 0.05,
                lb: Some(0.0),
                ub: None,
            },
            ScalarPrior::TruncNormal {
                mean: -0.2,
                sd: 0.2,
                lb: None,
                ub: Some(0.0),
            },
            ScalarPrior::TruncNormal {
                mean: 3.0,
                sd: 0.5,
                lb: None,
                ub: Some(0.0),
            },
            ScalarPrior::Gamma { shape: 2.0, rate: 0.1 },
            ScalarPrior::Beta { alpha: 2.0, beta: 2.0 },
        ];
        let mut rng = seeded(3);
        for p in priors {
            let (lo, hi) = p.support();
            for _ in 0..20_000 {
                let x = p.sample(&mut rng);
                assert!(x >= lo && x <= hi, "{p:?} drew {x}");
                assert!(p.logpdf(x).is_finite(), "{p:?} at {x}");
            }
        }
    }

    #[test]
    fn gamma_mean() {
        let p = ScalarPrior::Gamma { shape: 2.0, rate: 0.1 };
        let mut rng = seeded(17);
        let n = 200_000;
        let m = (0..n).map(|_| p.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 20.0).abs() < 0.4, "mean {m}");
        assert_eq!(p.mean(), 20.0);
    }

    #[test]
    fn truncated_normal_normalizes() {
        let p = ScalarPrior::TruncNormal {
            mean: -0.2,
            sd: 0.2,
            lb: None,
            ub: Some(0.0),
        };
        // midpoint rule over [-3, 0]
        let n = 300_000;
        let h = 3.0 / n as f64;
        let total: f64 = (0..n).map(|i| p.logpdf(-3.0 + (i as f64 + 0.5) * h).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn invalid_priors_rejected() {
        assert!(ScalarPrior::Normal { mean: 0.0, sd: 0.0 }.validate().is_err());
        assert!(ScalarPrior::Gamma { shape: -1.0, rate: 1.0 }.validate().is_err());
        assert!(ScalarPrior::TruncNormal {
            mean: 0.0,
            sd: 1.0,
            lb: Some(1.0),
            ub: Some(0.0)
        }
        .validate()
        .is_err());
    }
}
