//! Truncated Student's t distribution.
//!
//! The base distribution is the location-scale Student's t with `nu` degrees
//! of freedom. Tail probabilities go through the regularized incomplete beta
//! function, always evaluated on the tail that keeps relative precision:
//!
//! ```text
//! P(T > t) = 0.5 * I_{nu / (nu + t^2)}(nu / 2, 1 / 2),   t >= 0
//! ```
//!
//! Sampling uses rejection from the base distribution when the truncation
//! interval carries more than 10% of the mass, and inverse-CDF otherwise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, inv_beta_reg};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Interval mass below which sampling is refused.
pub const MIN_TRUNCATION_MASS: f64 = 1e-300;
/// Interval mass above which rejection sampling is used.
const REJECTION_MASS: f64 = 0.1;

/// Location-scale Student's t restricted to `[lb, ub]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TruncStudentTSpec", into = "TruncStudentTSpec")]
pub struct TruncStudentT {
    mu: f64,
    sigma: f64,
    nu: f64,
    lb: f64,
    ub: f64,
    // standardized bounds
    lo: f64,
    hi: f64,
    mass: f64,
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct TruncStudentTSpec {
    mu: f64,
    sigma: f64,
    nu: f64,
    lb: f64,
    ub: f64,
}

impl TryFrom<TruncStudentTSpec> for TruncStudentT {
    type Error = Error;

    fn try_from(s: TruncStudentTSpec) -> Result<Self> {
        TruncStudentT::new(s.mu, s.sigma, s.nu, s.lb, s.ub)
    }
}

impl From<TruncStudentT> for TruncStudentTSpec {
    fn from(d: TruncStudentT) -> Self {
        TruncStudentTSpec {
            mu: d.mu,
            sigma: d.sigma,
            nu: d.nu,
            lb: d.lb,
            ub: d.ub,
        }
    }
}

impl TruncStudentT {
    pub fn new(mu: f64, sigma: f64, nu: f64, lb: f64, ub: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("location {mu} is not finite")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale {sigma} must be positive")));
        }
        if !(nu > 0.0) || nu.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom {nu} must be positive"
            )));
        }
        if lb.is_nan() || ub.is_nan() || lb >= ub {
            return Err(Error::InvalidParameter(format!(
                "truncation bounds [{lb}, {ub}] are empty"
            )));
        }
        let lo = (lb - mu) / sigma;
        let hi = (ub - mu) / sigma;
        let mass = interval_mass(lo, hi, nu);
        let log_norm = t_log_norm(nu) - sigma.ln() - mass.ln();
        Ok(TruncStudentT {
            mu,
            sigma,
            nu,
            lb,
            ub,
            lo,
            hi,
            mass,
            log_norm,
        })
    }

    /// Untruncated location-scale t.
    pub fn untruncated(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        Self::new(mu, sigma, nu, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Truncated above only, the form used by every emission in the model.
    pub fn upper(mu: f64, sigma: f64, nu: f64, ub: f64) -> Result<Self> {
        Self::new(mu, sigma, nu, f64::NEG_INFINITY, ub)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lb(&self) -> f64 {
        self.lb
    }

    pub fn ub(&self) -> f64 {
        self.ub
    }

    /// Probability mass of the base distribution inside `[lb, ub]`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        if !(x >= self.lb && x <= self.ub) {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sigma;
        self.log_norm - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.logpdf(x).exp()
    }

    /// Truncated CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= self.lb {
            return 0.0;
        }
        if x >= self.ub {
            return 1.0;
        }
        let z = (x - self.mu) / self.sigma;
        (interval_mass(self.lo, z, self.nu) / self.mass).clamp(0.0, 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if !(self.mass >= MIN_TRUNCATION_MASS) {
            return Err(Error::DegenerateTruncation {
                lb: self.lb,
                ub: self.ub,
                mass: self.mass,
            });
        }
        let z = if self.mass > REJECTION_MASS {
            let base = StudentT::new(self.nu).map_err(|e| Error::InvalidParameter(format!("student t: {e}")))?;
            loop {
                let t: f64 = base.sample(rng);
                if t >= self.lo && t <= self.hi {
                    break t;
                }
            }
        } else {
            let u: f64 = rng.random();
            standardized_quantile(self.lo, self.hi, self.nu, u)
        };
        Ok((self.mu + self.sigma * z).clamp(self.lb, self.ub))
    }
}

/// `ln Γ((ν+1)/2) − ln Γ(ν/2) − ½ ln(νπ)`, the standard t log normalizer.
fn t_log_norm(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

fn std_t_logpdf(t: f64, nu: f64) -> f64 {
    t_log_norm(nu) - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()
}

/// Upper tail `P(T > t)` of the standard t.
pub(crate) fn t_sf(t: f64, nu: f64) -> f64 {
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    if t >= 0.0 {
        0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t * t))
    } else {
        1.0 - t_sf(-t, nu)
    }
}

/// Base mass of the standardized interval `[a, b]`, computed on the tail that
/// keeps relative precision.
pub(crate) fn interval_mass(a: f64, b: f64, nu: f64) -> f64 {
    let m = if a >= 0.0 {
        t_sf(a, nu) - t_sf(b, nu)
    } else if b <= 0.0 {
        t_sf(-b, nu) - t_sf(-a, nu)
    } else {
        1.0 - t_sf(-a, nu) - t_sf(b, nu)
    };
    m.max(0.0)
}

/// Quantile of the standard t truncated to `[a, b]` at level `u`.
fn standardized_quantile(a: f64, b: f64, nu: f64, u: f64) -> f64 {
    if a >= 0.0 {
        let (sa, sb) = (t_sf(a, nu), t_sf(b, nu));
        let q = sb + (1.0 - u) * (sa - sb);
        invert_sf(q, a, b, nu)
    } else if b <= 0.0 {
        // mirror onto [-b, -a]
        let (sa, sb) = (t_sf(-b, nu), t_sf(-a, nu));
        let q = sb + u * (sa - sb);
        -invert_sf(q, -b, -a, nu)
    } else {
        let fa = t_sf(-a, nu);
        let p = fa + u * interval_mass(a, b, nu);
        if p < 0.5 {
            -invert_sf(p, (-b).max(0.0), -a, nu)
        } else {
            invert_sf(1.0 - p, 0.0_f64.max(a), b, nu)
        }
    }
}

/// Solves `P(T > t) = q` for `t` inside `[lo, hi]` with safeguarded Newton
/// steps on `ln P(T > t)`.
fn invert_sf(q: f64, lo: f64, hi: f64, nu: f64) -> f64 {
    let target = q.ln();
    let mut lo = lo;
    let mut hi = hi;
    if hi == f64::INFINITY {
        let mut probe = lo.abs().max(1.0);
        while t_sf(probe, nu) > q {
            lo = probe;
            probe *= 4.0;
            if !probe.is_finite() {
                return lo;
            }
        }
        hi = probe;
    }
    if lo == f64::NEG_INFINITY {
        let mut probe = -hi.abs().max(1.0);
        while t_sf(probe, nu) < q {
            hi = probe;
            probe *= 4.0;
            if !probe.is_finite() {
                return hi;
            }
        }
        lo = probe;
    }

    let mut t = initial_guess(q, nu).clamp(lo, hi);
    if !t.is_finite() {
        t = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let s = t_sf(t, nu);
        let g = s.ln() - target;
        if g == 0.0 {
            return t;
        }
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let dg = -(std_t_logpdf(t, nu) - s.ln()).exp();
        let mut next = t - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-14 * t.abs().max(1.0) || hi - lo <= 1e-14 * t.abs().max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

fn initial_guess(q: f64, nu: f64) -> f64 {
    let p2 = 2.0 * q;
    if !(p2 > 1e-250 && p2 < 1.0) {
        return f64::NAN;
    }
    if p2 < 0.5 {
        let x = inv_beta_reg(0.5 * nu, 0.5, p2);
        (nu * (1.0 - x) / x).sqrt()
    } else {
        let y = inv_beta_reg(0.5, 0.5 * nu, 1.0 - p2);
        (nu * y / (1.0 - y)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn normal_logpdf(x: f64, mu: f64, sigma: f64) -> f64 {
        let z = (x - mu) / sigma;
        -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
    }

    #[test]
    fn large_nu_approaches_normal() {
        let d = TruncStudentT::untruncated(0.3, 1.7, 1e6).unwrap();
        for &x in &[-4.0, -1.0, 0.0, 0.3, 2.5, 6.0] {
            assert!((d.logpdf(x) - normal_logpdf(x, 0.3, 1.7)).abs() < 1e-4, "x = {x}");
        }
    }

    #[test]
    fn outside_support_is_impossible() {
        let d = TruncStudentT::new(0.0, 1.0, 3.0, -1.0, 2.0).unwrap();
        assert_eq!(d.logpdf(-1.0001), f64::NEG_INFINITY);
        assert_eq!(d.logpdf(2.0001), f64::NEG_INFINITY);
        assert!(d.logpdf(0.0).is_finite());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(TruncStudentT::new(0.0, 0.0, 3.0, -1.0, 1.0).is_err());
        assert!(TruncStudentT::new(0.0, 1.0, -3.0, -1.0, 1.0).is_err());
        assert!(TruncStudentT::new(0.0, 1.0, 3.0, 1.0, 1.0).is_err());
        assert!(TruncStudentT::new(f64::NAN, 1.0, 3.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn tail_function_matches_known_values() {
        // Cauchy: P(T > 1) = 1/4
        assert!((t_sf(1.0, 1.0) - 0.25).abs() < 1e-14);
        // nu = 2 has the closed form 1/2 - t / (2 sqrt(t^2 + 2))
        for &t in &[0.0, 0.5, 3.0, 40.0] {
            let exact = 0.5 - t / (2.0 * (t * t + 2.0_f64).sqrt());
            assert!((t_sf(t, 2.0) - exact).abs() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = TruncStudentT::new(-0.2, 0.05, 4.0, f64::NEG_INFINITY, -0.5).unwrap();
        assert!(d.mass() < REJECTION_MASS);
        for &u in &[1e-9, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
            let z = standardized_quantile(d.lo, d.hi, d.nu, u);
            let x = d.mu + d.sigma * z;
            assert!((d.cdf(x) - u).abs() < 1e-9, "u = {u}: cdf {}", d.cdf(x));
        }
    }

    #[test]
    fn far_tail_truncation_samples_inside() {
        let d = TruncStudentT::new(-10.0, 1.0, 5.0, 0.0, f64::INFINITY).unwrap();
        let mut rng = seeded(7);
        for _ in 0..10_000 {
            assert!(d.sample(&mut rng).unwrap() >= 0.0);
        }
    }

    #[test]
    fn degenerate_truncation_is_reported() {
        let d = TruncStudentT::new(0.0, 1.0, 1e6, 60.0, 61.0).unwrap();
        let mut rng = seeded(1);
        assert!(matches!(d.sample(&mut rng), Err(Error::DegenerateTruncation { .. })));
    }

    #[test]
    fn symmetric_sampling_balances_around_location() {
        let d = TruncStudentT::untruncated(1.5, 2.0, 3.0).unwrap();
        let mut rng = seeded(11);
        let n = 100_000;
        let below = (0..n).filter(|_| d.sample(&mut rng).unwrap() < 1.5).count();
        assert!((below as f64 / n as f64 - 0.5).abs() < 0.01);
    }
}
