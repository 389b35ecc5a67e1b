use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Concentration vector of a Dirichlet distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = Error;

    fn try_from(alpha: Vec<f64>) -> Result<Self> {
        DirichletParams::new(alpha)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(p: DirichletParams) -> Self {
        p.alpha
    }
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidParameter("empty Dirichlet concentration".into()));
        }
        if let Some((i, a)) = alpha.iter().enumerate().find(|(_, &a)| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet concentration [{i}] = {a} must be positive"
            )));
        }
        Ok(DirichletParams { alpha })
    }

    pub fn uniform(n: usize) -> Self {
        DirichletParams { alpha: vec![1.0; n] }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.alpha.iter().sum();
        self.alpha.iter().map(|a| a / total).collect()
    }

    /// Conjugate update with categorical counts.
    pub fn posterior(&self, counts: &[f64]) -> Result<Self> {
        if counts.len() != self.alpha.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for {} categories",
                counts.len(),
                self.alpha.len()
            )));
        }
        DirichletParams::new(self.alpha.iter().zip(counts).map(|(a, c)| a + c).collect())
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        if x.len() != self.alpha.len() {
            return f64::NEG_INFINITY;
        }
        let total: f64 = self.alpha.iter().sum();
        let mut lp = ln_gamma(total);
        for (&a, &xi) in self.alpha.iter().zip(x) {
            if xi < 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += (a - 1.0) * xi.max(f64::MIN_POSITIVE).ln() - ln_gamma(a);
        }
        lp
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        // Gamma variates are drawn in log space: shapes far below one
        // underflow otherwise.
        let logs: Vec<f64> = self.alpha.iter().map(|&a| log_gamma_variate(a, rng)).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut x: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total);
        x
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`.
fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("validated shape");
        let v: f64 = g.sample(rng);
        v.ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let g = Gamma::new(shape + 1.0, 1.0).expect("validated shape");
        let v: f64 = g.sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        v.ln() + u.ln() / shape
    }
}

/// Draws one probability vector from `Dirichlet(params)`.
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &DirichletParams, rng: &mut R) -> Vec<f64> {
    params.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn draws_lie_on_the_simplex() {
        let p = DirichletParams::new(vec![1.0; 4]).unwrap();
        let mut rng = seeded(5);
        for _ in 0..1000 {
            let x = sample_dirichlet(&p, &mut rng);
            assert_eq!(x.len(), 4);
            assert!(x.iter().all(|&v| v >= 0.0));
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn concentration_limit() {
        let p = DirichletParams::new(vec![1e9, 1e-9, 1e-9, 1e-9]).unwrap();
        let mut rng = seeded(9);
        for _ in 0..100 {
            let x = sample_dirichlet(&p, &mut rng);
            assert!((x[0] - 1.0).abs() < 1e-3);
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_mean_matches_analytic_mean() {
        let p = DirichletParams::new(vec![2.0, 1.0, 1.0]).unwrap();
        let mut rng = seeded(21);
        let n = 100_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            let x = sample_dirichlet(&p, &mut rng);
            for (a, v) in acc.iter_mut().zip(&x) {
                *a += v / n as f64;
            }
        }
        for (got, want) in acc.iter().zip(p.mean()) {
            assert!((got - want).abs() < 0.01, "{got} vs {want}");
        }
        assert!((p.mean()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_alpha_is_rejected() {
        assert!(DirichletParams::new(vec![1.0, 0.0]).is_err());
        assert!(DirichletParams::new(vec![1.0, -2.0]).is_err());
        assert!(DirichletParams::new(vec![]).is_err());
        assert!(serde_json::from_str::<DirichletParams>("[1.0, -1.0]").is_err());
    }

    #[test]
    fn flat_density_on_the_triangle() {
        let p = DirichletParams::uniform(3);
        // Dirichlet(1,1,1) has density Γ(3) = 2 everywhere on the simplex.
        assert!((p.logpdf(&[0.2, 0.3, 0.5]) - 2.0_f64.ln()).abs() < 1e-12);
    }
}
