mod common;

use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use common::{tan_quadrature, OracleT};
use robmaint::prob::{hdi, DirichletParams, TruncStudentT};
use robmaint::rng::seeded;

/// `(lb, ub)` for one of four truncation regimes around `mu`.
fn bounds(mu: f64, sigma: f64, regime: u8, offset: f64) -> (f64, f64) {
    match regime {
        0 => (f64::NEG_INFINITY, mu + offset * sigma),
        1 => (mu + offset * sigma, f64::INFINITY),
        2 => (mu - sigma, mu + (1.0 + offset.abs()) * sigma),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn draws_stay_inside_the_truncation(
        mu in -2.0..1.0f64,
        sigma in 0.01..3.0f64,
        nu in 0.8..60.0f64,
        regime in 0u8..4,
        offset in -5.0..5.0f64,
        seed in any::<u64>(),
    ) {
        let (lb, ub) = bounds(mu, sigma, regime, offset);
        let d = TruncStudentT::new(mu, sigma, nu, lb, ub).unwrap();
        let mut rng = seeded(seed);
        for _ in 0..200 {
            let x = d.sample(&mut rng).unwrap();
            prop_assert!(x >= lb && x <= ub, "{x} outside [{lb}, {ub}]");
        }
    }

    #[test]
    fn density_integrates_to_one(
        mu in -2.0..1.0f64,
        sigma in 0.01..3.0f64,
        nu in 0.8..60.0f64,
        regime in 0u8..4,
        offset in -4.0..4.0f64,
    ) {
        let (lb, ub) = bounds(mu, sigma, regime, offset);
        let d = TruncStudentT::new(mu, sigma, nu, lb, ub).unwrap();
        let mass = tan_quadrature(&|x| d.pdf(x), mu, sigma, lb, ub, 1e-11);
        prop_assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn cdf_matches_the_library_t(
        mu in -1.0..1.0f64,
        sigma in 0.05..2.0f64,
        nu in 1.0..40.0f64,
        offset in -3.0..3.0f64,
        u in 0.0..1.0f64,
    ) {
        let ub = mu + offset * sigma;
        let d = TruncStudentT::upper(mu, sigma, nu, ub).unwrap();
        let base = StudentsT::new(0.0, 1.0, nu).unwrap();
        // a point below the bound, spread over the bulk of the support
        let x = ub - sigma * (u / (1.0 - u + 1e-9)).min(50.0);
        let expected = base.cdf((x - mu) / sigma) / base.cdf((ub - mu) / sigma);
        prop_assert!((d.cdf(x) - expected).abs() < 1e-9, "{} vs {expected}", d.cdf(x));
    }

    #[test]
    fn hdi_ignores_sample_order(xs in prop::collection::vec(-100.0..100.0f64, 5..200), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut seeded(seed));
        prop_assert_eq!(hdi(&xs, 0.9).unwrap(), hdi(&shuffled, 0.9).unwrap());
    }

    #[test]
    fn hdi_widens_with_mass(xs in prop::collection::vec(-100.0..100.0f64, 5..200), m1 in 0.05..1.0f64, m2 in 0.05..1.0f64) {
        let (lo_m, hi_m) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        let (a, b) = hdi(&xs, lo_m).unwrap();
        let (c, d) = hdi(&xs, hi_m).unwrap();
        prop_assert!(d - c >= b - a);
    }
}

#[test]
fn seeded_draws_repeat_exactly() {
    let d = TruncStudentT::new(-0.3, 0.1, 4.0, f64::NEG_INFINITY, 0.0).unwrap();
    let tail = TruncStudentT::new(0.0, 1.0, 3.0, 8.0, f64::INFINITY).unwrap();
    let dir = DirichletParams::new(vec![0.5, 2.0, 6.0]).unwrap();
    let run = |seed| {
        let mut rng = seeded(seed);
        let mut out = Vec::new();
        for _ in 0..100 {
            out.push(d.sample(&mut rng).unwrap().to_bits());
            out.push(tail.sample(&mut rng).unwrap().to_bits());
            out.extend(dir.sample(&mut rng).into_iter().map(f64::to_bits));
        }
        out
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn density_agrees_with_the_oracle() {
    for &(mu, sigma, nu, lb, ub) in &[
        (-0.3, 0.1, 5.0, f64::NEG_INFINITY, 0.0),
        (0.0, 1.0, 1.0, -2.0, 0.5),
        (0.2, 0.5, 30.0, 2.0, f64::INFINITY),
    ] {
        let d = TruncStudentT::new(mu, sigma, nu, lb, ub).unwrap();
        let oracle = OracleT::new(mu, sigma, nu, lb, ub);
        for k in 0..50 {
            let x = if lb.is_finite() { lb } else { ub - 5.0 } + k as f64 * 0.1;
            if x > ub {
                assert_eq!(d.pdf(x), 0.0);
                continue;
            }
            let (got, want) = (d.pdf(x), oracle.pdf(x));
            assert!((got - want).abs() <= 1e-10 * want.max(1.0), "pdf({x}) {got} vs {want}");
        }
    }
}

#[test]
fn far_tail_truncation_still_samples() {
    let d = TruncStudentT::new(0.0, 1.0, 30.0, 12.0, f64::INFINITY).unwrap();
    assert!(d.mass() < 1e-10);
    let mut rng = seeded(1);
    let xs: Vec<f64> = (0..2000).map(|_| d.sample(&mut rng).unwrap()).collect();
    assert!(xs.iter().all(|&x| x >= 12.0));
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!(mean < 14.0, "tail mean {mean}");
}
