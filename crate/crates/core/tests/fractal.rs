use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use robmaint::fractal::{
    polyline_length, sliding_fractal, window_count, window_fractal, LevelSignal, Section, DEFAULT_SPACING_M,
    MAX_DIVIDERS, MIN_DIVIDERS,
};
use robmaint::rng::seeded;

/// Three sinusoids of random amplitude and phase plus sample-level jitter.
fn random_signal(length_m: f64, seed: u64) -> LevelSignal {
    let mut rng = seeded(seed);
    let waves: Vec<(f64, f64, f64)> = [2.3, 9.7, 31.0]
        .iter()
        .map(|&w| (rng.random_range(0.5..4.0), w, rng.random_range(0.0..6.3)))
        .collect();
    let jitter = Normal::new(0.0, 0.2).unwrap();
    let n = (length_m / DEFAULT_SPACING_M).round() as usize + 1;
    let samples = (0..n)
        .map(|k| {
            let x = k as f64 * DEFAULT_SPACING_M;
            waves
                .iter()
                .map(|(a, w, p)| a * (2.0 * std::f64::consts::PI * x / w + p).sin())
                .sum::<f64>()
                + jitter.sample(&mut rng)
        })
        .collect();
    LevelSignal::new(samples, DEFAULT_SPACING_M).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vertical_stretch_never_shortens(seed in any::<u64>(), c in 1.0..10.0f64) {
        let s = random_signal(150.0, seed);
        let stretched = LevelSignal::new(s.samples().iter().map(|y| c * y).collect(), s.spacing()).unwrap();
        for i in MIN_DIVIDERS..=MAX_DIVIDERS {
            prop_assert!(polyline_length(&stretched, 0.0, i).unwrap() >= polyline_length(&s, 0.0, i).unwrap());
        }
        let t = window_fractal(&stretched, 0.0).unwrap();
        prop_assert!(t.short.is_finite() && t.mid.is_finite() && t.long.is_finite());
    }

    #[test]
    fn nested_dividers_never_shorten(seed in any::<u64>(), i in MIN_DIVIDERS..=116usize, k in 2usize..5) {
        let s = random_signal(150.0, seed);
        let coarse = polyline_length(&s, 0.0, i).unwrap();
        let fine = polyline_length(&s, 0.0, i * k).unwrap();
        prop_assert!(fine >= coarse - 1e-9);
    }
}

#[test]
fn flat_signal_has_zero_slopes() {
    let flat = LevelSignal::from_fn(200.0, DEFAULT_SPACING_M, |_| 3.5).unwrap();
    for t in sliding_fractal(&flat).unwrap() {
        assert_eq!((t.short, t.mid, t.long), (0.0, 0.0, 0.0));
    }
}

#[test]
fn windows_shift_with_the_signal() {
    let s = random_signal(160.0, 3);
    let per_m = (1.0 / DEFAULT_SPACING_M) as usize;
    let shifted = LevelSignal::new(s.samples()[per_m..].to_vec(), s.spacing()).unwrap();
    let a = sliding_fractal(&s).unwrap();
    let b = sliding_fractal(&shifted).unwrap();
    assert_eq!(a.len(), window_count(s.length_m()));
    assert_eq!(b.len(), a.len() - 1);
    for (x, y) in a[1..].iter().zip(&b) {
        assert!((x.short - y.short).abs() < 1e-9);
        assert!((x.mid - y.mid).abs() < 1e-9);
        assert!((x.long - y.long).abs() < 1e-9);
    }
}

#[test]
fn noise_lowers_long_wave_values() {
    let base = random_signal(150.0, 11);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let amplitudes = [0.0, 5.0, 20.0, 60.0];
    let mut sums = [0.0; 4];
    let replicates = 100;
    for r in 0..replicates {
        let mut rng = seeded(1000 + r);
        let noise: Vec<f64> = base.samples().iter().map(|_| unit.sample(&mut rng)).collect();
        for (sum, amp) in sums.iter_mut().zip(amplitudes) {
            let noisy: Vec<f64> = base.samples().iter().zip(&noise).map(|(y, e)| y + amp * e).collect();
            *sum += window_fractal(&LevelSignal::new(noisy, base.spacing()).unwrap(), 0.0)
                .unwrap()
                .long;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / replicates as f64).collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0], "long-wave means {means:?}");
    }
}

#[test]
fn sections_hold_the_expected_divider_counts() {
    let mut counts = [0; 3];
    for i in MIN_DIVIDERS..=MAX_DIVIDERS {
        let lambda = robmaint::fractal::divider_length_mm(i).log10();
        counts[match Section::of(lambda) {
            Section::Long => 0,
            Section::Mid => 1,
            Section::Short => 2,
        }] += 1;
    }
    assert_eq!(counts, [26, 170, 380]);
}
