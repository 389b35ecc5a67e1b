use proptest::prelude::*;

use robmaint::model::validate;
use robmaint::presets::{railway_truth, synthetic_posterior};
use robmaint::rng::seeded;
use robmaint::simulator::{generate_dataset, Behavior};
use robmaint::{Dataset, Error, ModelSample, PomdpModel, PosteriorEnsemble, PriorConfig};

fn bits(e: &PosteriorEnsemble) -> Vec<u64> {
    e.samples()
        .iter()
        .flat_map(|s| s.to_flat().into_iter().chain(s.log_post))
        .map(f64::to_bits)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ensemble_bytes_round_trip(seed in any::<u64>(), n in 1usize..40, jitter in 0.0..0.5f64) {
        let e = synthetic_posterior(&railway_truth(), n, 50.0, jitter, seed).unwrap();
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        let back = PosteriorEnsemble::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(bits(&e), bits(&back));
        prop_assert_eq!(&e, &back);
    }

    #[test]
    fn flat_vector_round_trips(seed in any::<u64>()) {
        let e = synthetic_posterior(&railway_truth(), 1, 30.0, 0.2, seed).unwrap();
        let s = &e.samples()[0];
        let back = ModelSample::from_flat(4, 3, &s.to_flat(), s.log_post).unwrap();
        prop_assert_eq!(s, &back);
    }
}

#[test]
fn rewards_cover_every_valid_pair() {
    let model = PomdpModel::railway();
    for s in 0..4 {
        for a in 0..3 {
            let r = model.reward(s, a).unwrap();
            assert_eq!(r, model.reward(s, a).unwrap());
            assert_eq!(r, model.costs.action_cost(a, s) + model.costs.state_cost(s));
        }
    }
    assert!(matches!(model.reward(4, 0), Err(Error::IndexOutOfRange { .. })));
    assert!(matches!(model.reward(0, 3), Err(Error::IndexOutOfRange { .. })));
}

#[test]
fn always_a1_costs_fifty_plus_the_state_cost() {
    let model = PomdpModel::railway();
    let expected = [-150.0, -250.0, -1050.0, -8050.0];
    for (s, e) in expected.iter().enumerate() {
        assert_eq!(model.reward(s, 1).unwrap(), *e);
    }
}

#[test]
fn ensemble_file_round_trip() {
    let e = synthetic_posterior(&railway_truth(), 25, 80.0, 0.1, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("posterior.bin");
    e.save(&path).unwrap();
    assert_eq!(bits(&e), bits(&PosteriorEnsemble::load(&path).unwrap()));
}

#[test]
fn truncated_ensemble_file_is_rejected() {
    let e = synthetic_posterior(&railway_truth(), 3, 80.0, 0.1, 4).unwrap();
    let mut buf = Vec::new();
    e.write_to(&mut buf).unwrap();
    buf.truncate(buf.len() - 5);
    assert!(PosteriorEnsemble::read_from(buf.as_slice()).is_err());
    assert!(PosteriorEnsemble::read_from(&b"not an ensemble"[..]).is_err());
}

#[test]
fn dataset_csv_round_trip() {
    let model = PomdpModel::railway();
    let data = generate_dataset(
        &railway_truth(),
        &model,
        5,
        8,
        &Behavior::default_for(4, 3),
        &mut seeded(2),
    )
    .unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let back = Dataset::read_csv(buf.as_slice(), 3).unwrap();
    assert_eq!(data, back);
}

#[test]
fn presets_are_valid_samples() {
    let model = PomdpModel::railway();
    assert!(validate(&railway_truth(), &model).is_empty());
    for s in synthetic_posterior(&railway_truth(), 50, 200.0, 0.1, 1)
        .unwrap()
        .samples()
    {
        assert!(validate(s, &model).is_empty());
    }
    PriorConfig::default_for(4, 3).validate().unwrap();
    PriorConfig::default_for(3, 2).validate().unwrap();
    PriorConfig::default_for(5, 3).validate().unwrap();
}
