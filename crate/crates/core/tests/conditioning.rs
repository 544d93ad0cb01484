mod common;

use proptest::prelude::*;
use qinstrument::oracle::{enumerate_joint, DEFAULT_BUDGET};
use qinstrument::random;
use qinstrument::sequence::{
    condition_on_first, condition_on_intermediate, condition_on_last, joint_probability,
    InterdictiveState, PredictiveState, RetrodictiveState,
};
use qinstrument::{
    ConditioningMode, Instrument, MeasurementSequence, Operator, OutcomeSet, Tolerances, Triple,
    UnitaryChannel,
};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn complete_triple(rng: &mut StdRng, d: usize) -> Triple {
    Triple::new(
        random::unital_instrument(rng, d, 2, 2),
        random::unital_instrument(rng, d, 3, 1),
        random::unital_instrument(rng, d, 2, 2),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_ratio_matches_bayes_for_any_grouping(seed in any::<u64>()) {
        let tol = Tolerances::default();
        let mut rng = StdRng::seed_from_u64(seed);
        let seq = common::random_sequence(&mut rng, 3, 3, 3, 2);
        let table = enumerate_joint(&seq, DEFAULT_BUDGET, &tol).unwrap();
        let k = seq.instrument_count();
        for first in 0..=k {
            for middle in 0..=k - first {
                prop_assert!(common::conditioning_deviation(&seq, &table, first, middle, &tol) <= 1e-10);
            }
        }
    }

    #[test]
    fn simplified_matches_bayes_when_complete(seed in any::<u64>(), d in 2usize..4) {
        let tol = Tolerances::default();
        let mut rng = StdRng::seed_from_u64(seed);
        let t = complete_triple(&mut rng, d);
        let seq = t.to_sequence();
        let table = enumerate_joint(&seq, DEFAULT_BUDGET, &tol).unwrap();
        let joint = common::grouped_joint(&table, 1, 1);
        let simple = ConditioningMode::Simplified;
        for a in t.a.ids() {
            let (_, dist) = condition_on_first(&t, a, simple, &tol).unwrap();
            for (k, r) in dist.entries() {
                let p = common::bayes(&joint, &[(0, a)], &[(1, &k[0]), (2, &k[1])]);
                prop_assert!((r.value() - p).abs() <= 1e-10);
            }
        }
        for b in t.b.ids() {
            let (_, dist) = condition_on_intermediate(&t, b, simple, &tol).unwrap();
            for (k, r) in dist.entries() {
                let p = common::bayes(&joint, &[(1, b)], &[(0, &k[0]), (2, &k[1])]);
                prop_assert!((r.value() - p).abs() <= 1e-10);
            }
        }
        for c in t.c.ids() {
            let (_, dist) = condition_on_last(&t, c, simple, &tol).unwrap();
            for (k, r) in dist.entries() {
                let p = common::bayes(&joint, &[(2, c)], &[(0, &k[0]), (1, &k[1])]);
                prop_assert!((r.value() - p).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn derived_states_are_valid(seed in any::<u64>(), d in 1usize..5) {
        let tol = Tolerances::default();
        let mut rng = StdRng::seed_from_u64(seed);
        let inst = random::instrument(&mut rng, d, 3, 2, 0.7);
        for id in inst.ids() {
            let pre = PredictiveState::from_outcome(&inst, id, &tol).unwrap();
            let post = RetrodictiveState::from_outcome(&inst, id, &tol).unwrap();
            let inter = InterdictiveState::from_outcome(&inst, id, &tol).unwrap();
            prop_assert!(inter.predictive_state(&tol).unwrap().approx_eq(pre.rho(), 1e-10));
            prop_assert!(inter.retrodictive_state(&tol).unwrap().approx_eq(post.rho(), 1e-10));
        }
    }

    #[test]
    fn time_evolution_is_picture_independent(seed in any::<u64>(), d in 2usize..5) {
        // p_{c|a} with a channel between preparation and detection: evolving the
        // predictive state forward or the retrodictive state backward agrees.
        let tol = Tolerances::default();
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random::unital_instrument(&mut rng, d, 2, 1);
        let c = random::instrument(&mut rng, d, 3, 1, 1.0);
        let ch = UnitaryChannel::new(random::unitary(&mut rng, d), &tol).unwrap();
        let pre = PredictiveState::from_outcome(&a, "0", &tol).unwrap();
        let seq = MeasurementSequence::new(vec![a.clone().into(), ch.clone().into(), c.clone().into()]).unwrap();
        let pa = joint_probability(&seq, &[OutcomeSet::single("0"), OutcomeSet::all(&c)], &tol).unwrap();
        for id in c.ids() {
            let effect = c.outcome(id).unwrap().kraus().predictive_effect();
            let schr = (&effect * &ch.apply_schrodinger(pre.rho()).unwrap()).trace().re;
            let heis = (&ch.apply_heisenberg(&effect).unwrap() * pre.rho().as_operator()).trace().re;
            let joint = joint_probability(&seq, &[OutcomeSet::single("0"), OutcomeSet::single(id)], &tol).unwrap();
            prop_assert!((schr - heis).abs() <= 1e-10);
            prop_assert!((schr - joint / pa).abs() <= 1e-10);
        }
    }
}

#[test]
fn photodetector_as_last_detector_postselects_photon_number() {
    let tol = Tolerances::default();
    let spec = qinstrument::PhotodetectorSpec::new(3, 6, 1.0, 1.0).unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    let t = Triple::new(
        random::unital_instrument(&mut rng, 6, 2, 1),
        UnitaryChannel::identity(6).to_instrument(),
        spec.build(),
    )
    .unwrap();
    let (state, _) = condition_on_last(&t, "1", ConditioningMode::Simplified, &tol).unwrap();
    assert!(state.rho().approx_eq(&Operator::ket_bra(6, 1, 1), 1e-14));
}

#[test]
fn photodetector_intermediate_is_refused_only_downstream() {
    // the photodetector is not retrodictively complete, so retrodiction
    // through it (conditioning on the last detector) must be refused
    let tol = Tolerances::default();
    let spec = qinstrument::PhotodetectorSpec::new(2, 4, 1.0, 1.0).unwrap();
    let t = Triple::new(
        UnitaryChannel::identity(4).to_instrument(),
        spec.build(),
        Instrument::computational(4),
    )
    .unwrap();
    assert!(condition_on_first(&t, "1", ConditioningMode::Simplified, &tol).is_ok());
    assert!(matches!(
        condition_on_last(&t, "0", ConditioningMode::Simplified, &tol),
        Err(qinstrument::Error::Incompleteness { .. })
    ));
    let (_, dist) = condition_on_last(&t, "0", ConditioningMode::FullRatio, &tol).unwrap();
    assert!((dist.total() - 1.0).abs() < 1e-14);
}
