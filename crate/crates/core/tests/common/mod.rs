//! Shared fixtures for the integration suites: random sequences and Bayes
//! ratios read off an enumerated joint table.

#![allow(dead_code)]

use std::collections::BTreeMap;

use qinstrument::oracle::JointTable;
use qinstrument::random;
use qinstrument::{MeasurementSequence, Stage, Tolerances, UnitaryChannel};
use rand::Rng;

/// Random sequence with `1..=max_stages` instruments on dimension
/// `2..=max_dim`, each with up to `max_outcomes` outcomes of up to
/// `max_kraus` Kraus operators, random efficiency in `[0.5, 1]`, and random
/// unitary connections between some of the stages.
pub fn random_sequence<R: Rng>(
    rng: &mut R,
    max_dim: usize,
    max_stages: usize,
    max_outcomes: usize,
    max_kraus: usize,
) -> MeasurementSequence {
    let d = rng.random_range(2..=max_dim);
    let k = rng.random_range(1..=max_stages);
    let tol = Tolerances::default();
    let mut stages = Vec::new();
    for _ in 0..k {
        if rng.random_bool(0.4) {
            let u = UnitaryChannel::new(random::unitary(rng, d), &tol).unwrap();
            stages.push(Stage::Channel(u));
        }
        let outcomes = rng.random_range(1..=max_outcomes);
        let kraus = rng.random_range(1..=max_kraus);
        let eta = rng.random_range(0.5..=1.0);
        stages.push(Stage::Instrument(random::instrument(rng, d, outcomes, kraus, eta)));
    }
    if rng.random_bool(0.3) {
        let u = UnitaryChannel::new(random::unitary(rng, d), &tol).unwrap();
        stages.push(Stage::Channel(u));
    }
    MeasurementSequence::new(stages).unwrap()
}

/// Joint table of a sequence regrouped into `(A, B, C)` keys, using the same
/// id conventions as `Triple::group`: composed ids join with `,`, an empty
/// group reports the channel outcome `"1"`.
pub fn grouped_joint(table: &JointTable, first: usize, middle: usize) -> BTreeMap<[String; 3], f64> {
    let mut out = BTreeMap::new();
    for (tuple, p) in &table.rows {
        let join = |s: &[String]| if s.is_empty() { "1".to_string() } else { s.join(",") };
        let key = [
            join(&tuple[..first]),
            join(&tuple[first..first + middle]),
            join(&tuple[first + middle..]),
        ];
        *out.entry(key).or_insert(0.0) += p;
    }
    out
}

/// `P(keys) / sum over the free positions`, holding the positions in
/// `fixed` at the given values.
pub fn bayes(
    joint: &BTreeMap<[String; 3], f64>,
    fixed: &[(usize, &str)],
    free: &[(usize, &str)],
) -> f64 {
    let matches = |k: &[String; 3], conds: &[(usize, &str)]| conds.iter().all(|(i, v)| k[*i] == *v);
    let den: f64 = joint.iter().filter(|(k, _)| matches(k, fixed)).map(|(_, p)| p).sum();
    let num: f64 = joint
        .iter()
        .filter(|(k, _)| matches(k, fixed) && matches(k, free))
        .map(|(_, p)| p)
        .sum();
    num / den
}

pub fn max_dev(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    pairs.into_iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Largest deviation between the four full-ratio conditionings of the
/// grouped triple and the Bayes ratios of the enumerated joint table.
pub fn conditioning_deviation(
    seq: &MeasurementSequence,
    table: &JointTable,
    first: usize,
    middle: usize,
    tol: &Tolerances,
) -> f64 {
    use qinstrument::sequence::{
        bidirectional_conditional, condition_on_first, condition_on_intermediate, condition_on_last,
    };
    use qinstrument::{ConditioningMode, Triple};

    let t = Triple::group(seq, first, middle).unwrap();
    let joint = grouped_joint(table, first, middle);
    let full = ConditioningMode::FullRatio;
    let mut dev: f64 = 0.0;
    for a in t.a.ids() {
        let (_, dist) = condition_on_first(&t, a, full, tol).unwrap();
        dev = dev.max(max_dev(dist.entries().iter().map(|(k, r)| {
            (r.value(), bayes(&joint, &[(0, a)], &[(1, &k[0]), (2, &k[1])]))
        })));
        for c in t.c.ids() {
            let (_, dist) = bidirectional_conditional(&t, a, c, tol).unwrap();
            dev = dev.max(max_dev(dist.entries().iter().map(|(k, r)| {
                (r.value(), bayes(&joint, &[(0, a), (2, c)], &[(1, &k[0])]))
            })));
        }
    }
    for b in t.b.ids() {
        let (_, dist) = condition_on_intermediate(&t, b, full, tol).unwrap();
        dev = dev.max(max_dev(dist.entries().iter().map(|(k, r)| {
            (r.value(), bayes(&joint, &[(1, b)], &[(0, &k[0]), (2, &k[1])]))
        })));
    }
    for c in t.c.ids() {
        let (_, dist) = condition_on_last(&t, c, full, tol).unwrap();
        dev = dev.max(max_dev(dist.entries().iter().map(|(k, r)| {
            (r.value(), bayes(&joint, &[(2, c)], &[(0, &k[0]), (1, &k[1])]))
        })));
    }
    dev
}

/// Largest deviation between enumerated joint probabilities and the engine.
pub fn joint_deviation(seq: &MeasurementSequence, table: &JointTable, tol: &Tolerances) -> f64 {
    use qinstrument::sequence::joint_probability;
    use qinstrument::OutcomeSet;
    max_dev(table.rows.iter().map(|(k, p)| {
        let sets: Vec<OutcomeSet> = k.iter().map(OutcomeSet::single).collect();
        (*p, joint_probability(seq, &sets, tol).unwrap())
    }))
}
