//! Stateless joint statistics for detector sequences, and the states that
//! reappear under conditioning.
//!
//! The joint probability of outcome selections `S_1..S_k` is the ratio
//!
//! ```text
//! p = <1, A_k[S_k] ... A_1[S_1] I> / <1, A_k ... A_1 I>
//! ```
//!
//! where the denominator uses the non-selective instruments. Nothing but the
//! instruments enters: the identity on the right stands in for the least
//! biased input and the identity on the left for the absence of later
//! detections. Lossy detectors are handled by the denominator.
//!
//! For a three-detector [`Triple`] `(A, B, C)`, conditioning the joint
//! probability on
//!
//! * the first outcome `a` gives the predictive state `A_a I / Tr(A_a I)`,
//! * the last outcome `c` gives the retrodictive state `C*_c 1 / Tr(C*_c 1)`,
//! * the middle outcome `b` gives the interdictive state `B_b / Tr(B_b I)`,
//!   a normalized operation,
//! * both `a` and `c` gives the bidirectional pair of the first two.
//!
//! The simplified state formulas need completeness of the remaining detectors
//! and are refused with [`Error::Incompleteness`] otherwise; the full Bayes
//! ratios are available through [`ConditioningMode::FullRatio`].

use crate::channels::UnitaryChannel;
use crate::error::{Error, Result};
use crate::instrument::{Instrument, KrausSet, LabelFunction, Outcome, OutcomeSet};
use crate::operator::{hs_inner, C64, DensityOperator, Operator, Tolerances};

#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    Instrument(Instrument),
    Channel(UnitaryChannel),
}

impl Stage {
    pub fn dim(&self) -> usize {
        match self {
            Stage::Instrument(i) => i.dim(),
            Stage::Channel(c) => c.dim(),
        }
    }
}

impl From<Instrument> for Stage {
    fn from(i: Instrument) -> Self {
        Stage::Instrument(i)
    }
}

impl From<UnitaryChannel> for Stage {
    fn from(c: UnitaryChannel) -> Self {
        Stage::Channel(c)
    }
}

/// Ordered detectors interleaved with unitary connections. Channels carry no
/// outcome index.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSequence {
    dim: usize,
    stages: Vec<Stage>,
}

impl MeasurementSequence {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        let dim = stages
            .first()
            .map(Stage::dim)
            .ok_or_else(|| Error::Sequence("empty sequence".into()))?;
        for (i, s) in stages.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::dim(dim, s.dim(), &format!("stage {i}")));
            }
        }
        Ok(MeasurementSequence { dim, stages })
    }

    pub fn from_instruments(instruments: Vec<Instrument>) -> Result<Self> {
        MeasurementSequence::new(instruments.into_iter().map(Stage::Instrument).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn instruments(&self) -> impl Iterator<Item = &Instrument> {
        self.stages.iter().filter_map(|s| match s {
            Stage::Instrument(i) => Some(i),
            Stage::Channel(_) => None,
        })
    }

    pub fn instrument_count(&self) -> usize {
        self.instruments().count()
    }

    /// Unit labels for every instrument stage.
    pub fn unit_labels(&self) -> Vec<LabelFunction> {
        self.instruments().map(LabelFunction::ones).collect()
    }

    /// Indicator labels for one outcome set per instrument stage.
    pub fn indicators(&self, outcomes: &[OutcomeSet]) -> Result<Vec<LabelFunction>> {
        self.check_selection_count(outcomes.len())?;
        self.instruments()
            .zip(outcomes)
            .map(|(inst, s)| LabelFunction::indicator(inst, s))
            .collect()
    }

    fn check_selection_count(&self, n: usize) -> Result<()> {
        let k = self.instrument_count();
        if n != k {
            return Err(Error::Sequence(format!(
                "expected one selection per instrument stage ({k}), got {n}"
            )));
        }
        Ok(())
    }

    /// `A_k[f_k] ... A_1[f_1] start`, with interdictive insertions applied
    /// after the stage count they name.
    fn propagate(
        &self,
        labels: &[LabelFunction],
        start: &Operator,
        insertions: &[Insertion],
    ) -> Result<Operator> {
        self.check_selection_count(labels.len())?;
        if start.dim() != self.dim {
            return Err(Error::dim(self.dim, start.dim(), "sequence input"));
        }
        for ins in insertions {
            if ins.position > self.stages.len() {
                return Err(Error::Sequence(format!(
                    "insertion position {} beyond {} stages",
                    ins.position,
                    self.stages.len()
                )));
            }
            if ins.state.dim() != self.dim {
                return Err(Error::dim(self.dim, ins.state.dim(), "interdictive insertion"));
            }
        }
        let apply_insertions = |pos: usize, o: Operator| {
            insertions
                .iter()
                .filter(|i| i.position == pos)
                .fold(o, |acc, i| i.state.apply(&acc))
        };
        let mut o = apply_insertions(0, start.clone());
        let mut f = labels.iter();
        for (pos, stage) in self.stages.iter().enumerate() {
            o = match stage {
                Stage::Instrument(inst) => inst.apply_labeled(f.next().expect("counted"), &o)?,
                Stage::Channel(ch) => ch.apply_schrodinger(&o)?,
            };
            o = apply_insertions(pos + 1, o);
        }
        Ok(o)
    }

    /// Adjoint chain `A_1*[f_1] ... A_k*[f_k] end`.
    pub fn backward(&self, labels: &[LabelFunction], end: &Operator) -> Result<Operator> {
        self.check_selection_count(labels.len())?;
        if end.dim() != self.dim {
            return Err(Error::dim(self.dim, end.dim(), "sequence effect"));
        }
        let mut o = end.clone();
        let mut f = labels.iter().rev();
        for stage in self.stages.iter().rev() {
            o = match stage {
                Stage::Instrument(inst) => {
                    inst.apply_adjoint_labeled(f.next().expect("counted"), &o)?
                }
                Stage::Channel(ch) => ch.apply_heisenberg(&o)?,
            };
        }
        Ok(o)
    }

    /// Forward chain `A_k[f_k] ... A_1[f_1] start`.
    pub fn forward(&self, labels: &[LabelFunction], start: &Operator) -> Result<Operator> {
        self.propagate(labels, start, &[])
    }

    /// All outcome-id tuples over the instrument stages, first stage slowest.
    pub fn outcome_tuples(&self) -> Vec<Vec<String>> {
        let mut tuples: Vec<Vec<String>> = vec![vec![]];
        for inst in self.instruments() {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    inst.ids().map(move |id| {
                        let mut t = t.clone();
                        t.push(id.to_string());
                        t
                    })
                })
                .collect();
        }
        tuples
    }
}

/// A ratio together with its parts, as reported by every conditioned quantity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub numerator: f64,
    pub denominator: f64,
}

impl Ratio {
    fn checked(numerator: f64, denominator: f64, tol: &Tolerances, context: &str) -> Result<Self> {
        if !(denominator > tol.norm) {
            return Err(Error::ZeroNormalization {
                context: context.to_string(),
                denominator,
                threshold: tol.norm,
            });
        }
        Ok(Ratio {
            numerator,
            denominator,
        })
    }

    pub fn value(&self) -> f64 {
        self.numerator / self.denominator
    }
}

/// `c = <1, A_k[f_k] ... A_1[f_1] I>`.
pub fn unnormalized_weight(seq: &MeasurementSequence, labels: &[LabelFunction]) -> Result<f64> {
    Ok(seq.forward(labels, &Operator::identity(seq.dim))?.trace().re)
}

/// `N = <1, A_k ... A_1 I>` with every stage non-selective.
pub fn normalization(seq: &MeasurementSequence) -> Result<f64> {
    unnormalized_weight(seq, &seq.unit_labels())
}

pub fn correlation_ratio(
    seq: &MeasurementSequence,
    labels: &[LabelFunction],
    tol: &Tolerances,
) -> Result<Ratio> {
    let num = unnormalized_weight(seq, labels)?;
    Ratio::checked(num, normalization(seq)?, tol, "sequence normalization")
}

/// `<alpha_1 ... alpha_k> = c / N`.
pub fn correlation(
    seq: &MeasurementSequence,
    labels: &[LabelFunction],
    tol: &Tolerances,
) -> Result<f64> {
    correlation_ratio(seq, labels, tol).map(|r| r.value())
}

pub fn joint_ratio(
    seq: &MeasurementSequence,
    outcomes: &[OutcomeSet],
    tol: &Tolerances,
) -> Result<Ratio> {
    correlation_ratio(seq, &seq.indicators(outcomes)?, tol)
}

/// `p_{S_1..S_k} = n / N`.
pub fn joint_probability(
    seq: &MeasurementSequence,
    outcomes: &[OutcomeSet],
    tol: &Tolerances,
) -> Result<f64> {
    joint_ratio(seq, outcomes, tol).map(|r| r.value())
}

/// Joint probability of every single-outcome tuple, in
/// [`MeasurementSequence::outcome_tuples`] order.
pub fn joint_distribution(
    seq: &MeasurementSequence,
    tol: &Tolerances,
) -> Result<Vec<(Vec<String>, Ratio)>> {
    let denominator = normalization(seq)?;
    seq.outcome_tuples()
        .into_iter()
        .map(|t| {
            let sets: Vec<OutcomeSet> = t.iter().map(OutcomeSet::single).collect();
            let n = unnormalized_weight(seq, &seq.indicators(&sets)?)?;
            Ok((t, Ratio::checked(n, denominator, tol, "sequence normalization")?))
        })
        .collect()
}

/// Whether the simplified state formulas are used (with completeness checks)
/// or the un-simplified Bayes ratios.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConditioningMode {
    #[default]
    Simplified,
    FullRatio,
}

/// Three detectors `A`, `B`, `C` in sequence; `B` may itself be a composite.
#[derive(Clone, Debug, PartialEq)]
pub struct Triple {
    pub a: Instrument,
    pub b: Instrument,
    pub c: Instrument,
}

impl Triple {
    pub fn new(a: Instrument, b: Instrument, c: Instrument) -> Result<Self> {
        if a.dim() != b.dim() || a.dim() != c.dim() {
            return Err(Error::Dimension(format!(
                "triple dims differ: {}, {}, {}",
                a.dim(),
                b.dim(),
                c.dim()
            )));
        }
        Ok(Triple { a, b, c })
    }

    /// Groups a sequence into `(A, B, C)`: the first `first` instrument stages
    /// compose into `A`, the next `middle` into `B`, the rest into `C`.
    ///
    /// Channels are folded into the Kraus operators of the next instrument
    /// (or the preceding one at the tail). An empty group becomes the
    /// identity channel.
    pub fn group(seq: &MeasurementSequence, first: usize, middle: usize) -> Result<Self> {
        let k = seq.instrument_count();
        if first + middle > k {
            return Err(Error::Sequence(format!(
                "cannot take {first} + {middle} instrument stages from {k}"
            )));
        }
        let bounds = [first, first + middle, k];
        let mut groups: [Option<Instrument>; 3] = [None, None, None];
        let mut pending: Option<UnitaryChannel> = None;
        let mut seen = 0usize;
        for stage in seq.stages() {
            match stage {
                Stage::Channel(ch) => {
                    pending = Some(match pending {
                        Some(p) => p.then(ch)?,
                        None => ch.clone(),
                    })
                }
                Stage::Instrument(inst) => {
                    let g = bounds.iter().position(|&b| seen < b).expect("seen < k");
                    let inst = match pending.take() {
                        Some(p) => inst.preceded_by(&p)?,
                        None => inst.clone(),
                    };
                    groups[g] = Some(match groups[g].take() {
                        Some(prev) => prev.compose(&inst)?,
                        None => inst,
                    });
                    seen += 1;
                }
            }
        }
        if let Some(p) = pending {
            // trailing channels act after the last instrument
            match groups.iter_mut().rev().find(|g| g.is_some()) {
                Some(g) => *g = Some(g.take().expect("some").followed_by(&p)?),
                None => unreachable!("a sequence with only channels has no instrument to fold into"),
            }
        }
        let dim = seq.dim();
        let [a, b, c] = groups.map(|g| g.unwrap_or_else(|| UnitaryChannel::identity(dim).to_instrument()));
        Triple::new(a, b, c)
    }

    /// The triple as a plain three-stage sequence.
    pub fn to_sequence(&self) -> MeasurementSequence {
        MeasurementSequence::from_instruments(vec![self.a.clone(), self.b.clone(), self.c.clone()])
            .expect("dims agree")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveState {
    rho: DensityOperator,
}

impl PredictiveState {
    /// `A_a I / Tr(A_a I)`: the trace-normalized retrodictive PO of outcome `a`.
    pub fn from_outcome(inst: &Instrument, id: &str, tol: &Tolerances) -> Result<Self> {
        let po = inst.outcome(id)?.kraus().retrodictive_effect();
        Ok(PredictiveState {
            rho: normalized_po(&po, tol, "predictive state")?,
        })
    }

    pub fn rho(&self) -> &DensityOperator {
        &self.rho
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrodictiveState {
    rho: DensityOperator,
}

impl RetrodictiveState {
    /// `C*_c 1 / Tr(C*_c 1)`: the trace-normalized predictive PO of outcome `c`.
    pub fn from_outcome(inst: &Instrument, id: &str, tol: &Tolerances) -> Result<Self> {
        let po = inst.outcome(id)?.kraus().predictive_effect();
        Ok(RetrodictiveState {
            rho: normalized_po(&po, tol, "retrodictive state")?,
        })
    }

    pub fn rho(&self) -> &DensityOperator {
        &self.rho
    }
}

fn normalized_po(po: &Operator, tol: &Tolerances, context: &str) -> Result<DensityOperator> {
    let tr = po.trace().re;
    if !(tr > tol.norm) {
        return Err(Error::ZeroNormalization {
            context: context.into(),
            denominator: tr,
            threshold: tol.norm,
        });
    }
    DensityOperator::new(po.scale_real(1.0 / tr), tol)
}

/// Normalized operation `B_b / <1, B_b I>` for an intermediate outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct InterdictiveState {
    kraus: KrausSet,
    norm: f64,
}

impl InterdictiveState {
    pub fn from_outcome(inst: &Instrument, id: &str, tol: &Tolerances) -> Result<Self> {
        let kraus = inst.outcome(id)?.kraus().clone();
        InterdictiveState::from_kraus(kraus, tol)
    }

    /// Both normalizers `<1, B^_b>` and `<B^v_b, I>` equal `sum_y Tr(N^dag N)`
    /// and are checked against each other.
    pub fn from_kraus(kraus: KrausSet, tol: &Tolerances) -> Result<Self> {
        let retro = kraus.retrodictive_effect().trace().re;
        let pred = kraus.predictive_effect().trace().re;
        if (retro - pred).abs() > tol.eq * retro.abs().max(1.0) {
            return Err(Error::Structure(format!(
                "interdictive normalizers disagree: {retro} vs {pred}"
            )));
        }
        if !(retro > tol.norm) {
            return Err(Error::ZeroNormalization {
                context: "interdictive state".into(),
                denominator: retro,
                threshold: tol.norm,
            });
        }
        Ok(InterdictiveState { kraus, norm: retro })
    }

    pub fn dim(&self) -> usize {
        self.kraus.dim()
    }

    pub fn kraus(&self) -> &KrausSet {
        &self.kraus
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `rho~ O = sum N O N^dagger / norm`.
    pub fn apply(&self, o: &Operator) -> Operator {
        self.kraus.apply(o).scale_real(1.0 / self.norm)
    }

    /// `rho~* O = sum N^dagger O N / norm`.
    pub fn apply_adjoint(&self, o: &Operator) -> Operator {
        self.kraus.apply_adjoint(o).scale_real(1.0 / self.norm)
    }

    /// `rho~ I`, the predictive state induced by the outcome.
    pub fn predictive_state(&self, tol: &Tolerances) -> Result<DensityOperator> {
        DensityOperator::new(self.apply(&Operator::identity(self.dim())), tol)
    }

    /// `rho~* 1`, the retrodictive state induced by the outcome.
    pub fn retrodictive_state(&self, tol: &Tolerances) -> Result<DensityOperator> {
        DensityOperator::new(self.apply_adjoint(&Operator::identity(self.dim())), tol)
    }

    /// The state as a single-outcome instrument (not normalized in general).
    pub fn to_instrument(&self, id: &str) -> Instrument {
        let s = 1.0 / self.norm.sqrt();
        let kraus = KrausSet::new(self.kraus.operators().iter().map(|m| m.scale_real(s)).collect())
            .expect("nonempty");
        Instrument::new_unchecked(self.dim(), vec![Outcome::new(id, kraus)]).expect("one outcome")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BidirectionalState {
    pub pre: PredictiveState,
    pub post: RetrodictiveState,
}

/// Conditional distribution over outcome tuples of the unconditioned
/// detectors, in row-major order of their outcome lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionalDistribution {
    entries: Vec<(Vec<String>, Ratio)>,
}

impl ConditionalDistribution {
    pub fn entries(&self) -> &[(Vec<String>, Ratio)] {
        &self.entries
    }

    pub fn get(&self, key: &[&str]) -> Option<f64> {
        self.entries
            .iter()
            .find(|(k, _)| k.iter().map(String::as_str).eq(key.iter().copied()))
            .map(|(_, r)| r.value())
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, r)| r.value()).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn require(
    complete: bool,
    detector: &str,
    property: &'static str,
) -> Result<()> {
    if complete {
        Ok(())
    } else {
        Err(Error::Incompleteness {
            detector: detector.to_string(),
            property,
        })
    }
}

fn real_inner(b: &Operator, a: &Operator) -> Result<f64> {
    Ok(hs_inner(b, a)?.re)
}

/// Condition on outcome `a` of the first detector.
///
/// Simplified mode requires `B` and `C` predictively complete and evaluates
/// `p_{b,c|a} = <B*_b C^v_c, rho^_a>`; full-ratio mode evaluates
/// `<B*_b C^v_c, A^_a> / <B* C^v[1], A^_a>`.
pub fn condition_on_first(
    t: &Triple,
    a: &str,
    mode: ConditioningMode,
    tol: &Tolerances,
) -> Result<(PredictiveState, ConditionalDistribution)> {
    let retro_a = t.a.outcome(a)?.kraus().retrodictive_effect();
    let state = PredictiveState::from_outcome(&t.a, a, tol)?;
    let (weight, denominator) = match mode {
        ConditioningMode::Simplified => {
            require(t.b.is_predictively_complete(tol), "B (after the conditioned detector)", "predictively")?;
            require(t.c.is_predictively_complete(tol), "C (last detector)", "predictively")?;
            (state.rho().as_operator().clone(), 1.0)
        }
        ConditioningMode::FullRatio => {
            let bias = t.b.nonselective_adjoint(&t.c.nonselective_adjoint(&Operator::identity(t.c.dim()))?)?;
            let den = real_inner(&bias, &retro_a)?;
            (retro_a, den)
        }
    };
    let denominator = Ratio::checked(0.0, denominator, tol, "conditioning on the first detector")?.denominator;
    let mut entries = Vec::new();
    for b in t.b.ids() {
        for c in t.c.ids() {
            let effect = t.b.apply_outcome_adjoint(b, &t.c.outcome(c)?.kraus().predictive_effect())?;
            let num = real_inner(&effect, &weight)?;
            entries.push((vec![b.to_string(), c.to_string()], Ratio { numerator: num, denominator }));
        }
    }
    Ok((state, ConditionalDistribution { entries }))
}

/// Condition on outcome `c` of the last detector.
///
/// Simplified mode requires `A` and `B` retrodictively complete and evaluates
/// `p_{a,b|c} = <rho^v_c, B_b A^_a>`.
pub fn condition_on_last(
    t: &Triple,
    c: &str,
    mode: ConditioningMode,
    tol: &Tolerances,
) -> Result<(RetrodictiveState, ConditionalDistribution)> {
    let pred_c = t.c.outcome(c)?.kraus().predictive_effect();
    let state = RetrodictiveState::from_outcome(&t.c, c, tol)?;
    let (weight, denominator) = match mode {
        ConditioningMode::Simplified => {
            require(t.a.is_retrodictively_complete(tol), "A (first detector)", "retrodictively")?;
            require(t.b.is_retrodictively_complete(tol), "B (before the conditioned detector)", "retrodictively")?;
            (state.rho().as_operator().clone(), 1.0)
        }
        ConditioningMode::FullRatio => {
            let bias = t.b.nonselective(&t.a.nonselective(&Operator::identity(t.a.dim()))?)?;
            let den = real_inner(&pred_c, &bias)?;
            (pred_c, den)
        }
    };
    let denominator = Ratio::checked(0.0, denominator, tol, "conditioning on the last detector")?.denominator;
    let mut entries = Vec::new();
    for a in t.a.ids() {
        let retro_a = t.a.outcome(a)?.kraus().retrodictive_effect();
        for b in t.b.ids() {
            let num = real_inner(&weight, &t.b.apply_outcome(b, &retro_a)?)?;
            entries.push((vec![a.to_string(), b.to_string()], Ratio { numerator: num, denominator }));
        }
    }
    Ok((state, ConditionalDistribution { entries }))
}

/// Condition on outcome `b` of the intermediate detector.
///
/// Simplified mode requires `A` retrodictively and `C` predictively complete
/// and evaluates `p_{a,c|b} = <C^v_c, rho~_b A^_a>`.
pub fn condition_on_intermediate(
    t: &Triple,
    b: &str,
    mode: ConditioningMode,
    tol: &Tolerances,
) -> Result<(InterdictiveState, ConditionalDistribution)> {
    let state = InterdictiveState::from_outcome(&t.b, b, tol)?;
    let denominator = match mode {
        ConditioningMode::Simplified => {
            require(t.a.is_retrodictively_complete(tol), "A (first detector)", "retrodictively")?;
            require(t.c.is_predictively_complete(tol), "C (last detector)", "predictively")?;
            state.norm()
        }
        ConditioningMode::FullRatio => {
            let d = t.a.dim();
            let before = t.a.nonselective(&Operator::identity(d))?;
            let after = t.c.nonselective_adjoint(&Operator::identity(d))?;
            real_inner(&after, &t.b.apply_outcome(b, &before)?)?
        }
    };
    let denominator = Ratio::checked(0.0, denominator, tol, "conditioning on the intermediate detector")?.denominator;
    let mut entries = Vec::new();
    for a in t.a.ids() {
        let retro_a = t.a.outcome(a)?.kraus().retrodictive_effect();
        let mid = t.b.apply_outcome(b, &retro_a)?;
        for c in t.c.ids() {
            let pred_c = t.c.outcome(c)?.kraus().predictive_effect();
            let num = real_inner(&pred_c, &mid)?;
            entries.push((vec![a.to_string(), c.to_string()], Ratio { numerator: num, denominator }));
        }
    }
    Ok((state, ConditionalDistribution { entries }))
}

/// Condition on both the first outcome `a` and the last outcome `c`:
/// `p_{b|a,c} = <rho^v_c, B_b rho^_a> / <rho^v_c, B rho^_a>`.
///
/// No completeness is assumed; the non-selective `B` always stays in the
/// denominator.
pub fn bidirectional_conditional(
    t: &Triple,
    a: &str,
    c: &str,
    tol: &Tolerances,
) -> Result<(BidirectionalState, ConditionalDistribution)> {
    let pre = PredictiveState::from_outcome(&t.a, a, tol)?;
    let post = RetrodictiveState::from_outcome(&t.c, c, tol)?;
    let den = real_inner(post.rho(), &t.b.nonselective(pre.rho())?)?;
    let denominator = Ratio::checked(0.0, den, tol, "pre- and post-selection")?.denominator;
    let entries = t
        .b
        .ids()
        .map(|b| {
            let num = real_inner(post.rho(), &t.b.apply_outcome(b, pre.rho())?)?;
            Ok((vec![b.to_string()], Ratio { numerator: num, denominator }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((BidirectionalState { pre, post }, ConditionalDistribution { entries }))
}

pub fn prepost_ratio(
    pre: &Operator,
    b: &Instrument,
    beta: &LabelFunction,
    post: &Operator,
    tol: &Tolerances,
) -> Result<Ratio> {
    let num = real_inner(post, &b.apply_labeled(beta, pre)?)?;
    let den = real_inner(post, &b.nonselective(pre)?)?;
    Ratio::checked(num, den, tol, "pre- and post-selected average")
}

/// Pre- and post-selected average of the labels `beta` of `b`:
/// `sum_b beta_b Tr(post N_b pre N_b^dag) / sum_b Tr(post N_b pre N_b^dag)`.
pub fn prepost_average(
    pre: &Operator,
    b: &Instrument,
    beta: &LabelFunction,
    post: &Operator,
    tol: &Tolerances,
) -> Result<f64> {
    prepost_ratio(pre, b, beta, post, tol).map(|r| r.value())
}

/// The same average written with the composite measurement operators
/// `Q_c N_b M_a` only: `sum_b beta_b |Q N M|^2 / sum_b |Q N M|^2`, summing
/// over the Kraus lists of the selected pre- and post-selection outcomes.
pub fn prepost_average_kraus(
    pre_kraus: &KrausSet,
    b: &Instrument,
    beta: &LabelFunction,
    post_kraus: &KrausSet,
    tol: &Tolerances,
) -> Result<f64> {
    beta.check_covers(b)?;
    if pre_kraus.dim() != b.dim() || post_kraus.dim() != b.dim() {
        return Err(Error::Dimension("pre/post Kraus sets must match the instrument".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for out in b.outcomes() {
        let mut w = 0.0;
        for n in out.kraus().operators() {
            for m in pre_kraus.operators() {
                let nm = n * m;
                for q in post_kraus.operators() {
                    w += (q * &nm).frobenius_norm().powi(2);
                }
            }
        }
        num += beta.get(out.id())? * w;
        den += w;
    }
    Ratio::checked(num, den, tol, "pre- and post-selected average").map(|r| r.value())
}

/// `L[N] O = -1/2 (N [N^dag, O] - [N, O] N^dag)`.
pub fn lindblad_apply(n: &Operator, o: &Operator) -> Result<Operator> {
    let nd = n.adjoint();
    let left = n.matmul(&Operator::commutator(&nd, o)?)?;
    let right = Operator::commutator(n, o)?.matmul(&nd)?;
    Ok((&left - &right).scale_real(-0.5))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakValue {
    /// `Re[Tr(post B pre) / Tr(post pre)]`.
    pub value: f64,
    /// The full complex ratio.
    pub complex: C64,
}

/// Generalized weak value `Re[Tr(post B pre) / Tr(post pre)]`.
pub fn weak_value(
    pre: &Operator,
    observable: &Operator,
    post: &Operator,
    tol: &Tolerances,
) -> Result<WeakValue> {
    let overlap = post.matmul(pre)?.trace();
    if overlap.norm() <= tol.norm {
        return Err(Error::ZeroOverlap {
            overlap: overlap.norm(),
        });
    }
    let complex = post.matmul(observable)?.matmul(pre)?.trace() / overlap;
    Ok(WeakValue {
        value: complex.re,
        complex,
    })
}

/// Symmetric weak detector for `observable` at strength `eps`: Kraus
/// operators `N_+- = sqrt((I +- eps B) / 2)` with labels `+-1/eps`.
///
/// Requires `I +- eps B` positive semidefinite.
pub fn weak_instrument(
    observable: &Operator,
    eps: f64,
    tol: &Tolerances,
) -> Result<(Instrument, LabelFunction)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Structure(format!("measurement strength must be positive, got {eps}")));
    }
    let id = Operator::identity(observable.dim());
    let mut outcomes = Vec::with_capacity(2);
    for (name, sign) in [("+", 1.0), ("-", -1.0)] {
        let arg = (&id + &observable.scale_real(sign * eps)).scale_real(0.5);
        outcomes.push(Outcome::new(name, KrausSet::single(arg.sqrt_psd(tol)?)));
    }
    let inst = Instrument::with_tolerances(observable.dim(), outcomes, tol)?;
    let labels = LabelFunction::from_pairs([("+", 1.0 / eps), ("-", -1.0 / eps)])?;
    Ok((inst, labels))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakSweepRow {
    pub eps: f64,
    pub prepost_average: f64,
    pub weak_value: f64,
    pub difference: f64,
}

/// Pre- and post-selected averages of the symmetric weak detector over a
/// list of strengths, next to the weak value they approach.
pub fn weak_sweep(
    pre: &Operator,
    observable: &Operator,
    post: &Operator,
    eps_values: &[f64],
    tol: &Tolerances,
) -> Result<Vec<WeakSweepRow>> {
    let wv = weak_value(pre, observable, post, tol)?.value;
    eps_values
        .iter()
        .map(|&eps| {
            let (inst, labels) = weak_instrument(observable, eps, tol)?;
            let avg = prepost_average(pre, &inst, &labels, post, tol)?;
            Ok(WeakSweepRow {
                eps,
                prepost_average: avg,
                weak_value: wv,
                difference: (avg - wv).abs(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln|difference|` against `ln eps`.
pub fn convergence_order(rows: &[WeakSweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.difference > 0.0 && r.eps > 0.0)
        .map(|r| (r.eps.ln(), r.difference.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Interdictive state inserted after `position` stages of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Insertion {
    pub position: usize,
    pub state: InterdictiveState,
}

/// Correlation with boundary bias and optional interdictive insertions:
///
/// ```text
/// <post, A_k[f_k] ... rho~ ... A_1[f_1] pre> / <post, A_k ... rho~ ... A_1 pre>
/// ```
pub fn biased_correlation(
    seq: &MeasurementSequence,
    labels: &[LabelFunction],
    pre: &Operator,
    post: &Operator,
    insertions: &[Insertion],
    tol: &Tolerances,
) -> Result<Ratio> {
    let num = real_inner(post, &seq.propagate(labels, pre, insertions)?)?;
    let den = real_inner(post, &seq.propagate(&seq.unit_labels(), pre, insertions)?)?;
    Ratio::checked(num, den, tol, "biased correlation")
}
