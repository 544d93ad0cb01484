//! Quantum instruments: finite outcome-indexed families of Kraus sets.
//!
//! For labels `f` the instrument acts as
//!
//! ```text
//! A[f] O  = sum_x f(x) sum_y M_{x,y} O M_{x,y}^dagger        (forward)
//! A*[f] O = sum_x f(x) sum_y M_{x,y}^dagger O M_{x,y}        (adjoint)
//! ```
//!
//! The predictive POM is `A*[f] I` (built from `M^dagger M`), the retrodictive
//! POM is `A[f] I` (built from `M M^dagger`). Completeness in either direction
//! is a predicate, never a construction requirement: lossy detectors are
//! ordinary instruments.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::channels::UnitaryChannel;
use crate::error::{Error, Result};
use crate::operator::{C64, DensityOperator, Operator, Tolerances};

/// Nonempty list of same-dimension Kraus operators for one outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet(Vec<Operator>);

impl KrausSet {
    pub fn new(kraus: Vec<Operator>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Structure("Kraus set must be nonempty".into()))?;
        let d = first.dim();
        if let Some(bad) = kraus.iter().find(|k| k.dim() != d) {
            return Err(Error::dim(d, bad.dim(), "Kraus set member"));
        }
        Ok(KrausSet(kraus))
    }

    pub fn single(m: Operator) -> Self {
        KrausSet(vec![m])
    }

    pub fn dim(&self) -> usize {
        self.0[0].dim()
    }

    pub fn operators(&self) -> &[Operator] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_y M_y O M_y^dagger`.
    pub fn apply(&self, o: &Operator) -> Operator {
        let mut acc = Operator::zeros(o.dim());
        for m in &self.0 {
            acc.add_assign_scaled(&m.sandwich(o), 1.0);
        }
        acc
    }

    /// `sum_y M_y^dagger O M_y`.
    pub fn apply_adjoint(&self, o: &Operator) -> Operator {
        let mut acc = Operator::zeros(o.dim());
        for m in &self.0 {
            acc.add_assign_scaled(&m.sandwich_adjoint(o), 1.0);
        }
        acc
    }

    /// `sum_y M_y^dagger M_y`.
    pub fn predictive_effect(&self) -> Operator {
        self.apply_adjoint(&Operator::identity(self.dim()))
    }

    /// `sum_y M_y M_y^dagger`.
    pub fn retrodictive_effect(&self) -> Operator {
        self.apply(&Operator::identity(self.dim()))
    }

    /// `sum_y Tr(M_y^dagger M_y)`.
    pub fn weight(&self) -> f64 {
        self.0.iter().map(|m| m.frobenius_norm().powi(2)).sum()
    }

    fn map(&self, f: impl Fn(&Operator) -> Operator) -> KrausSet {
        KrausSet(self.0.iter().map(f).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    id: String,
    kraus: KrausSet,
}

impl Outcome {
    pub fn new(id: impl Into<String>, kraus: KrausSet) -> Self {
        Outcome {
            id: id.into(),
            kraus,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kraus(&self) -> &KrausSet {
        &self.kraus
    }
}

/// Real labels attached to outcome ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelFunction {
    labels: BTreeMap<String, f64>,
}

impl LabelFunction {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut labels = BTreeMap::new();
        for (id, v) in pairs {
            let id = id.into();
            if !v.is_finite() {
                return Err(Error::Label(format!("label for outcome {id:?} is not finite")));
            }
            if labels.insert(id.clone(), v).is_some() {
                return Err(Error::Label(format!("duplicate label for outcome {id:?}")));
            }
        }
        Ok(LabelFunction { labels })
    }

    /// The same value on every outcome of `inst`.
    pub fn constant(inst: &Instrument, value: f64) -> Self {
        LabelFunction {
            labels: inst.ids().map(|id| (id.to_string(), value)).collect(),
        }
    }

    pub fn ones(inst: &Instrument) -> Self {
        LabelFunction::constant(inst, 1.0)
    }

    /// Indicator function of `set` over the outcomes of `inst`.
    pub fn indicator(inst: &Instrument, set: &OutcomeSet) -> Result<Self> {
        set.validate(inst)?;
        Ok(LabelFunction {
            labels: inst
                .ids()
                .map(|id| (id.to_string(), if set.contains(id) { 1.0 } else { 0.0 }))
                .collect(),
        })
    }

    pub fn get(&self, id: &str) -> Result<f64> {
        self.labels
            .get(id)
            .copied()
            .ok_or_else(|| Error::Label(format!("no label for outcome {id:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Pointwise combination over a shared domain.
    pub fn zip_with(&self, other: &LabelFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (id, &a) in &self.labels {
            labels.insert(id.clone(), f(a, other.get(id)?));
        }
        if other.labels.len() != labels.len() {
            return Err(Error::Label("label functions have different domains".into()));
        }
        Ok(LabelFunction { labels })
    }

    /// Checks that the labels cover exactly the outcomes of `inst`.
    pub fn check_covers(&self, inst: &Instrument) -> Result<()> {
        for id in inst.ids() {
            self.get(id)?;
        }
        if let Some(extra) = self.labels.keys().find(|k| inst.position(k).is_none()) {
            return Err(Error::Label(format!("label for unknown outcome {extra:?}")));
        }
        Ok(())
    }
}

/// A set of outcome ids, used for coarse-graining.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutcomeSet(BTreeSet<String>);

impl OutcomeSet {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        OutcomeSet(ids.into_iter().map(Into::into).collect())
    }

    pub fn single(id: impl Into<String>) -> Self {
        OutcomeSet::new([id])
    }

    /// Every outcome of `inst`.
    pub fn all(inst: &Instrument) -> Self {
        OutcomeSet::new(inst.ids())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.contains(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn validate(&self, inst: &Instrument) -> Result<()> {
        match self.0.iter().find(|id| inst.position(id).is_none()) {
            Some(id) => Err(Error::Label(format!("unknown outcome {id:?}"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl Instrument {
    /// Validated instrument: unique ids, one dimension, and
    /// `sum M^dagger M <= I` at default tolerances.
    pub fn new(dim: usize, outcomes: Vec<Outcome>) -> Result<Self> {
        Instrument::with_tolerances(dim, outcomes, &Tolerances::default())
    }

    pub fn with_tolerances(dim: usize, outcomes: Vec<Outcome>, tol: &Tolerances) -> Result<Self> {
        let inst = Instrument::new_unchecked(dim, outcomes)?;
        inst.check_normalization(tol)?;
        Ok(inst)
    }

    /// Checks structure only and skips the normalization condition.
    ///
    /// Used for Kraus-adjointed instruments and for externally supplied
    /// instruments that are verified separately.
    pub fn new_unchecked(dim: usize, outcomes: Vec<Outcome>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("instrument dimension must be >= 1".into()));
        }
        if outcomes.is_empty() {
            return Err(Error::Structure("instrument needs at least one outcome".into()));
        }
        let mut seen = HashSet::new();
        for o in &outcomes {
            if !seen.insert(o.id.as_str()) {
                return Err(Error::Structure(format!("duplicate outcome id {:?}", o.id)));
            }
            if o.kraus.dim() != dim {
                return Err(Error::dim(dim, o.kraus.dim(), &format!("outcome {:?}", o.id)));
            }
        }
        Ok(Instrument { dim, outcomes })
    }

    /// Smallest eigenvalue of `I - sum M^dagger M`; negative means the
    /// instrument creates probability.
    pub fn normalization_margin(&self, tol: &Tolerances) -> Result<f64> {
        let slack = &Operator::identity(self.dim) - &self.predictive_effect_total();
        let ev = slack.eigenvalues(tol)?;
        Ok(ev[0])
    }

    pub fn check_normalization(&self, tol: &Tolerances) -> Result<()> {
        let margin = self.normalization_margin(tol)?;
        if margin < -tol.pos {
            return Err(Error::Structure(format!(
                "normalization violated: sum M^dag M exceeds identity (min eigenvalue of I - sum = {margin:e})"
            )));
        }
        Ok(())
    }

    /// One rank-1 projector per basis vector, outcome ids `"0"`, `"1"`, ...
    pub fn projective(basis: &[Vec<C64>], tol: &Tolerances) -> Result<Self> {
        let dim = basis
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Structure("empty basis".into()))?;
        if basis.len() > dim {
            return Err(Error::Structure(format!(
                "{} basis vectors in dimension {dim}",
                basis.len()
            )));
        }
        for (i, u) in basis.iter().enumerate() {
            if u.len() != dim {
                return Err(Error::dim(dim, u.len(), &format!("basis vector {i}")));
            }
            for (j, v) in basis.iter().enumerate() {
                let ip: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (ip - C64::new(want, 0.0)).norm() > tol.eq {
                    return Err(Error::Structure(format!(
                        "basis not orthonormal: <{i}|{j}> = {ip}"
                    )));
                }
            }
        }
        let outcomes = basis
            .iter()
            .enumerate()
            .map(|(i, v)| Ok(Outcome::new(i.to_string(), KrausSet::single(Operator::outer(v, v)?))))
            .collect::<Result<Vec<_>>>()?;
        Instrument::with_tolerances(dim, outcomes, tol)
    }

    /// Projective instrument in the computational basis.
    pub fn computational(dim: usize) -> Self {
        let outcomes = (0..dim)
            .map(|i| Outcome::new(i.to_string(), KrausSet::single(Operator::ket_bra(dim, i, i))))
            .collect();
        Instrument { dim, outcomes }
    }

    /// Multiplies every Kraus operator by `sqrt(efficiency)`.
    pub fn lossy_scale(&self, efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Structure(format!(
                "efficiency must lie in (0, 1], got {efficiency}"
            )));
        }
        let s = efficiency.sqrt();
        Ok(self.map_kraus(|m| m.scale_real(s)))
    }

    fn map_kraus(&self, f: impl Fn(&Operator) -> Operator) -> Instrument {
        Instrument {
            dim: self.dim,
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome::new(o.id.clone(), o.kraus.map(&f)))
                .collect(),
        }
    }

    /// Same outcomes with every Kraus operator replaced by its adjoint.
    /// Swaps the roles of the predictive and retrodictive POMs.
    pub fn kraus_adjoint(&self) -> Instrument {
        self.map_kraus(Operator::adjoint)
    }

    /// Folds a channel that acts before this instrument: `M -> M U`.
    pub fn preceded_by(&self, ch: &UnitaryChannel) -> Result<Instrument> {
        self.check_dim(ch.dim(), "channel")?;
        Ok(self.map_kraus(|m| m * ch.unitary()))
    }

    /// Folds a channel that acts after this instrument: `M -> U M`.
    pub fn followed_by(&self, ch: &UnitaryChannel) -> Result<Instrument> {
        self.check_dim(ch.dim(), "channel")?;
        Ok(self.map_kraus(|m| ch.unitary() * m))
    }

    /// Sequential composite: `self` first, then `next`. Outcome ids are
    /// `"x,y"` and the Kraus operators are all products `N_y M_x`.
    pub fn compose(&self, next: &Instrument) -> Result<Instrument> {
        self.check_dim(next.dim, "composed instrument")?;
        let mut outcomes = Vec::with_capacity(self.outcomes.len() * next.outcomes.len());
        for a in &self.outcomes {
            for b in &next.outcomes {
                let mut kraus = Vec::with_capacity(a.kraus.len() * b.kraus.len());
                for n in b.kraus.operators() {
                    for m in a.kraus.operators() {
                        kraus.push(n * m);
                    }
                }
                outcomes.push(Outcome::new(format!("{},{}", a.id, b.id), KrausSet(kraus)));
            }
        }
        Instrument::new_unchecked(self.dim, outcomes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|o| o.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o.id == id)
    }

    pub fn outcome(&self, id: &str) -> Result<&Outcome> {
        self.position(id)
            .map(|i| &self.outcomes[i])
            .ok_or_else(|| Error::Label(format!("unknown outcome {id:?}")))
    }

    fn check_dim(&self, got: usize, what: &str) -> Result<()> {
        if got != self.dim {
            return Err(Error::dim(self.dim, got, what));
        }
        Ok(())
    }

    fn weighted_sum(
        &self,
        f: &LabelFunction,
        o: &Operator,
        per_outcome: impl Fn(&KrausSet, &Operator) -> Operator,
    ) -> Result<Operator> {
        self.check_dim(o.dim(), "instrument input")?;
        f.check_covers(self)?;
        let mut acc = Operator::zeros(self.dim);
        for out in &self.outcomes {
            let w = f.get(&out.id)?;
            if w != 0.0 {
                acc.add_assign_scaled(&per_outcome(&out.kraus, o), w);
            }
        }
        Ok(acc)
    }

    /// `sum_x f(x) sum_y M O M^dagger`.
    pub fn apply_labeled(&self, f: &LabelFunction, o: &Operator) -> Result<Operator> {
        self.weighted_sum(f, o, KrausSet::apply)
    }

    /// `sum_x f(x) sum_y M^dagger O M`.
    pub fn apply_adjoint_labeled(&self, f: &LabelFunction, o: &Operator) -> Result<Operator> {
        self.weighted_sum(f, o, KrausSet::apply_adjoint)
    }

    /// The operation for a single outcome.
    pub fn apply_outcome(&self, id: &str, o: &Operator) -> Result<Operator> {
        self.check_dim(o.dim(), "instrument input")?;
        Ok(self.outcome(id)?.kraus.apply(o))
    }

    pub fn apply_outcome_adjoint(&self, id: &str, o: &Operator) -> Result<Operator> {
        self.check_dim(o.dim(), "instrument input")?;
        Ok(self.outcome(id)?.kraus.apply_adjoint(o))
    }

    /// Non-selective measurement: every label equal to one.
    pub fn nonselective(&self, o: &Operator) -> Result<Operator> {
        self.apply_labeled(&LabelFunction::ones(self), o)
    }

    pub fn nonselective_adjoint(&self, o: &Operator) -> Result<Operator> {
        self.apply_adjoint_labeled(&LabelFunction::ones(self), o)
    }

    /// `p_S = <1, A_S rho> = Tr(A^v_S rho)`.
    pub fn outcome_probability(&self, set: &OutcomeSet, rho: &DensityOperator) -> Result<f64> {
        let chi = LabelFunction::indicator(self, set)?;
        let out = self.apply_labeled(&chi, rho)?;
        Ok(out.trace().re)
    }

    /// Predictive POM `A*[f] I = sum_x f(x) sum_y M^dagger M`.
    pub fn predictive_pom(&self, f: &LabelFunction) -> Result<Operator> {
        self.apply_adjoint_labeled(f, &Operator::identity(self.dim))
    }

    /// Retrodictive POM `A[f] I = sum_x f(x) sum_y M M^dagger`.
    pub fn retrodictive_pom(&self, f: &LabelFunction) -> Result<Operator> {
        self.apply_labeled(f, &Operator::identity(self.dim))
    }

    fn predictive_effect_total(&self) -> Operator {
        let mut acc = Operator::zeros(self.dim);
        for o in &self.outcomes {
            acc.add_assign_scaled(&o.kraus.predictive_effect(), 1.0);
        }
        acc
    }

    fn retrodictive_effect_total(&self) -> Operator {
        let mut acc = Operator::zeros(self.dim);
        for o in &self.outcomes {
            acc.add_assign_scaled(&o.kraus.retrodictive_effect(), 1.0);
        }
        acc
    }

    /// `sum M^dagger M == I` within `tol.eq`.
    pub fn is_predictively_complete(&self, tol: &Tolerances) -> bool {
        self.predictive_effect_total()
            .approx_eq(&Operator::identity(self.dim), tol.eq)
    }

    /// `sum M M^dagger == I` within `tol.eq`.
    pub fn is_retrodictively_complete(&self, tol: &Tolerances) -> bool {
        self.retrodictive_effect_total()
            .approx_eq(&Operator::identity(self.dim), tol.eq)
    }
}

/// Joint predictive PO for `first` followed by a detector whose PO is
/// `last_po`: `A*[f] B^v`. Only the full adjoint instrument of the first
/// detector can build it; the two marginal POs do not suffice in general.
pub fn joint_predictive_po(
    first: &Instrument,
    f: &LabelFunction,
    last_po: &Operator,
) -> Result<Operator> {
    first.apply_adjoint_labeled(f, last_po)
}
