//! Absorbing photodetector with saturation, on a truncated Fock space.
//!
//! The detector counts `n` photons for `n < N` and reports the saturated
//! outcome `N` for anything at or above `N`. Every outcome leaves the field in
//! the vacuum. The truncation `D > N` stands in for the infinite Fock space;
//! quantities that grow with `D` (the retrodictive POM and the normalization)
//! are what an infinite-dimensional treatment would regularize.

use crate::error::{Error, Result};
use crate::instrument::{Instrument, KrausSet, LabelFunction, Outcome};
use crate::operator::{DensityOperator, Operator, Tolerances};
use crate::sequence::{InterdictiveState, PredictiveState, RetrodictiveState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotodetectorSpec {
    saturation: usize,
    cutoff: usize,
    omega: f64,
    hbar: f64,
}

/// States induced by a single photodetector outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedStates {
    pub predictive: DensityOperator,
    pub retrodictive: DensityOperator,
    pub interdictive: InterdictiveState,
}

impl PhotodetectorSpec {
    /// Saturation `N >= 1`, Fock cutoff `D > N`, mode frequency and `hbar`.
    pub fn new(saturation: usize, cutoff: usize, omega: f64, hbar: f64) -> Result<Self> {
        if saturation < 1 || cutoff <= saturation {
            return Err(Error::Structure(format!(
                "photodetector needs D > N >= 1, got N = {saturation}, D = {cutoff}"
            )));
        }
        for (name, v) in [("omega", omega), ("hbar", hbar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Structure(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PhotodetectorSpec {
            saturation,
            cutoff,
            omega,
            hbar,
        })
    }

    pub fn saturation(&self) -> usize {
        self.saturation
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Outcomes `"0"`..`"N"`; outcome `n < N` has the single Kraus operator
    /// `|0><n|`, outcome `N` has `{|0><k| : N <= k < D}`.
    pub fn build(&self) -> Instrument {
        let d = self.cutoff;
        let n = self.saturation;
        let mut outcomes: Vec<Outcome> = (0..n)
            .map(|k| Outcome::new(k.to_string(), KrausSet::single(Operator::ket_bra(d, 0, k))))
            .collect();
        let saturated = KrausSet::new((n..d).map(|k| Operator::ket_bra(d, 0, k)).collect())
            .expect("D > N gives at least one operator");
        outcomes.push(Outcome::new(n.to_string(), saturated));
        Instrument::new(d, outcomes).expect("photodetector is normalized")
    }

    /// Energy labels `E_n = n hbar omega` for every outcome, the saturated
    /// outcome included (it reports `N hbar omega`, the saturation bias).
    pub fn energy_labels(&self) -> LabelFunction {
        LabelFunction::from_pairs(
            (0..=self.saturation).map(|n| (n.to_string(), n as f64 * self.hbar * self.omega)),
        )
        .expect("distinct ids")
    }

    /// Mean energy of a state given that the detector did not saturate:
    /// `sum_{n<N} E_n p_n / q` with `p_n = <n|rho|n>` and `q = sum_{n<N} p_n`.
    pub fn conditional_energy(&self, rho: &DensityOperator, tol: &Tolerances) -> Result<f64> {
        if rho.dim() != self.cutoff {
            return Err(Error::dim(self.cutoff, rho.dim(), "photodetector input state"));
        }
        let (num, q) = (0..self.saturation).fold((0.0, 0.0), |(num, q), n| {
            let p = rho.get(n, n).re;
            (num + n as f64 * self.hbar * self.omega * p, q + p)
        });
        if !(q > tol.norm) {
            return Err(Error::ZeroNormalization {
                context: "non-saturated photodetector outcomes".into(),
                denominator: q,
                threshold: tol.norm,
            });
        }
        Ok(num / q)
    }

    /// Predictive, retrodictive and interdictive states of outcome `n`.
    pub fn derived_states(&self, n: usize, tol: &Tolerances) -> Result<DerivedStates> {
        if n > self.saturation {
            return Err(Error::Label(format!(
                "photodetector outcome {n} exceeds saturation {}",
                self.saturation
            )));
        }
        let inst = self.build();
        let id = n.to_string();
        let states = DerivedStates {
            predictive: PredictiveState::from_outcome(&inst, &id, tol)?.rho().clone(),
            retrodictive: RetrodictiveState::from_outcome(&inst, &id, tol)?.rho().clone(),
            interdictive: InterdictiveState::from_outcome(&inst, &id, tol)?,
        };
        // the interdictive state must induce the other two
        let pairs = [
            (states.interdictive.predictive_state(tol)?, &states.predictive),
            (states.interdictive.retrodictive_state(tol)?, &states.retrodictive),
        ];
        for (induced, direct) in pairs {
            let dev = induced.max_abs_diff(direct)?;
            if dev > tol.eq {
                return Err(Error::Structure(format!(
                    "interdictive state of outcome {n} is inconsistent (deviation {dev:e})"
                )));
            }
        }
        Ok(states)
    }
}
