//! Quantum instruments as the primitive description of laboratory detectors.
//!
//! A detector is modeled as an [`Instrument`]: an ordered set of outcomes, each
//! carrying a finite list of Kraus operators. Joint probabilities and label
//! correlations for detector sequences are computed without any input state
//! (the maximally mixed input and the identity effect cancel in a ratio), and
//! the familiar state objects are recovered by conditioning:
//!
//! * conditioning on the first detector gives a predictive state,
//! * conditioning on the last detector gives a retrodictive state,
//! * conditioning on an intermediate detector gives an interdictive state (a
//!   normalized operation),
//! * conditioning on both ends gives a bidirectional state pair.
//!
//! The [`oracle`] module re-derives every probability from materialized
//! superoperators by exhaustive enumeration and is used by the test suite to
//! certify the Kraus-chaining engine.

// Threshold checks are written as `!(x > t)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod error;
pub mod instrument;
pub mod operator;
pub mod oracle;
pub mod photodetector;
pub mod random;
pub mod sequence;

pub use channels::{HamiltonianSpec, UnitaryChannel};
pub use error::{Error, Result};
pub use instrument::{Instrument, KrausSet, LabelFunction, Outcome, OutcomeSet};
pub use operator::{C64, DensityOperator, Operator, Tolerances};
pub use photodetector::PhotodetectorSpec;
pub use sequence::{
    BidirectionalState, ConditionalDistribution, ConditioningMode, InterdictiveState,
    MeasurementSequence, PredictiveState, Ratio, RetrodictiveState, Stage, Triple,
};
