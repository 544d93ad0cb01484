//! Brute-force reference implementations used to certify the symbolic engine.
//!
//! Superoperators act on column-vectorized operators: `vec(O)` stacks the
//! columns of `O`, so `vec(A O B) = (B^T kron A) vec(O)` and a Kraus term
//! `M O M^dagger` materializes as `conj(M) kron M`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instrument::{Instrument, LabelFunction};
use crate::operator::{C64, Operator, Tolerances};
use crate::sequence::{MeasurementSequence, Stage};

/// Default cap on the number of enumerated outcome tuples.
pub const DEFAULT_BUDGET: u128 = 10_000;
/// Largest Hilbert dimension accepted for materialization.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: DMatrix<C64>,
}

/// Column-stacking vectorization.
pub fn vectorize(o: &Operator) -> DVector<C64> {
    DVector::from_column_slice(o.matrix().as_slice())
}

pub fn unvectorize(v: &DVector<C64>, dim: usize) -> Result<Operator> {
    if v.len() != dim * dim {
        return Err(Error::dim(dim * dim, v.len(), "vectorized operator"));
    }
    Operator::from_matrix(DMatrix::from_column_slice(dim, dim, v.as_slice()))
}

fn kraus_term(m: &Operator) -> DMatrix<C64> {
    m.matrix().map(|z| z.conj()).kronecker(m.matrix())
}

impl Superoperator {
    /// `sum_x f(x) sum_y conj(M_{x,y}) kron M_{x,y}`.
    pub fn materialize(inst: &Instrument, f: &LabelFunction) -> Result<Self> {
        f.check_covers(inst)?;
        let d = inst.dim();
        if d > MAX_DIM {
            return Err(Error::Dimension(format!(
                "oracle materialization limited to dim <= {MAX_DIM}, got {d}"
            )));
        }
        let mut matrix = DMatrix::zeros(d * d, d * d);
        for out in inst.outcomes() {
            let w = f.get(out.id())?;
            if w == 0.0 {
                continue;
            }
            for m in out.kraus().operators() {
                matrix += kraus_term(m) * C64::new(w, 0.0);
            }
        }
        Ok(Superoperator { dim: d, matrix })
    }

    /// Superoperator of a single outcome.
    pub fn of_outcome(inst: &Instrument, id: &str) -> Result<Self> {
        let out = inst.outcome(id)?;
        let d = inst.dim();
        let mut matrix = DMatrix::zeros(d * d, d * d);
        for m in out.kraus().operators() {
            matrix += kraus_term(m);
        }
        Ok(Superoperator { dim: d, matrix })
    }

    /// `U O U^dagger`.
    pub fn unitary(u: &Operator) -> Self {
        Superoperator {
            dim: u.dim(),
            matrix: kraus_term(u),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            matrix: DMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, o: &Operator) -> Result<Operator> {
        if o.dim() != self.dim {
            return Err(Error::dim(self.dim, o.dim(), "superoperator input"));
        }
        unvectorize(&(&self.matrix * vectorize(o)), self.dim)
    }

    /// Adjoint with respect to the Hilbert-Schmidt pairing, which under
    /// vectorization is the conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Superoperator {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `next` after `self`.
    pub fn then(&self, next: &Superoperator) -> Result<Self> {
        if next.dim != self.dim {
            return Err(Error::dim(self.dim, next.dim, "superoperator composition"));
        }
        Ok(Superoperator {
            dim: self.dim,
            matrix: &next.matrix * &self.matrix,
        })
    }

    pub fn max_abs_diff(&self, other: &Superoperator) -> Result<f64> {
        if other.dim != self.dim {
            return Err(Error::dim(self.dim, other.dim, "superoperator comparison"));
        }
        Ok((&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// Exhaustively enumerated joint distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    pub normalization: f64,
    pub rows: Vec<(Vec<String>, f64)>,
}

impl JointTable {
    pub fn get(&self, key: &[&str]) -> Option<f64> {
        self.rows
            .iter()
            .find(|(k, _)| k.iter().map(String::as_str).eq(key.iter().copied()))
            .map(|(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|(_, p)| p).sum()
    }
}

/// Joint probabilities of every outcome tuple, computed by materializing each
/// stage and multiplying superoperator matrices tuple by tuple.
pub fn enumerate_joint(seq: &MeasurementSequence, budget: u128, tol: &Tolerances) -> Result<JointTable> {
    let tuples: u128 = seq.instruments().map(|i| i.len() as u128).product();
    if tuples > budget {
        return Err(Error::Explosion { tuples, budget });
    }
    let d = seq.dim();
    if d > MAX_DIM {
        return Err(Error::Dimension(format!(
            "oracle enumeration limited to dim <= {MAX_DIM}, got {d}"
        )));
    }
    enum Step {
        Fixed(Superoperator),
        Choice(Vec<Superoperator>),
    }
    let steps = seq
        .stages()
        .iter()
        .map(|s| match s {
            Stage::Channel(ch) => Ok(Step::Fixed(Superoperator::unitary(ch.unitary()))),
            Stage::Instrument(inst) => inst
                .ids()
                .map(|id| Superoperator::of_outcome(inst, id))
                .collect::<Result<Vec<_>>>()
                .map(Step::Choice),
        })
        .collect::<Result<Vec<_>>>()?;
    let vec_i = vectorize(&Operator::identity(d));
    let weight = |choice: &[usize]| {
        let mut v = vec_i.clone();
        let mut c = choice.iter();
        for s in &steps {
            v = match s {
                Step::Fixed(m) => &m.matrix * v,
                Step::Choice(ms) => &ms[*c.next().expect("one index per instrument")].matrix * v,
            };
        }
        // <1, O> = vec(1)^dagger vec(O)
        vec_i.dotc(&v).re
    };
    let mut raw = Vec::new();
    for tuple in seq.outcome_tuples() {
        let idx: Vec<usize> = seq
            .instruments()
            .zip(&tuple)
            .map(|(inst, id)| inst.position(id).expect("enumerated id"))
            .collect();
        raw.push((tuple, weight(&idx)));
    }
    let normalization: f64 = raw.iter().map(|(_, w)| w).sum();
    if !(normalization > tol.norm) {
        return Err(Error::ZeroNormalization {
            context: "oracle enumeration".into(),
            denominator: normalization,
            threshold: tol.norm,
        });
    }
    let rows = raw.into_iter().map(|(t, w)| (t, w / normalization)).collect();
    Ok(JointTable { normalization, rows })
}

/// Equality up to Kraus non-uniqueness: every outcome's materialized
/// superoperator must agree within `tol.eq`.
pub fn instruments_equal(a: &Instrument, b: &Instrument, tol: &Tolerances) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::dim(a.dim(), b.dim(), "instrument comparison"));
    }
    let ids_a: Vec<&str> = a.ids().collect();
    let ids_b: Vec<&str> = b.ids().collect();
    let (mut sa, mut sb) = (ids_a.clone(), ids_b.clone());
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return Err(Error::OutcomeMismatch(format!(
            "outcome ids differ: {ids_a:?} vs {ids_b:?}"
        )));
    }
    for id in ids_a {
        let dev = Superoperator::of_outcome(a, id)?.max_abs_diff(&Superoperator::of_outcome(b, id)?)?;
        if dev > tol.eq {
            return Ok(false);
        }
    }
    Ok(true)
}
