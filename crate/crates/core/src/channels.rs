//! Unitary connecting elements between detectors.
//!
//! A unitary channel is a single-outcome instrument with one unitary Kraus
//! operator. Its forward action `U rho U^dagger` is the Schrodinger picture and
//! its adjoint `U^dagger O U` is the Heisenberg picture.

use crate::error::{Error, Result};
use crate::instrument::{Instrument, KrausSet, Outcome};
use crate::operator::{C64, Operator, Tolerances};

/// Outcome id given to the single outcome of a channel viewed as an instrument.
pub const CHANNEL_OUTCOME: &str = "1";

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryChannel {
    u: Operator,
}

/// Hermitian generator `h` together with the action unit `hbar`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    h: Operator,
    hbar: f64,
}

impl HamiltonianSpec {
    pub fn new(h: Operator, hbar: f64, tol: &Tolerances) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Structure(format!("hbar must be positive, got {hbar}")));
        }
        if !h.is_hermitian(tol) {
            return Err(Error::Structure(format!(
                "Hamiltonian is not Hermitian (deviation {:e})",
                h.hermitian_deviation()
            )));
        }
        Ok(HamiltonianSpec { h, hbar })
    }

    pub fn h(&self) -> &Operator {
        &self.h
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `U_t = exp(-i t H / hbar)`, assembled from the eigendecomposition of `H`.
    pub fn propagator(&self, t: f64, tol: &Tolerances) -> Result<UnitaryChannel> {
        let scale = t / self.hbar;
        let u = self
            .h
            .map_hermitian(tol, |e| C64::from_polar(1.0, -scale * e))?;
        UnitaryChannel::new(u, tol)
    }
}

/// Convenience wrapper for [`HamiltonianSpec::propagator`].
pub fn propagator(spec: &HamiltonianSpec, t: f64, tol: &Tolerances) -> Result<UnitaryChannel> {
    spec.propagator(t, tol)
}

impl UnitaryChannel {
    /// Validates `U^dagger U == I` element-wise within `tol.eq`.
    pub fn new(u: Operator, tol: &Tolerances) -> Result<Self> {
        let dev = (&u.adjoint() * &u).max_abs_diff(&Operator::identity(u.dim()))?;
        if dev > tol.eq {
            return Err(Error::Structure(format!(
                "channel operator is not unitary (|U^dag U - I| = {dev:e})"
            )));
        }
        Ok(UnitaryChannel { u })
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryChannel {
            u: Operator::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn unitary(&self) -> &Operator {
        &self.u
    }

    fn check_dim(&self, o: &Operator) -> Result<()> {
        if o.dim() != self.dim() {
            return Err(Error::dim(self.dim(), o.dim(), "channel input"));
        }
        Ok(())
    }

    /// `U rho U^dagger`.
    pub fn apply_schrodinger(&self, rho: &Operator) -> Result<Operator> {
        self.check_dim(rho)?;
        Ok(self.u.sandwich(rho))
    }

    /// `U^dagger O U`.
    pub fn apply_heisenberg(&self, o: &Operator) -> Result<Operator> {
        self.check_dim(o)?;
        Ok(self.u.sandwich_adjoint(o))
    }

    /// Sequential composition: `self` first, then `next`.
    pub fn then(&self, next: &UnitaryChannel) -> Result<UnitaryChannel> {
        Ok(UnitaryChannel {
            u: next.u.matmul(&self.u)?,
        })
    }

    /// The channel as a single-outcome instrument with outcome id
    /// [`CHANNEL_OUTCOME`].
    pub fn to_instrument(&self) -> Instrument {
        let kraus = KrausSet::new(vec![self.u.clone()]).expect("one operator");
        Instrument::new_unchecked(self.dim(), vec![Outcome::new(CHANNEL_OUTCOME, kraus)])
            .expect("single outcome")
    }
}
