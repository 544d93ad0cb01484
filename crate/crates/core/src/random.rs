//! Seeded random fixtures: operators, states, unitaries and instruments.
//!
//! Used by the property and acceptance suites; all generators take an explicit
//! RNG so runs are reproducible.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::instrument::{Instrument, KrausSet, Outcome};
use crate::operator::{C64, DensityOperator, Operator, Tolerances};

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    let m = DMatrix::from_fn(dim, dim, |_, _| gaussian_c64(rng));
    Operator::from_matrix(m).expect("square by construction")
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    let g = ginibre(rng, dim);
    (&g + &g.adjoint()).scale_real(0.5)
}

pub fn ket<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| gaussian_c64(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    DensityOperator::pure(&ket(rng, dim)).expect("nonzero ket")
}

/// Full-rank mixed state `G G^dagger / Tr(G G^dagger)`.
pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    let g = ginibre(rng, dim);
    let p = &g * &g.adjoint();
    DensityOperator::normalized(&p, &Tolerances::default()).expect("Gram matrix is a state")
}

/// Haar-random unitary from the phase-corrected QR factorization.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    let g = ginibre(rng, dim).into_matrix();
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        } else {
            C64::default()
        }
    });
    Operator::from_matrix(q * phases).expect("square by construction")
}

/// Random predictively complete instrument scaled by `sqrt(efficiency)`.
///
/// Kraus operators are `G_{x,y} S^{-1/2}` with `S = sum G^dagger G`, so the
/// unscaled instrument satisfies `sum M^dagger M = I`.
pub fn instrument<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    outcomes: usize,
    kraus_per_outcome: usize,
    efficiency: f64,
) -> Instrument {
    let tol = Tolerances::default();
    let raw: Vec<Vec<Operator>> = (0..outcomes)
        .map(|_| (0..kraus_per_outcome).map(|_| ginibre(rng, dim)).collect())
        .collect();
    let mut s = Operator::zeros(dim);
    for g in raw.iter().flatten() {
        s = &s + &(&g.adjoint() * g);
    }
    let s_inv_sqrt = s
        .map_hermitian(&tol, |x| C64::new(1.0 / x.sqrt(), 0.0))
        .expect("Gram sum is Hermitian");
    let scale = efficiency.sqrt();
    let outs = raw
        .into_iter()
        .enumerate()
        .map(|(x, ks)| {
            let kraus = ks
                .iter()
                .map(|g| (g * &s_inv_sqrt).scale_real(scale))
                .collect();
            Outcome::new(x.to_string(), KrausSet::new(kraus).expect("nonempty"))
        })
        .collect();
    Instrument::new(dim, outs).expect("random instrument is normalized")
}

/// Random mixture of unitaries, which is both predictively and
/// retrodictively complete.
pub fn unital_instrument<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    outcomes: usize,
    kraus_per_outcome: usize,
) -> Instrument {
    let n = outcomes * kraus_per_outcome;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let outs = (0..outcomes)
        .map(|x| {
            let kraus = (0..kraus_per_outcome)
                .map(|y| {
                    let w = weights[x * kraus_per_outcome + y] / total;
                    unitary(rng, dim).scale_real(w.sqrt())
                })
                .collect();
            Outcome::new(x.to_string(), KrausSet::new(kraus).expect("nonempty"))
        })
        .collect();
    Instrument::new(dim, outs).expect("unitary mixture is normalized")
}

/// Projective instrument in a Haar-random orthonormal basis.
pub fn projective<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Instrument {
    let u = unitary(rng, dim);
    let basis: Vec<Vec<C64>> = (0..dim)
        .map(|j| (0..dim).map(|i| u.get(i, j)).collect())
        .collect();
    Instrument::projective(&basis, &Tolerances::default()).expect("orthonormal basis")
}
