//! Dense complex operators on a finite Hilbert space.
//!
//! Everything in this crate (density operators, effects, Kraus operators,
//! observables) is an [`Operator`]: a square `dim x dim` complex matrix. The
//! pairing between operators is the Hilbert-Schmidt inner product
//! `<B, A> = Tr(B^dagger A)`, see [`hs_inner`].

use std::fmt;
use std::ops::{Add, Deref, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Absolute tolerances used by the structural predicates.
///
/// `herm` bounds `|A_ij - conj(A_ji)|`, `pos` bounds how negative an
/// eigenvalue may be, `norm` bounds trace deviations and ratio denominators,
/// and `eq` bounds element-wise equality of operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub herm: f64,
    pub pos: f64,
    pub norm: f64,
    pub eq: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-9,
            pos: 1e-9,
            norm: 1e-9,
            eq: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn new(herm: f64, pos: f64, norm: f64, eq: f64) -> Result<Self> {
        for (name, v) in [("herm", herm), ("pos", pos), ("norm", norm), ("eq", eq)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Structure(format!(
                    "tolerance {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Tolerances {
            herm,
            pos,
            norm,
            eq,
        })
    }

    pub fn with_eq(self, eq: f64) -> Result<Self> {
        Tolerances::new(self.herm, self.pos, self.norm, eq)
    }
}

/// Square complex matrix of dimension `dim >= 1`.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator(dim={}) [", self.dim())?;
        for i in 0..self.dim() {
            write!(f, "\n  ")?;
            for j in 0..self.dim() {
                let z = self.m[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
        }
        write!(f, "\n]")
    }
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Dimension("operator dimension must be >= 1".into()));
        }
        Ok(Operator { m })
    }

    /// Builds an operator from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        Operator::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Builds an operator from real row-major rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Operator::from_rows(&rows)
    }

    /// # Panics
    /// If `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "operator dimension must be >= 1");
        Operator {
            m: DMatrix::zeros(dim, dim),
        }
    }

    /// # Panics
    /// If `dim == 0`.
    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "operator dimension must be >= 1");
        Operator {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// # Panics
    /// If `diag` is empty.
    pub fn diagonal(diag: &[f64]) -> Self {
        let mut op = Operator::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            op.m[(i, i)] = C64::new(d, 0.0);
        }
        op
    }

    /// The matrix unit `|i><j|` on a `dim`-dimensional space.
    ///
    /// # Panics
    /// If `i` or `j` is out of range.
    pub fn ket_bra(dim: usize, i: usize, j: usize) -> Self {
        assert!(i < dim && j < dim, "basis index out of range");
        let mut op = Operator::zeros(dim);
        op.m[(i, j)] = C64::new(1.0, 0.0);
        op
    }

    /// `|v><v| / <v|v>`.
    pub fn projector(ket: &[C64]) -> Result<Self> {
        if ket.is_empty() {
            return Err(Error::Dimension("empty ket".into()));
        }
        let norm_sqr: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if !(norm_sqr > 0.0) || !norm_sqr.is_finite() {
            return Err(Error::Structure("projector of a zero or non-finite ket".into()));
        }
        let n = ket.len();
        Ok(Operator {
            m: DMatrix::from_fn(n, n, |i, j| ket[i] * ket[j].conj() / norm_sqr),
        })
    }

    /// `|ket><bra|` without normalization.
    pub fn outer(ket: &[C64], bra: &[C64]) -> Result<Self> {
        if ket.len() != bra.len() {
            return Err(Error::dim(ket.len(), bra.len(), "outer product"));
        }
        if ket.is_empty() {
            return Err(Error::Dimension("empty ket".into()));
        }
        let n = ket.len();
        Ok(Operator {
            m: DMatrix::from_fn(n, n, |i, j| ket[i] * bra[j].conj()),
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    fn check_same_dim(&self, other: &Operator, what: &str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::dim(self.dim(), other.dim(), what));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other, "matmul")?;
        Ok(self * other)
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other, "add")?;
        Ok(self + other)
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.check_same_dim(other, "sub")?;
        Ok(self - other)
    }

    pub fn scale(&self, s: C64) -> Self {
        Operator { m: &self.m * s }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(a: &Operator, b: &Operator) -> Result<Self> {
        a.check_same_dim(b, "commutator")?;
        Ok(&(a * b) - &(b * a))
    }

    /// `self O self^dagger`. Dimensions must already agree.
    pub(crate) fn sandwich(&self, o: &Operator) -> Operator {
        Operator {
            m: &self.m * &o.m * self.m.adjoint(),
        }
    }

    /// `self^dagger O self`. Dimensions must already agree.
    pub(crate) fn sandwich_adjoint(&self, o: &Operator) -> Operator {
        Operator {
            m: self.m.adjoint() * &o.m * &self.m,
        }
    }

    pub(crate) fn add_assign_scaled(&mut self, other: &Operator, s: f64) {
        self.m.zip_apply(&other.m, |a, b| *a += b * s);
    }

    /// Largest element-wise `|A_ij - conj(A_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: &Tolerances) -> bool {
        self.hermitian_deviation() <= tol.herm
    }

    fn require_hermitian(&self, tol: &Tolerances, what: &str) -> Result<()> {
        let dev = self.hermitian_deviation();
        if dev > tol.herm {
            return Err(Error::Structure(format!(
                "{what} requires a Hermitian operator (deviation {dev:e} > {:e})",
                tol.herm
            )));
        }
        Ok(())
    }

    /// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
    ///
    /// Returns the eigenvalues and the unitary whose columns are the matching
    /// eigenvectors.
    pub fn eigh(&self, tol: &Tolerances) -> Result<(Vec<f64>, DMatrix<C64>)> {
        self.require_hermitian(tol, "eigendecomposition")?;
        // Within tolerance; take the exactly Hermitian part.
        let h = (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            eig.eigenvectors[(i, order[j])]
        });
        Ok((values, vectors))
    }

    /// Eigenvalues of a Hermitian operator, sorted ascending.
    pub fn eigenvalues(&self, tol: &Tolerances) -> Result<Vec<f64>> {
        self.eigh(tol).map(|(v, _)| v)
    }

    /// Applies `f` to the spectrum of a Hermitian operator: `V f(diag) V^dagger`.
    pub fn map_hermitian(&self, tol: &Tolerances, f: impl Fn(f64) -> C64) -> Result<Self> {
        let (values, v) = self.eigh(tol)?;
        let n = self.dim();
        let fd = DMatrix::from_fn(n, n, |i, j| if i == j { f(values[i]) } else { C64::default() });
        Ok(Operator {
            m: &v * fd * v.adjoint(),
        })
    }

    /// Principal square root of a positive semidefinite operator.
    pub fn sqrt_psd(&self, tol: &Tolerances) -> Result<Self> {
        let (values, _) = self.eigh(tol)?;
        if let Some(&min) = values.first() {
            if min < -tol.pos {
                return Err(Error::Structure(format!(
                    "square root of a non-positive operator (min eigenvalue {min:e})"
                )));
            }
        }
        self.map_hermitian(tol, |x| C64::new(x.max(0.0).sqrt(), 0.0))
    }

    /// True iff the smallest eigenvalue is `>= -tol.pos`. Non-Hermitian input
    /// is rejected rather than symmetrized.
    pub fn is_positive_semidefinite(&self, tol: &Tolerances) -> Result<bool> {
        let values = self.eigenvalues(tol)?;
        Ok(values.first().is_none_or(|&min| min >= -tol.pos))
    }

    /// Largest element-wise absolute difference.
    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.check_same_dim(other, "comparison")?;
        Ok(self
            .m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Element-wise equality within `eps`; false on dimension mismatch.
    pub fn approx_eq(&self, other: &Operator, eps: f64) -> bool {
        self.max_abs_diff(other).is_ok_and(|d| d <= eps)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;

    /// # Panics
    /// On dimension mismatch; use [`Operator::matmul`] for a checked product.
    fn mul(self, rhs: &'a Operator) -> Operator {
        Operator {
            m: &self.m * &rhs.m,
        }
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn add(self, rhs: &'a Operator) -> Operator {
        Operator {
            m: &self.m + &rhs.m,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator {
            m: &self.m - &rhs.m,
        }
    }
}

/// Hilbert-Schmidt inner product `<B, A> = Tr(B^dagger A)`.
pub fn hs_inner(b: &Operator, a: &Operator) -> Result<C64> {
    b.check_same_dim(a, "hs_inner")?;
    Ok(b.m.iter().zip(a.m.iter()).map(|(x, y)| x.conj() * y).sum())
}

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim)
}

/// `I / dim`.
pub fn maximally_mixed(dim: usize) -> DensityOperator {
    DensityOperator(Operator::identity(dim).scale_real(1.0 / dim as f64))
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(Operator);

impl DensityOperator {
    pub fn new(op: Operator, tol: &Tolerances) -> Result<Self> {
        op.require_hermitian(tol, "density operator")?;
        let tr = op.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol.norm {
            return Err(Error::Structure(format!(
                "density operator trace {tr} differs from 1"
            )));
        }
        if !op.is_positive_semidefinite(tol)? {
            return Err(Error::Structure(
                "density operator has a negative eigenvalue".into(),
            ));
        }
        Ok(DensityOperator(op))
    }

    /// Divides a nonzero positive operator by its trace.
    pub fn normalized(op: &Operator, tol: &Tolerances) -> Result<Self> {
        let tr = op.trace().re;
        if !(tr > tol.norm) {
            return Err(Error::ZeroNormalization {
                context: "trace normalization".into(),
                denominator: tr,
                threshold: tol.norm,
            });
        }
        DensityOperator::new(op.scale_real(1.0 / tr), tol)
    }

    pub fn pure(ket: &[C64]) -> Result<Self> {
        Operator::projector(ket).map(DensityOperator)
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }
}

impl Deref for DensityOperator {
    type Target = Operator;

    fn deref(&self) -> &Operator {
        &self.0
    }
}

impl AsRef<Operator> for DensityOperator {
    fn as_ref(&self) -> &Operator {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_pairs_to_one_with_states() {
        let tol = Tolerances::default();
        let mut rng = StdRng::seed_from_u64(1);
        for d in 1..=5 {
            let rho = random::density(&mut rng, d);
            let v = hs_inner(&identity(d), &rho).unwrap();
            assert!((v - c(1.0, 0.0)).norm() < tol.norm);
            assert!((hs_inner(&identity(d), &identity(d)).unwrap().re - d as f64).abs() < 1e-15);
        }
        let v = hs_inner(&identity(4), &maximally_mixed(4)).unwrap();
        assert!((v.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_projectors_have_zero_overlap() {
        let p0 = Operator::projector(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let p1 = Operator::projector(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(hs_inner(&p0, &p1).unwrap(), c(0.0, 0.0));
        assert_eq!(p0, Operator::ket_bra(2, 0, 0));
    }

    #[test]
    fn hs_inner_matches_elementwise_sum() {
        let mut rng = StdRng::seed_from_u64(7);
        let b = random::ginibre(&mut rng, 3);
        let a = random::ginibre(&mut rng, 3);
        let mut brute = c(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                brute += b.get(i, j).conj() * a.get(i, j);
            }
        }
        // trace formula as the second route
        let via_trace = (&b.adjoint() * &a).trace();
        let v = hs_inner(&b, &a).unwrap();
        assert!((v - brute).norm() < 1e-12);
        assert!((v - via_trace).norm() < 1e-12);
    }

    #[test]
    fn hs_inner_rejects_mismatched_dims() {
        let r = hs_inner(&identity(2), &identity(3));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn maximally_mixed_spectrum() {
        let tol = Tolerances::default();
        assert_eq!(*maximally_mixed(2).as_operator(), Operator::diagonal(&[0.5, 0.5]));
        assert!((maximally_mixed(7).trace().re - 1.0).abs() < 1e-14);
        let ev = maximally_mixed(3).eigenvalues(&tol).unwrap();
        for e in ev {
            assert!((e - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_examples() {
        let a = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let expected = Operator::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(a.adjoint(), expected);
        let mut rng = StdRng::seed_from_u64(3);
        let h = random::hermitian(&mut rng, 4);
        assert!(h.adjoint().approx_eq(&h, 0.0));
    }

    #[test]
    fn positivity_predicates() {
        let tol = Tolerances {
            pos: 1e-10,
            ..Tolerances::default()
        };
        assert!(Operator::ket_bra(2, 0, 0).is_positive_semidefinite(&tol).unwrap());
        assert!(!Operator::diagonal(&[1.0, -0.1]).is_positive_semidefinite(&tol).unwrap());
        let not_herm = Operator::ket_bra(2, 0, 1);
        assert!(matches!(
            not_herm.is_positive_semidefinite(&tol),
            Err(Error::Structure(_))
        ));
        assert!(matches!(not_herm.eigenvalues(&tol), Err(Error::Structure(_))));
    }

    #[test]
    fn eigenvalues_sorted_ascending() {
        let ev = Operator::diagonal(&[2.0, 1.0, 3.0])
            .eigenvalues(&Tolerances::default())
            .unwrap();
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn projector_normalizes() {
        let p = Operator::projector(&[c(2.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(p, Operator::ket_bra(2, 0, 0));
        assert!(Operator::projector(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let tol = Tolerances::default();
        let mut rng = StdRng::seed_from_u64(11);
        let m = random::ginibre(&mut rng, 4);
        let g = &m.adjoint() * &m;
        let s = g.sqrt_psd(&tol).unwrap();
        assert!((&s * &s).approx_eq(&g, 1e-10));
    }

    #[test]
    fn density_validation() {
        let tol = Tolerances::default();
        assert!(DensityOperator::new(Operator::diagonal(&[0.5, 0.5]), &tol).is_ok());
        assert!(DensityOperator::new(Operator::diagonal(&[1.1, -0.1]), &tol).is_err());
        assert!(DensityOperator::new(Operator::diagonal(&[0.5, 0.6]), &tol).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Operator::from_matrix(DMatrix::zeros(2, 3)).is_err());
        assert!(Operator::from_matrix(DMatrix::zeros(0, 0)).is_err());
        assert!(Operator::from_rows(&[vec![c(1.0, 0.0)], vec![]]).is_err());
        assert!(Tolerances::new(1e-9, -1.0, 1e-9, 1e-9).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn hs_inner_conjugate_symmetric(seed in any::<u64>(), d in 1usize..6) {
                let mut rng = StdRng::seed_from_u64(seed);
                let a = random::ginibre(&mut rng, d);
                let b = random::ginibre(&mut rng, d);
                let ba = hs_inner(&b, &a).unwrap();
                let ab = hs_inner(&a, &b).unwrap();
                prop_assert!((ba - ab.conj()).norm() <= 1e-10);
                let aa = hs_inner(&a, &a).unwrap();
                prop_assert!(aa.im.abs() <= 1e-12 && aa.re >= 0.0);
            }

            #[test]
            fn adjoint_is_involutive(seed in any::<u64>(), d in 1usize..6) {
                let mut rng = StdRng::seed_from_u64(seed);
                let a = random::ginibre(&mut rng, d);
                prop_assert_eq!(a.adjoint().adjoint(), a);
            }

            #[test]
            fn gram_matrices_are_psd(seed in any::<u64>(), d in 1usize..7) {
                let mut rng = StdRng::seed_from_u64(seed);
                let m = random::ginibre(&mut rng, d);
                let g = &m.adjoint() * &m;
                prop_assert!(g.is_positive_semidefinite(&Tolerances::default()).unwrap());
            }

            #[test]
            fn trace_is_cyclic(seed in any::<u64>(), d in 1usize..6) {
                let mut rng = StdRng::seed_from_u64(seed);
                let a = random::ginibre(&mut rng, d);
                let b = random::ginibre(&mut rng, d);
                let ab = a.matmul(&b).unwrap().trace();
                let ba = b.matmul(&a).unwrap().trace();
                prop_assert!((ab - ba).norm() <= 1e-10);
            }

            #[test]
            fn random_states_are_normalized(seed in any::<u64>(), d in 1usize..6) {
                let mut rng = StdRng::seed_from_u64(seed);
                let rho = random::density(&mut rng, d);
                let v = hs_inner(&identity(d), &rho).unwrap();
                prop_assert!((v.re - 1.0).abs() <= 1e-9 && v.im.abs() <= 1e-9);
            }
        }
    }
}
