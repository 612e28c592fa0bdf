//! Dense symmetric linear algebra: eigendecomposition, spectral matrix
//! functions, congruences and the Hilbert–Schmidt pairing.
//!
//! Every matrix function goes through a full symmetric eigendecomposition,
//! so `sqrt`, `log`, `exp` and friends share one code path and one notion of
//! the spectrum.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue floor shared by every positive-definiteness test.
pub const SPD_RELATIVE_FLOOR: f64 = 1e-12;

const EIGEN_SWEEPS_PER_DIM: usize = 64;

/// Real symmetric matrix. Symmetrized as `(M + Mᵀ)/2` on construction.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.m)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl SymMatrix {
    /// Validates shape and finiteness, then symmetrizes.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Empty("matrix"));
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        symmetrize(&mut m);
        Ok(SymMatrix { m })
    }

    /// Builds from a product or sum that is symmetric up to rounding.
    pub(crate) fn from_symmetric_unchecked(mut m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        symmetrize(&mut m);
        SymMatrix { m }
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("matrix"));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_slice(n, &data)
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(dim, dim, f))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Empty("diagonal"));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.m.diagonal().iter().copied().collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// `self + shift·I`
    pub fn shifted(&self, shift: f64) -> SymMatrix {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        SymMatrix { m }
    }

    /// `m · self · mᵀ`, symmetrized.
    pub fn congruence(&self, m: &DMatrix<f64>) -> Result<SymMatrix> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: m.ncols(),
            });
        }
        Ok(Self::from_symmetric_unchecked(m * &self.m * m.transpose()))
    }

    /// Plain (generally non-symmetric) product.
    pub fn product(&self, other: &SymMatrix) -> DMatrix<f64> {
        &self.m * &other.m
    }

    /// `[self, other] = self·other − other·self`, antisymmetric.
    pub fn commutator(&self, other: &SymMatrix) -> DMatrix<f64> {
        let ab = &self.m * &other.m;
        let ba = ab.transpose();
        ab - ba
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        (&self.m - &other.m).amax()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.dim(),
            });
        }
        Ok(())
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix { m: &self.m * rhs }
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix { m: -&self.m }
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `Q f(Λ) Qᵀ`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fj = f(lambda);
            scaled.column_mut(j).scale_mut(fj);
        }
        SymMatrix::from_symmetric_unchecked(scaled * q.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|x| x)
    }
}

/// Symmetric eigendecomposition, eigenvalues ascending.
pub fn eigh(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    let max_iter = EIGEN_SWEEPS_PER_DIM * n.max(4);
    let eig = m
        .m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, max_iter)
        .ok_or(Error::NoConvergence {
            iterations: max_iter,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Scalar functions available through the spectral calculus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatFun {
    Sqrt,
    InvSqrt,
    Log,
    Exp,
    Inv,
}

impl MatFun {
    fn name(self) -> &'static str {
        match self {
            MatFun::Sqrt => "sqrt",
            MatFun::InvSqrt => "inv_sqrt",
            MatFun::Log => "log",
            MatFun::Exp => "exp",
            MatFun::Inv => "inv",
        }
    }

    fn needs_positive(self) -> bool {
        !matches!(self, MatFun::Exp)
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            MatFun::Sqrt => x.sqrt(),
            MatFun::InvSqrt => 1.0 / x.sqrt(),
            MatFun::Log => x.ln(),
            MatFun::Exp => x.exp(),
            MatFun::Inv => 1.0 / x,
        }
    }

    fn apply(self, eig: &EigenDecomposition) -> Result<SymMatrix> {
        if self.needs_positive() && eig.min() <= 0.0 {
            return Err(Error::Domain {
                op: self.name(),
                eigenvalue: eig.min(),
                requirement: "eigenvalues must be > 0",
            });
        }
        Ok(eig.map(|x| self.eval(x)))
    }
}

/// Applies `f` spectrally. `Exp` accepts any symmetric matrix; the others
/// need a strictly positive spectrum.
pub fn matfun(m: &SymMatrix, f: MatFun) -> Result<SymMatrix> {
    f.apply(&eigh(m)?)
}

/// Symmetric positive-definite matrix with its eigendecomposition cached.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    base: SymMatrix,
    eig: EigenDecomposition,
}

impl SpdMatrix {
    /// Rejects any matrix whose smallest eigenvalue is below
    /// `1e-12 · λ_max` (or non-positive).
    pub fn new(base: SymMatrix) -> Result<Self> {
        let eig = eigh(&base)?;
        check_spd_spectrum(eig.min(), eig.max())?;
        Ok(SpdMatrix { base, eig })
    }

    pub fn from_row_slice(dim: usize, data: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_row_slice(dim, data)?)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(diag)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(SymMatrix::identity(dim)).expect("identity is SPD")
    }

    /// Builds `Q diag(λ) Qᵀ` from an already-known spectral pair without
    /// re-diagonalizing. `basis` columns must be orthonormal within 1e-10.
    pub fn from_spectrum(eigenvalues: &[f64], basis: &DMatrix<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 {
            return Err(Error::Empty("spectrum"));
        }
        if basis.nrows() != n || basis.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: basis.ncols(),
            });
        }
        let ortho = (basis.transpose() * basis - DMatrix::identity(n, n)).amax();
        if !(ortho <= 1e-10) {
            return Err(Error::InvalidArgument(format!(
                "basis is not orthonormal (max deviation {ortho:e})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eigenvalues[k]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &basis.column(src));
        }
        let eig = EigenDecomposition {
            eigenvalues: values,
            eigenvectors: vectors,
        };
        check_spd_spectrum(eig.min(), eig.max())?;
        Ok(SpdMatrix {
            base: eig.reconstruct(),
            eig,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.base.as_matrix()
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn min_eig(&self) -> f64 {
        self.eig.min()
    }

    pub fn max_eig(&self) -> f64 {
        self.eig.max()
    }

    pub fn apply(&self, f: MatFun) -> SymMatrix {
        f.apply(&self.eig).expect("SPD spectrum is positive")
    }

    pub fn sqrt(&self) -> SymMatrix {
        self.apply(MatFun::Sqrt)
    }

    pub fn inv_sqrt(&self) -> SymMatrix {
        self.apply(MatFun::InvSqrt)
    }

    pub fn inv(&self) -> SymMatrix {
        self.apply(MatFun::Inv)
    }

    pub fn log(&self) -> SymMatrix {
        self.apply(MatFun::Log)
    }

    pub fn log_det(&self) -> f64 {
        self.eig.eigenvalues.iter().map(|x| x.ln()).sum()
    }
}

pub(crate) fn check_spd_spectrum(min_eig: f64, max_eig: f64) -> Result<()> {
    let floor = SPD_RELATIVE_FLOOR * max_eig.abs();
    if !(min_eig > 0.0) || min_eig < floor {
        return Err(Error::NotPositiveDefinite {
            min_eig,
            max_eig,
            floor,
        });
    }
    Ok(())
}

/// `P^{-1/2} X P^{-1/2}`
pub fn whiten(p: &SpdMatrix, x: &SymMatrix) -> Result<SymMatrix> {
    x.check_dim(p.dim())?;
    x.congruence(p.inv_sqrt().as_matrix())
}

/// `P^{1/2} X P^{1/2}`, the inverse of [`whiten`].
pub fn unwhiten(p: &SpdMatrix, x: &SymMatrix) -> Result<SymMatrix> {
    x.check_dim(p.dim())?;
    x.congruence(p.sqrt().as_matrix())
}

/// `trace(a b)`, which for symmetric operands is the entrywise dot product.
pub fn hs_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    b.check_dim(a.dim())?;
    Ok(a.m.dot(&b.m))
}

pub fn hs_norm(a: &SymMatrix) -> f64 {
    a.m.norm()
}

/// `trace(a b)` for general square operands of equal size.
pub(crate) fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spd_from_seed(dim: usize, entries: &[f64]) -> SpdMatrix {
        let a = DMatrix::from_fn(dim, dim, |i, j| entries[(i * dim + j) % entries.len()]);
        let m = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5;
        SpdMatrix::new(SymMatrix::new(m).unwrap()).unwrap()
    }

    #[test]
    fn eigh_identity() {
        let e = eigh(&SymMatrix::identity(3)).unwrap();
        for &v in e.eigenvalues().iter() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn eigh_diagonal_is_axis_aligned() {
        let e = eigh(&SymMatrix::from_diagonal(&[5.0, 2.0]).unwrap()).unwrap();
        assert_eq!(e.eigenvalues().as_slice(), &[2.0, 5.0]);
        let q = e.eigenvectors();
        assert_abs_diff_eq!(q[(1, 0)].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q[(0, 1)].abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eigh_two_by_two() {
        let m = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = eigh(&m).unwrap();
        assert_abs_diff_eq!(e.eigenvalues()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues()[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SymMatrix::from_row_slice(2, &[1.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn rejects_non_finite() {
        let err = SymMatrix::from_row_slice(2, &[1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn spd_floor_rejects_near_singular() {
        let err = SpdMatrix::from_diagonal(&[1.0, 1e-13]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        assert!(SpdMatrix::from_diagonal(&[1.0, 1e-11]).is_ok());
        assert!(SpdMatrix::from_diagonal(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn sqrt_of_identity() {
        let r = matfun(&SymMatrix::identity(3), MatFun::Sqrt).unwrap();
        assert!(r.max_abs_diff(&SymMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn log_of_diagonal_exponentials() {
        let e = std::f64::consts::E;
        let m = SymMatrix::from_diagonal(&[e, e * e]).unwrap();
        let l = matfun(&m, MatFun::Log).unwrap();
        assert!(l.max_abs_diff(&SymMatrix::from_diagonal(&[1.0, 2.0]).unwrap()) < 1e-14);
    }

    #[test]
    fn exp_log_roundtrip() {
        let p = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let back = matfun(&matfun(&p, MatFun::Log).unwrap(), MatFun::Exp).unwrap();
        assert!(back.max_abs_diff(&p) < 1e-10);
    }

    #[test]
    fn log_domain_error_names_eigenvalue() {
        let m = SymMatrix::from_diagonal(&[1.0, -2.0]).unwrap();
        match matfun(&m, MatFun::Log).unwrap_err() {
            Error::Domain { eigenvalue, op, .. } => {
                assert_eq!(eigenvalue, -2.0);
                assert_eq!(op, "log");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matfun(&m, MatFun::Exp).is_ok());
    }

    #[test]
    fn whiten_examples() {
        let x = SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!(whiten(&SpdMatrix::identity(2), &x).unwrap().max_abs_diff(&x) < 1e-15);
        let p = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let w = whiten(&p, &SymMatrix::from_diagonal(&[8.0, 3.0]).unwrap()).unwrap();
        assert!(w.max_abs_diff(&SymMatrix::from_diagonal(&[2.0, 3.0]).unwrap()) < 1e-14);
        let q = SpdMatrix::from_row_slice(2, &[3.0, 1.0, 1.0, 2.0]).unwrap();
        let self_w = whiten(&q, q.as_sym()).unwrap();
        assert!(self_w.max_abs_diff(&SymMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn whiten_dim_mismatch() {
        let p = SpdMatrix::identity(2);
        assert!(matches!(
            whiten(&p, &SymMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hs_examples() {
        assert_abs_diff_eq!(hs_norm(&SymMatrix::identity(5)), 5f64.sqrt(), epsilon = 1e-15);
        let a = SymMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let b = SymMatrix::from_diagonal(&[3.0, 4.0]).unwrap();
        assert_eq!(hs_inner(&a, &b).unwrap(), 11.0);
        assert!(hs_inner(&a, &SymMatrix::identity(3)).is_err());
    }

    fn sym_strategy(dim: usize) -> impl Strategy<Value = SymMatrix> {
        prop::collection::vec(-1.0f64..1.0, dim * dim)
            .prop_map(move |v| SymMatrix::from_row_slice(dim, &v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn eigen_reconstruction(dim in 1usize..24, seed in prop::collection::vec(-2.0f64..2.0, 7)) {
            let a = DMatrix::from_fn(dim, dim, |i, j| seed[(3 * i + j) % 7] * ((i + 2 * j) as f64).cos());
            let m = SymMatrix::new(a).unwrap();
            let e = eigh(&m).unwrap();
            let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
            prop_assert!((e.reconstruct().as_matrix() - m.as_matrix()).norm() <= 1e-10 * scale);
            let q = e.eigenvectors();
            prop_assert!((q.transpose() * q - DMatrix::identity(dim, dim)).amax() <= 1e-12);
            for w in e.eigenvalues().as_slice().windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }

        #[test]
        fn sqrt_and_log_roundtrip(dim in 1usize..33, entries in prop::collection::vec(-1.0f64..1.0, 11)) {
            let p = spd_from_seed(dim, &entries);
            let norm = p.as_sym().frobenius_norm();
            let s = p.sqrt();
            prop_assert!((s.product(&s) - p.as_matrix()).norm() <= 1e-9 * norm);
            let back = matfun(&p.log(), MatFun::Exp).unwrap();
            prop_assert!((back.as_matrix() - p.as_matrix()).norm() <= 1e-9 * norm);
        }

        #[test]
        fn whiten_inverts_unwhiten(entries in prop::collection::vec(-1.0f64..1.0, 13), x in sym_strategy(6)) {
            let p = spd_from_seed(6, &entries);
            let back = whiten(&p, &unwhiten(&p, &x).unwrap()).unwrap();
            prop_assert!(back.max_abs_diff(&x) <= 1e-9);
        }

        #[test]
        fn hs_inner_bilinear_symmetric(a in sym_strategy(5), b in sym_strategy(5), c in sym_strategy(5), t in -3.0f64..3.0) {
            let ab = hs_inner(&a, &b).unwrap();
            prop_assert_eq!(ab, hs_inner(&b, &a).unwrap());
            let lhs = hs_inner(&(&a + &(&c * t)), &b).unwrap();
            let rhs = ab + t * hs_inner(&c, &b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            prop_assert!(ab.abs() <= hs_norm(&a) * hs_norm(&b) + 1e-12);
        }
    }
}
