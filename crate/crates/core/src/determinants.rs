//! Fredholm and Hilbert–Carleman log-determinants and their derivatives.
//!
//! Both determinants are evaluated from one symmetric spectrum, so
//! `log det₂(I + A) = log det(I + A) − tr(A)` holds term by term.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussmodel::PerturbationS;
use crate::symkernels::{eigh, hs_inner, trace_product, SpdMatrix, SymMatrix};

/// Log-determinant together with the spectrum of the perturbation it was
/// computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct LogDetResult {
    pub value: f64,
    pub spectrum_used: Vec<f64>,
}

fn spectrum_above_minus_one(a: &SymMatrix, op: &'static str) -> Result<Vec<f64>> {
    let eig = eigh(a)?;
    let spectrum: Vec<f64> = eig.eigenvalues().iter().copied().collect();
    if spectrum[0] <= -1.0 {
        return Err(Error::Domain {
            op,
            eigenvalue: spectrum[0],
            requirement: "eigenvalues must be > -1",
        });
    }
    Ok(spectrum)
}

/// `log det(I + a) = Σ log(1 + λ_k)`
pub fn fredholm_logdet(a: &SymMatrix) -> Result<LogDetResult> {
    let spectrum = spectrum_above_minus_one(a, "fredholm_logdet")?;
    Ok(LogDetResult {
        value: fredholm_from_spectrum(&spectrum),
        spectrum_used: spectrum,
    })
}

/// `log det₂(I + a) = Σ [log(1 + λ_k) − λ_k]`, never positive.
pub fn carleman_logdet2(a: &SymMatrix) -> Result<LogDetResult> {
    let spectrum = spectrum_above_minus_one(a, "carleman_logdet2")?;
    Ok(LogDetResult {
        value: carleman_from_spectrum(&spectrum),
        spectrum_used: spectrum,
    })
}

pub fn fredholm_from_spectrum(spectrum: &[f64]) -> f64 {
    spectrum.iter().map(|&l| l.ln_1p()).sum()
}

pub fn carleman_from_spectrum(spectrum: &[f64]) -> f64 {
    spectrum.iter().map(|&l| l.ln_1p() - l).sum()
}

/// Directional derivative of `X ↦ log det₂(I + X)` at `x0` along `x`:
/// `−tr[(I + x0)^{-1} x0 x]`.
pub fn dlogdet2(x0: &SymMatrix, x: &SymMatrix) -> Result<f64> {
    x.check_dim(x0.dim())?;
    let shifted = SpdMatrix::new(x0.shifted(1.0)).map_err(|_| Error::Domain {
        op: "dlogdet2",
        eigenvalue: eigh(x0).map(|e| e.min()).unwrap_or(f64::NAN),
        requirement: "I + x0 must be positive definite",
    })?;
    let lhs: DMatrix<f64> = shifted.inv().as_matrix() * x0.as_matrix();
    Ok(-trace_product(&lhs, x.as_matrix()))
}

/// `∂²/∂s∂t log det₂(I + sA + tB)` at the origin, which is `−tr(AB)`.
pub fn mixed_partial_logdet2(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    Ok(-hs_inner(a, b)?)
}

/// Both sides of `log det₂[(I − A)^{-1}] = −[log det₂(I − A) + tr(A²(I − A)^{-1})]`.
pub fn logdet2_inverse_identity_check(a: &PerturbationS) -> Result<(f64, f64)> {
    let n = a.dim();
    let inv = a.inv_complement();
    let lhs = carleman_logdet2(&(&inv - &SymMatrix::identity(n)))?.value;
    let s = a.as_sym();
    let s_sq = s.product(s);
    let rhs = -(carleman_logdet2(&-s)?.value + trace_product(&s_sq, inv.as_matrix()));
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> SymMatrix {
        SymMatrix::from_diagonal(v).unwrap()
    }

    #[test]
    fn fredholm_examples() {
        assert_eq!(fredholm_logdet(&SymMatrix::zeros(3)).unwrap().value, 0.0);
        assert_abs_diff_eq!(fredholm_logdet(&d(&[1.0])).unwrap().value, 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(fredholm_logdet(&d(&[1.0, -0.5])).unwrap().value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn carleman_examples() {
        assert_eq!(carleman_logdet2(&SymMatrix::zeros(2)).unwrap().value, 0.0);
        assert_abs_diff_eq!(
            carleman_logdet2(&d(&[1.0])).unwrap().value,
            2f64.ln() - 1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            carleman_logdet2(&d(&[-0.5])).unwrap().value,
            0.5f64.ln() + 0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(carleman_logdet2(&d(&[1.0])).unwrap().value, -0.306853, epsilon = 1e-6);
        assert_abs_diff_eq!(carleman_logdet2(&d(&[-0.5])).unwrap().value, -0.193147, epsilon = 1e-6);
    }

    #[test]
    fn domain_error_names_eigenvalue() {
        match fredholm_logdet(&d(&[0.5, -1.0])).unwrap_err() {
            Error::Domain { eigenvalue, .. } => assert_eq!(eigenvalue, -1.0),
            e => panic!("unexpected {e}"),
        }
        assert!(carleman_logdet2(&d(&[-3.0])).is_err());
    }

    #[test]
    fn spectrum_reproduces_value() {
        let a = SymMatrix::from_row_slice(2, &[0.3, 0.1, 0.1, -0.2]).unwrap();
        let r = carleman_logdet2(&a).unwrap();
        assert_abs_diff_eq!(carleman_from_spectrum(&r.spectrum_used), r.value, epsilon = 1e-12);
    }

    #[test]
    fn dlogdet2_examples() {
        let x = SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, -1.0]).unwrap();
        assert_eq!(dlogdet2(&SymMatrix::zeros(2), &x).unwrap(), 0.0);
        assert_abs_diff_eq!(dlogdet2(&d(&[1.0]), &d(&[1.0])).unwrap(), -0.5, epsilon = 1e-15);
        assert!(dlogdet2(&d(&[-1.5]), &d(&[1.0])).is_err());
    }

    #[test]
    fn mixed_partial_examples() {
        let i2 = SymMatrix::identity(2);
        assert_eq!(mixed_partial_logdet2(&i2, &i2).unwrap(), -2.0);
        let a = d(&[1.0, 0.0]);
        let b = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(mixed_partial_logdet2(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn inverse_identity_scalar() {
        let (l, r) = logdet2_inverse_identity_check(&PerturbationS::zero(3)).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        // α = ½: (I − A)^{-1} − I = 1, so lhs = log 2 − 1.
        let (l, r) = logdet2_inverse_identity_check(&PerturbationS::new(d(&[0.5])).unwrap()).unwrap();
        let expected = 2f64.ln() - 1.0;
        let rhs_scalar = -((0.5f64).ln() + 0.5 + 0.25 * 2.0);
        assert_abs_diff_eq!(expected, rhs_scalar, epsilon = 1e-15);
        assert_abs_diff_eq!(l, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(r, expected, epsilon = 1e-12);
    }

    fn sym_strategy(dim: usize, scale: f64) -> impl Strategy<Value = SymMatrix> {
        prop::collection::vec(-scale..scale, dim * dim)
            .prop_map(move |v| SymMatrix::from_row_slice(dim, &v).unwrap())
    }

    proptest! {
        #[test]
        fn carleman_is_fredholm_minus_trace(a in sym_strategy(6, 0.15)) {
            let f = fredholm_logdet(&a).unwrap().value;
            let c = carleman_logdet2(&a).unwrap().value;
            prop_assert!((c - (f - a.trace())).abs() <= 1e-10);
            prop_assert!(c <= 0.0);
        }

        #[test]
        fn dlogdet2_is_linear(x0 in sym_strategy(4, 0.2), x in sym_strategy(4, 1.0), y in sym_strategy(4, 1.0), t in -2.0f64..2.0) {
            let lhs = dlogdet2(&x0, &(&x + &(&y * t))).unwrap();
            let rhs = dlogdet2(&x0, &x).unwrap() + t * dlogdet2(&x0, &y).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
