//! Fisher–Rao metric in the `S` and `Σ` coordinates, the Fisher information
//! matrix of a parametrized covariance family, and the Gaussian KL
//! divergence written with the Hilbert–Carleman determinant.

use nalgebra::DMatrix;

use crate::determinants::carleman_logdet2;
use crate::error::{Error, Result};
use crate::gaussmodel::{feldman_hajek_s, CovarianceModel, GaussianMeasure, PerturbationS, Provenance};
use crate::symkernels::{hs_inner, trace_product, whiten, SpdMatrix, SymMatrix};

/// Default step for [`kl_hessian_check`].
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-3;

/// `g_S(V1, V2) = ½ tr[(I − S)^{-1} V1 (I − S)^{-1} V2]`
pub fn metric_s(s: &PerturbationS, v1: &SymMatrix, v2: &SymMatrix) -> Result<f64> {
    v1.check_dim(s.dim())?;
    v2.check_dim(s.dim())?;
    let inv = s.inv_complement();
    let a = inv.product(v1);
    let b = inv.product(v2);
    Ok(0.5 * trace_product(&a, &b))
}

/// `½ tr(Σ^{-1/2} A1 Σ^{-1} A2 Σ^{-1/2})`, evaluated as half the HS pairing
/// of the whitened directions.
pub fn metric_sigma(sigma: &SpdMatrix, a1: &SymMatrix, a2: &SymMatrix) -> Result<f64> {
    Ok(0.5 * hs_inner(&whiten(sigma, a1)?, &whiten(sigma, a2)?)?)
}

/// Affine-invariant metric `tr(Σ^{-1} A1 Σ^{-1} A2)`.
pub fn affine_invariant_metric(sigma: &SpdMatrix, a1: &SymMatrix, a2: &SymMatrix) -> Result<f64> {
    a1.check_dim(sigma.dim())?;
    a2.check_dim(sigma.dim())?;
    let inv = sigma.inv();
    Ok(trace_product(&inv.product(a1), &inv.product(a2)))
}

/// A smooth map `θ ↦ Σ(θ)` into the SPD cone.
pub trait CovarianceFamily {
    fn n_params(&self) -> usize;
    fn covariance(&self, theta: &[f64]) -> Result<SpdMatrix>;
    /// `∂Σ/∂θ_i` at `theta`.
    fn partials(&self, theta: &[f64]) -> Result<Vec<SymMatrix>>;
}

/// `Σ(θ) = offset + Σ_i θ_i D_i`.
#[derive(Clone, Debug)]
pub struct AffineFamily {
    pub offset: SymMatrix,
    pub directions: Vec<SymMatrix>,
}

impl AffineFamily {
    pub fn new(offset: SymMatrix, directions: Vec<SymMatrix>) -> Result<Self> {
        for d in &directions {
            d.check_dim(offset.dim())?;
        }
        Ok(AffineFamily { offset, directions })
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.directions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.directions.len(),
                actual: theta.len(),
            });
        }
        Ok(())
    }
}

impl CovarianceFamily for AffineFamily {
    fn n_params(&self) -> usize {
        self.directions.len()
    }

    fn covariance(&self, theta: &[f64]) -> Result<SpdMatrix> {
        self.check_theta(theta)?;
        let sigma = self
            .directions
            .iter()
            .zip(theta)
            .fold(self.offset.clone(), |acc, (d, &t)| &acc + &(d * t));
        SpdMatrix::new(sigma)
    }

    fn partials(&self, theta: &[f64]) -> Result<Vec<SymMatrix>> {
        self.check_theta(theta)?;
        Ok(self.directions.clone())
    }
}

/// `G_ij = ½ tr[Σ^{-1} ∂_iΣ Σ^{-1} ∂_jΣ]` for a covariance and its partials.
pub fn fisher_information_at(sigma: &SpdMatrix, partials: &[SymMatrix]) -> Result<SymMatrix> {
    if partials.is_empty() {
        return Err(Error::Empty("partials"));
    }
    let inv = sigma.inv();
    let scaled: Vec<DMatrix<f64>> = partials
        .iter()
        .map(|d| {
            d.check_dim(sigma.dim())?;
            Ok(inv.product(d))
        })
        .collect::<Result<_>>()?;
    let k = partials.len();
    SymMatrix::from_fn(k, |i, j| 0.5 * trace_product(&scaled[i], &scaled[j]))
}

/// Fisher information matrix of `family` at `theta`.
pub fn fisher_information_matrix(family: &dyn CovarianceFamily, theta: &[f64]) -> Result<SymMatrix> {
    let sigma = family.covariance(theta)?;
    fisher_information_at(&sigma, &family.partials(theta)?)
}

/// `KL(ν ‖ μ) = ½ ‖Q^{-1/2}(m_ν − m_μ)‖² − ½ log det₂(I − S)` with
/// `R = Q^{1/2}(I − S)Q^{1/2}`, where `μ = N(m_μ, Q)` and `ν = N(m_ν, R)`.
pub fn kl_divergence(nu: &GaussianMeasure, mu: &GaussianMeasure) -> Result<f64> {
    let q = mu.cov();
    let s = feldman_hajek_s(q, nu.cov())?;
    let delta = nu.mean() - mu.mean();
    let mean_term = 0.5 * q.whitened_coordinates(&delta).norm_squared();
    let det_term = -0.5 * carleman_logdet2(&-s.as_sym())?.value;
    Ok(mean_term + det_term)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianCheck {
    pub fd: f64,
    pub exact: f64,
}

/// Central four-point mixed second difference of
/// `(s, t) ↦ KL(N(0, Σ^{1/2}(I + sW1 + tW2)Σ^{1/2}) ‖ N(0, Σ))` at the
/// origin, against the exact `½ tr(W1 W2)`.
pub fn kl_hessian_check(
    sigma: &SpdMatrix,
    w1: &SymMatrix,
    w2: &SymMatrix,
    h: f64,
) -> Result<HessianCheck> {
    w1.check_dim(sigma.dim())?;
    w2.check_dim(sigma.dim())?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let mu = GaussianMeasure::centered(CovarianceModel::from_spd(sigma, Provenance::Explicit)?);
    let root = sigma.sqrt();
    let n = sigma.dim();
    let kl_at = |s: f64, t: f64| -> Result<f64> {
        let inner = &SymMatrix::identity(n) + &(&(w1 * s) + &(w2 * t));
        let inner = SpdMatrix::new(inner).map_err(|_| Error::StencilFailure {
            offset: s.abs().max(t.abs()),
        })?;
        let r = SpdMatrix::new(inner.as_sym().congruence(root.as_matrix())?)
            .map_err(|_| Error::StencilFailure { offset: h })?;
        let nu = GaussianMeasure::centered(CovarianceModel::from_spd(&r, Provenance::Explicit)?);
        kl_divergence(&nu, &mu)
    };
    let fd = (kl_at(h, h)? - kl_at(h, -h)? - kl_at(-h, h)? + kl_at(-h, -h)?) / (4.0 * h * h);
    let exact = 0.5 * hs_inner(w1, w2)?;
    Ok(HessianCheck { fd, exact })
}
