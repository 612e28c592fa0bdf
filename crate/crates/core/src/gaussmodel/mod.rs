//! Covariance and measure data model.
//!
//! A [`CovarianceModel`] is a finite truncation of a trace-class covariance
//! operator, stored spectrally (descending eigenvalues plus an orthonormal
//! basis). Two models on the same truncation are compared through the
//! perturbation `S` with `C1 = C0^{1/2} (I − S) C0^{1/2}`.

pub mod csv;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symkernels::{eigh, hs_norm, SpdMatrix, SymMatrix, SPD_RELATIVE_FLOOR};

/// Negative Gram eigenvalues larger than this fraction of `λ_max` are treated
/// as genuine indefiniteness rather than rounding.
/// Truncated norms below this are rounding noise and fit as a constant.
pub const SWEEP_NORM_FLOOR: f64 = 1e-12;

pub const INDEFINITE_TOLERANCE: f64 = 1e-9;

/// Where a covariance model came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Kernel,
    Samples,
    File,
    Explicit,
}

/// Stationary covariance kernels on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Kernel {
    Rbf { lengthscale: f64, amplitude: f64 },
    Matern32 { lengthscale: f64, amplitude: f64 },
}

impl Kernel {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        match *self {
            Kernel::Rbf {
                lengthscale,
                amplitude,
            } => amplitude * (-0.5 * (d / lengthscale).powi(2)).exp(),
            Kernel::Matern32 {
                lengthscale,
                amplitude,
            } => {
                let r = 3f64.sqrt() * d / lengthscale;
                amplitude * (1.0 + r) * (-r).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (l, a) = match *self {
            Kernel::Rbf {
                lengthscale,
                amplitude,
            }
            | Kernel::Matern32 {
                lengthscale,
                amplitude,
            } => (lengthscale, amplitude),
        };
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel lengthscale must be positive, got {l}"
            )));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel amplitude must be positive, got {a}"
            )));
        }
        Ok(())
    }
}

/// Spectral covariance model: strictly positive descending eigenvalues with
/// an orthonormal eigenbasis (columns).
#[derive(Clone, Debug)]
pub struct CovarianceModel {
    eigenvalues: Vec<f64>,
    basis: DMatrix<f64>,
    provenance: Provenance,
}

impl CovarianceModel {
    /// Validates positivity and orthonormality (1e-10) and sorts the pairs
    /// into descending order.
    pub fn from_spectrum(
        eigenvalues: Vec<f64>,
        basis: DMatrix<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
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
        if let Some(&bad) = eigenvalues.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain {
                op: "covariance model",
                eigenvalue: bad,
                requirement: "eigenvalues must be finite and > 0",
            });
        }
        let ortho = (basis.transpose() * &basis - DMatrix::identity(n, n)).amax();
        if !(ortho <= 1e-10) {
            return Err(Error::InvalidArgument(format!(
                "basis is not orthonormal (max deviation {ortho:e})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let sorted: Vec<f64> = order.iter().map(|&k| eigenvalues[k]).collect();
        let mut sorted_basis = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            sorted_basis.set_column(dst, &basis.column(src));
        }
        Ok(CovarianceModel {
            eigenvalues: sorted,
            basis: sorted_basis,
            provenance,
        })
    }

    /// Diagonal model in the standard basis.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        Self::from_spectrum(eigenvalues, DMatrix::identity(n, n), Provenance::Explicit)
    }

    /// `λ_k = scale · k^{-exponent}`, k = 1..=dim, standard basis.
    pub fn power_law(dim: usize, exponent: f64, scale: f64) -> Result<Self> {
        Self::diagonal((1..=dim).map(|k| scale * (k as f64).powf(-exponent)).collect())
    }

    pub fn from_spd(m: &SpdMatrix, provenance: Provenance) -> Result<Self> {
        let eig = m.eigen();
        Self::from_spectrum(
            eig.eigenvalues().iter().copied().collect(),
            eig.eigenvectors().clone(),
            provenance,
        )
    }

    /// Eigendecomposes a symmetric matrix, clipping eigenvalues below
    /// `1e-12 · λ_max` up to that floor. Negative eigenvalues beyond
    /// [`INDEFINITE_TOLERANCE`]` · λ_max` are an error.
    pub fn from_sym_clipped(m: &SymMatrix, provenance: Provenance) -> Result<Self> {
        let eig = eigh(m)?;
        let max = eig.max();
        if !(max > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eig: eig.min(),
                max_eig: max,
                floor: 0.0,
            });
        }
        if eig.min() < -INDEFINITE_TOLERANCE * max {
            return Err(Error::Domain {
                op: "covariance model",
                eigenvalue: eig.min(),
                requirement: "matrix is numerically indefinite",
            });
        }
        let floor = SPD_RELATIVE_FLOOR * max;
        let clipped = eig.eigenvalues().iter().map(|&v| v.max(floor)).collect();
        Self::from_spectrum(clipped, eig.eigenvectors().clone(), provenance)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    fn spectral(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.basis.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lambda));
        }
        SymMatrix::from_symmetric_unchecked(scaled * self.basis.transpose())
    }

    pub fn dense(&self) -> SymMatrix {
        self.spectral(|x| x)
    }

    pub fn sqrt(&self) -> SymMatrix {
        self.spectral(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> SymMatrix {
        self.spectral(|x| 1.0 / x.sqrt())
    }

    pub fn to_spd(&self) -> Result<SpdMatrix> {
        SpdMatrix::from_spectrum(&self.eigenvalues, &self.basis)
    }

    /// `B = basis · diag(√λ)`, so that `B Bᵀ` is the covariance.
    pub fn factor(&self) -> DMatrix<f64> {
        let mut b = self.basis.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            b.column_mut(j).scale_mut(lambda.sqrt());
        }
        b
    }

    /// Coordinates `C0^{-1/2} x` in the eigenbasis: `λ_k^{-1/2} ⟨x, e_k⟩`.
    pub fn whitened_coordinates(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut c = self.basis.tr_mul(x);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            c[k] /= lambda.sqrt();
        }
        c
    }

    /// `Λ^{-1/2} Eᵀ C1 E Λ^{-1/2}`: another covariance expressed in this
    /// model's whitened eigen-coordinates.
    pub fn relative_operator(&self, other: &CovarianceModel) -> Result<DMatrix<f64>> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let n = self.dim();
        if self.eigenvalues == other.eigenvalues && self.basis == other.basis {
            return Ok(DMatrix::identity(n, n));
        }
        let projected = self.basis.tr_mul(&other.factor());
        let mut m = &projected * projected.transpose();
        let roots: Vec<f64> = self.eigenvalues.iter().map(|l| l.sqrt()).collect();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] /= roots[i] * roots[j];
            }
        }
        Ok(m)
    }

    pub(crate) fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// Gram matrix of `kernel` on `grid`, eigendecomposed and floored.
pub fn build_from_kernel(kernel: &Kernel, grid: &[f64]) -> Result<CovarianceModel> {
    kernel.validate()?;
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    if let Some(bad) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid point {bad} is not finite")));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("duplicate grid point {}", w[0])));
    }
    let n = grid.len();
    let gram = SymMatrix::from_fn(n, |i, j| kernel.eval(grid[i], grid[j]))?;
    CovarianceModel::from_sym_clipped(&gram, Provenance::Kernel)
}

/// Evenly spaced grid on `[start, end]` with `n` points.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Empirical covariance `(1/N) Σ x xᵀ`, centered on the sample mean unless
/// `assume_centered`. Eigenvalues are floored at `1e-12 · λ_max`; a sample
/// set with no direction above the floor is rejected.
pub fn build_from_samples(samples: &[Vec<f64>], assume_centered: bool) -> Result<CovarianceModel> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if dim == 0 {
        return Err(Error::Empty("sample vector"));
    }
    for s in samples {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sample contains a non-finite value".into()));
        }
    }
    let count = samples.len() as f64;
    let mut data = DMatrix::from_fn(dim, samples.len(), |i, j| samples[j][i]);
    let raw_second_moment = data.norm_squared() / count;
    if !assume_centered {
        let mean = data.column_mean();
        for mut col in data.column_iter_mut() {
            col -= &mean;
        }
    }
    let cov = SymMatrix::from_symmetric_unchecked(&data * data.transpose() / count);
    let eig = eigh(&cov)?;
    let max = eig.max();
    let floor = SPD_RELATIVE_FLOOR * max;
    let rank = eig.eigenvalues().iter().filter(|&&v| v > floor).count();
    if !(max > f64::EPSILON * raw_second_moment) || rank == 0 {
        return Err(Error::RankDeficient { rank: 0, dim });
    }
    let clipped = eig.eigenvalues().iter().map(|&v| v.max(floor)).collect();
    CovarianceModel::from_spectrum(clipped, eig.eigenvectors().clone(), Provenance::Samples)
}

/// Mean vector plus covariance model.
#[derive(Clone, Debug)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: CovarianceModel,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: CovarianceModel) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                actual: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("mean contains a non-finite value".into()));
        }
        Ok(GaussianMeasure { mean, cov })
    }

    pub fn centered(cov: CovarianceModel) -> Self {
        GaussianMeasure {
            mean: DVector::zeros(cov.dim()),
            cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &CovarianceModel {
        &self.cov
    }
}

/// Symmetric `S` with `I − S ≻ 0`.
#[derive(Clone, Debug)]
pub struct PerturbationS {
    s: SymMatrix,
    complement: SpdMatrix,
}

impl PerturbationS {
    /// Fails when `I − s` is not positive definite under the shared floor.
    pub fn new(s: SymMatrix) -> Result<Self> {
        let complement = SpdMatrix::new(&SymMatrix::identity(s.dim()) - &s)?;
        Ok(PerturbationS { s, complement })
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(SymMatrix::zeros(dim)).expect("S = 0 is admissible")
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.s
    }

    /// `I − S`
    pub fn complement(&self) -> &SpdMatrix {
        &self.complement
    }

    /// Smallest eigenvalue of `I − S`.
    pub fn gap(&self) -> f64 {
        self.complement.min_eig()
    }

    /// `(I − S)^{-1}`
    pub fn inv_complement(&self) -> SymMatrix {
        self.complement.inv()
    }

    pub fn hs_norm(&self) -> f64 {
        hs_norm(&self.s)
    }

    /// `C0^{1/2} (I − S) C0^{1/2}`
    pub fn covariance(&self, c0: &CovarianceModel) -> Result<SpdMatrix> {
        self.s.check_dim(c0.dim())?;
        SpdMatrix::new(self.complement.as_sym().congruence(c0.sqrt().as_matrix())?)
    }
}

/// `S = I − C0^{-1/2} C1 C0^{-1/2}`
pub fn feldman_hajek_s(c0: &CovarianceModel, c1: &CovarianceModel) -> Result<PerturbationS> {
    let rel = c0.relative_operator(c1)?;
    let n = c0.dim();
    let s_eigen = DMatrix::identity(n, n) - rel;
    let s = SymMatrix::from_symmetric_unchecked(c0.basis() * s_eigen * c0.basis().transpose());
    PerturbationS::new(s)
}

/// `T` with `C0 = Σ^{1/2} (I − T) Σ^{1/2}` where `Σ = C0^{1/2} (I − S) C0^{1/2}`.
pub fn to_reverse_factor(c0: &CovarianceModel, s: &PerturbationS) -> Result<PerturbationS> {
    let sigma = s.covariance(c0)?;
    let whitened = c0.dense().congruence(sigma.inv_sqrt().as_matrix())?;
    PerturbationS::new(&SymMatrix::identity(c0.dim()) - &whitened)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    EquivalentAtTruncation,
    DivergenceSuspected,
}

/// Thresholds for [`equivalence_report`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Log-log slope of `‖S_n‖_HS` against `n` above which growth is flagged.
    pub slope_threshold: f64,
    /// A gap of `I − S` at or below this value is flagged.
    pub gap_floor: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            slope_threshold: 0.25,
            gap_floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub dim: usize,
    pub hs_norm_s: f64,
    pub mean_coeff_tail: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    /// Row-major `S`.
    pub s: Option<Vec<Vec<f64>>>,
    pub hs_norm_s: f64,
    pub gap: f64,
    pub mean_coeff_tail: f64,
    pub verdict: Verdict,
    pub dim_sweep: Option<Vec<SweepPoint>>,
    pub sweep_slope: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.ln(), y.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return 0.0;
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Truncation-level Feldman–Hajek diagnostics for `mu1` against `mu0`.
///
/// The sweep truncates both covariances to the span of the leading `n`
/// eigenvectors of `mu0`'s covariance.
pub fn equivalence_report(
    mu0: &GaussianMeasure,
    mu1: &GaussianMeasure,
    sweep_dims: Option<&[usize]>,
    config: &ReportConfig,
) -> Result<EquivalenceReport> {
    if mu1.dim() != mu0.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu0.dim(),
            actual: mu1.dim(),
        });
    }
    let dim = mu0.dim();
    if let Some(dims) = sweep_dims {
        if dims.is_empty() {
            return Err(Error::Empty("sweep_dims"));
        }
        if dims.iter().any(|&n| n == 0 || n > dim) {
            return Err(Error::InvalidArgument(format!(
                "sweep dimensions must lie in 1..={dim}"
            )));
        }
        if dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "sweep dimensions must be strictly ascending".into(),
            ));
        }
    }
    let c0 = mu0.cov();
    let s = feldman_hajek_s(c0, mu1.cov())?;

    let delta = mu1.mean() - mu0.mean();
    let coeffs = c0.basis().tr_mul(&delta);
    let tail_terms: Vec<f64> = coeffs
        .iter()
        .zip(c0.eigenvalues())
        .map(|(c, l)| c * c / l)
        .collect();
    let mean_coeff_tail = tail_terms.iter().sum();

    let (dim_sweep, sweep_slope) = match sweep_dims {
        Some(dims) => {
            let n = dim;
            let s_eigen = DMatrix::identity(n, n) - c0.relative_operator(mu1.cov())?;
            let points: Vec<SweepPoint> = dims
                .iter()
                .map(|&k| SweepPoint {
                    dim: k,
                    hs_norm_s: s_eigen.view((0, 0), (k, k)).norm(),
                    mean_coeff_tail: tail_terms[..k].iter().sum(),
                })
                .collect();
            let slope = log_log_slope(
                &points
                    .iter()
                    .map(|p| (p.dim as f64, p.hs_norm_s.max(SWEEP_NORM_FLOOR)))
                    .collect::<Vec<_>>(),
            );
            (Some(points), Some(slope))
        }
        None => (None, None),
    };

    let growth = sweep_slope.is_some_and(|slope| slope > config.slope_threshold);
    let verdict = if growth || s.gap() <= config.gap_floor {
        Verdict::DivergenceSuspected
    } else {
        Verdict::EquivalentAtTruncation
    };
    let rows = s
        .as_sym()
        .as_matrix()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    Ok(EquivalenceReport {
        s: Some(rows),
        hs_norm_s: s.hs_norm(),
        gap: s.gap(),
        mean_coeff_tail,
        verdict,
        dim_sweep,
        sweep_slope,
    })
}
