//! Monte-Carlo checks of the Radon–Nikodym log-density, its Fréchet
//! derivative and the L² identities they satisfy.
//!
//! Samples are drawn in batches of [`BATCH`]; batch `b` uses stream `b` of
//! the ChaCha generator seeded with the configured seed, so results do not
//! depend on how batches are scheduled. Sums are pairwise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinants::{carleman_logdet2, fredholm_logdet};
use crate::error::{Error, Result};
use crate::gaussmodel::{CovarianceModel, GaussianMeasure, PerturbationS, Provenance};
use crate::random::stream;
use crate::symkernels::{trace_product, SymMatrix};

pub const BATCH: usize = 4096;
pub const MIN_ESTIMATE_SAMPLES: usize = 1000;

fn default_sigmas() -> f64 {
    3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_sigmas")]
    pub confidence_sigmas: f64,
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        McConfig {
            n_samples,
            seed,
            confidence_sigmas: default_sigmas(),
        }
    }

    fn check(&self, min_samples: usize) -> Result<()> {
        if self.n_samples < min_samples {
            return Err(Error::InvalidArgument(format!(
                "n_samples must be at least {min_samples}, got {}",
                self.n_samples
            )));
        }
        if !(self.confidence_sigmas > 0.0) {
            return Err(Error::InvalidArgument("confidence_sigmas must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub exact: Option<f64>,
    pub z_score: Option<f64>,
}

impl McEstimate {
    /// Sample mean and `sd/√n` of `values`; `z_score` is set iff `exact` is.
    pub fn from_values(values: &[f64], exact: Option<f64>) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        let std_error = (var / n as f64).sqrt();
        let z_score = exact.map(|e| {
            let diff = mean - e;
            if std_error > 0.0 {
                diff / std_error
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        });
        McEstimate {
            mean,
            std_error,
            n,
            exact,
            z_score,
        }
    }

    /// `|z| ≤ sigmas`, or `None` without an exact value.
    pub fn within(&self, sigmas: f64) -> Option<bool> {
        self.z_score.map(|z| z.abs() <= sigmas)
    }

    pub fn report(&self, name: &str, seed: u64) -> McReport {
        McReport {
            name: name.to_string(),
            n: self.n,
            mean: self.mean,
            std_error: self.std_error,
            exact: self.exact,
            z_score: self.z_score,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub exact: Option<f64>,
    pub z_score: Option<f64>,
    pub seed: u64,
}

pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn quad_form(a: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    let mut total = 0.0;
    for (i, row) in a.chunks_exact(n).enumerate() {
        let mut acc = 0.0;
        for (r, v) in row.iter().zip(y) {
            acc += r * v;
        }
        total += y[i] * acc;
    }
    total
}

fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(a.chunks_exact(n)) {
        let mut acc = 0.0;
        for (r, v) in row.iter().zip(x) {
            acc += r * v;
        }
        *o = acc;
    }
}

/// `x = m + B z` with `B = basis · diag(√λ)`.
struct Sampler {
    mean: Vec<f64>,
    factor: Vec<f64>,
}

impl Sampler {
    fn new(measure: &GaussianMeasure) -> Self {
        Sampler {
            mean: measure.mean().iter().copied().collect(),
            factor: row_major(&measure.cov().factor()),
        }
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn draw<R: Rng>(&self, rng: &mut R, z: &mut [f64], x: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        mat_vec(&self.factor, z, x);
        for (v, m) in x.iter_mut().zip(&self.mean) {
            *v += m;
        }
    }

    /// `f(x_i, scratch)` for every sample, in sample order.
    fn evaluate<F>(&self, cfg: &McConfig, f: F) -> Vec<f64>
    where
        F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
    {
        let n = cfg.n_samples;
        let d = self.dim();
        let batches: Vec<Vec<f64>> = (0..n.div_ceil(BATCH))
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(cfg.seed, b as u64);
                let len = BATCH.min(n - b * BATCH);
                let (mut z, mut x, mut scratch) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
                (0..len)
                    .map(|_| {
                        self.draw(&mut rng, &mut z, &mut x);
                        f(&x, &mut scratch)
                    })
                    .collect()
            })
            .collect();
        batches.concat()
    }
}

/// `n_samples × dim` draws from `measure`.
pub fn sample_gaussian(measure: &GaussianMeasure, cfg: &McConfig) -> Result<DMatrix<f64>> {
    cfg.check(1)?;
    let sampler = Sampler::new(measure);
    let d = sampler.dim();
    let n = cfg.n_samples;
    let rows: Vec<Vec<f64>> = (0..n.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(cfg.seed, b as u64);
            let len = BATCH.min(n - b * BATCH);
            let mut z = vec![0.0; d];
            let mut out = vec![0.0; len * d];
            for row in out.chunks_exact_mut(d) {
                sampler.draw(&mut rng, &mut z, row);
            }
            out
        })
        .collect();
    Ok(DMatrix::from_row_slice(n, d, &rows.concat()))
}

fn check_len(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    Ok(())
}

/// `W_z(x) = ⟨x − m, C^{-1/2} z⟩`, evaluated in the eigenbasis of `C`.
pub fn white_noise(measure: &GaussianMeasure, z: &[f64], x: &[f64]) -> Result<f64> {
    let dim = measure.dim();
    check_len(z, dim)?;
    check_len(x, dim)?;
    let centered = DVector::from_iterator(dim, x.iter().zip(measure.mean().iter()).map(|(a, m)| a - m));
    let zv = DVector::from_column_slice(z);
    let cov = measure.cov();
    let xc = cov.basis().tr_mul(&centered);
    let zc = cov.basis().tr_mul(&zv);
    Ok(cov
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, l)| xc[k] * zc[k] / l.sqrt())
        .sum())
}

/// Precomputed `x ↦ log dμ/dμ₀(x)` for `μ₀ = N(0, C0)` and
/// `μ = N(0, C0^{1/2}(I − S)C0^{1/2})`.
pub struct RnDensity {
    whitener: Vec<f64>,
    quad: Vec<f64>,
    constant: f64,
}

/// Quadratic forms are carried in the whitened eigen-coordinates
/// `y = Λ^{-1/2} Eᵀ x`, where `⟨C0^{-1/2}x, M C0^{-1/2}x⟩ = yᵀ (Eᵀ M E) y`.
fn whitener(c0: &CovarianceModel) -> Vec<f64> {
    let mut w = c0.basis().transpose();
    for (k, l) in c0.eigenvalues().iter().enumerate() {
        w.row_mut(k).scale_mut(1.0 / l.sqrt());
    }
    row_major(&w)
}

fn to_eigen(c0: &CovarianceModel, m: &DMatrix<f64>) -> Vec<f64> {
    let e = c0.basis();
    row_major(&(e.transpose() * m * e))
}

impl RnDensity {
    pub fn new(c0: &CovarianceModel, s: &PerturbationS) -> Result<Self> {
        s.as_sym().check_dim(c0.dim())?;
        let k = s.inv_complement();
        let sk = s.as_sym().as_matrix() * k.as_matrix();
        Ok(RnDensity {
            whitener: whitener(c0),
            quad: to_eigen(c0, &sk),
            constant: -0.5 * fredholm_logdet(&-s.as_sym())?.value,
        })
    }

    /// `scratch` must have the model dimension.
    pub fn eval(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        mat_vec(&self.whitener, x, scratch);
        self.constant - 0.5 * quad_form(&self.quad, scratch)
    }
}

/// Precomputed `x ↦ D log dμ/dμ₀(x) · V`.
pub struct RnScore {
    whitener: Vec<f64>,
    quad: Vec<f64>,
    constant: f64,
}

impl RnScore {
    pub fn new(c0: &CovarianceModel, s: &PerturbationS, v: &SymMatrix) -> Result<Self> {
        s.as_sym().check_dim(c0.dim())?;
        v.check_dim(c0.dim())?;
        let k = s.inv_complement();
        let kv = k.as_matrix() * v.as_matrix();
        let kvk = &kv * k.as_matrix();
        Ok(RnScore {
            whitener: whitener(c0),
            quad: to_eigen(c0, &kvk),
            constant: 0.5 * kv.trace(),
        })
    }

    pub fn eval(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        mat_vec(&self.whitener, x, scratch);
        self.constant - 0.5 * quad_form(&self.quad, scratch)
    }
}

/// `−½ log det(I − S) − ½ ⟨C0^{-1/2}x, S(I − S)^{-1} C0^{-1/2}x⟩`
pub fn log_rn_density(c0: &CovarianceModel, s: &PerturbationS, x: &[f64]) -> Result<f64> {
    check_len(x, c0.dim())?;
    let mut scratch = vec![0.0; x.len()];
    Ok(RnDensity::new(c0, s)?.eval(x, &mut scratch))
}

/// `½ tr[(I − S)^{-1}V] − ½ ⟨C0^{-1/2}x, (I − S)^{-1}V(I − S)^{-1} C0^{-1/2}x⟩`
pub fn dlog_rn(c0: &CovarianceModel, s: &PerturbationS, v: &SymMatrix, x: &[f64]) -> Result<f64> {
    check_len(x, c0.dim())?;
    let mut scratch = vec![0.0; x.len()];
    Ok(RnScore::new(c0, s, v)?.eval(x, &mut scratch))
}

/// `μ = N(0, C0^{1/2}(I − S)C0^{1/2})` as a spectral model.
pub fn perturbed_measure(c0: &CovarianceModel, s: &PerturbationS) -> Result<GaussianMeasure> {
    let cov = CovarianceModel::from_spd(&s.covariance(c0)?, Provenance::Explicit)?;
    Ok(GaussianMeasure::centered(cov))
}

/// `E_μ[D log(dμ/dμ₀)·v1 · D log(dμ/dμ₀)·v2]` against
/// `½ tr[(I − S)^{-1}v1(I − S)^{-1}v2]`.
pub fn mc_fisher_metric(
    c0: &CovarianceModel,
    s: &PerturbationS,
    v1: &SymMatrix,
    v2: &SymMatrix,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    let d1 = RnScore::new(c0, s, v1)?;
    let d2 = RnScore::new(c0, s, v2)?;
    let k = s.inv_complement();
    let exact = 0.5
        * trace_product(
            &(k.as_matrix() * v1.as_matrix()),
            &(k.as_matrix() * v2.as_matrix()),
        );
    let sampler = Sampler::new(&perturbed_measure(c0, s)?);
    let values = sampler.evaluate(cfg, |x, y| d1.eval(x, y) * d2.eval(x, y));
    Ok(McEstimate::from_values(&values, Some(exact)))
}

/// `E_μ[(log dμ/dμ₀)²]` against `½‖S‖² + ¼[log det₂(I − S)]²`.
pub fn mc_lognorm_identity(c0: &CovarianceModel, s: &PerturbationS, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    let rn = RnDensity::new(c0, s)?;
    let ld2 = carleman_logdet2(&-s.as_sym())?.value;
    let exact = 0.5 * s.hs_norm().powi(2) + 0.25 * ld2 * ld2;
    let sampler = Sampler::new(&perturbed_measure(c0, s)?);
    let values = sampler.evaluate(cfg, |x, y| rn.eval(x, y).powi(2));
    Ok(McEstimate::from_values(&values, Some(exact)))
}

/// `E_μ₀[(log dμ/dμ₀)²]` against
/// `½‖S(I − S)^{-1}‖² + ¼(log det₂[(I − S)^{-1}])²`.
pub fn mc_lognorm_identity_mu0(c0: &CovarianceModel, s: &PerturbationS, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    let rn = RnDensity::new(c0, s)?;
    let k_minus_i = &s.inv_complement() - &SymMatrix::identity(s.dim());
    let ld2 = carleman_logdet2(&k_minus_i)?.value;
    let sk = s.as_sym().as_matrix() * s.inv_complement().as_matrix();
    let exact = 0.5 * sk.norm_squared() + 0.25 * ld2 * ld2;
    let sampler = Sampler::new(&GaussianMeasure::centered(c0.clone()));
    let values = sampler.evaluate(cfg, |x, y| rn.eval(x, y).powi(2));
    Ok(McEstimate::from_values(&values, Some(exact)))
}

/// `E[⟨x, Ax⟩⟨x, Bx⟩]` under `N(0, C)` against `tr(CA)tr(CB) + 2tr(CACB)`.
pub fn mc_quadratic_identity(
    c: &CovarianceModel,
    a: &SymMatrix,
    b: &SymMatrix,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    a.check_dim(c.dim())?;
    b.check_dim(c.dim())?;
    let cm = c.dense();
    let ca = cm.as_matrix() * a.as_matrix();
    let cb = cm.as_matrix() * b.as_matrix();
    let exact = ca.trace() * cb.trace() + 2.0 * trace_product(&ca, &cb);
    let (ar, br) = (row_major(a.as_matrix()), row_major(b.as_matrix()));
    let sampler = Sampler::new(&GaussianMeasure::centered(c.clone()));
    let values = sampler.evaluate(cfg, |x, _| quad_form(&ar, x) * quad_form(&br, x));
    Ok(McEstimate::from_values(&values, Some(exact)))
}

/// `E_μ₀[W_{z1} W_{z2}]` against `⟨z1, z2⟩`.
pub fn mc_white_noise_isometry(
    measure: &GaussianMeasure,
    z1: &[f64],
    z2: &[f64],
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    let dim = measure.dim();
    check_len(z1, dim)?;
    check_len(z2, dim)?;
    let cov = measure.cov();
    let project = |z: &[f64]| -> Vec<f64> {
        let zc = cov.basis().tr_mul(&DVector::from_column_slice(z));
        let scaled = DVector::from_iterator(dim, zc.iter().zip(cov.eigenvalues()).map(|(c, l)| c / l.sqrt()));
        (cov.basis() * scaled).iter().copied().collect()
    };
    let (w1, w2) = (project(z1), project(z2));
    let mean: Vec<f64> = measure.mean().iter().copied().collect();
    let exact: f64 = z1.iter().zip(z2).map(|(a, b)| a * b).sum();
    let sampler = Sampler::new(measure);
    let values = sampler.evaluate(cfg, |x, _| {
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..x.len() {
            let c = x[k] - mean[k];
            a += c * w1[k];
            b += c * w2[k];
        }
        a * b
    });
    Ok(McEstimate::from_values(&values, Some(exact)))
}

/// `E_μ[D log(dμ/dμ₀)·v]`, which vanishes.
pub fn mc_score_mean(c0: &CovarianceModel, s: &PerturbationS, v: &SymMatrix, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    let score = RnScore::new(c0, s, v)?;
    let sampler = Sampler::new(&perturbed_measure(c0, s)?);
    let values = sampler.evaluate(cfg, |x, y| score.eval(x, y));
    Ok(McEstimate::from_values(&values, Some(0.0)))
}

/// `E_μ[dμ₀/dμ] = 1`.
pub fn mc_change_of_measure(c0: &CovarianceModel, s: &PerturbationS, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    let rn = RnDensity::new(c0, s)?;
    let sampler = Sampler::new(&perturbed_measure(c0, s)?);
    let values = sampler.evaluate(cfg, |x, y| (-rn.eval(x, y)).exp());
    Ok(McEstimate::from_values(&values, Some(1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationStep {
    pub dim: usize,
    pub next_dim: usize,
    /// Estimate of `E_μ[(D_next − D_dim)²]`.
    pub sq_diff: McEstimate,
}

/// Scores truncated to the leading `n` eigen-coordinates of `C0`, for each
/// `n` in `dims`, compared in `L²(μ)` between consecutive truncations.
///
/// `s` and `v` are restricted by taking leading blocks of `EᵀSE` and `EᵀVE`.
pub fn truncation_l2_sweep(
    c0: &CovarianceModel,
    s: &PerturbationS,
    v: &SymMatrix,
    dims: &[usize],
    cfg: &McConfig,
) -> Result<Vec<TruncationStep>> {
    cfg.check(MIN_ESTIMATE_SAMPLES)?;
    let dim = c0.dim();
    s.as_sym().check_dim(dim)?;
    v.check_dim(dim)?;
    if dims.len() < 2 {
        return Err(Error::InvalidArgument("need at least two truncation dimensions".into()));
    }
    if dims.windows(2).any(|w| w[0] >= w[1]) || dims[0] == 0 || dims[dims.len() - 1] > dim {
        return Err(Error::InvalidArgument(format!(
            "truncation dimensions must be strictly ascending within 1..={dim}"
        )));
    }
    let e = c0.basis();
    let s_e = e.transpose() * s.as_sym().as_matrix() * e;
    let v_e = e.transpose() * v.as_matrix() * e;
    let scores: Vec<RnScore> = dims
        .iter()
        .map(|&n| {
            let block = |m: &DMatrix<f64>| SymMatrix::new(m.view((0, 0), (n, n)).into_owned());
            let c0_n = CovarianceModel::diagonal(c0.eigenvalues()[..n].to_vec())?;
            RnScore::new(&c0_n, &PerturbationS::new(block(&s_e)?)?, &block(&v_e)?)
        })
        .collect::<Result<_>>()?;
    let wfull = whitener(c0);
    let sampler = Sampler::new(&perturbed_measure(c0, s)?);
    // Unwhitened leading eigen-coordinates: x_n = Λ_n^{1/2} y_n.
    let sqrt_l: Vec<f64> = c0.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let mut steps = Vec::with_capacity(dims.len() - 1);
    for (j, w) in dims.windows(2).enumerate() {
        let (lo, hi) = (&scores[j], &scores[j + 1]);
        let values = sampler.evaluate(cfg, |x, y| {
            mat_vec(&wfull, x, y);
            let xe: Vec<f64> = y.iter().zip(&sqrt_l).map(|(a, b)| a * b).collect();
            let mut scratch = vec![0.0; w[1]];
            let d_hi = hi.eval(&xe[..w[1]], &mut scratch);
            let d_lo = lo.eval(&xe[..w[0]], &mut scratch[..w[0]]);
            (d_hi - d_lo).powi(2)
        });
        steps.push(TruncationStep {
            dim: w[0],
            next_dim: w[1],
            sq_diff: McEstimate::from_values(&values, None),
        });
    }
    Ok(steps)
}
