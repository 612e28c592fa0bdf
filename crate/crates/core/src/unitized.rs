//! Unitized Hilbert–Schmidt operators `A + γI` and the regularized
//! affine-invariant distance between them.
//!
//! The block `A` lives on the truncation; the scalar `γ` acts on the whole
//! space, including the complement of the truncation, where the whitened
//! operator is exactly `(μ/γ) I`. That complement is carried as a scalar
//! and never padded into a matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussmodel::csv::{format_f64, write_table};
use crate::manifold::fisher_rao_distance;
use crate::symkernels::{eigh, hs_norm, whiten, SpdMatrix, SymMatrix};

/// `block + tail · I`
#[derive(Clone, Debug, PartialEq)]
pub struct UnitizedOperator {
    pub block: SymMatrix,
    pub tail: f64,
}

/// `‖A + γI‖²_{HS_X} = ‖A‖²_HS + γ²`
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtendedNorm {
    pub hs_part: f64,
    pub scalar_part: f64,
    pub total: f64,
}

impl UnitizedOperator {
    pub fn new(block: SymMatrix, tail: f64) -> Result<Self> {
        if !tail.is_finite() {
            return Err(Error::InvalidArgument(format!("tail must be finite, got {tail}")));
        }
        Ok(UnitizedOperator { block, tail })
    }

    pub fn dim(&self) -> usize {
        self.block.dim()
    }

    /// `block + tail · I_n` as a dense positive-definite matrix, after
    /// checking `tail > 0`.
    pub fn positive_part(&self) -> Result<SpdMatrix> {
        if !(self.tail > 0.0) {
            return Err(Error::Domain {
                op: "unitized operator",
                eigenvalue: self.tail,
                requirement: "scalar part must be > 0",
            });
        }
        SpdMatrix::new(self.block.shifted(self.tail))
    }
}

pub fn hsx_norm(u: &UnitizedOperator) -> ExtendedNorm {
    let hs_part = hs_norm(&u.block);
    let scalar_part = u.tail;
    ExtendedNorm {
        hs_part,
        scalar_part,
        total: hs_part.hypot(scalar_part),
    }
}

/// Whitened log `log[(A+γI)^{-1/2}(B+μI)(A+γI)^{-1/2}]` split into its
/// Hilbert–Schmidt block and scalar part `log(μ/γ)`.
fn whitened_log(u: &UnitizedOperator, w: &UnitizedOperator) -> Result<UnitizedOperator> {
    w.block.check_dim(u.dim())?;
    let a = u.positive_part()?;
    let b = w.positive_part()?;
    let scalar = (w.tail / u.tail).ln();
    let log = eigh(&whiten(&a, b.as_sym())?)?.map(f64::ln);
    UnitizedOperator::new(log.shifted(-scalar), scalar)
}

/// `‖log[(A+γI)^{-1/2}(B+μI)(A+γI)^{-1/2}]‖_{HS_X}`
pub fn daihs_distance(u: &UnitizedOperator, w: &UnitizedOperator) -> Result<f64> {
    Ok(hsx_norm(&whitened_log(u, w)?).total)
}

/// `(A+γI)^{1/2} exp[t log(...)] (A+γI)^{1/2}`, with scalar part
/// `γ^{1−t} μ^t`.
pub fn unitized_geodesic(u: &UnitizedOperator, w: &UnitizedOperator, t: f64) -> Result<UnitizedOperator> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite, got {t}")));
    }
    w.block.check_dim(u.dim())?;
    let a = u.positive_part()?;
    let b = w.positive_part()?;
    let interior = eigh(&whiten(&a, b.as_sym())?)?.map(|l| (t * l.ln()).exp());
    let full = interior.congruence(a.sqrt().as_matrix())?;
    let tail = u.tail.powf(1.0 - t) * w.tail.powf(t);
    UnitizedOperator::new(full.shifted(-tail), tail)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaSweepRow {
    pub gamma: f64,
    pub d_aihs: f64,
    pub target: f64,
    pub abs_err: f64,
    pub ratio: f64,
}

/// `d_aiHS(A+γI, B+γI)` for each `γ` against `‖log(A^{-1/2} B A^{-1/2})‖_HS`.
///
/// `ratio` is `d_aiHS / (√2 · d_FR(A, B))`; it is reported as 1 when both
/// sides vanish.
pub fn gamma_sweep(a: &SpdMatrix, b: &SpdMatrix, gammas: &[f64]) -> Result<Vec<GammaSweepRow>> {
    b.as_sym().check_dim(a.dim())?;
    if gammas.is_empty() {
        return Err(Error::Empty("gammas"));
    }
    if let Some(bad) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument(format!("gamma {bad} must be positive")));
    }
    if gammas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument("gammas must be strictly descending".into()));
    }
    let target = hs_norm(&eigh(&whiten(a, b.as_sym())?)?.map(f64::ln));
    let scaled_fr = std::f64::consts::SQRT_2 * fisher_rao_distance(a, b)?;
    gammas
        .iter()
        .map(|&gamma| {
            let u = UnitizedOperator::new(a.as_sym().clone(), gamma)?;
            let w = UnitizedOperator::new(b.as_sym().clone(), gamma)?;
            let d_aihs = daihs_distance(&u, &w)?;
            let ratio = if scaled_fr == 0.0 && d_aihs == 0.0 {
                1.0
            } else {
                d_aihs / scaled_fr
            };
            Ok(GammaSweepRow {
                gamma,
                d_aihs,
                target,
                abs_err: (d_aihs - target).abs(),
                ratio,
            })
        })
        .collect()
}

pub const GAMMA_SWEEP_HEADER: [&str; 5] = ["gamma", "d_aihs", "target", "abs_err", "ratio"];

pub fn gamma_sweep_csv(rows: &[GammaSweepRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            [r.gamma, r.d_aihs, r.target, r.abs_err, r.ratio]
                .iter()
                .map(|&v| format_f64(v))
                .collect()
        })
        .collect();
    write_table(&GAMMA_SWEEP_HEADER, &body)
}
