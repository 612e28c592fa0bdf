//! Riemannian structure of the covariance manifold under the Fisher–Rao
//! metric `½ tr(Σ^{-1/2} A Σ^{-1} B Σ^{-1/2})`: geodesics, exponential and
//! logarithm maps, distance, Levi-Civita connection and curvature.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fisherrao::metric_sigma;
use crate::symkernels::{eigh, whiten, EigenDecomposition, SpdMatrix, SymMatrix};

/// Symmetric direction attached to a base point.
#[derive(Clone, Debug)]
pub struct TangentVector {
    base_point: SpdMatrix,
    direction: SymMatrix,
}

impl TangentVector {
    pub fn new(base_point: SpdMatrix, direction: SymMatrix) -> Result<Self> {
        direction.check_dim(base_point.dim())?;
        Ok(TangentVector {
            base_point,
            direction,
        })
    }

    pub fn base_point(&self) -> &SpdMatrix {
        &self.base_point
    }

    pub fn direction(&self) -> &SymMatrix {
        &self.direction
    }

    pub fn exp(&self) -> Result<SpdMatrix> {
        exp_map(&self.base_point, &self.direction)
    }

    /// Riemannian norm at the base point.
    pub fn norm(&self) -> Result<f64> {
        Ok(metric_sigma(&self.base_point, &self.direction, &self.direction)?.sqrt())
    }
}

/// Spectral form of the geodesic from `a` to `b`:
/// `γ(t) = A^{1/2} Q diag(λ^t) Qᵀ A^{1/2}` with `QΛQᵀ = A^{-1/2} B A^{-1/2}`.
pub(crate) struct GeodesicPath {
    root: DMatrix<f64>,
    whitened: EigenDecomposition,
}

impl GeodesicPath {
    pub(crate) fn new(a: &SpdMatrix, b: &SpdMatrix) -> Result<Self> {
        let m = if a.as_matrix() == b.as_matrix() {
            SymMatrix::identity(a.dim())
        } else {
            whiten(a, b.as_sym())?
        };
        let whitened = eigh(&m)?;
        if whitened.min() <= 0.0 {
            return Err(Error::Domain {
                op: "geodesic",
                eigenvalue: whitened.min(),
                requirement: "A^{-1/2} B A^{-1/2} must be positive definite",
            });
        }
        Ok(GeodesicPath {
            root: a.sqrt().into_matrix(),
            whitened,
        })
    }

    fn lift(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        self.whitened
            .map(f)
            .congruence(&self.root)
            .expect("dimensions agree by construction")
    }

    pub(crate) fn point(&self, t: f64) -> SymMatrix {
        self.lift(|l| (t * l.ln()).exp())
    }

    /// `A^{1/2} exp(tL) L A^{1/2}`
    pub(crate) fn velocity(&self, t: f64) -> SymMatrix {
        self.lift(|l| {
            let log = l.ln();
            (t * log).exp() * log
        })
    }

    /// `‖L‖_HS` with `L = log(A^{-1/2} B A^{-1/2})`.
    pub(crate) fn log_norm(&self) -> f64 {
        self.whitened
            .eigenvalues()
            .iter()
            .map(|l| l.ln().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `A^{1/2} exp[t log(A^{-1/2} B A^{-1/2})] A^{1/2}`; any real `t`.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be finite, got {t}")));
    }
    let path = GeodesicPath::new(a, b)?;
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    SpdMatrix::new(path.point(t))
}

/// `A^{1/2} exp(A^{-1/2} V A^{-1/2}) A^{1/2}`
pub fn exp_map(a: &SpdMatrix, v: &SymMatrix) -> Result<SpdMatrix> {
    let whitened = whiten(a, v)?;
    let e = eigh(&whitened)?.map(f64::exp);
    SpdMatrix::new(e.congruence(a.sqrt().as_matrix())?)
}

/// `A^{1/2} log(A^{-1/2} B A^{-1/2}) A^{1/2}`, a tangent vector at `a`.
pub fn log_map(a: &SpdMatrix, b: &SpdMatrix) -> Result<TangentVector> {
    let path = GeodesicPath::new(a, b)?;
    TangentVector::new(a.clone(), path.velocity(0.0))
}

/// `(1/√2) ‖log(A^{-1/2} B A^{-1/2})‖_HS`
pub fn fisher_rao_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    Ok(GeodesicPath::new(a, b)?.log_norm() / std::f64::consts::SQRT_2)
}

/// Non-derivative part of the Levi-Civita connection:
/// `−½ (X P^{-1} Y + Y P^{-1} X)`. Exactly symmetric in `(x, y)`.
pub fn connection_gamma(p: &SpdMatrix, x: &SymMatrix, y: &SymMatrix) -> Result<SymMatrix> {
    x.check_dim(p.dim())?;
    y.check_dim(p.dim())?;
    let inv = p.inv();
    let xy = x.as_matrix() * inv.as_matrix() * y.as_matrix();
    let yx = y.as_matrix() * inv.as_matrix() * x.as_matrix();
    Ok(SymMatrix::from_symmetric_unchecked((xy + yx) * -0.5))
}

/// `(∇_X Y)(P) = D(Y)(P)[X] + Γ_P(X, Y(P))`, with the Fréchet derivative of
/// the field taken by a central difference of step `fd_step`.
pub fn covariant_derivative<F>(
    p: &SpdMatrix,
    field: F,
    x: &SymMatrix,
    fd_step: f64,
) -> Result<SymMatrix>
where
    F: Fn(&SpdMatrix) -> Result<SymMatrix>,
{
    x.check_dim(p.dim())?;
    let derivative = directional_derivative(p, &field, x, fd_step)?;
    let gamma = connection_gamma(p, x, &field(p)?)?;
    Ok(&derivative + &gamma)
}

/// Central difference `(Y(P + hX) − Y(P − hX)) / 2h`.
pub fn directional_derivative<F>(p: &SpdMatrix, field: &F, x: &SymMatrix, h: f64) -> Result<SymMatrix>
where
    F: Fn(&SpdMatrix) -> Result<SymMatrix>,
{
    let shifted = |sign: f64| -> Result<SpdMatrix> {
        SpdMatrix::new(p.as_sym() + &(x * (sign * h))).map_err(|_| Error::StencilFailure { offset: h })
    };
    let plus = field(&shifted(1.0)?)?;
    let minus = field(&shifted(-1.0)?)?;
    Ok(&(&plus - &minus) * (0.5 / h))
}

/// `[a, b]` by plain loops, so that swapping the operands negates the result
/// bit for bit.
fn commutator_exact(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut prod = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[(i, k)] * b[(k, j)];
            }
            prod[(i, j)] = acc;
        }
    }
    &prod - prod.transpose()
}

/// `[R(X, Y)Z](P) = −¼ P^{1/2} [[X̃, Ỹ], Z̃] P^{1/2}` with `X̃ = P^{-1/2} X P^{-1/2}`.
pub fn curvature_tensor(p: &SpdMatrix, x: &SymMatrix, y: &SymMatrix, z: &SymMatrix) -> Result<SymMatrix> {
    let xt = whiten(p, x)?;
    let yt = whiten(p, y)?;
    let zt = whiten(p, z)?;
    let k = commutator_exact(xt.as_matrix(), yt.as_matrix());
    let kz = &k * zt.as_matrix();
    let zk = zt.as_matrix() * &k;
    let inner = SymMatrix::from_symmetric_unchecked((kz - zk) * -0.25);
    inner.congruence(p.sqrt().as_matrix())
}

/// Sectional curvature of the plane spanned by `x`, `y` at `p`:
/// `−tr(X̃²Ỹ² − (X̃Ỹ)²) / (tr(X̃²) tr(Ỹ²) − tr(X̃Ỹ)²)`.
///
/// The numerator is evaluated as `½‖[X̃, Ỹ]‖²_HS`, which equals the trace
/// expression.
pub fn sectional_curvature(p: &SpdMatrix, x: &SymMatrix, y: &SymMatrix) -> Result<f64> {
    let xt = whiten(p, x)?;
    let yt = whiten(p, y)?;
    let xx = xt.as_matrix().norm_squared();
    let yy = yt.as_matrix().norm_squared();
    let xy = xt.as_matrix().dot(yt.as_matrix());
    let den = xx * yy - xy * xy;
    let floor = 1e-12 * xx * yy;
    if !(den > floor) {
        return Err(Error::DegeneratePlane {
            denominator: den,
            floor,
        });
    }
    let num = 0.5 * commutator_exact(xt.as_matrix(), yt.as_matrix()).norm_squared();
    Ok(-num / den)
}

/// Largest relative residual `‖γ̈ − γ̇ γ^{-1} γ̇‖_F / ‖γ‖_F` of the geodesic
/// equation over `t_samples ⊂ (0, 1)`, derivatives by central differences.
pub fn geodesic_ode_residual(a: &SpdMatrix, b: &SpdMatrix, t_samples: &[f64], fd_step: f64) -> Result<f64> {
    if t_samples.is_empty() {
        return Err(Error::Empty("t_samples"));
    }
    if let Some(bad) = t_samples.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidArgument(format!("t sample {bad} outside (0, 1)")));
    }
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::InvalidArgument(format!("fd_step must be positive, got {fd_step}")));
    }
    let path = GeodesicPath::new(a, b)?;
    let mut worst: f64 = 0.0;
    for &t in t_samples {
        let g = path.point(t);
        let plus = path.point(t + fd_step);
        let minus = path.point(t - fd_step);
        let vel = (plus.as_matrix() - minus.as_matrix()) / (2.0 * fd_step);
        let acc = (plus.as_matrix() - g.as_matrix() * 2.0 + minus.as_matrix()) / (fd_step * fd_step);
        let g_spd = SpdMatrix::new(g).map_err(|_| Error::StencilFailure { offset: fd_step })?;
        let quad = &vel * g_spd.inv().as_matrix() * &vel;
        let r = (acc - quad).norm() / g_spd.as_matrix().norm();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre three-term recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    if n == 0 {
        return (nodes, weights);
    }
    // (P_n(x), P_n'(x))
    let legendre = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let (p, pm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
        (p, n as f64 * (x * p - pm1) / (x * x - 1.0))
    };
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Length of the geodesic from `a` to `b` by Gauss–Legendre quadrature of
/// the Riemannian speed, with the velocity computed in closed form.
pub fn curve_length(a: &SpdMatrix, b: &SpdMatrix, quadrature_order: usize) -> Result<f64> {
    if quadrature_order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
    }
    let path = GeodesicPath::new(a, b)?;
    let (nodes, weights) = gauss_legendre(quadrature_order);
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        let t = 0.5 * (x + 1.0);
        let g = SpdMatrix::new(path.point(t))?;
        let v = path.velocity(t);
        total += 0.5 * w * metric_sigma(&g, &v, &v)?.max(0.0).sqrt();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> SymMatrix {
        SymMatrix::from_diagonal(v).unwrap()
    }

    fn spd(v: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(v).unwrap()
    }

    fn dense_spd(seed: f64, n: usize) -> SpdMatrix {
        let a = DMatrix::from_fn(n, n, |i, j| ((i * n + j) as f64 * seed).sin());
        SpdMatrix::new(SymMatrix::new(&a * a.transpose() + DMatrix::identity(n, n)).unwrap()).unwrap()
    }

    fn dense_sym(seed: f64, n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| ((i + 2 * j) as f64 * seed + 0.3).cos()).unwrap()
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let a = dense_spd(0.7, 4);
        let b = dense_spd(1.3, 4);
        assert!(geodesic(&a, &b, 0.0).unwrap().as_sym().max_abs_diff(a.as_sym()) < 1e-10);
        assert!(geodesic(&a, &b, 1.0).unwrap().as_sym().max_abs_diff(b.as_sym()) < 1e-10);
        let m1 = geodesic(&a, &b, 0.5).unwrap();
        let m2 = geodesic(&b, &a, 0.5).unwrap();
        assert!(m1.as_sym().max_abs_diff(m2.as_sym()) < 1e-9);
        let g = geodesic(&SpdMatrix::identity(2), &spd(&[4.0, 1.0]), 0.5).unwrap();
        assert!(g.as_sym().max_abs_diff(&d(&[2.0, 1.0])) < 1e-14);
    }

    #[test]
    fn geodesic_extrapolates() {
        let g = geodesic(&SpdMatrix::identity(1), &spd(&[4.0]), 2.0).unwrap();
        assert_abs_diff_eq!(g.as_sym().get(0, 0), 16.0, epsilon = 1e-12);
        let g = geodesic(&SpdMatrix::identity(1), &spd(&[4.0]), -1.0).unwrap();
        assert_abs_diff_eq!(g.as_sym().get(0, 0), 0.25, epsilon = 1e-14);
    }

    #[test]
    fn exp_log_examples() {
        let a = dense_spd(0.4, 3);
        assert!(exp_map(&a, &SymMatrix::zeros(3)).unwrap().as_sym().max_abs_diff(a.as_sym()) < 1e-12);
        let e = exp_map(&SpdMatrix::identity(2), &d(&[1.0, 0.0])).unwrap();
        assert!(e.as_sym().max_abs_diff(&d(&[std::f64::consts::E, 1.0])) < 1e-14);
        let b = dense_spd(0.9, 3);
        let v = log_map(&a, &b).unwrap();
        assert!(v.exp().unwrap().as_sym().max_abs_diff(b.as_sym()) < 1e-9);
        assert!(log_map(&a, &a).unwrap().direction().frobenius_norm() < 1e-12);
        let l = log_map(&SpdMatrix::identity(2), &spd(&[std::f64::consts::E, 1.0])).unwrap();
        assert!(l.direction().max_abs_diff(&d(&[1.0, 0.0])) < 1e-14);
    }

    #[test]
    fn tangent_norm_is_distance() {
        let a = dense_spd(0.4, 3);
        let b = dense_spd(0.9, 3);
        let v = log_map(&a, &b).unwrap();
        assert_abs_diff_eq!(v.norm().unwrap(), fisher_rao_distance(&a, &b).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn distance_examples() {
        let a = dense_spd(0.2, 3);
        assert!(fisher_rao_distance(&a, &a).unwrap() < 1e-14);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(
            fisher_rao_distance(&SpdMatrix::identity(2), &spd(&[e, e])).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            fisher_rao_distance(&spd(&[1.0, 1.0]), &spd(&[4.0, 1.0])).unwrap(),
            4f64.ln() / 2f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(4f64.ln() / 2f64.sqrt(), 0.98026, epsilon = 1e-5);
    }

    #[test]
    fn connection_examples() {
        let i2 = SymMatrix::identity(2);
        let g = connection_gamma(&SpdMatrix::identity(2), &i2, &i2).unwrap();
        assert!(g.max_abs_diff(&-&i2) < 1e-15);
        let p = spd(&[2.0, 1.0]);
        let x = d(&[2.0, 0.0]);
        let g = connection_gamma(&p, &x, &x).unwrap();
        assert!(g.max_abs_diff(&d(&[-2.0, 0.0])) < 1e-15);
        let q = dense_spd(0.5, 4);
        let (x, y) = (dense_sym(0.3, 4), dense_sym(0.8, 4));
        assert_eq!(connection_gamma(&q, &x, &y).unwrap(), connection_gamma(&q, &y, &x).unwrap());
    }

    #[test]
    fn covariant_derivative_of_constant_field() {
        let p = dense_spd(0.5, 3);
        let y0 = dense_sym(0.2, 3);
        let x = dense_sym(0.7, 3);
        let c = covariant_derivative(&p, |_| Ok(y0.clone()), &x, 1e-4).unwrap();
        let g = connection_gamma(&p, &x, &y0).unwrap();
        assert!(c.max_abs_diff(&g) < 1e-10);
    }

    #[test]
    fn covariant_derivative_of_position_field_vanishes() {
        let p = dense_spd(0.5, 3);
        let x = dense_sym(0.7, 3);
        let c = covariant_derivative(&p, |q| Ok(q.as_sym().clone()), &x, 1e-4).unwrap();
        assert!(c.frobenius_norm() < 1e-6);
    }

    #[test]
    fn covariant_derivative_stencil_failure() {
        let p = SpdMatrix::identity(2);
        let x = d(&[-1.0, 0.0]);
        let err = covariant_derivative(&p, |q| Ok(q.as_sym().clone()), &x, 1.5).unwrap_err();
        assert!(matches!(err, Error::StencilFailure { .. }));
    }

    #[test]
    fn curvature_worked_example() {
        let x = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let y = d(&[1.0, -1.0]);
        let r = curvature_tensor(&SpdMatrix::identity(2), &x, &y, &x).unwrap();
        assert_eq!(r, d(&[1.0, -1.0]));
        let k = sectional_curvature(&SpdMatrix::identity(2), &d(&[1.0, -1.0]), &x).unwrap();
        assert_eq!(k, -1.0);
    }

    #[test]
    fn curvature_commuting_directions() {
        let p = dense_spd(0.3, 3);
        let x = p.as_sym().clone();
        let y = dense_sym(0.9, 3);
        let r = curvature_tensor(&p, &x, &y, &dense_sym(0.4, 3)).unwrap();
        assert!(r.frobenius_norm() < 1e-12);
        let k = sectional_curvature(&p, &x, &y).unwrap();
        assert!(k.abs() < 1e-12);
    }

    #[test]
    fn curvature_antisymmetry_exact() {
        let p = dense_spd(0.6, 4);
        let (x, y, z) = (dense_sym(0.1, 4), dense_sym(0.5, 4), dense_sym(0.9, 4));
        let a = curvature_tensor(&p, &x, &y, &z).unwrap();
        let b = curvature_tensor(&p, &y, &x, &z).unwrap();
        assert_eq!(a, -&b);
    }

    #[test]
    fn sectional_matches_tensor() {
        let p = dense_spd(0.6, 4);
        let (x, y) = (dense_sym(0.1, 4), dense_sym(0.5, 4));
        let ryy = curvature_tensor(&p, &x, &y, &y).unwrap();
        let num = metric_sigma(&p, &ryy, &x).unwrap();
        let den = metric_sigma(&p, &x, &x).unwrap() * metric_sigma(&p, &y, &y).unwrap()
            - metric_sigma(&p, &x, &y).unwrap().powi(2);
        let k = sectional_curvature(&p, &x, &y).unwrap();
        assert_abs_diff_eq!(num / den, k, epsilon = 1e-12);
    }

    #[test]
    fn sectional_literal_trace_form() {
        let p = dense_spd(0.8, 3);
        let (x, y) = (dense_sym(0.2, 3), dense_sym(0.45, 3));
        let xt = whiten(&p, &x).unwrap().into_matrix();
        let yt = whiten(&p, &y).unwrap().into_matrix();
        let x2 = &xt * &xt;
        let y2 = &yt * &yt;
        let xy = &xt * &yt;
        let num = (&x2 * &y2).trace() - (&xy * &xy).trace();
        let den = x2.trace() * y2.trace() - xy.trace().powi(2);
        let k = sectional_curvature(&p, &x, &y).unwrap();
        assert_abs_diff_eq!(k, -num / den, epsilon = 1e-12);
    }

    #[test]
    fn sectional_degenerate_plane() {
        let p = SpdMatrix::identity(2);
        let x = d(&[1.0, 2.0]);
        let err = sectional_curvature(&p, &x, &(&x * 3.0)).unwrap_err();
        assert!(matches!(err, Error::DegeneratePlane { .. }));
    }

    #[test]
    fn ode_residual_cases() {
        let a = dense_spd(0.3, 3);
        assert_eq!(geodesic_ode_residual(&a, &a, &[0.5], 1e-4).unwrap(), 0.0);
        let r = geodesic_ode_residual(&spd(&[1.0, 2.0, 0.5]), &spd(&[3.0, 0.4, 2.0]), &[0.2, 0.5, 0.8], 1e-4).unwrap();
        assert!(r <= 1e-6, "{r}");
        assert!(geodesic_ode_residual(&a, &a, &[1.0], 1e-4).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert_abs_diff_eq!(q, exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn curve_length_cases() {
        let a = dense_spd(0.3, 3);
        assert_eq!(curve_length(&a, &a, 8).unwrap(), 0.0);
        let b = dense_spd(0.75, 3);
        let l16 = curve_length(&a, &b, 16).unwrap();
        let l32 = curve_length(&a, &b, 32).unwrap();
        assert_abs_diff_eq!(l16, fisher_rao_distance(&a, &b).unwrap(), epsilon = 1e-10);
        assert!((l16 - l32).abs() < 1e-10);
    }
}
