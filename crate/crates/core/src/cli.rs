//! `frgauss` command-line runner. Every subcommand reads a JSON config,
//! writes CSV or JSON to `--out` (or stdout) and exits with 0 on success,
//! 1 on usage or config errors and 2 on numerical or data errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gaussmodel::csv::{format_f64, load_covariance_csv, load_matrix_csv, load_model, load_sym_csv, write_table};
use crate::gaussmodel::{
    build_from_kernel, build_from_samples, equivalence_report, feldman_hajek_s, uniform_grid, CovarianceModel,
    GaussianMeasure, Kernel, PerturbationS, Provenance, ReportConfig,
};
use crate::manifold::{curvature_tensor, fisher_rao_distance, geodesic, geodesic_ode_residual, sectional_curvature};
use crate::mcverify::{self, McConfig, McReport};
use crate::random::{random_orthogonal, random_perturbation, random_spd, random_sym, random_unit_vector, stream};
use crate::symkernels::{SpdMatrix, SymMatrix};
use crate::unitized::{daihs_distance, gamma_sweep, gamma_sweep_csv, UnitizedOperator};

#[derive(Parser, Debug)]
#[command(name = "frgauss", version, about = "Fisher-Rao geometry of Gaussian measures at finite truncation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct CommonArgs {
    /// JSON experiment config
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fisher-Rao and regularized affine-invariant distances for covariance pairs
    Distance(CommonArgs),
    /// Points on the geodesic between two covariances
    Geodesic(CommonArgs),
    /// Truncation-level equivalence report for two Gaussian measures
    Equivalence(CommonArgs),
    /// Regularized distance as the regularization parameter shrinks
    ConvergeGamma(CommonArgs),
    /// Monte-Carlo checks of the log-density identities
    McVerify(CommonArgs),
    /// Sectional curvature samples, Bianchi and geodesic-equation residuals
    Curvature(CommonArgs),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => m,
        }
    }

    fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() || matches!(e, Error::Parse { .. }) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Explicit matrix: `{"rows": [[..]]}`, `{"csv": "path"}` or `{"diag": [..]}`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSource {
    Rows(Vec<Vec<f64>>),
    Csv(PathBuf),
    Diag(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

/// Covariance operator at truncation.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    Matrix { source: MatrixSource },
    Kernel { kernel: Kernel, grid: GridSpec },
    Samples { csv: PathBuf, #[serde(default)] assume_centered: bool },
    Model { prefix: PathBuf },
    PowerLaw { dim: usize, exponent: f64, #[serde(default = "one")] scale: f64 },
    Scaled { base: Box<CovarianceSpec>, factor: f64 },
    /// `C0^{1/2} (I − S) C0^{1/2}`
    Perturbed { base: Box<CovarianceSpec>, s: MatrixSource },
    Random { dim: usize, #[serde(default = "one")] spread: f64, seed: u64 },
}

fn one() -> f64 {
    1.0
}

struct Resolver {
    root: PathBuf,
}

impl Resolver {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn matrix(&self, src: &MatrixSource) -> CliResult<SymMatrix> {
        Ok(match src {
            MatrixSource::Rows(rows) => SymMatrix::from_rows(rows)?,
            MatrixSource::Csv(p) => load_sym_csv(&self.path(p))?,
            MatrixSource::Diag(d) => SymMatrix::from_diagonal(d)?,
        })
    }

    fn covariance(&self, spec: &CovarianceSpec) -> CliResult<CovarianceModel> {
        Ok(match spec {
            CovarianceSpec::Matrix { source } => match source {
                MatrixSource::Csv(p) => load_covariance_csv(&self.path(p))?,
                other => CovarianceModel::from_spd(&SpdMatrix::new(self.matrix(other)?)?, Provenance::Explicit)?,
            },
            CovarianceSpec::Kernel { kernel, grid } => {
                build_from_kernel(kernel, &uniform_grid(grid.start, grid.end, grid.n))?
            }
            CovarianceSpec::Samples { csv, assume_centered } => {
                let m = load_matrix_csv(&self.path(csv))?;
                let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
                build_from_samples(&rows, *assume_centered)?
            }
            CovarianceSpec::Model { prefix } => load_model(&self.path(prefix))?,
            CovarianceSpec::PowerLaw { dim, exponent, scale } => CovarianceModel::power_law(*dim, *exponent, *scale)?,
            CovarianceSpec::Scaled { base, factor } => {
                let base = self.covariance(base)?;
                if !(*factor > 0.0 && factor.is_finite()) {
                    return Err(config_err(format!("scale factor must be positive, got {factor}")));
                }
                let eig = base.eigenvalues().iter().map(|l| l * factor).collect();
                CovarianceModel::from_spectrum(eig, base.basis().clone(), base.provenance())?
            }
            CovarianceSpec::Perturbed { base, s } => {
                let c0 = self.covariance(base)?;
                let s = PerturbationS::new(self.matrix(s)?)?;
                CovarianceModel::from_spd(&s.covariance(&c0)?, Provenance::Explicit)?
            }
            CovarianceSpec::Random { dim, spread, seed } => {
                if *dim == 0 {
                    return Err(config_err("random covariance needs dim >= 1"));
                }
                let p = random_spd(&mut stream(*seed, 0), *dim, *spread);
                CovarianceModel::from_spd(&p, Provenance::Explicit)?
            }
        })
    }

    fn spd(&self, spec: &CovarianceSpec) -> CliResult<SpdMatrix> {
        Ok(self.covariance(spec)?.to_spd()?)
    }
}

fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<(T, Resolver)> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let cfg = serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, Resolver { root }))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistancePair {
    #[serde(default)]
    id: Option<String>,
    a: CovarianceSpec,
    b: CovarianceSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistanceConfig {
    pairs: Vec<DistancePair>,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn cmd_distance(args: &CommonArgs) -> CliResult<(String, Option<PathBuf>)> {
    let (cfg, r): (DistanceConfig, _) = load_config(&args.config)?;
    if !(cfg.gamma >= 0.0 && cfg.gamma.is_finite()) {
        return Err(config_err(format!("gamma must be >= 0, got {}", cfg.gamma)));
    }
    let mut rows = Vec::new();
    for (k, pair) in cfg.pairs.iter().enumerate() {
        let id = pair.id.clone().unwrap_or_else(|| k.to_string());
        let a = r.spd(&pair.a).map_err(|e| e.context(&format!("pair {id}, operand a")))?;
        let b = r.spd(&pair.b).map_err(|e| e.context(&format!("pair {id}, operand b")))?;
        if a.dim() != b.dim() {
            return Err(CliError::Numerical(format!(
                "pair {id}: operand dimensions differ ({} vs {})",
                a.dim(),
                b.dim()
            )));
        }
        let d_fr = fisher_rao_distance(&a, &b).map_err(|e| CliError::from(e).context(&format!("pair {id}")))?;
        let d_aihs = if cfg.gamma > 0.0 {
            let u = UnitizedOperator::new(a.as_sym().clone(), cfg.gamma)?;
            let w = UnitizedOperator::new(b.as_sym().clone(), cfg.gamma)?;
            format_f64(daihs_distance(&u, &w).map_err(|e| CliError::from(e).context(&format!("pair {id}")))?)
        } else {
            String::new()
        };
        rows.push(vec![id, format_f64(d_fr), d_aihs, format_f64(cfg.gamma)]);
    }
    Ok((write_table(&["pair_id", "d_fisher_rao", "d_aihs", "gamma"], &rows), cfg.out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeodesicConfig {
    a: CovarianceSpec,
    b: CovarianceSpec,
    t: Vec<f64>,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn cmd_geodesic(args: &CommonArgs) -> CliResult<(String, Option<PathBuf>)> {
    let (cfg, r): (GeodesicConfig, _) = load_config(&args.config)?;
    let a = r.spd(&cfg.a).map_err(|e| e.context("operand a"))?;
    let b = r.spd(&cfg.b).map_err(|e| e.context("operand b"))?;
    if cfg.t.is_empty() {
        return Err(config_err("t must list at least one value"));
    }
    let n = a.dim();
    let mut header = vec!["t".to_string(), "label".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("m_{i}_{j}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for &t in &cfg.t {
        let p = geodesic(&a, &b, t)?;
        let label = if (0.0..=1.0).contains(&t) { "interpolate" } else { "extrapolate" };
        let mut row = vec![format_f64(t), label.to_string()];
        row.extend(p.as_sym().to_row_major().into_iter().map(format_f64));
        rows.push(row);
    }
    Ok((write_table(&header_refs, &rows), cfg.out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureSpec {
    cov: CovarianceSpec,
    #[serde(default)]
    mean: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EquivalenceConfig {
    mu0: MeasureSpec,
    mu1: MeasureSpec,
    #[serde(default)]
    sweep_dims: Option<Vec<usize>>,
    #[serde(default)]
    report: ReportConfig,
    #[serde(default = "yes")]
    include_s: bool,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

fn measure(r: &Resolver, spec: &MeasureSpec) -> CliResult<GaussianMeasure> {
    let cov = r.covariance(&spec.cov)?;
    Ok(match &spec.mean {
        Some(m) => GaussianMeasure::new(DVector::from_column_slice(m), cov)?,
        None => GaussianMeasure::centered(cov),
    })
}

fn cmd_equivalence(args: &CommonArgs) -> CliResult<(String, Option<PathBuf>)> {
    let (cfg, r): (EquivalenceConfig, _) = load_config(&args.config)?;
    let mu0 = measure(&r, &cfg.mu0).map_err(|e| e.context("mu0"))?;
    let mu1 = measure(&r, &cfg.mu1).map_err(|e| e.context("mu1"))?;
    let mut report = equivalence_report(&mu0, &mu1, cfg.sweep_dims.as_deref(), &cfg.report)?;
    if !cfg.include_s {
        report.s = None;
    }
    Ok((to_json(&report), cfg.out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaConfig {
    a: CovarianceSpec,
    b: CovarianceSpec,
    gammas: Vec<f64>,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn cmd_converge_gamma(args: &CommonArgs) -> CliResult<(String, Option<PathBuf>)> {
    let (cfg, r): (GammaConfig, _) = load_config(&args.config)?;
    let a = r.spd(&cfg.a).map_err(|e| e.context("operand a"))?;
    let b = r.spd(&cfg.b).map_err(|e| e.context("operand b"))?;
    let rows = gamma_sweep(&a, &b, &cfg.gammas)?;
    Ok((gamma_sweep_csv(&rows), cfg.out))
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum McCheck {
    FisherMetric,
    Lognorm,
    LognormMu0,
    Quadratic,
    WhiteNoise,
    ScoreMean,
    ChangeOfMeasure,
}

impl McCheck {
    const ALL: [McCheck; 7] = [
        McCheck::FisherMetric,
        McCheck::Lognorm,
        McCheck::LognormMu0,
        McCheck::Quadratic,
        McCheck::WhiteNoise,
        McCheck::ScoreMean,
        McCheck::ChangeOfMeasure,
    ];

    fn name(self) -> &'static str {
        match self {
            McCheck::FisherMetric => "fisher_metric",
            McCheck::Lognorm => "lognorm",
            McCheck::LognormMu0 => "lognorm_mu0",
            McCheck::Quadratic => "quadratic",
            McCheck::WhiteNoise => "white_noise",
            McCheck::ScoreMean => "score_mean",
            McCheck::ChangeOfMeasure => "change_of_measure",
        }
    }
}

/// `S` for the Monte-Carlo suite.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    Zero,
    Matrix { source: MatrixSource },
    Random { radius: f64 },
    /// `I − C0^{-1/2} C1 C0^{-1/2}`
    Between { c1: CovarianceSpec },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct McVerifyConfig {
    c0: CovarianceSpec,
    #[serde(default = "zero_s")]
    s: PerturbationSpec,
    n_samples: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "three")]
    confidence_sigmas: f64,
    #[serde(default)]
    checks: Option<Vec<McCheck>>,
    #[serde(default)]
    v1: Option<MatrixSource>,
    #[serde(default)]
    v2: Option<MatrixSource>,
    #[serde(default)]
    a: Option<MatrixSource>,
    #[serde(default)]
    b: Option<MatrixSource>,
    #[serde(default)]
    z1: Option<Vec<f64>>,
    #[serde(default)]
    z2: Option<Vec<f64>>,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn zero_s() -> PerturbationSpec {
    PerturbationSpec::Zero
}

fn three() -> f64 {
    3.0
}

/// Stream indices for directions drawn from the seed, kept clear of the
/// sampling streams.
const DIRECTION_STREAM: u64 = 1 << 40;

fn cmd_mc_verify(args: &CommonArgs) -> CliResult<(String, Option<PathBuf>)> {
    let (cfg, r): (McVerifyConfig, _) = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let mc = McConfig {
        n_samples: cfg.n_samples,
        seed,
        confidence_sigmas: cfg.confidence_sigmas,
    };
    let c0 = r.covariance(&cfg.c0).map_err(|e| e.context("c0"))?;
    let dim = c0.dim();
    let mut dir_rng = stream(seed, DIRECTION_STREAM);
    let s = match &cfg.s {
        PerturbationSpec::Zero => PerturbationS::zero(dim),
        PerturbationSpec::Matrix { source } => PerturbationS::new(r.matrix(source)?)?,
        PerturbationSpec::Random { radius } => {
            if !(*radius > 0.0 && *radius < 1.0) {
                return Err(config_err(format!("radius must lie in (0, 1), got {radius}")));
            }
            random_perturbation(&mut dir_rng, dim, *radius)
        }
        PerturbationSpec::Between { c1 } => feldman_hajek_s(&c0, &r.covariance(c1).map_err(|e| e.context("c1"))?)?,
    };
    let mut sym = |src: &Option<MatrixSource>| -> CliResult<SymMatrix> {
        match src {
            Some(src) => r.matrix(src),
            None => Ok(random_sym(&mut dir_rng, dim, 1.0)),
        }
    };
    let (v1, v2, a, b) = (sym(&cfg.v1)?, sym(&cfg.v2)?, sym(&cfg.a)?, sym(&cfg.b)?);
    let mut vector = |v: &Option<Vec<f64>>| v.clone().unwrap_or_else(|| random_unit_vector(&mut dir_rng, dim));
    let (z1, z2) = (vector(&cfg.z1), vector(&cfg.z2));

    let mu0 = GaussianMeasure::centered(c0.clone());
    let checks = cfg.checks.clone().unwrap_or_else(|| McCheck::ALL.to_vec());
    let mut reports: Vec<McReport> = Vec::new();
    for check in checks {
        let est = match check {
            McCheck::FisherMetric => mcverify::mc_fisher_metric(&c0, &s, &v1, &v2, &mc),
            McCheck::Lognorm => mcverify::mc_lognorm_identity(&c0, &s, &mc),
            McCheck::LognormMu0 => mcverify::mc_lognorm_identity_mu0(&c0, &s, &mc),
            McCheck::Quadratic => mcverify::mc_quadratic_identity(&c0, &a, &b, &mc),
            McCheck::WhiteNoise => mcverify::mc_white_noise_isometry(&mu0, &z1, &z2, &mc),
            McCheck::ScoreMean => mcverify::mc_score_mean(&c0, &s, &v1, &mc),
            McCheck::ChangeOfMeasure => mcverify::mc_change_of_measure(&c0, &s, &mc),
        }
        .map_err(|e| CliError::from(e).context(check.name()))?;
        reports.push(est.report(check.name(), seed));
    }
    Ok((to_json(&reports), cfg.out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvatureConfig {
    #[serde(default)]
    base: Option<CovarianceSpec>,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default = "thousand")]
    n_planes: usize,
    #[serde(default)]
    commuting: bool,
    #[serde(default = "five")]
    ode_pairs: usize,
    #[serde(default = "fd_default")]
    fd_step: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn thousand() -> usize {
    1000
}

fn five() -> usize {
    5
}

fn fd_default() -> f64 {
    1e-4
}

#[derive(Serialize, Debug)]
pub struct CurvatureReport {
    pub sectional_samples: Vec<f64>,
    pub max_value: f64,
    pub bianchi_residual: f64,
    pub ode_residual: f64,
}

/// `‖R(x,y)z + R(y,z)x + R(z,x)y‖ / Σ‖terms‖`, zero when every term vanishes.
pub fn bianchi_residual(p: &SpdMatrix, x: &SymMatrix, y: &SymMatrix, z: &SymMatrix) -> crate::Result<f64> {
    let terms = [
        curvature_tensor(p, x, y, z)?,
        curvature_tensor(p, y, z, x)?,
        curvature_tensor(p, z, x, y)?,
    ];
    let scale: f64 = terms.iter().map(SymMatrix::frobenius_norm).sum();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum = &(&terms[0] + &terms[1]) + &terms[2];
    Ok(sum.frobenius_norm() / scale)
}

/// `P^{1/2} Q D Qᵀ P^{1/2}` directions, which commute after whitening.
fn commuting_pair<R: rand::Rng>(rng: &mut R, p: &SpdMatrix) -> crate::Result<(SymMatrix, SymMatrix)> {
    let n = p.dim();
    let q = random_orthogonal(rng, n);
    let root = p.sqrt();
    let lift = |rng: &mut R| -> crate::Result<SymMatrix> {
        let d: Vec<f64> = random_sym(rng, n, 1.0).diagonal();
        let inner = SymMatrix::from_diagonal(&d)?.congruence(&q)?;
        inner.congruence(root.as_matrix())
    };
    Ok((lift(rng)?, lift(rng)?))
}

fn cmd_curvature(args: &CommonArgs) -> CliResult<(String, Option<PathBuf>)> {
    let (cfg, r): (CurvatureConfig, _) = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let base = cfg.base.as_ref().map(|b| r.spd(b)).transpose().map_err(|e| e.context("base"))?;
    let dim = match (&base, cfg.dim) {
        (Some(b), Some(d)) if b.dim() != d => {
            return Err(config_err(format!("dim {d} disagrees with base dimension {}", b.dim())))
        }
        (Some(b), _) => b.dim(),
        (None, Some(d)) if d > 0 => d,
        _ => return Err(config_err("curvature needs a base covariance or dim >= 1")),
    };
    if cfg.n_planes == 0 {
        return Err(config_err("n_planes must be at least 1"));
    }
    let mut rng = stream(seed, 0);
    let mut samples = Vec::with_capacity(cfg.n_planes);
    let mut bianchi: f64 = 0.0;
    for _ in 0..cfg.n_planes {
        let p = match &base {
            Some(b) => b.clone(),
            None => random_spd(&mut rng, dim, 1.0),
        };
        let (x, y) = if cfg.commuting {
            commuting_pair(&mut rng, &p)?
        } else {
            (random_sym(&mut rng, dim, 1.0), random_sym(&mut rng, dim, 1.0))
        };
        let z = random_sym(&mut rng, dim, 1.0);
        bianchi = bianchi.max(bianchi_residual(&p, &x, &y, &z)?);
        samples.push(sectional_curvature(&p, &x, &y)?);
    }
    let mut ode: f64 = 0.0;
    for _ in 0..cfg.ode_pairs {
        let a = random_spd(&mut rng, dim, 1.0);
        let b = random_spd(&mut rng, dim, 1.0);
        ode = ode.max(geodesic_ode_residual(&a, &b, &[0.25, 0.5, 0.75], cfg.fd_step)?);
    }
    let max_value = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = CurvatureReport {
        sectional_samples: samples,
        max_value,
        bianchi_residual: bianchi,
        ode_residual: ode,
    };
    Ok((to_json(&report), cfg.out))
}

fn write_output(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| config_err(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| config_err(format!("stdout: {e}")))
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let (args, result) = match &cli.command {
        Command::Distance(a) => (a, cmd_distance(a)),
        Command::Geodesic(a) => (a, cmd_geodesic(a)),
        Command::Equivalence(a) => (a, cmd_equivalence(a)),
        Command::ConvergeGamma(a) => (a, cmd_converge_gamma(a)),
        Command::McVerify(a) => (a, cmd_mc_verify(a)),
        Command::Curvature(a) => (a, cmd_curvature(a)),
    };
    let (text, config_out) = result?;
    let out = args.out.clone().or(config_out);
    write_output(&text, out.as_deref())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
