//! Config-driven experiment runner behind the `blockfa` binary: presets
//! mirroring the reference figures at desk scale, per-iteration CSV output,
//! JSON run summaries, and simple SVG convergence plots.

use crate::bounds::{
    self, pacman_contour, sign_contour, Contour, PacManParams,
};
use crate::error::{Error, Result};
use crate::fa::{self, CwSolver, SpectralFunction};
use crate::krylov::{block_lanczos, recurrence_residual, LanczosDecomposition};
use crate::linalg::{Cpx, SpectrumInterval};
use crate::operator::{HermitianOracle, NormMode, OpRef};
use crate::problems;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Which experiment shape a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Error / triangle / computable bound against k.
    Convergence,
    /// Quadratic-form error and bound against k.
    QuadraticForm,
    /// T(z) sampled on a z-grid at fixed k.
    SlackHeatmap,
    /// Im of the (1,1) entry of f(z)·err_k(z) on a z-grid at fixed k.
    ImHeatmap,
    /// Bound/error ratios at fixed k across the (R, Θ) sweep.
    RatioGrid,
    /// The Pac-Man trace itself (illustration data).
    ContourTrace,
    /// Lookahead error estimate quality across d.
    Estimate,
}

/// Problem selection, mirroring the generators in [`crate::problems`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    LinspaceDiag { n: usize, lo: f64, hi: f64 },
    ModelProblem { n: usize, kappa: f64, rho: f64 },
    IndefiniteDiag { n: usize, gap: f64 },
    DenseRandom { n: usize, seed: u64 },
    MatrixMarket { path: PathBuf },
    /// Wilson-fermion composition from a lattice file; falls back to the
    /// indefinite diagonal stand-in (with a notice) when the file is absent.
    WilsonFermion {
        path: PathBuf,
        kappa_hopping: f64,
        fallback_n: usize,
        fallback_gap: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourSpec {
    pub origin: f64,
    /// Sweep axis of radii.
    pub radius: Vec<f64>,
    /// Sweep axis of half-angles.
    pub theta: Vec<f64>,
    /// When set, each radius is a multiple of the estimated λmax − origin.
    #[serde(default)]
    pub radius_is_lambda_max_multiple: bool,
}

fn default_k_step() -> usize {
    1
}
fn default_rtol() -> f64 {
    1e-6
}
fn default_reorth() -> Vec<bool> {
    vec![true]
}
fn default_lookahead() -> Vec<usize> {
    vec![0]
}
fn default_norm() -> String {
    "h-shifted".into()
}
fn default_grid() -> usize {
    40
}

/// One experiment, loadable from TOML and overridable with `--set`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub max_k: usize,
    #[serde(default = "default_k_step")]
    pub k_step: usize,
    /// Sweep axis of block sizes.
    pub block_size: Vec<usize>,
    #[serde(default = "default_reorth")]
    pub reorth: Vec<bool>,
    pub w: f64,
    /// `h-shifted`, `frobenius`, or `operator`.
    #[serde(default = "default_norm")]
    pub norm: String,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    pub problem: ProblemSpec,
    /// `sqrt`, `inv_sqrt`, `step`, or `sign`.
    pub function: String,
    pub contour: ContourSpec,
    /// Sweep axis of lookahead depths (Estimate kind).
    #[serde(default = "default_lookahead")]
    pub lookahead: Vec<usize>,
    /// Fixed k for heatmap / ratio kinds.
    #[serde(default)]
    pub at_k: usize,
    /// Grid resolution per axis for heatmap kinds.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Also evaluate the finite-precision perturbation term.
    #[serde(default)]
    pub fp_term: bool,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size.is_empty() {
            return Err(config_err("block_size", "sweep axis is empty"));
        }
        if self.reorth.is_empty() {
            return Err(config_err("reorth", "sweep axis is empty"));
        }
        if self.contour.radius.is_empty() {
            return Err(config_err("contour.radius", "sweep axis is empty"));
        }
        if self.contour.theta.is_empty() {
            return Err(config_err("contour.theta", "sweep axis is empty"));
        }
        if self.lookahead.is_empty() {
            return Err(config_err("lookahead", "sweep axis is empty"));
        }
        if self.max_k == 0 || self.k_step == 0 {
            return Err(config_err("max_k", "max_k and k_step must be positive"));
        }
        for t in &self.contour.theta {
            if !(*t > 0.0 && *t < PI) {
                return Err(config_err("contour.theta", format!("theta {t} outside (0, pi)")));
            }
        }
        self.resolve_function()?;
        norm_mode(&self.norm, self.w)?;
        Ok(())
    }

    pub fn resolve_function(&self) -> Result<SpectralFunction> {
        match self.function.as_str() {
            "sqrt" => Ok(SpectralFunction::sqrt()),
            "inv_sqrt" => Ok(SpectralFunction::inv_sqrt()),
            "step" => Ok(SpectralFunction::step()),
            "sign" => Ok(SpectralFunction::sign()),
            other => Err(config_err("function", format!("unknown function `{other}`"))),
        }
    }
}

fn norm_mode(name: &str, w: f64) -> Result<NormMode> {
    match name {
        "h-shifted" => Ok(NormMode::ShiftedInduced(w)),
        "frobenius" => Ok(NormMode::Frobenius),
        "operator" => Ok(NormMode::Operator),
        other => Err(config_err("norm", format!("unknown norm `{other}`"))),
    }
}

/// Parse a TOML config, then apply `--set path.to.key=value` overrides
/// before deserializing.
pub fn load_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| config_err("<config>", format!("TOML parse error: {e}")))?;
    let mut value = toml::Value::Table(table);
    for ov in overrides {
        let (path, raw) = ov
            .split_once('=')
            .ok_or_else(|| config_err("--set", format!("expected key=value, got `{ov}`")))?;
        let parsed: toml::Value = raw
            .parse()
            .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
        let parts: Vec<&str> = path.split('.').collect();
        let (last, prefix) = parts.split_last().expect("split_once yields a nonempty key");
        let mut cursor = &mut value;
        for part in prefix {
            cursor = cursor
                .as_table_mut()
                .ok_or_else(|| config_err(path, "override path does not address a table"))?
                .entry(part.to_string())
                .or_insert(toml::Value::Table(Default::default()));
        }
        cursor
            .as_table_mut()
            .ok_or_else(|| config_err(path, "override path does not address a table"))?
            .insert(last.to_string(), parsed);
    }
    let cfg: ExperimentConfig = value
        .try_into()
        .map_err(|e| config_err("<config>", format!("{e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Resolved problem: the operator, its solve oracle, and notes gathered
/// while resolving (e.g. the Wilson fallback notice).
struct ResolvedProblem {
    op: OpRef,
    oracle: HermitianOracle,
    notes: Vec<String>,
}

fn resolve_problem(spec: &ProblemSpec) -> Result<ResolvedProblem> {
    let mut notes = Vec::new();
    let op: OpRef = match spec {
        ProblemSpec::LinspaceDiag { n, lo, hi } => {
            Arc::new(problems::gen_linspace_diag(*n, *lo, *hi))
        }
        ProblemSpec::ModelProblem { n, kappa, rho } => {
            Arc::new(problems::gen_model_problem(*n, *kappa, *rho))
        }
        ProblemSpec::IndefiniteDiag { n, gap } => {
            Arc::new(problems::gen_indefinite_diag(*n, *gap))
        }
        ProblemSpec::DenseRandom { n, seed } => problems::gen_dense_random(*n, *seed),
        ProblemSpec::MatrixMarket { path } => Arc::new(problems::load_matrix_market(path)?),
        ProblemSpec::WilsonFermion {
            path,
            kappa_hopping,
            fallback_n,
            fallback_gap,
        } => {
            if path.exists() {
                let d: OpRef = Arc::new(problems::load_matrix_market(path)?);
                Arc::new(problems::wilson_fermion(d, *kappa_hopping)?)
            } else {
                notes.push(format!(
                    "lattice file {} absent; using the indefinite diagonal stand-in",
                    path.display()
                ));
                Arc::new(problems::gen_indefinite_diag(*fallback_n, *fallback_gap))
            }
        }
    };
    let oracle = HermitianOracle::build(op.as_ref())?;
    Ok(ResolvedProblem { op, oracle, notes })
}

/// One CSV row. Optional diagnostics are blank when not computed.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub point: usize,
    pub b: usize,
    pub reorth: bool,
    pub radius: f64,
    pub theta: f64,
    pub lookahead: usize,
    pub k: usize,
    pub true_error: Option<f64>,
    pub triangle_integral: Option<f64>,
    pub integral_term: Option<f64>,
    pub linsys_term: Option<f64>,
    pub computable_bound: Option<f64>,
    pub quad_error_estimate: Option<f64>,
    pub fp_extra_term: Option<f64>,
    pub recurrence_residual: Option<f64>,
    pub estimate: Option<f64>,
}

/// Fixed CSV column order; documented in docs/schema.md.
pub const CSV_COLUMNS: &str = "point,b,reorth,radius,theta,lookahead,k,true_error,\
triangle_integral,integral_term,linsys_term,computable_bound,quad_error_estimate,\
fp_extra_term,recurrence_residual,estimate";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

fn record_to_csv(r: &RunRecord) -> String {
    format!(
        "{},{},{},{:.17e},{:.17e},{},{},{},{},{},{},{},{},{},{},{}",
        r.point,
        r.b,
        r.reorth,
        r.radius,
        r.theta,
        r.lookahead,
        r.k,
        fmt_opt(r.true_error),
        fmt_opt(r.triangle_integral),
        fmt_opt(r.integral_term),
        fmt_opt(r.linsys_term),
        fmt_opt(r.computable_bound),
        fmt_opt(r.quad_error_estimate),
        fmt_opt(r.fp_extra_term),
        fmt_opt(r.recurrence_residual),
        fmt_opt(r.estimate),
    )
}

/// One sweep point of the cartesian sweep axes.
#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    index: usize,
    b: usize,
    reorth: bool,
    radius: f64,
    theta: f64,
    lookahead: usize,
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    let mut index = 0;
    for &b in &cfg.block_size {
        for &reorth in &cfg.reorth {
            for &radius in &cfg.contour.radius {
                for &theta in &cfg.contour.theta {
                    for &lookahead in &cfg.lookahead {
                        points.push(SweepPoint {
                            index,
                            b,
                            reorth,
                            radius,
                            theta,
                            lookahead,
                        });
                        index += 1;
                    }
                }
            }
        }
    }
    points
}

/// Spectrum set and contour for a sweep point, derived from the problem's
/// (estimated) spectrum. Indefinite spectra get a two-interval set and a
/// two-curve sign contour with ε = half the smallest positive Ritz value.
struct Geometry {
    s: Vec<SpectrumInterval>,
    contour: Contour,
    epsilon: Option<f64>,
}

fn build_geometry(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    ritz: &[f64],
) -> Result<Geometry> {
    let lo = ritz.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ritz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let radius = if cfg.contour.radius_is_lambda_max_multiple {
        point.radius * (hi - cfg.contour.origin).abs()
    } else {
        point.radius
    };
    let pac = PacManParams {
        origin: cfg.contour.origin,
        radius,
        theta: point.theta,
    };
    if lo < 0.0 {
        // Indefinite spectrum: split at zero, bound away by ε.
        let smallest_pos = ritz
            .iter()
            .copied()
            .filter(|&x| x > 0.0)
            .fold(f64::INFINITY, f64::min);
        let largest_neg = ritz
            .iter()
            .copied()
            .filter(|&x| x < 0.0)
            .fold(f64::NEG_INFINITY, f64::max);
        if !smallest_pos.is_finite() || !largest_neg.is_finite() {
            return Err(config_err(
                "problem",
                "spectrum is not indefinite despite negative Ritz values",
            ));
        }
        let epsilon = 0.5 * smallest_pos;
        let margin = 1.0 + bounds::DEFAULT_SPECTRUM_MARGIN;
        let s = vec![
            SpectrumInterval::new(lo * margin, largest_neg / margin),
            SpectrumInterval::new(epsilon, hi * margin),
        ];
        let contour = sign_contour(&pac, s[0]);
        Ok(Geometry {
            s,
            contour,
            epsilon: Some(epsilon),
        })
    } else {
        let iv = SpectrumInterval::new(lo, hi).inflated(bounds::DEFAULT_SPECTRUM_MARGIN);
        // Keep the spectrum estimate inside the Pac-Man mouth.
        let s = vec![SpectrumInterval::new(
            iv.lo.max(cfg.contour.origin + 1e-8 * (hi - cfg.contour.origin).abs()),
            iv.hi,
        )];
        Ok(Geometry {
            s,
            contour: pacman_contour(&pac),
            epsilon: None,
        })
    }
}

fn k_grid(cfg: &ExperimentConfig) -> Vec<usize> {
    (1..=cfg.max_k).step_by(cfg.k_step).collect()
}

/// Exact f(H)V through the oracle.
fn exact_fhv(
    oracle: &HermitianOracle,
    f: &SpectralFunction,
    v: &crate::linalg::BlockVector,
) -> crate::linalg::BlockVector {
    oracle.apply_fn(|x| f.eval(Cpx::new(x, 0.0)), v)
}

fn run_point(
    cfg: &ExperimentConfig,
    problem: &ResolvedProblem,
    point: &SweepPoint,
    notes: &mut Vec<String>,
) -> Result<Vec<RunRecord>> {
    let f = cfg.resolve_function()?;
    let mode = norm_mode(&cfg.norm, cfg.w)?;
    let n = problem.op.dim();
    let max_k = cfg.max_k.min(n / point.b.max(1));
    let v = problems::gaussian_block(n, point.b, cfg.seed);
    let full = block_lanczos(problem.op.as_ref(), &v, max_k, point.reorth)?;
    // The recurrence may stop early when it reaches an invariant subspace.
    let max_k = max_k.min(full.iterations());
    let exact = exact_fhv(&problem.oracle, &f, &v);
    let mut records = Vec::new();
    let mut eps_noted = false;

    for k in k_grid(cfg) {
        if k > max_k {
            break;
        }
        let d = full.prefix(k);
        let geo = build_geometry(cfg, point, &d.ritz_values()?)?;
        if !eps_noted {
            if let Some(eps) = geo.epsilon {
                eps_noted = true;
                notes.push(format!(
                    "sweep point {}: sign contour clears zero by epsilon = {eps:.6e} at k = {k}",
                    point.index
                ));
            }
        }
        let rec = match cfg.kind {
            ExperimentKind::QuadraticForm => {
                quadratic_form_record(cfg, problem, point, &d, &v, &f, &geo, k)?
            }
            _ => convergence_record(cfg, problem, point, &d, &v, &f, &geo, mode, &exact, k)?,
        };
        records.push(rec);
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn convergence_record(
    cfg: &ExperimentConfig,
    problem: &ResolvedProblem,
    point: &SweepPoint,
    d: &LanczosDecomposition,
    v: &crate::linalg::BlockVector,
    f: &SpectralFunction,
    geo: &Geometry,
    mode: NormMode,
    exact: &crate::linalg::BlockVector,
    k: usize,
) -> Result<RunRecord> {
    let approx = fa::lanczos_fa(d, f)?;
    let true_error = problem.oracle.norm(&(exact - approx), mode)?;
    let err_w = fa::shifted_error(d, v, &problem.oracle, Cpx::new(cfg.w, 0.0))?;
    let linsys = problem.oracle.norm(&err_w, mode)?;
    let rep = bounds::error_bound_main(d, &geo.s, cfg.w, f, &geo.contour, linsys, cfg.rtol)?;
    let tri = bounds::triangle_integral(
        d,
        v,
        &problem.oracle,
        f,
        &geo.contour,
        mode,
        cfg.rtol.max(1e-4),
    )?;
    let (_, f_norm) = recurrence_residual(d, problem.op.as_ref());
    let fp = if cfg.fp_term {
        Some(bounds::fp_perturbation_term(
            d,
            problem.op.as_ref(),
            &geo.s,
            cfg.w,
            f,
            &geo.contour,
            cfg.rtol.max(1e-4),
        )?)
    } else {
        None
    };
    let estimate = if point.lookahead > 0 {
        Some(bounds::cg_error_estimate(
            problem.op.as_ref(),
            v,
            cfg.w,
            k,
            point.lookahead,
            point.reorth,
        )?)
    } else {
        None
    };
    Ok(RunRecord {
        point: point.index,
        b: point.b,
        reorth: point.reorth,
        radius: point.radius,
        theta: point.theta,
        lookahead: point.lookahead,
        k,
        true_error: Some(true_error),
        triangle_integral: Some(tri),
        integral_term: Some(rep.integral_term),
        linsys_term: Some(rep.linsys_term),
        computable_bound: Some(rep.computable_bound),
        quad_error_estimate: Some(rep.quad_error_estimate),
        fp_extra_term: fp,
        recurrence_residual: Some(f_norm),
        estimate,
    })
}

#[allow(clippy::too_many_arguments)]
fn quadratic_form_record(
    cfg: &ExperimentConfig,
    problem: &ResolvedProblem,
    point: &SweepPoint,
    d: &LanczosDecomposition,
    v: &crate::linalg::BlockVector,
    f: &SpectralFunction,
    geo: &Geometry,
    k: usize,
) -> Result<RunRecord> {
    let exact_qf = v.adjoint() * exact_fhv(&problem.oracle, f, v);
    let approx_qf = fa::quadratic_form_approx(d, f)?;
    let true_error = crate::linalg::operator_norm(&(exact_qf - approx_qf));
    let (bound, quad_err) = bounds::qf_bound(d, &geo.s, cfg.w, f, &geo.contour, cfg.rtol)?;
    Ok(RunRecord {
        point: point.index,
        b: point.b,
        reorth: point.reorth,
        radius: point.radius,
        theta: point.theta,
        lookahead: point.lookahead,
        k,
        true_error: Some(true_error),
        triangle_integral: None,
        integral_term: None,
        linsys_term: None,
        computable_bound: Some(bound),
        quad_error_estimate: Some(quad_err),
        fp_extra_term: None,
        recurrence_residual: None,
        estimate: None,
    })
}

/// Heatmap / grid record: (re, im) sample and a field value.
#[derive(Debug, Clone, Serialize)]
pub struct GridRecord {
    pub point: usize,
    pub b: usize,
    pub re: f64,
    pub im: f64,
    pub value: f64,
}

pub const GRID_CSV_COLUMNS: &str = "point,b,re,im,value";

fn grid_to_csv(r: &GridRecord) -> String {
    format!(
        "{},{},{:.17e},{:.17e},{:.17e}",
        r.point, r.b, r.re, r.im, r.value
    )
}

fn run_heatmap_point(
    cfg: &ExperimentConfig,
    problem: &ResolvedProblem,
    point: &SweepPoint,
) -> Result<Vec<GridRecord>> {
    let f = cfg.resolve_function()?;
    let mode = norm_mode(&cfg.norm, cfg.w)?;
    let n = problem.op.dim();
    let k = cfg.at_k.max(1).min(n / point.b.max(1));
    let v = problems::gaussian_block(n, point.b, cfg.seed);
    let d = block_lanczos(problem.op.as_ref(), &v, k, point.reorth)?;
    let solver = CwSolver::new(&d, cfg.w)?;
    let (lo, hi) = (problem.oracle.lambda_min(), problem.oracle.lambda_max());
    let span = hi - lo;
    let mut out = Vec::new();
    let g = cfg.grid;
    for iy in 0..g {
        for ix in 0..g {
            // Rectangle around the spectrum, skipping the real axis row.
            let re = lo - 0.25 * span + 1.5 * span * ix as f64 / (g - 1) as f64;
            let im = 0.02 * span + 0.73 * span * iy as f64 / (g - 1) as f64;
            let z = Cpx::new(re, im);
            let value = match cfg.kind {
                ExperimentKind::SlackHeatmap => {
                    bounds::slack_ratio(&d, &v, &problem.oracle, &solver, z, mode)?
                }
                ExperimentKind::ImHeatmap => {
                    let err = fa::shifted_error(&d, &v, &problem.oracle, z)?;
                    (f.eval(z) * err[(0, 0)]).im
                }
                _ => unreachable!("not a heatmap kind"),
            };
            out.push(GridRecord {
                point: point.index,
                b: point.b,
                re,
                im,
                value,
            });
        }
    }
    Ok(out)
}

fn run_contour_trace(cfg: &ExperimentConfig, point: &SweepPoint) -> Vec<GridRecord> {
    let pac = PacManParams {
        origin: cfg.contour.origin,
        radius: point.radius,
        theta: point.theta,
    };
    let c = pacman_contour(&pac);
    let mut out = Vec::new();
    for curve in &c.curves {
        for seg in &curve.segments {
            for j in 0..=cfg.grid {
                let z = seg.point(j as f64 / cfg.grid as f64);
                out.push(GridRecord {
                    point: point.index,
                    b: 0,
                    re: z.re,
                    im: z.im,
                    value: 0.0,
                });
            }
        }
    }
    out
}

/// Everything a finished run produced.
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub grid_records: Vec<GridRecord>,
    pub notes: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Execute a config, writing `<name>.csv`, `<name>.json`, `<name>.svg`
/// under `outdir`. Sweep points failing numerically are recorded in the
/// notes and the run continues.
pub fn run_experiment(cfg: &ExperimentConfig, outdir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(outdir)?;
    let started = std::time::Instant::now();
    let problem = resolve_problem(&cfg.problem)?;
    let points = sweep_points(cfg);
    let mut records = Vec::new();
    let mut grid_records = Vec::new();
    let mut notes = problem.notes.clone();

    for point in &points {
        let outcome: Result<()> = match cfg.kind {
            ExperimentKind::SlackHeatmap | ExperimentKind::ImHeatmap => {
                run_heatmap_point(cfg, &problem, point).map(|rs| grid_records.extend(rs))
            }
            ExperimentKind::ContourTrace => {
                grid_records.extend(run_contour_trace(cfg, point));
                Ok(())
            }
            _ => run_point(cfg, &problem, point, &mut notes).map(|rs| records.extend(rs)),
        };
        if let Err(e) = outcome {
            notes.push(format!("sweep point {} failed: {e}", point.index));
        }
    }

    let mut files = Vec::new();

    // CSV: the artifact of record.
    let csv_path = outdir.join(format!("{}.csv", cfg.name));
    let mut csv = String::new();
    if matches!(
        cfg.kind,
        ExperimentKind::SlackHeatmap | ExperimentKind::ImHeatmap | ExperimentKind::ContourTrace
    ) {
        let _ = writeln!(csv, "{GRID_CSV_COLUMNS}");
        for r in &grid_records {
            let _ = writeln!(csv, "{}", grid_to_csv(r));
        }
    } else {
        let _ = writeln!(csv, "{CSV_COLUMNS}");
        for r in &records {
            let _ = writeln!(csv, "{}", record_to_csv(r));
        }
    }
    std::fs::write(&csv_path, &csv)?;
    files.push(csv_path);

    // JSON: config echo, environment, notes, timing (deliberately kept out
    // of the CSV so reruns stay bit-identical).
    let json_path = outdir.join(format!("{}.json", cfg.name));
    let summary = serde_json::json!({
        "config": cfg,
        "environment": {
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "notes": notes,
        "rows": records.len() + grid_records.len(),
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap())?;
    files.push(json_path);

    // SVG: convenience plot.
    let svg_path = outdir.join(format!("{}.svg", cfg.name));
    std::fs::write(&svg_path, render_svg(cfg, &records, &grid_records))?;
    files.push(svg_path);

    Ok(RunOutput {
        records,
        grid_records,
        notes,
        files,
    })
}

// --- SVG rendering -------------------------------------------------------

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;

fn svg_header(mut s: String) -> String {
    s.insert_str(
        0,
        &format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\" \
             font-family=\"monospace\" font-size=\"10\">\n\
             <rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
        ),
    );
    s.push_str("</svg>\n");
    s
}

const SERIES_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Log-y polyline chart of the per-k series, one panel per sweep point.
fn render_svg(_cfg: &ExperimentConfig, records: &[RunRecord], grid: &[GridRecord]) -> String {
    let mut body = String::new();
    if !grid.is_empty() {
        // Scatter of grid samples, grayscale by log-magnitude.
        let (vmin, vmax) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| {
            let v = r.value.abs().max(1e-300).log10();
            (a.0.min(v), a.1.max(v))
        });
        let (rmin, rmax) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| {
            (a.0.min(r.re), a.1.max(r.re))
        });
        let (imin, imax) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| {
            (a.0.min(r.im), a.1.max(r.im))
        });
        for r in grid {
            let x = 40.0 + (SVG_W - 80.0) * (r.re - rmin) / (rmax - rmin).max(1e-300);
            let y = SVG_H - 40.0 - (SVG_H - 80.0) * (r.im - imin) / (imax - imin).max(1e-300);
            let t = ((r.value.abs().max(1e-300).log10() - vmin) / (vmax - vmin).max(1e-300))
                .clamp(0.0, 1.0);
            let shade = (235.0 - 215.0 * t) as u32;
            let _ = writeln!(
                body,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"3\" height=\"3\" \
                 fill=\"rgb({shade},{shade},{shade})\"/>"
            );
        }
        return svg_header(body);
    }

    let points: Vec<usize> = {
        let mut p: Vec<usize> = records.iter().map(|r| r.point).collect();
        p.dedup();
        p
    };
    let cols = (points.len() as f64).sqrt().ceil().max(1.0) as usize;
    let rows = points.len().div_ceil(cols);
    let (pw, ph) = (SVG_W / cols as f64, SVG_H / rows as f64);
    for (pi, &pt) in points.iter().enumerate() {
        let rs: Vec<&RunRecord> = records.iter().filter(|r| r.point == pt).collect();
        let x0 = (pi % cols) as f64 * pw + 30.0;
        let y0 = (pi / cols) as f64 * ph + 14.0;
        let (w, h) = (pw - 40.0, ph - 28.0);
        let series: [(&str, Box<dyn Fn(&RunRecord) -> Option<f64>>); 4] = [
            ("true", Box::new(|r: &RunRecord| r.true_error)),
            ("triangle", Box::new(|r: &RunRecord| r.triangle_integral)),
            ("bound", Box::new(|r: &RunRecord| r.computable_bound)),
            ("estimate", Box::new(|r: &RunRecord| r.estimate)),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (_, get) in &series {
            for r in &rs {
                if let Some(v) = get(r) {
                    let v = v.max(1e-300).log10();
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        if !lo.is_finite() {
            continue;
        }
        let kmax = rs.iter().map(|r| r.k).max().unwrap_or(1) as f64;
        let _ = writeln!(
            body,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" \
             fill=\"none\" stroke=\"#999\"/>\n\
             <text x=\"{x0:.1}\" y=\"{:.1}\">b={} R={:.3} th={:.3}</text>",
            y0 - 3.0,
            rs[0].b,
            rs[0].radius,
            rs[0].theta
        );
        for (si, (label, get)) in series.iter().enumerate() {
            let mut path = String::new();
            for r in &rs {
                if let Some(v) = get(r) {
                    let x = x0 + w * r.k as f64 / kmax;
                    let y = y0 + h - h * ((v.max(1e-300).log10() - lo) / (hi - lo).max(1e-12));
                    let cmd = if path.is_empty() { 'M' } else { 'L' };
                    let _ = write!(path, "{cmd}{x:.1},{y:.1} ");
                }
            }
            if !path.is_empty() {
                let _ = writeln!(
                    body,
                    "<path d=\"{path}\" fill=\"none\" stroke=\"{}\"/>",
                    SERIES_COLORS[si]
                );
                if pi == 0 {
                    let _ = writeln!(
                        body,
                        "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{label}</text>",
                        x0 + w - 52.0,
                        y0 + 10.0 + 10.0 * si as f64,
                        SERIES_COLORS[si]
                    );
                }
            }
        }
        let _ = writeln!(body, "<!-- {} points -->", rs.len());
    }
    svg_header(body)
}

// --- Presets -------------------------------------------------------------

const QCD_DEFAULT_PATH: &str = "data/conf5.0-00l4x4-1000.mtx";

fn base_41_problem() -> ProblemSpec {
    ProblemSpec::LinspaceDiag {
        n: 1000,
        lo: 1e-2,
        hi: 1.0,
    }
}

fn wilson_or_standin() -> ProblemSpec {
    ProblemSpec::WilsonFermion {
        path: PathBuf::from(QCD_DEFAULT_PATH),
        kappa_hopping: 0.20611,
        fallback_n: 400,
        fallback_gap: 0.05,
    }
}

/// Built-in experiment presets mirroring the reference figures at desk
/// scale. Ordering is stable.
pub fn presets() -> Vec<ExperimentConfig> {
    let pac_default = ContourSpec {
        origin: 1e-4,
        radius: vec![4.0],
        theta: vec![3.0 * PI / 4.0],
        radius_is_lambda_max_multiple: false,
    };
    vec![
        ExperimentConfig {
            name: "fig1".into(),
            description: "imaginary part of the (1,1) entry of f(z)·err_k(z) near the \
                          spectrum, per block size (heatmap grid)"
                .into(),
            kind: ExperimentKind::ImHeatmap,
            seed: 0,
            max_k: 20,
            k_step: 1,
            block_size: vec![1, 2, 3, 4, 8, 16],
            reorth: vec![true],
            w: 0.0,
            norm: "h-shifted".into(),
            rtol: 1e-6,
            problem: base_41_problem(),
            function: "sqrt".into(),
            contour: pac_default.clone(),
            lookahead: vec![0],
            at_k: 20,
            grid: 40,
            fp_term: false,
        },
        ExperimentConfig {
            name: "fig2".into(),
            description: "slack ratio T(z) field near the spectrum with w = lambda_min/100, \
                          per block size (heatmap grid)"
                .into(),
            kind: ExperimentKind::SlackHeatmap,
            seed: 0,
            max_k: 20,
            k_step: 1,
            block_size: vec![1, 2, 3, 4, 8, 16],
            reorth: vec![true],
            w: 1e-4,
            norm: "h-shifted".into(),
            rtol: 1e-6,
            problem: base_41_problem(),
            function: "sqrt".into(),
            contour: pac_default.clone(),
            lookahead: vec![0],
            at_k: 20,
            grid: 40,
            fp_term: false,
        },
        ExperimentConfig {
            name: "fig3".into(),
            description: "Pac-Man contour trace (illustration data)".into(),
            kind: ExperimentKind::ContourTrace,
            seed: 0,
            max_k: 1,
            k_step: 1,
            block_size: vec![1],
            reorth: vec![true],
            w: 0.0,
            norm: "h-shifted".into(),
            rtol: 1e-6,
            problem: base_41_problem(),
            function: "sqrt".into(),
            contour: ContourSpec {
                origin: 0.0,
                radius: vec![2.0],
                theta: vec![8.0 * PI / 9.0],
                radius_is_lambda_max_multiple: false,
            },
            lookahead: vec![0],
            at_k: 1,
            grid: 200,
            fp_term: false,
        },
        ExperimentConfig {
            name: "fig4".into(),
            description: "error, triangle integral, and computable bound vs k for f = sqrt \
                          across a 3x3 (R, theta) Pac-Man grid"
                .into(),
            kind: ExperimentKind::Convergence,
            seed: 0,
            max_k: 100,
            k_step: 2,
            block_size: vec![4],
            reorth: vec![true],
            w: 0.0,
            norm: "h-shifted".into(),
            rtol: 1e-6,
            problem: base_41_problem(),
            function: "sqrt".into(),
            contour: ContourSpec {
                origin: 1e-4,
                radius: vec![1.1, 2.0, 4.0],
                theta: vec![PI / 4.0, PI / 2.0, 3.0 * PI / 4.0],
                radius_is_lambda_max_multiple: true,
            },
            lookahead: vec![0],
            at_k: 0,
            grid: 40,
            fp_term: false,
        },
        ExperimentConfig {
            name: "fig5".into(),
            description: "bound/error ratio heatmap at k=30 across the (R, theta) grid".into(),
            kind: ExperimentKind::Convergence,
            seed: 0,
            max_k: 30,
            k_step: 30,
            block_size: vec![4],
            reorth: vec![true],
            w: 0.0,
            norm: "h-shifted".into(),
            rtol: 1e-6,
            problem: base_41_problem(),
            function: "sqrt".into(),
            contour: ContourSpec {
                origin: 1e-4,
                radius: vec![1.1, 1.5, 2.0, 3.0, 4.0],
                theta: vec![PI / 8.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, 9.0 * PI / 10.0],
                radius_is_lambda_max_multiple: true,
            },
            lookahead: vec![0],
            at_k: 30,
            grid: 40,
            fp_term: false,
        },
        ExperimentConfig {
            name: "fig6".into(),
            description: "step function on the Wilson-fermion operator (or the indefinite \
                          diagonal stand-in), b in {1,2,4,8}, Frobenius norm"
                .into(),
            kind: ExperimentKind::Convergence,
            seed: 0,
            max_k: 150,
            k_step: 5,
            block_size: vec![1, 2, 4, 8],
            reorth: vec![true],
            w: 0.0,
            norm: "frobenius".into(),
            rtol: 1e-6,
            problem: wilson_or_standin(),
            function: "step".into(),
            contour: ContourSpec {
                origin: 0.0,
                radius: vec![2.0],
                theta: vec![PI / 2.0],
                radius_is_lambda_max_multiple: true,
            },
            lookahead: vec![0],
            at_k: 0,
            grid: 40,
            fp_term: false,
        },
        ExperimentConfig {
            name: "fig7".into(),
            description: "quadratic-form bound for f = 1/sqrt(x), b in {1,2,4,8}".into(),
            kind: ExperimentKind::QuadraticForm,
            seed: 0,
            max_k: 60,
            k_step: 2,
            block_size: vec![1, 2, 4, 8],
            reorth: vec![true],
            w: 0.0,
            norm: "operator".into(),
            rtol: 1e-6,
            problem: base_41_problem(),
            function: "inv_sqrt".into(),
            contour: ContourSpec {
                origin: 0.0,
                radius: vec![2.0],
                theta: vec![PI / 2.0],
                radius_is_lambda_max_multiple: true,
            },
            lookahead: vec![0],
            at_k: 0,
            grid: 40,
            fp_term: false,
        },
        ExperimentConfig {
            name: "fig8".into(),
            description: "model problem with and without reorthogonalization, b = 4, \
                          f = 1/sqrt(x), narrow Pac-Man"
                .into(),
            kind: ExperimentKind::Convergence,
            seed: 0,
            max_k: 120,
            k_step: 4,
            block_size: vec![4],
            reorth: vec![true, false],
            w: 1e-5,
            norm: "h-shifted".into(),
            rtol: 1e-6,
            problem: ProblemSpec::ModelProblem {
                n: 500,
                kappa: 1e3,
                rho: 0.9,
            },
            function: "inv_sqrt".into(),
            contour: ContourSpec {
                origin: 1e-5,
                radius: vec![2.0],
                theta: vec![PI / 100.0],
                radius_is_lambda_max_multiple: false,
            },
            lookahead: vec![0],
            at_k: 0,
            grid: 40,
            fp_term: true,
        },
        ExperimentConfig {
            name: "appendixA".into(),
            description: "lookahead error estimate quality across d in {2,5,10}, w = 0".into(),
            kind: ExperimentKind::Convergence,
            seed: 0,
            max_k: 80,
            k_step: 2,
            block_size: vec![4],
            reorth: vec![true],
            w: 0.0,
            norm: "h-shifted".into(),
            rtol: 1e-6,
            problem: base_41_problem(),
            function: "sqrt".into(),
            contour: ContourSpec {
                origin: 1e-4,
                radius: vec![4.0],
                theta: vec![3.0 * PI / 4.0],
                radius_is_lambda_max_multiple: false,
            },
            lookahead: vec![2, 5, 10],
            at_k: 0,
            grid: 40,
            fp_term: false,
        },
    ]
}

pub fn find_preset(name: &str) -> Result<ExperimentConfig> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| config_err("--preset", format!("unknown preset `{name}`")))
}

/// `blockfa list`: stable-ordered preset names with descriptions.
pub fn list_presets() -> String {
    let mut out = String::new();
    for p in presets() {
        let _ = writeln!(out, "{:<10} {}", p.name, p.description);
    }
    out
}

/// `blockfa check`: small-instance invariant suite. Returns human-readable
/// report lines; any `FAIL` line means numerical failure.
pub fn run_check() -> (String, bool) {
    let mut out = String::new();
    let mut ok = true;
    let mut check = |name: &str, result: std::result::Result<bool, Error>| {
        let line = match result {
            Ok(true) => format!("PASS {name}"),
            Ok(false) => {
                ok = false;
                format!("FAIL {name}")
            }
            Err(e) => {
                ok = false;
                format!("FAIL {name}: {e}")
            }
        };
        out.push_str(&line);
        out.push('\n');
    };

    check("quadrature circle identity", {
        let c = Contour::circle(Cpx::new(0.0, 0.0), 2.0);
        bounds::integrate_contour(&c, |_| Ok(1.0), 1e-8).map(|(v, _)| (v - 2.0).abs() < 1e-7)
    });
    check("bound dominates true error (small sqrt problem)", (|| {
        let op = problems::gen_linspace_diag(120, 1e-2, 1.0);
        let oracle = HermitianOracle::build(&op)?;
        let v = problems::gaussian_block(120, 2, 1);
        let d = block_lanczos(&op, &v, 15, true)?;
        let f = SpectralFunction::sqrt();
        let s = vec![SpectrumInterval::new(1e-2, 1.0)];
        let c = pacman_contour(&PacManParams {
            origin: 1e-4,
            radius: 4.0,
            theta: 3.0 * PI / 4.0,
        });
        let mode = NormMode::ShiftedInduced(0.0);
        let err_w = fa::shifted_error(&d, &v, &oracle, Cpx::new(0.0, 0.0))?;
        let linsys = oracle.norm(&err_w, mode)?;
        let rep = bounds::error_bound_main(&d, &s, 0.0, &f, &c, linsys, 1e-6)?;
        let exact = oracle.apply_fn(|x| Cpx::new(x.sqrt(), 0.0), &v);
        let truth = oracle.norm(&(exact - fa::lanczos_fa(&d, &f)?), mode)?;
        Ok(rep.computable_bound >= truth * (1.0 - 1e-6))
    })());
    check("residual identity (Q_{k+1} B_k C(z))", (|| {
        let op = problems::gen_linspace_diag(80, 0.5, 2.0);
        let v = problems::gaussian_block(80, 2, 2);
        let d = block_lanczos(&op, &v, 8, true)?;
        let z = Cpx::new(0.1, 0.4);
        let by_def = fa::shifted_residual(&d, &v, &op, z)?;
        let by_id = fa::residual_via_identity(&d, z)?;
        Ok((by_def - by_id).norm() < 1e-8 * v.norm())
    })());
    check("determinism of gaussian blocks", {
        Ok(problems::gaussian_block(64, 3, 5) == problems::gaussian_block(64, 3, 5))
    });
    (out, ok)
}

// --- Command surface -----------------------------------------------------

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blockfa", about = "Block-Lanczos matrix-function bounds experiment runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run a preset or config-file experiment.
    Run {
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override config keys, e.g. --set max_k=40 --set contour.origin=0.01
        #[arg(long = "set")]
        sets: Vec<String>,
        #[arg(long, default_value = "out")]
        outdir: PathBuf,
        /// Accepted for interface compatibility; sweep points always
        /// produce identical output regardless of parallelism.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List available presets.
    List,
    /// Run the small-instance invariant suite.
    Check,
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", list_presets());
            0
        }
        Command::Check => {
            let (report, ok) = run_check();
            print!("{report}");
            if ok {
                0
            } else {
                3
            }
        }
        Command::Run {
            preset,
            config,
            sets,
            outdir,
            jobs: _,
        } => {
            let cfg = match load_run_config(preset.as_deref(), config.as_deref(), &sets) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("configuration error: {e}");
                    return 2;
                }
            };
            match run_experiment(&cfg, &outdir) {
                Ok(out) => {
                    for note in &out.notes {
                        eprintln!("note: {note}");
                    }
                    for f in &out.files {
                        println!("wrote {}", f.display());
                    }
                    // Per-point numerical failures surface as notes; a run
                    // that produced no data at all is a numerical failure.
                    if out.records.is_empty() && out.grid_records.is_empty() {
                        3
                    } else {
                        0
                    }
                }
                Err(e @ (Error::ConfigError { .. } | Error::ParseError { .. })) => {
                    eprintln!("configuration error: {e}");
                    2
                }
                Err(e) => {
                    eprintln!("numerical failure: {e}");
                    3
                }
            }
        }
    }
}

fn load_run_config(
    preset: Option<&str>,
    config: Option<&Path>,
    sets: &[String],
) -> Result<ExperimentConfig> {
    let base = match (preset, config) {
        (Some(name), None) => find_preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            return load_config(&text, sets);
        }
        _ => {
            return Err(config_err(
                "run",
                "exactly one of --preset or --config is required",
            ))
        }
    };
    if sets.is_empty() {
        return Ok(base);
    }
    // Round-trip the preset through TOML so --set applies uniformly.
    let text = toml::to_string(&base).expect("preset serializes");
    load_config(&text, sets)
}
