//! `weylcalc` command line: six workflows with JSON/CSV artifacts.
//!
//! Every run writes `manifest.json` next to its artifacts, and every JSON
//! artifact embeds the same manifest. Failures write `error.json`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::eigen::{completeness_fit, EigenFamily, FitReport, LambdaSet};
use crate::error::{Error, Result};
use crate::kernel::kernel_basis;
use crate::operator::{
    commutator_check, decompose, matrix_on_monomials, scalar_identity_check, CompositeOperator,
    ConvolutionOperator, OperatorMatrix, OperatorSpec, ParsedOperator, DECOMPOSE_TOL,
};
use crate::orbit::{construct_orbit_with, verify_orbit_with, OrbitConfig, OrbitProblem, DEFAULT_GAP_FACTOR};
use crate::report::{self, default_timestamp, write_csv, write_json, Cell, ErrorReport, RunManifest};
use crate::series::{pairs, DiskSpec, TaylorSeries, C64};

/// Environment variable naming the default artifact directory.
pub const WORKDIR_ENV: &str = "WEYLCALC_WORKDIR";

#[derive(Debug, Parser)]
#[command(name = "weylcalc", version, about = "Operators T = M - azI on entire functions")]
struct Cli {
    /// Artifact directory (default: $WEYLCALC_WORKDIR, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Manifest timestamp; defaults to SOURCE_DATE_EPOCH or the clock.
    #[arg(long, global = true)]
    timestamp: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Power-series basis of ker T.
    Kernel(KernelArgs),
    /// Matrix of [T, d/dz] on monomials and its distance from aI.
    CommutatorCheck(MatrixArgs),
    /// Eigen-relation residuals of the translate family.
    Eigencheck(EigenArgs),
    /// Completeness fits of targets by eigenfunctions, with a residual curve.
    CompleteFit(FitArgs),
    /// Approximate orbit vector for L(T) hitting a list of targets.
    ConstructOrbit(OrbitArgs),
    /// Recover (a, M) from a monomial matrix.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Operator spec: a path or inline JSON.
    #[arg(long)]
    op: String,
    #[arg(long, default_value_t = 40)]
    terms: usize,
}

#[derive(Debug, Args)]
struct MatrixArgs {
    /// Operator spec: a path or inline JSON.
    #[arg(long)]
    op: String,
    #[arg(long, default_value_t = 64)]
    ncap: usize,
}

#[derive(Debug, Args)]
struct EigenArgs {
    /// Operator spec: a path or inline JSON.
    #[arg(long)]
    op: String,
    /// Working order of the family's base function.
    #[arg(long, default_value_t = 128)]
    terms: usize,
    /// Explicit λ as `re,im`; repeatable. Without it a square grid is used.
    #[arg(long = "lambda", allow_hyphen_values = true)]
    lambdas: Vec<String>,
    /// Grid points per side.
    #[arg(long, default_value_t = 5)]
    grid: usize,
    /// Largest |λ| on the grid.
    #[arg(long, default_value_t = 2.0)]
    extent: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    /// λ_k = 1/k.
    Reciprocal,
    /// Equispaced on [−1, 1].
    Segment,
    /// Seeded Gaussian samples in the unit disk.
    GaussianDisk,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Operator spec: a path or inline JSON.
    #[arg(long)]
    op: String,
    #[arg(long, default_value_t = 128)]
    terms: usize,
    /// Real polynomial coefficients, lowest first (e.g. `0,1` for z); repeatable.
    #[arg(long = "target", allow_hyphen_values = true)]
    targets: Vec<String>,
    #[arg(long, value_enum, default_value_t = Preset::Reciprocal)]
    preset: Preset,
    /// Comma-separated prefix sizes of Λ.
    #[arg(long, default_value = "5,10,20,40")]
    sizes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "1e-24")]
    ridge: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    /// Problem spec: a path or inline JSON.
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 128)]
    terms: usize,
    /// Expanding λ's per block.
    #[arg(long = "lambdas", default_value_t = 24)]
    lambda_count: usize,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long, default_value_t = DEFAULT_GAP_FACTOR)]
    gap: f64,
    #[arg(long, default_value_t = 2.0)]
    block_growth: f64,
    #[arg(long, default_value = "1e-24")]
    ridge: f64,
    #[arg(long, default_value_t = 200)]
    schedule_cap: usize,
    #[arg(long, default_value_t = 40)]
    direct_cap: usize,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    /// Build the matrix from this operator spec.
    #[arg(long, conflicts_with = "matrix")]
    op: Option<String>,
    /// Read the matrix from a CSV with columns row,col,re,im.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    ncap: usize,
}

/// Text of a spec given as a path or as inline JSON, plus a source label.
fn read_spec(arg: &str) -> Result<(String, String)> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        return Ok(("inline".to_string(), arg.to_string()));
    }
    let text = std::fs::read_to_string(arg).map_err(|source| Error::IoFailure { path: arg.to_string(), source })?;
    Ok((arg.to_string(), text))
}

/// Parse an operator from a path or inline JSON.
pub fn parse_operator_spec(arg: &str) -> Result<ParsedOperator> {
    let (_, text) = read_spec(arg)?;
    parse_operator_json(&text)
}

pub fn parse_operator_json(text: &str) -> Result<ParsedOperator> {
    let spec: OperatorSpec = serde_json::from_str(text).map_err(|e| Error::MalformedSpec(e.to_string()))?;
    spec.into_operator()
}

/// Serialized form of an [`OrbitProblem`]; the family is derived from the
/// operator when the problem is loaded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitProblemSpec {
    pub operator: OperatorSpec,
    pub targets: Vec<TaylorSeries>,
    pub radius: f64,
    pub epsilon: f64,
}

impl OrbitProblemSpec {
    pub fn into_problem(self, terms: usize) -> Result<OrbitProblem> {
        let op = self.operator.into_operator()?.composite();
        let family = EigenFamily::for_operator(&op.base, terms)?;
        OrbitProblem::new(op, family, self.targets, self.radius, self.epsilon)
    }
}

fn parse_complex(s: &str) -> Result<C64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number {p:?} in {s:?}")));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(Error::InvalidArgument(format!("expected `re` or `re,im`, got {s:?}"))),
    }
}

fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number {p:?} in {s:?}"))))
        .collect()
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad size {p:?}"))))
        .collect::<Result<_>>()?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidArgument("sizes must be positive".into()));
    }
    Ok(sizes)
}

/// `n × n` grid on the square of half-width `extent/√2`, so every point
/// has modulus at most `extent`.
pub fn square_lambda_grid(n: usize, extent: f64) -> Vec<C64> {
    let h = extent / std::f64::consts::SQRT_2;
    let coord = |i: usize| if n == 1 { 0.0 } else { -h + 2.0 * h * i as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            out.push(C64::new(coord(k), coord(i)));
        }
    }
    out
}

fn read_matrix_csv(path: &Path) -> Result<OperatorMatrix> {
    let io = |source| Error::IoFailure { path: path.display().to_string(), source };
    let text = std::fs::read_to_string(path).map_err(io)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut triplets = Vec::new();
    for rec in reader.deserialize::<(usize, usize, f64, f64)>() {
        triplets.push(rec.map_err(|e| Error::MalformedSpec(format!("{}: {e}", path.display())))?);
    }
    let rows = triplets.iter().map(|t| t.0 + 1).max().unwrap_or(0);
    let cols = triplets.iter().map(|t| t.1 + 1).max().unwrap_or(0);
    let mut m = DMatrix::from_element(rows, cols, C64::default());
    for (r, c, re, im) in triplets {
        m[(r, c)] = C64::new(re, im);
    }
    OperatorMatrix::from_entries(m)
}

fn matrix_rows(m: &OperatorMatrix) -> Vec<Vec<Cell>> {
    m.triplets()
        .into_iter()
        .map(|(r, c, re, im)| vec![Cell::from(r), Cell::from(c), Cell::from(re), Cell::from(im)])
        .collect()
}

const MATRIX_HEADER: [&str; 4] = ["row", "col", "re", "im"];

struct Context {
    out: PathBuf,
    manifest: RunManifest,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        write_json(&self.path(name), &self.manifest, value)
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        write_csv(&self.path(name), header, rows)
    }

    fn input(&mut self, arg: &str) -> Result<String> {
        let (source, text) = read_spec(arg)?;
        self.manifest.input(source, text.as_bytes());
        Ok(text)
    }
}

/// Outcome of a subcommand that completed: exit code and a one-line summary.
struct Outcome {
    code: i32,
    summary: String,
}

impl Outcome {
    fn ok(summary: impl Into<String>) -> Self {
        Outcome { code: 0, summary: summary.into() }
    }
}

fn cmd_kernel(ctx: &mut Context, args: &KernelArgs) -> Result<Outcome> {
    ctx.manifest.param("op", &args.op).param("terms", args.terms);
    let text = ctx.input(&args.op)?;
    let op = parse_operator_json(&text)?;
    let basis = kernel_basis(op.base(), args.terms)?;
    #[derive(Serialize)]
    struct KernelReport<'a> {
        #[serde(flatten)]
        basis: &'a crate::kernel::KernelBasis,
        note: &'static str,
    }
    let note = "formal kernel: entirety is evidenced by unit-disk residuals, not proven";
    ctx.json("kernel.json", &KernelReport { basis: &basis, note })?;
    let rows: Vec<Vec<Cell>> =
        basis.residuals.iter().enumerate().map(|(j, &r)| vec![Cell::from(j), Cell::from(r)]).collect();
    ctx.csv("kernel_residuals.csv", &["solution_index", "residual"], &rows)?;
    let worst = basis.residuals.iter().copied().fold(0.0, f64::max);
    Ok(Outcome::ok(format!("kernel: {} solutions, max residual {worst:.3e}", basis.solutions.len())))
}

fn cmd_commutator(ctx: &mut Context, args: &MatrixArgs) -> Result<Outcome> {
    ctx.manifest.param("op", &args.op).param("ncap", args.ncap);
    let text = ctx.input(&args.op)?;
    let op = parse_operator_json(&text)?;
    let t = op.base();
    let (m, check) = commutator_check(t, &ConvolutionOperator::derivative(1), args.ncap)?;
    let absolute = scalar_identity_check(m.entries(), None);
    let scalar = check.off_diagonal_max <= DECOMPOSE_TOL && check.diagonal_spread <= DECOMPOSE_TOL;
    #[derive(Serialize)]
    struct CommutatorReport {
        /// Deviations relative to the cancelling products.
        #[serde(flatten)]
        check: crate::operator::ScalarIdentityCheck,
        absolute_off_diagonal_max: f64,
        absolute_diagonal_spread: f64,
        #[serde(with = "crate::series::pair")]
        expected_a: C64,
        ncap: usize,
        scalar: bool,
    }
    let report = CommutatorReport {
        check,
        absolute_off_diagonal_max: absolute.off_diagonal_max,
        absolute_diagonal_spread: absolute.diagonal_spread,
        expected_a: t.a,
        ncap: args.ncap,
        scalar,
    };
    ctx.json("commutator.json", &report)?;
    ctx.csv("commutator_matrix.csv", &MATRIX_HEADER, &matrix_rows(&m))?;
    let summary = format!(
        "commutator-check: a = {:.6}{:+.6}i, off-diagonal max {:.3e}, diagonal spread {:.3e}",
        check.a.re, check.a.im, check.off_diagonal_max, check.diagonal_spread
    );
    Ok(Outcome { code: if scalar { 0 } else { 1 }, summary })
}

fn cmd_eigencheck(ctx: &mut Context, args: &EigenArgs) -> Result<Outcome> {
    ctx.manifest
        .param("op", &args.op)
        .param("terms", args.terms)
        .param("lambda", &args.lambdas)
        .param("grid", args.grid)
        .param("extent", args.extent)
        .param("radius", args.radius);
    let text = ctx.input(&args.op)?;
    let op = parse_operator_json(&text)?;
    let disk = DiskSpec::with_radius(args.radius)?;
    let t = op.base();
    let family = EigenFamily::for_operator(t, args.terms)?;
    let lambdas = if args.lambdas.is_empty() {
        square_lambda_grid(args.grid, args.extent)
    } else {
        args.lambdas.iter().map(|s| parse_complex(s)).collect::<Result<_>>()?
    };
    let composite = match &op {
        ParsedOperator::Composite(c) => Some(c),
        ParsedOperator::Weyl(_) => None,
    };
    #[derive(Serialize)]
    struct Entry {
        #[serde(with = "crate::series::pair")]
        lambda: C64,
        #[serde(with = "crate::series::pair")]
        eigenvalue: C64,
        residual: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        composite_residual: Option<f64>,
    }
    let mut entries = Vec::with_capacity(lambdas.len());
    for &l in &lambdas {
        let residual = crate::eigen::eigen_residual(t, &family, l, &disk)?;
        let composite_residual = composite.map(|c| crate::eigen::composite_eigencheck(c, &family, l, &disk)).transpose()?;
        entries.push(Entry { lambda: l, eigenvalue: family.eigenvalue(t, l), residual, composite_residual });
    }
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    let max_composite = entries.iter().filter_map(|e| e.composite_residual).reduce(f64::max);
    ctx.json(
        "eigencheck.json",
        &json!({
            "family": family,
            "entries": entries,
            "max_residual": max_residual,
            "max_composite_residual": max_composite,
        }),
    )?;
    let rows: Vec<Vec<Cell>> = entries
        .iter()
        .map(|e| {
            vec![
                Cell::from(e.lambda.re),
                Cell::from(e.lambda.im),
                Cell::from(e.residual),
                e.composite_residual.map_or(Cell::from(""), Cell::from),
            ]
        })
        .collect();
    ctx.csv("eigencheck.csv", &["lambda_re", "lambda_im", "residual", "composite_residual"], &rows)?;
    let mut summary = format!("eigencheck: {} points, max residual {max_residual:.3e}", entries.len());
    if let Some(c) = max_composite {
        summary.push_str(&format!(", max composite residual {c:.3e}"));
    }
    Ok(Outcome::ok(summary))
}

/// One point of a residual curve: a fit or the reason it could not be made.
#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<ErrorReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetCurve {
    pub target: TaylorSeries,
    pub curve: Vec<CurvePoint>,
    /// Residual never increases along the curve.
    pub non_increasing: bool,
    /// First-to-last residual ratio, when both fits exist.
    pub improvement: Option<f64>,
}

/// Fit every target on nested prefixes of `lambdas`, keeping conditioning
/// failures as data.
pub fn fit_curves(
    family: &EigenFamily,
    lambdas: &LambdaSet,
    sizes: &[usize],
    targets: &[TaylorSeries],
    disk: &DiskSpec,
    ridge: f64,
) -> Result<Vec<TargetCurve>> {
    let mut out = Vec::with_capacity(targets.len());
    for q in targets {
        let mut curve = Vec::with_capacity(sizes.len());
        for &k in sizes {
            match completeness_fit(family, &lambdas.prefix(k)?, q, disk, ridge) {
                Ok(fit) => curve.push(CurvePoint { k, fit: Some(fit), failure: None }),
                Err(e @ Error::SingularSystem { .. }) => {
                    curve.push(CurvePoint { k, fit: None, failure: Some(ErrorReport::from(&e)) })
                }
                Err(e) => return Err(e),
            }
        }
        let residuals: Vec<Option<f64>> = curve.iter().map(|p| p.fit.as_ref().map(|f| f.residual_norm)).collect();
        let non_increasing = residuals.iter().all(Option::is_some)
            && residuals.windows(2).all(|w| w[1].unwrap() <= w[0].unwrap());
        let improvement = match (residuals.first().copied().flatten(), residuals.last().copied().flatten()) {
            (Some(first), Some(last)) if last > 0.0 => Some(first / last),
            (Some(_), Some(_)) => Some(f64::INFINITY),
            _ => None,
        };
        out.push(TargetCurve { target: q.clone(), curve, non_increasing, improvement });
    }
    Ok(out)
}

pub fn curve_rows(curves: &[TargetCurve]) -> Vec<Vec<Cell>> {
    let mut rows = Vec::new();
    for (j, c) in curves.iter().enumerate() {
        for p in &c.curve {
            let (res, cond, ridge, status) = match (&p.fit, &p.failure) {
                (Some(f), _) => (f.residual_norm, f.condition_diag, f.ridge, "ok"),
                (None, _) => (f64::NAN, f64::NAN, f64::NAN, "singular"),
            };
            rows.push(vec![
                Cell::from(j),
                Cell::from(p.k),
                Cell::from(res),
                Cell::from(cond),
                Cell::from(ridge),
                Cell::from(status),
            ]);
        }
    }
    rows
}

pub const CURVE_HEADER: [&str; 6] = ["target", "k", "residual_norm", "condition_diag", "ridge", "status"];

fn cmd_complete_fit(ctx: &mut Context, args: &FitArgs) -> Result<Outcome> {
    let target_specs: Vec<String> = if args.targets.is_empty() { vec!["1".to_string()] } else { args.targets.clone() };
    ctx.manifest
        .param("op", &args.op)
        .param("terms", args.terms)
        .param("target", &target_specs)
        .param("preset", args.preset)
        .param("sizes", &args.sizes)
        .param("seed", args.seed)
        .param("ridge", args.ridge)
        .param("radius", args.radius);
    let text = ctx.input(&args.op)?;
    let op = parse_operator_json(&text)?;
    let disk = DiskSpec::with_radius(args.radius)?;
    let sizes = parse_sizes(&args.sizes)?;
    let kmax = *sizes.iter().max().expect("sizes is non-empty");
    let family = EigenFamily::for_operator(op.base(), args.terms)?;
    let lambdas = match args.preset {
        Preset::Reciprocal => LambdaSet::reciprocal(kmax)?,
        Preset::Segment => LambdaSet::segment(C64::new(-1.0, 0.0), C64::new(1.0, 0.0), kmax)?,
        Preset::GaussianDisk => LambdaSet::gaussian_disk(kmax, args.seed)?,
    };
    let targets: Vec<TaylorSeries> = target_specs
        .iter()
        .map(|s| TaylorSeries::real_polynomial(&parse_real_list(s)?, format!("target {s}")))
        .collect::<Result<_>>()?;
    let curves = fit_curves(&family, &lambdas, &sizes, &targets, &disk, args.ridge)?;
    #[derive(Serialize)]
    struct FitArtifact<'a> {
        #[serde(with = "pairs")]
        lambdas: &'a [C64],
        lambda_set: &'a str,
        targets: &'a [TargetCurve],
    }
    ctx.json(
        "fit.json",
        &FitArtifact { lambdas: lambdas.points(), lambda_set: lambdas.description(), targets: &curves },
    )?;
    ctx.csv("residual_curve.csv", &CURVE_HEADER, &curve_rows(&curves))?;
    let failed = curves.iter().any(|c| c.curve.iter().any(|p| p.failure.is_some()));
    let summary = curves
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let last = c.curve.last().and_then(|p| p.fit.as_ref()).map_or(f64::NAN, |f| f.residual_norm);
            format!("target {j}: residual {last:.3e} at K={kmax}")
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome { code: if failed { 1 } else { 0 }, summary: format!("complete-fit: {summary}") })
}

fn cmd_construct_orbit(ctx: &mut Context, args: &OrbitArgs) -> Result<Outcome> {
    ctx.manifest
        .param("problem", &args.problem)
        .param("terms", args.terms)
        .param("lambdas", args.lambda_count)
        .param("margin", args.margin)
        .param("gap", args.gap)
        .param("block_growth", args.block_growth)
        .param("ridge", args.ridge)
        .param("schedule_cap", args.schedule_cap)
        .param("direct_cap", args.direct_cap);
    let text = ctx.input(&args.problem)?;
    let spec: OrbitProblemSpec = serde_json::from_str(&text).map_err(|e| Error::MalformedSpec(e.to_string()))?;
    let problem = spec.into_problem(args.terms)?;
    let config = OrbitConfig {
        ridge: args.ridge,
        schedule_cap: args.schedule_cap,
        direct_cap: args.direct_cap,
        block_growth: args.block_growth,
    };
    let construction = construct_orbit_with(&problem, args.lambda_count, args.margin, args.gap, &config)?;
    let verification = verify_orbit_with(&construction, &problem, args.direct_cap)?;
    ctx.json("orbit.json", &json!({ "construction": construction, "verification": verification }))?;
    let rows: Vec<Vec<Cell>> = construction
        .report
        .iter()
        .map(|r| vec![Cell::from(r.target), Cell::from(r.n), Cell::from(r.achieved_error), Cell::from(r.leakage_bound)])
        .collect();
    ctx.csv("orbit_errors.csv", &["j", "n_j", "achieved_error", "leakage_bound"], &rows)?;
    let errs: Vec<String> = construction.report.iter().map(|r| format!("{:.3e}", r.achieved_error)).collect();
    Ok(Outcome::ok(format!(
        "construct-orbit: schedule {:?}, achieved errors [{}]",
        construction.schedule,
        errs.join(", ")
    )))
}

fn cmd_decompose(ctx: &mut Context, args: &DecomposeArgs) -> Result<Outcome> {
    ctx.manifest.param("ncap", args.ncap);
    let matrix = match (&args.op, &args.matrix) {
        (Some(op), None) => {
            ctx.manifest.param("op", op);
            let text = ctx.input(op)?;
            let parsed = parse_operator_json(&text)?;
            let m = match &parsed {
                ParsedOperator::Weyl(t) => matrix_on_monomials(t, args.ncap)?,
                ParsedOperator::Composite(c) => matrix_on_monomials(c as &CompositeOperator, args.ncap)?,
            };
            ctx.csv("matrix.csv", &MATRIX_HEADER, &matrix_rows(&m))?;
            m
        }
        (None, Some(path)) => {
            ctx.manifest.param("matrix", path.display().to_string());
            let bytes = std::fs::read(path).map_err(|source| Error::IoFailure { path: path.display().to_string(), source })?;
            ctx.manifest.input(path.display().to_string(), &bytes);
            read_matrix_csv(path)?
        }
        _ => return Err(Error::InvalidArgument("decompose needs exactly one of --op or --matrix".into())),
    };
    let d = decompose(&matrix)?;
    let spec = OperatorSpec::from_operator(&ParsedOperator::Weyl(d.operator.clone()));
    ctx.json(
        "decompose.json",
        &json!({
            "operator": spec,
            "commutator": d.commutator,
            "convolution_deviation": d.convolution_deviation,
        }),
    )?;
    Ok(Outcome::ok(format!(
        "decompose: a = {:.6}{:+.6}i, order {}, off-diagonal {:.3e}",
        d.operator.a.re,
        d.operator.a.im,
        d.operator.order(),
        d.commutator.off_diagonal_max
    )))
}

fn artifact_dir(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os(WORKDIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Kernel(_) => "kernel",
        Command::CommutatorCheck(_) => "commutator-check",
        Command::Eigencheck(_) => "eigencheck",
        Command::CompleteFit(_) => "complete-fit",
        Command::ConstructOrbit(_) => "construct-orbit",
        Command::Decompose(_) => "decompose",
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let name = command_name(&cli.command);
    let mut ctx = Context {
        out: artifact_dir(cli.out),
        manifest: RunManifest::new(name, cli.timestamp.unwrap_or_else(default_timestamp)),
    };
    let result = match &cli.command {
        Command::Kernel(a) => cmd_kernel(&mut ctx, a),
        Command::CommutatorCheck(a) => cmd_commutator(&mut ctx, a),
        Command::Eigencheck(a) => cmd_eigencheck(&mut ctx, a),
        Command::CompleteFit(a) => cmd_complete_fit(&mut ctx, a),
        Command::ConstructOrbit(a) => cmd_construct_orbit(&mut ctx, a),
        Command::Decompose(a) => cmd_decompose(&mut ctx, a),
    };
    let manifest_written = write_json(&ctx.path("manifest.json"), &ctx.manifest, &json!({ "command": name }));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if let Err(e) = manifest_written {
                eprintln!("error: {e}");
                return 2;
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            let _ = ctx.json("error.json", &ErrorReport::from(&e));
            report::exit_code(&e)
        }
    }
}
