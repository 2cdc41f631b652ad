//! Command-line front end: `solve`, `value`, `sweep` and `validate`.
//!
//! Exit codes: 0 on success, 2 for bad input (flags, model files, models
//! that are not transient), 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::diffusion::{default_probe_grid, validate_assumptions, DiffusionModel, ModelSpec, ValidationReport};
use crate::error::{Error, Result};
use crate::montecarlo::{paths_csv, simulate_paths, sweep_from_paths, CrossingRule, McConfig};
use crate::solver::{solve, BoundarySolution, SolveMethod};
use crate::valuation::{default_grid, verify_free_boundary, ValueCurve, ValueFunction, VerificationReport};

pub const SOLVE_SCHEMA: &str = "lastpassage.solve/1";
pub const VALUE_SCHEMA: &str = "lastpassage.value/1";
pub const SWEEP_SCHEMA: &str = "lastpassage.sweep/1";
pub const VALIDATE_SCHEMA: &str = "lastpassage.validate/1";
pub const ERROR_SCHEMA: &str = "lastpassage.error/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lastpassage", version, about = "Optimal stopping rules that predict the last passage of a transient diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal threshold r*.
    Solve(SolveArgs),
    /// Tabulate the value function and optionally verify it.
    Value(ValueArgs),
    /// Monte Carlo estimates of the criterion over a set of thresholds.
    Sweep(SweepArgs),
    /// Run the transience checks on a model.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Bessel,
    #[value(alias = "squared_bessel")]
    SquaredBessel,
    Gbm,
    Explosive,
    #[value(alias = "power_law")]
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// JSON model file, e.g. {"family": "bessel", "params": {"delta": 3}}.
    #[arg(long, value_name = "PATH", conflicts_with = "family")]
    pub model_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; defaults to stdout, or to a file in the output directory.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Directory for outputs when `--out` is not given.
    #[arg(long, env = "LASTPASSAGE_OUT_DIR", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub z: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValueArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Level z; taken from `--r-star-from` when omitted there.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<f64>,
    /// Attach the free-boundary verification report.
    #[arg(long)]
    pub verify: bool,
    /// Reuse the solution in a `solve` JSON document instead of re-solving.
    #[arg(long, value_name = "PATH")]
    pub r_star_from: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub z: f64,
    /// Thresholds, comma separated. Default: r* times 0.6, 0.7, ..., 1.4.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub r: Option<Vec<f64>>,
    /// Starting point; defaults to z.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Base time step; defaults to 1e-4 z^2.
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Transience cutoff on s(X)/s(z).
    #[arg(long, default_value_t = 1e-4, allow_hyphen_values = true)]
    pub eps: f64,
    /// Time horizon; defaults to 1e12 z^2.
    #[arg(long, allow_hyphen_values = true)]
    pub tmax: Option<f64>,
    /// Adaptive step factor; 0 disables adaptive steps.
    #[arg(long, default_value_t = 0.1)]
    pub theta: f64,
    /// Detect crossings at grid points only.
    #[arg(long)]
    pub grid_crossings: bool,
    /// Write per-path outcomes, scored at the argmin, to this CSV file.
    #[arg(long, value_name = "PATH")]
    pub paths_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub z: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn need(v: Option<f64>, name: &str, family: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Spec(format!("family {family} requires --{name}")))
}

impl ModelArgs {
    fn given(&self) -> bool {
        self.family.is_some() || self.model_file.is_some()
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        if let Some(path) = &self.model_file {
            return ModelSpec::from_file(path).map_err(|e| match e {
                Error::Io(io) => Error::Spec(format!("cannot read model file {}: {io}", path.display())),
                other => other,
            });
        }
        let Some(family) = self.family else {
            return Err(Error::Spec("one of --family or --model-file is required".into()));
        };
        Ok(match family {
            Family::Bessel => ModelSpec::Bessel { delta: need(self.delta, "delta", "bessel")? },
            Family::SquaredBessel => ModelSpec::SquaredBessel { delta: need(self.delta, "delta", "squared-bessel")? },
            Family::Gbm => ModelSpec::Gbm {
                lambda: need(self.lambda, "lambda", "gbm")?,
                sigma: need(self.sigma, "sigma", "gbm")?,
            },
            Family::Explosive => ModelSpec::Explosive {
                lambda: need(self.lambda, "lambda", "explosive")?,
                kappa: need(self.kappa, "kappa", "explosive")?,
                p: need(self.p, "p", "explosive")?,
            },
            Family::PowerLaw => ModelSpec::PowerLaw {
                alpha: need(self.alpha, "alpha", "power-law")?,
                beta: need(self.beta, "beta", "power-law")?,
                mu: need(self.mu, "mu", "power-law")?,
                nu: need(self.nu, "nu", "power-law")?,
            },
        })
    }
}

/// Builds the model and rejects it unless it passes the transience checks.
fn checked_model(spec: &ModelSpec, z: f64) -> Result<(DiffusionModel, ValidationReport)> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("--z must be positive, got {z}")));
    }
    let model = spec.build()?;
    let report = validate_assumptions(&model, &default_probe_grid(z))?;
    if !report.is_valid() {
        return Err(Error::InvalidModel(format!(
            "{} is not transient on (0, inf): {}",
            model.name(),
            report.failures().join("; ")
        )));
    }
    Ok((model, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDocument {
    pub schema: String,
    pub model: ModelSpec,
    pub z: f64,
    pub r_star: f64,
    pub cost_root: f64,
    pub method: SolveMethod,
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<serde_json::Value>,
}

impl SolveDocument {
    fn new(spec: &ModelSpec, sol: &BoundarySolution, report: &ValidationReport) -> Self {
        Self {
            schema: SOLVE_SCHEMA.into(),
            model: spec.clone(),
            z: sol.z,
            r_star: sol.r_star,
            cost_root: sol.cost_root,
            method: sol.method,
            residual: sol.residual,
            iterations: sol.iterations,
            bracket: sol.bracket,
            validation: serde_json::to_value(report).ok(),
        }
    }

    pub fn solution(&self) -> BoundarySolution {
        BoundarySolution {
            r_star: self.r_star,
            cost_root: self.cost_root,
            method: self.method,
            residual: self.residual,
            bracket: self.bracket,
            iterations: self.iterations,
            z: self.z,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read solution file {}: {e}", path.display())))?;
        let doc: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Spec(format!("solution file {}: {e}", path.display())))?;
        if doc.schema != SOLVE_SCHEMA {
            return Err(Error::Spec(format!("solution file has schema {:?}, expected {SOLVE_SCHEMA:?}", doc.schema)));
        }
        Ok(doc)
    }
}

#[derive(Debug, Serialize)]
struct CurveColumns<'a> {
    x: &'a [f64],
    #[serde(rename = "V")]
    v: &'a [f64],
    #[serde(rename = "Vprime")]
    vprime: &'a [f64],
    method: Vec<&'static str>,
}

#[derive(Debug, Serialize)]
struct ValueDocument<'a> {
    schema: &'static str,
    model: &'a ModelSpec,
    z: f64,
    r_star: f64,
    solved: bool,
    origin_limit: &'a crate::valuation::OriginLimit,
    curve: CurveColumns<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<&'a VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification_passed: Option<bool>,
}

#[derive(Debug, Serialize)]
struct SweepPoint {
    r: f64,
    mean: f64,
    std_error: f64,
    paired_std_error: f64,
    n_effective: usize,
    n_paths: usize,
    censor_fraction: f64,
    exploded_fraction: f64,
}

#[derive(Debug, Serialize)]
struct SweepDocument<'a> {
    schema: &'static str,
    model: &'a ModelSpec,
    z: f64,
    config: &'a McConfig,
    r_star: Option<f64>,
    points: Vec<SweepPoint>,
    argmin_r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

#[derive(Debug, Serialize)]
struct ValidateDocument<'a> {
    schema: &'static str,
    model: &'a ModelSpec,
    z: f64,
    valid: bool,
    failures: Vec<&'static str>,
    report: &'a ValidationReport,
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `--out`, to `out_dir/default_name`, or to stdout.
fn emit(output: &OutputArgs, default_name: &str, text: &str, stdout: &mut dyn std::io::Write) -> Result<Option<PathBuf>> {
    let target = match (&output.out, &output.out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            fs::create_dir_all(dir)?;
            Some(dir.join(default_name))
        }
        (None, None) => None,
    };
    match &target {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(target)
}

fn cmd_solve(args: &SolveArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let spec = args.model.spec()?;
    let (model, report) = checked_model(&spec, args.z)?;
    let cf = CostFunction::new(&model, args.z)?;
    let sol = solve(&model, &cf)?;
    let doc = SolveDocument::new(&spec, &sol, &report);
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&doc)?,
        Format::Csv => format!(
            "z,r_star,cost_root,method,residual,iterations\n{:.16e},{:.16e},{:.16e},{},{:.16e},{}\n",
            sol.z,
            sol.r_star,
            sol.cost_root,
            sol.method.as_str(),
            sol.residual,
            sol.iterations
        ),
    };
    let ext = if args.output.format == Some(Format::Csv) { "csv" } else { "json" };
    emit(&args.output, &format!("solve.{ext}"), &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_value(args: &ValueArgs, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> Result<i32> {
    let from = args.r_star_from.as_deref().map(SolveDocument::read).transpose()?;
    let spec = match (&from, args.model.given()) {
        (_, true) => args.model.spec()?,
        (Some(doc), false) => doc.model.clone(),
        (None, false) => return Err(Error::Spec("one of --family, --model-file or --r-star-from is required".into())),
    };
    let z = match (args.z, &from) {
        (Some(z), _) => z,
        (None, Some(doc)) => doc.z,
        (None, None) => 1.0,
    };
    if let Some(doc) = &from {
        if doc.model != spec || doc.z != z {
            return Err(Error::Spec(format!(
                "solution file was computed for {} at z = {}, not for this model at z = {z}",
                doc.model.to_json(),
                doc.z
            )));
        }
    }
    let (model, _) = checked_model(&spec, z)?;
    let cf = CostFunction::new(&model, z)?;
    let sol = match &from {
        Some(doc) => doc.solution(),
        None => solve(&model, &cf)?,
    };
    let vf = ValueFunction::new(&cf, &sol)?;
    let curve = ValueCurve::compute(&vf, &default_grid(z, sol.r_star))?;
    let report = args.verify.then(|| verify_free_boundary(&vf, &curve));

    let format = args.output.format.unwrap_or(Format::Csv);
    let text = match format {
        Format::Csv => curve.to_csv(),
        Format::Json => to_json(&ValueDocument {
            schema: VALUE_SCHEMA,
            model: &spec,
            z,
            r_star: sol.r_star,
            solved: from.is_none(),
            origin_limit: &curve.origin_limit,
            curve: CurveColumns {
                x: &curve.grid,
                v: &curve.values,
                vprime: &curve.derivative,
                method: curve.method.iter().map(|m| m.as_str()).collect(),
            },
            verification: report.as_ref(),
            verification_passed: report.as_ref().map(VerificationReport::passed),
        })?,
    };
    let ext = if format == Format::Csv { "csv" } else { "json" };
    let written = emit(&args.output, &format!("value.{ext}"), &text, stdout)?;

    if let (Some(r), Format::Csv) = (&report, format) {
        // The CSV has no room for the report; put it next to the curve.
        let doc = serde_json::json!({ "schema": VALUE_SCHEMA, "passed": r.passed(), "verification": r });
        let body = to_json(&doc)?;
        match written {
            Some(p) => fs::write(p.with_extension("verify.json"), body)?,
            None => stderr.write_all(body.as_bytes())?,
        }
    }
    match report {
        Some(r) if !r.passed() => {
            let _ = writeln!(stderr, "verification failed");
            Ok(EXIT_NUMERIC)
        }
        _ => Ok(EXIT_OK),
    }
}

fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> Result<i32> {
    let spec = args.model.spec()?;
    let z = args.z;
    let (model, _) = checked_model(&spec, z)?;
    let cf = CostFunction::new(&model, z)?;
    let (r_values, r_star) = match &args.r {
        Some(rs) => (rs.clone(), None),
        None => {
            let r_star = solve(&model, &cf)?.r_star;
            ((6..=14).map(|k| r_star * k as f64 / 10.0).collect(), Some(r_star))
        }
    };
    let mut cfg = McConfig::new(z);
    cfg.n_paths = args.paths;
    cfg.seed = args.seed;
    cfg.upper_barrier_eps = args.eps;
    cfg.theta = args.theta;
    if let Some(x0) = args.x0 {
        cfg.x0 = x0;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t) = args.tmax {
        cfg.t_max = t;
    }
    if args.grid_crossings {
        cfg.crossing = CrossingRule::Grid;
    }
    let paths = simulate_paths(&model, &cfg, &cf, &r_values)?;
    let sweep = sweep_from_paths(&paths, &r_values);
    let warning = sweep
        .points
        .iter()
        .find(|(_, e)| e.censor_warning)
        .map(|(r, e)| format!("{:.1}% of paths censored (at r = {r}); estimates may be biased", 100.0 * e.censor_fraction));

    if let Some(p) = &args.paths_out {
        fs::write(p, paths_csv(&paths, sweep.argmin))?;
    }
    let format = args.output.format.unwrap_or(Format::Csv);
    let text = match format {
        Format::Csv => sweep.to_csv(),
        Format::Json => to_json(&SweepDocument {
            schema: SWEEP_SCHEMA,
            model: &spec,
            z,
            config: &cfg,
            r_star,
            points: sweep
                .points
                .iter()
                .zip(&sweep.paired_std_error)
                .map(|((r, e), pse)| SweepPoint {
                    r: *r,
                    mean: e.mean,
                    std_error: e.std_error,
                    paired_std_error: *pse,
                    n_effective: e.n_effective,
                    n_paths: e.n_paths,
                    censor_fraction: e.censor_fraction,
                    exploded_fraction: e.exploded_fraction,
                })
                .collect(),
            argmin_r: sweep.argmin_r(),
            warning: warning.clone(),
        })?,
    };
    let ext = if format == Format::Csv { "csv" } else { "json" };
    emit(&args.output, &format!("sweep.{ext}"), &text, stdout)?;
    let _ = writeln!(stderr, "argmin_r={:.16e}", sweep.argmin_r());
    if let Some(w) = warning {
        let _ = writeln!(stderr, "warning: {w}");
    }
    Ok(EXIT_OK)
}

fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn std::io::Write) -> Result<i32> {
    let spec = args.model.spec()?;
    let model = spec.build()?;
    let report = validate_assumptions(&model, &default_probe_grid(args.z))?;
    let doc = ValidateDocument {
        schema: VALIDATE_SCHEMA,
        model: &spec,
        z: args.z,
        valid: report.is_valid(),
        failures: report.failures(),
        report: &report,
    };
    emit(&args.output, "validate.json", &to_json(&doc)?, stdout)?;
    Ok(if report.is_valid() { EXIT_OK } else { EXIT_INPUT })
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::InvalidModel(_) => "invalid_model",
        Error::Spec(_) => "spec",
        Error::Integrability(_) => "integrability",
        Error::Quadrature { .. } => "quadrature",
        Error::NoRoot(_) => "no_root",
        Error::Divergence(_) => "divergence",
        Error::Simulation(_) => "simulation",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERIC
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Value(a) => cmd_value(a, stdout, stderr),
        Command::Sweep(a) => cmd_sweep(a, stdout, stderr),
        Command::Validate(a) => cmd_validate(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let code = exit_code(&e);
            let doc = serde_json::json!({
                "schema": ERROR_SCHEMA,
                "error": error_kind(&e),
                "message": e.to_string(),
                "exit_code": code,
            });
            let _ = writeln!(stderr, "{doc}");
            code
        }
    }
}

/// Parses `args` and runs the command. Usage errors exit with 2.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    execute(&cli, &mut out, &mut err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> (i32, String, String) {
        let cli = Cli::try_parse_from(std::iter::once("lastpassage").chain(args.iter().copied())).unwrap();
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = execute(&cli, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn solve_bessel() {
        let (code, out, _) = exec(&["solve", "--family", "bessel", "--delta", "3", "--z", "1"]);
        assert_eq!(code, 0);
        let doc: SolveDocument = serde_json::from_str(&out).unwrap();
        assert_eq!(doc.schema, SOLVE_SCHEMA);
        assert!((doc.r_star - 2.879385241571817).abs() < 1e-9);
    }

    #[test]
    fn missing_parameter_is_input_error() {
        let (code, _, err) = exec(&["solve", "--family", "gbm", "--lambda", "1"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("--sigma"), "{err}");
    }

    #[test]
    fn csv_solve() {
        let (code, out, _) = exec(&["solve", "--family", "squared-bessel", "--delta", "4", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("z,r_star,cost_root,method,residual,iterations\n"));
    }

    #[test]
    fn validate_reports() {
        let (code, out, _) = exec(&["validate", "--family", "bessel", "--delta", "3"]);
        assert_eq!(code, 0);
        assert!(out.contains(VALIDATE_SCHEMA));
    }
}
