//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other errors, 2 parse/usage errors, 3 ties,
//! 4 unsupported (functional, model) pairs.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::closedform::{linspace, AesfEvaluator};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Dataset, FunctionalId};
use crate::models::{Law, ModelSpec};
use crate::sensitivity::{
    convergence_study, esf_mc, sf, sf_distribution, ConvergenceCurve, McEstimate, Point, DEFAULT_SCHEDULE,
};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0x5EED_AE5F;

/// Points per axis of the scenario surfaces.
const FIGURE_POINTS: usize = 41;
/// Points per axis of the ρ = 0.7 surfaces: step 0.1 on [−3, 3], so 0 and ±2 are nodes.
const RHO_GRID_POINTS: usize = 61;

#[derive(Debug, Parser)]
#[command(name = "aesf", version, about = "Sensitivity functions and their expected and asymptotic forms")]
pub struct Cli {
    /// Print a JSON run report to stdout instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    /// RNG seed (decimal or 0x-prefixed hex).
    #[arg(long, global = true, default_value = "0x5EED_AE5F", value_parser = parse_seed)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct PointArgs {
    #[arg(long, allow_negative_numbers = true)]
    x: f64,
    /// Required for bivariate functionals.
    #[arg(long, allow_negative_numbers = true)]
    y: Option<f64>,
}

impl PointArgs {
    fn point(&self) -> Point {
        Point { x: self.x, y: self.y }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate an estimator on a CSV file with header `x` or `x,y`.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, short)]
        functional: FunctionalId,
    },
    /// Sensitivity function of an estimator on a CSV file at one point.
    Sf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, short)]
        functional: FunctionalId,
        #[command(flatten)]
        point: PointArgs,
    },
    /// Monte Carlo expected sensitivity function at sample size n.
    Esf {
        /// Model as inline JSON, a JSON file, or a preset name (A, B, C).
        #[arg(long, short)]
        model: String,
        #[arg(long, short)]
        functional: FunctionalId,
        #[arg(long, short)]
        n: usize,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
    },
    /// Closed-form AESF over a grid, written as CSV.
    AesfGrid {
        #[arg(long, short)]
        model: Option<String>,
        #[arg(long, short)]
        functional: Option<FunctionalId>,
        /// Figure preset: 1 Kendall, 2 Spearman, 3 both, 4 Chatterjee under A/B/C.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        figure: Option<u8>,
        /// x_min,x_max,y_min,y_max,nx,ny
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<GridSpec>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Monte Carlo ESF over a schedule of sample sizes, with the closed-form target.
    Converge {
        #[arg(long, short)]
        model: String,
        #[arg(long, short)]
        functional: FunctionalId,
        #[command(flatten)]
        point: PointArgs,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Raw SF replicate values, one per CSV row.
    Sfdist {
        #[arg(long, short)]
        model: String,
        #[arg(long, short)]
        functional: FunctionalId,
        #[arg(long, short)]
        n: usize,
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let t = s.trim().replace('_', "");
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed '{s}': {e}"))
}

/// Rectangular evaluation grid; x varies in the outer loop, y in the inner one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, points: usize) -> Self {
        Self { x_min: lo, x_max: hi, y_min: lo, y_max: hi, nx: points, ny: points }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::domain("grid needs finite x_min < x_max and y_min < y_max"));
        }
        if self.nx == 0 || self.ny == 0 || self.nx.saturating_mul(self.ny) > 1_000_000 {
            return Err(Error::domain("grid needs 1 <= nx*ny <= 1e6"));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y_min, self.y_max, self.ny)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(Error::Parse("grid is x_min,x_max,y_min,y_max,nx,ny".into()));
        }
        let real = |t: &str| t.parse::<f64>().map_err(|e| Error::Parse(format!("grid value '{t}': {e}")));
        let count = |t: &str| t.parse::<usize>().map_err(|e| Error::Parse(format!("grid count '{t}': {e}")));
        let g = GridSpec {
            x_min: real(parts[0])?,
            x_max: real(parts[1])?,
            y_min: real(parts[2])?,
            y_max: real(parts[3])?,
            nx: count(parts[4])?,
            ny: count(parts[5])?,
        };
        g.validate()?;
        Ok(g)
    }
}

/// Default surface extent for a model: ρ-grids over [−3, 3]², additive models
/// over the X range × [min g − 3σ, max g + 3σ].
pub fn default_grid(model: &ModelSpec) -> GridSpec {
    let span = |law: Law| match law {
        Law::Normal { mean, sd } => (mean - 3.0 * sd, mean + 3.0 * sd),
        Law::Uniform { lo, hi } => (lo, hi),
    };
    let (x_min, x_max) = span(model.x_law());
    let (y_min, y_max) = match *model {
        ModelSpec::BivariateGaussian { .. } => (-3.0, 3.0),
        ModelSpec::AdditiveNoise { x_law, link, noise_sigma } => {
            let (lo, hi) = span(x_law);
            let (gmin, gmax) = link.range(lo, hi);
            (gmin - 3.0 * noise_sigma, gmax + 3.0 * noise_sigma)
        }
        ModelSpec::IndependentProduct { y_law, .. } => span(y_law),
        _ => (0.0, 1.0),
    };
    GridSpec { x_min, x_max, y_min, y_max, nx: FIGURE_POINTS, ny: FIGURE_POINTS }
}

/// Result payload of one command.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Scalar { value: f64 },
    Estimate(McEstimate),
    Curve(ConvergenceCurve),
    Files { paths: Vec<String>, rows: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// The invocation, shell-quoted; re-running it reproduces `result`.
    pub command: String,
    pub subcommand: &'static str,
    pub model: Option<ModelSpec>,
    pub functional: Option<String>,
    pub seed: u64,
    pub wall_time_s: f64,
    pub result: Payload,
}

/// Formats like C's `%.12g`, with −0 printed as 0.
pub fn fmt_g12(v: f64) -> String {
    const P: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Reads a CSV with header `x` or `x,y`; at least two rows of finite decimals.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    let bivariate = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x"] => false,
        ["x", "y"] => true,
        _ => {
            return Err(Error::Parse(format!(
                "{}: header must be `x` or `x,y`, found `{}`",
                path.display(),
                header.join(",")
            )))
        }
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let field = |k: usize| -> Result<f64> {
            let t = rec.get(k).unwrap_or("");
            match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse(format!("{}:{line}: '{t}' is not a finite number", path.display()))),
            }
        };
        xs.push(field(0)?);
        if bivariate {
            ys.push(field(1)?);
        }
    }
    if xs.len() < 2 {
        return Err(Error::Parse(format!("{}: need at least 2 data rows", path.display())));
    }
    if bivariate {
        Dataset::bivariate(xs, ys)
    } else {
        Dataset::univariate(xs)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(io) = e.kind() {
        return Error::Io(format!("{}: {io}", path.display()));
    }
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Inline JSON, a preset name, or a path to a JSON file.
pub fn load_model(arg: &str) -> Result<ModelSpec> {
    let t = arg.trim();
    if t.starts_with('{') {
        return ModelSpec::from_json(t);
    }
    if let Some(m) = ModelSpec::preset(t) {
        return Ok(m);
    }
    let text = std::fs::read_to_string(t).map_err(|e| Error::Io(format!("model '{t}': {e}")))?;
    ModelSpec::from_json(&text)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes one AESF surface; returns the row count.
fn write_surface(path: &Path, f: FunctionalId, model: &ModelSpec, grid: &GridSpec) -> Result<usize> {
    grid.validate()?;
    let ev = AesfEvaluator::new(f, model)?;
    let xs = grid.xs();
    let mut w = create(path)?;
    if !f.is_bivariate() {
        writeln!(w, "x,aesf")?;
        let vals = xs.iter().map(|&x| ev.eval(Point::univariate(x))).collect::<Result<Vec<_>>>()?;
        for (x, v) in xs.iter().zip(&vals) {
            writeln!(w, "{},{}", fmt_g12(*x), fmt_g12(*v))?;
        }
        finish(w, path)?;
        return Ok(xs.len());
    }
    let ys = grid.ys();
    let vals = ev.grid(&xs, &ys)?;
    writeln!(w, "x,y,aesf")?;
    let mut k = 0;
    for &x in &xs {
        for &y in &ys {
            writeln!(w, "{},{},{}", fmt_g12(x), fmt_g12(y), fmt_g12(vals[k]))?;
            k += 1;
        }
    }
    finish(w, path)?;
    Ok(vals.len())
}

fn write_comparison(path: &Path, model: &ModelSpec, grid: &GridSpec) -> Result<usize> {
    grid.validate()?;
    let (xs, ys) = (grid.xs(), grid.ys());
    let k = AesfEvaluator::new(FunctionalId::Kendall, model)?.grid(&xs, &ys)?;
    let s = AesfEvaluator::new(FunctionalId::Spearman, model)?.grid(&xs, &ys)?;
    let mut w = create(path)?;
    writeln!(w, "x,y,aesf_kendall,aesf_spearman,abs_diff")?;
    let mut i = 0;
    for &x in &xs {
        for &y in &ys {
            let d = k[i].abs() - s[i].abs();
            writeln!(w, "{},{},{},{},{}", fmt_g12(x), fmt_g12(y), fmt_g12(k[i]), fmt_g12(s[i]), fmt_g12(d))?;
            i += 1;
        }
    }
    finish(w, path)?;
    Ok(k.len())
}

/// `dir/stem_<tag>.csv` next to `out`.
fn tagged_path(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "surface".into());
    out.with_file_name(format!("{stem}_{tag}.csv"))
}

fn shell_quote(arg: &str) -> String {
    let plain = !arg.is_empty()
        && arg
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_./:=,+@%".contains(c));
    if plain {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', "'\\''"))
    }
}

fn echo(args: &[OsString]) -> String {
    let mut parts = vec!["aesf".to_string()];
    parts.extend(args.iter().skip(1).map(|a| shell_quote(&a.to_string_lossy())));
    parts.join(" ")
}

struct Outcome {
    subcommand: &'static str,
    model: Option<ModelSpec>,
    functional: Option<FunctionalId>,
    result: Payload,
    text: String,
}

fn execute(cmd: &Command, seed: u64) -> Result<Outcome> {
    match cmd {
        Command::Estimate { input, functional } => {
            let ds = read_dataset(input)?;
            let v = estimate(*functional, &ds)?;
            Ok(Outcome {
                subcommand: "estimate",
                model: None,
                functional: Some(*functional),
                result: Payload::Scalar { value: v },
                text: fmt_g12(v),
            })
        }
        Command::Sf { input, functional, point } => {
            let ds = read_dataset(input)?;
            let v = sf(*functional, &ds, point.point())?;
            Ok(Outcome {
                subcommand: "sf",
                model: None,
                functional: Some(*functional),
                result: Payload::Scalar { value: v },
                text: fmt_g12(v),
            })
        }
        Command::Esf { model, functional, n, point, replicates } => {
            let m = load_model(model)?;
            let e = esf_mc(*functional, &m, *n, point.point(), *replicates, seed)?;
            let text = format!("esf {}\nstd_error {}", fmt_g12(e.value), fmt_g12(e.std_error));
            Ok(Outcome {
                subcommand: "esf",
                model: Some(m),
                functional: Some(*functional),
                result: Payload::Estimate(e),
                text,
            })
        }
        Command::AesfGrid { model, functional, figure, grid, out } => {
            aesf_grid(model.as_deref(), *functional, *figure, *grid, out)
        }
        Command::Converge { model, functional, point, schedule, replicates, out } => {
            let m = load_model(model)?;
            let schedule = schedule.clone().unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
            let curve = convergence_study(*functional, &m, point.point(), &schedule, *replicates, seed)?;
            let mut w = create(out)?;
            writeln!(w, "n,esf,std_error,target")?;
            let target = curve.target.map(fmt_g12).unwrap_or_default();
            for e in &curve.estimates {
                writeln!(w, "{},{},{},{}", e.n, fmt_g12(e.value), fmt_g12(e.std_error), target)?;
            }
            finish(w, out)?;
            Ok(Outcome {
                subcommand: "converge",
                model: Some(m),
                functional: Some(*functional),
                text: format!("wrote {} ({} rows)", out.display(), curve.estimates.len()),
                result: Payload::Curve(curve),
            })
        }
        Command::Sfdist { model, functional, n, point, replicates, out } => {
            let m = load_model(model)?;
            let draws = sf_distribution(*functional, &m, *n, point.point(), *replicates, seed)?;
            let mut w = create(out)?;
            writeln!(w, "sf")?;
            for v in &draws {
                writeln!(w, "{}", fmt_g12(*v))?;
            }
            finish(w, out)?;
            Ok(Outcome {
                subcommand: "sfdist",
                model: Some(m),
                functional: Some(*functional),
                text: format!("wrote {} ({} rows)", out.display(), draws.len()),
                result: Payload::Files { paths: vec![out.display().to_string()], rows: draws.len() },
            })
        }
    }
}

fn aesf_grid(
    model: Option<&str>,
    functional: Option<FunctionalId>,
    figure: Option<u8>,
    grid: Option<GridSpec>,
    out: &Path,
) -> Result<Outcome> {
    let gaussian = ModelSpec::BivariateGaussian { rho: 0.7 };
    let figure_grid = grid.unwrap_or(GridSpec::square(-3.0, 3.0, RHO_GRID_POINTS));
    let (paths, rows, m, f) = match figure {
        Some(1) => (vec![out.to_path_buf()], write_surface(out, FunctionalId::Kendall, &gaussian, &figure_grid)?, Some(gaussian), Some(FunctionalId::Kendall)),
        Some(2) => (vec![out.to_path_buf()], write_surface(out, FunctionalId::Spearman, &gaussian, &figure_grid)?, Some(gaussian), Some(FunctionalId::Spearman)),
        Some(3) => (vec![out.to_path_buf()], write_comparison(out, &gaussian, &figure_grid)?, Some(gaussian), None),
        Some(4) => {
            let mut paths = Vec::new();
            let mut rows = 0;
            for (tag, m) in [("A", ModelSpec::scenario_a()), ("B", ModelSpec::scenario_b()), ("C", ModelSpec::scenario_c())] {
                let p = tagged_path(out, tag);
                let g = grid.unwrap_or_else(|| default_grid(&m));
                rows += write_surface(&p, FunctionalId::Chatterjee, &m, &g)?;
                paths.push(p);
            }
            (paths, rows, None, Some(FunctionalId::Chatterjee))
        }
        _ => {
            let m = load_model(model.ok_or_else(|| Error::Parse("aesf-grid needs --model or --figure".into()))?)?;
            let f = functional.ok_or_else(|| Error::Parse("aesf-grid needs --functional or --figure".into()))?;
            let g = grid.unwrap_or_else(|| default_grid(&m));
            (vec![out.to_path_buf()], write_surface(out, f, &m, &g)?, Some(m), Some(f))
        }
    };
    let paths: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    Ok(Outcome {
        subcommand: "aesf-grid",
        model: m,
        functional: f,
        text: format!("wrote {} ({rows} rows)", paths.join(", ")),
        result: Payload::Files { paths, rows },
    })
}

/// Parses `args` (including the program name), runs the command, writes the
/// plain or JSON report to `stdout`, errors to stderr, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_parsed(&cli, &args) {
        Ok((report, text)) => {
            let written = if cli.json {
                serde_json::to_string_pretty(&report)
                    .map_err(std::io::Error::other)
                    .and_then(|s| writeln!(stdout, "{s}"))
            } else {
                writeln!(stdout, "{text}")
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_parsed(cli: &Cli, args: &[OsString]) -> Result<(RunReport, String)> {
    let start = Instant::now();
    let outcome = match cli.threads {
        Some(0) => return Err(Error::domain("--threads must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Io(format!("thread pool: {e}")))?
            .install(|| execute(&cli.command, cli.seed))?,
        None => execute(&cli.command, cli.seed)?,
    };
    let report = RunReport {
        command: echo(args),
        subcommand: outcome.subcommand,
        model: outcome.model,
        functional: outcome.functional.map(|f| f.to_string()),
        seed: cli.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        result: outcome.result,
    };
    Ok((report, outcome.text))
}
