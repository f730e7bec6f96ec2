//! `parazeta`: construct strings with prescribed barriers, evaluate and scan
//! their zeta functions, enumerate lengths, estimate dimensions and run
//! distance zeta experiments.
//!
//! Data goes to stdout (or `--out`), diagnostics to stderr. Exit code 2 means
//! invalid input, 3 means the request is valid but falls in a numerical domain
//! where no certified answer exists (near a singularity, outside the half-plane).

mod output;
mod parse;
mod scan;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use parazeta::dimension::{estimate_abscissa, exact_abscissa};
use parazeta::distance_zeta::{
    construct_set, dimension_probe, dzeta_grill, dzeta_line, dzeta_monte_carlo, neighborhood_volume, GeometricSet,
    SetOptions,
};
use parazeta::prescriber::{construct, report, ComplexWindow, ConstructionOptions, PrescribedString};
use parazeta::string_core::{enumerate_lengths, EnumerationCutoff, StringExpr};
use parazeta::zeta_eval::{eval_constructed, eval_zeta};
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
    Io(String),
}

impl From<parazeta::Error> for CliError {
    fn from(e: parazeta::Error) -> Self {
        if e.is_numerical_domain() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "parazeta", version, about = "Fractal strings, zeta functions and prescribed paramorphic barriers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the string (or set in R^N) with prescribed D_par, D_mer and D.
    Construct(ConstructArgs),
    /// Evaluate a zeta function at one point.
    Eval(EvalArgs),
    /// Evaluate a zeta function on a grid and list the singularities inside it.
    Scan(ScanArgs),
    /// List the largest lengths of a string.
    Lengths(LengthsArgs),
    /// Exact and estimated abscissa of convergence.
    Dim(DimArgs),
    /// Distance zeta function of a set.
    Dzeta(DzetaArgs),
}

#[derive(Args)]
struct Targets {
    #[arg(long, allow_hyphen_values = true)]
    dinf: f64,
    #[arg(long, allow_hyphen_values = true)]
    d1: f64,
    #[arg(long, allow_hyphen_values = true)]
    d: f64,
}

/// Either `--expr` or a construction given by `--dinf --d1 --d`.
#[derive(Args)]
struct Source {
    /// String expression, e.g. `gencantor:2,1/3` or `union(cantor;inforder:2,0.3)`.
    #[arg(long, conflicts_with_all = ["dinf", "d1", "d"])]
    expr: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires_all = ["d1", "d"])]
    dinf: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    d1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<f64>,
}

enum Loaded {
    Expr(StringExpr),
    Construction(Box<PrescribedString>),
}

impl Source {
    fn load(&self) -> Result<Loaded, CliError> {
        match (&self.expr, self.dinf, self.d1, self.d) {
            (Some(text), ..) => Ok(Loaded::Expr(parse::expr(text)?)),
            (None, Some(dinf), Some(d1), Some(d)) => {
                Ok(Loaded::Construction(Box::new(construct(dinf, d1, d, ConstructionOptions::default())?)))
            }
            _ => Err(CliError::Input("give --expr or all of --dinf --d1 --d".into())),
        }
    }
}

impl Loaded {
    fn expr(&self) -> &StringExpr {
        match self {
            Loaded::Expr(e) => e,
            Loaded::Construction(p) => &p.expr,
        }
    }
}

#[derive(Args)]
struct Sink {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Sink {
    fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    targets: Targets,
    /// Build a set in R^N instead of a string.
    #[arg(long)]
    ambient: Option<u32>,
    /// Realize integer fractional parts as D - 1 + (1 - eps) (set construction only).
    #[arg(long)]
    integer_offset: Option<f64>,
    /// Ratio of the geometric D_k schedule.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    source: Source,
    /// Point of evaluation, e.g. `0.7+3i`.
    #[arg(long, allow_hyphen_values = true)]
    s: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    source: Source,
    /// `reMin:reMax:imMin:imMax`
    #[arg(long, allow_hyphen_values = true)]
    window: String,
    /// `NxM` grid points along the real and imaginary axes.
    #[arg(long, default_value = "200x200")]
    res: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args)]
struct LengthsArgs {
    #[command(flatten)]
    source: Source,
    /// Number of lengths, counted with multiplicity.
    #[arg(long, default_value_t = 10)]
    n: u64,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args)]
struct DimArgs {
    #[command(flatten)]
    source: Source,
    /// Terms used by the prefix regression.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Also locate the abscissa from the blow-up of the distance zeta function.
    #[arg(long)]
    probe: bool,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Method {
    /// Closed form on the line, shift formula for grills, Monte Carlo otherwise.
    Auto,
    MonteCarlo,
}

#[derive(Args)]
struct DzetaArgs {
    /// Set description, e.g. `realization:cantor` or `grill:1(realization:cantor)`.
    #[arg(long)]
    set: String,
    #[arg(long, allow_hyphen_values = true)]
    s: String,
    /// Neighborhood radius; defaults to the largest length for realizations.
    #[arg(long)]
    delta: Option<f64>,
    /// Monte Carlo samples.
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    #[command(flatten)]
    sink: Sink,
}

fn complex_json(z: Complex64) -> serde_json::Value {
    json!({ "re": z.re, "im": z.im })
}

fn cmd_construct(a: &ConstructArgs) -> Result<String, CliError> {
    let t = &a.targets;
    if let Some(n) = a.ambient {
        let options = SetOptions {
            construction: ConstructionOptions { ratio: a.ratio, ..ConstructionOptions::default() },
            integer_offset: a.integer_offset,
            ..SetOptions::default()
        };
        let built = construct_set(t.dinf, t.d1, t.d, n, options)?;
        return Ok(output::json(&json!({ "set": built })));
    }
    let options = ConstructionOptions { ratio: a.ratio, ..ConstructionOptions::default() };
    let p = construct(t.dinf, t.d1, t.d, options)?;
    Ok(output::json(&json!({ "construction": p, "report": report(&p) })))
}

fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let s = parse::complex(&a.s)?;
    let r = match a.source.load()? {
        Loaded::Expr(e) => eval_zeta(&e, s, a.tol)?,
        Loaded::Construction(p) => eval_constructed(&p, s, a.tol)?,
    };
    Ok(output::json(&json!({
        "s": complex_json(s),
        "value": complex_json(r.value),
        "error_bound": r.error_bound,
        "terms_used": r.terms_used,
        "certified": r.certified,
    })))
}

fn window(text: &str) -> Result<ComplexWindow, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 4 {
        return Err(CliError::Input(format!("window {text:?} must be reMin:reMax:imMin:imMax")));
    }
    let v: Vec<f64> = parts.iter().map(|p| parse::number(p)).collect::<Result<_, _>>()?;
    Ok(ComplexWindow::new(v[0], v[1], v[2], v[3])?)
}

fn resolution(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Input(format!("resolution {text:?} must be NxM with N, M >= 2"));
    let (n, m) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let (n, m): (usize, usize) = (n.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?);
    if n < 2 || m < 2 {
        return Err(bad());
    }
    Ok((n, m))
}

fn cmd_scan(a: &ScanArgs) -> Result<String, CliError> {
    let mut w = window(&a.window)?;
    let (n_re, n_im) = resolution(&a.res)?;
    let loaded = a.source.load()?;
    let grid = match &loaded {
        Loaded::Expr(e) => scan::scan(scan::Target::Expr(e), w, n_re, n_im, a.tol)?,
        Loaded::Construction(p) => {
            if w.re_min <= p.d_infinity {
                if w.re_max <= p.d_infinity {
                    return Err(CliError::Input(format!(
                        "window lies left of the barrier Re s = {}",
                        p.d_infinity
                    )));
                }
                let clipped = p.d_infinity + 1e-3 * (w.re_max - p.d_infinity);
                eprintln!(
                    "warning: window crosses the barrier Re s = {}; clipped to Re s >= {clipped}",
                    p.d_infinity
                );
                w.re_min = clipped;
            }
            scan::scan(scan::Target::Construction(p), w, n_re, n_im, a.tol)?
        }
    };
    Ok(match a.format {
        Format::Csv => grid.to_csv(),
        Format::Json => output::json(&grid),
    })
}

fn cmd_lengths(a: &LengthsArgs) -> Result<String, CliError> {
    let loaded = a.source.load()?;
    let mut left = a.n;
    let mut rows = Vec::new();
    for term in enumerate_lengths(loaded.expr(), EnumerationCutoff::MaxTerms(usize::MAX))? {
        if left == 0 {
            break;
        }
        // the last level is cut so that exactly n lengths are listed
        let take = u64::try_from(&term.multiplicity).map_or(left, |m| m.min(left));
        left -= take;
        rows.push(json!({ "length": term.length, "multiplicity": take }));
    }
    Ok(output::json(&json!({ "lengths": rows })))
}

fn cmd_dim(a: &DimArgs) -> Result<String, CliError> {
    let loaded = a.source.load()?;
    let e = loaded.expr();
    let exact = exact_abscissa(e)?;
    let estimate = estimate_abscissa(e, a.n)?;
    let mut out = json!({ "exact": exact, "estimate": estimate });
    if a.probe {
        out["probe"] = serde_json::to_value(dimension_probe(e, 1e-3)?).expect("plain data");
    }
    Ok(output::json(&out))
}

fn cmd_dzeta(a: &DzetaArgs) -> Result<String, CliError> {
    let set = parse::set(&a.set)?;
    let s = parse::complex(&a.s)?;
    let realization_base = |set: &GeometricSet| match set {
        GeometricSet::Realization { of } => Some(of.clone()),
        _ => None,
    };
    let delta = match (a.delta, realization_base(&set)) {
        (Some(d), _) => d,
        (None, Some(e)) => e.largest_length(),
        (None, None) => return Err(CliError::Input("--delta is required for this set".into())),
    };
    let n = set.ambient();
    let volume = neighborhood_volume(&set, delta).ok();
    let mut out = json!({
        "set": serde_json::to_value(&set).expect("plain data"),
        "ambient": n,
        "s": complex_json(s),
        "delta": delta,
        "neighborhood_volume": volume,
    });
    let grill_base = match &set {
        GeometricSet::Grill { base, extra_dims } => realization_base(base).map(|e| (e, extra_dims + 1)),
        _ => None,
    };
    match (a.method, realization_base(&set), grill_base) {
        (Method::Auto, Some(e), _) => {
            out["method"] = "closed-form".into();
            out["value"] = complex_json(dzeta_line(&e, s, delta)?);
            out["stderr"] = 0.0.into();
        }
        (Method::Auto, None, Some((e, n))) => {
            let g = dzeta_grill(&e, n, s, delta, a.n, a.seed)?;
            out["method"] = "shift-formula".into();
            out["value"] = complex_json(g.value);
            out["stderr"] = g.stderr.into();
            out["exact_part"] = complex_json(g.exact);
            out["n_samples"] = g.statistical.n_samples.into();
            out["seed"] = a.seed.into();
        }
        _ => {
            let mc = dzeta_monte_carlo(&set, s, delta, a.n, a.seed)?;
            out["method"] = "monte-carlo".into();
            out["value"] = complex_json(mc.value);
            out["stderr"] = mc.stderr.into();
            out["n_samples"] = mc.n_samples.into();
            out["seed"] = a.seed.into();
        }
    }
    Ok(output::json(&out))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let (text, sink) = match &cli.command {
        Command::Construct(a) => (cmd_construct(a)?, &a.sink),
        Command::Eval(a) => (cmd_eval(a)?, &a.sink),
        Command::Scan(a) => (cmd_scan(a)?, &a.sink),
        Command::Lengths(a) => (cmd_lengths(a)?, &a.sink),
        Command::Dim(a) => (cmd_dim(a)?, &a.sink),
        Command::Dzeta(a) => (cmd_dzeta(a)?, &a.sink),
    };
    sink.write(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
