//! Command-line front end: curve sweeps, allocation tables, simulations.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a check or
//! a simulation gate fails.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::simulate::{self, CouplingSpec, SimReport};
use crate::{
    channel, dimension, transport, waterfill, CanonicalProblem, Error, ProblemConfig, Result,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_GATE: i32 = 2;

/// Rates of the published allocation table.
pub const TABLE_RATES: [f64; 3] = [0.1, 2.1, 4.1];
/// Tolerance when checking against three-decimal reference values.
pub const TABLE_TOL: f64 = 5e-4;
/// Reference configuration `λ = (2, 3, 1)`, `λ̂ = (3, 1, 1)`.
pub const REFERENCE_LAMBDA: [f64; 3] = [2.0, 3.0, 1.0];
pub const REFERENCE_LAMBDA_HAT: [f64; 3] = [3.0, 1.0, 1.0];
/// Published allocations for the reference configuration, one row per rate,
/// `(common randomness, no common randomness)`.
pub const REFERENCE_ALLOCATIONS: [([f64; 3], [f64; 3]); 3] = [
    ([0.058, 0.031, 0.011], [0.1, 0.0, 0.0]),
    ([0.929, 0.726, 0.445], [0.999, 0.749, 0.353]),
    ([1.641, 1.407, 1.051], [1.665, 1.415, 1.019]),
];

/// Relative slack allowed when asserting that a curve is non-increasing.
const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "gwot",
    version,
    about = "Constrained Gaussian Wasserstein optimal transport"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep a distortion curve over a control variable (rate, dimension or power).
    Curve(CurveArgs),
    /// Print the rate allocations with and without common randomness at R = 0.1, 2.1, 4.1.
    Table(TableArgs),
    /// Run a Monte Carlo check of an achieving scheme.
    Simulate(SimulateArgs),
    /// Print unconstrained quantities of a problem.
    Info(InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveScheme {
    RateCr,
    RateNcr,
    RateGreedy,
    Dim,
    ChannelEnvelope,
    ChannelSep,
    ChannelUncoded,
    ChannelHybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimScheme {
    /// Common-randomness coupling from the rate allocation at --rate.
    Coupling,
    /// Uncoded scheme over AWGN(1) at --power.
    Uncoded,
    /// Generative PCA plan keeping --keep components.
    Dim,
}

#[derive(Debug, clap::Args)]
pub struct ProblemArg {
    /// JSON problem file; defaults to λ = (2, 3, 1), λ̂ = (3, 1, 1).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    #[arg(long, value_enum)]
    pub scheme: CurveScheme,
    #[arg(long = "from", allow_hyphen_values = true)]
    pub start: f64,
    #[arg(long = "to", allow_hyphen_values = true)]
    pub stop: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Logarithmic spacing of control values.
    #[arg(long)]
    pub log: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Add the analog-only power threshold to hybrid curves.
    #[arg(long)]
    pub threshold: bool,
}

#[derive(Debug, clap::Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    /// Compare against the published reference allocations.
    #[arg(long)]
    pub check: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
    #[arg(long, value_enum)]
    pub scheme: SimScheme,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub power: Option<f64>,
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct InfoArgs {
    #[command(flatten)]
    pub problem: ProblemArg,
}

/// Sweep of one scheme over a range of control values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scheme: CurveScheme,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::InvalidRange("bounds must be finite".into()));
        }
        if !(self.start < self.stop) {
            return Err(Error::InvalidRange(format!(
                "start {} must be below stop {}",
                self.start, self.stop
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidRange(format!(
                "need at least 2 points, got {}",
                self.points
            )));
        }
        if self.spacing == Spacing::Log && self.start <= 0.0 {
            return Err(Error::InvalidRange(
                "log spacing needs a positive start".into(),
            ));
        }
        if self.start < 0.0 {
            return Err(Error::InvalidRange(format!(
                "control values must be nonnegative, got {}",
                self.start
            )));
        }
        Ok(())
    }

    /// Control values, endpoints included exactly.
    pub fn controls(&self) -> Vec<f64> {
        let last = self.points - 1;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i == last {
                    return self.stop;
                }
                let t = i as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => {
                        (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp()
                    }
                }
            })
            .collect()
    }
}

/// One evaluated point of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub control: f64,
    pub distortion: f64,
    pub extras: IndexMap<String, f64>,
}

fn push_rates(extras: &mut IndexMap<String, f64>, prefix: &str, rates: &[f64]) {
    for (i, r) in rates.iter().enumerate() {
        extras.insert(format!("{prefix}_{}", i + 1), *r);
    }
}

/// Evaluates `scheme` at a single control value.
pub fn evaluate_point(
    scheme: CurveScheme,
    p: &CanonicalProblem,
    control: f64,
    threshold: bool,
) -> Result<CurvePoint> {
    let mut extras = IndexMap::new();
    let distortion = match scheme {
        CurveScheme::RateCr => {
            let a = waterfill::rate_cr(p, control)?;
            push_rates(&mut extras, "rate", &a.rates);
            extras.insert("alpha".into(), a.multiplier);
            a.distortion
        }
        CurveScheme::RateNcr => {
            let a = waterfill::rate_no_cr(p, control)?;
            push_rates(&mut extras, "rate", &a.rates);
            extras.insert("beta".into(), a.multiplier);
            a.distortion
        }
        CurveScheme::RateGreedy => {
            let a = waterfill::rate_greedy(p, control)?;
            push_rates(&mut extras, "rate", &a.rates);
            push_rates(
                &mut extras,
                "rate_hat",
                a.paired_rates.as_deref().unwrap_or_default(),
            );
            extras.insert("rho".into(), a.multiplier);
            extras.insert("rho_hat".into(), a.paired_multiplier.unwrap_or(f64::NAN));
            a.distortion
        }
        CurveScheme::Dim => dimension::dim_curve(p, control)?,
        CurveScheme::ChannelEnvelope => {
            extras.insert("capacity".into(), channel::capacity(control));
            channel::d_lower_envelope(p, control)?
        }
        CurveScheme::ChannelSep => {
            extras.insert("capacity".into(), channel::capacity(control));
            channel::d_separation(p, control)?
        }
        CurveScheme::ChannelUncoded => channel::d_uncoded(p, control)?,
        CurveScheme::ChannelHybrid => {
            let h = channel::d_hybrid(p, control)?;
            extras.insert("delta".into(), h.delta_star);
            if let Some(beta) = h.beta_at_delta {
                extras.insert("beta".into(), beta);
            }
            extras.insert("kappa".into(), h.kappa as f64);
            extras.insert("analog".into(), h.analog_distortion);
            extras.insert("digital".into(), h.digital_distortion);
            if threshold {
                let p_star =
                    channel::hybrid_threshold(p).map_err(|_| Error::SchemeRequiresL2(p.dim()))?;
                extras.insert("p_star".into(), p_star);
            }
            h.total
        }
    };
    Ok(CurvePoint {
        control,
        distortion,
        extras,
    })
}

/// Evaluates a sweep, in parallel on `jobs` threads when `jobs > 1`.
///
/// Points come back ordered by control value. The curve is checked to be
/// non-increasing before it is returned.
pub fn cmd_curve(
    config: &SweepConfig,
    p: &CanonicalProblem,
    jobs: usize,
    threshold: bool,
) -> Result<Vec<CurvePoint>> {
    config.validate()?;
    if threshold && config.scheme == CurveScheme::ChannelHybrid && p.dim() < 2 {
        return Err(Error::SchemeRequiresL2(p.dim()));
    }
    let controls = config.controls();
    let eval = |c: &f64| evaluate_point(config.scheme, p, *c, threshold);
    let points: Vec<CurvePoint> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| controls.par_iter().map(eval).collect::<Result<_>>())?
    } else {
        controls.iter().map(eval).collect::<Result<_>>()?
    };
    check_monotone(&points)?;
    Ok(points)
}

fn check_monotone(points: &[CurvePoint]) -> Result<()> {
    for pair in points.windows(2) {
        let (prev, next) = (pair[0].distortion, pair[1].distortion);
        if next > prev + MONOTONE_TOL * prev.abs().max(1.0) {
            return Err(Error::CurveNotMonotone {
                control: pair[1].control,
                prev,
                next,
            });
        }
    }
    Ok(())
}

/// Formats a value with 12 significant digits, trailing zeros removed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("control,distortion");
    if let Some(first) = points.first() {
        for key in first.extras.keys() {
            out.push(',');
            out.push_str(key);
        }
    }
    out.push('\n');
    for point in points {
        out.push_str(&format_sig(point.control));
        out.push(',');
        out.push_str(&format_sig(point.distortion));
        for v in point.extras.values() {
            out.push(',');
            out.push_str(&format_sig(*v));
        }
        out.push('\n');
    }
    out
}

/// Both allocations at the three table rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub rate: f64,
    pub with_cr: Vec<f64>,
    pub without_cr: Vec<f64>,
}

pub fn cmd_table(p: &CanonicalProblem) -> Result<Vec<TableRow>> {
    TABLE_RATES
        .iter()
        .map(|&rate| {
            Ok(TableRow {
                rate,
                with_cr: waterfill::rate_cr(p, rate)?.rates,
                without_cr: waterfill::rate_no_cr(p, rate)?.rates,
            })
        })
        .collect()
}

pub fn is_reference_problem(p: &CanonicalProblem) -> bool {
    p.lambda() == REFERENCE_LAMBDA
        && p.lambda_hat() == REFERENCE_LAMBDA_HAT
        && p.mean_offset_sq() == 0.0
}

/// Largest entrywise deviation from the published allocations.
pub fn table_deviation(rows: &[TableRow]) -> f64 {
    rows.iter()
        .zip(REFERENCE_ALLOCATIONS.iter())
        .flat_map(|(row, (cr, ncr))| {
            let a = row.with_cr.iter().zip(cr.iter());
            let b = row.without_cr.iter().zip(ncr.iter());
            a.chain(b).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}

pub fn format_table(rows: &[TableRow]) -> String {
    let l = rows.first().map_or(0, |r| r.with_cr.len());
    let mut out = format!("{:<6} {:<6}", "R", "scheme");
    for i in 1..=l {
        out.push_str(&format!(" {:>8}", format!("R_{i}")));
    }
    out.push('\n');
    for row in rows {
        for (name, rates) in [("CR", &row.with_cr), ("NoCR", &row.without_cr)] {
            out.push_str(&format!("{:<6} {:<6}", row.rate, name));
            for r in rates {
                out.push_str(&format!(" {:>8.3}", r));
            }
            out.push('\n');
        }
    }
    out
}

pub fn cmd_simulate(args: &SimulateArgs, p: &CanonicalProblem) -> Result<SimReport> {
    let missing = |flag: &str| Error::Config(format!("--{flag} is required for this scheme"));
    match args.scheme {
        SimScheme::Coupling => {
            let rate = args.rate.ok_or_else(|| missing("rate"))?;
            let alloc = waterfill::rate_cr(p, rate)?;
            let spec = CouplingSpec::from_allocation(p, &alloc)?;
            simulate::simulate_coupling(&spec, args.samples, args.seed)
        }
        SimScheme::Uncoded => {
            let power = args.power.ok_or_else(|| missing("power"))?;
            simulate::simulate_uncoded(p, power, args.samples, args.seed)
        }
        SimScheme::Dim => {
            let keep = args.keep.ok_or_else(|| missing("keep"))?;
            simulate::simulate_dim_plan(p, keep, args.samples, args.seed)
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct InfoReport<'a> {
    dim: usize,
    lambda: &'a [f64],
    lambda_hat: &'a [f64],
    permutation: &'a [usize],
    mean_offset_sq: f64,
    w2sq: f64,
    d_min: f64,
    d_max: f64,
    map_scale: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_star: Option<f64>,
}

fn load_problem(arg: &ProblemArg) -> Result<CanonicalProblem> {
    match &arg.config {
        None => CanonicalProblem::from_diagonal(&REFERENCE_LAMBDA, &REFERENCE_LAMBDA_HAT),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ProblemConfig::from_json(&text)?.to_problem()
        }
    }
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(e.to_string());
    match path {
        Some(path) => fs::write(path, text).map_err(io),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::TooFewSamples { .. } | Error::CurveNotMonotone { .. } => EXIT_GATE,
        _ => EXIT_USAGE,
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Curve(args) => {
            let p = load_problem(&args.problem)?;
            let config = SweepConfig {
                scheme: args.scheme,
                start: args.start,
                stop: args.stop,
                points: args.points,
                spacing: if args.log {
                    Spacing::Log
                } else {
                    Spacing::Linear
                },
            };
            let points = cmd_curve(&config, &p, args.jobs, args.threshold)?;
            let text = match args.format {
                Format::Csv => curve_to_csv(&points),
                Format::Json => to_json(&points),
            };
            emit(out, args.out.as_ref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Table(args) => {
            let p = load_problem(&args.problem)?;
            let rows = cmd_table(&p)?;
            emit(out, args.out.as_ref(), &format_table(&rows))?;
            if !args.check {
                return Ok(EXIT_OK);
            }
            if !is_reference_problem(&p) {
                let _ = writeln!(
                    err,
                    "--check needs the reference problem λ = (2, 3, 1), λ̂ = (3, 1, 1)"
                );
                return Ok(EXIT_USAGE);
            }
            let dev = table_deviation(&rows);
            if dev <= TABLE_TOL {
                let _ = writeln!(
                    err,
                    "check passed: max deviation {dev:.2e} <= {TABLE_TOL:e}"
                );
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(err, "check FAILED: max deviation {dev:.2e} > {TABLE_TOL:e}");
                Ok(EXIT_GATE)
            }
        }
        Command::Simulate(args) => {
            let p = load_problem(&args.problem)?;
            let report = cmd_simulate(&args, &p)?;
            emit(out, args.out.as_ref(), &to_json(&report))?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_GATE })
        }
        Command::Info(args) => {
            let p = load_problem(&args.problem)?;
            let report = InfoReport {
                dim: p.dim(),
                lambda: p.lambda(),
                lambda_hat: p.lambda_hat(),
                permutation: p.permutation(),
                mean_offset_sq: p.mean_offset_sq(),
                w2sq: transport::w2sq(&p),
                d_min: transport::d_min(&p),
                d_max: transport::d_max(&p),
                map_scale: transport::optimal_map(&p).scale,
                p_star: channel::hybrid_threshold(&p).ok(),
            };
            emit(out, None, &to_json(&report))?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
