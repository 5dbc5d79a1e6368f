//! Command-line interface. The binary is a thin wrapper around [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::certfile::{CertificateDocument, DocumentKind};
use crate::certificate::{self, find_r_eps_with, schedule};
use crate::convex_kkt::{self, build_representation_with, ConvexProgram};
use crate::error::{CertificateError, KktError, RelaxationError, SolverError};
use crate::poly::{parse, Polynomial};
use crate::relaxation::{build_primal, feasible_start, min_order, RelaxationConfig};
use crate::sdp::{solve, SolveStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_EXHAUSTED: i32 = 4;
pub const EXIT_NOT_CONVEX: i32 = 5;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SOS_ALMOST_THREADS";

const DEFAULT_RADII: [f64; 3] = [1.0, 1.5, 2.0];
const DEFAULT_TOL: f64 = 1e-8;
/// Extra orders beyond `⌈deg f / 2⌉` in the default schedule.
const DEFAULT_EXTRA_ORDERS: u32 = 4;

#[derive(Parser, Debug)]
#[command(name = "sos-almost", version, about = "Sum-of-squares approximation and moment relaxation bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lower bounds on the minimum over a grid of orders and radii
    Minimize(MinimizeArgs),
    /// Search for a certificate that f + eps*Theta_r is a sum of squares
    Approximate(ApproximateArgs),
    /// Check a certificate or representation file
    Verify(VerifyArgs),
    /// Convex program on {g_j >= 0}: multipliers and representation
    Kkt(KktArgs),
}

#[derive(Args, Debug)]
struct PolyArgs {
    /// Polynomial, e.g. "x1^2 - 2*x1*x2 + 3"
    #[arg(short = 'f', allow_hyphen_values = true)]
    f: String,
    /// Number of variables
    #[arg(short = 'n')]
    n: usize,
    /// Solver tolerance
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[command(flatten)]
    poly: PolyArgs,
    /// Relaxation orders
    #[arg(long = "r", value_delimiter = ',', required = true)]
    r: Vec<u32>,
    /// Box radii
    #[arg(long = "M", value_delimiter = ',', required = true)]
    radii: Vec<f64>,
    /// Print the report as JSON instead of a table
    #[arg(long)]
    json: bool,
    /// Write the JSON report to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    /// Radii, tried in order
    #[arg(long = "M", value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Orders tried at each radius
    #[arg(long = "r", value_delimiter = ',', conflicts_with = "rmax")]
    r: Option<Vec<u32>>,
    /// Largest order tried at each radius
    #[arg(long)]
    rmax: Option<u32>,
}

impl ScheduleArgs {
    fn build(&self, f: &Polynomial) -> Vec<(f64, u32)> {
        let radii = self.radii.clone().unwrap_or_else(|| DEFAULT_RADII.to_vec());
        let lo = min_order(f);
        let orders = match (&self.r, self.rmax) {
            (Some(r), _) => r.clone(),
            (None, Some(hi)) => (lo..=hi).collect(),
            (None, None) => (lo..=lo + DEFAULT_EXTRA_ORDERS).collect(),
        };
        schedule(&radii, orders)
    }
}

#[derive(Args, Debug)]
struct ApproximateArgs {
    #[command(flatten)]
    poly: PolyArgs,
    /// Perturbation weight, must be positive
    #[arg(long, allow_negative_numbers = true)]
    eps: f64,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Certificate output path
    #[arg(long, default_value = "certificate.json")]
    out: PathBuf,
    /// Also print the certificate document to stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Certificate or representation JSON file
    path: PathBuf,
}

#[derive(Args, Debug)]
struct KktArgs {
    #[command(flatten)]
    poly: PolyArgs,
    /// Constraint g_j >= 0 (repeatable)
    #[arg(short = 'g', allow_hyphen_values = true)]
    g: Vec<String>,
    /// Slater point, comma separated
    #[arg(long = "x0", value_delimiter = ',', allow_negative_numbers = true, required = true)]
    x0: Vec<f64>,
    /// Perturbation weight for the SOS part
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    eps: f64,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Representation output path
    #[arg(long, default_value = "representation.json")]
    out: PathBuf,
    /// Also print the representation document to stdout
    #[arg(long)]
    json: bool,
}

/// Fixed 9-significant-digit formatting used by all tables.
pub fn fmt9(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000e0".to_string();
    }
    format!("{v:.8e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub r: u32,
    #[serde(rename = "M")]
    pub radius: f64,
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ColumnFlag {
    #[serde(rename = "M")]
    pub radius: f64,
    pub nondecreasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub f: String,
    pub n: usize,
    pub tol: f64,
    pub rows: Vec<SweepRow>,
    pub monotone: Vec<ColumnFlag>,
}

/// Solves every `(M, r)` cell; rows are ordered by `M`, then `r`.
pub fn sweep(f: &Polynomial, orders: &[u32], radii: &[f64], tol: f64) -> Result<SweepReport, SolverError> {
    let mut cells = Vec::new();
    for &m in radii {
        for &r in orders {
            cells.push((m, r));
        }
    }
    let rows: Vec<Result<SweepRow, SolverError>> = cells
        .par_iter()
        .map(|&(radius, r)| {
            let start = Instant::now();
            let cfg = RelaxationConfig::new(r, radius, tol)?;
            let prob = build_primal(f, &cfg)?;
            let sol = solve(&prob, &feasible_start(&cfg, f.dim()), tol)?;
            Ok(SweepRow {
                r,
                radius,
                status: sol.status,
                primal_value: sol.primal_value,
                dual_value: sol.dual_value,
                gap: sol.gap,
                lambda: sol.dual.lambda,
                gamma: sol.dual.gamma,
                iterations: sol.iterations,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut monotone = Vec::new();
    for &m in radii {
        if monotone.iter().any(|c: &ColumnFlag| c.radius == m) {
            continue;
        }
        let mut col: Vec<&SweepRow> = rows.iter().filter(|row| row.radius == m).collect();
        col.sort_by_key(|row| row.r);
        let nondecreasing = col
            .windows(2)
            .all(|w| w[1].primal_value >= w[0].primal_value - 2.0 * tol);
        monotone.push(ColumnFlag { radius: m, nondecreasing });
    }
    Ok(SweepReport {
        f: crate::poly::format_poly(f),
        n: f.dim(),
        tol,
        rows,
        monotone,
    })
}

pub fn write_table(report: &SweepReport, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:>3} {:>16} {:>16} {:>16} {:>16} {:>16} {:>5}  status",
        "r", "M", "primal", "dual", "gap", "lambda", "iters"
    )?;
    for row in &report.rows {
        writeln!(
            out,
            "{:>3} {:>16} {:>16} {:>16} {:>16} {:>16} {:>5}  {}",
            row.r,
            fmt9(row.radius),
            fmt9(row.primal_value),
            fmt9(row.dual_value),
            fmt9(row.gap),
            fmt9(row.lambda),
            row.iterations,
            row.status.as_str()
        )?;
    }
    for c in &report.monotone {
        writeln!(
            out,
            "M = {}: primal nondecreasing in r: {}",
            fmt9(c.radius),
            if c.nondecreasing { "yes" } else { "no" }
        )?;
    }
    Ok(())
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl std::fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_INPUT, e)
    }
}

fn relaxation_code(e: &RelaxationError) -> i32 {
    match e {
        RelaxationError::NegativeLambda(_) | RelaxationError::GramDimension { .. } => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

fn solver_code(e: &SolverError) -> i32 {
    match e {
        SolverError::Relaxation(r) => relaxation_code(r),
        _ => EXIT_SOLVER,
    }
}

fn certificate_code(e: &CertificateError) -> i32 {
    match e {
        CertificateError::ScheduleExhausted { .. } => EXIT_EXHAUSTED,
        CertificateError::Solver(s) => solver_code(s),
        CertificateError::Relaxation(r) => relaxation_code(r),
        CertificateError::Indefinite { .. } => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

fn kkt_code(e: &KktError) -> i32 {
    match e {
        KktError::NotConvex { .. } => EXIT_NOT_CONVEX,
        KktError::NoConvergence { .. } => EXIT_SOLVER,
        KktError::Certificate(c) => certificate_code(c),
        _ => EXIT_INPUT,
    }
}

fn parse_poly(args: &PolyArgs) -> Result<Polynomial, Failure> {
    if args.n == 0 {
        return Err(Failure::new(EXIT_INPUT, "n must be at least 1"));
    }
    parse(&args.f, args.n).map_err(|e| Failure::new(EXIT_INPUT, format!("cannot parse -f: {e}")))
}

fn cmd_minimize(a: &MinimizeArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let f = parse_poly(&a.poly)?;
    let report = sweep(&f, &a.r, &a.radii, a.poly.tol).map_err(|e| Failure::new(solver_code(&e), e))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &a.out {
        std::fs::write(path, json.clone() + "\n")?;
    }
    if a.json {
        writeln!(out, "{json}")?;
    } else {
        write_table(&report, out)?;
    }
    let all_optimal = report.rows.iter().all(|r| r.status == SolveStatus::Optimal);
    Ok(if all_optimal { EXIT_OK } else { EXIT_SOLVER })
}

fn cmd_approximate(a: &ApproximateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let f = parse_poly(&a.poly)?;
    let sched = a.schedule.build(&f);
    let outcome = find_r_eps_with(&f, a.eps, &sched, a.poly.tol).map_err(|e| {
        let msg = match &e {
            CertificateError::ScheduleExhausted { best_lambda, .. } => {
                format!("{e}\nbest lambda_M: {}", fmt9(*best_lambda))
            }
            _ => e.to_string(),
        };
        Failure::new(certificate_code(&e), msg)
    })?;
    let cert = &outcome.certificate;
    let doc = CertificateDocument::from_certificate(&f, cert);
    doc.save(&a.out)?;
    if a.json {
        writeln!(out, "{}", doc.to_json())?;
    }
    writeln!(out, "epsilon      {}", fmt9(cert.epsilon))?;
    writeln!(out, "r_eps        {}", cert.r_eps)?;
    writeln!(out, "M            {}", fmt9(outcome.cell.radius))?;
    writeln!(out, "lambda_M     {}", fmt9(outcome.cell.solution.dual.lambda))?;
    writeln!(out, "residual     {}", fmt9(outcome.report.identity_residual))?;
    writeln!(out, "l1_gap       {}", fmt9(cert.l1_gap))?;
    writeln!(out, "certificate  {}", a.out.display())?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let malformed = |e: &dyn std::fmt::Display| Failure::new(EXIT_INPUT, format!("malformed: {e}"));
    let doc = CertificateDocument::load(&a.path).map_err(|e| malformed(&e))?;
    match doc.kind {
        DocumentKind::Certificate => {
            let f = doc.polynomial().map_err(|e| malformed(&e))?;
            let cert = doc.certificate().map_err(|e| malformed(&e))?;
            let rep = certificate::verify(&f, &cert).map_err(|e| malformed(&e))?;
            writeln!(out, "kind         certificate")?;
            writeln!(out, "residual     {}", fmt9(rep.identity_residual))?;
            writeln!(out, "tolerance    {}", fmt9(rep.tolerance))?;
            writeln!(out, "min_eig      {}", fmt9(rep.gram_min_eigenvalue))?;
            writeln!(out, "l1_gap       {} ({})", fmt9(rep.l1_gap), if rep.l1_gap_matches { "matches" } else { "mismatch" })?;
            writeln!(out, "result       {}", if rep.passed { "pass" } else { "FAIL" })?;
            Ok(if rep.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        DocumentKind::Representation => {
            let rep = convex_kkt::verify_document(&doc).map_err(|e| malformed(&e))?;
            writeln!(out, "kind         representation")?;
            writeln!(out, "residual     {}", fmt9(rep.identity.identity_residual))?;
            writeln!(out, "tolerance    {}", fmt9(rep.identity.tolerance))?;
            writeln!(out, "min_eig      {}", fmt9(rep.identity.gram_min_eigenvalue))?;
            writeln!(out, "lambda >= 0  {}", if rep.multipliers_nonnegative { "yes" } else { "no" })?;
            writeln!(out, "sampled min  {} ({} points)", fmt9(rep.sampled_min), rep.samples)?;
            writeln!(out, "result       {}", if rep.passed { "pass" } else { "FAIL" })?;
            Ok(if rep.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    }
}

fn cmd_kkt(a: &KktArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let f = parse_poly(&a.poly)?;
    let g = a
        .g
        .iter()
        .map(|s| parse(s, a.poly.n).map_err(|e| Failure::new(EXIT_INPUT, format!("cannot parse -g: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let kkt_fail = |e: KktError| Failure::new(kkt_code(&e), e);
    let prog = ConvexProgram::new(f, g, a.x0.clone()).map_err(kkt_fail)?;
    // schedule orders follow the Lagrangian, whose degree is that of f and g
    let lagr_degree = prog
        .constraints()
        .iter()
        .fold(prog.objective().clone(), |acc, gj| acc.add(gj).expect("same dimension"));
    let sched = a.schedule.build(&lagr_degree);
    let rep = build_representation_with(&prog, a.eps, &sched, a.poly.tol).map_err(kkt_fail)?;
    let doc = rep.to_document(&prog);
    doc.save(&a.out)?;
    if a.json {
        writeln!(out, "{}", doc.to_json())?;
    }
    let list = |v: &[f64]| v.iter().map(|x| fmt9(*x)).collect::<Vec<_>>().join(", ");
    writeln!(out, "lambda          [{}]", list(rep.lambda()))?;
    writeln!(out, "x_star          [{}]", list(&rep.kkt.x_star))?;
    writeln!(out, "f_star          {}", fmt9(rep.kkt.f_star))?;
    writeln!(out, "stationarity    {}", fmt9(rep.kkt.stationarity))?;
    writeln!(out, "r_eps           {}", rep.certificate.r_eps)?;
    writeln!(out, "residual        {}", fmt9(rep.residual))?;
    writeln!(out, "representation  {}", a.out.display())?;
    Ok(EXIT_OK)
}

fn configure_threads() {
    if let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        // fails only if the pool was already built, in which case keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Minimize(a) => cmd_minimize(a, out),
        Command::Approximate(a) => cmd_approximate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Kkt(a) => cmd_kkt(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
