//! Command-line front end: solve problem files, generate instances, run the
//! comparison suite and print outer-iteration budgets.
//!
//! Exit codes: 0 when the solve converged (`projGradMet`), 2 when it stopped
//! on a cap (`muExceeded`, `maxOuter`), 1 on any failure, including invalid
//! flags and unreadable or malformed input.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use monobar::bench::{
    format_sci, gen_diag_qp, gen_obstacle_qp, parse_problem, run_suite, serialize_problem, solve_ip_presolved,
    solve_mb_presolved, write_csv, BenchRecord, NamedProblem, ObstacleSpec, SolverKind, SuiteConfig,
};
use monobar::{
    predict_outer_iterations, BarrierConfig, InnerTolerances, LogBarrierConfig, Problem, QuadraticProblem, SolveReport,
    TerminationReason,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CAP: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "monobar", version, about = "Monomial-barrier solver for box-constrained QPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file and print a summary.
    Solve(SolveArgs),
    /// Write a generated instance in the problem file format.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Run several solvers over every `*.qp` file in a directory.
    Compare(CompareArgs),
    /// Print the number of outer iterations needed for a given accuracy.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Mb,
    Ip,
}

/// Solver parameters shared by `solve` and `compare`. The log-barrier
/// solver reads them as `ν0 = 1/mu0`, shrink factor `tau`, `ν_min = 1/mu_max`.
#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Initial exponent (even, at least 2).
    #[arg(long, default_value_t = 32)]
    pub mu0: u64,
    /// Exponent multiplier per outer iteration (at least 2).
    #[arg(long, default_value_t = 2)]
    pub tau: u64,
    /// Largest exponent the schedule may reach.
    #[arg(long, default_value_t = 2f64.powi(40))]
    pub mu_max: f64,
    /// Projected-gradient tolerance of the outer loop.
    #[arg(long, default_value_t = 1e-4)]
    pub eps_g: f64,
    /// Barrier-gradient tolerance of the inner loop.
    #[arg(long, default_value_t = 1e-4)]
    pub eps_gp: f64,
    /// Relative barrier-decrease tolerance of the inner loop.
    #[arg(long, default_value_t = 1e-8)]
    pub eps_p: f64,
    /// Relative step tolerance of the inner loop.
    #[arg(long, default_value_t = 1e-8)]
    pub eps_x: f64,
    /// Outer-iteration cap.
    #[arg(long, default_value_t = 50_000)]
    pub max_outer: usize,
}

impl SolverFlags {
    fn inner(&self) -> InnerTolerances {
        InnerTolerances {
            eps_grad_p: self.eps_gp,
            eps_p: self.eps_p,
            eps_x: self.eps_x,
            ..InnerTolerances::default()
        }
    }

    /// Both solver configurations, validated before anything runs.
    pub fn configs(&self) -> Result<(BarrierConfig, LogBarrierConfig), String> {
        let mb = BarrierConfig {
            mu0: self.mu0,
            tau: self.tau,
            mu_max: self.mu_max,
            eps_g: self.eps_g,
            max_outer: self.max_outer,
            inner: self.inner(),
            ..BarrierConfig::default()
        };
        mb.validate().map_err(|e| e.to_string())?;
        let ip = LogBarrierConfig {
            nu0: 1.0 / self.mu0 as f64,
            nu_shrink: self.tau as f64,
            nu_min: 1.0 / self.mu_max,
            eps_g: self.eps_g,
            max_outer: self.max_outer,
            inner: self.inner(),
            ..LogBarrierConfig::default()
        };
        ip.validate().map_err(|e| e.to_string())?;
        Ok((mb, ip))
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem file.
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "mb")]
    pub solver: SolverChoice,
    /// Starting point: `center` or a file of whitespace-separated reals.
    #[arg(long, default_value = "center")]
    pub x0: String,
    /// Write the result as a one-row CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Random diagonal QP with a known solution.
    Diag {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Box half-widths are scaled by this factor.
        #[arg(long, default_value_t = 1.0)]
        bound_scale: f64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Five-point Laplacian obstacle problem on a square grid.
    Obstacle {
        /// Interior nodes per side (at least 2).
        #[arg(long)]
        side: usize,
        #[arg(long, value_enum, default_value = "bump")]
        kind: ObstacleKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObstacleKind {
    Bump,
    Torsion,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory holding `*.qp` problem files.
    pub dir: PathBuf,
    /// CSV output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated solvers out of mb, ip, oracle.
    #[arg(long, value_delimiter = ',', default_value = "mb,ip,oracle")]
    pub solvers: Vec<String>,
    /// Worker threads; defaults to the MONOBAR_THREADS environment variable.
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub mu0: u64,
    #[arg(long)]
    pub tau: u64,
    /// Target accuracy on the objective.
    #[arg(long)]
    pub eps_f: f64,
}

/// Exit code for a finished solve.
pub fn exit_code(reason: TerminationReason) -> i32 {
    match reason {
        TerminationReason::ProjGradMet => EXIT_OK,
        TerminationReason::MuExceeded | TerminationReason::MaxOuter => EXIT_CAP,
        TerminationReason::InnerFailure => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_FAILURE
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args, out),
        Command::Gen { kind } => cmd_gen(&kind, out),
        Command::Compare(args) => cmd_compare(&args, out, err),
        Command::Predict(args) => cmd_predict(&args, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn read_problem(path: &Path) -> Result<QuadraticProblem, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_problem(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_start(spec: &str, p: &QuadraticProblem) -> Result<Vec<f64>, String> {
    if spec == "center" {
        return Ok(p.bounds().center());
    }
    let text = fs::read_to_string(spec).map_err(|e| format!("{spec}: {e}"))?;
    let x0 = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("{spec}: invalid number `{t}`")))
        .collect::<Result<Vec<_>, _>>()?;
    if x0.len() != p.dim() {
        return Err(format!("{spec}: expected {} values, found {}", p.dim(), x0.len()));
    }
    Ok(x0)
}

fn problem_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, String> {
    let (mb, ip) = args.flags.configs()?;
    let p = read_problem(&args.file)?;
    let x0 = read_start(&args.x0, &p)?;
    let (solver, report) = match args.solver {
        SolverChoice::Mb => (SolverKind::Mb, solve_mb_presolved(&p, &x0, &mb)?),
        SolverChoice::Ip => (SolverKind::Ip, solve_ip_presolved(&p, &x0, &ip)?),
    };
    print_summary(out, solver, &p, &report).map_err(|e| e.to_string())?;
    if let Some(path) = &args.csv {
        let record = BenchRecord {
            problem: problem_name(&args.file),
            n: p.dim(),
            nnz: p.nnz(),
            solver: solver.name().to_string(),
            outer_iterations: report.outer_iterations,
            active_count: report.active_count,
            elapsed_seconds: 0.0,
            f_value: report.f_value,
            proj_grad_residual: report.proj_grad_residual,
            termination_reason: report.termination_reason.to_string(),
        };
        let mut buf = Vec::new();
        write_csv(&[record], &mut buf).map_err(|e| e.to_string())?;
        write_file(path, &buf)?;
    }
    Ok(exit_code(report.termination_reason))
}

fn print_summary(
    out: &mut dyn Write,
    solver: SolverKind,
    p: &QuadraticProblem,
    r: &SolveReport,
) -> std::io::Result<()> {
    writeln!(out, "solver:       {}", solver.name())?;
    writeln!(out, "variables:    {} (nnz {})", p.dim(), p.nnz())?;
    writeln!(out, "f:            {}", format_sci(r.f_value))?;
    writeln!(out, "proj grad:    {}", format_sci(r.proj_grad_residual))?;
    writeln!(out, "outer iters:  {}", r.outer_iterations)?;
    writeln!(out, "inner iters:  {}", r.inner_iterations_total)?;
    writeln!(out, "active:       {}", r.active_count)?;
    writeln!(out, "termination:  {}", r.termination_reason)?;
    if let Some(msg) = &r.failure {
        writeln!(out, "failure:      {msg}")?;
    }
    Ok(())
}

fn cmd_gen(kind: &GenKind, out: &mut dyn Write) -> Result<i32, String> {
    let (p, dest) = match kind {
        GenKind::Diag {
            m,
            seed,
            bound_scale,
            out,
        } => {
            if *m == 0 {
                return Err("--m must be positive".into());
            }
            if !(*bound_scale > 0.0 && bound_scale.is_finite()) {
                return Err("--bound-scale must be positive and finite".into());
            }
            (gen_diag_qp(*m, *seed, *bound_scale), out)
        }
        GenKind::Obstacle { side, kind, out } => {
            if *side < 2 {
                return Err("--side must be at least 2".into());
            }
            let spec = match kind {
                ObstacleKind::Bump => ObstacleSpec::bump(),
                ObstacleKind::Torsion => ObstacleSpec::torsion(),
            };
            (gen_obstacle_qp(*side, &spec), out)
        }
    };
    let text = serialize_problem(&p);
    match dest {
        Some(path) => write_file(path, text.as_bytes())?,
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string())?,
    }
    Ok(EXIT_OK)
}

fn cmd_compare(args: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, String> {
    let (mb, ip) = args.flags.configs()?;
    let solvers = args
        .solvers
        .iter()
        .map(|s| SolverKind::parse(s.trim()).ok_or_else(|| format!("unknown solver `{s}`")))
        .collect::<Result<Vec<_>, _>>()?;
    if args.threads == Some(0) {
        return Err("--threads must be positive".into());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .map_err(|e| format!("{}: {e}", args.dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "qp"))
        .collect();
    paths.sort();
    let mut problems = Vec::with_capacity(paths.len());
    for path in &paths {
        match read_problem(path) {
            Ok(problem) => problems.push(NamedProblem {
                name: problem_name(path),
                problem,
            }),
            Err(msg) => {
                let _ = writeln!(err, "warning: skipping {msg}");
            }
        }
    }
    let cfg = SuiteConfig {
        mb,
        ip,
        threads: args.threads,
    };
    let records = run_suite(&problems, &solvers, &cfg);
    let mut buf = Vec::new();
    write_csv(&records, &mut buf).map_err(|e| e.to_string())?;
    write_file(&args.out, &buf)?;
    writeln!(
        out,
        "{} problems, {} runs written to {}",
        problems.len(),
        records.len(),
        args.out.display()
    )
    .map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<i32, String> {
    let n = predict_outer_iterations(args.mu0, args.tau, args.eps_f).map_err(|e| e.to_string())?;
    writeln!(out, "{n}").map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}
