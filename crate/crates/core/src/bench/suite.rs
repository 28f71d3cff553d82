//! Runs solvers over a problem collection and tabulates the results.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::logbarrier::{solve_ip, LogBarrierConfig};
use crate::mb_solver::{solve_mb, BarrierConfig};
use crate::model::{count_active, presolve_fixed, projected_gradient_residual, Problem, QuadraticProblem};
use crate::oracle::{solve_qp_exact, MAX_ORACLE_DIM};
use crate::report::SolveReport;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MONOBAR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Mb,
    Ip,
    Oracle,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Mb => "mb",
            SolverKind::Ip => "ip",
            SolverKind::Oracle => "oracle",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "mb" => Some(SolverKind::Mb),
            "ip" => Some(SolverKind::Ip),
            "oracle" => Some(SolverKind::Oracle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedProblem {
    pub name: String,
    pub problem: QuadraticProblem,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteConfig {
    pub mb: BarrierConfig,
    pub ip: LogBarrierConfig,
    /// Worker threads; `None` reads [`THREADS_ENV`], falling back to rayon's default.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub problem: String,
    pub n: usize,
    pub nnz: usize,
    pub solver: String,
    pub outer_iterations: usize,
    pub active_count: usize,
    pub elapsed_seconds: f64,
    pub f_value: f64,
    pub proj_grad_residual: f64,
    pub termination_reason: String,
}

/// Solves `p` with the monomial barrier after removing fixed variables.
pub fn solve_mb_presolved(p: &QuadraticProblem, x0: &[f64], cfg: &BarrierConfig) -> Result<SolveReport, String> {
    let pre = presolve_fixed(p);
    solve_mb(&pre.reduced, &pre.restrict(x0), cfg)
        .map(|r| r.lift(&pre, p))
        .map_err(|e| e.to_string())
}

/// Solves `p` with the log barrier after removing fixed variables.
pub fn solve_ip_presolved(p: &QuadraticProblem, x0: &[f64], cfg: &LogBarrierConfig) -> Result<SolveReport, String> {
    let pre = presolve_fixed(p);
    solve_ip(&pre.reduced, &pre.restrict(x0), cfg)
        .map(|r| r.lift(&pre, p))
        .map_err(|e| e.to_string())
}

fn run_one(named: &NamedProblem, solver: SolverKind, cfg: &SuiteConfig) -> BenchRecord {
    let p = &named.problem;
    let center = p.bounds().center();
    let start = Instant::now();
    let outcome: Result<(usize, Vec<f64>, String), String> =
        match solver {
            SolverKind::Mb => solve_mb_presolved(p, &center, &cfg.mb)
                .map(|r| (r.outer_iterations, r.x, r.termination_reason.to_string())),
            SolverKind::Ip => solve_ip_presolved(p, &center, &cfg.ip)
                .map(|r| (r.outer_iterations, r.x, r.termination_reason.to_string())),
            SolverKind::Oracle => solve_qp_exact(p)
                .map(|s| (0, s.x, "exact".to_string()))
                .map_err(|e| e.to_string()),
        };
    let elapsed_seconds = start.elapsed().as_secs_f64();
    let mut record = BenchRecord {
        problem: named.name.clone(),
        n: p.dim(),
        nnz: p.nnz(),
        solver: solver.name().to_string(),
        outer_iterations: 0,
        active_count: 0,
        elapsed_seconds,
        f_value: f64::NAN,
        proj_grad_residual: f64::NAN,
        termination_reason: String::new(),
    };
    match outcome {
        Ok((outer, x, reason)) => {
            record.outer_iterations = outer;
            record.active_count = count_active(&x, p.bounds());
            record.f_value = p.value(&x);
            record.proj_grad_residual = projected_gradient_residual(&x, p);
            record.termination_reason = reason;
        }
        Err(msg) => record.termination_reason = format!("error: {msg}"),
    }
    record
}

fn thread_count(cfg: &SuiteConfig) -> Option<usize> {
    cfg.threads
        .or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs every `(problem, solver)` pair, skipping the oracle above its size
/// limit. Failures become records; the result is sorted by
/// `(problem, n, solver)` regardless of scheduling.
pub fn run_suite(problems: &[NamedProblem], solvers: &[SolverKind], cfg: &SuiteConfig) -> Vec<BenchRecord> {
    let jobs: Vec<(&NamedProblem, SolverKind)> = problems
        .iter()
        .flat_map(|p| solvers.iter().map(move |&s| (p, s)))
        .filter(|(p, s)| *s != SolverKind::Oracle || p.problem.dim() <= MAX_ORACLE_DIM)
        .collect();
    let run = || -> Vec<BenchRecord> { jobs.par_iter().map(|(p, s)| run_one(p, *s, cfg)).collect() };
    let mut records = match thread_count(cfg) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    };
    records.sort_by(|a, b| (&a.problem, a.n, &a.solver).cmp(&(&b.problem, b.n, &b.solver)));
    records
}

pub const CSV_HEADER: [&str; 10] = [
    "problem",
    "n",
    "nnz",
    "solver",
    "outer_iters",
    "active",
    "elapsed_s",
    "f_value",
    "proj_grad",
    "reason",
];

/// Six significant digits with a signed, at least two-digit exponent
/// (`5.00000e-01`); non-finite values print as `NaN`, `inf` or `-inf`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.5e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.problem.clone(),
            r.n.to_string(),
            r.nnz.to_string(),
            r.solver.clone(),
            r.outer_iterations.to_string(),
            r.active_count.to_string(),
            format_sci(r.elapsed_seconds),
            format_sci(r.f_value),
            format_sci(r.proj_grad_residual),
            r.termination_reason.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generators::gen_diag_qp;
    use crate::model::Bounds;

    fn csv_string(records: &[BenchRecord]) -> String {
        let mut buf = Vec::new();
        write_csv(records, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_suite_has_header_only() {
        let records = run_suite(&[], &[SolverKind::Mb], &SuiteConfig::default());
        assert_eq!(
            csv_string(&records),
            "problem,n,nnz,solver,outer_iters,active,elapsed_s,f_value,proj_grad,reason\n"
        );
    }

    #[test]
    fn rows_are_sorted_and_oracle_skipped_when_large() {
        let problems = vec![
            NamedProblem {
                name: "b".into(),
                problem: gen_diag_qp(20, 1, 1.0),
            },
            NamedProblem {
                name: "a".into(),
                problem: gen_diag_qp(3, 2, 1.0),
            },
        ];
        let solvers = [SolverKind::Oracle, SolverKind::Mb, SolverKind::Ip];
        let records = run_suite(&problems, &solvers, &SuiteConfig::default());
        let keys: Vec<(&str, &str)> = records
            .iter()
            .map(|r| (r.problem.as_str(), r.solver.as_str()))
            .collect();
        assert_eq!(
            keys,
            vec![("a", "ip"), ("a", "mb"), ("a", "oracle"), ("b", "ip"), ("b", "mb")]
        );
    }

    #[test]
    fn fixed_variables_are_presolved() {
        let p = QuadraticProblem::new(
            [(0, 0, 1.0), (1, 0, 0.5), (1, 1, 1.0)],
            vec![-1.0, 0.0],
            0.0,
            Bounds::new(vec![0.3, -1.0], vec![0.3, 1.0]).unwrap(),
        )
        .unwrap();
        let r = solve_mb_presolved(&p, &[0.0, 0.0], &BarrierConfig::default()).unwrap();
        assert_eq!(r.x[0], 0.3);
        assert!((r.x[1] + 0.15).abs() < 1e-4);
        let r = solve_ip_presolved(&p, &[0.0, 0.0], &LogBarrierConfig::default()).unwrap();
        assert_eq!(r.x[0], 0.3);
    }

    #[test]
    fn sci_format_has_six_significant_digits() {
        assert_eq!(format_sci(0.5), "5.00000e-01");
        assert_eq!(format_sci(-1234.5678), "-1.23457e+03");
        assert_eq!(format_sci(0.0), "0.00000e+00");
        assert_eq!(format_sci(1e-300), "1.00000e-300");
        assert_eq!(format_sci(f64::NAN), "NaN");
    }
}
