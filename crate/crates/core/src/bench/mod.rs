//! Benchmark instances, the problem file format and the comparison suite.

pub mod format;
pub mod generators;
pub mod suite;

pub use format::{parse_problem, serialize_problem, ParseError, ParseErrorKind};
pub use generators::{diagonal_solution, gen_diag_qp, gen_obstacle_qp, Obstacle, ObstacleSpec};
pub use suite::{
    format_sci, run_suite, solve_ip_presolved, solve_mb_presolved, write_csv, BenchRecord, NamedProblem, SolverKind,
    SuiteConfig, CSV_HEADER, THREADS_ENV,
};
