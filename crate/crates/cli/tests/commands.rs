use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const OFFSET_QP: &str = "QPBOX 1 2 2
L -1 -1
U 1 1
B 2 0
C 2
H 0 0 1
H 1 1 1
";

fn monobar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monobar"))
        .args(args)
        .env_remove("MONOBAR_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` in {summary}"))
        .trim()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_offset_qp_with_mb() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "offset.qp", OFFSET_QP);
    let o = monobar(&["solve", &file, "--solver", "mb"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(field(&s, "f:"), "5.00000e-01");
    assert!(field(&s, "proj grad:").parse::<f64>().unwrap() <= 1e-4);
    assert_eq!(field(&s, "variables:"), "2 (nnz 2)");
    assert_eq!(field(&s, "active:"), "1");
    assert_eq!(field(&s, "termination:"), "projGradMet");
}

#[test]
fn odd_mu0_fails_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "offset.qp", OFFSET_QP);
    let o = monobar(&["solve", &file, "--mu0", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("mu0"), "{}", stderr(&o));
}

#[test]
fn parse_errors_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "bad.qp", "QPBOX 1 2 0\nL -1 -1\nU 1\n");
    let o = monobar(&["solve", &file]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn ip_from_a_bound_start_is_nudged_inside() {
    let dir = tempfile::tempdir().unwrap();
    // The center start is interior, so supply one on two bounds instead.
    let file = write(dir.path(), "offset.qp", OFFSET_QP);
    let x0 = write(dir.path(), "x0.txt", "-1 1\n");
    let o = monobar(&["solve", &file, "--solver", "ip", "--x0", &x0]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(field(&s, "solver:"), "ip");
    assert_eq!(field(&s, "f:"), "5.00000e-01");
    assert_eq!(field(&s, "active:"), "1");
}

#[test]
fn cap_stop_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "offset.qp", OFFSET_QP);
    let o = monobar(&["solve", &file, "--eps-g", "0", "--mu-max", "64"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "termination:"), "muExceeded");
}

#[test]
fn solve_writes_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "offset.qp", OFFSET_QP);
    let csv = dir.path().join("row.csv");
    let o = monobar(&["solve", &file, "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "problem,n,nnz,solver,outer_iters,active,elapsed_s,f_value,proj_grad,reason"
    );
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[..4], ["offset", "2", "2", "mb"]);
    assert_eq!(row[5], "1");
    assert_eq!(row[7], "5.00000e-01");
    assert!(row[8].parse::<f64>().unwrap() <= 1e-4);
    assert_eq!(row[9], "projGradMet");
    assert_eq!(lines.len(), 2);
}

#[test]
fn predict_matches_budget() {
    let o = monobar(&["predict", "--mu0", "32", "--tau", "2", "--eps-f", "9.5367431640625e-7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "17\n");
    let o = monobar(&["predict", "--mu0", "32", "--tau", "2", "--eps-f", "0.0625"]);
    assert_eq!(stdout(&o), "0\n");
    let o = monobar(&["predict", "--mu0", "32", "--tau", "1", "--eps-f", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generated_problems_solve_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.qp");
    let b = dir.path().join("b.qp");
    for path in [&a, &b] {
        let o = monobar(&[
            "gen",
            "diag",
            "--m",
            "8",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let first = monobar(&["solve", a.to_str().unwrap()]);
    let second = monobar(&["solve", b.to_str().unwrap()]);
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn obstacle_generator_writes_grid_problem() {
    let o = monobar(&["gen", "obstacle", "--side", "4", "--kind", "torsion"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    // 16 diagonal entries plus 24 neighbor couplings in the lower triangle.
    assert!(text.starts_with("QPBOX 1 16 40\n"), "{}", text.lines().next().unwrap());
}

#[test]
fn compare_writes_sorted_csv_and_skips_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "offset.qp", OFFSET_QP);
    write(dir.path(), "broken.qp", "not a problem\n");
    write(dir.path(), "notes.txt", "ignored\n");
    let d = monobar(&["gen", "diag", "--m", "4", "--seed", "3"]);
    write(dir.path(), "diag4.qp", &stdout(&d));
    let csv = dir.path().join("out.csv");
    let o = monobar(&[
        "compare",
        dir.path().to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("broken.qp"));
    let text = fs::read_to_string(&csv).unwrap();
    let keys: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        [
            "diag4,4,4,ip",
            "diag4,4,4,mb",
            "diag4,4,4,oracle",
            "offset,2,2,ip",
            "offset,2,2,mb",
            "offset,2,2,oracle",
        ]
    );
    let o = monobar(&[
        "compare",
        dir.path().to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--solvers",
        "mb,bogus",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
