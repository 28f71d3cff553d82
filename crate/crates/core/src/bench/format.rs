//! Line-oriented text format for box-constrained QPs.
//!
//! ```text
//! QPBOX 1 <m> <nnz>
//! L <m reals>
//! U <m reals>
//! B <m reals>
//! C <real>
//! H <row> <col> <value>      (nnz lines, col <= row, sorted, 0-based)
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Bounds, Problem, QuadraticProblem};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number (the line after the last one for truncated input).
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("expected header `QPBOX {FORMAT_VERSION} <m> <nnz>`")]
    Header,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("missing `{0}` line")]
    Missing(&'static str),
    #[error("expected a line starting with `{expected}`")]
    Tag { expected: &'static str },
    #[error("expected {expected} values, found {found}")]
    Count { expected: usize, found: usize },
    #[error("invalid number `{0}`")]
    Number(String),
    #[error("non-finite value `{0}`")]
    NonFinite(String),
    #[error("lower bound exceeds upper bound for variable {index}")]
    BoundOrder { index: usize },
    #[error("triplet ({row}, {col}) lies in the upper triangle")]
    UpperTriangle { row: usize, col: usize },
    #[error("triplet ({row}, {col}) is out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("triplet ({row}, {col}) is duplicated")]
    Duplicate { row: usize, col: usize },
    #[error("triplet ({row}, {col}) is out of (row, col) order")]
    Unsorted { row: usize, col: usize },
    #[error("unexpected content after the last triplet")]
    Trailing,
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn parse_real(token: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = token
        .parse()
        .map_err(|_| err(line, ParseErrorKind::Number(token.to_string())))?;
    if !v.is_finite() {
        return Err(err(line, ParseErrorKind::NonFinite(token.to_string())));
    }
    Ok(v)
}

fn parse_index(token: &str, line: usize) -> Result<usize, ParseError> {
    token
        .parse()
        .map_err(|_| err(line, ParseErrorKind::Number(token.to_string())))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &'static str) -> Result<(usize, Vec<&'a str>), ParseError> {
        match self.inner.next() {
            Some((i, text)) => {
                self.last = i + 1;
                Ok((i + 1, text.split_whitespace().collect()))
            }
            None => Err(err(self.last + 1, ParseErrorKind::Missing(what))),
        }
    }
}

fn tagged_reals(lines: &mut Lines<'_>, tag: &'static str, m: usize) -> Result<(usize, Vec<f64>), ParseError> {
    let (line, tokens) = lines.next_line(tag)?;
    if tokens.first() != Some(&tag) {
        return Err(err(line, ParseErrorKind::Tag { expected: tag }));
    }
    if tokens.len() - 1 != m {
        return Err(err(
            line,
            ParseErrorKind::Count {
                expected: m,
                found: tokens.len() - 1,
            },
        ));
    }
    let values = tokens[1..]
        .iter()
        .map(|t| parse_real(t, line))
        .collect::<Result<_, _>>()?;
    Ok((line, values))
}

pub fn parse_problem(input: &str) -> Result<QuadraticProblem, ParseError> {
    let mut lines = Lines {
        inner: input.lines().enumerate(),
        last: 0,
    };
    let (line, header) = lines.next_line("QPBOX")?;
    if header.len() != 4 || header[0] != "QPBOX" {
        return Err(err(line, ParseErrorKind::Header));
    }
    let version: u32 = header[1].parse().map_err(|_| err(line, ParseErrorKind::Header))?;
    if version != FORMAT_VERSION {
        return Err(err(line, ParseErrorKind::Version(version)));
    }
    let m = parse_index(header[2], line)?;
    let nnz = parse_index(header[3], line)?;

    let (_, lower) = tagged_reals(&mut lines, "L", m)?;
    let (upper_line, upper) = tagged_reals(&mut lines, "U", m)?;
    if let Some(index) = (0..m).find(|&i| lower[i] > upper[i]) {
        return Err(err(upper_line, ParseErrorKind::BoundOrder { index }));
    }
    let (_, linear) = tagged_reals(&mut lines, "B", m)?;
    let (_, constant) = tagged_reals(&mut lines, "C", 1)?;

    let mut triplets = Vec::with_capacity(nnz);
    let mut previous: Option<(usize, usize)> = None;
    for _ in 0..nnz {
        let (line, tokens) = lines.next_line("H")?;
        if tokens.first() != Some(&"H") {
            return Err(err(line, ParseErrorKind::Tag { expected: "H" }));
        }
        if tokens.len() != 4 {
            return Err(err(
                line,
                ParseErrorKind::Count {
                    expected: 3,
                    found: tokens.len() - 1,
                },
            ));
        }
        let row = parse_index(tokens[1], line)?;
        let col = parse_index(tokens[2], line)?;
        let value = parse_real(tokens[3], line)?;
        if row >= m || col >= m {
            return Err(err(line, ParseErrorKind::IndexOutOfRange { row, col, dim: m }));
        }
        if col > row {
            return Err(err(line, ParseErrorKind::UpperTriangle { row, col }));
        }
        if let Some(prev) = previous {
            if prev == (row, col) {
                return Err(err(line, ParseErrorKind::Duplicate { row, col }));
            }
            if prev > (row, col) {
                return Err(err(line, ParseErrorKind::Unsorted { row, col }));
            }
        }
        previous = Some((row, col));
        triplets.push((row, col, value));
    }
    for (i, rest) in lines.inner.by_ref() {
        if !rest.trim().is_empty() {
            return Err(err(i + 1, ParseErrorKind::Trailing));
        }
    }

    let bounds = Bounds::new(lower, upper).expect("bounds validated above");
    Ok(QuadraticProblem::new(triplets, linear, constant[0], bounds).expect("problem validated above"))
}

fn push_reals(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        // `{:?}` is the shortest representation that parses back exactly
        write!(out, " {v:?}").expect("writing to a String");
    }
    out.push('\n');
}

pub fn serialize_problem(p: &QuadraticProblem) -> String {
    let mut out = String::new();
    writeln!(out, "QPBOX {FORMAT_VERSION} {} {}", p.dim(), p.nnz()).expect("writing to a String");
    push_reals(&mut out, "L", p.bounds().lower());
    push_reals(&mut out, "U", p.bounds().upper());
    push_reals(&mut out, "B", p.linear());
    push_reals(&mut out, "C", &[p.constant()]);
    for (r, c, v) in p.triplets() {
        writeln!(out, "H {r} {c} {v:?}").expect("writing to a String");
    }
    out
}
