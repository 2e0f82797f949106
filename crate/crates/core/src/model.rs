//! Geometric core types: halfspaces, H-polytopes and lattice points, plus the
//! text formats they are read from and written to.
//!
//! Native format: a header line `m n`, then `m` lines of `n + 1` numbers
//! `a_1 … a_n b` meaning `a·x ≤ b`. A row may instead be written as
//! `a_1 … a_n OP b` with `OP` one of `<= < >= > =`; those rows are rewritten
//! into `≤` rows. `#` starts a comment. LF and CRLF line endings are accepted.
//!
//! Dense-matrix format (LattE-style): a header `m n+1`, then `m` lines
//! `b -a_1 … -a_n` meaning `b - a·x ≥ 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative membership tolerance shared by the lattice test and the sampler.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Halfspace { a, b }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum()
    }

    pub fn dot_lattice(&self, p: &LatticePoint) -> f64 {
        self.a.iter().zip(&p.0).map(|(&a, &x)| a * x as f64).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.a.iter().map(|a| a.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.a.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    fn is_zero(&self) -> bool {
        self.a.iter().all(|&a| a == 0.0)
    }

    /// Tolerant `a·x ≤ b` with band `tol·(1 + |b|)`.
    pub fn admits(&self, x: &[f64], tol: f64) -> bool {
        self.dot(x) <= self.b + tol * (1.0 + self.b.abs())
    }

    pub fn admits_lattice(&self, p: &LatticePoint) -> bool {
        self.dot_lattice(p) <= self.b + MEMBERSHIP_TOL * (1.0 + self.b.abs())
    }
}

/// An H-polytope `{x ∈ R^n : A x ≤ b}`. Row order is significant: the chain
/// builder consumes constraints in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    n: usize,
    rows: Vec<Halfspace>,
}

impl Polytope {
    pub fn new(n: usize, rows: Vec<Halfspace>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("dimension must be at least 1".into()));
        }
        if rows.is_empty() {
            return Err(Error::Precondition(
                "polytope needs at least one row".into(),
            ));
        }
        for row in &rows {
            if row.a.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.a.len(),
                });
            }
            if row.is_zero() {
                return Err(Error::Precondition("zero coefficient row".into()));
            }
        }
        Ok(Polytope { n, rows })
    }

    /// Axis-aligned box `lo ≤ x ≤ hi` as `2n` rows, upper bounds first per axis.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let n = lo.len();
        let mut rows = Vec::with_capacity(2 * n);
        for j in 0..n {
            let mut up = vec![0.0; n];
            up[j] = 1.0;
            rows.push(Halfspace::new(up, hi[j]));
            let mut down = vec![0.0; n];
            down[j] = -1.0;
            rows.push(Halfspace::new(down, -lo[j]));
        }
        Polytope::new(n, rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Halfspace] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Halfspace {
        &self.rows[i]
    }

    /// A new polytope with `extra` appended after the existing rows.
    pub fn with_rows(&self, extra: &[Halfspace]) -> Polytope {
        let mut rows = self.rows.clone();
        rows.extend_from_slice(extra);
        Polytope { n: self.n, rows }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }

    /// True iff `a_i·x ≤ b_i + tol·(1 + |b_i|)` for every row.
    pub fn contains_real(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(x.len())?;
        Ok(self.rows.iter().all(|r| r.admits(x, tol)))
    }

    pub fn contains_lattice(&self, p: &LatticePoint) -> Result<bool> {
        self.check_dim(p.dim())?;
        Ok(self.contains_lattice_unchecked(p))
    }

    pub(crate) fn contains_lattice_unchecked(&self, p: &LatticePoint) -> bool {
        self.rows.iter().all(|r| r.admits_lattice(p))
    }

    /// Serialize in the native format. Parsing the output yields an equal polytope.
    pub fn to_native(&self) -> String {
        let mut out = format!("{} {}\n", self.rows.len(), self.n);
        for row in &self.rows {
            let mut fields: Vec<String> = row.a.iter().map(|v| format!("{v:?}")).collect();
            fields.push(format!("{:?}", row.b));
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Polytope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_native())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

/// Coordinate-wise nearest integer, halves rounded away from zero.
pub fn round_real(x: &[f64]) -> LatticePoint {
    LatticePoint(x.iter().map(|v| v.round() as i64).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    Native,
    DenseMatrix,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native" => Ok(InputFormat::Native),
            "dense-matrix" | "dense" | "latte" => Ok(InputFormat::DenseMatrix),
            other => Err(Error::InvalidConfig(format!(
                "unknown input format {other:?}"
            ))),
        }
    }
}

/// A parsed polytope together with notes about rewrites applied to
/// non-`≤` rows (strict inequalities that could not be tightened, etc.).
#[derive(Clone, Debug)]
pub struct ParsedInput {
    pub polytope: Polytope,
    pub notes: Vec<String>,
}

pub fn parse_polytope(text: &str, format: InputFormat) -> Result<Polytope> {
    parse_with_notes(text, format).map(|p| p.polytope)
}

pub fn parse_with_notes(text: &str, format: InputFormat) -> Result<ParsedInput> {
    let mut lines = text
        .split('\n')
        .enumerate()
        .map(|(i, raw)| {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            (i + 1, line.trim())
        })
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(Error::Parse {
            line: hline,
            msg: format!("header must be two integers, found {:?}", header),
        });
    }
    let parse_count = |tok: &str| -> Result<usize> {
        tok.parse::<usize>().map_err(|_| Error::Parse {
            line: hline,
            msg: format!("invalid count {tok:?} in header"),
        })
    };
    let m = parse_count(head[0])?;
    let cols = parse_count(head[1])?;
    let n = match format {
        InputFormat::Native => cols,
        InputFormat::DenseMatrix => cols.saturating_sub(1),
    };
    if m == 0 || n == 0 {
        return Err(Error::Parse {
            line: hline,
            msg: "header needs m >= 1 and n >= 1".into(),
        });
    }

    let mut rows = Vec::with_capacity(m);
    let mut notes = Vec::new();
    let mut seen = 0;
    for (line, content) in lines.by_ref() {
        if seen == m {
            return Err(Error::Parse {
                line,
                msg: format!("unexpected extra row (header declares {m})"),
            });
        }
        seen += 1;
        match format {
            InputFormat::Native => parse_native_row(content, n, line, &mut rows, &mut notes)?,
            InputFormat::DenseMatrix => rows.push(parse_dense_row(content, n, line)?),
        }
    }
    if seen < m {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            msg: format!("expected {m} rows, found {seen}"),
        });
    }
    let polytope = Polytope::new(n, rows).map_err(|e| Error::Parse {
        line: hline,
        msg: e.to_string(),
    })?;
    Ok(ParsedInput { polytope, notes })
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v = tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite number {tok:?}"),
        });
    }
    Ok(v)
}

fn check_nonzero(a: &[f64], line: usize) -> Result<()> {
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::Parse {
            line,
            msg: "zero coefficient row".into(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

fn relation(tok: &str) -> Option<Relation> {
    match tok {
        "<=" | "≤" => Some(Relation::Le),
        "<" => Some(Relation::Lt),
        ">=" | "≥" => Some(Relation::Ge),
        ">" => Some(Relation::Gt),
        "=" | "==" => Some(Relation::Eq),
        _ => None,
    }
}

fn parse_native_row(
    content: &str,
    n: usize,
    line: usize,
    rows: &mut Vec<Halfspace>,
    notes: &mut Vec<String>,
) -> Result<()> {
    let toks: Vec<&str> = content.split_whitespace().collect();
    let (coeff_toks, rel, b_tok) = match toks.iter().position(|t| relation(t).is_some()) {
        Some(pos) => {
            if pos != toks.len().saturating_sub(2) {
                return Err(Error::Parse {
                    line,
                    msg: "relation must be the second-to-last token".into(),
                });
            }
            (&toks[..pos], relation(toks[pos]).unwrap(), toks[pos + 1])
        }
        None => {
            if toks.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty row".into(),
                });
            }
            (&toks[..toks.len() - 1], Relation::Le, toks[toks.len() - 1])
        }
    };
    if coeff_toks.len() != n {
        return Err(Error::Parse {
            line,
            msg: format!("expected {} coefficients, found {}", n, coeff_toks.len()),
        });
    }
    let a = coeff_toks
        .iter()
        .map(|t| parse_number(t, line))
        .collect::<Result<Vec<f64>>>()?;
    let b = parse_number(b_tok, line)?;
    check_nonzero(&a, line)?;

    let neg = |a: &[f64]| a.iter().map(|v| -v).collect::<Vec<f64>>();
    let all_integer = a.iter().all(|v| v.fract() == 0.0) && b.fract() == 0.0;
    match rel {
        Relation::Le => rows.push(Halfspace::new(a, b)),
        Relation::Ge => rows.push(Halfspace::new(neg(&a), -b)),
        Relation::Eq => {
            rows.push(Halfspace::new(a.clone(), b));
            rows.push(Halfspace::new(neg(&a), -b));
        }
        Relation::Lt | Relation::Gt => {
            let (a, b) = if rel == Relation::Lt {
                (a, b)
            } else {
                (neg(&a), -b)
            };
            if all_integer {
                rows.push(Halfspace::new(a, b - 1.0));
            } else {
                notes.push(format!(
                    "line {line}: strict inequality with non-integer data treated as non-strict"
                ));
                rows.push(Halfspace::new(a, b));
            }
        }
    }
    Ok(())
}

fn parse_dense_row(content: &str, n: usize, line: usize) -> Result<Halfspace> {
    let vals = content
        .split_whitespace()
        .map(|t| parse_number(t, line))
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != n + 1 {
        return Err(Error::Parse {
            line,
            msg: format!("expected {} numbers, found {}", n + 1, vals.len()),
        });
    }
    let b = vals[0];
    let a: Vec<f64> = vals[1..].iter().map(|v| -v).collect();
    check_nonzero(&a, line)?;
    Ok(Halfspace::new(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square5() -> Polytope {
        parse_polytope("2 2\n1 0 5\n0 1 5", InputFormat::Native).unwrap()
    }

    fn triangle() -> Polytope {
        Polytope::new(
            2,
            vec![
                Halfspace::new(vec![1.0, 1.0], 2.0),
                Halfspace::new(vec![-1.0, 0.0], 0.0),
                Halfspace::new(vec![0.0, -1.0], 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn parses_native_rows_in_order() {
        let p = square5();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.num_rows(), 2);
        assert_eq!(p.row(0), &Halfspace::new(vec![1.0, 0.0], 5.0));
        assert_eq!(p.row(1), &Halfspace::new(vec![0.0, 1.0], 5.0));
    }

    #[test]
    fn smallest_legal_input() {
        let p = parse_polytope("1 1\n1 1", InputFormat::Native).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.rows(), &[Halfspace::new(vec![1.0], 1.0)]);
    }

    #[test]
    fn zero_row_is_rejected_with_line_number() {
        let err = parse_polytope("1 2\n0 0 3", InputFormat::Native).unwrap_err();
        assert_eq!(err.to_string(), "zero coefficient row at line 2");
    }

    #[test]
    fn row_width_mismatch_is_rejected() {
        let err = parse_polytope("2 2\n1 0 5\n0 1 5 7", InputFormat::Native).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_blank_lines_and_crlf() {
        let text = "# a square\r\n2 2 # header\r\n\r\n1 0 5\r\n0 1 5 # second\r\n";
        assert_eq!(
            parse_polytope(text, InputFormat::Native).unwrap(),
            square5()
        );
    }

    #[test]
    fn row_count_must_match_header() {
        assert!(parse_polytope("3 2\n1 0 5\n0 1 5", InputFormat::Native).is_err());
        assert!(parse_polytope("1 2\n1 0 5\n0 1 5", InputFormat::Native).is_err());
    }

    #[test]
    fn relation_rows_are_rewritten() {
        let text = "4 2\n1 1 >= 1\n1 0 = 3\n0 1 < 4\n0 1 > 0.5\n";
        let parsed = parse_with_notes(text, InputFormat::Native).unwrap();
        let rows = parsed.polytope.rows();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0], Halfspace::new(vec![-1.0, -1.0], -1.0));
        assert_eq!(rows[1], Halfspace::new(vec![1.0, 0.0], 3.0));
        assert_eq!(rows[2], Halfspace::new(vec![-1.0, 0.0], -3.0));
        // all-integer strict row tightened by one
        assert_eq!(rows[3], Halfspace::new(vec![0.0, 1.0], 3.0));
        // non-integer strict row kept non-strict, with a note
        assert_eq!(rows[4], Halfspace::new(vec![0.0, -1.0], -0.5));
        assert_eq!(parsed.notes.len(), 1);
    }

    #[test]
    fn dense_matrix_format() {
        let p = parse_polytope("2 3\n5 -1 0\n5 0 -1\n", InputFormat::DenseMatrix).unwrap();
        assert_eq!(p, square5());
    }

    #[test]
    fn contains_real_boundary_and_tolerance() {
        let p = square5();
        assert!(p.contains_real(&[5.0, 5.0], 0.0).unwrap());
        assert!(!p.contains_real(&[5.0000001, 0.0], 1e-9).unwrap());
        assert!(p.contains_real(&[5.0 + 1e-12, 0.0], 1e-9).unwrap());
        assert!(p.contains_real(&[1.0], 0.0).is_err());
    }

    #[test]
    fn contains_lattice_triangle() {
        let p = triangle();
        assert!(p.contains_lattice(&LatticePoint(vec![1, 1])).unwrap());
        assert!(!p.contains_lattice(&LatticePoint(vec![2, 1])).unwrap());
        assert!(p.contains_lattice(&LatticePoint(vec![0, 0])).unwrap());
        assert!(p.contains_lattice(&LatticePoint(vec![0, 0, 0])).is_err());
    }

    #[test]
    fn rounding_rules() {
        assert_eq!(round_real(&[0.4, -0.4]), LatticePoint(vec![0, 0]));
        assert_eq!(round_real(&[0.5, -0.5]), LatticePoint(vec![1, -1]));
        assert_eq!(round_real(&[2.0, 3.0]), LatticePoint(vec![2, 3]));
    }

    fn arb_polytope() -> impl Strategy<Value = Polytope> {
        (1usize..5).prop_flat_map(|n| {
            prop::collection::vec(
                (
                    prop::collection::vec(-1e6f64..1e6, n)
                        .prop_filter("nonzero", |a| a.iter().any(|&v| v != 0.0)),
                    -1e6f64..1e6,
                ),
                1..8,
            )
            .prop_map(move |rows| {
                Polytope::new(
                    n,
                    rows.into_iter()
                        .map(|(a, b)| Halfspace::new(a, b))
                        .collect(),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_roundtrip(p in arb_polytope()) {
            let back = parse_polytope(&p.to_native(), InputFormat::Native).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn rounding_is_idempotent(x in prop::collection::vec(-1e12f64..1e12, 1..6)) {
            let once = round_real(&x);
            prop_assert_eq!(round_real(&once.to_real()), once);
        }

        #[test]
        fn membership_tests_agree_on_lattice_points(
            p in arb_polytope(),
            coords in prop::collection::vec(-50i64..50, 4),
        ) {
            let q = LatticePoint(coords[..p.dim()].to_vec());
            // skip points inside the tolerance band of some row
            let near = p.rows().iter().any(|r| {
                (r.dot_lattice(&q) - r.b).abs() <= MEMBERSHIP_TOL * (1.0 + r.b.abs())
            });
            prop_assume!(!near);
            prop_assert_eq!(
                p.contains_real(&q.to_real(), 0.0).unwrap(),
                p.contains_lattice(&q).unwrap()
            );
        }
    }
}
