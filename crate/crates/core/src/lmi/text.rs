//! Plain-text exchange format for problems and certificates.
//!
//! A matrix is a header line `rows cols` followed by `rows` lines of
//! row-major, whitespace-separated entries. Lines starting with `#` are
//! comments.
//!
//! ```text
//! lmi-problem
//! var P sym 2
//! var a scalar
//! var Y free 2 1
//! constraint lyap
//! constant
//! 2 2
//! 0 0
//! 0 0
//! congruence P
//! 2 2        (left factor L)
//! 1 0
//! 0 1
//! 2 2        (right factor R)
//! -1 0
//! 0 -2
//! scaled a
//! 2 2
//! 1 0
//! 0 1
//! end
//! ```
//!
//! Certificates list `value NAME` followed by a matrix for every variable,
//! then `margin NAME max|min VALUE` lines and `feasible true|false`.

use std::fmt::Write as _;

use super::problem::{Assignment, Constraint, LmiProblem, Mat, Term, VarKind};
use super::verify::{LmiCertificate, Margin, MarginKind};
use crate::error::{Error, Result};

fn fmt_num(v: f64) -> String {
    format!("{v:.17e}")
}

fn write_matrix(out: &mut String, m: &Mat) {
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_num(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn write_problem(p: &LmiProblem) -> String {
    let mut out = String::from("lmi-problem\n");
    for v in &p.vars {
        let _ = match v.kind {
            VarKind::Sym(n) => writeln!(out, "var {} sym {n}", v.name),
            VarKind::Scalar => writeln!(out, "var {} scalar", v.name),
            VarKind::Free(r, c) => writeln!(out, "var {} free {r} {c}", v.name),
        };
    }
    for c in &p.constraints {
        let _ = writeln!(out, "constraint {}", c.name);
        out.push_str("constant\n");
        write_matrix(&mut out, &c.constant);
        for t in &c.terms {
            match t {
                Term::Congruence { var, left, right } => {
                    let _ = writeln!(out, "congruence {}", p.vars[var.0].name);
                    write_matrix(&mut out, left);
                    write_matrix(&mut out, right);
                }
                Term::Scaled { var, coeff } => {
                    let _ = writeln!(out, "scaled {}", p.vars[var.0].name);
                    write_matrix(&mut out, coeff);
                }
            }
        }
        out.push_str("end\n");
    }
    out
}

pub fn write_certificate(p: &LmiProblem, c: &LmiCertificate) -> String {
    let mut out = String::from("lmi-certificate\n");
    for (v, x) in p.vars.iter().zip(&c.assignment.values) {
        let _ = writeln!(out, "value {}", v.name);
        write_matrix(&mut out, x);
    }
    for m in &c.margins {
        let k = match m.kind {
            MarginKind::MaxEig => "max",
            MarginKind::MinEig => "min",
        };
        let _ = writeln!(out, "margin {} {k} {}", m.name, fmt_num(m.value));
    }
    let _ = writeln!(out, "feasible {}", c.feasible);
    out
}

/// Token stream over non-comment lines.
struct Lines<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.trim();
                (!l.is_empty() && !l.starts_with('#')).then(|| (i + 1, l.split_whitespace().collect()))
            })
            .collect();
        Self { lines, pos: 0 }
    }

    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        let l = self.lines.get(self.pos).cloned().ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(l)
    }

    fn peek(&self) -> Option<&(usize, Vec<&'a str>)> {
        self.lines.get(self.pos)
    }

    fn matrix(&mut self) -> Result<Mat> {
        let (ln, head) = self.next()?;
        if head.len() != 2 {
            return Err(Error::Parse(format!("line {ln}: expected 'rows cols'")));
        }
        let r: usize = parse_num(ln, head[0])?;
        let c: usize = parse_num(ln, head[1])?;
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r {
            let (ln, row) = self.next()?;
            if row.len() != c {
                return Err(Error::Parse(format!("line {ln}: expected {c} entries, found {}", row.len())));
            }
            for tok in row {
                data.push(parse_num::<f64>(ln, tok)?);
            }
        }
        Ok(Mat::from_row_slice(r, c, &data))
    }
}

fn parse_num<T: std::str::FromStr>(ln: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("line {ln}: malformed number '{tok}'")))
}

pub fn read_problem(text: &str) -> Result<LmiProblem> {
    let mut it = Lines::new(text);
    let (ln, head) = it.next()?;
    if head != ["lmi-problem"] {
        return Err(Error::Parse(format!("line {ln}: expected 'lmi-problem' header")));
    }
    let mut p = LmiProblem::new();
    while let Some((ln, toks)) = it.peek().cloned() {
        match toks.as_slice() {
            ["var", name, "sym", n] => {
                p.sym(*name, parse_num(ln, n)?);
            }
            ["var", name, "scalar"] => {
                p.scalar(*name);
            }
            ["var", name, "free", r, c] => {
                p.free(*name, parse_num(ln, r)?, parse_num(ln, c)?);
            }
            ["constraint", _] => break,
            _ => return Err(Error::Parse(format!("line {ln}: unrecognized declaration"))),
        }
        it.pos += 1;
    }
    while it.peek().is_some() {
        let (ln, toks) = it.next()?;
        let ["constraint", name] = toks.as_slice() else {
            return Err(Error::Parse(format!("line {ln}: expected 'constraint NAME'")));
        };
        let (ln2, kw) = it.next()?;
        if kw != ["constant"] {
            return Err(Error::Parse(format!("line {ln2}: expected 'constant'")));
        }
        let constant = it.matrix()?;
        let mut terms = Vec::new();
        loop {
            let (ln, toks) = it.next()?;
            let lookup = |n: &str| p.var_by_name(n).ok_or_else(|| Error::Parse(format!("line {ln}: unknown variable '{n}'")));
            match toks.as_slice() {
                ["end"] => break,
                ["congruence", v] => {
                    let var = lookup(v)?;
                    let left = it.matrix()?;
                    let right = it.matrix()?;
                    terms.push(Term::Congruence { var, left, right });
                }
                ["scaled", v] => {
                    let var = lookup(v)?;
                    terms.push(Term::Scaled { var, coeff: it.matrix()? });
                }
                _ => return Err(Error::Parse(format!("line {ln}: expected a term or 'end'"))),
            }
        }
        p.add_constraint(Constraint { name: name.to_string(), constant, terms })?;
    }
    Ok(p)
}

pub fn read_certificate(p: &LmiProblem, text: &str) -> Result<LmiCertificate> {
    let mut it = Lines::new(text);
    let (ln, head) = it.next()?;
    if head != ["lmi-certificate"] {
        return Err(Error::Parse(format!("line {ln}: expected 'lmi-certificate' header")));
    }
    let mut values: Vec<Option<Mat>> = vec![None; p.vars.len()];
    let mut margins = Vec::new();
    let mut feasible = false;
    while it.peek().is_some() {
        let (ln, toks) = it.next()?;
        match toks.as_slice() {
            ["value", name] => {
                let v = p.var_by_name(name).ok_or_else(|| Error::Parse(format!("line {ln}: unknown variable '{name}'")))?;
                values[v.0] = Some(it.matrix()?);
            }
            ["margin", name, kind, val] => {
                let kind = match *kind {
                    "max" => MarginKind::MaxEig,
                    "min" => MarginKind::MinEig,
                    _ => return Err(Error::Parse(format!("line {ln}: margin kind must be max|min"))),
                };
                margins.push(Margin { name: name.to_string(), kind, value: parse_num(ln, val)? });
            }
            ["feasible", f] => feasible = parse_num(ln, f)?,
            _ => return Err(Error::Parse(format!("line {ln}: unrecognized certificate line"))),
        }
    }
    let values = values
        .into_iter()
        .zip(&p.vars)
        .map(|(v, var)| v.ok_or_else(|| Error::Parse(format!("missing value for '{}'", var.name))))
        .collect::<Result<Vec<_>>>()?;
    let assignment = Assignment { values };
    p.check_assignment(&assignment)?;
    Ok(LmiCertificate { assignment, margins, feasible })
}
