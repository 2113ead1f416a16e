//! CPLEX LP text format, for inspecting models with external tools.
//!
//! The writer emits one row per line and lists every variable in the
//! `Bounds` section in index order, so [`from_lp`] rebuilds the same variable
//! indices. The reader accepts the subset produced by the writer plus the
//! usual operator spellings (`<`, `=<`, `>`, `=>`).

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::{Cmp, LinExpr, Model, Var, VarKind};
use crate::error::MilpError;

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_.[]{}!\"#$%&()/,;?@'`|~".contains(c)
}

fn sanitize(raw: &str, taken: &mut HashSet<String>) -> String {
    let mut s: String = raw
        .chars()
        .map(|c| if is_ident_char(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') || s.parse::<f64>().is_ok()
        || section_of(&s).is_some()
        || s.eq_ignore_ascii_case("free")
    {
        s.insert(0, '_');
    }
    let base = s.clone();
    let mut k = 1;
    while !taken.insert(s.clone()) {
        s = format!("{base}_{k}");
        k += 1;
    }
    s
}

fn write_terms(out: &mut String, terms: &[(Var, f64)], names: &[String]) {
    for (i, (v, c)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 { "-" } else { "+" };
        if i == 0 && sign == "+" {
            write!(out, " {} {}", c.abs(), names[v.index()]).unwrap();
        } else {
            write!(out, " {sign} {} {}", c.abs(), names[v.index()]).unwrap();
        }
    }
}

/// Renders `model` in CPLEX LP format.
pub fn to_lp(model: &Model) -> String {
    let mut taken = HashSet::new();
    let names: Vec<String> = model.vars().iter().map(|d| sanitize(&d.name, &mut taken)).collect();
    let mut out = String::from("Minimize\n obj:");
    let obj = model.compact_objective();
    write_terms(&mut out, &obj.terms, &names);
    if obj.constant != 0.0 || obj.terms.is_empty() {
        let sign = if obj.constant < 0.0 { "-" } else { "+" };
        write!(out, " {sign} {}", obj.constant.abs()).unwrap();
    }
    out.push_str("\nSubject To\n");
    let mut row_names = HashSet::new();
    for c in model.constraints() {
        let name = sanitize(&c.name, &mut row_names);
        let terms: Vec<(Var, f64)> = if c.terms.is_empty() {
            match model.var_handles().next() {
                Some(v) => vec![(v, 0.0)],
                None => continue,
            }
        } else {
            c.terms.clone()
        };
        write!(out, " {name}:").unwrap();
        write_terms(&mut out, &terms, &names);
        let op = match c.cmp {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        };
        writeln!(out, " {op} {}", c.rhs).unwrap();
    }
    out.push_str("Bounds\n");
    for (d, name) in model.vars().iter().zip(&names) {
        if d.lower == f64::NEG_INFINITY && d.upper == f64::INFINITY {
            writeln!(out, " {name} free").unwrap();
        } else if d.lower == d.upper {
            writeln!(out, " {name} = {}", d.lower).unwrap();
        } else {
            writeln!(out, " {} <= {name} <= {}", d.lower, d.upper).unwrap();
        }
    }
    for (kind, header) in [(VarKind::Integer, "Generals"), (VarKind::Binary, "Binaries")] {
        let listed: Vec<&str> = model
            .vars()
            .iter()
            .zip(&names)
            .filter(|(d, _)| d.kind == kind)
            .map(|(_, n)| n.as_str())
            .collect();
        if !listed.is_empty() {
            writeln!(out, "{header}").unwrap();
            for n in listed {
                writeln!(out, " {n}").unwrap();
            }
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Reader {
    model: Model,
    index: HashMap<String, Var>,
    line: usize,
}

impl Reader {
    fn err(&self, message: impl Into<String>) -> MilpError {
        MilpError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn var(&mut self, name: &str) -> Var {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.model.continuous(name, 0.0, f64::INFINITY);
        self.index.insert(name.to_string(), v);
        v
    }

    fn number(&self, tok: &str) -> Result<f64, MilpError> {
        tok.parse::<f64>()
            .map_err(|_| self.err(format!("expected a number, found `{tok}`")))
    }

    fn expr(&mut self, text: &str) -> Result<LinExpr, MilpError> {
        let mut tokens = Vec::new();
        for raw in text.split_whitespace() {
            match raw.strip_prefix(['+', '-']) {
                Some(rest) if !rest.is_empty() && rest.parse::<f64>().is_err() => {
                    tokens.push(&raw[..1]);
                    tokens.push(rest);
                }
                _ => tokens.push(raw),
            }
        }
        let mut expr = LinExpr::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for tok in tokens {
            match tok {
                "+" => {
                    if let Some(c) = coef.take() {
                        expr.constant += sign * c;
                    }
                    sign = 1.0;
                }
                "-" => {
                    if let Some(c) = coef.take() {
                        expr.constant += sign * c;
                    }
                    sign = -1.0;
                }
                _ => match tok.parse::<f64>() {
                    Ok(x) if coef.is_none() => coef = Some(x),
                    Ok(_) => return Err(self.err(format!("two numbers in a row near `{tok}`"))),
                    Err(_) => {
                        let v = self.var(tok);
                        expr.terms.push((v, sign * coef.take().unwrap_or(1.0)));
                        sign = 1.0;
                    }
                },
            }
        }
        if let Some(c) = coef {
            expr.constant += sign * c;
        }
        Ok(expr)
    }

    fn split_label<'a>(&self, line: &'a str) -> (Option<&'a str>, &'a str) {
        match line.split_once(':') {
            Some((label, rest)) if !label.trim().is_empty() && !label.contains(['<', '>', '=']) => {
                (Some(label.trim()), rest)
            }
            _ => (None, line),
        }
    }

    fn row(&mut self, line: &str, n: usize) -> Result<(), MilpError> {
        let (label, body) = self.split_label(line);
        let ops = [("<=", Cmp::Le), ("=<", Cmp::Le), (">=", Cmp::Ge), ("=>", Cmp::Ge), ("<", Cmp::Le), (">", Cmp::Ge), ("=", Cmp::Eq)];
        let (pos, op, cmp) = ops
            .iter()
            .filter_map(|(op, cmp)| body.find(op).map(|p| (p, *op, *cmp)))
            .min_by_key(|(p, op, _)| (*p, std::cmp::Reverse(op.len())))
            .ok_or_else(|| self.err("constraint without comparison operator"))?;
        let lhs = self.expr(&body[..pos])?;
        let rhs = self.number(body[pos + op.len()..].trim())?;
        let name = label.map(str::to_string).unwrap_or_else(|| format!("r{n}"));
        self.model.add_constraint(name, lhs, cmp, rhs)
    }

    fn bound(&mut self, line: &str) -> Result<(), MilpError> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [name, free] if free.eq_ignore_ascii_case("free") => {
                let v = self.var(name);
                self.model.set_bounds(v, f64::NEG_INFINITY, f64::INFINITY);
            }
            [name, "=", x] => {
                let x = self.number(x)?;
                let v = self.var(name);
                self.model.set_bounds(v, x, x);
            }
            [lo, "<=", name, "<=", hi] => {
                let (lo, hi) = (self.number(lo)?, self.number(hi)?);
                let v = self.var(name);
                self.model.set_bounds(v, lo, hi);
            }
            [name, "<=", hi] => {
                let hi = self.number(hi)?;
                let v = self.var(name);
                let lo = self.model.var(v).lower;
                self.model.set_bounds(v, lo, hi);
            }
            [name, ">=", lo] => {
                let lo = self.number(lo)?;
                let v = self.var(name);
                let hi = self.model.var(v).upper;
                self.model.set_bounds(v, lo, hi);
            }
            _ => return Err(self.err(format!("unrecognised bound `{line}`"))),
        }
        Ok(())
    }

    fn mark(&mut self, line: &str, kind: VarKind) {
        for name in line.split_whitespace() {
            let v = self.var(name);
            let d = self.model.var(v).clone();
            let (lo, hi) = match kind {
                VarKind::Binary => (d.lower.max(0.0), d.upper.min(1.0)),
                _ => (d.lower, d.upper),
            };
            self.model.vars[v.index()].kind = kind;
            self.model.set_bounds(v, lo, hi);
        }
    }
}

/// Parses CPLEX LP text. Only minimisation problems are accepted.
pub fn from_lp(text: &str) -> Result<Model, MilpError> {
    let mut r = Reader {
        model: Model::new(),
        index: HashMap::new(),
        line: 0,
    };
    // Bounds first so that variable indices follow the Bounds listing.
    let mut section = Section::Preamble;
    for line in text.lines() {
        let t = line.trim();
        if let Some(s) = section_of(t) {
            section = s;
        } else if section == Section::Bounds && !t.is_empty() && !t.starts_with('\\') {
            let name = t
                .split_whitespace()
                .find(|tok| tok.parse::<f64>().is_err() && !["<=", "=", "free", ">="].contains(tok));
            if let Some(name) = name {
                r.var(name);
            }
        }
    }

    let mut section = Section::Preamble;
    let mut objective = None;
    let mut rows = 0;
    for (k, line) in text.lines().enumerate() {
        r.line = k + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('\\') {
            continue;
        }
        if t.eq_ignore_ascii_case("maximize") || t.eq_ignore_ascii_case("maximise") || t.eq_ignore_ascii_case("max") {
            return Err(r.err("maximisation is not supported"));
        }
        if let Some(s) = section_of(t) {
            section = s;
            continue;
        }
        match section {
            Section::Preamble => return Err(r.err("content before the objective section")),
            Section::Objective => {
                let (_, body) = r.split_label(t);
                let e = r.expr(body)?;
                objective = Some(match objective.take() {
                    Some(prev) => prev + e,
                    None => e,
                });
            }
            Section::Constraints => {
                r.row(t, rows)?;
                rows += 1;
            }
            Section::Bounds => r.bound(t)?,
            Section::Generals => r.mark(t, VarKind::Integer),
            Section::Binaries => r.mark(t, VarKind::Binary),
            Section::End => return Err(r.err("content after End")),
        }
    }
    if let Some(obj) = objective {
        r.model.set_objective(obj)?;
    }
    Ok(r.model)
}
