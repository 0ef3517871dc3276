//! CPLEX-style LP text and plain solution listings.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::milp::{MilpModel, Sense, VarKind, Variable};

use super::{Solution, SolveStats, Status};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> LpParseError {
    LpParseError { line, message: message.into() }
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(c.abs()), model.variables[v].name);
    }
}

/// Writes `model` as LP text (Minimize / Subject To / Bounds / Binaries / End).
///
/// Bounds and Binaries list variables by name, so the text does not depend
/// on variable numbering and re-exporting a parsed file reproduces it.
pub fn export_lp(model: &MilpModel) -> String {
    let mut by_name: Vec<&Variable> = model.variables.iter().collect();
    by_name.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, model, &model.objective);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense, num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &by_name {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, num(v.lower));
        } else if v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} >= {}", v.name, num(v.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    let binaries: Vec<&str> = by_name.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Label(String),
    Sign(f64),
    Rel(Sense),
}

fn section_of(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    match l.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        t if t.starts_with(|c: char| c.is_ascii_digit() || c == '.') => t.parse().ok(),
        _ => None,
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit() || c == '.')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || "_.[]{}!\"#$%&()/,;?@'`|~".contains(c))
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, LpParseError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        if c.is_whitespace() {
            k += 1;
        } else if c == '+' || c == '-' {
            // signed infinity is a number
            let rest: String = chars[k + 1..].iter().take_while(|c| c.is_ascii_alphabetic()).collect();
            let lower = rest.to_ascii_lowercase();
            if lower == "inf" || lower == "infinity" {
                toks.push(Tok::Num(if c == '+' { f64::INFINITY } else { f64::NEG_INFINITY }));
                k += 1 + rest.len();
            } else {
                toks.push(Tok::Sign(if c == '+' { 1.0 } else { -1.0 }));
                k += 1;
            }
        } else if c == '<' || c == '>' || c == '=' {
            let mut op = String::from(c);
            if k + 1 < chars.len() && "<>=".contains(chars[k + 1]) {
                op.push(chars[k + 1]);
            }
            k += op.len();
            toks.push(Tok::Rel(match op.as_str() {
                "<" | "<=" | "=<" => Sense::Le,
                ">" | ">=" | "=>" => Sense::Ge,
                "=" | "==" => Sense::Eq,
                _ => return Err(err(line, format!("unknown operator {op:?}"))),
            }));
        } else {
            let start = k;
            while k < chars.len() && !chars[k].is_whitespace() && !"+-<>=:".contains(chars[k]) {
                // exponent sign belongs to the number
                if (chars[k] == 'e' || chars[k] == 'E')
                    && k + 1 < chars.len()
                    && (chars[k + 1] == '+' || chars[k + 1] == '-')
                    && chars[start].is_ascii_digit() | (chars[start] == '.')
                {
                    k += 2;
                    continue;
                }
                k += 1;
            }
            let word: String = chars[start..k].iter().collect();
            if start == k {
                return Err(err(line, format!("unexpected character {:?}", chars[k])));
            }
            if k < chars.len() && chars[k] == ':' {
                if !valid_name(&word) {
                    return Err(err(line, format!("invalid label {word:?}")));
                }
                k += 1;
                toks.push(Tok::Label(word));
            } else if let Some(x) = parse_number(&word) {
                toks.push(Tok::Num(x));
            } else if valid_name(&word) {
                toks.push(Tok::Name(word));
            } else {
                return Err(err(line, format!("unexpected token {word:?}")));
            }
        }
    }
    Ok(toks)
}

struct Builder {
    model: MilpModel,
    kinds: HashMap<String, VarKind>,
    lower: HashMap<String, f64>,
    upper: HashMap<String, f64>,
}

impl Builder {
    fn var(&mut self, name: &str, line: usize) -> Result<usize, LpParseError> {
        if let Some(v) = self.model.var_by_name(name) {
            return Ok(v);
        }
        self.model.add_var(name, VarKind::Continuous, 0.0, f64::INFINITY).map_err(|e| err(line, e.to_string()))
    }
}

/// Linear expression `[sign] [coef] name ...`; stops at a relation.
fn expression(b: &mut Builder, toks: &[Tok], line: usize) -> Result<(Vec<(usize, f64)>, usize), LpParseError> {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    let mut k = 0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    let mut pending = false;
    while k < toks.len() {
        match &toks[k] {
            Tok::Sign(s) => {
                if coef.is_some() {
                    return Err(err(line, "coefficient without a variable"));
                }
                sign *= s;
                pending = true;
            }
            Tok::Num(x) => {
                if coef.is_some() {
                    return Err(err(line, "two numbers in a row"));
                }
                if !x.is_finite() {
                    return Err(err(line, "infinite coefficient"));
                }
                coef = Some(*x);
                pending = true;
            }
            Tok::Name(n) => {
                let v = b.var(n, line)?;
                let c = sign * coef.unwrap_or(1.0);
                match terms.iter_mut().find(|(u, _)| *u == v) {
                    Some(t) => t.1 += c,
                    None => terms.push((v, c)),
                }
                sign = 1.0;
                coef = None;
                pending = false;
            }
            Tok::Rel(_) | Tok::Label(_) => break,
        }
        k += 1;
    }
    if pending {
        if let (Some(c), true) = (coef, terms.is_empty()) {
            // a bare constant such as "obj: 0"
            if c == 0.0 {
                return Ok((terms, k));
            }
        }
        return Err(err(line, "dangling sign or coefficient"));
    }
    Ok((terms, k))
}

/// Parses LP text produced by [`export_lp`] or any solver writing the same
/// subset (minimisation, linear rows, bounds, binaries).
pub fn parse_lp(text: &str) -> Result<MilpModel, LpParseError> {
    let mut b = Builder { model: MilpModel::new(), kinds: HashMap::new(), lower: HashMap::new(), upper: HashMap::new() };
    let mut section: Option<Section> = None;
    // statement text with the line it starts on
    let mut statements: Vec<(Section, usize, Vec<Tok>)> = Vec::new();
    let mut objective_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('\\').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let lower = content.trim().to_ascii_lowercase();
        if lower.starts_with("maximize") || lower.starts_with("maximise") || lower == "max" {
            return Err(err(line, "only minimisation models are supported"));
        }
        if let Some(s) = section_of(content) {
            if s == Section::Objective {
                objective_seen = true;
            }
            section = Some(s);
            continue;
        }
        let Some(sec) = section else {
            return Err(err(line, "content before the objective section"));
        };
        let toks = tokenize(content, line)?;
        match sec {
            Section::End => return Err(err(line, "content after End")),
            Section::Generals => return Err(err(line, "general integer variables are not supported")),
            Section::Objective | Section::Constraints => {
                // a statement continues until the next label or a completed relation
                let starts_new = matches!(toks.first(), Some(Tok::Label(_)))
                    || statements.last().is_none_or(|(s, _, t)| *s != sec || statement_complete(sec, t));
                if starts_new {
                    statements.push((sec, line, toks));
                } else {
                    statements.last_mut().unwrap().2.extend(toks);
                }
            }
            Section::Bounds | Section::Binaries => statements.push((sec, line, toks)),
        }
    }
    if !objective_seen {
        return Err(err(text.lines().count().max(1), "missing objective section"));
    }
    if section != Some(Section::End) {
        return Err(err(text.lines().count().max(1), "missing End"));
    }
    let mut unnamed = 0;
    for (sec, line, toks) in statements {
        match sec {
            Section::Objective => {
                let body = match toks.first() {
                    Some(Tok::Label(_)) => &toks[1..],
                    _ => &toks[..],
                };
                let (terms, used) = expression(&mut b, body, line)?;
                if used != body.len() {
                    return Err(err(line, "unexpected relation in objective"));
                }
                b.model.set_objective(terms).map_err(|e| err(line, e.to_string()))?;
            }
            Section::Constraints => {
                let (name, body) = match toks.first() {
                    Some(Tok::Label(n)) => (n.clone(), &toks[1..]),
                    _ => {
                        unnamed += 1;
                        (format!("r_{unnamed}"), &toks[..])
                    }
                };
                let (terms, used) = expression(&mut b, body, line)?;
                let rest = &body[used..];
                let (sense, rhs) = match rest {
                    [Tok::Rel(s), Tok::Num(x)] => (*s, *x),
                    [Tok::Rel(s), Tok::Sign(g), Tok::Num(x)] => (*s, g * x),
                    _ => return Err(err(line, format!("constraint {name} needs `relation number` after the expression"))),
                };
                if !rhs.is_finite() {
                    return Err(err(line, format!("constraint {name} has an infinite right-hand side")));
                }
                b.model.add_constraint(name, terms, sense, rhs).map_err(|e| err(line, e.to_string()))?;
            }
            Section::Bounds => bound(&mut b, &toks, line)?,
            Section::Binaries => {
                for t in toks {
                    match t {
                        Tok::Name(n) => {
                            b.var(&n, line)?;
                            b.kinds.insert(n, VarKind::Binary);
                        }
                        other => return Err(err(line, format!("expected a variable name, found {other:?}"))),
                    }
                }
            }
            Section::Generals | Section::End => unreachable!(),
        }
    }
    let Builder { mut model, kinds, lower, upper } = b;
    for v in model.variables.iter_mut() {
        if kinds.get(&v.name) == Some(&VarKind::Binary) {
            v.kind = VarKind::Binary;
            v.lower = lower.get(&v.name).copied().unwrap_or(0.0).max(0.0);
            v.upper = upper.get(&v.name).copied().unwrap_or(1.0).min(1.0);
        } else {
            v.lower = lower.get(&v.name).copied().unwrap_or(0.0);
            v.upper = upper.get(&v.name).copied().unwrap_or(f64::INFINITY);
        }
    }
    Ok(model)
}

fn statement_complete(sec: Section, toks: &[Tok]) -> bool {
    match sec {
        Section::Objective => false,
        _ => {
            let n = toks.len();
            n >= 2 && matches!(toks[n - 1], Tok::Num(_)) && (matches!(toks[n - 2], Tok::Rel(_)) || (n >= 3 && matches!(toks[n - 2], Tok::Sign(_)) && matches!(toks[n - 3], Tok::Rel(_))))
        }
    }
}

fn signed(toks: &[Tok]) -> Vec<Tok> {
    // fold "sign number" into a single number
    let mut out = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        if let (Tok::Sign(s), Some(Tok::Num(x))) = (&toks[k], toks.get(k + 1)) {
            out.push(Tok::Num(s * x));
            k += 2;
        } else {
            out.push(toks[k].clone());
            k += 1;
        }
    }
    out
}

fn bound(b: &mut Builder, toks: &[Tok], line: usize) -> Result<(), LpParseError> {
    let toks = signed(toks);
    let set = |b: &mut Builder, name: &str, sense: Sense, x: f64| -> Result<(), LpParseError> {
        b.var(name, line)?;
        match sense {
            Sense::Ge => {
                b.lower.insert(name.into(), x);
            }
            Sense::Le => {
                b.upper.insert(name.into(), x);
            }
            Sense::Eq => {
                b.lower.insert(name.into(), x);
                b.upper.insert(name.into(), x);
            }
        }
        Ok(())
    };
    let flip = |s: Sense| match s {
        Sense::Le => Sense::Ge,
        Sense::Ge => Sense::Le,
        Sense::Eq => Sense::Eq,
    };
    match toks.as_slice() {
        [Tok::Name(n), Tok::Name(f)] if f.eq_ignore_ascii_case("free") => {
            b.var(n, line)?;
            b.lower.insert(n.clone(), f64::NEG_INFINITY);
            b.upper.insert(n.clone(), f64::INFINITY);
            Ok(())
        }
        [Tok::Name(n), Tok::Rel(s), Tok::Num(x)] => set(b, n, *s, *x),
        [Tok::Num(x), Tok::Rel(s), Tok::Name(n)] => set(b, n, flip(*s), *x),
        [Tok::Num(lo), Tok::Rel(s1), Tok::Name(n), Tok::Rel(s2), Tok::Num(hi)] if *s1 == *s2 && *s1 != Sense::Eq => {
            let (a, c) = if *s1 == Sense::Le { (*lo, *hi) } else { (*hi, *lo) };
            set(b, n, Sense::Ge, a)?;
            set(b, n, Sense::Le, c)
        }
        _ => Err(err(line, "malformed bound")),
    }
}

/// Reads a solution listing for `model` and checks it.
///
/// Accepted lines: `name value`, `name = value`, and `index name value
/// [cost]` as written by some solvers; `#` starts a comment. Variables not
/// listed are zero. A point that violates a row by more than 1e-6 comes back
/// as [`Status::Infeasible`] with the row named in `detail`.
pub fn import_solution(text: &str, model: &MilpModel) -> Result<Solution, LpParseError> {
    let mut values = vec![0.0; model.variables.len()];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let lower = content.to_ascii_lowercase();
        if lower.starts_with("optimal") || lower.starts_with("objective") || lower.starts_with("stopped") {
            continue;
        }
        if lower.starts_with("infeasible") || lower.starts_with("unbounded") {
            return Ok(Solution { detail: Some(format!("solver reported: {content}")), ..Solution::infeasible("") });
        }
        let fields: Vec<&str> = content.split(|c: char| c.is_whitespace() || c == '=').filter(|s| !s.is_empty()).collect();
        let (name, value) = match fields.as_slice() {
            [name, value] => (*name, *value),
            [index, name, value] | [index, name, value, _] if index.parse::<usize>().is_ok() => (*name, *value),
            _ => return Err(err(line, format!("expected `name value`, found {content:?}"))),
        };
        let v = model.var_by_name(name).ok_or_else(|| err(line, format!("unknown variable {name:?}")))?;
        let x: f64 = value.parse().map_err(|_| err(line, format!("bad value {value:?}")))?;
        if !x.is_finite() {
            return Err(err(line, format!("non-finite value for {name}")));
        }
        values[v] = x;
    }
    let objective = model.objective_value(&values);
    let violations = model.violations(&values, 1e-6);
    let stats = SolveStats::default();
    if let Some(&(row, amount)) = violations.first() {
        return Ok(Solution {
            status: Status::Infeasible,
            objective,
            best_bound: f64::NEG_INFINITY,
            values,
            stats,
            detail: Some(format!("{} violated by {amount:e}", model.describe_row(row))),
        });
    }
    Ok(Solution { status: Status::Feasible, objective, best_bound: f64::NEG_INFINITY, values, stats, detail: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MilpModel {
        let mut m = MilpModel::new();
        let a = m.add_var("x_0_0", VarKind::Binary, 0.0, 1.0).unwrap();
        let b = m.add_var("x_0_1", VarKind::Binary, 0.0, 1.0).unwrap();
        let z = m.add_var("z", VarKind::Continuous, 0.0, f64::INFINITY).unwrap();
        m.add_constraint("assign_0", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.0).unwrap();
        m.add_constraint("load_0", vec![(z, 1.0), (a, -2.0)], Sense::Ge, 0.0).unwrap();
        m.add_constraint("load_1", vec![(z, 1.0), (b, -3.0e-7)], Sense::Ge, 0.0).unwrap();
        m.set_objective(vec![(z, 1.0)]).unwrap();
        m
    }

    #[test]
    fn export_parse_round_trip() {
        let m = small();
        let text = export_lp(&m);
        assert!(text.contains("Binaries"));
        let back = parse_lp(&text).unwrap();
        assert_eq!(export_lp(&back), text);
        for v in &m.variables {
            let w = &back.variables[back.var_by_name(&v.name).unwrap()];
            assert_eq!((w.kind, w.lower, w.upper), (v.kind, v.lower, v.upper));
        }
    }

    #[test]
    fn multi_line_rows() {
        let text = "Minimize\n obj: + 1 a\nSubject To\n c1: + 1 a\n  + 2 b\n >= 3\n c2: a - b <= -1\nBounds\n -inf <= b <= 4\nEnd\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.constraints.len(), 2);
        assert_eq!(m.constraints[0].terms.len(), 2);
        assert_eq!(m.constraints[1].rhs, -1.0);
        let b = m.var_by_name("b").unwrap();
        assert_eq!(m.variables[b].lower, f64::NEG_INFINITY);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_lp("Minimize\n obj: a\nSubject To\n c1: a >= \nEnd\n").unwrap_err();
        assert_eq!(e.line, 4);
        let e = parse_lp("Minimize\n obj: a\nSubject To\n c1: a ** 2 >= 1\nEnd\n").unwrap_err();
        assert_eq!(e.line, 4);
        assert!(parse_lp("Subject To\n c: a >= 1\nEnd").is_err());
        assert!(parse_lp("Minimize\n obj: a\n").is_err());
        let e = parse_lp("Minimize\n obj: a\nSubject To\n : a >= 1\nEnd\n").unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn solution_import() {
        let m = small();
        let ok = import_solution("# Objective value = 2\nx_0_0 1\nz 2\n", &m).unwrap();
        assert_eq!(ok.status, Status::Feasible);
        assert_eq!(ok.objective, 2.0);
        let bad = import_solution("x_0_0 1\nx_0_1 1\nz 2\n", &m).unwrap();
        assert_eq!(bad.status, Status::Infeasible);
        assert!(bad.detail.unwrap().contains("assign_0"));
        let e = import_solution("x_0_0 1\nnope 2\n", &m).unwrap_err();
        assert_eq!(e.line, 2);
        let cbc = import_solution("Optimal - objective value 3e-7\n 1 x_0_1 1 0\n 2 z 3e-7 1\n", &m).unwrap();
        assert_eq!(cbc.status, Status::Feasible);
    }
}
