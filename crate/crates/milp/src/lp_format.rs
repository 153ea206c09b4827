//! Reading and writing models in the CPLEX LP text format.
//!
//! The writer emits variables by index (every variable appears in the
//! objective, zero costs included, so first-appearance order is index
//! order) and constraints in insertion order. Constraint tags travel as
//! `\ tag: <label>` comment lines directly above their row.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Model, Sense, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {msg}")]
pub struct LpParseError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, LpParseError> {
    Err(LpParseError {
        line,
        msg: msg.into(),
    })
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~[]".contains(c)
}

/// Whether `name` can be written verbatim as an LP-format identifier.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    if first.is_ascii_digit() || first == '.' || first == 'e' || first == 'E' {
        return false;
    }
    if is_reserved(name) {
        return false;
    }
    name.len() <= 255 && name.chars().all(is_name_char)
}

fn is_reserved(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    matches!(lower.as_str(), "inf" | "infinity" | "free")
}

fn sanitize(name: &str) -> String {
    if is_valid_name(name) {
        return name.to_string();
    }
    let body: String = name
        .chars()
        .map(|c| if is_name_char(c) { c } else { '_' })
        .take(250)
        .collect();
    format!("n_{body}")
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    for (count, (a, name)) in terms.enumerate() {
        if count > 0 && count % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", fmt_num(a.abs()));
    }
}

/// Renders `model` as LP-format text.
pub fn write_lp(model: &Model) -> String {
    let names: Vec<String> = model.vars.iter().map(|v| sanitize(&v.name)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", model.name.replace(['\n', '\r'], " "));
    let _ = writeln!(
        out,
        "\\ {} variables, {} constraints",
        model.num_vars(),
        model.num_constraints()
    );
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        model
            .vars
            .iter()
            .zip(&names)
            .map(|(v, n)| (v.cost, n.clone())),
    );
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints.iter().enumerate() {
        if let Some(tag) = &c.tag {
            let _ = writeln!(out, "\\ tag: {}", tag.replace(['\n', '\r'], " "));
        }
        let cname = if c.name.is_empty() {
            format!("c{i}")
        } else {
            sanitize(&c.name)
        };
        let _ = write!(out, " {cname}:");
        if c.terms.is_empty() {
            if let Some(n) = names.first() {
                let _ = write!(out, " + 0 {n}");
            }
        } else {
            write_terms(
                &mut out,
                c.terms.iter().map(|&(v, a)| (a, names[v.0].clone())),
            );
        }
        let _ = writeln!(out, " {} {}", c.sense, fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (v, n) in model.vars.iter().zip(&names) {
        let (l, u) = (v.lower, v.upper);
        let line = if l == f64::NEG_INFINITY && u == f64::INFINITY {
            format!(" {n} free")
        } else if l == u {
            format!(" {n} = {}", fmt_num(l))
        } else if u == f64::INFINITY {
            format!(" {n} >= {}", fmt_num(l))
        } else {
            format!(" {} <= {n} <= {}", fmt_num(l), fmt_num(u))
        };
        out.push_str(&line);
        out.push('\n');
    }
    let bins: Vec<&String> = model
        .vars
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(TERMS_PER_LINE) {
            out.push(' ');
            out.push_str(
                &chunk
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Label(String),
    Plus,
    Minus,
    Op(Sense),
    Tag(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_keyword(line: &str) -> Option<(Section, bool)> {
    let l = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = l.split_whitespace().collect();
    let joined = words.join(" ");
    Some(match joined.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => (Section::Objective, false),
        "maximize" | "maximise" | "maximum" | "max" => (Section::Objective, true),
        "subject to" | "such that" | "st" | "s.t." | "st." => (Section::Constraints, false),
        "bounds" | "bound" => (Section::Bounds, false),
        "binaries" | "binary" | "bin" => (Section::Binaries, false),
        "end" => (Section::End, false),
        _ => return None,
    })
}

fn tokenize(line: &str, lineno: usize, out: &mut Vec<(Tok, usize)>) -> Result<(), LpParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            out.push((Tok::Plus, lineno));
            i += 1;
        } else if c == '-' {
            out.push((Tok::Minus, lineno));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            while j < chars.len() && "<>=".contains(chars[j]) {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<=" | "<" | "=<" => Sense::Le,
                ">=" | ">" | "=>" => Sense::Ge,
                "=" => Sense::Eq,
                _ => return err(lineno, format!("unknown operator `{op}`")),
            };
            out.push((Tok::Op(sense), lineno));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[i..j].iter().collect();
            match text.parse::<f64>() {
                Ok(v) => out.push((Tok::Num(v), lineno)),
                Err(_) => return err(lineno, format!("malformed number `{text}`")),
            }
            i = j;
        } else if is_name_char(c) {
            let mut j = i;
            while j < chars.len() && is_name_char(chars[j]) {
                j += 1;
            }
            let name: String = chars[i..j].iter().collect();
            let mut k = j;
            while k < chars.len() && chars[k].is_whitespace() {
                k += 1;
            }
            if k < chars.len() && chars[k] == ':' {
                out.push((Tok::Label(name), lineno));
                i = k + 1;
            } else {
                let lower = name.to_ascii_lowercase();
                if lower == "inf" || lower == "infinity" {
                    out.push((Tok::Num(f64::INFINITY), lineno));
                } else {
                    out.push((Tok::Name(name), lineno));
                }
                i = j;
            }
        } else {
            return err(lineno, format!("unexpected character `{c}`"));
        }
    }
    Ok(())
}

struct Builder {
    model: Model,
    index: std::collections::HashMap<String, VarId>,
}

impl Builder {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self
            .model
            .add_var(name, VarKind::Continuous, 0.0, f64::INFINITY, 0.0);
        self.index.insert(name.to_string(), id);
        id
    }
}

/// Parses a signed linear expression starting at `pos`; stops at an
/// operator, label, tag or end of input.
fn parse_expr(
    toks: &[(Tok, usize)],
    pos: &mut usize,
    b: &mut Builder,
) -> Result<Vec<(VarId, f64)>, LpParseError> {
    let mut terms = Vec::new();
    loop {
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        let mut consumed = false;
        while let Some((t, _)) = toks.get(*pos) {
            match t {
                Tok::Plus => {}
                Tok::Minus => sign = -sign,
                _ => break,
            }
            consumed = true;
            *pos += 1;
        }
        if let Some((Tok::Num(v), line)) = toks.get(*pos) {
            if !matches!(toks.get(*pos + 1), Some((Tok::Name(_), _))) {
                if consumed {
                    return err(*line, "expected a variable after coefficient");
                }
                return Ok(terms);
            }
            coef = Some(*v);
            *pos += 1;
        }
        match toks.get(*pos) {
            Some((Tok::Name(n), line)) => {
                let a = sign * coef.unwrap_or(1.0);
                if !a.is_finite() {
                    return err(*line, "infinite coefficient");
                }
                let id = b.var(n);
                terms.push((id, a));
                *pos += 1;
            }
            Some((_, line)) if consumed => return err(*line, "dangling sign in expression"),
            None if consumed => return err(0, "expression ends with a sign"),
            _ => return Ok(terms),
        }
    }
}

fn parse_signed_num(
    toks: &[(Tok, usize)],
    pos: &mut usize,
    line: usize,
) -> Result<f64, LpParseError> {
    let mut sign = 1.0;
    while let Some((t, _)) = toks.get(*pos) {
        match t {
            Tok::Plus => {}
            Tok::Minus => sign = -sign,
            _ => break,
        }
        *pos += 1;
    }
    match toks.get(*pos) {
        Some((Tok::Num(v), _)) => {
            *pos += 1;
            Ok(sign * v)
        }
        _ => err(line, "expected a number"),
    }
}

/// Parses LP-format text into a [`Model`].
pub fn parse_lp(text: &str) -> Result<Model, LpParseError> {
    let mut b = Builder {
        model: Model::default(),
        index: Default::default(),
    };
    let mut section = Section::Preamble;
    let mut maximize = false;
    let mut obj_toks: Vec<(Tok, usize)> = Vec::new();
    let mut con_toks: Vec<(Tok, usize)> = Vec::new();
    let mut bound_lines: Vec<(usize, Vec<(Tok, usize)>)> = Vec::new();
    let mut bin_toks: Vec<(Tok, usize)> = Vec::new();
    let mut seen_objective = false;

    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let (body, comment) = match raw.find('\\') {
            Some(p) => (&raw[..p], Some(raw[p + 1..].trim())),
            None => (raw, None),
        };
        if let Some(c) = comment {
            if section == Section::Preamble {
                if let Some(name) = c.strip_prefix("Problem:") {
                    b.model.name = name.trim().to_string();
                }
            } else if section == Section::Constraints {
                if let Some(tag) = c.strip_prefix("tag:") {
                    con_toks.push((Tok::Tag(tag.trim().to_string()), lineno));
                }
            }
        }
        if body.trim().is_empty() {
            continue;
        }
        if let Some((s, max)) = section_keyword(body) {
            if s == Section::Objective {
                if seen_objective {
                    return err(lineno, "second objective section");
                }
                seen_objective = true;
                maximize = max;
            } else if section == Section::End {
                return err(lineno, "content after End");
            }
            section = s;
            continue;
        }
        match section {
            Section::Preamble => return err(lineno, "expected Minimize or Maximize"),
            Section::End => return err(lineno, "content after End"),
            Section::Objective => tokenize(body, lineno, &mut obj_toks)?,
            Section::Constraints => tokenize(body, lineno, &mut con_toks)?,
            Section::Bounds => {
                let mut t = Vec::new();
                tokenize(body, lineno, &mut t)?;
                bound_lines.push((lineno, t));
            }
            Section::Binaries => tokenize(body, lineno, &mut bin_toks)?,
        }
    }
    if !seen_objective {
        return err(0, "missing objective section");
    }

    let mut pos = 0;
    if let Some((Tok::Label(_), _)) = obj_toks.first() {
        pos = 1;
    }
    let terms = parse_expr(&obj_toks, &mut pos, &mut b)?;
    if let Some((_, line)) = obj_toks.get(pos) {
        return err(*line, "unexpected token in objective");
    }
    let mut costs: Vec<(VarId, f64)> = Vec::new();
    for (v, a) in terms {
        costs.push((v, if maximize { -a } else { a }));
    }

    let mut pos = 0;
    let mut pending_tag: Option<String> = None;
    while pos < con_toks.len() {
        let line = con_toks[pos].1;
        let mut name = None;
        loop {
            match con_toks.get(pos) {
                Some((Tok::Tag(t), _)) => {
                    pending_tag = Some(t.clone());
                    pos += 1;
                }
                Some((Tok::Label(l), _)) if name.is_none() => {
                    name = Some(l.clone());
                    pos += 1;
                }
                _ => break,
            }
        }
        if pos >= con_toks.len() {
            if name.is_some() {
                return err(line, "label without constraint");
            }
            break;
        }
        let terms = parse_expr(&con_toks, &mut pos, &mut b)?;
        let sense = match con_toks.get(pos) {
            Some((Tok::Op(s), _)) => *s,
            _ => return err(line, "expected a comparison operator"),
        };
        pos += 1;
        let rhs = parse_signed_num(&con_toks, &mut pos, line)?;
        if !rhs.is_finite() {
            return err(line, "infinite right-hand side");
        }
        let idx = b.model.constraints.len();
        let cname = name.unwrap_or_else(|| format!("c{idx}"));
        let id = b.model.add_constraint(cname, terms, sense, rhs);
        b.model.constraints[id.0].tag = pending_tag.take();
    }

    for (line, toks) in &bound_lines {
        apply_bound(&mut b, toks, *line)?;
    }

    for (t, line) in &bin_toks {
        match t {
            Tok::Name(n) => {
                let id = b.var(n);
                let v = &mut b.model.vars[id.0];
                v.kind = VarKind::Binary;
                v.lower = v.lower.max(0.0);
                v.upper = v.upper.min(1.0);
                if v.lower > v.upper {
                    return err(*line, format!("binary `{n}` has an empty domain"));
                }
            }
            _ => return err(*line, "expected variable names in Binaries"),
        }
    }
    for (v, a) in costs {
        b.model.vars[v.0].cost += a;
    }
    Ok(b.model)
}

fn apply_bound(b: &mut Builder, toks: &[(Tok, usize)], line: usize) -> Result<(), LpParseError> {
    let mut pos = 0;
    let signed = |pos: &mut usize| parse_signed_num(toks, pos, line);
    let starts_with_num = matches!(
        toks.first(),
        Some((Tok::Num(_), _)) | Some((Tok::Plus, _)) | Some((Tok::Minus, _))
    );
    if starts_with_num {
        // l <= x [<= u]  or  l >= x [>= u]
        let first = signed(&mut pos)?;
        let Some((Tok::Op(op1), _)) = toks.get(pos) else {
            return err(line, "expected operator in bound");
        };
        pos += 1;
        let Some((Tok::Name(n), _)) = toks.get(pos) else {
            return err(line, "expected variable in bound");
        };
        pos += 1;
        let id = b.var(n);
        set_bound(b, id, reverse(*op1), first, line)?;
        if let Some((Tok::Op(op2), _)) = toks.get(pos) {
            pos += 1;
            let second = signed(&mut pos)?;
            set_bound(b, id, *op2, second, line)?;
        }
    } else {
        let Some((Tok::Name(n), _)) = toks.first() else {
            return err(line, "expected variable in bound");
        };
        pos = 1;
        let id = b.var(n);
        match toks.get(pos) {
            Some((Tok::Name(w), _)) if w.eq_ignore_ascii_case("free") => {
                pos += 1;
                let v = &mut b.model.vars[id.0];
                v.lower = f64::NEG_INFINITY;
                v.upper = f64::INFINITY;
            }
            Some((Tok::Op(op), _)) => {
                pos += 1;
                let val = signed(&mut pos)?;
                set_bound(b, id, *op, val, line)?;
            }
            _ => return err(line, "malformed bound"),
        }
    }
    if pos != toks.len() {
        return err(line, "trailing tokens in bound");
    }
    Ok(())
}

fn reverse(s: Sense) -> Sense {
    match s {
        Sense::Le => Sense::Ge,
        Sense::Ge => Sense::Le,
        Sense::Eq => Sense::Eq,
    }
}

fn set_bound(
    b: &mut Builder,
    id: VarId,
    op: Sense,
    val: f64,
    line: usize,
) -> Result<(), LpParseError> {
    let v = &mut b.model.vars[id.0];
    match op {
        Sense::Le => {
            if val == f64::NEG_INFINITY {
                return err(line, "upper bound of -inf");
            }
            v.upper = val;
        }
        Sense::Ge => {
            if val == f64::INFINITY {
                return err(line, "lower bound of +inf");
            }
            v.lower = val;
        }
        Sense::Eq => {
            if !val.is_finite() {
                return err(line, "fixed to an infinite value");
            }
            v.lower = val;
            v.upper = val;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_model_has_one_bound_line_and_one_objective_term() {
        let mut m = Model::new("tiny");
        m.add_continuous("x", 3.0, 10.0, 1.0);
        let text = write_lp(&m);
        let bounds = text
            .split("Bounds\n")
            .nth(1)
            .unwrap()
            .lines()
            .take_while(|l| *l != "End")
            .count();
        assert_eq!(bounds, 1);
        let obj_line = text.lines().find(|l| l.starts_with(" obj:")).unwrap();
        assert_eq!(obj_line.matches(" x").count(), 1);
    }

    #[test]
    fn parses_hand_written_variants() {
        let text = "\\ Problem: demo\nMaximize\n obj: 3 a + 2b\nSubject To\n c1: 2 a + 2 b\n   + c <= 3\n -a - b >= -5\nBounds\n -inf <= b <= 4\n c free\nBinaries\n a\nEnd\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.name, "demo");
        assert_eq!(m.num_vars(), 3);
        assert_eq!(m.vars[0].cost, -3.0);
        assert_eq!(m.vars[0].kind, VarKind::Binary);
        assert_eq!(m.vars[1].lower, f64::NEG_INFINITY);
        assert_eq!(m.vars[1].upper, 4.0);
        assert_eq!(m.vars[2].lower, f64::NEG_INFINITY);
        assert_eq!(m.constraints.len(), 2);
        assert_eq!(m.constraints[1].rhs, -5.0);
        assert_eq!(m.constraints[1].name, "c1");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_lp("").is_err());
        assert!(parse_lp("Minimize\n obj: x +\nEnd").is_err());
        assert!(parse_lp("Minimize\n obj: x\nSubject To\n c: x <=\nEnd").is_err());
        assert!(parse_lp("Minimize\n obj: x\nEnd\nx").is_err());
        assert!(parse_lp("Minimize\n obj: x ^ 2\n").is_err());
    }

    #[test]
    fn names_are_sanitized_for_export() {
        assert!(is_valid_name("x_k0_n3"));
        assert!(!is_valid_name("eta"));
        assert!(!is_valid_name("3x"));
        assert!(!is_valid_name("a b"));
        assert_eq!(sanitize("a b"), "n_a_b");
    }
}
