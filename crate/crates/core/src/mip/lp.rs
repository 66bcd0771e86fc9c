use super::solution::{format_decimal, parse_decimal};
use super::system::{ConstraintSystem, Relation, VarKind};
use crate::{Error, Rational, Result};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;

const WRAP: usize = 200;

struct Wrapped {
    out: String,
    col: usize,
}

impl Wrapped {
    fn start(&mut self, head: &str) {
        self.out.push(' ');
        self.out.push_str(head);
        self.col = head.len() + 1;
    }

    fn push(&mut self, token: &str) {
        if self.col + token.len() + 1 > WRAP {
            self.out.push_str("\n  ");
            self.col = 2;
        } else {
            self.out.push(' ');
            self.col += 1;
        }
        self.out.push_str(token);
        self.col += token.len();
    }

    fn end(&mut self) {
        self.out.push('\n');
        self.col = 0;
    }
}

fn push_terms(w: &mut Wrapped, sys: &ConstraintSystem, terms: &[(usize, i128)]) {
    if terms.is_empty() {
        // LP needs a term; an explicit zero keeps the row well-formed.
        w.push("0");
        w.push(&sys.variables()[0].name);
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < 0 { "-" } else { "+" };
        if k > 0 || c < 0 {
            w.push(sign);
        }
        let name = &sys.variables()[v].name;
        if c.abs() == 1 {
            w.push(name);
        } else {
            w.push(&format!("{} {name}", c.abs()));
        }
    }
}

/// Multiply terms and rhs by the LCM of their denominators.
fn integral(terms: &[(usize, Rational)], rhs: Rational) -> (Vec<(usize, i128)>, i128) {
    let d = terms.iter().fold(*rhs.denom(), |d, (_, c)| d.lcm(c.denom()));
    let d = Rational::from_integer(d);
    (
        terms.iter().map(|&(v, c)| (v, (c * d).to_integer())).collect(),
        (rhs * d).to_integer(),
    )
}

/// CPLEX LP text for the system. Rows are scaled to integer coefficients;
/// output order follows declaration order.
pub fn export_lp(sys: &ConstraintSystem) -> String {
    let mut w = Wrapped {
        out: String::new(),
        col: 0,
    };
    w.out.push_str("\\ scsynth model\nMinimize\n");
    w.start("obj:");
    let mut obj: Vec<(usize, Rational)> = sys.objective().to_vec();
    if obj.is_empty() && !sys.variables().is_empty() {
        obj.push((0, Rational::zero()));
    }
    for (k, (v, c)) in obj.iter().enumerate() {
        let name = &sys.variables()[*v].name;
        let mag = c.abs();
        if k > 0 || c.is_negative() {
            w.push(if c.is_negative() { "-" } else { "+" });
        }
        if mag.is_one() {
            w.push(name);
        } else {
            w.push(&format!("{} {name}", format_decimal(mag)));
        }
    }
    w.end();
    w.out.push_str("Subject To\n");
    for c in sys.constraints() {
        let (terms, rhs) = integral(&c.terms, c.rhs);
        w.start(&format!("{}:", c.name));
        push_terms(&mut w, sys, &terms);
        w.push(c.relation.symbol());
        w.push(&rhs.to_string());
        w.end();
    }
    w.out.push_str("Bounds\n");
    for v in sys.variables().iter().filter(|v| v.kind == VarKind::Continuous) {
        let line = match (v.lower, v.upper) {
            (None, None) => format!(" {} free", v.name),
            (Some(l), Some(u)) if l == u => format!(" {} = {}", v.name, format_decimal(l)),
            (Some(l), Some(u)) => format!(" {} <= {} <= {}", format_decimal(l), v.name, format_decimal(u)),
            (Some(l), None) => format!(" {} >= {}", v.name, format_decimal(l)),
            (None, Some(u)) => format!(" -inf <= {} <= {}", v.name, format_decimal(u)),
        };
        w.out.push_str(&line);
        w.out.push('\n');
    }
    let binaries: Vec<&str> = sys
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        w.out.push_str("Binaries\n");
        w.col = 0;
        for b in binaries {
            w.push(b);
        }
        w.end();
    }
    w.out.push_str("End\n");
    w.out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Name(String),
    Label(String),
    Op(Relation),
    Plus,
    Minus,
    Inf,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn header(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(match l.as_str() {
        "minimize" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "end" => Section::End,
        _ => return None,
    })
}

fn name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_.!\"#$%&()/,;?@`'{}|~[]".contains(c)
}

fn lex(line: &str, no: usize) -> Result<Vec<Tok>> {
    let err = |m: String| Error::LpParse { line: no, message: m };
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            out.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            out.push(Tok::Minus);
            i += 1;
        } else if "<>=".contains(c) {
            let mut j = i;
            while j < chars.len() && "<>=".contains(chars[j]) {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            out.push(Tok::Op(match op.as_str() {
                "<=" | "=<" | "<" => Relation::Le,
                ">=" | "=>" | ">" => Relation::Ge,
                "=" => Relation::Eq,
                _ => return Err(err(format!("bad relation `{op}`"))),
            }));
            i = j;
        } else if c.is_ascii_digit() || c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
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
            let s: String = chars[i..j].iter().collect();
            out.push(Tok::Num(parse_decimal(&s).map_err(err)?));
            i = j;
        } else if name_char(c) {
            let mut j = i;
            while j < chars.len() && name_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            if j < chars.len() && chars[j] == ':' {
                out.push(Tok::Label(s));
                j += 1;
            } else if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity") {
                out.push(Tok::Inf);
            } else {
                out.push(Tok::Name(s));
            }
            i = j;
        } else {
            return Err(err(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

#[derive(Default)]
struct Builder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    lower: Vec<Option<Rational>>,
    upper: Vec<Option<Rational>>,
    binary: Vec<bool>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), v);
        self.lower.push(Some(Rational::zero()));
        self.upper.push(None);
        self.binary.push(false);
        v
    }
}

/// Parse `[sign] [coef] name { sign [coef] name }`; returns merged terms
/// and the number of tokens consumed.
fn linear(toks: &[(Tok, usize)], b: &mut Builder) -> Result<(Vec<(usize, Rational)>, usize)> {
    let mut terms: Vec<(usize, Rational)> = Vec::new();
    let mut i = 0;
    let mut first = true;
    loop {
        let mut sign = Rational::one();
        let mut saw_sign = false;
        while let Some((t @ (Tok::Plus | Tok::Minus), _)) = toks.get(i) {
            if *t == Tok::Minus {
                sign = -sign;
            }
            saw_sign = true;
            i += 1;
        }
        if !first && !saw_sign {
            break;
        }
        let mut coef = Rational::one();
        if let Some((Tok::Num(x), _)) = toks.get(i) {
            coef = *x;
            i += 1;
        }
        match toks.get(i) {
            Some((Tok::Name(n), _)) => {
                let v = b.var(n);
                terms.push((v, sign * coef));
                i += 1;
            }
            Some((_, line)) => {
                return Err(Error::LpParse {
                    line: *line,
                    message: "expected a variable name".into(),
                })
            }
            None => {
                return Err(Error::LpParse {
                    line: toks.last().map(|t| t.1).unwrap_or(0),
                    message: "unexpected end of expression".into(),
                })
            }
        }
        first = false;
    }
    let mut merged: Vec<(usize, Rational)> = Vec::new();
    for (v, c) in terms {
        match merged.iter_mut().find(|(w, _)| *w == v) {
            Some((_, acc)) => *acc += c,
            None => merged.push((v, c)),
        }
    }
    Ok((merged, i))
}

fn signed_num(toks: &[(Tok, usize)], i: &mut usize) -> Option<Option<Rational>> {
    let mut neg = false;
    while let Some((t @ (Tok::Plus | Tok::Minus), _)) = toks.get(*i) {
        neg ^= *t == Tok::Minus;
        *i += 1;
    }
    let v = match toks.get(*i) {
        Some((Tok::Num(x), _)) => Some(if neg { -*x } else { *x }),
        Some((Tok::Inf, _)) => None,
        _ => return None,
    };
    *i += 1;
    Some(v)
}

/// Parse CPLEX LP text (the subset [`export_lp`] writes, plus common
/// spelling variants) back into a system without a synthesis layout.
pub fn parse_lp(text: &str) -> Result<ConstraintSystem> {
    let mut section = Section::None;
    let mut obj_toks: Vec<(Tok, usize)> = Vec::new();
    let mut con_toks: Vec<(Tok, usize)> = Vec::new();
    let mut bound_lines: Vec<(Vec<Tok>, usize)> = Vec::new();
    let mut bin_names: Vec<(String, usize)> = Vec::new();
    let mut seen_objective = false;
    for (k, raw) in text.lines().enumerate() {
        let no = k + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = header(line) {
            section = s;
            seen_objective |= s == Section::Objective;
            continue;
        }
        let toks = lex(line, no)?;
        match section {
            Section::None => {
                if line.trim().to_ascii_lowercase().starts_with("max") {
                    return Err(Error::LpParse {
                        line: no,
                        message: "only minimization models are supported".into(),
                    });
                }
                return Err(Error::LpParse {
                    line: no,
                    message: "content before the objective section".into(),
                });
            }
            Section::Objective => obj_toks.extend(toks.into_iter().map(|t| (t, no))),
            Section::Constraints => con_toks.extend(toks.into_iter().map(|t| (t, no))),
            Section::Bounds => bound_lines.push((toks, no)),
            Section::Binaries => {
                for t in toks {
                    match t {
                        Tok::Name(n) => bin_names.push((n, no)),
                        _ => {
                            return Err(Error::LpParse {
                                line: no,
                                message: "expected variable names".into(),
                            })
                        }
                    }
                }
            }
            Section::End => {
                return Err(Error::LpParse {
                    line: no,
                    message: "content after `End`".into(),
                })
            }
        }
    }
    if !seen_objective {
        return Err(Error::LpParse {
            line: 0,
            message: "missing `Minimize` section".into(),
        });
    }
    if section != Section::End {
        return Err(Error::LpParse {
            line: text.lines().count(),
            message: "missing `End`".into(),
        });
    }

    let mut b = Builder::default();
    // Objective.
    let mut toks = &obj_toks[..];
    if let Some((Tok::Label(_), _)) = toks.first() {
        toks = &toks[1..];
    }
    let objective = if toks.is_empty() {
        Vec::new()
    } else {
        let (terms, used) = linear(toks, &mut b)?;
        if used != toks.len() {
            return Err(Error::LpParse {
                line: toks[used].1,
                message: "trailing tokens in objective".into(),
            });
        }
        terms
    };

    // Constraints.
    let mut rows = Vec::new();
    let mut i = 0;
    while i < con_toks.len() {
        let line = con_toks[i].1;
        let name = match &con_toks[i].0 {
            Tok::Label(l) => {
                i += 1;
                l.clone()
            }
            _ => format!("R{}", rows.len() + 1),
        };
        let (terms, used) = linear(&con_toks[i..], &mut b)?;
        i += used;
        let rel = match con_toks.get(i) {
            Some((Tok::Op(r), _)) => *r,
            _ => {
                return Err(Error::LpParse {
                    line,
                    message: format!("constraint `{name}` has no relation"),
                })
            }
        };
        i += 1;
        let rhs = match signed_num(&con_toks, &mut i) {
            Some(Some(x)) => x,
            _ => {
                return Err(Error::LpParse {
                    line,
                    message: format!("constraint `{name}` has no numeric right-hand side"),
                })
            }
        };
        rows.push((name, terms, rel, rhs));
    }

    // Bounds.
    for (toks, no) in &bound_lines {
        let err = |m: &str| Error::LpParse {
            line: *no,
            message: m.to_string(),
        };
        let toks_n: Vec<(Tok, usize)> = toks.iter().cloned().map(|t| (t, *no)).collect();
        let mut i = 0;
        // `l <= v [<= u]`
        let lead = signed_num(&toks_n, &mut i);
        if let Some(l) = lead {
            let (Some((Tok::Op(Relation::Le), _)), Some((Tok::Name(n), _))) = (toks_n.get(i), toks_n.get(i + 1)) else {
                return Err(err("expected `lower <= name`"));
            };
            let v = b.var(n);
            b.lower[v] = l;
            i += 2;
            if i < toks_n.len() {
                let Some((Tok::Op(Relation::Le), _)) = toks_n.get(i) else {
                    return Err(err("expected `<= upper`"));
                };
                i += 1;
                let Some(u) = signed_num(&toks_n, &mut i) else {
                    return Err(err("expected upper bound"));
                };
                b.upper[v] = u;
            }
        } else {
            let Some((Tok::Name(n), _)) = toks_n.first() else {
                return Err(err("expected a bound"));
            };
            let v = b.var(n);
            match toks_n.get(1) {
                Some((Tok::Name(f), _)) if f.eq_ignore_ascii_case("free") => {
                    b.lower[v] = None;
                    b.upper[v] = None;
                    i = 2;
                }
                Some((Tok::Op(rel), _)) => {
                    i = 2;
                    let Some(x) = signed_num(&toks_n, &mut i) else {
                        return Err(err("expected a bound value"));
                    };
                    match rel {
                        Relation::Le => b.upper[v] = x,
                        Relation::Ge => b.lower[v] = x,
                        Relation::Eq => {
                            b.lower[v] = x;
                            b.upper[v] = x;
                        }
                    }
                }
                _ => return Err(err("expected `free` or a relation")),
            }
        }
        if i != toks_n.len() {
            return Err(err("trailing tokens in bound"));
        }
    }
    for (n, _) in &bin_names {
        let v = b.var(n);
        b.binary[v] = true;
    }

    let mut sys = ConstraintSystem::new();
    for v in 0..b.names.len() {
        let kind = if b.binary[v] { VarKind::Binary } else { VarKind::Continuous };
        sys.add_variable(b.names[v].clone(), kind, b.lower[v], b.upper[v])?;
    }
    for (name, terms, rel, rhs) in rows {
        let terms = terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        sys.add_constraint(name, terms, rel, rhs)?;
    }
    sys.set_objective(objective.into_iter().filter(|(_, c)| !c.is_zero()).collect());
    Ok(sys)
}

/// Positive-scale-invariant canonical form of a row, keyed by name.
fn canonical(sys: &ConstraintSystem, terms: &[(usize, Rational)], rel: Relation, rhs: Rational) -> (Vec<(String, Rational)>, Relation, Rational) {
    let mut t: Vec<(String, Rational)> = terms
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(v, c)| (sys.variables()[*v].name.clone(), *c))
        .collect();
    t.sort();
    let scale = t.first().map(|(_, c)| c.abs()).unwrap_or_else(Rational::one);
    for (_, c) in &mut t {
        *c /= scale;
    }
    (t, rel, rhs / scale)
}

/// Check that two systems describe the same model: same variables (name,
/// kind, bounds), same rows by name up to positive scaling, same objective.
pub fn check_equivalent(a: &ConstraintSystem, b: &ConstraintSystem) -> Result<()> {
    let mismatch = |m: String| Err(Error::Consistency(m));
    if a.variables().len() != b.variables().len() {
        return mismatch(format!("{} vs {} variables", a.variables().len(), b.variables().len()));
    }
    for v in a.variables() {
        let Some(k) = b.var(&v.name) else {
            return mismatch(format!("variable `{}` missing", v.name));
        };
        let w = &b.variables()[k];
        if (v.kind, v.lower, v.upper) != (w.kind, w.lower, w.upper) {
            return mismatch(format!("variable `{}` differs", v.name));
        }
    }
    if a.constraints().len() != b.constraints().len() {
        return mismatch(format!("{} vs {} constraints", a.constraints().len(), b.constraints().len()));
    }
    let by_name: HashMap<&str, usize> = b.constraints().iter().enumerate().map(|(k, c)| (c.name.as_str(), k)).collect();
    for c in a.constraints() {
        let Some(&k) = by_name.get(c.name.as_str()) else {
            return mismatch(format!("constraint `{}` missing", c.name));
        };
        let d = &b.constraints()[k];
        if canonical(a, &c.terms, c.relation, c.rhs) != canonical(b, &d.terms, d.relation, d.rhs) {
            return mismatch(format!("constraint `{}` differs", c.name));
        }
    }
    let obj = |s: &ConstraintSystem| {
        let mut o: Vec<(String, Rational)> = s
            .objective()
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(v, c)| (s.variables()[*v].name.clone(), *c))
            .collect();
        o.sort();
        o
    };
    if obj(a) != obj(b) {
        return mismatch("objectives differ".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library;
    use crate::mip::{build_program, EncodeOptions};
    use crate::rat;
    use crate::sn::Encoding;

    #[test]
    fn trivial_system() {
        let mut sys = ConstraintSystem::new();
        let t = sys.add_variable("t", VarKind::Continuous, None, None).unwrap();
        sys.add_constraint("c1", vec![(t, rat(1, 1))], Relation::Ge, rat(1, 1)).unwrap();
        sys.set_objective(vec![(t, rat(1, 1))]);
        let text = export_lp(&sys);
        assert!(text.contains("Minimize") && text.contains("Subject To") && text.contains("t >= 1"), "{text}");
        check_equivalent(&sys, &parse_lp(&text).unwrap()).unwrap();
    }

    #[test]
    fn fractional_rows_are_scaled() {
        let mut sys = ConstraintSystem::new();
        let x = sys.add_variable("x", VarKind::Binary, None, None).unwrap();
        let c = sys.add_variable("c", VarKind::Continuous, None, None).unwrap();
        sys.add_constraint("cost_1", vec![(x, rat(1, 1)), (c, rat(-1, 1))], Relation::Eq, rat(9, 16)).unwrap();
        let text = export_lp(&sys);
        assert!(text.contains("cost_1: 16 x - 16 c = 9"), "{text}");
        check_equivalent(&sys, &parse_lp(&text).unwrap()).unwrap();
    }

    #[test]
    fn multiplier_round_trip() {
        for enc in [Encoding::Unipolar, Encoding::Bipolar] {
            let p = library::multiplier(enc, 4);
            let sys = build_program(&p.circuit, &p.function, 4, &EncodeOptions::new(4)).unwrap();
            let text = export_lp(&sys);
            assert!(text.lines().all(|l| l.len() <= WRAP + 40));
            let back = parse_lp(&text).unwrap();
            assert_eq!(back.variables().len(), sys.variables().len());
            check_equivalent(&sys, &back).unwrap();
            assert_eq!(export_lp(&sys), text, "deterministic");
        }
    }

    #[test]
    fn long_rows_wrap() {
        let p = library::multiplier(Encoding::Unipolar, 8);
        let mut opts = EncodeOptions::new(8);
        opts.fix_first_sequence = None;
        let sys = build_program(&p.circuit, &p.function, 8, &opts).unwrap();
        let text = export_lp(&sys);
        assert!(text.lines().any(|l| l.starts_with("  ")));
        check_equivalent(&sys, &parse_lp(&text).unwrap()).unwrap();
    }

    #[test]
    fn detects_differences() {
        let p = library::multiplier(Encoding::Unipolar, 4);
        let sys = build_program(&p.circuit, &p.function, 4, &EncodeOptions::new(4)).unwrap();
        let text = export_lp(&sys).replace("val_y_2: ", "val_y_2: 2 y_0_0 + ");
        let back = parse_lp(&text).unwrap();
        assert!(check_equivalent(&sys, &back).is_err());
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "Subject To\n c: x >= 1\nEnd\n",
            "Minimize\n obj: x\nSubject To\n c: x >=\nEnd\n",
            "Minimize\n obj: x\nSubject To\n c: x 1\nEnd\n",
            "Minimize\n obj: x\n",
            "Maximize\n obj: x\nEnd\n",
            "Minimize\n obj: x\nBounds\n x ?? 3\nEnd\n",
        ] {
            assert!(parse_lp(bad).is_err(), "{bad}");
        }
        let ok = parse_lp("Minimize\n obj: 2 x + y\nSubject To\n x + y >= 1\nBounds\n 0 <= x <= 4\n y free\nEnd\n").unwrap();
        assert_eq!(ok.constraints()[0].name, "R1");
        assert_eq!(ok.variables()[1].lower, None);
    }
}
