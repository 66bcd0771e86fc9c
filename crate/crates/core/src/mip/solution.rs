use super::encode::Sig;
use super::system::{ConstraintSystem, VarKind};
use crate::sn::{generate, NumberSequence};
use crate::{Error, Rational, Result};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Variable values by name, as read from an external solver.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    values: BTreeMap<String, Rational>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(values: BTreeMap<String, Rational>) -> Self {
        Assignment { values }
    }

    pub fn get(&self, name: &str) -> Option<Rational> {
        self.values.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Rational) -> Option<Rational> {
        self.values.insert(name.into(), value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Rational)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// `name value` lines, sorted by name.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} {}", format_decimal(*v));
        }
        out
    }
}

/// Parse `name value` lines; blank lines and `#` comments are skipped.
pub fn parse_solution(text: &str) -> Result<Assignment> {
    let mut a = Assignment::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("line {}: expected `name value`", no + 1)));
        };
        let v = parse_decimal(value).map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        if a.insert(name, v).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate variable `{name}`", no + 1)));
        }
    }
    Ok(a)
}

/// Exact value of a decimal literal such as `-1.25`, `3`, `2.5e-3`.
pub fn parse_decimal(s: &str) -> std::result::Result<Rational, String> {
    let bad = || format!("invalid number `{s}`");
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty()
        || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
        || int.len() + frac.len() > 30
    {
        return Err(bad());
    }
    let all: i128 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    if scale.abs() > 30 {
        return Err(bad());
    }
    let ten = Rational::from_integer(10);
    let mut v = Rational::from_integer(all);
    v = if scale >= 0 { v * ten.pow(scale) } else { v / ten.pow(-scale) };
    Ok(if neg { -v } else { v })
}

/// Exact decimal if the denominator is of the form 2^a·5^b, otherwise the
/// nearest `f64`.
pub(crate) fn format_decimal(v: Rational) -> String {
    if v.is_integer() {
        return v.to_integer().to_string();
    }
    let mut d = *v.denom();
    let mut places = 0u32;
    while d % 10 == 0 || d % 2 == 0 || d % 5 == 0 {
        if d % 10 == 0 {
            d /= 10;
        } else if d % 2 == 0 {
            d /= 2;
        } else {
            d /= 5;
        }
        places += 1;
    }
    if d != 1 || places > 30 {
        return format!("{}", crate::rat_to_f64(&v));
    }
    let scaled = (v * Rational::from_integer(10i128.pow(places))).to_integer();
    let sign = if scaled < 0 { "-" } else { "" };
    let digits = format!("{:0>width$}", scaled.abs(), width = places as usize + 1);
    let (i, f) = digits.split_at(digits.len() - places as usize);
    format!("{sign}{i}.{}", f.trim_end_matches('0'))
}

/// A feasible assignment, snapped to exact values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedSolution {
    /// Values in the system's variable order.
    pub values: Vec<Rational>,
    pub objective: Rational,
    /// Recovered sequences, if the system came from `build_program`.
    pub sequences: Option<Vec<NumberSequence>>,
}

fn tolerance() -> Rational {
    Rational::new(1, 1_000_000)
}

/// Check an external solution against the system.
///
/// First every bound and constraint is checked within 1e-6; then binaries
/// are rounded, continuous values snapped to the system's rational grid,
/// and everything is re-checked exactly.
pub fn import_solution(sys: &ConstraintSystem, assignment: &Assignment) -> Result<VerifiedSolution> {
    for (name, _) in assignment.iter() {
        if sys.var(name).is_none() {
            return Err(Error::Parse(format!("unknown variable `{name}` in assignment")));
        }
    }
    let raw: Vec<Rational> = sys
        .variables()
        .iter()
        .map(|v| {
            assignment
                .get(&v.name)
                .ok_or_else(|| Error::Parse(format!("assignment has no value for variable `{}`", v.name)))
        })
        .collect::<Result<_>>()?;
    let tol = tolerance();
    if let Some((constraint, detail)) = sys.first_violation(&raw, tol) {
        return Err(Error::Infeasible { constraint, detail });
    }

    let grid = Rational::from_integer(grid_denominator(sys));
    let snapped: Vec<Rational> = sys
        .variables()
        .iter()
        .zip(&raw)
        .map(|(v, &x)| match v.kind {
            VarKind::Binary => x.round(),
            VarKind::Continuous => (x * grid).round() / grid,
        })
        .collect();
    if let Some((constraint, detail)) = sys.first_violation(&snapped, Rational::zero()) {
        return Err(Error::Infeasible {
            constraint,
            detail: format!("after rounding: {detail}"),
        });
    }
    let objective = sys.objective_value(&snapped);
    let sequences = match sys.layout() {
        Some(_) => Some(recover_from_values(sys, &snapped)?),
        None => None,
    };
    Ok(VerifiedSolution {
        values: snapped,
        objective,
        sequences,
    })
}

/// LCM of every denominator in the system: exact solutions of the
/// synthesis programs live on this grid.
fn grid_denominator(sys: &ConstraintSystem) -> i128 {
    let mut d: i128 = 1;
    for c in sys.constraints() {
        d = d.lcm(c.rhs.denom());
        for (_, k) in &c.terms {
            d = d.lcm(k.denom());
        }
    }
    for v in sys.variables() {
        for b in [v.lower, v.upper].into_iter().flatten() {
            d = d.lcm(b.denom());
        }
    }
    d
}

/// `S[j] = N − Σ_i M[i][j]` for every input matrix.
pub fn recover_sequences(sys: &ConstraintSystem, assignment: &Assignment) -> Result<Vec<NumberSequence>> {
    let values: Vec<Rational> = sys
        .variables()
        .iter()
        .map(|v| {
            assignment
                .get(&v.name)
                .ok_or_else(|| Error::Parse(format!("assignment has no value for variable `{}`", v.name)))
        })
        .collect::<Result<_>>()?;
    recover_from_values(sys, &values)
}

pub(crate) fn recover_from_values(sys: &ConstraintSystem, values: &[Rational]) -> Result<Vec<NumberSequence>> {
    let layout = sys
        .layout()
        .ok_or_else(|| Error::Config("system has no synthesis layout".into()))?;
    let n = layout.n;
    let tol = tolerance();
    layout
        .matrices
        .iter()
        .map(|m| {
            if let Some(s) = &m.fixed {
                return Ok(s.clone());
            }
            let bit = |s: Sig| -> Result<bool> {
                match s {
                    Sig::Const(b) => Ok(b),
                    Sig::Var(v) => {
                        let x = values[v];
                        if (x - x.round()).abs() > tol {
                            return Err(Error::Consistency(format!(
                                "matrix entry `{}` is fractional",
                                sys.variables()[v].name
                            )));
                        }
                        Ok(x.round().is_positive())
                    }
                }
            };
            let mut seq = Vec::with_capacity(n);
            for col in 0..n {
                let mut sum = 0usize;
                for row in &m.cells {
                    sum += usize::from(bit(row[col])?);
                }
                seq.push(n.checked_sub(sum).ok_or_else(|| {
                    Error::Consistency(format!("column {col} of `{}` sums to {sum} > {n}", m.prefix))
                })?);
            }
            let seq = NumberSequence::new(seq)
                .map_err(|e| Error::Consistency(format!("recovered `{}` sequence is invalid: {e}", m.input)))?;
            for (i, row) in m.cells.iter().enumerate() {
                let g = generate(&seq, i)?;
                for (j, s) in row.iter().enumerate() {
                    if g.get(j) != bit(*s)? {
                        return Err(Error::Consistency(format!(
                            "row {i} of `{}` is not generated by {seq}",
                            m.prefix
                        )));
                    }
                }
            }
            Ok(seq)
        })
        .collect()
}
