use crate::sn::Encoding;
use crate::{Error, Rational, Result};
use std::collections::HashMap;
use std::fmt;

/// Arithmetic expression over input values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(Rational),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, values: &[Rational]) -> Result<Rational> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => values[*i],
            Expr::Neg(a) => -a.eval(values)?,
            Expr::Add(a, b) => a.eval(values)? + b.eval(values)?,
            Expr::Sub(a, b) => a.eval(values)? - b.eval(values)?,
            Expr::Mul(a, b) => a.eval(values)? * b.eval(values)?,
            Expr::Div(a, b) => {
                let d = b.eval(values)?;
                if d == Rational::from_integer(0) {
                    return Err(Error::Expression {
                        offset: 0,
                        message: "division by zero".into(),
                    });
                }
                a.eval(values)? / d
            }
            Expr::Min(xs) => fold(xs, values, Ord::min)?,
            Expr::Max(xs) => fold(xs, values, Ord::max)?,
        })
    }
}

fn fold(xs: &[Expr], values: &[Rational], f: fn(Rational, Rational) -> Rational) -> Result<Rational> {
    let mut acc = xs[0].eval(values)?;
    for x in &xs[1..] {
        acc = f(acc, x.eval(values)?);
    }
    Ok(acc)
}

/// Real-valued target function `f` of the circuit's input values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    source: String,
    vars: Vec<String>,
    expr: Expr,
    encoding: Encoding,
}

impl FunctionSpec {
    /// Parse an expression, or one of the builtins `product`, `mean`,
    /// `square` and `saturating_sum`, which apply to `vars` in order.
    ///
    /// Expressions support `+ - * /`, parentheses, decimal constants,
    /// `min(..)` and `max(..)`; identifiers must be in `vars`.
    pub fn parse(source: &str, vars: &[String], encoding: Encoding) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::Config("function needs at least one input".into()));
        }
        let expr = match builtin(source.trim(), vars.len())? {
            Some(e) => e,
            None => Parser::new(source, vars)?.parse_all()?,
        };
        Ok(FunctionSpec {
            source: source.trim().to_string(),
            vars: vars.to_vec(),
            expr,
            encoding,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Evaluate with values given in `vars` order.
    pub fn eval(&self, values: &[Rational]) -> Result<Rational> {
        if values.len() != self.vars.len() {
            return Err(Error::ArityMismatch {
                expected: self.vars.len(),
                got: values.len(),
            });
        }
        self.expr.eval(values)
    }

    /// Check the function stays within the encoding's range on the grid of
    /// representable input values at length `n`.
    pub fn check_range(&self, n: usize) -> Result<()> {
        let (lo, hi) = self.encoding.range();
        let k = self.vars.len();
        let levels = n + 1;
        let total = levels.checked_pow(k as u32).unwrap_or(usize::MAX);
        // Large grids are strided; the corners are always visited.
        let stride = if total > 1_000_000 { n.div_ceil(64).max(1) } else { 1 };
        let axis: Vec<usize> = (0..=n).step_by(stride).chain(std::iter::once(n)).collect();
        let mut idx = vec![0usize; k];
        let mut values = vec![Rational::from_integer(0); k];
        loop {
            for (v, &i) in values.iter_mut().zip(&idx) {
                *v = self.encoding.decode_count(axis[i], n);
            }
            let out = self.eval(&values)?;
            if out < lo || out > hi {
                let at: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                return Err(Error::Config(format!(
                    "function `{}` evaluates to {out} at ({}), outside the {} range",
                    self.source,
                    at.join(", "),
                    self.encoding
                )));
            }
            let mut d = 0;
            loop {
                if d == k {
                    return Ok(());
                }
                idx[d] += 1;
                if idx[d] < axis.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Evaluate `f` with values bound by name.
pub fn eval_function(f: &FunctionSpec, values: &HashMap<String, Rational>) -> Result<Rational> {
    let ordered = f
        .vars
        .iter()
        .map(|v| values.get(v).copied().ok_or_else(|| Error::MissingInput(v.clone())))
        .collect::<Result<Vec<_>>>()?;
    f.eval(&ordered)
}

fn builtin(name: &str, arity: usize) -> Result<Option<Expr>> {
    let vars = || (0..arity).map(Expr::Var);
    let sum = || vars().reduce(|a, b| Expr::Add(Box::new(a), Box::new(b))).unwrap();
    let one = || Expr::Const(Rational::from_integer(1));
    Ok(Some(match name {
        "product" => vars().reduce(|a, b| Expr::Mul(Box::new(a), Box::new(b))).unwrap(),
        "mean" => Expr::Div(Box::new(sum()), Box::new(Expr::Const(Rational::from_integer(arity as i128)))),
        "square" => {
            if arity != 1 {
                return Err(Error::Config(format!("`square` takes one input, circuit has {arity}")));
            }
            Expr::Mul(Box::new(Expr::Var(0)), Box::new(Expr::Var(0)))
        }
        "saturating_sum" => Expr::Min(vec![one(), sum()]),
        _ => return Ok(None),
    }))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vars: &'a [String],
    len: usize,
}

fn parse_decimal(s: &str, offset: usize) -> Result<Rational> {
    let err = || Error::Expression {
        offset,
        message: format!("bad number `{s}`"),
    };
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 30 {
        return Err(err());
    }
    let digits = format!("{int}{frac}");
    let num: i128 = digits.parse().map_err(|_| err())?;
    Ok(Rational::new(num, 10i128.pow(frac.len() as u32)))
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            out.push((start, Tok::Num(parse_decimal(&src[start..i], start)?)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Expression {
                offset: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

impl<'a> Parser<'a> {
    fn new(src: &str, vars: &'a [String]) -> Result<Self> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
            vars,
            len: src.len(),
        })
    }

    fn parse_all(mut self) -> Result<Expr> {
        if self.toks.is_empty() {
            return Err(Error::Expression {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        let e = self.expr()?;
        if let Some((off, t)) = self.toks.get(self.pos) {
            return Err(Error::Expression {
                offset: *off,
                message: format!("unexpected token {t:?}"),
            });
        }
        Ok(e)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.len)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(r) => {
                self.pos += 1;
                Ok(Expr::Const(r))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "min" || name == "max" {
                    self.pos += 1;
                    self.expect('(')?;
                    let mut args = vec![self.expr()?];
                    while self.peek_op() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    return Ok(if name == "min" { Expr::Min(args) } else { Expr::Max(args) });
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => {
                        self.pos += 1;
                        Ok(Expr::Var(i))
                    }
                    None => self.err(format!("unknown variable `{name}`")),
                }
            }
            Tok::Op(c) => self.err(format!("unexpected `{c}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    fn vars(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn f(src: &str, v: &[&str], enc: Encoding) -> FunctionSpec {
        FunctionSpec::parse(src, &vars(v), enc).unwrap()
    }

    #[test]
    fn builtins() {
        let xy = ["X", "Y"];
        assert_eq!(f("product", &xy, Encoding::Unipolar).eval(&[rat(1, 2), rat(1, 2)]).unwrap(), rat(1, 4));
        assert_eq!(
            f("saturating_sum", &xy, Encoding::Unipolar).eval(&[rat(1, 2), rat(3, 4)]).unwrap(),
            rat(1, 1)
        );
        assert_eq!(f("mean", &xy, Encoding::Bipolar).eval(&[rat(-1, 1), rat(1, 1)]).unwrap(), rat(0, 1));
        assert_eq!(f("square", &["X"], Encoding::Unipolar).eval(&[rat(3, 4)]).unwrap(), rat(9, 16));
        assert!(FunctionSpec::parse("square", &vars(&xy), Encoding::Unipolar).is_err());
    }

    #[test]
    fn expressions() {
        let g = f("min(1, A*B + C) - 0.25 * max(A, -B) / (1 + 1)", &["A", "B", "C"], Encoding::Unipolar);
        // min(1, 1/2*1/4 + 1/2) - 1/4*1/2/2 = 5/8 - 1/16
        assert_eq!(g.eval(&[rat(1, 2), rat(1, 4), rat(1, 2)]).unwrap(), rat(9, 16));
        let named: HashMap<String, Rational> =
            [("A".to_string(), rat(1, 2)), ("B".to_string(), rat(1, 4)), ("C".to_string(), rat(1, 2))].into();
        assert_eq!(eval_function(&g, &named).unwrap(), rat(9, 16));
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let err = FunctionSpec::parse("X * Q", &vars(&["X"]), Encoding::Unipolar).unwrap_err();
        assert!(matches!(err, Error::Expression { offset: 4, .. }), "{err}");
        assert!(FunctionSpec::parse("X +", &vars(&["X"]), Encoding::Unipolar).is_err());
        assert!(FunctionSpec::parse("(X", &vars(&["X"]), Encoding::Unipolar).is_err());
        assert!(FunctionSpec::parse("X $ 2", &vars(&["X"]), Encoding::Unipolar).is_err());
        assert!(FunctionSpec::parse("", &vars(&["X"]), Encoding::Unipolar).is_err());
    }

    #[test]
    fn range_check() {
        assert!(f("product", &["X", "Y"], Encoding::Unipolar).check_range(8).is_ok());
        assert!(f("X + Y", &["X", "Y"], Encoding::Unipolar).check_range(8).is_err());
        assert!(f("product", &["X", "Y"], Encoding::Bipolar).check_range(8).is_ok());
        assert!(f("X - 1", &["X"], Encoding::Bipolar).check_range(4).is_err());
    }
}
