//! Prefix text form of expressions.
//!
//! ```text
//! expr  := number | 'eps' | 'pi' | 'x' | 'x'<index> | <coordinate name>
//!        | '(' op expr* ')'
//! op    := '+' | '-' | '*' | '/' | '^' <int>
//!        | 'sin' | 'cos' | 'exp' | 'ln'
//!        | 'poly' c0 c1 … arg                  ascending coefficients
//!        | 'bump' k arg                        k-th derivative of exp(-1/(1-s²))
//!        | 'kernel' q R d arg                  ρ^(d)(arg), mollifier (q, R)
//!        | 'kmoment' q R k arg                 ∫_{-R}^{arg} s^k ρ(s) ds
//!        | 'pv' q R d arg                      pv ∫ ρ^(d)(u)/(arg-u) du
//!        | 'convrem' q R var f ['(' 'at' expr* ')']   (f*ρ_ε - f) along x_var
//!        | 'd' i arg                           ∂_i marker
//!        | 'iota' q R "spec" [i]               embedding of a distribution in x_i
//! ```
//! `iota` is input sugar: it parses to the expanded embedding.
//! `;` starts a comment. Printing emits the canonical form, and parsing the
//! printed form reproduces the tree exactly.

use std::fmt;

use super::{Expr, Node};
use crate::error::{Error, Result};
use crate::mollifier::{embed_distribution, DistributionSpec, Mollifier};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{}", number(*c)),
            Node::Var(i) => write!(f, "x{i}"),
            Node::Eps => write!(f, "eps"),
            Node::Sum { constant, terms } => {
                write!(f, "(+")?;
                if *constant != 0.0 {
                    write!(f, " {}", number(*constant))?;
                }
                for (c, e) in terms {
                    if *c == 1.0 {
                        write!(f, " {e}")?;
                    } else {
                        write!(f, " (* {} {e})", number(*c))?;
                    }
                }
                write!(f, ")")
            }
            Node::Product(factors) => {
                write!(f, "(*")?;
                for (b, n) in factors {
                    if *n == 1 {
                        write!(f, " {b}")?;
                    } else {
                        write!(f, " (^ {b} {n})")?;
                    }
                }
                write!(f, ")")
            }
            Node::Sin(a) => write!(f, "(sin {a})"),
            Node::Cos(a) => write!(f, "(cos {a})"),
            Node::Exp(a) => write!(f, "(exp {a})"),
            Node::Ln(a) => write!(f, "(ln {a})"),
            Node::Poly { coeffs, arg } => {
                write!(f, "(poly")?;
                for c in coeffs {
                    write!(f, " {}", number(*c))?;
                }
                write!(f, " {arg})")
            }
            Node::Bump { order, arg } => write!(f, "(bump {order} {arg})"),
            Node::Kernel { mollifier, order, arg } => {
                write!(f, "(kernel {} {} {order} {arg})", mollifier.moment_order(), number(mollifier.radius()))
            }
            Node::KernelMoment { mollifier, power, arg } => {
                write!(f, "(kmoment {} {} {power} {arg})", mollifier.moment_order(), number(mollifier.radius()))
            }
            Node::PvKernel { mollifier, order, arg } => {
                write!(f, "(pv {} {} {order} {arg})", mollifier.moment_order(), number(mollifier.radius()))
            }
            Node::ConvRemainder { mollifier, var, base, at, .. } => {
                write!(f, "(convrem {} {} {var} {base}", mollifier.moment_order(), number(mollifier.radius()))?;
                let n = base.arity().max(var + 1);
                let identity = at.len() == n && at.iter().enumerate().all(|(i, a)| *a.node() == Node::Var(i));
                if !identity {
                    write!(f, " (at")?;
                    for a in at {
                        write!(f, " {a}")?;
                    }
                    write!(f, ")")?;
                }
                write!(f, ")")
            }
            Node::Partial { var, arg } => write!(f, "(d {var} {arg})"),
        }
    }
}

fn number(c: f64) -> String {
    format!("{c:?}")
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open(usize),
    Close(usize),
    Atom(usize, String),
    Str(usize, String),
}

fn tokenize(src: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '(' => {
                out.push(Tok::Open(i));
                chars.next();
            }
            ')' => {
                out.push(Tok::Close(i));
                chars.next();
            }
            ';' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                for (_, c) in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    s.push(c);
                }
                out.push(Tok::Str(i, s));
            }
            _ => {
                let start = i;
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(Tok::Atom(start, s));
            }
        }
    }
    out
}

/// Parses an expression using the default coordinate names `x`, `x0`, `x1`, ….
pub fn parse(src: &str) -> Result<Expr> {
    parse_with_names(src, &[])
}

/// Parses with additional coordinate names (`names[i]` denotes `x_i`).
pub fn parse_with_names(src: &str, names: &[&str]) -> Result<Expr> {
    let toks = tokenize(src);
    let mut p = Parser { toks: &toks, pos: 0, names, src_len: src.len() };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    names: &'a [&'a str],
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn offset(&self) -> usize {
        match self.toks.get(self.pos) {
            Some(Tok::Open(i)) | Some(Tok::Close(i)) | Some(Tok::Atom(i, _)) | Some(Tok::Str(i, _)) => *i,
            None => self.src_len,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { offset: self.offset(), message: msg.into() }
    }

    fn lift(&self, e: Error) -> Error {
        Error::Parse { offset: self.offset(), message: e.to_string() }
    }

    fn expr(&mut self) -> Result<Expr> {
        match self.toks.get(self.pos) {
            None => Err(self.error("unexpected end of input")),
            Some(Tok::Close(_)) => Err(self.error("unexpected ')'")),
            Some(Tok::Str(..)) => Err(self.error("unexpected string")),
            Some(Tok::Atom(_, a)) => {
                let a = a.clone();
                let e = self.atom(&a)?;
                self.pos += 1;
                Ok(e)
            }
            Some(Tok::Open(_)) => {
                self.pos += 1;
                let op = match self.toks.get(self.pos) {
                    Some(Tok::Atom(_, a)) => a.clone(),
                    _ => return Err(self.error("expected operator after '('")),
                };
                self.pos += 1;
                let e = self.form(&op)?;
                match self.toks.get(self.pos) {
                    Some(Tok::Close(_)) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.error(format!("expected ')' to close '{op}'"))),
                }
            }
        }
    }

    fn atom(&self, a: &str) -> Result<Expr> {
        if let Some(i) = self.names.iter().position(|n| *n == a) {
            return Ok(Expr::var(i));
        }
        match a {
            "eps" => return Ok(Expr::eps()),
            "pi" => return Ok(Expr::constant(std::f64::consts::PI)),
            "x" => return Ok(Expr::var(0)),
            _ => {}
        }
        if let Some(rest) = a.strip_prefix('x') {
            if let Ok(i) = rest.parse::<usize>() {
                return Ok(Expr::var(i));
            }
        }
        a.parse::<f64>()
            .map(Expr::constant)
            .map_err(|_| self.error(format!("unknown symbol '{a}'")))
    }

    fn rest(&mut self) -> Result<Vec<Expr>> {
        let mut out = Vec::new();
        while !matches!(self.toks.get(self.pos), Some(Tok::Close(_)) | None) {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<f64> {
        match self.toks.get(self.pos) {
            Some(Tok::Atom(_, a)) => {
                let v = a.parse::<f64>().map_err(|_| self.error(format!("expected a number, found '{a}'")))?;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("expected a number")),
        }
    }

    fn index(&mut self) -> Result<usize> {
        match self.toks.get(self.pos) {
            Some(Tok::Atom(_, a)) => {
                let v = a.parse::<usize>().map_err(|_| self.error(format!("expected an index, found '{a}'")))?;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("expected an index")),
        }
    }

    fn one(&mut self, op: &str) -> Result<Expr> {
        let args = self.rest()?;
        match <[Expr; 1]>::try_from(args) {
            Ok([a]) => Ok(a),
            Err(v) => Err(self.error(format!("'{op}' takes one argument, got {}", v.len()))),
        }
    }

    fn mollifier(&mut self) -> Result<Mollifier> {
        let q = self.index()?;
        let r = self.number()?;
        Mollifier::shared(q, r).map_err(|e| self.lift(e))
    }

    fn form(&mut self, op: &str) -> Result<Expr> {
        match op {
            "+" => Ok(Expr::sum(self.rest()?)),
            "*" => Ok(Expr::product(self.rest()?)),
            "-" => {
                let args = self.rest()?;
                match args.len() {
                    0 => Err(self.error("'-' needs an argument")),
                    1 => Ok(args[0].neg()),
                    _ => Ok(args[1..].iter().fold(args[0].clone(), |acc, e| acc - e)),
                }
            }
            "/" => {
                let args = self.rest()?;
                if args.len() != 2 {
                    return Err(self.error("'/' takes two arguments"));
                }
                args[0].div(&args[1]).map_err(|e| self.lift(e))
            }
            "^" => {
                let base = self.expr()?;
                let n = match self.toks.get(self.pos) {
                    Some(Tok::Atom(_, a)) => a.parse::<i32>().map_err(|_| self.error("exponent must be an integer"))?,
                    _ => return Err(self.error("missing exponent")),
                };
                self.pos += 1;
                base.powi(n).map_err(|e| self.lift(e))
            }
            "sin" => Ok(self.one(op)?.sin()),
            "cos" => Ok(self.one(op)?.cos()),
            "exp" => Ok(self.one(op)?.exp()),
            "ln" => {
                let a = self.one(op)?;
                a.ln().map_err(|e| self.lift(e))
            }
            "poly" => {
                let mut coeffs = Vec::new();
                let mut args = self.rest()?;
                let arg = args.pop().ok_or_else(|| self.error("'poly' needs an argument"))?;
                for c in args {
                    coeffs.push(c.as_const().ok_or_else(|| self.error("poly coefficients must be numbers"))?);
                }
                Ok(Expr::poly(coeffs, arg))
            }
            "bump" => {
                let k = self.index()?;
                Ok(Expr::bump(k, self.one(op)?))
            }
            "kernel" => {
                let m = self.mollifier()?;
                let d = self.index()?;
                Ok(Expr::kernel(&m, d, self.one(op)?))
            }
            "kmoment" => {
                let m = self.mollifier()?;
                let k = self.index()?;
                Ok(Expr::kernel_moment(&m, k, self.one(op)?))
            }
            "pv" => {
                let m = self.mollifier()?;
                let d = self.index()?;
                Ok(Expr::pv_kernel(&m, d, self.one(op)?))
            }
            "convrem" => {
                let m = self.mollifier()?;
                let var = self.index()?;
                let base = self.expr()?;
                if let Some(Tok::Open(_)) = self.toks.get(self.pos) {
                    if matches!(self.toks.get(self.pos + 1), Some(Tok::Atom(_, a)) if a == "at") {
                        self.pos += 2;
                        let at = self.rest()?;
                        match self.toks.get(self.pos) {
                            Some(Tok::Close(_)) => self.pos += 1,
                            _ => return Err(self.error("expected ')' after 'at'")),
                        }
                        return Ok(Expr::conv_remainder_at(&m, var, base, at));
                    }
                }
                Ok(Expr::conv_remainder(&m, var, base))
            }
            "iota" => {
                let m = self.mollifier()?;
                let spec = match self.toks.get(self.pos) {
                    Some(Tok::Str(_, s)) => s.clone(),
                    _ => return Err(self.error("expected a quoted distribution spec")),
                };
                let w = DistributionSpec::parse(&spec).map_err(|e| self.lift(e))?;
                self.pos += 1;
                let var = if matches!(self.toks.get(self.pos), Some(Tok::Atom(..))) { self.index()? } else { 0 };
                let e = embed_distribution(&w, &m).map_err(|e| self.lift(e))?;
                Ok(if var == 0 {
                    e
                } else {
                    let mut subs: Vec<Expr> = (0..=var).map(Expr::var).collect();
                    subs[0] = Expr::var(var);
                    e.substitute(&subs)
                })
            }
            "d" => {
                let i = self.index()?;
                Ok(Expr::partial(i, self.one(op)?))
            }
            _ => Err(self.error(format!("unknown operator '{op}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_basic_forms() {
        let e = parse("(+ (* x x) (sin eps) 1)").unwrap();
        assert!((e.eval(0.5, &[3.0]) - (10.0 + 0.5f64.sin())).abs() < 1e-15);
        let e = parse("(/ 1 (^ eps 2))").unwrap();
        assert_eq!(e.eval(0.5, &[]), 4.0);
        assert!(parse("(/ 1 x)").is_err());
        assert!(parse("(ln x)").is_err());
        assert!(matches!(parse("(sin x"), Err(Error::Parse { .. })));
        assert!(matches!(parse("(frob x)"), Err(Error::Parse { .. })));
        let named = parse_with_names("(* u v)", &["u", "v"]).unwrap();
        assert_eq!(named.eval(1.0, &[2.0, 3.0]), 6.0);
    }

    #[test]
    fn iota_sugar_expands() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let h = embed_distribution(&DistributionSpec::Heaviside, &m).unwrap();
        assert_eq!(parse("(iota 0 1.0 \"heaviside\")").unwrap(), h);
        let e = parse("(- (^ (iota 0 1 \"heaviside\") 2) (iota 0 1 \"heaviside\"))").unwrap();
        assert_eq!(e, &h * &h - &h);
        let y = parse("(iota 0 1 \"delta\" 1)").unwrap();
        assert_eq!(y.eval(0.1, &[5.0, 0.0]), m.value(0.0) / 0.1);
        assert!(parse("(iota 0 1 \"frob\")").is_err());
        assert!(parse("(iota 0 1 heaviside)").is_err());
    }

    #[test]
    fn kernel_forms_round_trip() {
        for src in [
            "(* (^ eps -1) (kernel 0 1.0 0 (* x0 (^ eps -1))))",
            "(kmoment 2 1.5 1 (* x0 (^ eps -1)))",
            "(pv 0 1.0 1 (* x0 (^ eps -1)))",
            "(convrem 4 1.0 0 (sin x0))",
            "(convrem 4 1.0 0 (sin x0) (at (+ x0 (* -1.0 eps))))",
            "(d 0 (cos x0))",
            "(poly 1.0 -2.0 0.5 (bump 1 x0))",
        ] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(Expr::constant),
            (0usize..3).prop_map(Expr::var),
            Just(Expr::eps()),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), -3.0f64..3.0).prop_map(|(a, c)| a.scale(c)),
                inner.clone().prop_map(|a| a.sin()),
                inner.clone().prop_map(|a| a.exp()),
                (inner.clone(), 1i32..4).prop_map(|(a, n)| a.powi(n).unwrap()),
                (inner.clone(), -2i32..0).prop_map(|(a, n)| (a.cos() + 2.0).powi(n).unwrap()),
                inner.clone().prop_map(|a| Expr::bump(1, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_is_identity(e in arb_expr()) {
            let back = parse(&e.to_string()).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.to_string(), e.to_string());
        }
    }
}
