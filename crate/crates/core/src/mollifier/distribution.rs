//! Distributions on the line and their regularizations `w * ρ_ε`.
//!
//! Text form:
//!
//! ```text
//! spec  := term (('+' | '-') term)*
//! term  := [number ['*']] atom
//! atom  := 'delta' "'"* | 'delta^(' d ')' | 'heaviside' | 'H' | 'sign' | 'abs'
//!        | 'pv_inv' | 'pp[' piece (';' piece)* ']' | 'smooth(' expr ')' | '(' spec ')'
//! piece := '(' a ',' b ')' ':' poly          a, b may be -inf / inf
//! poly  := polynomial in x, e.g. 1 - 2x + 0.5*x^3 or x²
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};

use super::Mollifier;

/// A polynomial `Σ coeffs[j] x^j` restricted to `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    /// `δ^(d)`.
    Delta(usize),
    Heaviside,
    Sign,
    Abs,
    /// `vp(1/x)`.
    PvInv,
    Piecewise(Vec<Piece>),
    /// A smooth function of `x0`.
    Smooth(Expr),
    Combination(Vec<(f64, DistributionSpec)>),
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Piecewise(pieces) => {
                if pieces.is_empty() {
                    return Err(Error::UnsupportedDistribution("empty piecewise polynomial".into()));
                }
                for p in pieces {
                    if p.lo.is_nan() || p.hi.is_nan() || !(p.lo < p.hi) {
                        return Err(Error::UnsupportedDistribution(format!("piece ({}, {}) is not ordered", p.lo, p.hi)));
                    }
                    if p.coeffs.iter().any(|c| !c.is_finite()) {
                        return Err(Error::UnsupportedDistribution("non-finite polynomial coefficient".into()));
                    }
                }
                for w in pieces.windows(2) {
                    if w[1].lo < w[0].hi {
                        return Err(Error::UnsupportedDistribution(format!(
                            "pieces ({}, {}) and ({}, {}) overlap or are out of order",
                            w[0].lo, w[0].hi, w[1].lo, w[1].hi
                        )));
                    }
                }
                Ok(())
            }
            DistributionSpec::Smooth(f) => {
                if (1..f.arity()).any(|i| f.depends_on_var(i)) || f.depends_on_eps() {
                    return Err(Error::UnsupportedDistribution(format!("smooth literal {f} must be a function of x0 only")));
                }
                Ok(())
            }
            DistributionSpec::Combination(items) => {
                for (c, w) in items {
                    if !c.is_finite() {
                        return Err(Error::UnsupportedDistribution(format!("coefficient {c} is not finite")));
                    }
                    w.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Distributional derivative, where it stays inside the curated family.
    pub fn derivative(&self) -> Result<DistributionSpec> {
        Ok(match self {
            DistributionSpec::Delta(d) => DistributionSpec::Delta(d + 1),
            DistributionSpec::Heaviside => DistributionSpec::Delta(0),
            DistributionSpec::Sign => DistributionSpec::Combination(vec![(2.0, DistributionSpec::Delta(0))]),
            DistributionSpec::Abs => DistributionSpec::Sign,
            DistributionSpec::Smooth(f) => DistributionSpec::Smooth(f.derive(0)),
            DistributionSpec::Combination(items) => DistributionSpec::Combination(
                items.iter().map(|(c, w)| Ok((*c, w.derivative()?))).collect::<Result<_>>()?,
            ),
            other => return Err(Error::UnsupportedDistribution(format!("derivative of {other}"))),
        })
    }

    pub fn parse(src: &str) -> Result<DistributionSpec> {
        let norm = normalize(src);
        let mut p = SpecParser { s: norm.as_bytes(), src: &norm, pos: 0 };
        let spec = p.spec()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.error("trailing input"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn normalize(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    for c in src.chars() {
        match c {
            '−' => out.push('-'),
            '²' => out.push_str("^2"),
            '³' => out.push_str("^3"),
            '⁴' => out.push_str("^4"),
            '·' => out.push('*'),
            '∞' => out.push_str("inf"),
            _ => out.push(c),
        }
    }
    out
}

/// `ρ_ε` in `n` coordinates: `Π_i ε^{-1} ρ(x_i/ε)`.
pub fn scale_kernel(m: &Mollifier, n: usize) -> Expr {
    let inv = Expr::eps().powi_certified(-1);
    Expr::product((0..n).map(|i| &inv * Expr::kernel(m, 0, Expr::var(i) * &inv)))
}

/// The diagonal embedding: the ε-independent net `(f)_ε`.
pub fn embed_smooth(f: &Expr) -> Expr {
    f.clone()
}

/// `(w * ρ_ε)_ε` as an expression in `x0` and `eps`.
pub fn embed_distribution(w: &DistributionSpec, m: &Mollifier) -> Result<Expr> {
    w.validate()?;
    embed(w, m)
}

fn embed(w: &DistributionSpec, m: &Mollifier) -> Result<Expr> {
    let x = Expr::var(0);
    let eps = Expr::eps();
    let inv = eps.powi_certified(-1);
    let t = &x * &inv;
    Ok(match w {
        DistributionSpec::Delta(d) => eps.powi_certified(-1 - *d as i32) * Expr::kernel(m, *d, t),
        DistributionSpec::Heaviside => Expr::kernel_moment(m, 0, t),
        DistributionSpec::Sign => Expr::kernel_moment(m, 0, t).scale(2.0) - 1.0,
        DistributionSpec::Abs => {
            // ∫|x - εs| ρ(s) ds = x(2K(t) - 1) + ε(m1 - 2 M1(t))
            let k0 = Expr::kernel_moment(m, 0, t.clone());
            let m1 = Expr::kernel_moment(m, 1, t);
            &x * (k0.scale(2.0) - 1.0) + &eps * (Expr::constant(m.moment(1)) - m1.scale(2.0))
        }
        DistributionSpec::PvInv => &inv * Expr::pv_kernel(m, 0, t),
        DistributionSpec::Piecewise(pieces) => Expr::sum(pieces.iter().map(|p| embed_piece(p, m))),
        DistributionSpec::Smooth(f) => f + Expr::conv_remainder(m, 0, f.clone()),
        DistributionSpec::Combination(items) => {
            let parts = items.iter().map(|(c, w)| Ok((*c, embed(w, m)?))).collect::<Result<Vec<_>>>()?;
            Expr::linear_combination(parts)
        }
    })
}

/// `∫ p(x - εs) 1[a ≤ x - εs ≤ b] ρ(s) ds`, expanded in powers of `s` so that
/// every term is a polynomial in `x` times a kernel moment primitive.
fn embed_piece(p: &Piece, m: &Mollifier) -> Expr {
    let x = Expr::var(0);
    let eps = Expr::eps();
    let inv = eps.powi_certified(-1);
    let primitive = |i: usize, edge: f64| -> Expr {
        if edge == f64::NEG_INFINITY {
            Expr::constant(m.moment(i))
        } else if edge == f64::INFINITY {
            Expr::zero()
        } else {
            Expr::kernel_moment(m, i, (&x - edge) * &inv)
        }
    };
    let deg = p.coeffs.len();
    let mut terms = Vec::with_capacity(deg);
    for i in 0..deg {
        // coefficient of (-ε s)^i: Σ_j c_j C(j, i) x^{j-i}
        let mut c_i = vec![0.0; deg - i];
        for j in i..deg {
            c_i[j - i] = p.coeffs[j] * binomial(j, i);
        }
        let coef = Expr::poly(c_i, x.clone());
        if coef.is_zero() {
            continue;
        }
        let window = primitive(i, p.lo) - primitive(i, p.hi);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        terms.push((sign, coef * eps.powi_certified(i as i32) * window));
    }
    Expr::linear_combination(terms)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Delta(0) => write!(f, "delta"),
            DistributionSpec::Delta(d) => write!(f, "delta^({d})"),
            DistributionSpec::Heaviside => write!(f, "heaviside"),
            DistributionSpec::Sign => write!(f, "sign"),
            DistributionSpec::Abs => write!(f, "abs"),
            DistributionSpec::PvInv => write!(f, "pv_inv"),
            DistributionSpec::Piecewise(pieces) => {
                write!(f, "pp[")?;
                for (k, p) in pieces.iter().enumerate() {
                    if k > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "({:?},{:?}):", p.lo, p.hi)?;
                    let mut first = true;
                    for (j, c) in p.coeffs.iter().enumerate() {
                        if *c == 0.0 && p.coeffs.len() > 1 {
                            continue;
                        }
                        if !first {
                            write!(f, " + ")?;
                        }
                        first = false;
                        match j {
                            0 => write!(f, "{c:?}")?,
                            1 => write!(f, "{c:?}*x")?,
                            _ => write!(f, "{c:?}*x^{j}")?,
                        }
                    }
                    if first {
                        write!(f, "0")?;
                    }
                }
                write!(f, "]")
            }
            DistributionSpec::Smooth(e) => write!(f, "smooth({e})"),
            DistributionSpec::Combination(items) => {
                write!(f, "(")?;
                for (k, (c, w)) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{c:?}*{w}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct SpecParser<'a> {
    s: &'a [u8],
    src: &'a str,
    pos: usize,
}

impl<'a> SpecParser<'a> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, message: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        if rest.starts_with(word) {
            let after = rest[word.len()..].chars().next();
            if !matches!(after, Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                self.pos += word.len();
                return true;
            }
        }
        false
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        for word in ["-inf", "inf", "+inf"] {
            if rest.starts_with(word) {
                self.pos += word.len();
                return Some(if word.starts_with('-') { f64::NEG_INFINITY } else { f64::INFINITY });
            }
        }
        let bytes = rest.as_bytes();
        let mut end = 0;
        if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        let digits_start = end;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end == digits_start {
            return None;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'-' || bytes[k] == b'+') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let v = rest[..end].parse::<f64>().ok()?;
        self.pos += end;
        Some(v)
    }

    fn spec(&mut self) -> Result<DistributionSpec> {
        let mut items = vec![self.term(1.0)?];
        loop {
            if self.eat(b'+') {
                items.push(self.term(1.0)?);
            } else if self.eat(b'-') {
                items.push(self.term(-1.0)?);
            } else {
                break;
            }
        }
        if items.len() == 1 && items[0].0 == 1.0 {
            return Ok(items.pop().expect("one item").1);
        }
        Ok(DistributionSpec::Combination(items))
    }

    fn term(&mut self, sign: f64) -> Result<(f64, DistributionSpec)> {
        let mut coeff = sign;
        let save = self.pos;
        if let Some(c) = self.number() {
            if c.is_infinite() {
                self.pos = save;
            } else {
                coeff *= c;
                self.eat(b'*');
            }
        } else if self.eat(b'-') {
            coeff = -coeff;
        }
        Ok((coeff, self.atom()?))
    }

    fn atom(&mut self) -> Result<DistributionSpec> {
        if self.eat(b'(') {
            let s = self.spec()?;
            self.expect(b')')?;
            return Ok(s);
        }
        if self.keyword("delta") || self.keyword("δ") {
            if self.s.get(self.pos) == Some(&b'^') {
                self.pos += 1;
                self.expect(b'(')?;
                let d = self.number().filter(|d| *d >= 0.0 && d.fract() == 0.0).ok_or_else(|| self.error("expected derivative order"))?;
                self.expect(b')')?;
                return Ok(DistributionSpec::Delta(d as usize));
            }
            let mut d = 0;
            while self.s.get(self.pos) == Some(&b'\'') {
                d += 1;
                self.pos += 1;
            }
            return Ok(DistributionSpec::Delta(d));
        }
        if self.keyword("heaviside") || self.keyword("H") {
            return Ok(DistributionSpec::Heaviside);
        }
        if self.keyword("sign") {
            return Ok(DistributionSpec::Sign);
        }
        if self.keyword("abs") {
            return Ok(DistributionSpec::Abs);
        }
        if self.keyword("pv_inv") {
            return Ok(DistributionSpec::PvInv);
        }
        if self.keyword("smooth") {
            self.expect(b'(')?;
            let start = self.pos;
            let mut depth = 1usize;
            while self.pos < self.s.len() {
                match self.s[self.pos] {
                    b'(' => depth += 1,
                    b')' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                self.pos += 1;
            }
            if depth != 0 {
                return Err(self.error("unterminated smooth(...)"));
            }
            let body = &self.src[start..self.pos];
            self.pos += 1;
            let e = expr::parse(body).map_err(|e| match e {
                Error::Parse { offset, message } => Error::Parse { offset: start + offset, message },
                other => other,
            })?;
            return Ok(DistributionSpec::Smooth(e));
        }
        if self.keyword("pp") {
            self.expect(b'[')?;
            let mut pieces = vec![self.piece()?];
            while self.eat(b';') {
                pieces.push(self.piece()?);
            }
            self.expect(b']')?;
            return Ok(DistributionSpec::Piecewise(pieces));
        }
        Err(self.error("expected a distribution"))
    }

    fn piece(&mut self) -> Result<Piece> {
        self.expect(b'(')?;
        let lo = self.number().ok_or_else(|| self.error("expected piece start"))?;
        self.expect(b',')?;
        let hi = self.number().ok_or_else(|| self.error("expected piece end"))?;
        self.expect(b')')?;
        self.expect(b':')?;
        let coeffs = self.poly()?;
        Ok(Piece { lo, hi, coeffs })
    }

    fn poly(&mut self) -> Result<Vec<f64>> {
        let mut coeffs = vec![0.0];
        let mut sign = 1.0;
        if self.eat(b'-') {
            sign = -1.0;
        } else {
            self.eat(b'+');
        }
        loop {
            let (c, j) = self.monomial()?;
            if coeffs.len() <= j {
                coeffs.resize(j + 1, 0.0);
            }
            coeffs[j] += sign * c;
            if self.eat(b'+') {
                sign = 1.0;
            } else if self.eat(b'-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        while coeffs.len() > 1 && *coeffs.last().expect("non-empty") == 0.0 {
            coeffs.pop();
        }
        Ok(coeffs)
    }

    fn monomial(&mut self) -> Result<(f64, usize)> {
        let c = self.number();
        if c.is_some() {
            self.eat(b'*');
        }
        if self.peek() == Some(b'x') {
            self.pos += 1;
            let mut j = 1;
            if self.eat(b'^') {
                let n = self.number().filter(|n| *n >= 0.0 && n.fract() == 0.0).ok_or_else(|| self.error("expected exponent"))?;
                j = n as usize;
            }
            return Ok((c.unwrap_or(1.0), j));
        }
        match c {
            Some(c) => Ok((c, 0)),
            None => Err(self.error("expected a polynomial term")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    fn kernel() -> Mollifier {
        Mollifier::shared(0, 1.0).unwrap()
    }

    /// Brute-force `(w * ρ_ε)(x)` for a locally integrable `w`.
    fn convolve(w: impl Fn(f64) -> f64, m: &Mollifier, eps: f64, x: f64) -> f64 {
        let rule = GaussLegendre::new(40);
        let r = m.radius();
        // split at the kink points the tests use (0, ±1)
        let mut edges = vec![-r, r];
        for k in [0.0, -1.0, 1.0] {
            let s = (x - k) / eps;
            if s > -r && s < r {
                edges.push(s);
            }
        }
        edges.sort_by(f64::total_cmp);
        edges
            .windows(2)
            .map(|e| rule.composite(e[0], e[1], 40, |s| w(x - eps * s) * m.value(s)))
            .sum()
    }

    #[test]
    fn parses_text_forms() {
        assert_eq!(DistributionSpec::parse("delta").unwrap(), DistributionSpec::Delta(0));
        assert_eq!(DistributionSpec::parse("delta''").unwrap(), DistributionSpec::Delta(2));
        assert_eq!(DistributionSpec::parse("delta^(3)").unwrap(), DistributionSpec::Delta(3));
        assert_eq!(DistributionSpec::parse(" heaviside ").unwrap(), DistributionSpec::Heaviside);
        let pp = DistributionSpec::parse("pp[(−1,0):0; (0,1):x²]").unwrap();
        assert_eq!(
            pp,
            DistributionSpec::Piecewise(vec![
                Piece { lo: -1.0, hi: 0.0, coeffs: vec![0.0] },
                Piece { lo: 0.0, hi: 1.0, coeffs: vec![0.0, 0.0, 1.0] },
            ])
        );
        let combo = DistributionSpec::parse("2*delta - 0.5 heaviside + pv_inv").unwrap();
        assert_eq!(
            combo,
            DistributionSpec::Combination(vec![
                (2.0, DistributionSpec::Delta(0)),
                (-0.5, DistributionSpec::Heaviside),
                (1.0, DistributionSpec::PvInv),
            ])
        );
        assert!(matches!(DistributionSpec::parse("smooth((sin x))").unwrap(), DistributionSpec::Smooth(_)));
        assert!(DistributionSpec::parse("pp[(1,0):x]").is_err());
        assert!(DistributionSpec::parse("pp[(0,2):x; (1,3):1]").is_err());
        assert!(matches!(DistributionSpec::parse("gamma"), Err(Error::Parse { .. })));
    }

    #[test]
    fn display_round_trips() {
        for src in ["delta", "delta'", "sign", "abs", "pp[(-inf,0):1 - 2x; (0,2):x^3]", "3*delta + heaviside", "smooth((cos x0))"] {
            let w = DistributionSpec::parse(src).unwrap();
            assert_eq!(DistributionSpec::parse(&w.to_string()).unwrap(), w, "{src}");
        }
    }

    #[test]
    fn delta_and_heaviside_closed_forms() {
        let m = kernel();
        let d = embed_distribution(&DistributionSpec::Delta(0), &m).unwrap();
        assert!((d.eval(0.01, &[0.0]) - m.value(0.0) / 0.01).abs() < 1e-9);
        let h = embed_distribution(&DistributionSpec::Heaviside, &m).unwrap();
        assert_eq!(h.eval(0.01, &[0.011]), m.moment(0));
        assert_eq!(h.eval(0.01, &[-0.01]), 0.0);
        assert!((h.eval(0.01, &[0.0]) - 0.5).abs() < 1e-12);
        assert_eq!(h.derive(0), d);
    }

    #[test]
    fn abs_and_sign_match_brute_force() {
        for q in [0usize, 4] {
            let m = Mollifier::shared(q, 1.0).unwrap();
            let a = embed_distribution(&DistributionSpec::Abs, &m).unwrap();
            let s = embed_distribution(&DistributionSpec::Sign, &m).unwrap();
            for &x in &[-0.3, -0.05, 0.0, 0.02, 0.07, 0.5] {
                let eps = 0.1;
                let want = convolve(f64::abs, &m, eps, x);
                assert!((a.eval(eps, &[x]) - want).abs() < 1e-10, "abs q={q} x={x}");
                let want = convolve(|y| y.signum(), &m, eps, x);
                assert!((s.eval(eps, &[x]) - want).abs() < 1e-10, "sign q={q} x={x}");
            }
        }
    }

    #[test]
    fn piecewise_matches_brute_force() {
        let m = Mollifier::shared(2, 1.0).unwrap();
        let w = DistributionSpec::parse("pp[(-1,0):1 + x; (0,1):1 - 2x + 3x^2]").unwrap();
        let e = embed_distribution(&w, &m).unwrap();
        let f = |y: f64| {
            if (-1.0..0.0).contains(&y) {
                1.0 + y
            } else if (0.0..1.0).contains(&y) {
                1.0 - 2.0 * y + 3.0 * y * y
            } else {
                0.0
            }
        };
        for &x in &[-1.02, -0.97, -0.5, -0.01, 0.0, 0.03, 0.5, 0.99, 1.04, 2.0] {
            let eps = 0.05;
            let want = convolve(f, &m, eps, x);
            assert!((e.eval(eps, &[x]) - want).abs() < 1e-10, "x={x}: {} vs {want}", e.eval(eps, &[x]));
        }
    }

    #[test]
    fn pv_embedding_matches_brute_force() {
        let m = kernel();
        let e = embed_distribution(&DistributionSpec::PvInv, &m).unwrap();
        let eps = 0.1;
        for &x in &[0.0f64, 0.03, -0.07, 0.1, 0.25] {
            // symmetric form: ∫_0^∞ (ρ_ε(x - y) - ρ_ε(x + y)) / y dy
            let rule = GaussLegendre::new(40);
            let want = rule.composite(0.0, x.abs() + eps, 200, |y| {
                (m.value((x - y) / eps) - m.value((x + y) / eps)) / (eps * y)
            });
            assert!((e.eval(eps, &[x]) - want).abs() < 1e-9, "x={x}");
        }
        // far from the support the convolution tends to 1/x
        assert!((e.eval(1e-3, &[0.5]) - 2.0).abs() < 1e-5);
    }

    #[test]
    fn smooth_literal_embedding() {
        let m = Mollifier::shared(4, 1.0).unwrap();
        let x = Expr::var(0);
        let e = embed_distribution(&DistributionSpec::Smooth(x.sin()), &m).unwrap();
        let eps = 0.2;
        for &p in &[-1.0, 0.0, 0.7] {
            let want = convolve(f64::sin, &m, eps, p);
            assert!((e.eval(eps, &[p]) - want).abs() < 1e-12);
        }
        // polynomials of low degree are reproduced exactly
        let quad = embed_distribution(&DistributionSpec::Smooth(&x * &x), &m).unwrap();
        assert_eq!(quad, &x * &x);
    }

    #[test]
    fn embedding_is_linear() {
        let m = kernel();
        let w = DistributionSpec::parse("2*delta + heaviside").unwrap();
        let lhs = embed_distribution(&w, &m).unwrap();
        let rhs = embed_distribution(&DistributionSpec::Delta(0), &m).unwrap().scale(2.0)
            + embed_distribution(&DistributionSpec::Heaviside, &m).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn scaled_kernel_integrates_to_one() {
        let m = kernel();
        let k = scale_kernel(&m, 1);
        let eps = 1e-3;
        let total = GaussLegendre::new(40).composite(-eps, eps, 20, |x| k.eval(eps, &[x]));
        assert!((total - 1.0).abs() < 1e-8);
        assert!((k.eval(1.0, &[0.3]) - m.value(0.3)).abs() < 1e-15);
    }
}
