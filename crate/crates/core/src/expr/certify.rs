//! Syntactic range certificates.
//!
//! `range` returns a closed interval containing every value of the expression
//! for all `eps ∈ (0, 1]` and all real coordinates. Bounds are conservative;
//! an unbounded interval means "no information". Since the bounds hold for
//! every coordinate value, they survive substitution.

use super::{Expr, Node};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ALL: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn point(c: f64) -> Self {
        Self { lo: c, hi: c }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }

    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi).sanitize()
    }

    fn scale(self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::new(c * self.lo, c * self.hi).sanitize()
        } else {
            Interval::new(c * self.hi, c * self.lo).sanitize()
        }
    }

    fn mul(self, o: Interval) -> Interval {
        let cands = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        if cands.iter().any(|v| v.is_nan()) {
            return Interval::ALL;
        }
        let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    fn powi(self, n: i32) -> Interval {
        if n == 0 {
            return Interval::point(1.0);
        }
        if n < 0 {
            // caller guarantees the base excludes zero
            if !self.excludes_zero() {
                return if n % 2 == 0 { Interval::new(0.0, f64::INFINITY) } else { Interval::ALL };
            }
            let a = self.lo.powi(n);
            let b = self.hi.powi(n);
            return Interval::new(a.min(b), a.max(b)).sanitize();
        }
        let a = self.lo.powi(n);
        let b = self.hi.powi(n);
        if n % 2 == 0 && self.lo <= 0.0 && self.hi >= 0.0 {
            Interval::new(0.0, a.max(b)).sanitize()
        } else {
            Interval::new(a.min(b), a.max(b)).sanitize()
        }
    }

    fn sanitize(self) -> Interval {
        Interval::new(
            if self.lo.is_nan() { f64::NEG_INFINITY } else { self.lo },
            if self.hi.is_nan() { f64::INFINITY } else { self.hi },
        )
    }
}

impl Expr {
    /// Conservative value range over `eps ∈ (0,1]` and all coordinates.
    pub fn range(&self) -> Interval {
        match self.node() {
            Node::Const(c) => Interval::point(*c),
            Node::Var(_) => Interval::ALL,
            Node::Eps => Interval::new(0.0, 1.0),
            Node::Sum { constant, terms } => terms
                .iter()
                .fold(Interval::point(*constant), |acc, (c, e)| acc.add(e.range().scale(*c))),
            Node::Product(factors) => factors
                .iter()
                .fold(Interval::point(1.0), |acc, (b, n)| acc.mul(b.range().powi(*n))),
            Node::Sin(_) | Node::Cos(_) => Interval::new(-1.0, 1.0),
            Node::Exp(a) => {
                let r = a.range();
                Interval::new(r.lo.exp(), r.hi.exp())
            }
            Node::Ln(a) => {
                let r = a.range();
                Interval::new(if r.lo > 0.0 { r.lo.ln() } else { f64::NEG_INFINITY }, r.hi.ln())
            }
            Node::Poly { .. } => Interval::ALL,
            Node::Bump { order: 0, .. } => Interval::new(0.0, (-1.0f64).exp()),
            Node::Kernel { mollifier, order: 0, .. } if mollifier.is_nonnegative() => Interval::new(0.0, f64::INFINITY),
            Node::KernelMoment { mollifier, power: 0, .. } if mollifier.is_nonnegative() => Interval::new(0.0, 1.0),
            _ => Interval::ALL,
        }
    }

    /// True when the expression provably never vanishes: an `eps` power times
    /// factors bounded away from zero.
    pub fn is_nonvanishing(&self) -> bool {
        match self.node() {
            Node::Const(c) => *c != 0.0,
            Node::Eps | Node::Exp(_) => true,
            Node::Product(factors) => factors.iter().all(|(b, _)| b.is_nonvanishing()),
            Node::Sum { constant, terms } if *constant == 0.0 && terms.len() == 1 => terms[0].1.is_nonvanishing(),
            _ => self.range().excludes_zero(),
        }
    }

    /// True when the expression is provably strictly positive.
    pub fn is_positive(&self) -> bool {
        match self.node() {
            Node::Const(c) => *c > 0.0,
            Node::Eps | Node::Exp(_) => true,
            Node::Product(factors) => factors
                .iter()
                .all(|(b, n)| b.is_positive() || (n % 2 == 0 && b.is_nonvanishing())),
            Node::Sum { constant, terms } if *constant == 0.0 && terms.len() == 1 => {
                let (c, e) = &terms[0];
                (*c > 0.0 && e.is_positive()) || (*c < 0.0 && e.is_negative())
            }
            _ => self.range().lo > 0.0,
        }
    }

    fn is_negative(&self) -> bool {
        match self.node() {
            Node::Const(c) => *c < 0.0,
            _ => self.range().hi < 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificates() {
        let x = Expr::var(0);
        let eps = Expr::eps();
        assert!(eps.is_nonvanishing());
        assert!((&eps * &eps).is_positive());
        assert!(eps.powi_certified(3).scale(-2.0).is_nonvanishing());
        assert!(!x.is_nonvanishing());
        assert!((x.sin() + 2.0).is_positive());
        assert!(!(x.sin() + 0.5).is_nonvanishing());
        assert!((&x * &x + 0.25).is_positive());
        let shifted = (&x * &x + 1.0) * eps.powi_certified(2);
        assert!(shifted.is_nonvanishing());
        assert!(!(x.cos() - 1.0).is_nonvanishing());
    }
}
