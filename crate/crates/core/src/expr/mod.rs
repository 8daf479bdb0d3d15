//! Immutable expression trees in chart coordinates `x0, x1, …` and the
//! regularization parameter `eps`.
//!
//! Every net `(u_ε)_ε` handled by this crate is a single expression in `eps`.
//! Trees are hash-consed into a normal form by the smart constructors: sums
//! carry real coefficients and merge like terms, products merge equal bases
//! into integer powers, and both are sorted canonically. Negative powers are
//! only admitted for bases with a nonvanishing certificate (see [`certify`]).

pub(crate) mod bump;
mod certify;
mod derive;
mod dsl;
mod eval;

pub use certify::Interval;
pub use dsl::{parse, parse_with_names};

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mollifier::Mollifier;

#[derive(Clone)]
pub struct Expr(Arc<Inner>);

struct Inner {
    node: Node,
    hash: u64,
}

/// Node vocabulary. Construct through [`Expr`]'s constructors, which keep
/// the normal form; the variants are public for inspection.
#[derive(Clone, PartialEq, Debug)]
pub enum Node {
    Const(f64),
    /// Chart coordinate `x_i`.
    Var(usize),
    Eps,
    Sum { constant: f64, terms: Vec<(f64, Expr)> },
    Product(Vec<(Expr, i32)>),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Ln(Expr),
    /// Ascending coefficients evaluated at `arg`.
    Poly { coeffs: Vec<f64>, arg: Expr },
    /// `b^(order)(arg)` for the standard bump `b(s) = exp(-1/(1-s²))`.
    Bump { order: usize, arg: Expr },
    /// `ρ^(order)(arg)` for a mollifier `ρ` (unscaled).
    Kernel { mollifier: Mollifier, order: usize, arg: Expr },
    /// `∫_{-R}^{arg} s^power ρ(s) ds`.
    KernelMoment { mollifier: Mollifier, power: usize, arg: Expr },
    /// `pv ∫ ρ^(order)(u) / (arg - u) du`.
    PvKernel { mollifier: Mollifier, order: usize, arg: Expr },
    /// `(f * ρ_ε)(p) - f(p)` with convolution along coordinate `var` of `f`,
    /// evaluated through the integral Taylor remainder of order
    /// `taylor_order + 1` at the point `p = at(eps, x)`.
    ConvRemainder { mollifier: Mollifier, var: usize, taylor_order: usize, base: Expr, integrand: Expr, at: Vec<Expr> },
    /// Unexpanded partial derivative marker `∂_var arg`.
    Partial { var: usize, arg: Expr },
}

impl Expr {
    fn from_node(node: Node) -> Self {
        let mut h = DefaultHasher::new();
        hash_node(&node, &mut h);
        Expr(Arc::new(Inner { node, hash: h.finish() }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(i: usize) -> Self {
        Self::from_node(Node::Var(i))
    }

    pub fn eps() -> Self {
        Self::from_node(Node::Eps)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    // ------------------------------------------------------------------
    // sums

    /// `Σ terms + constant` in normal form.
    fn build_sum(constant: f64, parts: impl IntoIterator<Item = (f64, Expr)>) -> Expr {
        let mut constant = constant;
        let mut terms: Vec<(f64, Expr)> = Vec::new();
        let push = |c: f64, e: Expr, terms: &mut Vec<(f64, Expr)>, constant: &mut f64| {
            if c == 0.0 {
                return;
            }
            if let Some(k) = e.as_const() {
                *constant += c * k;
                return;
            }
            match terms.iter_mut().find(|(_, t)| *t == e) {
                Some(slot) => slot.0 += c,
                None => terms.push((c, e)),
            }
        };
        for (c, e) in parts {
            match e.node() {
                Node::Sum { constant: k, terms: inner } => {
                    constant += c * k;
                    for (ci, ei) in inner {
                        push(c * ci, ei.clone(), &mut terms, &mut constant);
                    }
                }
                _ => push(c, e, &mut terms, &mut constant),
            }
        }
        terms.retain(|(c, _)| *c != 0.0);
        terms.sort_by(|a, b| canonical_cmp(&a.1, &b.1));
        match (constant == 0.0, terms.len()) {
            (_, 0) => Expr::constant(constant),
            (true, 1) if terms[0].0 == 1.0 => terms.pop().expect("one term").1,
            _ => Self::from_node(Node::Sum { constant, terms }),
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        Self::build_sum(0.0, [(1.0, self.clone()), (1.0, other.clone())])
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        if other.is_zero() {
            return self.clone();
        }
        Self::build_sum(0.0, [(1.0, self.clone()), (-1.0, other.clone())])
    }

    pub fn scale(&self, c: f64) -> Expr {
        if c == 1.0 {
            return self.clone();
        }
        if c == 0.0 {
            return Expr::zero();
        }
        if let Some(k) = self.as_const() {
            return Expr::constant(c * k);
        }
        Self::build_sum(0.0, [(c, self.clone())])
    }

    pub fn neg(&self) -> Expr {
        self.scale(-1.0)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        Self::build_sum(0.0, items.into_iter().map(|e| (1.0, e)))
    }

    /// Linear combination `Σ c_i e_i`.
    pub fn linear_combination<I: IntoIterator<Item = (f64, Expr)>>(items: I) -> Expr {
        Self::build_sum(0.0, items)
    }

    // ------------------------------------------------------------------
    // products and powers

    /// A lone scaled term `c·e` (a sum with no constant and one term).
    fn as_scaled(&self) -> Option<(f64, &Expr)> {
        match self.node() {
            Node::Sum { constant, terms } if *constant == 0.0 && terms.len() == 1 => Some((terms[0].0, &terms[0].1)),
            _ => None,
        }
    }

    fn build_product(parts: impl IntoIterator<Item = (Expr, i32)>) -> Expr {
        let mut coeff = 1.0;
        let mut factors: Vec<(Expr, i32)> = Vec::new();
        let mut stack: Vec<(Expr, i32)> = parts.into_iter().collect();
        while let Some((e, n)) = stack.pop() {
            if n == 0 {
                continue;
            }
            if let Some(k) = e.as_const() {
                coeff *= k.powi(n);
                continue;
            }
            if n == 1 {
                if let Some((c, inner)) = e.as_scaled() {
                    coeff *= c;
                    stack.push((inner.clone(), 1));
                    continue;
                }
            }
            match e.node() {
                Node::Product(inner) => {
                    for (b, m) in inner {
                        stack.push((b.clone(), m * n));
                    }
                }
                _ => match factors.iter_mut().find(|(b, _)| *b == e) {
                    Some(slot) => slot.1 += n,
                    None => factors.push((e, n)),
                },
            }
        }
        factors.retain(|(_, n)| *n != 0);
        if coeff == 0.0 {
            return Expr::zero();
        }
        factors.sort_by(|a, b| canonical_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
        let core = match factors.len() {
            0 => return Expr::constant(coeff),
            1 if factors[0].1 == 1 => factors.pop().expect("one factor").0,
            _ => Self::from_node(Node::Product(factors)),
        };
        core.scale(coeff)
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = self.as_const() {
            return other.scale(c);
        }
        if let Some(c) = other.as_const() {
            return self.scale(c);
        }
        Self::build_product([(self.clone(), 1), (other.clone(), 1)])
    }

    pub fn product<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        Self::build_product(items.into_iter().map(|e| (e, 1)))
    }

    /// Integer power. Negative exponents need a nonvanishing certificate.
    pub fn powi(&self, n: i32) -> Result<Expr> {
        if n < 0 && !self.is_nonvanishing() {
            return Err(Error::Uncertified(self.to_string()));
        }
        Ok(self.powi_certified(n))
    }

    pub(crate) fn powi_certified(&self, n: i32) -> Expr {
        match n {
            0 => Expr::one(),
            1 => self.clone(),
            _ => Self::build_product([(self.clone(), n)]),
        }
    }

    /// Certified quotient `self / den`.
    pub fn div(&self, den: &Expr) -> Result<Expr> {
        let inv = den.powi(-1)?;
        Ok(self.mul(&inv))
    }

    pub fn recip(&self) -> Result<Expr> {
        self.powi(-1)
    }

    // ------------------------------------------------------------------
    // primitives

    pub fn sin(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.sin()),
            None => Self::from_node(Node::Sin(self.clone())),
        }
    }

    pub fn cos(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.cos()),
            None => Self::from_node(Node::Cos(self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => Self::from_node(Node::Exp(self.clone())),
        }
    }

    /// Natural logarithm; the argument must be certified positive.
    pub fn ln(&self) -> Result<Expr> {
        if !self.is_positive() {
            return Err(Error::NonPositiveLog(self.to_string()));
        }
        Ok(match self.as_const() {
            Some(c) => Expr::constant(c.ln()),
            None => Self::from_node(Node::Ln(self.clone())),
        })
    }

    pub fn poly(coeffs: Vec<f64>, arg: Expr) -> Expr {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && *coeffs.last().expect("non-empty") == 0.0 {
            coeffs.pop();
        }
        match coeffs.len() {
            0 => return Expr::zero(),
            1 => return Expr::constant(coeffs[0]),
            _ => {}
        }
        if let Some(c) = arg.as_const() {
            return Expr::constant(bump::poly::eval(&coeffs, c));
        }
        if coeffs.len() == 2 && coeffs[0] == 0.0 {
            return arg.scale(coeffs[1]);
        }
        Self::from_node(Node::Poly { coeffs, arg })
    }

    pub fn bump(order: usize, arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(bump::bump_derivative(order, c)),
            None => Self::from_node(Node::Bump { order, arg }),
        }
    }

    pub fn kernel(mollifier: &Mollifier, order: usize, arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(mollifier.derivative(order, c)),
            None => Self::from_node(Node::Kernel { mollifier: mollifier.clone(), order, arg }),
        }
    }

    pub fn kernel_moment(mollifier: &Mollifier, power: usize, arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(mollifier.moment_primitive(power, c)),
            None => Self::from_node(Node::KernelMoment { mollifier: mollifier.clone(), power, arg }),
        }
    }

    pub fn pv_kernel(mollifier: &Mollifier, order: usize, arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(mollifier.pv_transform(order, c)),
            None => Self::from_node(Node::PvKernel { mollifier: mollifier.clone(), order, arg }),
        }
    }

    /// `(f * ρ_ε) - f` along coordinate `var`.
    pub fn conv_remainder(mollifier: &Mollifier, var: usize, base: Expr) -> Expr {
        let n = base.arity().max(var + 1);
        let at = (0..n).map(Expr::var).collect();
        Self::conv_remainder_at(mollifier, var, base, at)
    }

    /// `((f * ρ_ε) - f)(at)`.
    pub fn conv_remainder_at(mollifier: &Mollifier, var: usize, base: Expr, at: Vec<Expr>) -> Expr {
        let taylor_order = mollifier.vanishing_moments();
        let mut integrand = base.clone();
        for _ in 0..=taylor_order {
            integrand = integrand.derive(var);
        }
        if integrand.is_zero() {
            return Expr::zero();
        }
        Self::from_node(Node::ConvRemainder { mollifier: mollifier.clone(), var, taylor_order, base, integrand, at })
    }

    /// Partial derivative marker; evaluated by expanding on demand.
    pub fn partial(var: usize, arg: Expr) -> Expr {
        Self::from_node(Node::Partial { var, arg })
    }

    // ------------------------------------------------------------------
    // structure queries

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::Var(_) | Node::Eps => vec![],
            Node::Sum { terms, .. } => terms.iter().map(|(_, e)| e).collect(),
            Node::Product(f) => f.iter().map(|(e, _)| e).collect(),
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) | Node::Ln(a) => vec![a],
            Node::Poly { arg, .. }
            | Node::Bump { arg, .. }
            | Node::Kernel { arg, .. }
            | Node::KernelMoment { arg, .. }
            | Node::PvKernel { arg, .. }
            | Node::Partial { arg, .. } => vec![arg],
            Node::ConvRemainder { at, .. } => at.iter().collect(),
        }
    }

    /// Highest coordinate index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self.node() {
            Node::Var(i) => i + 1,
            Node::Partial { var, arg } => (var + 1).max(arg.arity()),
            _ => self.children().iter().map(|c| c.arity()).max().unwrap_or(0),
        }
    }

    pub fn depends_on_var(&self, i: usize) -> bool {
        match self.node() {
            Node::Var(j) => *j == i,
            _ => self.children().iter().any(|c| c.depends_on_var(i)),
        }
    }

    pub fn is_coordinate_free(&self) -> bool {
        self.arity() == 0
    }

    pub fn depends_on_eps(&self) -> bool {
        match self.node() {
            Node::Eps => true,
            Node::Kernel { .. } | Node::KernelMoment { .. } | Node::PvKernel { .. } => {
                self.children().iter().any(|c| c.depends_on_eps())
            }
            Node::ConvRemainder { .. } => true,
            _ => self.children().iter().any(|c| c.depends_on_eps()),
        }
    }

    /// Visits every node (pre-order).
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Replaces the coordinate `x_i` by `replacements[i]`.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        derive::substitute(self, replacements)
    }

    /// Kernel-scale windows: for every mollifier node whose argument is affine
    /// in a single coordinate, the coordinate interval where the argument lies
    /// in `[-R, R]` at the given `eps`.
    pub fn kernel_windows(&self, eps: f64) -> Vec<KernelWindow> {
        let mut out = Vec::new();
        let arity = self.arity();
        self.visit(&mut |e| {
            let (m, arg) = match e.node() {
                Node::Kernel { mollifier, arg, .. }
                | Node::KernelMoment { mollifier, arg, .. }
                | Node::PvKernel { mollifier, arg, .. } => (mollifier, arg),
                _ => return,
            };
            let n = arity.max(arg.arity());
            let origin = vec![0.0; n];
            let mut var = None;
            let mut slope = 0.0;
            for j in 0..n {
                let d = arg.derive(j);
                if d.is_zero() {
                    continue;
                }
                if !d.is_coordinate_free() || var.is_some() {
                    return;
                }
                var = Some(j);
                slope = d.eval(eps, &origin);
            }
            let Some(var) = var else { return };
            if slope == 0.0 || !slope.is_finite() {
                return;
            }
            let offset = arg.eval(eps, &origin);
            let r = m.radius();
            let a = (-r - offset) / slope;
            let b = (r - offset) / slope;
            let w = KernelWindow { var, lo: a.min(b), hi: a.max(b) };
            if w.lo.is_finite() && w.hi.is_finite() && !out.contains(&w) {
                out.push(w);
            }
        });
        out
    }

    /// True when the tree contains a mollifier node.
    pub fn has_kernel(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e.node(), Node::Kernel { .. } | Node::KernelMoment { .. } | Node::PvKernel { .. }) {
                found = true;
            }
        });
        found
    }
}

/// Coordinate interval `[lo, hi]` in `x_var` where a kernel node is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelWindow {
    pub var: usize,
    pub lo: f64,
    pub hi: f64,
}

impl KernelWindow {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, margin: f64) -> bool {
        x >= self.lo - margin && x <= self.hi + margin
    }
}

fn hash_node<H: Hasher>(node: &Node, h: &mut H) {
    std::mem::discriminant(node).hash(h);
    match node {
        Node::Const(c) => c.to_bits().hash(h),
        Node::Var(i) => i.hash(h),
        Node::Eps => {}
        Node::Sum { constant, terms } => {
            constant.to_bits().hash(h);
            for (c, e) in terms {
                c.to_bits().hash(h);
                e.0.hash.hash(h);
            }
        }
        Node::Product(f) => {
            for (e, n) in f {
                e.0.hash.hash(h);
                n.hash(h);
            }
        }
        Node::Sin(a) | Node::Cos(a) | Node::Exp(a) | Node::Ln(a) => a.0.hash.hash(h),
        Node::Poly { coeffs, arg } => {
            for c in coeffs {
                c.to_bits().hash(h);
            }
            arg.0.hash.hash(h);
        }
        Node::Bump { order, arg } => {
            order.hash(h);
            arg.0.hash.hash(h);
        }
        Node::Kernel { mollifier, order, arg } | Node::PvKernel { mollifier, order, arg } => {
            mollifier.moment_order().hash(h);
            mollifier.radius().to_bits().hash(h);
            order.hash(h);
            arg.0.hash.hash(h);
        }
        Node::KernelMoment { mollifier, power, arg } => {
            mollifier.moment_order().hash(h);
            mollifier.radius().to_bits().hash(h);
            power.hash(h);
            arg.0.hash.hash(h);
        }
        Node::ConvRemainder { mollifier, var, taylor_order, base, at, .. } => {
            mollifier.moment_order().hash(h);
            mollifier.radius().to_bits().hash(h);
            var.hash(h);
            taylor_order.hash(h);
            base.0.hash.hash(h);
            for a in at {
                a.0.hash.hash(h);
            }
        }
        Node::Partial { var, arg } => {
            var.hash(h);
            arg.0.hash.hash(h);
        }
    }
}

/// Total order used to sort sum terms and product factors.
fn canonical_cmp(a: &Expr, b: &Expr) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    a.0.hash.cmp(&b.0.hash).then_with(|| a.to_string().cmp(&b.to_string()))
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.node == other.0.node)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$inner(self, rhs)
            }
        }
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$inner(&self, &rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$inner(&self, rhs)
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$inner(self, &rhs)
            }
        }
        impl ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$inner(self, &Expr::constant(rhs))
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$inner(&self, &Expr::constant(rhs))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$inner(&Expr::constant(self), &rhs)
            }
        }
        impl ops::$trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$inner(&Expr::constant(self), rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
