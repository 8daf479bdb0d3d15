use super::bump::{bump_derivative, poly};
use super::{Expr, Node};
use crate::quadrature::{GL16, GL20};

const REMAINDER_PANELS: usize = 16;

impl Expr {
    /// Evaluates at `(eps, x)`. Pure and reentrant; `x` must cover every
    /// coordinate the tree references.
    pub fn eval(&self, eps: f64, x: &[f64]) -> f64 {
        match self.node() {
            Node::Const(c) => *c,
            Node::Var(i) => x[*i],
            Node::Eps => eps,
            Node::Sum { constant, terms } => terms.iter().fold(*constant, |acc, (c, e)| acc + c * e.eval(eps, x)),
            Node::Product(factors) => factors.iter().fold(1.0, |acc, (b, n)| {
                let v = b.eval(eps, x);
                acc * if *n == 1 { v } else { v.powi(*n) }
            }),
            Node::Sin(a) => a.eval(eps, x).sin(),
            Node::Cos(a) => a.eval(eps, x).cos(),
            Node::Exp(a) => a.eval(eps, x).exp(),
            Node::Ln(a) => a.eval(eps, x).ln(),
            Node::Poly { coeffs, arg } => poly::eval(coeffs, arg.eval(eps, x)),
            Node::Bump { order, arg } => bump_derivative(*order, arg.eval(eps, x)),
            Node::Kernel { mollifier, order, arg } => mollifier.derivative(*order, arg.eval(eps, x)),
            Node::KernelMoment { mollifier, power, arg } => mollifier.moment_primitive(*power, arg.eval(eps, x)),
            Node::PvKernel { mollifier, order, arg } => mollifier.pv_transform(*order, arg.eval(eps, x)),
            Node::ConvRemainder { mollifier, var, taylor_order, integrand, at, .. } => {
                let p: Vec<f64> = at.iter().map(|a| a.eval(eps, x)).collect();
                conv_remainder(mollifier, *var, *taylor_order, integrand, eps, &p)
            }
            Node::Partial { var, arg } => arg.expand_partials().derive(*var).eval(eps, x),
        }
    }

    /// Evaluates several expressions at the same point.
    pub fn eval_all(exprs: &[Expr], eps: f64, x: &[f64]) -> Vec<f64> {
        exprs.iter().map(|e| e.eval(eps, x)).collect()
    }
}

/// `ε^{k+1} ∫ ρ(s) (-s)^{k+1}/k! ∫_0^1 (1-θ)^k f^{(k+1)}(x - θεs) dθ ds`, the
/// integral form of `(f * ρ_ε)(x) - f(x)` once moments `1..=k` vanish.
fn conv_remainder(
    mollifier: &crate::mollifier::Mollifier,
    var: usize,
    k: usize,
    integrand: &Expr,
    eps: f64,
    x: &[f64],
) -> f64 {
    let r = mollifier.radius();
    let mut point = x.to_vec();
    if point.len() <= var {
        point.resize(var + 1, 0.0);
    }
    let x0 = point[var];
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    let kk = (k + 1) as i32;
    let inner = |s: f64, point: &mut Vec<f64>| -> f64 {
        GL16.integrate(0.0, 1.0, |theta| {
            point[var] = x0 - theta * eps * s;
            (1.0 - theta).powi(k as i32) * integrand.eval(eps, point)
        })
    };
    let total = GL20.composite(-r, r, REMAINDER_PANELS, |s| {
        let w = mollifier.value(s);
        if w == 0.0 {
            return 0.0;
        }
        w * (-s).powi(kk) * inner(s, &mut point)
    });
    eps.powi(kk) * total / factorial
}
