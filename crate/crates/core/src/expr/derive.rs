use super::{Expr, Node};

impl Expr {
    /// Exact partial derivative `∂/∂x_var`.
    pub fn derive(&self, var: usize) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Eps => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum { terms, .. } => Expr::linear_combination(terms.iter().map(|(c, e)| (*c, e.derive(var)))),
            Node::Product(factors) => {
                let mut parts = Vec::with_capacity(factors.len());
                for (i, (base, n)) in factors.iter().enumerate() {
                    let db = base.derive(var);
                    if db.is_zero() {
                        continue;
                    }
                    let rest = factors
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, (b, m))| b.powi_certified(*m));
                    let term = Expr::product(rest.chain([base.powi_certified(n - 1), db]));
                    parts.push((*n as f64, term));
                }
                Expr::linear_combination(parts)
            }
            Node::Sin(a) => chain(a, var, a.cos()),
            Node::Cos(a) => chain(a, var, a.sin().neg()),
            Node::Exp(a) => chain(a, var, self.clone()),
            // argument was certified positive at construction
            Node::Ln(a) => chain(a, var, a.powi_certified(-1)),
            Node::Poly { coeffs, arg } => {
                let d = super::bump::poly::derivative(coeffs);
                chain(arg, var, Expr::poly(d, arg.clone()))
            }
            Node::Bump { order, arg } => chain(arg, var, Expr::bump(order + 1, arg.clone())),
            Node::Kernel { mollifier, order, arg } => chain(arg, var, Expr::kernel(mollifier, order + 1, arg.clone())),
            Node::KernelMoment { mollifier, power, arg } => {
                let outer = arg.powi_certified(*power as i32) * Expr::kernel(mollifier, 0, arg.clone());
                chain(arg, var, outer)
            }
            Node::PvKernel { mollifier, order, arg } => {
                chain(arg, var, Expr::pv_kernel(mollifier, order + 1, arg.clone()))
            }
            // convolution commutes with coordinate derivatives; chain rule through `at`
            Node::ConvRemainder { mollifier, var: conv_var, base, at, .. } => Expr::linear_combination(
                at.iter().enumerate().filter_map(|(i, a)| {
                    let da = a.derive(var);
                    if da.is_zero() {
                        return None;
                    }
                    let inner = Expr::conv_remainder_at(mollifier, *conv_var, base.derive(i), at.clone());
                    Some((1.0, inner * da))
                }),
            ),
            Node::Partial { var: inner, arg } => arg.expand_partials().derive(*inner).derive(var),
        }
    }

    /// `∂^α` for a multi-index `α` (one entry per coordinate).
    pub fn derive_multi(&self, alpha: &[usize]) -> Expr {
        let mut out = self.clone();
        for (i, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                out = out.derive(i);
            }
        }
        out
    }

    /// Replaces every [`Node::Partial`] marker by the derivative it denotes.
    pub fn expand_partials(&self) -> Expr {
        let mut has = false;
        self.visit(&mut |e| {
            if matches!(e.node(), Node::Partial { .. }) {
                has = true;
            }
        });
        if !has {
            return self.clone();
        }
        rebuild(self, &|e| match e.node() {
            Node::Partial { var, arg } => Some(arg.expand_partials().derive(*var)),
            _ => None,
        })
    }
}

fn chain(arg: &Expr, var: usize, outer: Expr) -> Expr {
    let inner = arg.derive(var);
    if inner.is_zero() {
        return Expr::zero();
    }
    outer * inner
}

pub(super) fn substitute(e: &Expr, replacements: &[Expr]) -> Expr {
    rebuild(e, &|n| match n.node() {
        Node::Var(i) => Some(replacements.get(*i).cloned().unwrap_or_else(|| n.clone())),
        _ => None,
    })
}

/// Bottom-up rebuild through the smart constructors. `leaf` may replace a
/// node outright.
fn rebuild(e: &Expr, leaf: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
    if let Some(r) = leaf(e) {
        return r;
    }
    let go = |c: &Expr| rebuild(c, leaf);
    match e.node() {
        Node::Const(_) | Node::Var(_) | Node::Eps => e.clone(),
        Node::Sum { constant, terms } => {
            Expr::linear_combination(std::iter::once((*constant, Expr::one())).chain(terms.iter().map(|(c, t)| (*c, go(t)))))
        }
        Node::Product(factors) => Expr::product(factors.iter().map(|(b, n)| go(b).powi_certified(*n))),
        Node::Sin(a) => go(a).sin(),
        Node::Cos(a) => go(a).cos(),
        Node::Exp(a) => go(a).exp(),
        Node::Ln(a) => {
            let inner = go(a);
            match inner.as_const() {
                Some(c) => Expr::constant(c.ln()),
                None => Expr::from_node(Node::Ln(inner)),
            }
        }
        Node::Poly { coeffs, arg } => Expr::poly(coeffs.clone(), go(arg)),
        Node::Bump { order, arg } => Expr::bump(*order, go(arg)),
        Node::Kernel { mollifier, order, arg } => Expr::kernel(mollifier, *order, go(arg)),
        Node::KernelMoment { mollifier, power, arg } => Expr::kernel_moment(mollifier, *power, go(arg)),
        Node::PvKernel { mollifier, order, arg } => Expr::pv_kernel(mollifier, *order, go(arg)),
        Node::ConvRemainder { mollifier, var, base, at, .. } => {
            Expr::conv_remainder_at(mollifier, *var, base.clone(), at.iter().map(go).collect())
        }
        Node::Partial { var, arg } => Expr::partial(*var, go(arg)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::Mollifier;

    #[test]
    fn polynomial_derivative() {
        let x = Expr::var(0);
        let sq = &x * &x;
        assert_eq!(sq.derive(0), x.scale(2.0));
        assert!(sq.derive(1).is_zero());
    }

    #[test]
    fn scaled_kernel_derivative() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let eps = Expr::eps();
        let inv = eps.powi(-1).unwrap();
        let arg = Expr::var(0) * &inv;
        let rho_eps = &inv * Expr::kernel(&m, 0, arg.clone());
        let expected = eps.powi(-2).unwrap() * Expr::kernel(&m, 1, arg);
        assert_eq!(rho_eps.derive(0), expected);
    }

    #[test]
    fn leibniz_on_sin_times_kernel() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let x = Expr::var(0);
        let eps = Expr::eps();
        let inv = eps.powi(-1).unwrap();
        let k0 = &inv * Expr::kernel(&m, 0, &x * &inv);
        let k1 = eps.powi(-2).unwrap() * Expr::kernel(&m, 1, &x * &inv);
        let u = x.sin() * &k0;
        let expected = x.cos() * &k0 + x.sin() * &k1;
        assert_eq!(u.derive(0), expected);
    }

    #[test]
    fn partial_markers_expand() {
        let x = Expr::var(0);
        let e = Expr::partial(0, x.sin());
        assert_eq!(e.expand_partials(), x.cos());
        assert!((e.eval(0.5, &[0.3]) - 0.3f64.cos()).abs() < 1e-15);
        assert_eq!(e.derive(0), x.sin().neg());
    }

    #[test]
    fn substitution_of_translation() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let eps = Expr::eps();
        let inv = eps.powi(-1).unwrap();
        let rho_eps = &inv * Expr::kernel(&m, 0, Expr::var(0) * &inv);
        let shifted = rho_eps.substitute(&[Expr::var(0) - &eps]);
        let e = 0.01;
        assert!((shifted.eval(e, &[e]) - m.value(0.0) / e).abs() < 1e-9);
    }
}
