//! Compactly supported mollifiers with vanishing moments, and the embeddings
//! of distributions (`iota`) and smooth functions (`sigma`) built from them.
//!
//! A kernel has the form `ρ(t) = P(t²) · b(t/R)` where `b` is the standard bump
//! and `P` an even polynomial correction fixed by the moment conditions
//! `∫ρ = 1`, `∫ t^k ρ = 0` for `1 ≤ k ≤ q`. Odd moments vanish by symmetry, so
//! only the even ones enter the linear system.

mod distribution;

pub use distribution::{embed_distribution, embed_smooth, scale_kernel, DistributionSpec, Piece};

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use dashmap::DashMap;
use nalgebra::{DMatrix, DVector};
use once_cell::sync::Lazy;

use crate::error::{Error, Result};
use crate::expr::bump::{bump_derivative, poly};
use crate::expr::Expr;
use crate::quadrature::GL20;

/// Largest supported moment order.
pub const MAX_MOMENT_ORDER: usize = 8;

const MOMENT_PANELS: usize = 48;
const PRIMITIVE_PANELS: usize = 12;
const PV_PANELS: usize = 24;
const PV_MEMO_LIMIT: usize = 1 << 20;

#[derive(Clone)]
pub struct Mollifier(Arc<Inner>);

struct Inner {
    moment_order: usize,
    radius: f64,
    /// `P(t²)` expanded as a polynomial in `t` (ascending coefficients).
    poly: Vec<f64>,
    poly_derivatives: Vec<Vec<f64>>,
    moments: Vec<f64>,
    pv_memo: DashMap<(usize, i64), f64>,
}

static REGISTRY: Lazy<Mutex<HashMap<(usize, u64), Mollifier>>> = Lazy::new(|| Mutex::new(HashMap::new()));

impl Mollifier {
    /// Builds the kernel with `q` vanishing moments and support `[-radius, radius]`.
    pub fn new(q: usize, radius: f64) -> Result<Self> {
        if q > MAX_MOMENT_ORDER {
            return Err(Error::Mollifier(format!("moment order {q} exceeds {MAX_MOMENT_ORDER}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Mollifier(format!("support radius {radius} must be positive")));
        }
        let p = q / 2;
        // mu_n = ∫ t^n b(t/R) dt for even n up to 4p
        let mu: Vec<f64> = (0..=4 * p)
            .map(|n| {
                if n % 2 == 1 {
                    0.0
                } else {
                    GL20.composite(-radius, radius, MOMENT_PANELS, |t| {
                        t.powi(n as i32) * bump_derivative(0, t / radius)
                    })
                }
            })
            .collect();
        let system = DMatrix::from_fn(p + 1, p + 1, |k, i| mu[2 * i + 2 * k]);
        let mut rhs = DVector::zeros(p + 1);
        rhs[0] = 1.0;
        let c = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Mollifier("moment system is singular".into()))?;
        let mut poly_t = vec![0.0; 2 * p + 1];
        for i in 0..=p {
            poly_t[2 * i] = c[i];
        }
        let mut poly_derivatives = vec![poly_t.clone()];
        for _ in 0..poly_t.len() {
            let next = poly::derivative(poly_derivatives.last().expect("non-empty"));
            poly_derivatives.push(next);
        }
        let mut inner = Inner {
            moment_order: q,
            radius,
            poly: poly_t,
            poly_derivatives,
            moments: Vec::new(),
            pv_memo: DashMap::new(),
        };
        let max_k = 2 * MAX_MOMENT_ORDER + 6;
        inner.moments = (0..=max_k)
            .map(|k| {
                if k % 2 == 1 {
                    0.0
                } else {
                    GL20.composite(-radius, radius, MOMENT_PANELS, |t| t.powi(k as i32) * inner.derivative(0, t))
                }
            })
            .collect();
        Ok(Self(Arc::new(inner)))
    }

    /// Process-wide shared instance for `(q, radius)`; kernels referenced by
    /// parsed expressions resolve through here.
    pub fn shared(q: usize, radius: f64) -> Result<Self> {
        let key = (q, radius.to_bits());
        let mut reg = REGISTRY.lock().expect("mollifier registry poisoned");
        if let Some(m) = reg.get(&key) {
            return Ok(m.clone());
        }
        let m = Self::new(q, radius)?;
        reg.insert(key, m.clone());
        Ok(m)
    }

    pub fn moment_order(&self) -> usize {
        self.0.moment_order
    }

    pub fn radius(&self) -> f64 {
        self.0.radius
    }

    /// Number of leading moments (after the zeroth) that vanish: `q`, plus one
    /// more when `q` is even because the kernel is even.
    pub fn vanishing_moments(&self) -> usize {
        let q = self.0.moment_order;
        if q.is_multiple_of(2) {
            q + 1
        } else {
            q
        }
    }

    /// True when the kernel is a plain normalized bump (no sign changes).
    pub fn is_nonnegative(&self) -> bool {
        self.0.moment_order < 2
    }

    /// Coefficients of the polynomial factor in `t` (ascending).
    pub fn correction_polynomial(&self) -> &[f64] {
        &self.0.poly
    }

    pub fn value(&self, t: f64) -> f64 {
        self.0.derivative(0, t)
    }

    /// `ρ^(d)(t)`.
    pub fn derivative(&self, d: usize, t: f64) -> f64 {
        self.0.derivative(d, t)
    }

    /// `∫ t^k ρ(t) dt` (tabulated up to `2·MAX_MOMENT_ORDER + 6`).
    pub fn moment(&self, k: usize) -> f64 {
        match self.0.moments.get(k) {
            Some(&m) => m,
            None => GL20.composite(-self.radius(), self.radius(), MOMENT_PANELS, |t| {
                t.powi(k as i32) * self.value(t)
            }),
        }
    }

    /// `∫_{-R}^{t} s^k ρ(s) ds`.
    pub fn moment_primitive(&self, k: usize, t: f64) -> f64 {
        let r = self.0.radius;
        if t <= -r {
            return 0.0;
        }
        if t >= r {
            return self.moment(k);
        }
        let f = |s: f64| s.powi(k as i32) * self.0.derivative(0, s);
        if t <= 0.0 {
            GL20.composite(-r, t, PRIMITIVE_PANELS, f)
        } else {
            self.moment(k) - GL20.composite(t, r, PRIMITIVE_PANELS, f)
        }
    }

    /// Principal value `pv ∫ ρ^(d)(u) / (t - u) du`, i.e. the `d`-th derivative
    /// of `(vp 1/x) * ρ` at `t`. Memoized on `t` rounded to 1e-12.
    pub fn pv_transform(&self, d: usize, t: f64) -> f64 {
        let key = (t * 1e12).round();
        if key.abs() < 9.0e18 {
            let key = (d, key as i64);
            if let Some(v) = self.0.pv_memo.get(&key) {
                return *v;
            }
            let v = self.pv_uncached(d, t);
            if self.0.pv_memo.len() >= PV_MEMO_LIMIT {
                self.0.pv_memo.clear();
            }
            self.0.pv_memo.insert(key, v);
            v
        } else {
            self.pv_uncached(d, t)
        }
    }

    fn pv_uncached(&self, d: usize, t: f64) -> f64 {
        let r = self.0.radius;
        let g = |u: f64| self.0.derivative(d, u);
        if t.abs() < r {
            // subtract the singular part; the remainder is smooth across u = t
            let gt = g(t);
            let smooth = |u: f64| (g(u) - gt) / (t - u);
            let left = GL20.composite(-r, t, PV_PANELS, smooth);
            let right = GL20.composite(t, r, PV_PANELS, smooth);
            left + right + gt * ((t + r) / (r - t)).ln()
        } else {
            GL20.composite(-r, r, 2 * PV_PANELS, |u| g(u) / (t - u))
        }
    }

    /// The kernel as an expression in the single coordinate `x0`.
    pub fn kernel_expr(&self) -> Expr {
        let x = Expr::var(0);
        let scaled = &x * (1.0 / self.0.radius);
        Expr::poly(self.0.poly.clone(), x) * Expr::bump(0, scaled)
    }
}

impl Inner {
    fn derivative(&self, d: usize, t: f64) -> f64 {
        let s = t / self.radius;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=d {
            if j > 0 {
                binom = binom * (d - j + 1) as f64 / j as f64;
            }
            let pj = match self.poly_derivatives.get(j) {
                Some(p) => poly::eval(p, t),
                None => 0.0,
            };
            if pj == 0.0 {
                continue;
            }
            let m = d - j;
            acc += binom * pj * self.radius.powi(-(m as i32)) * bump_derivative(m, s);
        }
        acc
    }
}

impl PartialEq for Mollifier {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.moment_order == other.0.moment_order && self.0.radius.to_bits() == other.0.radius.to_bits())
    }
}

impl fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mollifier")
            .field("q", &self.0.moment_order)
            .field("radius", &self.0.radius)
            .field("poly", &self.0.poly)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    /// Independent high-order rule: 40-point Gauss on 400 panels.
    fn oracle_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        GaussLegendre::new(40).composite(a, b, 400, f)
    }

    #[test]
    fn q0_is_the_normalized_bump() {
        let m = Mollifier::new(0, 1.0).unwrap();
        assert_eq!(m.correction_polynomial().len(), 1);
        let total = oracle_integral(|t| m.value(t), -1.0, 1.0);
        assert!((total - 1.0).abs() < 1e-12);
        assert!(m.is_nonnegative());
    }

    #[test]
    fn q1_equals_q0_by_symmetry() {
        let a = Mollifier::new(0, 1.0).unwrap();
        let b = Mollifier::new(1, 1.0).unwrap();
        for &t in &[-0.7, -0.1, 0.0, 0.33, 0.9] {
            assert_eq!(a.value(t), b.value(t));
        }
        assert_eq!(b.vanishing_moments(), 1);
    }

    #[test]
    fn q4_moments_vanish() {
        for &r in &[1.0, 0.5, 2.0] {
            let m = Mollifier::new(4, r).unwrap();
            let total = oracle_integral(|t| m.value(t), -r, r);
            assert!((total - 1.0).abs() < 1e-10, "R={r} total={total}");
            for k in 1..=4 {
                let mk = oracle_integral(|t| t.powi(k) * m.value(t), -r, r);
                assert!(mk.abs() < 1e-10, "R={r} k={k} moment={mk}");
            }
            let m6 = oracle_integral(|t| t.powi(6) * m.value(t), -r, r);
            assert!(m6.abs() > 1e-6);
            assert!((m.moment(6) - m6).abs() < 1e-12);
        }
    }

    #[test]
    fn all_curated_orders_build() {
        for q in 0..=MAX_MOMENT_ORDER {
            let m = Mollifier::new(q, 1.0).unwrap();
            for k in 1..=q {
                assert!(m.moment(k).abs() < 1e-10, "q={q} k={k}: {}", m.moment(k));
            }
        }
        assert!(Mollifier::new(9, 1.0).is_err());
        assert!(Mollifier::new(2, 0.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = Mollifier::new(4, 1.3).unwrap();
        for d in 0..4 {
            for &t in &[-1.0, -0.61, 0.0, 0.27, 1.1] {
                let h = 1e-5;
                let fd = (m.derivative(d, t + h) - m.derivative(d, t - h)) / (2.0 * h);
                let exact = m.derivative(d + 1, t);
                assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "d={d} t={t}");
            }
        }
    }

    #[test]
    fn primitive_is_the_cumulative_integral() {
        let m = Mollifier::new(2, 1.0).unwrap();
        for &t in &[-1.5f64, -0.9, -0.2, 0.0, 0.4, 0.95, 2.0] {
            for k in 0..3 {
                let lo = -1.0;
                let hi = t.clamp(-1.0, 1.0);
                let expect = oracle_integral(|s| s.powi(k) * m.value(s), lo, hi);
                assert!((m.moment_primitive(k as usize, t) - expect).abs() < 1e-13, "t={t} k={k}");
            }
        }
    }

    #[test]
    fn principal_value_matches_symmetric_form() {
        // pv ∫ g(u)/(t-u) du = ∫_0^∞ (g(t-s) - g(t+s)) / s ds, which has a bounded integrand.
        let m = Mollifier::new(0, 1.0).unwrap();
        for d in 0..2 {
            for &t in &[-2.0f64, -0.999, -0.5, 0.0, 0.123, 0.8, 1.0, 3.5] {
                let oracle = oracle_integral(
                    |s| {
                        if s == 0.0 {
                            -2.0 * m.derivative(d + 1, t)
                        } else {
                            (m.derivative(d, t - s) - m.derivative(d, t + s)) / s
                        }
                    },
                    0.0,
                    t.abs() + 1.0,
                );
                let got = m.pv_transform(d, t);
                assert!((got - oracle).abs() < 1e-9, "d={d} t={t} got={got} oracle={oracle}");
            }
        }
    }

    #[test]
    fn shared_instances_are_reused() {
        let a = Mollifier::shared(3, 1.0).unwrap();
        let b = Mollifier::shared(3, 1.0).unwrap();
        assert!(Arc::ptr_eq(&a.0, &b.0));
        assert_eq!(a, Mollifier::new(3, 1.0).unwrap());
    }
}
