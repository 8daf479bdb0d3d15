//! The standard C^∞ bump `b(s) = exp(-1/(1-s²))` on (-1, 1) and its derivatives.
//!
//! Derivatives have the closed form `b^(m)(s) = b(s) Q_m(s) / (1-s²)^(2m)`
//! with `Q_0 = 1` and
//! `Q_{m+1} = -2s Q_m + (1-s²)² Q_m' + 4ms(1-s²) Q_m`.

use once_cell::sync::Lazy;
use std::sync::RwLock;

/// Ascending-coefficient polynomial helpers.
pub(crate) mod poly {
    pub fn eval(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    pub fn derivative(c: &[f64]) -> Vec<f64> {
        if c.len() <= 1 {
            return vec![0.0];
        }
        c.iter().enumerate().skip(1).map(|(i, &a)| i as f64 * a).collect()
    }

    pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len().max(b.len())];
        for (i, &x) in a.iter().enumerate() {
            out[i] += x;
        }
        for (i, &y) in b.iter().enumerate() {
            out[i] += y;
        }
        out
    }
}

static Q_TABLE: Lazy<RwLock<Vec<Vec<f64>>>> = Lazy::new(|| RwLock::new(vec![vec![1.0]]));

fn q_poly(m: usize) -> Vec<f64> {
    {
        let table = Q_TABLE.read().expect("bump table poisoned");
        if let Some(q) = table.get(m) {
            return q.clone();
        }
    }
    let mut table = Q_TABLE.write().expect("bump table poisoned");
    while table.len() <= m {
        let k = table.len() - 1;
        let q = &table[k];
        let one_minus_s2 = [1.0, 0.0, -1.0];
        let sq = poly::mul(&one_minus_s2, &one_minus_s2);
        let a = poly::mul(&[0.0, -2.0], q);
        let b = poly::mul(&sq, &poly::derivative(q));
        let c = poly::mul(&poly::mul(&[0.0, 4.0 * k as f64], &one_minus_s2), q);
        let next = poly::add(&poly::add(&a, &b), &c);
        table.push(next);
    }
    table[m].clone()
}

/// `m`-th derivative of the bump at `s`.
pub fn bump_derivative(m: usize, s: f64) -> f64 {
    let w = 1.0 - s * s;
    if !(w > 0.0) {
        return 0.0;
    }
    let exponent = -1.0 / w - 2.0 * m as f64 * w.ln();
    if exponent < -745.0 {
        return 0.0;
    }
    if m == 0 {
        return (-1.0 / w).exp();
    }
    poly::eval(&q_poly(m), s) * exponent.exp()
}
