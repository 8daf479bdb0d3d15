//! Charts, compact boxes, ε-grids and representatives.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mollifier::{embed_distribution, DistributionSpec, Mollifier};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq)]
pub enum ChartKind {
    /// Open box `Π (lower_i, upper_i)`; bounds may be infinite.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Flat torus `[0, 2π)²` with periodic identification.
    Torus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    kind: ChartKind,
    names: Vec<String>,
}

impl ChartDomain {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidBox("bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| a.is_nan() || b.is_nan() || a >= b) {
            return Err(Error::InvalidBox(format!("need lower < upper, got {lower:?} / {upper:?}")));
        }
        let names = default_names(lower.len());
        Ok(Self { kind: ChartKind::Box { lower, upper }, names })
    }

    /// All of `R^n`.
    pub fn euclidean(n: usize) -> Self {
        Self::boxed(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n]).expect("valid unbounded box")
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::boxed(vec![a], vec![b])
    }

    pub fn torus() -> Self {
        Self { kind: ChartKind::Torus, names: vec!["alpha".into(), "beta".into()] }
    }

    pub fn with_names(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::InvalidBox(format!("{} names for a {}-dimensional chart", names.len(), self.dim())));
        }
        self.names = names.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, ChartKind::Torus)
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ChartKind::Box { lower, .. } => lower.len(),
            ChartKind::Torus => 2,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            ChartKind::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(v, (a, b))| v > a && v < b),
            ChartKind::Torus => true,
        }
    }

    /// True when the closed box lies strictly inside the chart.
    pub fn contains_box(&self, k: &CompactBox) -> bool {
        if k.dim() != self.dim() {
            return false;
        }
        match &self.kind {
            ChartKind::Box { lower, upper } => (0..k.dim()).all(|i| k.lower[i] > lower[i] && k.upper[i] < upper[i]),
            ChartKind::Torus => true,
        }
    }

    /// Coordinates used for evaluation: torus angles wrapped to `[-π, π)`.
    pub fn eval_coords(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            ChartKind::Torus => x.iter().map(|&v| wrap_centered(v)).collect(),
            _ => x.to_vec(),
        }
    }

    /// Canonical reported coordinates: torus angles in `[0, 2π)`.
    pub fn canonical(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            ChartKind::Torus => x.iter().map(|&v| wrap_positive(v)).collect(),
            _ => x.to_vec(),
        }
    }

    /// Chart distance: Euclidean on boxes, flat periodic on the torus.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let d = match self.kind {
                    ChartKind::Torus => wrap_centered(x - y),
                    _ => x - y,
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// Angle in `[0, 2π)`.
pub fn wrap_positive(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Angle in `[-π, π)`.
pub fn wrap_centered(a: f64) -> f64 {
    wrap_positive(a + PI) - PI
}

/// Closed box `Π [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CompactBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CompactBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidBox("bounds must be non-empty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !a.is_finite() || !b.is_finite() || a > b) {
            return Err(Error::InvalidBox(format!("need finite lower <= upper, got {lower:?} / {upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn cube(n: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a; n], vec![b; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &CompactBox) -> CompactBox {
        CompactBox {
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a.min(*b)).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Tensor lattice with `per_axis` points per axis (endpoints included).
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|i| linspace(self.lower[i], self.upper[i], per_axis)).collect();
        tensor(&axes)
    }
}

/// `n` equally spaced points on `[a, b]` (just `a` when `a == b` or `n < 2`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 || a == b {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { b } else { a + i as f64 * h }).collect()
}

/// Cartesian product of per-axis samples.
pub fn tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &v in axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Geometric grid `ε_j = ε_max r^j`, `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonGrid {
    eps_max: f64,
    ratio: f64,
    count: usize,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        Self { eps_max: 0.5, ratio: 0.7, count: 24 }
    }
}

impl EpsilonGrid {
    pub const MIN_COUNT: usize = 8;

    pub fn new(eps_max: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(eps_max > 0.0 && eps_max <= 1.0) {
            return Err(Error::Grid(format!("eps_max = {eps_max} must lie in (0, 1]")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Grid(format!("ratio = {ratio} must lie in (0, 1)")));
        }
        if count < Self::MIN_COUNT {
            return Err(Error::Grid(format!("count = {count} must be at least {}", Self::MIN_COUNT)));
        }
        if eps_max * ratio.powi(count as i32 - 1) <= f64::MIN_POSITIVE {
            return Err(Error::Grid("grid underflows".into()));
        }
        Ok(Self { eps_max, ratio, count })
    }

    /// Parses `eps_max,ratio,count`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Grid(format!("expected eps_max,ratio,count, got '{s}'")));
        }
        let eps_max = parts[0].parse::<f64>().map_err(|_| Error::Grid(format!("bad eps_max '{}'", parts[0])))?;
        let ratio = parts[1].parse::<f64>().map_err(|_| Error::Grid(format!("bad ratio '{}'", parts[1])))?;
        let count = parts[2].parse::<usize>().map_err(|_| Error::Grid(format!("bad count '{}'", parts[2])))?;
        Self::new(eps_max, ratio, count)
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn get(&self, j: usize) -> f64 {
        self.eps_max * self.ratio.powi(j as i32)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.get(j)).collect()
    }

    pub fn smallest(&self) -> f64 {
        self.get(self.count - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    /// Square `n×n`, stored row-major.
    Matrix(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(n) => n * n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One ε-net `(u_ε)_ε` on a chart: scalar, vector or square matrix of
/// expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Representative {
    components: Vec<Expr>,
    shape: Shape,
    domain: ChartDomain,
}

impl Representative {
    pub fn new(components: Vec<Expr>, shape: Shape, domain: ChartDomain) -> Result<Self> {
        if components.len() != shape.len() || components.is_empty() {
            return Err(Error::Shape(format!("{} components for shape {shape:?}", components.len())));
        }
        if let Some(e) = components.iter().find(|e| e.arity() > domain.dim()) {
            return Err(Error::Shape(format!("{e} uses coordinates beyond the {}-dimensional chart", domain.dim())));
        }
        Ok(Self { components, shape, domain })
    }

    pub fn scalar(e: Expr, domain: ChartDomain) -> Result<Self> {
        Self::new(vec![e], Shape::Scalar, domain)
    }

    pub fn vector(es: Vec<Expr>, domain: ChartDomain) -> Result<Self> {
        let n = es.len();
        Self::new(es, Shape::Vector(n), domain)
    }

    pub fn matrix(n: usize, es: Vec<Expr>, domain: ChartDomain) -> Result<Self> {
        Self::new(es, Shape::Matrix(n), domain)
    }

    /// `ι(w)` on a one-dimensional chart.
    pub fn iota(w: &DistributionSpec, m: &Mollifier, domain: ChartDomain) -> Result<Self> {
        Self::scalar(embed_distribution(w, m)?, domain)
    }

    /// `σ(f)`.
    pub fn sigma(f: Expr, domain: ChartDomain) -> Result<Self> {
        Self::scalar(f, domain)
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    /// The single component of a scalar net.
    pub fn expr(&self) -> &Expr {
        &self.components[0]
    }

    pub fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_eps(eps)?;
        if !self.domain.contains(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
        let y = self.domain.eval_coords(x);
        Ok(self.components.iter().map(|e| e.eval(eps, &y)).collect())
    }

    pub fn eval_scalar(&self, eps: f64, x: &[f64]) -> Result<f64> {
        if self.shape != Shape::Scalar {
            return Err(Error::Shape("scalar evaluation of a non-scalar net".into()));
        }
        Ok(self.eval(eps, x)?[0])
    }

    /// `∂^α` componentwise.
    pub fn derive(&self, alpha: &[usize]) -> Representative {
        self.map(|e| e.derive_multi(alpha))
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Representative {
        Representative { components: self.components.iter().map(f).collect(), shape: self.shape, domain: self.domain.clone() }
    }

    fn zip(&self, other: &Representative, f: impl Fn(&Expr, &Expr) -> Result<Expr>) -> Result<Representative> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(format!("{:?} vs {:?}", self.domain.kind, other.domain.kind)));
        }
        let components = match (self.shape, other.shape) {
            (a, b) if a == b => self.components.iter().zip(&other.components).map(|(x, y)| f(x, y)).collect::<Result<_>>()?,
            (Shape::Scalar, _) => other.components.iter().map(|y| f(&self.components[0], y)).collect::<Result<_>>()?,
            (_, Shape::Scalar) => self.components.iter().map(|x| f(x, &other.components[0])).collect::<Result<_>>()?,
            (a, b) => return Err(Error::Shape(format!("incompatible shapes {a:?} and {b:?}"))),
        };
        let shape = if self.shape == Shape::Scalar { other.shape } else { self.shape };
        Ok(Representative { components, shape, domain: self.domain.clone() })
    }

    pub fn add(&self, other: &Representative) -> Result<Representative> {
        self.zip(other, |a, b| Ok(a + b))
    }

    pub fn sub(&self, other: &Representative) -> Result<Representative> {
        self.zip(other, |a, b| Ok(a - b))
    }

    /// Componentwise product (a scalar factor broadcasts).
    pub fn mul(&self, other: &Representative) -> Result<Representative> {
        self.zip(other, |a, b| Ok(a * b))
    }

    /// Componentwise quotient; every denominator needs a nonvanishing certificate.
    pub fn div(&self, other: &Representative) -> Result<Representative> {
        self.zip(other, |a, b| a.div(b))
    }

    pub fn scale(&self, c: f64) -> Representative {
        self.map(|e| e.scale(c))
    }

    /// `v ∘ u` for `u` mapping into `self`'s chart; the range check is done
    /// by [`crate::flows::c_bounded`] on `k` along `grid`.
    pub fn compose(&self, u: &Representative, k: &CompactBox, grid: &EpsilonGrid) -> Result<Representative> {
        let n = self.domain.dim();
        if u.components.len() != n {
            return Err(Error::Composition(format!("inner map has {} components, outer chart has dimension {n}", u.components.len())));
        }
        let report = crate::flows::c_bounded(u, k, grid)?;
        let Some(image) = report.bound else {
            return Err(Error::Composition("inner map is not c-bounded".into()));
        };
        if !self.domain.contains_box(&image) {
            return Err(Error::Composition(format!(
                "image box {:?} / {:?} leaves the outer chart",
                image.lower, image.upper
            )));
        }
        let inner = u.components.clone();
        let components = self.components.iter().map(|e| e.substitute(&inner)).collect();
        Representative::new(components, self.shape, u.domain.clone())
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(eps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_geometric() {
        let g = EpsilonGrid::default();
        let v = g.values();
        assert_eq!(v.len(), 24);
        assert_eq!(v[0], 0.5);
        assert!(v.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert!(EpsilonGrid::new(1.5, 0.7, 24).is_err());
        assert!(EpsilonGrid::new(0.5, 0.7, 4).is_err());
        assert_eq!(EpsilonGrid::parse("0.5, 0.7, 24").unwrap(), g);
    }

    #[test]
    fn evaluation_checks_inputs() {
        let d = ChartDomain::interval(-5.0, 5.0).unwrap();
        let x = Expr::var(0);
        let r = Representative::sigma(&x * &x, d).unwrap();
        assert_eq!(r.eval_scalar(0.5, &[3.0]).unwrap(), 9.0);
        assert!(matches!(r.eval(0.5, &[6.0]), Err(Error::Domain { .. })));
        assert!(matches!(r.eval(0.0, &[1.0]), Err(Error::Parameter(_))));
        assert!(matches!(r.eval(1.5, &[1.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn torus_wrapping() {
        let t = ChartDomain::torus();
        assert!((wrap_positive(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((wrap_centered(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((t.distance(&[0.1, 0.0], &[TAU - 0.1, 0.0]) - 0.2).abs() < 1e-12);
        let c = t.canonical(&[-0.25, 7.0]);
        assert!(c.iter().all(|v| (0.0..TAU).contains(v)));
    }

    #[test]
    fn shapes_and_domains_must_agree() {
        let d1 = ChartDomain::interval(-1.0, 1.0).unwrap();
        let d2 = ChartDomain::interval(-2.0, 2.0).unwrap();
        let a = Representative::sigma(Expr::var(0), d1.clone()).unwrap();
        let b = Representative::sigma(Expr::var(0), d2).unwrap();
        assert!(matches!(a.add(&b), Err(Error::DomainMismatch(_))));
        assert!(Representative::scalar(Expr::var(1), d1.clone()).is_err());
        let v = Representative::vector(vec![Expr::var(0), Expr::one()], d1.clone()).unwrap();
        let scaled = a.mul(&v).unwrap();
        assert_eq!(scaled.shape(), Shape::Vector(2));
        assert!(a.div(&a).is_err());
    }

    #[test]
    fn lattice_and_tensor() {
        let k = CompactBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let pts = k.lattice(3);
        assert_eq!(pts.len(), 9);
        assert!(pts.iter().all(|p| k.contains(p)));
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
