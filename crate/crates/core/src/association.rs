//! Pairing of nets with test functions, distributional limits and
//! association.

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{multi_indices, sup_on_compact, Verdict};
use crate::config::Tolerances;
use crate::domain::{linspace, tensor, ChartDomain, CompactBox, EpsilonGrid, Representative, Shape};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mollifier::{embed_distribution, DistributionSpec, Mollifier};
use crate::quadrature::adaptive;

/// Absolute tolerance of every pairing quadrature.
pub const PAIR_ABS_TOL: f64 = 1e-10;

/// Version of [`battery`]; bump whenever its members change.
pub const BATTERY_VERSION: u32 = 1;

/// `ck_associated` threshold on the smallest-ε sup.
pub const CK_THRESHOLD: f64 = 1e-4;

const CAUCHY_TAIL: usize = 5;

/// A smooth function vanishing outside `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    expr: Expr,
    support: CompactBox,
    label: String,
}

impl TestFunction {
    /// `(1 + tilt·s)·b(s)` with `s = (x - center)/radius` and `b` the
    /// standard bump on `(-1, 1)`.
    pub fn bump(center: f64, radius: f64, tilt: f64) -> Result<Self> {
        if !(radius > 0.0 && center.is_finite() && tilt.is_finite() && radius.is_finite()) {
            return Err(Error::InvalidBox(format!("bad test-function parameters ({center}, {radius}, {tilt})")));
        }
        let s = (Expr::var(0) - center) * (1.0 / radius);
        let expr = Expr::poly(vec![1.0, tilt], s.clone()) * Expr::bump(0, s);
        Ok(Self {
            expr,
            support: CompactBox::interval(center - radius, center + radius)?,
            label: format!("bump(c={center:?},r={radius:?},tilt={tilt:?})"),
        })
    }

    /// Tensor product of one-dimensional test functions.
    pub fn product(factors: &[TestFunction]) -> Result<Self> {
        if factors.iter().any(|f| f.dim() != 1) {
            return Err(Error::Shape("tensor factors must be one-dimensional".into()));
        }
        let shifted: Vec<Expr> = factors.iter().enumerate().map(|(i, f)| f.expr.substitute(&[Expr::var(i)])).collect();
        let lower = factors.iter().map(|f| f.support.lower[0]).collect();
        let upper = factors.iter().map(|f| f.support.upper[0]).collect();
        let label = factors.iter().map(|f| f.label.as_str()).collect::<Vec<_>>().join(" x ");
        Ok(Self { expr: Expr::product(shifted), support: CompactBox::new(lower, upper)?, label })
    }

    /// A general test function; the support claim is checked on a sample
    /// just outside `support`.
    pub fn new(expr: Expr, support: CompactBox, label: &str) -> Result<Self> {
        if expr.depends_on_eps() {
            return Err(Error::Shape("test functions do not depend on eps".into()));
        }
        if expr.arity() > support.dim() {
            return Err(Error::Shape("test function uses more coordinates than its support box".into()));
        }
        let n = support.dim();
        let outer = CompactBox::new(
            support.lower.iter().zip(&support.upper).map(|(a, b)| a - 0.5 * (b - a)).collect(),
            support.lower.iter().zip(&support.upper).map(|(a, b)| b + 0.5 * (b - a)).collect(),
        )?;
        for p in outer.lattice(if n <= 2 { 41 } else { 9 }) {
            if !support.contains(&p) && expr.eval(1.0, &p) != 0.0 {
                return Err(Error::Support { eps: 1.0 });
            }
        }
        Ok(Self { expr, support, label: label.to_string() })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn support(&self) -> &CompactBox {
        &self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.expr.eval(1.0, x)
    }
}

/// The fixed twelve-member battery on `[-2, 2]` (version [`BATTERY_VERSION`]).
pub fn battery() -> Vec<TestFunction> {
    const MEMBERS: [(f64, f64, f64); 12] = [
        (0.0, 0.5, 0.0),
        (0.0, 1.0, 0.5),
        (0.2, 0.6, 0.0),
        (-0.3, 0.8, -0.3),
        (0.5, 1.5, 0.0),
        (-0.7, 1.2, 0.5),
        (1.0, 0.9, 0.0),
        (-1.2, 0.8, -0.3),
        (1.5, 0.5, 0.5),
        (-1.5, 0.5, 0.0),
        (0.1, 1.9, -0.3),
        (0.35, 0.4, 0.5),
    ];
    MEMBERS.iter().map(|&(c, r, t)| TestFunction::bump(c, r, t).expect("valid battery member")).collect()
}

/// Battery lifted to `n` coordinates by tensor products with the first member.
pub fn battery_nd(n: usize) -> Vec<TestFunction> {
    let base = battery();
    if n == 1 {
        return base;
    }
    base.iter()
        .map(|f| {
            let mut factors = vec![f.clone()];
            factors.extend(std::iter::repeat_n(base[1].clone(), n - 1));
            TestFunction::product(&factors).expect("one-dimensional factors")
        })
        .collect()
}

fn integrate_box<F: Fn(&[f64]) -> f64>(f: &F, k: &CompactBox, breaks: &[Vec<f64>], fixed: &mut Vec<f64>) -> Result<f64> {
    let i = fixed.len();
    let n = k.dim();
    let (a, b) = (k.lower[i], k.upper[i]);
    if i + 1 == n {
        let r = adaptive(
            |x| {
                fixed.push(x);
                let v = f(fixed);
                fixed.pop();
                v
            },
            a,
            b,
            &breaks[i],
            PAIR_ABS_TOL,
            0.0,
        )?;
        return Ok(r.value);
    }
    let mut err = None;
    let r = adaptive(
        |x| {
            fixed.push(x);
            let v = integrate_box(f, k, breaks, fixed);
            fixed.pop();
            match v {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        a,
        b,
        &breaks[i],
        PAIR_ABS_TOL,
        0.0,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// `∫ u_ε φ dx`; kernel windows at this ε become quadrature breakpoints so
/// that the `O(ε)` features are resolved at their own scale.
pub fn pair(rep: &Representative, phi: &TestFunction, eps: f64) -> Result<f64> {
    crate::domain::check_eps(eps)?;
    if rep.shape() != Shape::Scalar {
        return Err(Error::Shape("pairing needs a scalar net".into()));
    }
    let dom = rep.domain();
    if phi.dim() != dom.dim() {
        return Err(Error::DomainMismatch(format!("test function on {} coordinates, chart has {}", phi.dim(), dom.dim())));
    }
    if !dom.contains_box(phi.support()) {
        return Err(Error::InvalidBox("test-function support is not inside the chart".into()));
    }
    let u = rep.expr();
    let mut breaks = vec![Vec::new(); dom.dim()];
    for w in u.kernel_windows(eps) {
        if w.var < breaks.len() {
            breaks[w.var].extend([w.lo, 0.5 * (w.lo + w.hi), w.hi]);
        }
    }
    let integrand = |x: &[f64]| {
        let p = phi.eval(x);
        if p == 0.0 {
            0.0
        } else {
            p * u.eval(eps, &dom.eval_coords(x))
        }
    };
    integrate_box(&integrand, phi.support(), &breaks, &mut Vec::with_capacity(dom.dim()))
}

#[derive(Debug, Clone, Serialize)]
pub struct AssociatedLimit {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    /// Aitken-accelerated sequence when the differences were geometric.
    pub accelerated: Option<Vec<f64>>,
    pub limit: f64,
    pub converged: bool,
    /// Spread of the last five values of the sequence used.
    pub tail_spread: f64,
}

fn is_geometric(v: &[f64]) -> bool {
    if v.len() < 8 {
        return false;
    }
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &d[d.len() - 6..];
    if tail.contains(&0.0) {
        return false;
    }
    let q: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    mean.abs() < 0.95 && q.iter().all(|x| (x - mean).abs() <= 0.1 * mean.abs())
}

fn aitken(v: &[f64]) -> Vec<f64> {
    v.windows(3)
        .map(|w| {
            let den = w[2] - 2.0 * w[1] + w[0];
            if den == 0.0 {
                w[2]
            } else {
                w[2] - (w[2] - w[1]).powi(2) / den
            }
        })
        .collect()
}

fn spread(v: &[f64]) -> f64 {
    let tail = &v[v.len().saturating_sub(CAUCHY_TAIL)..];
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Limit of `ε_j ↦ pair(u, φ, ε_j)` from the Cauchy tail of the sequence.
pub fn limit_of(eps: Vec<f64>, values: Vec<f64>, tol: &Tolerances) -> AssociatedLimit {
    let accelerated = is_geometric(&values).then(|| aitken(&values));
    let used = accelerated.as_deref().unwrap_or(&values);
    let tail_spread = spread(used);
    let converged = used.len() >= CAUCHY_TAIL && tail_spread <= tol.tol_assoc && used.iter().all(|v| v.is_finite());
    let limit = *used.last().unwrap_or(&f64::NAN);
    AssociatedLimit { eps, values, accelerated, limit, converged, tail_spread }
}

pub fn associated_limit(rep: &Representative, phi: &TestFunction, grid: &EpsilonGrid, tol: &Tolerances) -> Result<AssociatedLimit> {
    let eps = grid.values();
    let values = eps.par_iter().map(|&e| pair(rep, phi, e)).collect::<Result<Vec<_>>>()?;
    Ok(limit_of(eps, values, tol))
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberLimit {
    pub label: String,
    pub limit: AssociatedLimit,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssociationReport {
    pub verdict: Verdict,
    pub battery_version: u32,
    pub members: Vec<MemberLimit>,
}

/// `u ≈ v` on the battery: the pairing of `u - v` tends to 0 for every member.
pub fn is_associated(
    u: &Representative,
    v: &Representative,
    battery: &[TestFunction],
    grid: &EpsilonGrid,
    tol: &Tolerances,
) -> Result<AssociationReport> {
    let diff = u.sub(v)?;
    let members = battery
        .iter()
        .map(|phi| {
            let limit = associated_limit(&diff, phi, grid, tol)?;
            let verdict = if !limit.converged {
                Verdict::Inconclusive
            } else if limit.limit.abs() <= tol.tol_assoc {
                Verdict::Yes
            } else {
                Verdict::No
            };
            Ok(MemberLimit { label: phi.label().to_string(), limit, verdict })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = if members.iter().any(|m| m.verdict == Verdict::No) {
        Verdict::No
    } else if members.iter().all(|m| m.verdict == Verdict::Yes) {
        Verdict::Yes
    } else {
        Verdict::Inconclusive
    };
    Ok(AssociationReport { verdict, battery_version: BATTERY_VERSION, members })
}

#[derive(Debug, Clone, Serialize)]
pub struct CkReport {
    pub verdict: Verdict,
    /// `(α, sup_K |∂^α(u_ε - v_ε)|)` per inspected multi-index.
    pub sups: Vec<(Vec<usize>, Vec<f64>)>,
}

/// `C^k`-association on `K`: every `sup_K |∂^α(u_ε - v_ε)|`, `|α| ≤ k`,
/// ends below [`CK_THRESHOLD`] with a non-increasing tail.
pub fn ck_associated(u: &Representative, v: &Representative, k: usize, kbox: &CompactBox, grid: &EpsilonGrid) -> Result<CkReport> {
    let diff = u.sub(v)?;
    let mut sups = Vec::new();
    let mut verdict = Verdict::Yes;
    for alpha in multi_indices(kbox.dim(), k) {
        let s = sup_on_compact(&diff, kbox, &alpha, grid)?;
        let tail = &s[s.len().saturating_sub(CAUCHY_TAIL)..];
        let last = *tail.last().expect("non-empty grid");
        let monotone = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300);
        let a = if last < CK_THRESHOLD && monotone {
            Verdict::Yes
        } else if last >= CK_THRESHOLD && !(last < 0.9 * tail[0]) {
            Verdict::No
        } else {
            Verdict::Inconclusive
        };
        verdict = match (verdict, a) {
            (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Yes,
        };
        sups.push((alpha, s));
    }
    Ok(CkReport { verdict, sups })
}

/// The two bracketings of `δ · x · vp(1/x)` against one test function.
#[derive(Debug, Clone, Serialize)]
pub struct NonAssociativity {
    pub label: String,
    pub phi_at_zero: f64,
    /// `x·ι(δ)` paired: tends to 0, so `x·δ ≈ 0`.
    pub x_delta: AssociatedLimit,
    /// `x·ι(vp) - 1` paired: tends to 0, so `x·vp(1/x) ≈ 1`.
    pub x_pv_minus_one: AssociatedLimit,
    /// `(x·δ)·vp` with the inner product replaced by its associated value 0.
    pub left: f64,
    /// `δ·(x·vp)` with the inner product replaced by its associated value 1.
    pub right: AssociatedLimit,
    /// The product of the three nets in the algebra.
    pub product: AssociatedLimit,
}

pub fn non_associativity(m: &Mollifier, phi: &TestFunction, grid: &EpsilonGrid, tol: &Tolerances) -> Result<NonAssociativity> {
    let dom = ChartDomain::interval(-3.0, 3.0)?;
    let x = Representative::sigma(Expr::var(0), dom.clone())?;
    let delta = Representative::iota(&DistributionSpec::Delta(0), m, dom.clone())?;
    let pv = Representative::iota(&DistributionSpec::PvInv, m, dom.clone())?;
    let one = Representative::sigma(Expr::one(), dom)?;
    let x_delta = x.mul(&delta)?;
    let x_pv = x.mul(&pv)?;
    Ok(NonAssociativity {
        label: phi.label().to_string(),
        phi_at_zero: phi.eval(&[0.0]),
        x_delta: associated_limit(&x_delta, phi, grid, tol)?,
        x_pv_minus_one: associated_limit(&x_pv.sub(&one)?, phi, grid, tol)?,
        left: 0.0,
        right: associated_limit(&delta.mul(&one)?, phi, grid, tol)?,
        product: associated_limit(&x_delta.mul(&pv)?, phi, grid, tol)?,
    })
}

/// Pairing table helper: `pair(u, φ, ε_j)` for each member and grid value.
pub fn pairing_table(rep: &Representative, battery: &[TestFunction], grid: &EpsilonGrid) -> Result<Vec<Vec<f64>>> {
    battery
        .iter()
        .map(|phi| grid.values().par_iter().map(|&e| pair(rep, phi, e)).collect::<Result<Vec<_>>>())
        .collect()
}

/// Embeds `w` on an interval chart wide enough for the battery.
pub fn embed_on_battery_chart(w: &DistributionSpec, m: &Mollifier) -> Result<Representative> {
    let dom = ChartDomain::interval(-3.0, 3.0)?;
    Representative::scalar(embed_distribution(w, m)?, dom)
}

/// Sample points on a test-function support (for CSV emission).
pub fn support_samples(phi: &TestFunction, per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> =
        (0..phi.dim()).map(|i| linspace(phi.support().lower[i], phi.support().upper[i], per_axis)).collect();
    tensor(&axes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    fn chart() -> ChartDomain {
        ChartDomain::interval(-3.0, 3.0).unwrap()
    }

    #[test]
    fn battery_is_fixed_and_supported() {
        let b = battery();
        assert_eq!(b.len(), 12);
        assert_eq!(BATTERY_VERSION, 1);
        for phi in &b {
            let s = phi.support();
            assert_eq!(phi.eval(&[s.lower[0]]), 0.0);
            assert_eq!(phi.eval(&[s.upper[0] + 0.1]), 0.0);
            assert!(CompactBox::interval(-2.0, 2.0).unwrap().contains(&s.lower) && s.upper[0] <= 2.0);
        }
        assert!(TestFunction::new(Expr::var(0).sin(), CompactBox::interval(0.0, 1.0).unwrap(), "sin").is_err());
    }

    #[test]
    fn smooth_pairing_matches_direct_quadrature() {
        let phi = TestFunction::bump(0.2, 0.7, 0.5).unwrap();
        let f = Representative::sigma(Expr::var(0).cos(), chart()).unwrap();
        let got = pair(&f, &phi, 0.3).unwrap();
        let oracle = GaussLegendre::new(40).composite(-0.5, 0.9, 64, |x| x.cos() * phi.eval(&[x]));
        assert!((got - oracle).abs() < 1e-10);
        assert_eq!(pair(&f, &phi, 0.01).unwrap(), got);
    }

    #[test]
    fn delta_pairing_tends_to_point_value() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let d = embed_on_battery_chart(&DistributionSpec::Delta(0), &m).unwrap();
        let phi = TestFunction::bump(0.1, 0.6, 0.3).unwrap();
        let r = associated_limit(&d, &phi, &EpsilonGrid::default(), &Tolerances::default()).unwrap();
        assert!(r.converged);
        assert!((r.limit - phi.eval(&[0.0])).abs() < 1e-6);
    }

    #[test]
    fn x_delta_pairing_matches_substitution_oracle() {
        // ε ∫ y ρ(y) φ(ε y) dy
        let m = Mollifier::shared(0, 1.0).unwrap();
        let d = embed_on_battery_chart(&DistributionSpec::Delta(0), &m).unwrap();
        let xd = Representative::sigma(Expr::var(0), chart()).unwrap().mul(&d).unwrap();
        let phi = TestFunction::bump(0.1, 0.6, 0.3).unwrap();
        for &eps in &[0.2, 0.01, 1e-3] {
            let oracle = eps * GaussLegendre::new(40).composite(-1.0, 1.0, 16, |y| y * m.value(y) * phi.eval(&[eps * y]));
            assert!((pair(&xd, &phi, eps).unwrap() - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn ck_association_examples() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let g = EpsilonGrid::default();
        let k = CompactBox::interval(-1.0, 1.0).unwrap();
        let h = embed_on_battery_chart(&DistributionSpec::Heaviside, &m).unwrap();
        let half = Representative::sigma(Expr::constant(0.5), chart()).unwrap();
        assert_eq!(ck_associated(&h, &half, 0, &k, &g).unwrap().verdict, Verdict::No);
        assert_eq!(ck_associated(&h, &h, 2, &k, &g).unwrap().verdict, Verdict::Yes);
    }

    #[test]
    fn aitken_removes_geometric_error() {
        let v: Vec<f64> = (0..24).map(|j| 2.0 + 0.3 * 0.7f64.powi(j)).collect();
        let r = limit_of(vec![0.0; 24], v, &Tolerances::default());
        assert!(r.accelerated.is_some() && r.converged);
        assert!((r.limit - 2.0).abs() < 1e-12);
    }
}
