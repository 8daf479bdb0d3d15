//! Generalized vector fields, their per-ε flows, c-boundedness and
//! equivalence of map-valued nets, and the torus example with a pulse in
//! the second component.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{fit_order, sup_at, OrderEstimate, Verdict};
use crate::config::Tolerances;
use crate::domain::{linspace, tensor, wrap_centered, ChartDomain, CompactBox, EpsilonGrid, Representative, Shape};
use crate::error::{Error, Result};
use crate::expr::{Expr, KernelWindow};
use crate::mollifier::Mollifier;
use crate::ode::{integrate, OdeOptions, Trajectory};

const LATTICE_LOW_DIM: usize = 64;
const LATTICE_HIGH_DIM: usize = 16;
const BOUND_MARGIN: f64 = 0.1;

fn lattice_for(k: &CompactBox) -> Vec<Vec<f64>> {
    k.lattice(if k.dim() <= 2 { LATTICE_LOW_DIM } else { LATTICE_HIGH_DIM })
}

/// Step cap near kernel windows: a step may run up to a window edge, and
/// inside a window it is at most a twentieth of the window width.
pub(crate) fn window_cap(windows: &[KernelWindow], y: &[f64], dy: &[f64], periodic: bool) -> f64 {
    let mut cap = f64::INFINITY;
    for w in windows {
        let rate = dy.get(w.var).copied().unwrap_or(0.0).abs();
        if rate == 0.0 || !rate.is_finite() {
            continue;
        }
        let mut pos = y[w.var];
        if periodic {
            pos = wrap_centered(pos);
        }
        let fine = w.width() / (20.0 * rate);
        let dist = if pos < w.lo {
            w.lo - pos
        } else if pos > w.hi {
            pos - w.hi
        } else {
            0.0
        };
        // on the torus the window is also reached from the other side
        let dist = if periodic { dist.min((TAU - (w.hi - w.lo) - dist).max(0.0)) } else { dist };
        cap = cap.min(if dist > 0.0 { dist / rate + fine } else { fine });
    }
    cap
}

/// A vector field `(ξ_ε)_ε` on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    rep: Representative,
}

impl VectorField {
    pub fn new(rep: Representative) -> Result<Self> {
        let n = rep.domain().dim();
        if rep.shape() != Shape::Vector(n) {
            return Err(Error::Shape(format!("vector field on a {n}-dimensional chart needs {n} components")));
        }
        Ok(Self { rep })
    }

    pub fn from_exprs(components: Vec<Expr>, domain: ChartDomain) -> Result<Self> {
        Self::new(Representative::vector(components, domain)?)
    }

    pub fn constant(c: &[f64], domain: ChartDomain) -> Result<Self> {
        Self::from_exprs(c.iter().map(|&v| Expr::constant(v)).collect(), domain)
    }

    /// `ξ_ε(α, β) = (1, 1 - ρ_{σ(ε)}(α))` on the torus with `σ(ε) = |ln ε|^{-1}`.
    pub fn torus_example(m: &Mollifier) -> Result<Self> {
        let l = torus_scale();
        let pulse = &l * Expr::kernel(m, 0, Expr::var(0) * &l);
        Self::from_exprs(vec![Expr::one(), Expr::one() - pulse], ChartDomain::torus())
    }

    pub fn rep(&self) -> &Representative {
        &self.rep
    }

    pub fn domain(&self) -> &ChartDomain {
        self.rep.domain()
    }

    pub fn negated(&self) -> VectorField {
        VectorField { rep: self.rep.scale(-1.0) }
    }

    pub fn eval(&self, eps: f64, x: &[f64]) -> Vec<f64> {
        let y = self.domain().eval_coords(x);
        self.rep.components().iter().map(|e| e.eval(eps, &y)).collect()
    }

    /// `Φ_ε(t, x0)` as a dense trajectory on `[0, t]`.
    pub fn trajectory(&self, eps: f64, t: f64, x0: &[f64], opts: &OdeOptions) -> Result<Trajectory> {
        crate::domain::check_eps(eps)?;
        let dom = self.domain();
        if !dom.contains(x0) {
            return Err(Error::Domain { point: x0.to_vec() });
        }
        let comps = self.rep.components();
        let windows: Vec<KernelWindow> = comps.iter().flat_map(|e| e.kernel_windows(eps)).collect();
        let torus = dom.is_torus();
        integrate(
            |_, y, dy| {
                let p = dom.eval_coords(y);
                for (d, e) in dy.iter_mut().zip(comps) {
                    *d = e.eval(eps, &p);
                }
            },
            0.0,
            x0,
            t,
            opts,
            |_, y, dy| window_cap(&windows, y, dy, torus),
            |y| torus || dom.contains(y),
        )
    }

    /// `Φ_ε(t, x0)` in canonical chart coordinates, with the truncation flag.
    pub fn flow(&self, eps: f64, t: f64, x0: &[f64], opts: &OdeOptions) -> Result<FlowPoint> {
        let tr = self.trajectory(eps, t, x0, opts)?;
        Ok(FlowPoint { point: self.domain().canonical(tr.last()), reached: tr.t_end(), truncated: tr.truncated.is_some() })
    }
}

/// `L = -ln ε = σ(ε)^{-1}`.
pub fn torus_scale() -> Expr {
    Expr::eps().ln().expect("eps is certified positive").neg()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowPoint {
    pub point: Vec<f64>,
    /// Time actually reached (differs from the request when truncated).
    pub reached: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub eps: Vec<f64>,
    /// `sup ‖ξ_ε‖` (max-norm over components).
    pub sup_field: Vec<f64>,
    /// `sup max_{i,j} |∂_j ξ^i_ε|`.
    pub sup_jacobian: Vec<f64>,
    /// Least-squares slope of `sup_field` against `|ln ε|`.
    pub c_log: f64,
    /// Least-squares slope of `sup_jacobian` against `|ln ε|²`.
    pub c_log_sq_jacobian: f64,
    /// Slope of `sup_jacobian` against `|ln ε|` (for comparison with the bound).
    pub c_log_jacobian: f64,
    /// Growth exponents `p` in `sup ≍ |ln ε|^p`.
    pub field_log_exponent: f64,
    pub jacobian_log_exponent: f64,
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn log_exponent(l: &[f64], y: &[f64]) -> f64 {
    if y.iter().any(|v| *v <= 0.0) {
        return f64::NAN;
    }
    let lx: Vec<f64> = l.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_slope(&lx, &ly)
}

/// Growth of `sup ‖ξ_ε‖` and of the first derivatives against `|ln ε|`.
/// Informative only.
pub fn check_flow_conditions(xi: &VectorField, k: &CompactBox, grid: &EpsilonGrid) -> Result<HypothesisReport> {
    let rep = xi.rep();
    if !rep.domain().contains_box(k) {
        return Err(Error::InvalidBox("sample box is not inside the chart".into()));
    }
    let n = rep.domain().dim();
    let comps = rep.components().to_vec();
    let jac: Vec<Expr> = comps.iter().flat_map(|e| (0..n).map(move |j| e.derive(j))).collect();
    let eps = grid.values();
    let sup_field: Vec<f64> = eps.par_iter().map(|&e| sup_at(rep, &comps, k, e)).collect();
    let sup_jacobian: Vec<f64> = eps.par_iter().map(|&e| sup_at(rep, &jac, k, e)).collect();
    let l: Vec<f64> = eps.iter().map(|e| e.ln().abs()).collect();
    let l2: Vec<f64> = l.iter().map(|v| v * v).collect();
    Ok(HypothesisReport {
        c_log: linear_slope(&l, &sup_field),
        c_log_sq_jacobian: linear_slope(&l2, &sup_jacobian),
        c_log_jacobian: linear_slope(&l, &sup_jacobian),
        field_log_exponent: log_exponent(&l, &sup_field),
        jacobian_log_exponent: log_exponent(&l, &sup_jacobian),
        eps,
        sup_field,
        sup_jacobian,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CBoundReport {
    pub verdict: Verdict,
    /// Exact hull of all sampled images.
    pub hull: Option<CompactBox>,
    /// Hull widened by 10% per axis.
    pub bound: Option<CompactBox>,
    /// `(ε, x, u_ε(x))` with the largest image at the smallest ε when escaping.
    pub witness: Option<(f64, Vec<f64>, Vec<f64>)>,
    pub radius: Vec<f64>,
    pub growth: Option<OrderEstimate>,
}

/// c-boundedness of a map-valued net on `K`: images of a dense sample stay
/// in one compact box for all grid ε.
pub fn c_bounded(u: &Representative, k: &CompactBox, grid: &EpsilonGrid) -> Result<CBoundReport> {
    c_bounded_into(u, k, grid, None)
}

/// As [`c_bounded`]; a torus target is compact and needs no check.
pub fn c_bounded_into(u: &Representative, k: &CompactBox, grid: &EpsilonGrid, target: Option<&ChartDomain>) -> Result<CBoundReport> {
    if !u.domain().contains_box(k) {
        return Err(Error::InvalidBox("K is not inside the chart".into()));
    }
    if let Some(t) = target {
        if t.is_torus() {
            let full = CompactBox::cube(2, 0.0, TAU)?;
            return Ok(CBoundReport {
                verdict: Verdict::Yes,
                hull: Some(full.clone()),
                bound: Some(full),
                witness: None,
                radius: Vec::new(),
                growth: None,
            });
        }
    }
    let m = u.components().len();
    let eps = grid.values();
    let mut base = lattice_for(k);
    let dom = u.domain();
    // kernel windows at each ε are folded in through per-ε samples
    let per_eps: Vec<Vec<(Vec<f64>, Vec<f64>)>> = eps
        .par_iter()
        .map(|&e| {
            let windows: Vec<KernelWindow> = u.components().iter().flat_map(|c| c.kernel_windows(e)).collect();
            let mut pts = base.clone();
            for w in &windows {
                if w.var < k.dim() {
                    let lo = w.lo.max(k.lower[w.var]);
                    let hi = w.hi.min(k.upper[w.var]);
                    if lo <= hi {
                        for v in linspace(lo, hi, 17) {
                            let mut p = k.center();
                            p[w.var] = v;
                            pts.push(p);
                        }
                    }
                }
            }
            pts.into_iter()
                .map(|p| {
                    let y = dom.eval_coords(&p);
                    let img: Vec<f64> = u.components().iter().map(|c| c.eval(e, &y)).collect();
                    (p, img)
                })
                .collect()
        })
        .collect();
    base.clear();
    let mut radius = Vec::with_capacity(eps.len());
    let mut lower = vec![f64::INFINITY; m];
    let mut upper = vec![f64::NEG_INFINITY; m];
    let mut finite = true;
    for samples in &per_eps {
        let mut r: f64 = 0.0;
        for (_, img) in samples {
            for i in 0..m {
                if !img[i].is_finite() {
                    finite = false;
                }
                lower[i] = lower[i].min(img[i]);
                upper[i] = upper[i].max(img[i]);
                r = r.max(img[i].abs());
            }
        }
        radius.push(r);
    }
    let witness = || {
        let last = per_eps.last().expect("non-empty grid");
        let (p, img) = last
            .iter()
            .max_by(|a, b| {
                let ra = a.1.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let rb = b.1.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                ra.total_cmp(&rb)
            })
            .expect("non-empty sample");
        Some((*eps.last().expect("non-empty grid"), p.clone(), img.clone()))
    };
    let tol = Tolerances::default();
    let growth = fit_order(&radius, grid, &tol)?;
    let escaping = !finite || (growth.slope.is_finite() && growth.slope < -tol.tol_slope);
    if escaping {
        return Ok(CBoundReport { verdict: Verdict::No, hull: None, bound: None, witness: witness(), radius, growth: Some(growth) });
    }
    let hull = CompactBox::new(lower.clone(), upper.clone())?;
    let bound = CompactBox::new(
        lower.iter().zip(&upper).map(|(a, b)| a - BOUND_MARGIN * (b - a)).collect(),
        lower.iter().zip(&upper).map(|(a, b)| b + BOUND_MARGIN * (b - a)).collect(),
    )?;
    Ok(CBoundReport { verdict: Verdict::Yes, hull: Some(hull), bound: Some(bound), witness: None, radius, growth: Some(growth) })
}

#[derive(Debug, Clone, Serialize)]
pub struct Equivalence {
    pub verdict: Verdict,
    pub order: Option<u32>,
    pub distances: Vec<f64>,
    pub estimate: OrderEstimate,
}

/// `sup_K d(u_ε, v_ε) = O(ε^m)` with `d` the distance of `target`.
pub fn map_equivalent(
    u: &Representative,
    v: &Representative,
    target: &ChartDomain,
    k: &CompactBox,
    m_max: u32,
    grid: &EpsilonGrid,
    tol: &Tolerances,
) -> Result<Equivalence> {
    if u.domain() != v.domain() {
        return Err(Error::DomainMismatch("maps are defined on different charts".into()));
    }
    if u.components().len() != v.components().len() || u.components().len() != target.dim() {
        return Err(Error::Shape("maps must have as many components as the target chart has coordinates".into()));
    }
    if !u.domain().contains_box(k) {
        return Err(Error::InvalidBox("K is not inside the chart".into()));
    }
    let pts = lattice_for(k);
    let dom = u.domain();
    let distances: Vec<f64> = grid
        .values()
        .par_iter()
        .map(|&e| {
            pts.iter()
                .map(|p| {
                    let y = dom.eval_coords(p);
                    let a: Vec<f64> = u.components().iter().map(|c| c.eval(e, &y)).collect();
                    let b: Vec<f64> = v.components().iter().map(|c| c.eval(e, &y)).collect();
                    target.distance(&a, &b)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let estimate = fit_order(&distances, grid, tol)?;
    let verdict = if estimate.zero_tail {
        Verdict::Yes
    } else if !estimate.is_clean(tol) {
        Verdict::Inconclusive
    } else if estimate.slope >= m_max as f64 - tol.tol_slope {
        Verdict::Yes
    } else {
        Verdict::No
    };
    let order = (verdict == Verdict::Yes).then_some(m_max);
    Ok(Equivalence { verdict, order, distances, estimate })
}

/// Per-ε flows from a lattice of initial points over `[0, t_max]`.
#[derive(Debug, Clone)]
pub struct GeneralizedFlow {
    pub field: VectorField,
    pub grid: EpsilonGrid,
    pub t_max: f64,
    pub starts: Vec<Vec<f64>>,
    /// `trajectories[j][i]`: grid index `j`, start `i`.
    pub trajectories: Vec<Vec<Trajectory>>,
    pub opts: OdeOptions,
}

impl GeneralizedFlow {
    pub fn eps(&self, j: usize) -> f64 {
        self.grid.get(j)
    }

    /// `Φ_{ε_j}(t, starts[i])` in canonical coordinates.
    pub fn at(&self, j: usize, i: usize, t: f64) -> Vec<f64> {
        self.field.domain().canonical(&self.trajectories[j][i].at(t))
    }

    pub fn truncated(&self) -> bool {
        self.trajectories.iter().flatten().any(|t| t.truncated.is_some())
    }
}

pub fn flow_net(xi: &VectorField, grid: &EpsilonGrid, t_max: f64, starts: Vec<Vec<f64>>, opts: &OdeOptions) -> Result<GeneralizedFlow> {
    let trajectories = grid
        .values()
        .par_iter()
        .map(|&e| starts.iter().map(|p| xi.trajectory(e, t_max, p, opts)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneralizedFlow { field: xi.clone(), grid: *grid, t_max, starts, trajectories, opts: *opts })
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowResiduals {
    pub eps: Vec<f64>,
    /// `max ‖Φ_ε(0, x) - x‖` per ε.
    pub identity: Vec<f64>,
    /// `max ‖Φ_ε(t + s, x) - Φ_ε(t, Φ_ε(s, x))‖` per ε.
    pub group: Vec<f64>,
}

impl FlowResiduals {
    pub fn max_identity(&self) -> f64 {
        self.identity.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_group(&self) -> f64 {
        self.group.iter().copied().fold(0.0, f64::max)
    }
}

/// Identity and group-property residuals at the sampled `(t, s)` pairs
/// (with `t + s ≤ t_max`).
pub fn flow_identities(phi: &GeneralizedFlow, pairs: &[(f64, f64)]) -> Result<FlowResiduals> {
    let dom = phi.field.domain().clone();
    let eps = phi.grid.values();
    let rows = (0..eps.len())
        .into_par_iter()
        .map(|j| -> Result<(f64, f64)> {
            let mut id: f64 = 0.0;
            let mut group: f64 = 0.0;
            for (i, start) in phi.starts.iter().enumerate() {
                id = id.max(dom.distance(&phi.at(j, i, 0.0), start));
                for &(t, s) in pairs {
                    if t + s > phi.t_max + 1e-12 {
                        return Err(Error::Ode(format!("t + s = {} exceeds the flow horizon {}", t + s, phi.t_max)));
                    }
                    let direct = phi.at(j, i, t + s);
                    let mid = phi.trajectories[j][i].at(s);
                    let composed = phi.field.flow(eps[j], t, &mid, &phi.opts)?;
                    group = group.max(dom.distance(&direct, &composed.point));
                }
            }
            Ok((id, group))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowResiduals { eps, identity: rows.iter().map(|r| r.0).collect(), group: rows.iter().map(|r| r.1).collect() })
}

/// Closed-form flow of the torus example:
/// `(α + t, β + t - ∫_α^{α+t} ρ_σ)`, the integral taken periodically.
pub fn torus_closed_form(m: &Mollifier, eps: f64, t: f64, alpha: f64, beta: f64) -> [f64; 2] {
    let sigma = 1.0 / eps.ln().abs();
    let big_f = |theta: f64| ((theta + PI) / TAU).floor() + m.moment_primitive(0, wrap_centered(theta) / sigma);
    [alpha + t, beta + t - (big_f(alpha + t) - big_f(alpha))]
}

/// The discontinuous limit `(α + t, β + t - H(α + t) + H(α))`, with `H`
/// periodized so that each full turn contributes one unit.
pub fn torus_limit(t: f64, alpha: f64, beta: f64) -> [f64; 2] {
    let h = |theta: f64| ((theta + PI) / TAU).floor() + if wrap_centered(theta) > 0.0 { 1.0 } else { 0.0 };
    [alpha + t, beta + t - (h(alpha + t) - h(alpha))]
}

#[derive(Debug, Clone, Serialize)]
pub struct TorusReport {
    pub eps: Vec<f64>,
    /// Sup distance between the computed flow and the closed form.
    pub closed_form_error: Vec<f64>,
    /// Sup distance to the limit over samples outside the pulse window.
    pub limit_distance: Vec<f64>,
    /// Samples excluded by the window rule.
    pub excluded: usize,
    pub compared: usize,
    pub residuals: FlowResiduals,
    pub hypotheses: HypothesisReport,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct TorusExample {
    pub field: VectorField,
    pub flow: GeneralizedFlow,
    pub report: TorusReport,
    /// `(t, α, β)` samples used for comparisons.
    pub samples: Vec<(f64, usize)>,
}

/// Runs the torus example: flows from a lattice of starts, comparison with
/// the closed form at every grid ε and with the limit away from the pulse.
pub fn torus_example(m: &Mollifier, grid: &EpsilonGrid, opts: &OdeOptions) -> Result<TorusExample> {
    let field = VectorField::torus_example(m)?;
    let alphas: Vec<f64> = (0..8).map(|i| i as f64 * TAU / 8.0).collect();
    let starts: Vec<Vec<f64>> = tensor(&[alphas, vec![0.0, 2.0]]);
    let t_max = TAU;
    let flow = flow_net(&field, grid, t_max, starts.clone(), opts)?;
    let times = linspace(0.0, t_max, 17);
    let samples: Vec<(f64, usize)> = times.iter().flat_map(|&t| (0..starts.len()).map(move |i| (t, i))).collect();
    let torus = ChartDomain::torus();
    let window = 2.0 * m.radius() / grid.smallest().ln().abs();
    let near_pulse = |theta: f64| wrap_centered(theta).abs() <= window;
    let mut excluded = 0;
    for &(t, i) in &samples {
        if near_pulse(starts[i][0]) || near_pulse(starts[i][0] + t) {
            excluded += 1;
        }
    }
    let eps = grid.values();
    let mut closed_form_error = Vec::with_capacity(eps.len());
    let mut limit_distance = Vec::with_capacity(eps.len());
    for (j, &e) in eps.iter().enumerate() {
        let mut cf: f64 = 0.0;
        let mut lim: f64 = 0.0;
        for &(t, i) in &samples {
            let got = flow.at(j, i, t);
            let (a, b) = (starts[i][0], starts[i][1]);
            cf = cf.max(torus.distance(&got, &torus_closed_form(m, e, t, a, b)));
            if !(near_pulse(a) || near_pulse(a + t)) {
                lim = lim.max(torus.distance(&got, &torus_limit(t, a, b)));
            }
        }
        closed_form_error.push(cf);
        limit_distance.push(lim);
    }
    let residuals = flow_identities(&flow, &[(1.0, 0.7), (2.5, 1.5), (0.3, 4.0)])?;
    let k = CompactBox::cube(2, 0.0, TAU)?;
    let hypotheses = check_flow_conditions(&field, &k, grid)?;
    let report = TorusReport {
        eps,
        closed_form_error,
        limit_distance,
        excluded,
        compared: samples.len() - excluded,
        residuals,
        hypotheses,
        truncated: flow.truncated(),
    };
    Ok(TorusExample { field, flow, report, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn constant_field_flow_is_a_translation() {
        let d = ChartDomain::euclidean(2);
        let xi = VectorField::constant(&[1.0, -2.0], d).unwrap();
        let p = xi.flow(0.1, 1.5, &[0.5, 0.5], &OdeOptions::default()).unwrap();
        assert!((p.point[0] - 2.0).abs() < 1e-12 && (p.point[1] + 2.5).abs() < 1e-12);
        let zero = VectorField::constant(&[0.0, 0.0], ChartDomain::euclidean(2)).unwrap();
        assert_eq!(zero.flow(0.1, 3.0, &[0.2, 0.1], &OdeOptions::default()).unwrap().point, vec![0.2, 0.1]);
    }

    #[test]
    fn escaping_flow_is_truncated() {
        let d = ChartDomain::interval(-1.0, 1.0).unwrap();
        let xi = VectorField::constant(&[1.0], d).unwrap();
        let p = xi.flow(0.5, 5.0, &[0.0], &OdeOptions::default()).unwrap();
        assert!(p.truncated && p.reached < 1.0);
    }

    #[test]
    fn c_boundedness_examples() {
        let g = EpsilonGrid::default();
        let d = ChartDomain::interval(-5.0, 5.0).unwrap();
        let k = CompactBox::interval(0.0, 1.0).unwrap();
        let id = Representative::vector(vec![Expr::var(0)], d.clone()).unwrap();
        let r = c_bounded(&id, &k, &g).unwrap();
        assert_eq!(r.verdict, Verdict::Yes);
        assert_eq!(r.hull.unwrap(), k);
        let shift = Representative::vector(vec![Expr::var(0) + Expr::eps()], d.clone()).unwrap();
        let r = c_bounded(&shift, &k, &g).unwrap();
        let h = r.hull.unwrap();
        assert!((h.lower[0] - g.smallest()).abs() < 1e-15 && h.upper[0] == 1.5);
        let blow = Representative::vector(vec![Expr::var(0) * Expr::eps().powi(-1).unwrap()], d).unwrap();
        let r = c_bounded(&blow, &k, &g).unwrap();
        assert_eq!(r.verdict, Verdict::No);
        assert!(r.witness.is_some());
    }

    #[test]
    fn map_equivalence_examples() {
        let g = EpsilonGrid::default();
        let d = ChartDomain::interval(-5.0, 5.0).unwrap();
        let k = CompactBox::interval(-1.0, 1.0).unwrap();
        let x = Expr::var(0);
        let u = Representative::vector(vec![x.clone()], d.clone()).unwrap();
        let target = ChartDomain::euclidean(1);
        let same = map_equivalent(&u, &u, &target, &k, 5, &g, &tol()).unwrap();
        assert_eq!(same.verdict, Verdict::Yes);
        let cube = Representative::vector(vec![&x + Expr::eps().powi(3).unwrap()], d.clone()).unwrap();
        let r = map_equivalent(&u, &cube, &target, &k, 3, &g, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::Yes);
        // x + ε³ - x loses digits near ε = 1e-4
        assert!((r.estimate.slope - 3.0).abs() < 1e-2);
        let slow = Representative::vector(vec![&x + (Expr::one() + torus_scale()).recip().unwrap()], d).unwrap();
        assert_eq!(map_equivalent(&u, &slow, &target, &k, 3, &g, &tol()).unwrap().verdict, Verdict::No);
    }

    #[test]
    fn closed_form_limits() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        // far from the pulse the flow is a plain translation
        let p = torus_closed_form(&m, 1e-4, 0.5, 1.0, 0.3);
        assert!((p[0] - 1.5).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        // crossing α = 0 (mod 2π) removes one unit from β
        let p = torus_closed_form(&m, 1e-4, 2.0, 5.0, 0.0);
        let q = torus_limit(2.0, 5.0, 0.0);
        assert!((p[1] - 1.0).abs() < 1e-12 && (q[1] - 1.0).abs() < 1e-15);
        // a full turn from a point off the pulse
        let q = torus_limit(TAU, 1.0, 0.0);
        assert!((q[1] - (TAU - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn negative_field_reverses_flow() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let xi = VectorField::torus_example(&m).unwrap();
        let back = xi.negated();
        let opts = OdeOptions::default();
        for &(e, a) in &[(0.1, -0.3), (1e-3, 6.0)] {
            let fwd = xi.flow(e, 1.3, &[a, 0.4], &opts).unwrap();
            let ret = back.flow(e, 1.3, &fwd.point, &opts).unwrap();
            assert!(ChartDomain::torus().distance(&ret.point, &[a, 0.4]) < 1e-6);
        }
    }
}
