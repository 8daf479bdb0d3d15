//! Generalized pseudo-Riemannian metrics in a chart: validity checks,
//! Levi-Civita connection, curvature, geodesics per ε and their limits,
//! covariant derivatives along curves, and the impulsive pp-wave.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{invertibility_from_values, Invertibility, Verdict};
use crate::config::Tolerances;
use crate::domain::{linspace, tensor, ChartDomain, CompactBox, EpsilonGrid, Representative, Shape};
use crate::error::{Error, Result};
use crate::expr::{Expr, KernelWindow};
use crate::flows::window_cap;
use crate::mollifier::Mollifier;
use crate::ode::{integrate, OdeOptions, Trajectory};
use crate::quadrature::adaptive;

/// Minimum number of points at which the index is computed.
pub const MIN_INDEX_SAMPLES: usize = 32;

/// Cauchy tolerance for limit curves.
pub const LIMIT_TOL: f64 = 1e-4;

const MIN_ROUNDS: usize = 30;

/// Determinant of a square matrix of expressions by cofactor expansion.
pub fn symbolic_det(m: &[Expr], n: usize) -> Expr {
    match n {
        0 => Expr::one(),
        1 => m[0].clone(),
        _ => {
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                if m[j].is_zero() {
                    continue;
                }
                let minor: Vec<Expr> =
                    (1..n).flat_map(|r| (0..n).filter(move |&c| c != j).map(move |c| (r, c))).map(|(r, c)| m[r * n + c].clone()).collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                terms.push((sign, &m[j] * symbolic_det(&minor, n - 1)));
            }
            Expr::linear_combination(terms)
        }
    }
}

/// A validated metric with its certificates.
#[derive(Debug, Clone)]
pub struct GeneralizedMetric {
    g: Representative,
    n: usize,
    /// `∂_k g_ij` at `(k·n + i)·n + j`.
    dg: Vec<Expr>,
    /// `∂_m ∂_k g_ij` at `((m·n + k)·n + i)·n + j`.
    ddg: Vec<Expr>,
    windows_src: Vec<Expr>,
    pub index: usize,
    pub det: Invertibility,
    /// Per-ε `min_K |det g_ε|` from the deep minimization.
    pub det_min: Vec<f64>,
    pub smallest_eps_checked: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub dim: usize,
    pub index: usize,
    pub det_verdict: Verdict,
    pub det_order: Option<u32>,
    pub det_min: Vec<f64>,
    pub smallest_eps_checked: f64,
    pub samples: usize,
}

fn eval_matrix(exprs: &[Expr], n: usize, eps: f64, x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| exprs[i * n + j].eval(eps, x))
}

fn sample_points(k: &CompactBox, windows: &[KernelWindow]) -> Vec<Vec<f64>> {
    let n = k.dim();
    let mut per_axis: usize = 2;
    while per_axis.pow(n as u32) < MIN_INDEX_SAMPLES {
        per_axis += 1;
    }
    // odd counts put the centre on the lattice
    if per_axis.is_multiple_of(2) {
        per_axis += 1;
    }
    let mut axes: Vec<Vec<f64>> = (0..n).map(|i| linspace(k.lower[i], k.upper[i], per_axis)).collect();
    for w in windows {
        if w.var < n {
            for v in linspace(w.lo, w.hi, 5) {
                if v >= k.lower[w.var] && v <= k.upper[w.var] {
                    axes[w.var].push(v);
                }
            }
        }
    }
    for a in &mut axes {
        a.sort_by(f64::total_cmp);
        a.dedup();
    }
    tensor(&axes)
}

/// Minimizes `|det g_ε|` over `k`: lattice search, then coordinate-wise
/// line searches on a shrinking stencil. A minimum below `1e-14` of the
/// largest sampled `|det g_ε|` marks a zero of the determinant.
fn deep_min_det(g: &[Expr], n: usize, dom: &ChartDomain, k: &CompactBox, eps: f64) -> (f64, Vec<f64>, bool) {
    let windows: Vec<KernelWindow> = g.iter().flat_map(|e| e.kernel_windows(eps)).collect();
    let per_axis = match n {
        1 | 2 => 33,
        3 => 9,
        _ => 5,
    };
    let mut axes: Vec<Vec<f64>> = (0..n).map(|i| linspace(k.lower[i], k.upper[i], per_axis)).collect();
    for w in &windows {
        if w.var < n {
            axes[w.var].extend(linspace(w.lo.max(k.lower[w.var]), w.hi.min(k.upper[w.var]), 9));
        }
    }
    let mut spacing: Vec<f64> = (0..n).map(|i| (k.upper[i] - k.lower[i]) / (per_axis - 1) as f64).collect();
    let det = |p: &[f64]| eval_matrix(g, n, eps, &dom.eval_coords(p)).determinant().abs();
    let mut best = f64::INFINITY;
    let mut scale: f64 = 0.0;
    let mut arg = k.center();
    for p in tensor(&axes) {
        let v = det(&p);
        scale = scale.max(v);
        if v < best {
            best = v;
            arg = p;
        }
    }
    for _ in 0..MIN_ROUNDS {
        if best == 0.0 {
            break;
        }
        for i in 0..n {
            for x in linspace((arg[i] - spacing[i]).max(k.lower[i]), (arg[i] + spacing[i]).min(k.upper[i]), 9) {
                let mut p = arg.clone();
                p[i] = x;
                let v = det(&p);
                if v < best {
                    best = v;
                    arg = p;
                }
            }
        }
        for h in &mut spacing {
            *h /= 4.0;
        }
    }
    (best, arg, best <= 1e-14 * scale)
}

/// Validates `g` on the box `k`: structural symmetry, invertible determinant
/// (deep minimization of `|det g_ε|` over `k` per grid ε), and a constant
/// signature over at least 32 sample points for every grid ε up to the
/// middle of the grid.
pub fn check_metric(g: &Representative, k: &CompactBox, grid: &EpsilonGrid, tol: &Tolerances) -> Result<GeneralizedMetric> {
    let Shape::Matrix(n) = g.shape() else {
        return Err(Error::Metric("metric must be a square matrix".into()));
    };
    if g.domain().dim() != n {
        return Err(Error::Metric(format!("{n}x{n} metric on a {}-dimensional chart", g.domain().dim())));
    }
    if !g.domain().contains_box(k) {
        return Err(Error::InvalidBox("sample box is not inside the chart".into()));
    }
    let c = g.components();
    for i in 0..n {
        for j in (i + 1)..n {
            if c[i * n + j] != c[j * n + i] {
                return Err(Error::Metric(format!("g[{i}][{j}] and g[{j}][{i}] differ: {} vs {}", c[i * n + j], c[j * n + i])));
            }
        }
    }
    let dom = g.domain().clone();
    let eps = grid.values();
    let mins: Vec<(f64, Vec<f64>, bool)> = eps.par_iter().map(|&e| deep_min_det(c, n, &dom, k, e)).collect();
    for (j, (v, p, zero)) in mins.iter().enumerate() {
        if *zero {
            return Err(Error::Metric(format!(
                "det(g) is not invertible: |det g| -> {v:e} near x = {p:?} at eps = {:e}",
                eps[j]
            )));
        }
    }
    let det_min: Vec<f64> = mins.iter().map(|m| m.0).collect();
    let det = invertibility_from_values(&det_min, grid, tol)?;
    if det.verdict != Verdict::Yes {
        return Err(Error::Metric(format!(
            "det(g) is not invertible: verdict {} (slope {:.3}, residual {:.3}, min {:e})",
            det.verdict.as_str(),
            det.estimate.slope,
            det.estimate.residual,
            det.min_value
        )));
    }
    let smallest = grid.smallest();
    let windows: Vec<KernelWindow> = c.iter().flat_map(|e| e.kernel_windows(smallest)).collect();
    let samples = sample_points(k, &windows);
    let checked: Vec<f64> = eps[eps.len() / 2..].to_vec();
    let signatures = checked
        .par_iter()
        .map(|&e| -> Result<Vec<usize>> {
            samples
                .iter()
                .map(|p| {
                    let m = eval_matrix(c, n, e, &dom.eval_coords(p));
                    let ev = SymmetricEigen::new(m).eigenvalues;
                    let scale = ev.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                    if ev.iter().any(|v| v.abs() <= 1e-12 * scale) {
                        return Err(Error::Metric(format!("degenerate metric at x = {p:?}, eps = {e:e}")));
                    }
                    Ok(ev.iter().filter(|v| **v < 0.0).count())
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let index = signatures[0][0];
    for (row, e) in signatures.iter().zip(&checked) {
        if let Some((i, s)) = row.iter().enumerate().find(|(_, s)| **s != index) {
            return Err(Error::Metric(format!(
                "signature varies: {s} negative eigenvalues at x = {:?}, eps = {e:e}, {index} elsewhere",
                samples[i]
            )));
        }
    }
    let dg: Vec<Expr> = (0..n).flat_map(|k| c.iter().map(move |e| e.derive(k))).collect();
    let ddg: Vec<Expr> = (0..n).flat_map(|m| dg.iter().map(move |e| e.derive(m))).collect();
    Ok(GeneralizedMetric {
        g: g.clone(),
        n,
        dg,
        ddg,
        windows_src: c.to_vec(),
        index,
        det,
        det_min,
        smallest_eps_checked: smallest,
        samples: samples.len(),
    })
}

/// Christoffel symbols `Γ^k_ij` stored at `(k·n + i)·n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub n: usize,
    pub gamma: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.n + i) * self.n + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    pub n: usize,
    /// `R^l_{kij}` at `((l·n + k)·n + i)·n + j`.
    pub riemann: Vec<f64>,
    /// `R_kj = R^i_{kij}` at `k·n + j`.
    pub ricci: Vec<f64>,
}

impl Curvature {
    pub fn riemann(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.riemann[((l * n + k) * n + i) * n + j]
    }

    pub fn ricci(&self, k: usize, j: usize) -> f64 {
        self.ricci[k * self.n + j]
    }
}

impl GeneralizedMetric {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rep(&self) -> &Representative {
        &self.g
    }

    pub fn domain(&self) -> &ChartDomain {
        self.g.domain()
    }

    pub fn summary(&self) -> MetricSummary {
        MetricSummary {
            dim: self.n,
            index: self.index,
            det_verdict: self.det.verdict,
            det_order: self.det.order,
            det_min: self.det_min.clone(),
            smallest_eps_checked: self.smallest_eps_checked,
            samples: self.samples,
        }
    }

    pub fn matrix(&self, eps: f64, x: &[f64]) -> DMatrix<f64> {
        eval_matrix(self.g.components(), self.n, eps, &self.domain().eval_coords(x))
    }

    fn inverse(&self, eps: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        self.matrix(eps, x).try_inverse().ok_or_else(|| Error::Singular { eps, point: x.to_vec() })
    }

    fn eval_all(exprs: &[Expr], eps: f64, y: &[f64]) -> Vec<f64> {
        exprs.iter().map(|e| if e.is_zero() { 0.0 } else { e.eval(eps, y) }).collect()
    }

    /// `g_ε(a, b)` at `x`.
    pub fn inner(&self, eps: f64, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let g = self.matrix(eps, x);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += g[(i, j)] * a[i] * b[j];
            }
        }
        s
    }

    fn christoffel_parts(&self, eps: f64, x: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>, Christoffel)> {
        let n = self.n;
        crate::domain::check_eps(eps)?;
        let y = self.domain().eval_coords(x);
        let ginv = self.inverse(eps, x)?;
        let dg = Self::eval_all(&self.dg, eps, &y);
        let d = |k: usize, i: usize, j: usize| dg[(k * n + i) * n + j];
        let mut gamma = vec![0.0; n * n * n];
        for i in 0..n {
            for j in i..n {
                for l in 0..n {
                    let t = d(i, j, l) + d(j, i, l) - d(l, i, j);
                    if t == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        gamma[(k * n + i) * n + j] += 0.5 * ginv[(k, l)] * t;
                    }
                }
                for k in 0..n {
                    gamma[(k * n + j) * n + i] = gamma[(k * n + i) * n + j];
                }
            }
        }
        Ok((ginv, dg, Christoffel { n, gamma }))
    }

    /// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il - ∂_l g_ij)`.
    pub fn christoffel(&self, eps: f64, x: &[f64]) -> Result<Christoffel> {
        Ok(self.christoffel_parts(eps, x)?.2)
    }

    /// `R^l_{kij} = ∂_iΓ^l_{jk} - ∂_jΓ^l_{ik} + Γ^l_{im}Γ^m_{jk} - Γ^l_{jm}Γ^m_{ik}`
    /// and `R_kj = R^i_{kij}`.
    pub fn curvature(&self, eps: f64, x: &[f64]) -> Result<Curvature> {
        let n = self.n;
        let (ginv, dg, gam) = self.christoffel_parts(eps, x)?;
        let y = self.domain().eval_coords(x);
        let ddg = Self::eval_all(&self.ddg, eps, &y);
        let d = |k: usize, i: usize, j: usize| dg[(k * n + i) * n + j];
        let dd = |m: usize, k: usize, i: usize, j: usize| ddg[((m * n + k) * n + i) * n + j];
        // ∂_m g^{kl} = -g^{ka} ∂_m g_ab g^{bl}
        let mut dginv = vec![0.0; n * n * n];
        for m in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            let v = d(m, a, b);
                            if v != 0.0 {
                                s -= ginv[(kk, a)] * v * ginv[(b, l)];
                            }
                        }
                    }
                    dginv[(m * n + kk) * n + l] = s;
                }
            }
        }
        // ∂_m Γ^k_ij at ((m·n + k)·n + i)·n + j
        let mut dgam = vec![0.0; n * n * n * n];
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let t = d(i, j, l) + d(j, i, l) - d(l, i, j);
                        let dt = dd(m, i, j, l) + dd(m, j, i, l) - dd(m, l, i, j);
                        if t == 0.0 && dt == 0.0 {
                            continue;
                        }
                        for k in 0..n {
                            dgam[((m * n + k) * n + i) * n + j] += 0.5 * (dginv[(m * n + k) * n + l] * t + ginv[(k, l)] * dt);
                        }
                    }
                }
            }
        }
        let g = |k: usize, i: usize, j: usize| gam.get(k, i, j);
        let dgm = |m: usize, k: usize, i: usize, j: usize| dgam[((m * n + k) * n + i) * n + j];
        let mut riemann = vec![0.0; n * n * n * n];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut r = dgm(i, l, j, k) - dgm(j, l, i, k);
                        for m in 0..n {
                            r += g(l, i, m) * g(m, j, k) - g(l, j, m) * g(m, i, k);
                        }
                        riemann[((l * n + k) * n + i) * n + j] = r;
                    }
                }
            }
        }
        let mut ricci = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                ricci[k * n + j] = (0..n).map(|i| riemann[((i * n + k) * n + i) * n + j]).sum();
            }
        }
        Ok(Curvature { n, riemann, ricci })
    }

    /// Sectional curvature of the plane spanned by `∂_a, ∂_b`.
    pub fn sectional(&self, eps: f64, x: &[f64], a: usize, b: usize) -> Result<f64> {
        let r = self.curvature(eps, x)?;
        let g = self.matrix(eps, x);
        let num: f64 = (0..self.n).map(|l| g[(a, l)] * r.riemann(l, b, a, b)).sum();
        Ok(num / (g[(a, a)] * g[(b, b)] - g[(a, b)].powi(2)))
    }

    fn windows(&self, eps: f64) -> Vec<KernelWindow> {
        let mut w: Vec<KernelWindow> = self.windows_src.iter().flat_map(|e| e.kernel_windows(eps)).collect();
        w.dedup();
        w
    }

    /// Geodesic `ẍ^k + Γ^k_ij ẋ^i ẋ^j = 0` at one ε over `[t0, t1]`; inside
    /// kernel windows the step is at most a twentieth of the window width
    /// (per unit coordinate speed).
    pub fn geodesic(&self, p0: &[f64], v0: &[f64], eps: f64, t0: f64, t1: f64, opts: &OdeOptions) -> Result<Geodesic> {
        let n = self.n;
        if p0.len() != n || v0.len() != n {
            return Err(Error::Shape(format!("initial data must have {n} components")));
        }
        crate::domain::check_eps(eps)?;
        let dom = self.domain().clone();
        if !dom.contains(p0) {
            return Err(Error::Domain { point: p0.to_vec() });
        }
        let windows = self.windows(eps);
        let y0: Vec<f64> = p0.iter().chain(v0).copied().collect();
        let failure = std::sync::Mutex::new(None);
        let traj = integrate(
            |_, y, dy| {
                let (x, v) = y.split_at(n);
                dy[..n].copy_from_slice(v);
                match self.christoffel(eps, x) {
                    Ok(gam) => {
                        for k in 0..n {
                            let mut a = 0.0;
                            for i in 0..n {
                                for j in 0..n {
                                    a -= gam.get(k, i, j) * v[i] * v[j];
                                }
                            }
                            dy[n + k] = a;
                        }
                    }
                    Err(e) => {
                        failure.lock().expect("unpoisoned").get_or_insert(e);
                        dy[n..].iter_mut().for_each(|d| *d = f64::NAN);
                    }
                }
            },
            t0,
            &y0,
            t1,
            opts,
            |_, y, dy| window_cap(&windows, &y[..n], &dy[..n], false),
            |y| dom.contains(&y[..n]),
        );
        if let Some(e) = failure.into_inner().expect("unpoisoned") {
            return Err(e);
        }
        Ok(Geodesic { eps, n, trajectory: traj? })
    }

    /// Per-ε geodesics over the grid with a limit report.
    pub fn geodesic_net(&self, p0: &[f64], v0: &[f64], grid: &EpsilonGrid, tspan: (f64, f64), opts: &OdeOptions) -> Result<GeodesicNet> {
        let eps = grid.values();
        let geodesics =
            eps.par_iter().map(|&e| self.geodesic(p0, v0, e, tspan.0, tspan.1, opts)).collect::<Result<Vec<_>>>()?;
        let curve = GeneralizedCurve::from_geodesics(*grid, tspan, geodesics);
        let report = limit_report(self, &curve, grid)?;
        Ok(GeodesicNet { curve, report })
    }

    /// `∫ R_ab(ε, x(s)) φ(s) ds` along the line `x(s) = base + s·e_var`.
    pub fn ricci_pairing(&self, a: usize, b: usize, eps: f64, base: &[f64], var: usize, phi: &crate::association::TestFunction) -> Result<f64> {
        let sup = phi.support();
        let breaks: Vec<f64> = self
            .windows(eps)
            .iter()
            .filter(|w| w.var == var)
            .flat_map(|w| [w.lo, 0.5 * (w.lo + w.hi), w.hi])
            .map(|s| s - base[var])
            .collect();
        let mut err = None;
        let r = adaptive(
            |s| {
                let p = phi.eval(&[s]);
                if p == 0.0 {
                    return 0.0;
                }
                let mut x = base.to_vec();
                x[var] += s;
                match self.curvature(eps, &x) {
                    Ok(c) => p * c.ricci(a, b),
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            },
            sup.lower[0],
            sup.upper[0],
            &breaks,
            crate::association::PAIR_ABS_TOL,
            0.0,
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    }
}

/// One geodesic at fixed ε; the state is `(x, ẋ)`.
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub eps: f64,
    pub n: usize,
    pub trajectory: Trajectory,
}

impl Geodesic {
    pub fn position(&self, t: f64) -> Vec<f64> {
        self.trajectory.at(t)[..self.n].to_vec()
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        self.trajectory.at(t)[self.n..].to_vec()
    }

    pub fn truncated(&self) -> bool {
        self.trajectory.truncated.is_some()
    }

    /// `g_ε(γ̇, γ̇)` at `t`.
    pub fn energy(&self, g: &GeneralizedMetric, t: f64) -> f64 {
        let s = self.trajectory.at(t);
        g.inner(self.eps, &s[..self.n], &s[self.n..], &s[self.n..])
    }
}

#[derive(Debug, Clone)]
enum CurveData {
    Geodesics(Vec<Geodesic>),
    /// `x^k(t, ε)` with `t` as coordinate 0.
    Symbolic(Vec<Expr>),
}

/// A net of curves `γ_ε` over a grid.
#[derive(Debug, Clone)]
pub struct GeneralizedCurve {
    grid: EpsilonGrid,
    tspan: (f64, f64),
    data: CurveData,
    /// Hull of all sampled positions (the common compact set).
    pub hull: CompactBox,
    pub c_bounded: Verdict,
}

fn curve_hull(points: impl Iterator<Item = Vec<f64>>, n: usize) -> CompactBox {
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in points {
        for i in 0..n {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    CompactBox::new(lo, hi).unwrap_or_else(|_| CompactBox { lower: vec![0.0; n], upper: vec![0.0; n] })
}

impl GeneralizedCurve {
    fn from_geodesics(grid: EpsilonGrid, tspan: (f64, f64), geodesics: Vec<Geodesic>) -> Self {
        let n = geodesics[0].n;
        let pts = geodesics.iter().flat_map(|g| g.trajectory.states().iter().map(move |s| s[..n].to_vec()));
        let hull = curve_hull(pts, n);
        let finite = hull.lower.iter().chain(&hull.upper).all(|v| v.is_finite());
        let complete = geodesics.iter().all(|g| !g.truncated());
        let c_bounded = if finite && complete { Verdict::Yes } else { Verdict::No };
        Self { grid, tspan, data: CurveData::Geodesics(geodesics), hull, c_bounded }
    }

    /// A curve given by expressions in `t` (coordinate 0) and ε.
    pub fn symbolic(components: Vec<Expr>, grid: EpsilonGrid, tspan: (f64, f64)) -> Result<Self> {
        if components.iter().any(|e| e.arity() > 1) {
            return Err(Error::Shape("curve components may depend on t (x0) and eps only".into()));
        }
        let n = components.len();
        let ts = linspace(tspan.0, tspan.1, 201);
        let pts = grid.values().into_iter().flat_map(|e| {
            let comps = components.clone();
            ts.clone().into_iter().map(move |t| comps.iter().map(|c| c.eval(e, &[t])).collect::<Vec<f64>>())
        });
        let hull = curve_hull(pts, n);
        let c_bounded = if hull.lower.iter().chain(&hull.upper).all(|v| v.is_finite()) { Verdict::Yes } else { Verdict::No };
        Ok(Self { grid, tspan, data: CurveData::Symbolic(components), hull, c_bounded })
    }

    pub fn grid(&self) -> &EpsilonGrid {
        &self.grid
    }

    pub fn tspan(&self) -> (f64, f64) {
        self.tspan
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            CurveData::Geodesics(g) => g[0].n,
            CurveData::Symbolic(c) => c.len(),
        }
    }

    pub fn geodesics(&self) -> Option<&[Geodesic]> {
        match &self.data {
            CurveData::Geodesics(g) => Some(g),
            CurveData::Symbolic(_) => None,
        }
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.grid.len() {
            return Err(Error::GridMismatch(format!("grid index {j} outside a grid of {}", self.grid.len())));
        }
        Ok(())
    }

    pub fn position(&self, j: usize, t: f64) -> Vec<f64> {
        match &self.data {
            CurveData::Geodesics(g) => g[j].position(t),
            CurveData::Symbolic(c) => c.iter().map(|e| e.eval(self.grid.get(j), &[t])).collect(),
        }
    }

    pub fn velocity(&self, j: usize, t: f64) -> Vec<f64> {
        match &self.data {
            CurveData::Geodesics(g) => g[j].velocity(t),
            CurveData::Symbolic(c) => c.iter().map(|e| e.derive(0).eval(self.grid.get(j), &[t])).collect(),
        }
    }

    /// `γ̈`; for geodesics from the derivative of the dense interpolant.
    pub fn acceleration(&self, j: usize, t: f64) -> Vec<f64> {
        match &self.data {
            CurveData::Geodesics(g) => g[j].trajectory.derivative_at(t)[g[j].n..].to_vec(),
            CurveData::Symbolic(c) => c.iter().map(|e| e.derive(0).derive(0).eval(self.grid.get(j), &[t])).collect(),
        }
    }
}

/// A vector field along a curve.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveVectorField {
    /// The velocity `γ̇_ε`.
    Velocity,
    /// Components as expressions in `t` (coordinate 0) and ε.
    Components(Vec<Expr>),
    Combination(Vec<(f64, CurveVectorField)>),
}

impl CurveVectorField {
    pub fn value(&self, curve: &GeneralizedCurve, j: usize, t: f64) -> Vec<f64> {
        match self {
            Self::Velocity => curve.velocity(j, t),
            Self::Components(c) => c.iter().map(|e| e.eval(curve.grid.get(j), &[t])).collect(),
            Self::Combination(parts) => combine(parts.iter().map(|(a, f)| (*a, f.value(curve, j, t))), curve.dim()),
        }
    }

    /// `dξ/dt` along the curve.
    pub fn time_derivative(&self, curve: &GeneralizedCurve, j: usize, t: f64) -> Vec<f64> {
        match self {
            Self::Velocity => curve.acceleration(j, t),
            Self::Components(c) => c.iter().map(|e| e.derive(0).eval(curve.grid.get(j), &[t])).collect(),
            Self::Combination(parts) => {
                combine(parts.iter().map(|(a, f)| (*a, f.time_derivative(curve, j, t))), curve.dim())
            }
        }
    }
}

fn combine(parts: impl Iterator<Item = (f64, Vec<f64>)>, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (a, v) in parts {
        for (o, x) in out.iter_mut().zip(v) {
            *o += a * x;
        }
    }
    out
}

/// `ξ'^k = dξ^k/dt + Γ^k_ij γ̇^i ξ^j` at each of `times`, for grid index `j`.
pub fn induced_covariant_derivative(
    xi: &CurveVectorField,
    curve: &GeneralizedCurve,
    g: &GeneralizedMetric,
    j: usize,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    curve.check_index(j)?;
    if curve.dim() != g.dim() {
        return Err(Error::Shape("curve and metric dimensions differ".into()));
    }
    let n = g.dim();
    let eps = curve.grid.get(j);
    times
        .iter()
        .map(|&t| {
            let x = curve.position(j, t);
            let v = curve.velocity(j, t);
            let xv = xi.value(curve, j, t);
            let mut d = xi.time_derivative(curve, j, t);
            let gam = g.christoffel(eps, &x)?;
            for (k, dk) in d.iter_mut().enumerate() {
                for i in 0..n {
                    for l in 0..n {
                        *dk += gam.get(k, i, l) * v[i] * xv[l];
                    }
                }
            }
            Ok(d)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub eps: f64,
    /// Times at which the window coordinate enters, centres and leaves.
    pub t_in: f64,
    pub t_mid: f64,
    pub t_out: f64,
    pub position_at_mid: Vec<f64>,
    pub position_jump: Vec<f64>,
    pub velocity_jump: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub times: Vec<f64>,
    /// `sup_t |γ_{ε_j}(t) - γ_{ε_{j-1}}(t)|` over samples away from the pulse, `j ≥ 1`.
    pub successive: Vec<f64>,
    pub cauchy: bool,
    /// Richardson extrapolation of the last two positions at each sample.
    pub limit: Vec<Vec<f64>>,
    pub window_var: Option<usize>,
    pub crossings: Vec<Crossing>,
    pub kink_time: Option<f64>,
    pub position_at_kink: Option<Vec<f64>>,
    pub velocity_jump: Option<Vec<f64>>,
    pub position_jump: Option<Vec<f64>>,
    /// Max second difference of the limit curve outside `10·ε_min·R` of the pulse.
    pub max_second_difference: f64,
}

#[derive(Debug, Clone)]
pub struct GeodesicNet {
    pub curve: GeneralizedCurve,
    pub report: LimitReport,
}

const LIMIT_SAMPLES: usize = 401;

fn richardson(a_prev: &[f64], a_last: &[f64], r: f64) -> Vec<f64> {
    a_last.iter().zip(a_prev).map(|(l, p)| (l - r * p) / (1.0 - r)).collect()
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// First time the coordinate `var` of `g` reaches `level`.
fn crossing_time(g: &Geodesic, var: usize, level: f64) -> Option<f64> {
    let ts = g.trajectory.times();
    let f = |t: f64| g.trajectory.at(t)[var] - level;
    for w in ts.windows(2) {
        let (fa, fb) = (f(w[0]), f(w[1]));
        if fa == 0.0 {
            return Some(w[0]);
        }
        if (fa < 0.0) != (fb < 0.0) {
            return Some(bisect(f, w[0], w[1]));
        }
    }
    None
}

fn limit_report(g: &GeneralizedMetric, curve: &GeneralizedCurve, grid: &EpsilonGrid) -> Result<LimitReport> {
    let geos = curve.geodesics().expect("geodesic curve");
    let n = g.dim();
    let eps = grid.values();
    let (t0, t1) = curve.tspan;
    let times = linspace(t0, t1, LIMIT_SAMPLES);
    let window_var = g.windows(grid.smallest()).first().map(|w| w.var);
    let radius = {
        let w0 = g.windows(1.0);
        w0.first().map(|w| 0.5 * w.width()).unwrap_or(0.0)
    };
    let centre = |e: f64| g.windows(e).first().map(|w| 0.5 * (w.lo + w.hi));
    let positions: Vec<Vec<Vec<f64>>> = geos.iter().map(|geo| times.iter().map(|&t| geo.position(t)).collect()).collect();
    let mut successive = Vec::with_capacity(eps.len().saturating_sub(1));
    for j in 1..eps.len() {
        let mut d: f64 = 0.0;
        for (s, _) in times.iter().enumerate() {
            if let (Some(var), Some(c)) = (window_var, centre(eps[j - 1])) {
                let near = |p: &[f64]| (p[var] - c).abs() <= 10.0 * eps[j - 1] * radius;
                if near(&positions[j][s]) || near(&positions[j - 1][s]) {
                    continue;
                }
            }
            let dist = positions[j][s].iter().zip(&positions[j - 1][s]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            d = d.max(dist);
        }
        successive.push(d);
    }
    let cauchy = successive.len() >= 3 && successive[successive.len() - 3..].iter().all(|d| *d <= LIMIT_TOL);
    let r = grid.ratio();
    let jl = eps.len() - 1;
    let limit: Vec<Vec<f64>> = (0..times.len()).map(|s| richardson(&positions[jl - 1][s], &positions[jl][s], r)).collect();

    let mut crossings = Vec::new();
    if let Some(var) = window_var {
        for geo in geos {
            let Some(w) = g.windows(geo.eps).into_iter().find(|w| w.var == var) else { continue };
            let (Some(ta), Some(tm), Some(tb)) =
                (crossing_time(geo, var, w.lo), crossing_time(geo, var, 0.5 * (w.lo + w.hi)), crossing_time(geo, var, w.hi))
            else {
                continue;
            };
            let (t_in, t_out) = (ta.min(tb), ta.max(tb));
            let sa = geo.trajectory.at(t_in);
            let sb = geo.trajectory.at(t_out);
            crossings.push(Crossing {
                eps: geo.eps,
                t_in,
                t_mid: tm,
                t_out,
                position_at_mid: geo.position(tm),
                position_jump: (0..n).map(|i| sb[i] - sa[i]).collect(),
                velocity_jump: (0..n).map(|i| sb[n + i] - sa[n + i]).collect(),
            });
        }
    }
    let extrapolate = |f: &dyn Fn(&Crossing) -> Vec<f64>| -> Option<Vec<f64>> {
        let k = crossings.len();
        (k >= 2 && crossings[k - 1].eps == grid.smallest()).then(|| richardson(&f(&crossings[k - 2]), &f(&crossings[k - 1]), r))
    };
    let kink_time = extrapolate(&|c| vec![c.t_mid]).map(|v| v[0]);
    let position_at_kink = extrapolate(&|c| c.position_at_mid.clone());
    let velocity_jump = extrapolate(&|c| c.velocity_jump.clone());
    let position_jump = extrapolate(&|c| c.position_jump.clone());

    let excl = 10.0 * grid.smallest() * radius;
    let kink_coord = window_var.and_then(|_| centre(grid.smallest()));
    let mut max_second_difference: f64 = 0.0;
    for s in 1..times.len() - 1 {
        if let (Some(var), Some(c)) = (window_var, kink_coord) {
            if (s - 1..=s + 1).any(|q| (limit[q][var] - c).abs() <= excl) {
                continue;
            }
            // the stencil must not straddle the pulse either
            if (limit[s - 1][var] - c).signum() != (limit[s + 1][var] - c).signum() {
                continue;
            }
        }
        for i in 0..n {
            max_second_difference = max_second_difference.max((limit[s + 1][i] - 2.0 * limit[s][i] + limit[s - 1][i]).abs());
        }
    }
    Ok(LimitReport {
        times,
        successive,
        cauchy,
        limit,
        window_var,
        crossings,
        kink_time,
        position_at_kink,
        velocity_jump,
        position_jump,
        max_second_difference,
    })
}

/// The impulsive pp-wave `ds² = f(x,y) ρ_ε(u) du² - du dv + dx² + dy²` in
/// coordinates `(u, v, x, y)`; `f` is written in coordinates 0 and 1.
pub fn pp_wave_metric(f: &Expr, m: &Mollifier, chart: ChartDomain) -> Result<Representative> {
    if chart.dim() != 4 {
        return Err(Error::Shape("the pp-wave chart has coordinates (u, v, x, y)".into()));
    }
    if f.depends_on_eps() || f.arity() > 2 {
        return Err(Error::Shape("the profile f depends on (x, y) only".into()));
    }
    let f4 = f.substitute(&[Expr::var(2), Expr::var(3)]);
    let rho = Expr::eps().powi(-1)? * Expr::kernel(m, 0, Expr::var(0) * Expr::eps().powi(-1)?);
    let z = Expr::zero();
    let h = Expr::constant(-0.5);
    let one = Expr::one();
    let comps = vec![
        f4 * rho, h.clone(), z.clone(), z.clone(),
        h, z.clone(), z.clone(), z.clone(),
        z.clone(), z.clone(), one.clone(), z.clone(),
        z.clone(), z.clone(), z, one,
    ];
    Representative::matrix(4, comps, chart)
}

/// Default pp-wave chart: `u ∈ (-4, 4)`, `v ∈ (-50, 50)`, `x, y ∈ (-10, 10)`.
pub fn pp_wave_chart() -> ChartDomain {
    ChartDomain::boxed(vec![-4.0, -50.0, -10.0, -10.0], vec![4.0, 50.0, 10.0, 10.0])
        .and_then(|d| d.with_names(&["u", "v", "x", "y"]))
        .expect("valid chart")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn diag(entries: Vec<Expr>, dom: ChartDomain) -> Representative {
        let n = entries.len();
        let mut c = vec![Expr::zero(); n * n];
        for (i, e) in entries.into_iter().enumerate() {
            c[i * n + i] = e;
        }
        Representative::matrix(n, c, dom).unwrap()
    }

    fn sphere() -> GeneralizedMetric {
        let dom = ChartDomain::boxed(vec![0.2, -3.0], vec![2.9, 3.0]).unwrap();
        let g = diag(vec![Expr::one(), Expr::var(0).sin() * Expr::var(0).sin()], dom);
        let k = CompactBox::new(vec![0.4, -1.0], vec![2.7, 1.0]).unwrap();
        check_metric(&g, &k, &EpsilonGrid::default(), &tol()).unwrap()
    }

    #[test]
    fn minkowski_has_index_one() {
        let dom = ChartDomain::euclidean(4);
        let g = diag(vec![Expr::constant(-1.0), Expr::one(), Expr::one(), Expr::one()], dom);
        let m = check_metric(&g, &CompactBox::cube(4, -1.0, 1.0).unwrap(), &EpsilonGrid::default(), &tol()).unwrap();
        assert_eq!(m.index, 1);
        assert_eq!(m.det.order, Some(0));
        assert!(m.samples >= MIN_INDEX_SAMPLES);
        let c = m.christoffel(0.1, &[0.0, 0.2, 0.3, 0.4]).unwrap();
        assert!(c.gamma.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn degenerate_metrics_are_rejected() {
        let dom = ChartDomain::boxed(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let g = diag(vec![Expr::var(0) * Expr::var(0), Expr::one()], dom.clone());
        // the centre of [-1, 1.3] is not the zero of det
        let k = CompactBox::new(vec![-1.0, -1.0], vec![1.3, 1.0]).unwrap();
        let err = check_metric(&g, &k, &EpsilonGrid::default(), &tol()).unwrap_err();
        assert!(matches!(err, Error::Metric(_)), "{err:?}");
        let k0 = CompactBox::cube(2, -1.0, 1.0).unwrap();
        assert!(check_metric(&g, &k0, &EpsilonGrid::default(), &tol()).is_err());
        let ok = check_metric(&g, &CompactBox::new(vec![0.5, -1.0], vec![1.5, 1.0]).unwrap(), &EpsilonGrid::default(), &tol());
        assert_eq!(ok.unwrap().index, 0);
        let asym = Representative::matrix(2, vec![Expr::one(), Expr::var(0), Expr::zero(), Expr::one()], dom).unwrap();
        assert!(check_metric(&asym, &k0, &EpsilonGrid::default(), &tol()).is_err());
    }

    #[test]
    fn sphere_christoffel_and_curvature() {
        let m = sphere();
        for &th in &[0.5f64, 1.1, 2.3] {
            let c = m.christoffel(0.3, &[th, 0.4]).unwrap();
            assert!((c.get(0, 1, 1) + th.sin() * th.cos()).abs() < 1e-12);
            assert!((c.get(1, 0, 1) - th.cos() / th.sin()).abs() < 1e-12);
            assert_eq!(c.get(1, 0, 1), c.get(1, 1, 0));
            assert!((m.sectional(0.3, &[th, 0.4], 0, 1).unwrap() - 1.0).abs() < 1e-9);
            let r = m.curvature(0.3, &[th, 0.4]).unwrap();
            // Ricci = g on the unit sphere
            assert!((r.ricci(0, 0) - 1.0).abs() < 1e-9 && (r.ricci(1, 1) - th.sin().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_geodesic_is_a_line() {
        let dom = ChartDomain::euclidean(2);
        let g = diag(vec![Expr::one(), Expr::one()], dom);
        let m = check_metric(&g, &CompactBox::cube(2, -1.0, 1.0).unwrap(), &EpsilonGrid::default(), &tol()).unwrap();
        let geo = m.geodesic(&[0.1, 0.2], &[1.0, -0.5], 0.1, 0.0, 2.0, &OdeOptions::default()).unwrap();
        let p = geo.position(1.5);
        assert!((p[0] - 1.6).abs() < 1e-9 && (p[1] + 0.55).abs() < 1e-9);
    }

    #[test]
    fn pp_wave_determinant_is_constant() {
        let m = Mollifier::shared(0, 1.0).unwrap();
        let f = Expr::var(0) * Expr::var(0) - Expr::var(1) * Expr::var(1);
        let g = pp_wave_metric(&f, &m, pp_wave_chart()).unwrap();
        let det = symbolic_det(g.components(), 4);
        assert_eq!(det.as_const(), Some(-0.25));
    }
}
