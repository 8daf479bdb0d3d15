//! Sup-norms on compact boxes along the ε-grid, log-log order fits, and the
//! moderate / negligible classification. Generalized numbers and points live
//! here too.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::domain::{linspace, tensor, CompactBox, EpsilonGrid, Representative};
use crate::error::{Error, Result};
use crate::expr::Expr;

/// Values below this are treated as the zero floor in log space.
pub const ZERO_FLOOR: f64 = 1e-300;
/// Fitted slopes steeper than this count as non-moderate growth.
pub const MAX_MODERATE_ORDER: f64 = 40.0;
pub const MAX_NEGLIGIBLE_ORDER: u32 = 8;

const AXIS_SAMPLES_LOW_DIM: usize = 64;
const AXIS_SAMPLES_HIGH_DIM: usize = 16;
const WINDOW_SAMPLES: usize = 33;
const REFINE_ROUNDS: usize = 24;
const REFINE_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Yes => 0,
            Verdict::No => 1,
            Verdict::Inconclusive => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "order", rename_all = "lowercase")]
pub enum OrderVerdict {
    /// `sup ≤ C ε^{-N}`.
    Moderate(u32),
    /// `sup ≤ C ε^m` verified for this `m` (`u32::MAX` for an exactly vanishing tail).
    Negligible(u32),
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    /// Points used by the fit.
    pub points: usize,
    /// Exact zeros clamped to [`ZERO_FLOOR`].
    pub zeros: usize,
    /// Every value in the fit window vanished.
    pub zero_tail: bool,
    /// A value in the fit window was not finite.
    pub overflow: bool,
    pub verdict: OrderVerdict,
}

impl OrderEstimate {
    /// A clean fit: enough points, finite, residual within tolerance.
    pub fn is_clean(&self, tol: &Tolerances) -> bool {
        self.zero_tail || (!self.overflow && self.points >= 4 && self.slope.is_finite() && self.residual <= tol.tol_res)
    }
}

/// Least-squares slope of `ln value` against `ln ε` over the smallest half
/// of the grid.
pub fn fit_order(values: &[f64], grid: &EpsilonGrid, tol: &Tolerances) -> Result<OrderEstimate> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} values for a grid of {}", values.len(), grid.len())));
    }
    let start = grid.len() / 2;
    let eps = grid.values();
    let window: Vec<(f64, f64)> = (start..grid.len()).map(|j| (eps[j], values[j].abs())).collect();
    let mut est = OrderEstimate {
        slope: f64::NAN,
        intercept: f64::NAN,
        residual: f64::NAN,
        points: window.len(),
        zeros: 0,
        zero_tail: false,
        overflow: false,
        verdict: OrderVerdict::Inconclusive,
    };
    if window.iter().any(|(_, v)| !v.is_finite()) {
        est.overflow = true;
        return Ok(est);
    }
    est.zeros = window.iter().filter(|(_, v)| *v == 0.0).count();
    if est.zeros == window.len() {
        est.zero_tail = true;
        est.slope = f64::INFINITY;
        est.residual = 0.0;
        est.verdict = OrderVerdict::Negligible(u32::MAX);
        return Ok(est);
    }
    if window.len() - est.zeros < 4 {
        return Ok(est);
    }
    let pts: Vec<(f64, f64)> = window.iter().map(|(e, v)| (e.ln(), v.max(ZERO_FLOOR).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    est.slope = slope;
    est.intercept = intercept;
    est.residual = residual;
    if residual <= tol.tol_res && slope.is_finite() {
        est.verdict = if slope >= 1.0 - tol.tol_slope {
            OrderVerdict::Negligible((slope + tol.tol_slope).floor() as u32)
        } else {
            OrderVerdict::Moderate((-slope - tol.tol_slope).ceil().max(0.0) as u32)
        };
    }
    Ok(est)
}

/// Sample points of `K` for one ε: a uniform lattice, plus dense points
/// across every kernel window that meets `K`.
fn sample_axes(k: &CompactBox, windows: &[crate::expr::KernelWindow], torus: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = k.dim();
    let per_axis = if n <= 2 { AXIS_SAMPLES_LOW_DIM } else { AXIS_SAMPLES_HIGH_DIM };
    let mut axes: Vec<Vec<f64>> = (0..n).map(|i| linspace(k.lower[i], k.upper[i], per_axis)).collect();
    let spacing: Vec<f64> = (0..n).map(|i| (k.upper[i] - k.lower[i]) / (per_axis - 1) as f64).collect();
    for w in windows {
        if w.var >= n {
            continue;
        }
        let shifts: &[f64] = if torus { &[0.0, std::f64::consts::TAU] } else { &[0.0] };
        for &s in shifts {
            let lo = (w.lo + s).max(k.lower[w.var]);
            let hi = (w.hi + s).min(k.upper[w.var]);
            if lo <= hi {
                axes[w.var].extend(linspace(lo, hi, WINDOW_SAMPLES));
            }
        }
    }
    for a in &mut axes {
        a.sort_by(f64::total_cmp);
        a.dedup();
    }
    (axes, spacing)
}

/// Sup over `K` of `max_c |e_c|` at one ε: lattice sampling, then
/// coordinate-wise refinement around the running maximizer until the step is
/// at rounding level.
pub fn sup_at(rep: &Representative, exprs: &[Expr], k: &CompactBox, eps: f64) -> f64 {
    let dom = rep.domain();
    let value = |x: &[f64]| -> f64 {
        let y = dom.eval_coords(x);
        exprs.iter().map(|e| e.eval(eps, &y).abs()).fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
    };
    let windows: Vec<_> = exprs.iter().flat_map(|e| e.kernel_windows(eps)).collect();
    let (axes, mut spacing) = sample_axes(k, &windows, dom.is_torus());
    let mut best = f64::NEG_INFINITY;
    let mut arg = k.center();
    for p in tensor(&axes) {
        let v = value(&p);
        if v.is_nan() {
            return f64::NAN;
        }
        if v > best {
            best = v;
            arg = p;
        }
    }
    for _ in 0..REFINE_ROUNDS {
        for i in 0..k.dim() {
            let h = spacing[i];
            let lo = (arg[i] - h).max(k.lower[i]);
            let hi = (arg[i] + h).min(k.upper[i]);
            let mut p = arg.clone();
            for t in linspace(lo, hi, 2 * REFINE_FACTOR as usize + 1) {
                p[i] = t;
                let v = value(&p);
                if v > best {
                    best = v;
                    arg[i] = t;
                }
            }
        }
        for h in &mut spacing {
            *h /= REFINE_FACTOR;
        }
        let scale = k.lower.iter().zip(&k.upper).map(|(a, b)| a.abs().max(b.abs())).fold(1.0, f64::max);
        if spacing.iter().all(|h| *h <= 1e-13 * scale) {
            break;
        }
    }
    best
}

/// `sup_{x∈K} |∂^α u_ε(x)|` for every grid ε.
pub fn sup_on_compact(rep: &Representative, k: &CompactBox, alpha: &[usize], grid: &EpsilonGrid) -> Result<Vec<f64>> {
    if !rep.domain().contains_box(k) {
        return Err(Error::InvalidBox(format!("K = {:?} x {:?} is not inside the chart", k.lower, k.upper)));
    }
    let exprs: Vec<Expr> = rep.components().iter().map(|e| e.derive_multi(alpha)).collect();
    Ok(grid.values().par_iter().map(|&eps| sup_at(rep, &exprs, k, eps)).collect())
}

/// All multi-indices of length `n` with `|α| ≤ max`.
pub fn multi_indices(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; n]];
    for order in 1..=max {
        let mut level = Vec::new();
        fill(n, order, &mut vec![0; n], 0, &mut level);
        out.extend(level);
    }
    out
}

fn fill(n: usize, left: usize, cur: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
    if i + 1 == n {
        cur[i] = left;
        out.push(cur.clone());
        cur[i] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[i] = k;
        fill(n, left - k, cur, i + 1, out);
    }
    cur[i] = 0;
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaFit {
    pub alpha: Vec<usize>,
    pub values: Vec<f64>,
    pub estimate: OrderEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// `N_est` for moderateness, the verified `m` for negligibility.
    pub order: Option<u32>,
    pub fits: Vec<AlphaFit>,
}

fn fits_for(rep: &Representative, k: &CompactBox, alphas: Vec<Vec<usize>>, grid: &EpsilonGrid, tol: &Tolerances) -> Result<Vec<AlphaFit>> {
    alphas
        .into_iter()
        .map(|alpha| {
            let values = sup_on_compact(rep, k, &alpha, grid)?;
            let estimate = fit_order(&values, grid, tol)?;
            Ok(AlphaFit { alpha, values, estimate })
        })
        .collect()
}

/// Moderateness from the sup-norms of all `∂^α u_ε`, `|α| ≤ alpha_max`.
pub fn classify_moderate(
    rep: &Representative,
    k: &CompactBox,
    alpha_max: usize,
    grid: &EpsilonGrid,
    tol: &Tolerances,
) -> Result<Classification> {
    let fits = fits_for(rep, k, multi_indices(k.dim(), alpha_max), grid, tol)?;
    let mut verdict = Verdict::Yes;
    let mut n_est = 0u32;
    for f in &fits {
        let e = &f.estimate;
        if e.overflow || (e.slope.is_finite() && e.slope < -MAX_MODERATE_ORDER) {
            verdict = Verdict::No;
            break;
        }
        if !e.is_clean(tol) {
            verdict = Verdict::Inconclusive;
            continue;
        }
        if !e.zero_tail {
            n_est = n_est.max((-e.slope - tol.tol_slope).ceil().max(0.0) as u32);
        }
    }
    let order = (verdict == Verdict::Yes).then_some(n_est);
    Ok(Classification { verdict, order, fits })
}

/// Which derivatives the negligibility test inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegligibleMode {
    /// The net is known to be moderate; only `α = 0` is tested.
    AssumeModerate,
    /// Test every `|α| ≤ alpha_max`.
    AllDerivatives(usize),
}

/// Negligibility at order `m_max`: every inspected sup-norm decays with
/// slope at least `m_max - tol_slope`.
pub fn classify_negligible(
    rep: &Representative,
    k: &CompactBox,
    m_max: u32,
    grid: &EpsilonGrid,
    mode: NegligibleMode,
    tol: &Tolerances,
) -> Result<Classification> {
    if m_max > MAX_NEGLIGIBLE_ORDER {
        return Err(Error::Config(format!("m_max = {m_max} exceeds {MAX_NEGLIGIBLE_ORDER}")));
    }
    let alphas = match mode {
        NegligibleMode::AssumeModerate => vec![vec![0; k.dim()]],
        NegligibleMode::AllDerivatives(a) => multi_indices(k.dim(), a),
    };
    let fits = fits_for(rep, k, alphas, grid, tol)?;
    let threshold = m_max as f64 - tol.tol_slope;
    let mut verdict = Verdict::Yes;
    for f in &fits {
        let e = &f.estimate;
        if e.zero_tail {
            continue;
        }
        if !e.is_clean(tol) {
            if verdict == Verdict::Yes {
                verdict = Verdict::Inconclusive;
            }
            continue;
        }
        if e.slope < threshold {
            verdict = Verdict::No;
        }
    }
    let order = (verdict == Verdict::Yes).then_some(m_max);
    Ok(Classification { verdict, order, fits })
}

/// An element of the ring of generalized numbers: a net in `eps` only.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedNumber {
    net: Expr,
}

impl GeneralizedNumber {
    pub fn new(net: Expr) -> Result<Self> {
        if !net.is_coordinate_free() {
            return Err(Error::Shape(format!("generalized number {net} depends on coordinates")));
        }
        Ok(Self { net })
    }

    pub fn constant(c: f64) -> Self {
        Self { net: Expr::constant(c) }
    }

    pub fn net(&self) -> &Expr {
        &self.net
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.net.eval(eps, &[])
    }

    pub fn values(&self, grid: &EpsilonGrid) -> Vec<f64> {
        grid.values().iter().map(|&e| self.eval(e)).collect()
    }

    /// Negligibility of the number at order `m_max`.
    pub fn classify_negligible(&self, m_max: u32, grid: &EpsilonGrid, tol: &Tolerances) -> Result<(Verdict, OrderEstimate)> {
        let est = fit_order(&self.values(grid), grid, tol)?;
        let verdict = if est.zero_tail {
            Verdict::Yes
        } else if !est.is_clean(tol) {
            Verdict::Inconclusive
        } else if est.slope >= m_max as f64 - tol.tol_slope {
            Verdict::Yes
        } else {
            Verdict::No
        };
        Ok((verdict, est))
    }
}

/// A compactly supported generalized point `[(p_ε)_ε]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPoint {
    coords: Vec<Expr>,
    support: CompactBox,
}

impl GeneralizedPoint {
    /// Checks `p_ε ∈ K` at every grid ε.
    pub fn new(coords: Vec<Expr>, support: CompactBox, grid: &EpsilonGrid) -> Result<Self> {
        if coords.len() != support.dim() {
            return Err(Error::Shape(format!("{} coordinates for a {}-dimensional support box", coords.len(), support.dim())));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_coordinate_free()) {
            return Err(Error::Shape(format!("generalized point component {c} depends on coordinates")));
        }
        for eps in grid.values() {
            let p: Vec<f64> = coords.iter().map(|c| c.eval(eps, &[])).collect();
            if !support.contains(&p) {
                return Err(Error::Support { eps });
            }
        }
        Ok(Self { coords, support })
    }

    /// The classical point `p` as a constant net.
    pub fn classical(p: &[f64], support: CompactBox, grid: &EpsilonGrid) -> Result<Self> {
        Self::new(p.iter().map(|&v| Expr::constant(v)).collect(), support, grid)
    }

    pub fn coords(&self) -> &[Expr] {
        &self.coords
    }

    pub fn support(&self) -> &CompactBox {
        &self.support
    }
}

/// The net `ε ↦ u_ε(p_ε)`.
pub fn point_eval(rep: &Representative, p: &GeneralizedPoint) -> Result<GeneralizedNumber> {
    if rep.components().len() != 1 {
        return Err(Error::Shape("point evaluation needs a scalar net".into()));
    }
    if !rep.domain().contains_box(p.support()) {
        return Err(Error::InvalidBox(format!(
            "support box {:?} x {:?} is not inside the chart",
            p.support().lower,
            p.support().upper
        )));
    }
    GeneralizedNumber::new(rep.expr().substitute(p.coords()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Invertibility {
    pub verdict: Verdict,
    /// `N` with `|r_ε| ≥ c ε^N`.
    pub order: Option<u32>,
    pub min_value: f64,
    pub estimate: OrderEstimate,
}

/// Strict nonzeroness `|r_ε| ≥ c ε^N` of a generalized number.
pub fn is_invertible_number(r: &GeneralizedNumber, grid: &EpsilonGrid, tol: &Tolerances) -> Result<Invertibility> {
    let values: Vec<f64> = r.values(grid).iter().map(|v| v.abs()).collect();
    invertibility_from_values(&values, grid, tol)
}

pub(crate) fn invertibility_from_values(values: &[f64], grid: &EpsilonGrid, tol: &Tolerances) -> Result<Invertibility> {
    let estimate = fit_order(values, grid, tol)?;
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let (verdict, order) = if min_value == 0.0 || estimate.zero_tail {
        (Verdict::No, None)
    } else if estimate.overflow || min_value.is_nan() {
        (Verdict::Inconclusive, None)
    } else if estimate.is_clean(tol) && estimate.slope <= MAX_MODERATE_ORDER {
        (Verdict::Yes, Some((estimate.slope - tol.tol_slope).ceil().max(0.0) as u32))
    } else if estimate.slope.is_finite() && estimate.slope > MAX_NEGLIGIBLE_ORDER as f64 + tol.tol_slope {
        // decays faster than any curated power
        (Verdict::No, None)
    } else {
        (Verdict::Inconclusive, None)
    };
    Ok(Invertibility { verdict, order, min_value, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ChartDomain;
    use crate::mollifier::{DistributionSpec, Mollifier};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn exact_power_laws() {
        let g = EpsilonGrid::default();
        let v: Vec<f64> = g.values().iter().map(|e| 3.0 / e).collect();
        let f = fit_order(&v, &g, &tol()).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-9);
        assert_eq!(f.verdict, OrderVerdict::Moderate(1));
        let c = fit_order(&[2.5; 24], &g, &tol()).unwrap();
        assert!(c.slope.abs() < 1e-12);
        assert_eq!(c.verdict, OrderVerdict::Moderate(0));
        let z = fit_order(&[0.0; 24], &g, &tol()).unwrap();
        assert!(z.zero_tail);
        let short = EpsilonGrid::new(0.5, 0.7, 8).unwrap();
        let mut v = vec![1.0; 8];
        v[5] = 0.0;
        v[6] = 0.0;
        assert_eq!(fit_order(&v, &short, &tol()).unwrap().verdict, OrderVerdict::Inconclusive);
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(multi_indices(1, 2), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(multi_indices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert_eq!(multi_indices(3, 2).len(), 10);
    }

    #[test]
    fn sup_of_identity_and_kernel() {
        let g = EpsilonGrid::new(0.5, 0.7, 10).unwrap();
        let d = ChartDomain::interval(-3.0, 3.0).unwrap();
        let k = CompactBox::interval(-2.0, 2.0).unwrap();
        let x = Representative::sigma(Expr::var(0), d.clone()).unwrap();
        assert!(sup_on_compact(&x, &k, &[0], &g).unwrap().iter().all(|v| *v == 2.0));
        let m = Mollifier::shared(0, 1.0).unwrap();
        let delta = Representative::iota(&DistributionSpec::Delta(0), &m, d).unwrap();
        let k1 = CompactBox::interval(-1.0, 1.0).unwrap();
        let sups = sup_on_compact(&delta, &k1, &[0], &g).unwrap();
        for (s, e) in sups.iter().zip(g.values()) {
            assert!((s * e - m.value(0.0)).abs() < 1e-12);
        }
        let outside = CompactBox::interval(-4.0, 1.0).unwrap();
        assert!(sup_on_compact(&delta, &outside, &[0], &g).is_err());
    }

    #[test]
    fn invertibility_of_numbers() {
        let g = EpsilonGrid::default();
        let eps = Expr::eps();
        let sq = GeneralizedNumber::new(&eps * &eps).unwrap();
        let r = is_invertible_number(&sq, &g, &tol()).unwrap();
        assert_eq!((r.verdict, r.order), (Verdict::Yes, Some(2)));
        let flat = GeneralizedNumber::new(eps.powi(-1).unwrap().neg().exp()).unwrap();
        assert_eq!(is_invertible_number(&flat, &g, &tol()).unwrap().verdict, Verdict::No);
        let c = is_invertible_number(&GeneralizedNumber::constant(-0.25), &g, &tol()).unwrap();
        assert_eq!((c.verdict, c.order), (Verdict::Yes, Some(0)));
        assert_eq!(is_invertible_number(&GeneralizedNumber::constant(0.0), &g, &tol()).unwrap().verdict, Verdict::No);
    }

    #[test]
    fn generalized_points_respect_support() {
        let g = EpsilonGrid::default();
        let k = CompactBox::interval(0.0, 1.0).unwrap();
        assert!(GeneralizedPoint::new(vec![Expr::eps()], k.clone(), &g).is_ok());
        let far = Expr::eps().powi(-1).unwrap();
        assert!(matches!(GeneralizedPoint::new(vec![far], k, &g), Err(Error::Support { .. })));
    }
}
