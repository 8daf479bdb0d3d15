use colombeau::association::{battery, embed_on_battery_chart, is_associated};
use colombeau::asymptotics::{classify_negligible, fit_order, point_eval, GeneralizedPoint, NegligibleMode, Verdict};
use colombeau::config::Tolerances;
use colombeau::flows::{flow_net, map_equivalent, VectorField};
use colombeau::geometry::{check_metric, pp_wave_chart, pp_wave_metric};
use colombeau::mollifier::embed_distribution;
use colombeau::ode::OdeOptions;
use colombeau::{ChartDomain, CompactBox, DistributionSpec, EpsilonGrid, Expr, Mollifier, Representative};
use proptest::prelude::*;

fn m0() -> Mollifier {
    Mollifier::shared(0, 1.0).unwrap()
}

/// Smooth nodes plus scaled kernels, in x0..x2 and ε.
fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_expr_with((-3.0f64..3.0).boxed(), (-2.0f64..2.0).boxed())
}

fn arb_expr_with(constants: BoxedStrategy<f64>, scales: BoxedStrategy<f64>) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![constants.prop_map(Expr::constant), (0usize..3).prop_map(Expr::var), Just(Expr::eps()),];
    leaf.prop_recursive(3, 16, 2, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), scales.clone()).prop_map(|(a, c)| a.scale(c)),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.clone().prop_map(|a| (a.scale(0.25)).exp()),
            inner.clone().prop_map(|a| (a.cos() + 2.0).recip().unwrap()),
            inner.clone().prop_map(|a| Expr::kernel(&m0(), 0, a)),
        ]
    })
}

fn arb_point() -> impl Strategy<Value = (f64, [f64; 3])> {
    (1e-3f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(e, a, b, c)| (e, [a, b, c]))
}

fn close(a: f64, b: f64, scale: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * scale.max(f64::MIN_POSITIVE) || a == b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    // five points per case: 10⁴ samples
    #[test]
    fn ring_axioms_hold_pointwise(a in arb_expr(), b in arb_expr(), c in arb_expr(), pts in prop::collection::vec(arb_point(), 5)) {
        let assoc_add = ((&a + &b) + &c, &a + (&b + &c));
        let assoc_mul = ((&a * &b) * &c, &a * (&b * &c));
        let comm = (&a * &b, &b * &a);
        let dist = (&a * (&b + &c), &a * &b + &a * &c);
        for (eps, x) in pts {
            let (va, vb, vc) = (a.eval(eps, &x), b.eval(eps, &x), c.eval(eps, &x));
            let s_add = va.abs() + vb.abs() + vc.abs();
            let s_mul = (va * vb * vc).abs();
            let s_dist = va.abs() * (vb.abs() + vc.abs());
            prop_assert!(close(assoc_add.0.eval(eps, &x), assoc_add.1.eval(eps, &x), s_add, 1e-12));
            prop_assert!(close(assoc_mul.0.eval(eps, &x), assoc_mul.1.eval(eps, &x), s_mul, 1e-12));
            prop_assert!(close(comm.0.eval(eps, &x), comm.1.eval(eps, &x), (va * vb).abs(), 1e-12));
            prop_assert!(close(dist.0.eval(eps, &x), dist.1.eval(eps, &x), s_dist, 1e-12));
        }
    }

    #[test]
    fn derive_is_a_derivation(u in arb_expr(), v in arb_expr(), var in 0usize..3, (eps, x) in arb_point()) {
        let lhs = (&u * &v).derive(var).eval(eps, &x);
        let (du, dv) = (u.derive(var).eval(eps, &x), v.derive(var).eval(eps, &x));
        let (uu, vv) = (u.eval(eps, &x), v.eval(eps, &x));
        let rhs = du * vv + uu * dv;
        prop_assert!(close(lhs, rhs, (du * vv).abs() + (uu * dv).abs(), 1e-9), "{lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symbolic_derivative_matches_central_differences(u in arb_expr(), var in 0usize..3, (_, x) in arb_point()) {
        // moderate ε keeps the kernels wide compared with the steps
        let eps = 0.5;
        let exact = u.derive(var).eval(eps, &x);
        let fd = |h: f64| {
            let (mut p, mut q) = (x, x);
            p[var] += h;
            q[var] -= h;
            (u.eval(eps, &p) - u.eval(eps, &q)) / (2.0 * h)
        };
        let (e1, e2) = ((fd(1e-2) - exact).abs(), (fd(5e-3) - exact).abs());
        let scale = exact.abs().max(1.0);
        // only steps where truncation dominates rounding say anything about the order
        if e1 > 1e-9 * scale && e2 > 1e-11 * scale {
            let order = (e1 / e2).log2();
            prop_assert!(order >= 1.8, "observed order {order} (errors {e1:e}, {e2:e})");
        }
    }

    #[test]
    fn fit_order_recovers_exact_power_laws(c in 1e-3f64..1e3, s in -8.0f64..8.0) {
        let g = EpsilonGrid::default();
        let v: Vec<f64> = g.values().iter().map(|e| c * e.powf(s)).collect();
        let f = fit_order(&v, &g, &Tolerances::default()).unwrap();
        prop_assert!((f.slope - s).abs() <= 1e-6, "slope {} vs {s}", f.slope);
    }
}

fn curated() -> Vec<DistributionSpec> {
    ["delta", "delta'", "heaviside", "sign", "abs", "pv_inv", "pp[(-1,0):1; (0,1):x^2]"]
        .iter()
        .map(|s| DistributionSpec::parse(s).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn embedding_is_linear(i in 0usize..7, j in 0usize..7, a in -4.0f64..4.0) {
        let m = m0();
        let w = curated();
        let combo = DistributionSpec::Combination(vec![(a, w[i].clone()), (1.0, w[j].clone())]);
        let lhs = embed_distribution(&combo, &m).unwrap();
        let rhs = embed_distribution(&w[i], &m).unwrap().scale(a) + embed_distribution(&w[j], &m).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn embedding_commutes_with_derivatives() {
    let m = m0();
    for w in curated() {
        if let Ok(dw) = w.derivative() {
            let lhs = embed_distribution(&w, &m).unwrap().derive(0);
            let rhs = embed_distribution(&dw, &m).unwrap();
            assert_eq!(lhs, rhs, "{w}");
        }
    }
}

#[test]
fn assume_moderate_agrees_with_all_derivatives() {
    let g = EpsilonGrid::default();
    let tol = Tolerances::default();
    let m4 = Mollifier::shared(4, 1.0).unwrap();
    let dom = ChartDomain::interval(-3.0, 3.0).unwrap();
    let x = Expr::var(0);
    let h = embed_on_battery_chart(&DistributionSpec::Heaviside, &m0()).unwrap();
    let d = embed_on_battery_chart(&DistributionSpec::Delta(0), &m0()).unwrap();
    let sin_diff = Representative::iota(&DistributionSpec::Smooth(x.sin()), &m4, dom.clone())
        .unwrap()
        .sub(&Representative::sigma(x.sin(), dom.clone()).unwrap())
        .unwrap();
    let family = [
        ("zero", Representative::sigma(Expr::zero(), dom.clone()).unwrap(), 4),
        ("x delta", Representative::sigma(x.clone(), dom.clone()).unwrap().mul(&d).unwrap(), 1),
        ("H^2 - H", h.mul(&h).unwrap().sub(&h).unwrap(), 1),
        ("iota(sin) - sigma(sin)", sin_diff, 4),
        ("eps^6 sin", Representative::sigma(Expr::eps().powi(6).unwrap() * x.sin(), dom.clone()).unwrap(), 4),
        ("sin", Representative::sigma(x.sin(), dom).unwrap(), 1),
    ];
    let k = CompactBox::interval(-1.0, 1.0).unwrap();
    for (name, u, m) in family {
        let a = classify_negligible(&u, &k, m, &g, NegligibleMode::AssumeModerate, &tol).unwrap();
        let b = classify_negligible(&u, &k, m, &g, NegligibleMode::AllDerivatives(1), &tol).unwrap();
        assert_eq!(a.verdict, b.verdict, "{name}");
    }
}

fn point_products(u: Expr, v: Expr, a: f64, b: f64) -> (Expr, Expr) {
    let g = EpsilonGrid::default();
    let dom = ChartDomain::boxed(vec![-2.0; 3], vec![2.0; 3]).unwrap();
    let ur = Representative::scalar(u, dom.clone()).unwrap();
    let vr = Representative::scalar(v, dom).unwrap();
    let coords = vec![Expr::constant(a) + Expr::eps(), Expr::constant(b), Expr::eps().scale(-0.5)];
    let p = GeneralizedPoint::new(coords, CompactBox::cube(3, -1.0, 1.0).unwrap(), &g).unwrap();
    let lhs = point_eval(&ur.mul(&vr).unwrap(), &p).unwrap().net().clone();
    let rhs = point_eval(&ur, &p).unwrap().net() * point_eval(&vr, &p).unwrap().net();
    (lhs, rhs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // canonical forms do not distribute products over sums, so the two sides
    // are compared as nets, to rounding
    #[test]
    fn point_evaluation_is_multiplicative(u in arb_expr(), v in arb_expr(), a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let (lhs, rhs) = point_products(u, v, a, b);
        for eps in EpsilonGrid::default().values() {
            let (l, r) = (lhs.eval(eps, &[]), rhs.eval(eps, &[]));
            prop_assert!(close(l, r, l.abs().max(r.abs()), 1e-12), "{l} vs {r} at {eps}");
        }
    }
}

#[test]
fn association_is_an_equivalence_on_heaviside_powers() {
    let g = EpsilonGrid::default();
    let tol = Tolerances::default();
    let b = battery();
    let h = embed_on_battery_chart(&DistributionSpec::Heaviside, &m0()).unwrap();
    let h2 = h.mul(&h).unwrap();
    let h3 = h2.mul(&h).unwrap();
    let yes = |u: &Representative, v: &Representative| is_associated(u, v, &b, &g, &tol).unwrap().verdict;
    assert_eq!(yes(&h2, &h2), Verdict::Yes);
    assert_eq!(yes(&h2, &h), yes(&h, &h2));
    // transitivity spot check: H³ ≈ H², H² ≈ H, H³ ≈ H
    assert_eq!(yes(&h3, &h2), Verdict::Yes);
    assert_eq!(yes(&h2, &h), Verdict::Yes);
    assert_eq!(yes(&h3, &h), Verdict::Yes);
}

#[test]
fn association_is_compatible_with_smooth_multiplication() {
    let g = EpsilonGrid::default();
    let tol = Tolerances::default();
    let b = battery();
    let m = m0();
    let chart = ChartDomain::interval(-3.0, 3.0).unwrap();
    let f = Representative::sigma(Expr::poly(vec![1.0, 1.0, 0.5], Expr::var(0)), chart).unwrap();
    // f·δ = f(0)δ and f·H = f on (0, ∞)
    let cases = [
        ("delta", "delta"),
        ("heaviside", "pp[(0,inf):1 + x + 0.5x^2]"),
    ];
    for (w, fw) in cases {
        let lhs = embed_on_battery_chart(&DistributionSpec::parse(w).unwrap(), &m).unwrap().mul(&f).unwrap();
        let rhs = embed_on_battery_chart(&DistributionSpec::parse(fw).unwrap(), &m).unwrap();
        assert_eq!(is_associated(&lhs, &rhs, &b, &g, &tol).unwrap().verdict, Verdict::Yes, "{w}");
    }
}

#[test]
fn pp_wave_index_does_not_depend_on_the_kernel() {
    let g = EpsilonGrid::default();
    let (x, y) = (Expr::var(0), Expr::var(1));
    let f = &x * &x - &y * &y;
    let k = CompactBox::cube(4, -2.0, 2.0).unwrap();
    for (q, r) in [(0, 1.0), (2, 1.5), (4, 0.8)] {
        let m = Mollifier::shared(q, r).unwrap();
        let metric = pp_wave_metric(&f, &m, pp_wave_chart()).unwrap();
        let checked = check_metric(&metric, &k, &g, &Tolerances::default()).unwrap();
        assert_eq!(checked.index, 1, "q={q}, R={r}");
    }
}

#[test]
fn flow_of_an_eps_independent_field_is_eps_independent() {
    let g = EpsilonGrid::new(0.5, 0.5, 8).unwrap();
    let (a, b) = (Expr::var(0), Expr::var(1));
    let xi = VectorField::from_exprs(vec![1.0 + b.sin().scale(0.5), a.cos().scale(0.3)], ChartDomain::torus()).unwrap();
    let starts = vec![vec![0.1, 0.2], vec![3.0, 5.0], vec![6.0, 1.0]];
    let net = flow_net(&xi, &g, 4.0, starts.clone(), &OdeOptions::default()).unwrap();
    let torus = ChartDomain::torus();
    for i in 0..starts.len() {
        for t in [0.5, 2.0, 4.0] {
            let first = net.at(0, i, t);
            for j in 1..g.len() {
                assert!(torus.distance(&first, &net.at(j, i, t)) <= 1e-8);
            }
        }
    }
}

#[test]
fn equivalence_is_compatible_with_composition() {
    let g = EpsilonGrid::default();
    let tol = Tolerances::default();
    let dom = ChartDomain::interval(-3.0, 3.0).unwrap();
    let k = CompactBox::interval(-1.0, 1.0).unwrap();
    let x = Expr::var(0);
    // ε³ stays well above the rounding of x at the smallest grid ε
    let e3 = Expr::eps().powi(3).unwrap();
    let u = Representative::scalar(x.clone() + &e3 * x.sin(), dom.clone()).unwrap();
    let u2 = Representative::scalar(x.clone(), dom.clone()).unwrap();
    let v = Representative::scalar(x.sin().scale(0.5) + e3.clone(), dom.clone()).unwrap();
    let v2 = Representative::scalar(x.sin().scale(0.5), dom.clone()).unwrap();
    let m = 2;
    assert_eq!(map_equivalent(&u, &u2, &dom, &k, m, &g, &tol).unwrap().verdict, Verdict::Yes);
    let kv = CompactBox::interval(-2.0, 2.0).unwrap();
    assert_eq!(map_equivalent(&v, &v2, &dom, &kv, m, &g, &tol).unwrap().verdict, Verdict::Yes);
    let vu = v.compose(&u, &k, &g).unwrap();
    let vu2 = v2.compose(&u2, &k, &g).unwrap();
    assert_eq!(map_equivalent(&vu, &vu2, &dom, &k, m, &g, &tol).unwrap().verdict, Verdict::Yes);
}
