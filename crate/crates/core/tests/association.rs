use colombeau::association::{battery, embed_on_battery_chart, is_associated, non_associativity, TestFunction};
use colombeau::asymptotics::{classify_negligible, NegligibleMode, Verdict};
use colombeau::config::Tolerances;
use colombeau::{ChartDomain, CompactBox, DistributionSpec, EpsilonGrid, Expr, Mollifier, Representative};

fn chart() -> ChartDomain {
    ChartDomain::interval(-3.0, 3.0).unwrap()
}

#[test]
fn x_delta_is_associated_to_zero_but_not_negligible() {
    let m = Mollifier::shared(0, 1.0).unwrap();
    let g = EpsilonGrid::default();
    let tol = Tolerances::default();
    let d = embed_on_battery_chart(&DistributionSpec::Delta(0), &m).unwrap();
    let xd = Representative::sigma(Expr::var(0), chart()).unwrap().mul(&d).unwrap();
    let zero = Representative::sigma(Expr::zero(), chart()).unwrap();
    let r = is_associated(&xd, &zero, &battery(), &g, &tol).unwrap();
    assert_eq!(r.verdict, Verdict::Yes, "{:#?}", r.members.iter().map(|m| (m.limit.limit, m.limit.tail_spread)).collect::<Vec<_>>());
    let k = CompactBox::interval(-1.0, 1.0).unwrap();
    let c = classify_negligible(&xd, &k, 1, &g, NegligibleMode::AssumeModerate, &tol).unwrap();
    assert_eq!(c.verdict, Verdict::No);
}

#[test]
fn heaviside_powers_are_associated_to_heaviside() {
    let m = Mollifier::shared(0, 1.0).unwrap();
    let g = EpsilonGrid::default();
    let tol = Tolerances::default();
    let h = embed_on_battery_chart(&DistributionSpec::Heaviside, &m).unwrap();
    let h2 = h.mul(&h).unwrap();
    let h3 = h2.mul(&h).unwrap();
    for hm in [&h2, &h3] {
        let r = is_associated(hm, &h, &battery(), &g, &tol).unwrap();
        assert_eq!(r.verdict, Verdict::Yes, "{:#?}", r.members.iter().map(|m| (m.limit.limit, m.limit.tail_spread, m.limit.accelerated.is_some())).collect::<Vec<_>>());
    }
    let k = CompactBox::interval(-1.0, 1.0).unwrap();
    let c = classify_negligible(&h2.sub(&h).unwrap(), &k, 1, &g, NegligibleMode::AssumeModerate, &tol).unwrap();
    assert_eq!(c.verdict, Verdict::No);
}

#[test]
fn bracketings_of_delta_x_pv_differ() {
    let m = Mollifier::shared(0, 1.0).unwrap();
    let phi = TestFunction::bump(0.1, 0.8, 0.4).unwrap();
    let r = non_associativity(&m, &phi, &EpsilonGrid::default(), &Tolerances::default()).unwrap();
    eprintln!("{:?} {:?} {:?} {:?}", r.x_delta.limit, r.x_pv_minus_one.limit, r.right.limit, r.product.limit);
    assert!(r.x_delta.converged && r.x_delta.limit.abs() < 1e-6);
    assert!(r.x_pv_minus_one.converged && r.x_pv_minus_one.limit.abs() < 1e-6);
    assert!((r.right.limit - r.phi_at_zero).abs() < 1e-6);
    assert!((r.product.limit - 0.5 * r.phi_at_zero).abs() < 1e-5);
}
