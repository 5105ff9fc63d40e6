use phaselab::critpoints::{find_critical_points, CritSettings};
use phaselab::fields::{BoxDomain, ExpressionField, YRange};
use phaselab::irrational::{family_det, harmonic_window, IrrationalityProblem, KnownAnswer};
use phaselab::lagrangian::build_norm_lagrangian;
use phaselab::quadrature::{oscillatory_integral, QuadratureSettings};
use phaselab::stationary::{predict_phase, PhaseVerdict};

#[test]
fn found_zero_level_point_is_the_family_member() {
    let f = ExpressionField::parse("(var x)", &["x"]).unwrap();
    let p = IrrationalityProblem::new(f, 0.5, 0.05, YRange::default(), KnownAnswer::Rational("1/2".into()), false)
        .unwrap();
    let fam = p.family().unwrap();
    let cut = harmonic_window(fam.m0_value(), 4);
    let l = p.lagrangian(cut, cut).unwrap();
    let points = find_critical_points(&l, &CritSettings::default()).unwrap();
    let zero: Vec<_> = points.iter().filter(|pt| pt.zero_level).collect();
    assert_eq!(zero.len(), 1);
    let (m, n) = fam.member(2);
    let want = [0.5, 0.5, m, n];
    for (got, want) in zero[0].location.iter().zip(want) {
        assert!((got - want).abs() < 1e-9, "{:?}", zero[0].location);
    }
    let det = family_det(&p, &fam, 2).exact;
    assert!((zero[0].det - det).abs() <= 1e-8 * det.abs());
    assert_eq!(zero[0].signature, 4);
}

#[test]
fn two_dimensional_prediction_matches_quadrature() {
    let names = ["x", "y"];
    let system = [
        ExpressionField::parse("(var x)", &names).unwrap(),
        ExpressionField::parse("(* 1.4 (var y))", &names).unwrap(),
    ];
    let l = build_norm_lagrangian(&system, BoxDomain::from_bounds(&[(-0.5, 0.5), (-0.5, 0.5)]).unwrap()).unwrap();
    let points = find_critical_points(&l, &CritSettings::default()).unwrap();
    let pred = predict_phase(&points, YRange::default(), 2).unwrap();
    let PhaseVerdict::Converges { phase } = pred.verdict else { panic!("{:?}", pred.verdict) };
    assert!((phase - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    let r = oscillatory_integral(&l, YRange::default(), 200.0, &QuadratureSettings::default()).unwrap();
    assert!((r.value.arg() - phase).abs() < 0.05, "{}", r.value.arg());
}
