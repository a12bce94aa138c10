use super::*;
use crate::poly::q;
use crate::samples;

fn qv(xs: &[i64]) -> Vec<Q> {
    xs.iter().map(|&x| q(x)).collect()
}

fn quasi_smooth() -> DerivedChart {
    DerivedChart::new(samples::quasi_smooth_square()).unwrap()
}

#[test]
fn classical_points_by_substitution() {
    let dc = quasi_smooth();
    assert!(is_classical_point(&dc, &qv(&[0])).unwrap());
    assert!(!is_classical_point(&dc, &qv(&[1])).unwrap());
    let plain = DerivedChart::plain(Chart::new(["x", "y"]).unwrap());
    assert!(is_classical_point(&plain, &qv(&[3, -7])).unwrap());
    assert!(matches!(is_classical_point(&dc, &qv(&[0, 0])), Err(Error::Dimension(_))));
}

#[test]
fn tangent_complex_of_double_zero() {
    let dc = quasi_smooth();
    let tc = tangent_complex(&dc, &qv(&[0])).unwrap();
    assert_eq!(tc.dims, vec![1, 1]);
    assert!(tc.differentials[0].is_zero());
    assert_eq!(complex_cohomology(&tc), vec![1, 1]);
    assert!(matches!(tangent_complex(&dc, &qv(&[2])), Err(Error::NotClassical(_))));
}

#[test]
fn plain_manifold_tangent_complex() {
    let plain = DerivedChart::plain(Chart::new(["x", "y"]).unwrap());
    let tc = tangent_complex(&plain, &qv(&[1, 2])).unwrap();
    assert_eq!(tc.dims, vec![2]);
    assert_eq!(complex_cohomology(&tc), vec![2]);
    assert_eq!(virtual_dimension(&plain), 2);
}

#[test]
fn toy_tangent_complex_is_lambda_one() {
    let dc = DerivedChart::new(samples::toy()).unwrap();
    let tc = tangent_complex(&dc, &[]).unwrap();
    assert_eq!(tc.dims, vec![0, 2, 2, 1]);
    assert_eq!(tc.differentials[1].rank(), 1);
    assert_eq!(tc.differentials[2].rank(), 1);
    assert_eq!(complex_cohomology(&tc), vec![0, 1, 0, 0]);
    assert_eq!(tc.euler_characteristic(), virtual_dimension(&dc));
}

#[test]
fn cohomology_of_simple_complexes() {
    let tc = TangentComplex { dims: vec![2, 3], differentials: vec![QMatrix::zeros(3, 2)] };
    assert_eq!(complex_cohomology(&tc), vec![2, 3]);
    let tc = TangentComplex { dims: vec![2, 2], differentials: vec![QMatrix::identity(2)] };
    assert_eq!(complex_cohomology(&tc), vec![0, 0]);
}

#[test]
fn virtual_dimension_of_quasi_smooth_is_zero() {
    assert_eq!(virtual_dimension(&quasi_smooth()), 0);
}

#[test]
fn identity_is_etale_and_projection_to_point_is_not() {
    let dc = quasi_smooth();
    let id = LooMorphism::identity(dc.bundle().clone());
    assert!(is_etale_at(&id, &dc, &dc, &qv(&[0])).unwrap());
    let pts = vec![qv(&[0])];
    assert!(is_weak_equivalence(&id, &dc, &dc, &pts, &pts).unwrap());

    let line = DerivedChart::plain(Chart::new(["x"]).unwrap());
    let point = DerivedChart::plain(Chart::point());
    let collapse = LooMorphism::linear(
        line.bundle().clone(),
        point.bundle().clone(),
        vec![],
        MultiOp::new(line.bundle().clone(), crate::linfty::pulled_target(line.bundle(), point.bundle()), 1, 0),
    )
    .unwrap();
    assert!(!is_etale_at(&collapse, &line, &point, &qv(&[5])).unwrap());
}

#[test]
fn weak_equivalence_needs_a_bijection() {
    let line = DerivedChart::plain(Chart::new(["x"]).unwrap());
    let id = LooMorphism::identity(line.bundle().clone());
    assert!(!is_weak_equivalence(&id, &line, &line, &[qv(&[1])], &[qv(&[2])]).unwrap());
    assert!(!is_weak_equivalence(&id, &line, &line, &[qv(&[1]), qv(&[1])], &[qv(&[1])]).unwrap());
}

#[test]
fn product_adds_dimensions() {
    let dc = quasi_smooth();
    let p = product(&dc, &dc, ["0", "1"]).unwrap();
    let names: Vec<&str> = p.bundle().basis().iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, vec!["e_0", "e_1"]);
    assert_eq!(p.chart().coords(), &["x0".to_string(), "x1".to_string()]);
    assert_eq!(p.bundle().show_vec(&p.structure().curvature()), "(x0^2)*e_0 + (x1^2)*e_1");
    assert_eq!(virtual_dimension(&p), 0);
    let diag = diagonal(&dc, ["0", "1"]).unwrap();
    assert!(check_morphism(&diag, dc.structure(), p.structure()).unwrap().pass);
}

#[test]
fn pullback_along_identity_returns_the_source() {
    let dc = quasi_smooth();
    let line = DerivedChart::plain(Chart::new(["x"]).unwrap());
    // 𝓜′ = quasi-smooth chart, fibration onto the plain line
    let fib = LooMorphism::linear(
        dc.bundle().clone(),
        line.bundle().clone(),
        identity_map(1),
        MultiOp::new(dc.bundle().clone(), crate::linfty::pulled_target(dc.bundle(), line.bundle()), 1, 0),
    )
    .unwrap();
    let id = LooMorphism::identity(line.bundle().clone());
    let fp = pullback_fibration(&fib, &dc, &line, &id, &line).unwrap();
    assert_eq!(fp.chart.bundle().degrees(), dc.bundle().degrees());
    assert_eq!(fp.chart.bundle().show_vec(&fp.chart.structure().curvature()), "(x^2)*e");
    assert!(fp.lift.is_linear());
}

#[test]
fn pullback_of_a_trivial_fibration_stays_trivial() {
    // 𝓜′ = (ℝ², ⟨e⟩, y·e) → ℝ¹ projecting to x is a trivial fibration;
    // pull it back along s ↦ s².
    let c = Chart::new(["x", "y"]).unwrap();
    let b = GradedBundle::new(c.clone(), vec![("e".into(), 1)]).unwrap().shared();
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(0).set(&[], FVec(vec![c.parse("y").unwrap()])).unwrap();
    let mp = DerivedChart::new(CurvedStructure::new(b.clone(), lam).unwrap()).unwrap();
    let line = DerivedChart::plain(Chart::new(["x"]).unwrap());
    let fib = LooMorphism::linear(
        b.clone(),
        line.bundle().clone(),
        vec![c.parse("x").unwrap()],
        MultiOp::new(b.clone(), crate::linfty::pulled_target(&b, line.bundle()), 1, 0),
    )
    .unwrap();
    assert!(is_weak_equivalence(&fib, &mp, &line, &[qv(&[2, 0])], &[qv(&[2])]).unwrap());

    let n = DerivedChart::plain(Chart::new(["s"]).unwrap());
    let sq = Chart::new(["s"]).unwrap().parse("s^2").unwrap();
    let g = LooMorphism::linear(
        n.bundle().clone(),
        line.bundle().clone(),
        vec![sq],
        MultiOp::new(n.bundle().clone(), crate::linfty::pulled_target(n.bundle(), line.bundle()), 1, 0),
    )
    .unwrap();
    let fp = pullback_fibration(&fib, &mp, &line, &g, &n).unwrap();
    assert_eq!(fp.chart.chart().coords(), &["s".to_string(), "y".to_string()]);
    for s in [-1, 0, 3] {
        let p = qv(&[s, 0]);
        assert!(is_classical_point(&fp.chart, &p).unwrap());
        assert!(is_weak_equivalence(&fp.projection, &fp.chart, &n, &[p], &[qv(&[s])]).unwrap());
    }
    assert!(!is_classical_point(&fp.chart, &qv(&[1, 1])).unwrap());
    assert_eq!(virtual_dimension(&fp.chart), 1);
}

#[test]
fn nonlinear_fibration_is_rejected() {
    let dc = quasi_smooth();
    let line = DerivedChart::plain(Chart::new(["x"]).unwrap());
    let c = Chart::new(["x"]).unwrap();
    let fib = LooMorphism::linear(
        dc.bundle().clone(),
        line.bundle().clone(),
        vec![c.parse("x^3").unwrap()],
        MultiOp::new(dc.bundle().clone(), crate::linfty::pulled_target(dc.bundle(), line.bundle()), 1, 0),
    )
    .unwrap();
    let id = LooMorphism::identity(line.bundle().clone());
    assert!(matches!(pullback_fibration(&fib, &dc, &line, &id, &line), Err(Error::Unrealizable(_))));
}
