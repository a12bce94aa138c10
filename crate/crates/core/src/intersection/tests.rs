use super::*;
use crate::linfty::check_morphism;
use crate::poly::q;

fn qv(xs: &[i64]) -> Vec<Q> {
    xs.iter().map(|&x| q(x)).collect()
}

fn plane() -> Chart {
    Chart::new(["x", "y"]).unwrap()
}

fn axis(label: &str, dir: [i64; 2]) -> Submanifold {
    let a = QMatrix::from_rows(vec![vec![q(dir[0])], vec![q(dir[1])]]);
    Submanifold::new(label, plane(), Presentation::Parametrized { matrix: a, offset: qv(&[0, 0]) }).unwrap()
}

fn parabola() -> Submanifold {
    let values = vec![Chart::new(["u"]).unwrap().parse("u^2").unwrap()];
    Submanifold::new("p", plane(), Presentation::Graph { free: vec![0], values }).unwrap()
}

#[test]
fn presentations_are_validated() {
    let bad = QMatrix::from_rows(vec![vec![q(1), q(2)], vec![q(2), q(4)]]);
    let r = Submanifold::new("a", plane(), Presentation::Parametrized { matrix: bad.clone(), offset: qv(&[0, 0]) });
    assert!(matches!(r, Err(Error::Verification(_))));
    let r = Submanifold::new("a", plane(), Presentation::ZeroLocus { matrix: bad, rhs: qv(&[0, 0]) });
    assert!(matches!(r, Err(Error::Verification(_))));
    let r = Submanifold::new("a", plane(), Presentation::Graph { free: vec![2], values: vec![] });
    assert!(matches!(r, Err(Error::Dimension(_))));
}

#[test]
fn zero_locus_embedding_and_preimage() {
    let c = QMatrix::from_rows(vec![vec![q(1), q(1)]]);
    let line = Submanifold::new("a", plane(), Presentation::ZeroLocus { matrix: c, rhs: qv(&[2]) }).unwrap();
    assert_eq!(line.dim(), 1);
    let u = line.preimage(&qv(&[5, -3])).unwrap().unwrap();
    let back: Vec<Q> = line.embedding().iter().map(|p| p.eval(&u)).collect();
    assert_eq!(back, qv(&[5, -3]));
    assert_eq!(line.preimage(&qv(&[0, 0])).unwrap(), None);
    assert_eq!(parabola().preimage(&qv(&[3, 9])).unwrap(), Some(qv(&[3])));
    assert_eq!(parabola().preimage(&qv(&[3, 8])).unwrap(), None);
}

#[test]
fn transversal_lines_meet_in_a_point() {
    let (x, y) = (axis("a", [1, 0]), axis("b", [0, 1]));
    let hfp = derived_intersection(&x, &y).unwrap();
    assert_eq!(virtual_dimension(&hfp.chart), 0);
    let pt = intersection_point(&x, &y, &hfp, &qv(&[0, 0])).unwrap();
    assert_eq!(pt.cohomology, vec![0, 0]);
    assert!(matches!(intersection_point(&x, &y, &hfp, &qv(&[1, 0])), Err(Error::NotClassical(_))));
}

#[test]
fn tangent_line_and_parabola() {
    let (x, y) = (parabola(), axis("b", [1, 0]));
    let hfp = derived_intersection(&x, &y).unwrap();
    assert_eq!(virtual_dimension(&hfp.chart), 0);
    let pt = intersection_point(&x, &y, &hfp, &qv(&[0, 0])).unwrap();
    assert_eq!(pt.cohomology, vec![1, 1]);
    let b = hfp.chart.bundle();
    assert_eq!(b.chart().coords(), &["p00".to_string(), "b01".to_string()]);
    assert_eq!(b.names(), vec!["dx", "dy"]);
    assert_eq!(b.show_vec(&hfp.chart.structure().curvature()), "(-p00 + b01)*dx + (-p00^2)*dy");
}

#[test]
fn point_meets_itself_with_excess() {
    let line = Chart::new(["x"]).unwrap();
    let origin = || {
        Submanifold::new("o", line.clone(), Presentation::Parametrized { matrix: QMatrix::zeros(1, 0), offset: qv(&[0]) })
            .unwrap()
    };
    let hfp = derived_intersection(&origin(), &origin()).unwrap();
    assert_eq!(virtual_dimension(&hfp.chart), -1);
    let pt = intersection_point(&origin(), &origin(), &hfp, &qv(&[0])).unwrap();
    assert_eq!(pt.cohomology, vec![0, 1]);
}

#[test]
fn projections_are_morphisms() {
    let (x, y) = (parabola(), axis("b", [1, 1]));
    let hfp = derived_intersection(&x, &y).unwrap();
    assert!(check_morphism(&hfp.to_base, hfp.chart.structure(), hfp.base.structure()).unwrap().pass);
    let z = DerivedChart::plain(plane());
    let paths = derived_path_space(&z).unwrap();
    assert!(check_morphism(&hfp.to_path_space, hfp.chart.structure(), paths.chart.structure()).unwrap().pass);
}

#[test]
fn fibered_product_over_a_derived_target() {
    // Both factors map into the double zero by the identity.
    let z = DerivedChart::new(crate::samples::quasi_smooth_square()).unwrap();
    let id = LooMorphism::identity(z.bundle().clone());
    let hfp = homotopy_fibered_product(&id, &z, &id, &z, &z).unwrap();
    assert_eq!(virtual_dimension(&hfp.chart), virtual_dimension(&z));
}
