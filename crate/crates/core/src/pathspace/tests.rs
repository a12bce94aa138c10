use super::*;
use crate::poly::q;
use crate::samples;

fn chart(s: CurvedStructure) -> DerivedChart {
    DerivedChart::new(s).unwrap()
}

fn swap_connection(b: &Arc<GradedBundle>, entry: &str) -> ConnectionData {
    let mut a = PolyMatrix::zeros(3, 3, 1);
    let p = b.chart().parse(entry).unwrap();
    a.set(0, 1, p.clone());
    a.set(1, 0, p);
    ConnectionData::new(b.clone(), vec![a]).unwrap()
}

#[test]
fn shifted_tangent_of_plain_line() {
    let dc = chart(samples::plain(&["x"]));
    let t = shifted_tangent(&dc, &ConnectionData::flat(dc.bundle().clone())).unwrap();
    assert_eq!(t.bundle().names(), vec!["dx"]);
    assert!(t.structure().lambda().is_zero());
}

#[test]
fn shifted_tangent_of_double_zero() {
    let dc = chart(samples::quasi_smooth_square());
    let t = shifted_tangent(&dc, &ConnectionData::flat(dc.bundle().clone())).unwrap();
    let b = t.bundle();
    assert_eq!(b.names(), vec!["dx", "e", "e_dt"]);
    assert_eq!(b.degrees(), vec![1, 1, 2]);
    let lam = t.structure().lambda();
    assert_eq!(b.show_vec(&lam.eval_basis(&[])), "(x^2)*e");
    assert_eq!(b.show_vec(&lam.eval_basis(&[0])), "(2*x)*e_dt");
    assert!(lam.eval_basis(&[1]).is_zero());
}

#[test]
fn connection_validation() {
    let dc = chart(samples::amplitude_two());
    let b = dc.bundle().clone();
    let mut mixed = PolyMatrix::zeros(3, 3, 1);
    mixed.set(0, 2, Poly::one(1));
    assert!(matches!(ConnectionData::new(b.clone(), vec![mixed]), Err(Error::Degree(_))));
    assert!(matches!(ConnectionData::new(b.clone(), vec![]), Err(Error::Dimension(_))));
    assert!(ConnectionData::new(b.clone(), vec![PolyMatrix::zeros(3, 3, 1)]).unwrap().is_flat());
}

#[test]
fn shifted_tangent_with_constant_and_varying_connections() {
    let dc = chart(samples::amplitude_two());
    for entry in ["1", "x", "x^2 - 3"] {
        let conn = swap_connection(dc.bundle(), entry);
        let t = shifted_tangent(&dc, &conn).unwrap();
        assert!(check_structure(t.structure()).pass, "connection entry {entry}");
    }
}

#[test]
fn connection_change_is_a_morphism() {
    let dc = chart(samples::amplitude_two());
    let flat = ConnectionData::flat(dc.bundle().clone());
    let bent = swap_connection(dc.bundle(), "x");
    let change = connection_change_iso(&dc, &flat, &bent).unwrap();
    let b = change.source.bundle();
    let phi = &change.iso.phi();
    let (e, dx) = (b.index_of("e").unwrap(), b.index_of("dx").unwrap());
    // Φ₂(e, dx) = (Ā − A)e dt = x·u_dt.
    assert_eq!(b.show_vec(&phi.eval_basis(&[e, dx])), "(x)*u_dt");
    assert!(phi.eval_basis(&[e]) == b.unit(e));
    let back = connection_change_iso(&dc, &bent, &flat).unwrap();
    let round = compose_morphisms(&change.iso, &back.iso).unwrap();
    assert!(round.phi().eval_basis(&[e, dx]).is_zero());
}

#[test]
fn path_curvature_along_identity_path() {
    let dc = chart(samples::quasi_smooth_square());
    let flat = ConnectionData::flat(dc.bundle().clone());
    let ps = path_structure(&dc, &StraightPath { start: vec![q(0)], end: vec![q(1)] }, &flat).unwrap();
    let b = ps.fiber().bundle();
    assert_eq!(b.show_vec(&ps.curvature()), "dx + (t^2)*e");
    assert!(ps.check_square_zero(4).pass);
    let bent = swap_connection(&chart(samples::amplitude_two()).bundle().clone(), "1");
    let amp = chart(samples::amplitude_two());
    assert!(path_structure(&amp, &StraightPath::constant(vec![q(0)]), &bent).is_err());
}

#[test]
fn path_structure_square_zero_on_amplitude_two() {
    let dc = chart(samples::amplitude_two());
    let flat = ConnectionData::flat(dc.bundle().clone());
    let ps = path_structure(&dc, &StraightPath { start: vec![q(-1)], end: vec![q(2)] }, &flat).unwrap();
    assert!(ps.check_square_zero(3).pass);
}

#[test]
fn integral_contraction_values() {
    let dc = chart(samples::quasi_smooth_square());
    let c = fm_contraction(dc.bundle()).unwrap();
    let b = c.bundle().clone();
    let (edt, e) = (b.index_of("e_dt").unwrap(), b.index_of("e").unwrap());
    let t = Poly::var(1, 0);
    let mut x = b.zero_vec();
    x.0[edt] = t.clone();
    // e has degree 1: η(t dt) = −(t²/2 − t/2).
    assert_eq!(b.show_vec(&c.eta(&x)), "(-1/2*t^2 + 1/2*t)*e");
    let mut y = b.zero_vec();
    y.0[e] = t.pow(2);
    assert_eq!(b.show_vec(&c.pi_lin(&y)), "(t)*e");
    assert_eq!(b.show_vec(&c.pi_con(&x)), "1/2*e_dt");
    assert!(c.verify(8).pass);
    let amp = fm_contraction(chart(samples::amplitude_two()).bundle()).unwrap();
    let report = amp.verify(8);
    assert!(report.pass, "{:?}", report.failures.first());
}

#[test]
fn path_space_of_the_line() {
    let dc = chart(samples::plain(&["x"]));
    let ps = derived_path_space(&dc).unwrap();
    let b = ps.chart.bundle();
    assert_eq!(b.chart().coords(), &["x0".to_string(), "x1".to_string()]);
    assert_eq!(b.names(), vec!["dx"]);
    assert_eq!(b.show_vec(&ps.chart.structure().total().eval_basis(&[])), "(-x0 + x1)*dx");
    assert_eq!(virtual_dim(&ps), 1);
    let rep = factorization_check(&dc, &ps, &[vec![q(0)], vec![q(5)]]).unwrap();
    assert!(rep.pass, "{rep:?}");
}

fn virtual_dim(ps: &PathSpace) -> i64 {
    crate::geometry::virtual_dimension(&ps.chart)
}

#[test]
fn path_space_of_double_zero() {
    let dc = chart(samples::quasi_smooth_square());
    let ps = derived_path_space(&dc).unwrap();
    let b = ps.chart.bundle();
    let total = ps.chart.structure().total();
    let at = |n: &str| b.index_of(n).unwrap();
    assert_eq!(b.show_vec(&total.eval_basis(&[])), "(-x0 + x1)*dx + (x0^2)*e_0 + (x1^2)*e_1");
    assert_eq!(b.show_vec(&total.eval_basis(&[at("dx")])), "(x0 + x1)*e_dt");
    assert_eq!(b.show_vec(&total.eval_basis(&[at("e_0")])), "e_dt");
    assert_eq!(b.show_vec(&total.eval_basis(&[at("e_1")])), "-e_dt");
    assert_eq!(virtual_dim(&ps), crate::geometry::virtual_dimension(&dc));
    let rep = factorization_check(&dc, &ps, &[vec![q(0)]]).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn path_space_of_amplitude_two() {
    let dc = chart(samples::amplitude_two());
    let ps = derived_path_space(&dc).unwrap();
    assert_eq!(virtual_dim(&ps), crate::geometry::virtual_dimension(&dc));
    let amp = dc.bundle().max_degree() as usize;
    for k in amp + 1..=amp + 3 {
        assert!(ps.chart.structure().lambda().op(k).is_none_or(|o| o.is_zero()));
    }
    let rep = factorization_check(&dc, &ps, &[vec![q(0)]]).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn path_space_of_the_toy() {
    let dc = chart(samples::toy());
    let ps = derived_path_space(&dc).unwrap();
    let rep = factorization_check(&dc, &ps, &[vec![]]).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn curved_connection_is_rejected_for_path_space() {
    let dc = chart(samples::amplitude_two());
    let bent = swap_connection(dc.bundle(), "1");
    assert!(matches!(derived_path_space_with(&dc, &bent), Err(Error::Verification(_))));
}
