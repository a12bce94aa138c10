use super::*;
use crate::geometry::DerivedChart;
use crate::graded::{Chart, FVec};
use crate::linfty::{check_morphism, check_structure, identity_map, transport_structure};
use crate::pathspace::{connection_change_iso, derived_path_space, ConnectionData};
use crate::samples;
use crate::transfer::transfer_structure;

/// a(1), b(1), c(2), d(3) over x: λ₀ = x·a, λ₁b = c, moved along
/// φ₂(a,b) = x·c, φ₂(b,c) = d, φ₂(a,c) = (x²−1)·d.
fn transported() -> (CurvedStructure, CurvedStructure, LooMorphism) {
    let ch = Chart::new(["x"]).unwrap();
    let b = GradedBundle::new(ch.clone(), vec![("a".into(), 1), ("b".into(), 1), ("c".into(), 2), ("d".into(), 3)])
        .unwrap()
        .shared();
    let p = |s: &str| ch.parse(s).unwrap();
    let vec_at = |i: usize, s: &str| {
        let mut v = b.zero_vec();
        v.0[i] = p(s);
        v
    };
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(0).set(&[], vec_at(0, "x")).unwrap();
    lam.op_mut(1).set(&[1], vec_at(2, "1")).unwrap();
    let s = CurvedStructure::new(b.clone(), lam).unwrap();
    let mut phi = OpFamily::identity(b.clone());
    phi.op_mut(2).set(&[0, 1], vec_at(2, "x")).unwrap();
    phi.op_mut(2).set(&[1, 2], vec_at(3, "1")).unwrap();
    phi.op_mut(2).set(&[0, 2], vec_at(3, "x^2 - 1")).unwrap();
    let t = transport_structure(&s, &phi).unwrap();
    let m = LooMorphism::new(b.clone(), b.clone(), identity_map(1), phi).unwrap();
    (s, t, m)
}

fn suite() -> Vec<(&'static str, CurvedStructure)> {
    let (s, t, _) = transported();
    let (_, red_src, red_tgt) = samples::reduction_example();
    let toy_h = transfer_structure(&samples::toy(), &samples::toy_contraction()).unwrap().h_structure;
    let amp = DerivedChart::new(samples::amplitude_two()).unwrap();
    let qs = DerivedChart::new(samples::quasi_smooth_square()).unwrap();
    let mut bent = crate::matrix::PolyMatrix::zeros(3, 3, 1);
    bent.set(0, 1, amp.bundle().chart().parse("x").unwrap());
    bent.set(1, 0, amp.bundle().chart().parse("x").unwrap());
    let bent = ConnectionData::new(amp.bundle().clone(), vec![bent]).unwrap();
    let flat = ConnectionData::flat(amp.bundle().clone());
    let change = connection_change_iso(&amp, &flat, &bent).unwrap();
    vec![
        ("toy", samples::toy()),
        ("quasi-smooth", samples::quasi_smooth_square()),
        ("amplitude two", samples::amplitude_two()),
        ("plain", samples::plain(&["x", "y"])),
        ("reduction source", red_src),
        ("reduction target", red_tgt),
        ("toy retract", toy_h),
        ("start", s),
        ("transported", t),
        ("quasi-smooth path space", derived_path_space(&qs).unwrap().chart.structure().clone()),
        ("amplitude-two path space", derived_path_space(&amp).unwrap().chart.structure().clone()),
        ("bent tangent", change.target.structure().clone()),
    ]
}

#[test]
fn zero_structure_gives_zero_derivation() {
    let s = CurvedStructure::zero(samples::toy().bundle().clone());
    let q = to_derivation(&s);
    assert!((0..5).all(|i| q.image(i).is_zero()));
    assert!(from_derivation(&q).unwrap().lambda().is_zero());
}

#[test]
fn double_zero_curvature_dualizes_to_a_function() {
    let s = samples::quasi_smooth_square();
    let q = to_derivation(&s);
    assert_eq!(q.image(0).show(s.bundle()), "x^2");
}

#[test]
fn toy_dual_has_the_quadratic_monomial() {
    let s = samples::toy();
    let q = to_derivation(&s);
    let b = s.bundle();
    let w = b.index_of("w").unwrap();
    let (e, f) = (b.index_of("e").unwrap(), b.index_of("f").unwrap());
    let mono = if e < f { vec![e, f] } else { vec![f, e] };
    assert_eq!(q.image(w).coefficient(&mono).map(|p| b.chart().show(p)), Some("1".to_string()));
    assert_eq!(q.image(w).show(b), "e^·f^ + g^ - h^");
}

#[test]
fn roundtrip_is_exact_on_the_suite() {
    for (name, s) in suite() {
        let back = from_derivation(&to_derivation(&s)).unwrap();
        assert_eq!(back.lambda(), &s.total(), "{name}");
    }
}

#[test]
fn square_zero_iff_structure_on_the_suite() {
    for (name, s) in suite() {
        let structure = check_structure(&s).pass;
        assert!(structure, "{name}");
        assert_eq!(to_derivation(&s).squares_to_zero(), structure, "{name}");
    }
    let broken = samples::broken_toy();
    assert!(!check_structure(&broken).pass);
    assert!(!to_derivation(&broken).squares_to_zero());
    let (_, t, _) = transported();
    let mut lam = t.lambda().clone();
    let b = t.bundle().clone();
    let mut v = b.zero_vec();
    v.0[3] = Poly::one(1);
    lam.op_mut(1).add(&[2], &v).unwrap();
    let bad = CurvedStructure::new(b, lam).unwrap();
    assert!(!check_structure(&bad).pass);
    assert!(!to_derivation(&bad).squares_to_zero());
}

#[test]
fn degree_violations_are_rejected() {
    let b = samples::toy().bundle().clone();
    let mut img = vec![SymElement::zero(0); 5];
    img[0] = monomial(&[0], 0);
    assert!(matches!(CdgaDerivation::new(b, img), Err(Error::Degree(_))));
}

#[test]
fn morphism_duality_matches_check_morphism() {
    let (s, t, m) = transported();
    let mut cases: Vec<(&str, LooMorphism, CurvedStructure, CurvedStructure)> = vec![("transport", m.clone(), s.clone(), t.clone())];
    let (red, red_src, red_tgt) = samples::reduction_example();
    cases.push(("reduction", red, red_src, red_tgt));
    let tr = transfer_structure(&samples::toy(), &samples::toy_contraction()).unwrap();
    cases.push(("transfer", tr.phi.clone(), tr.h_structure.clone(), samples::toy()));
    let qs = DerivedChart::new(samples::quasi_smooth_square()).unwrap();
    let ps = derived_path_space(&qs).unwrap();
    cases.push(("inclusion", ps.inclusion.clone(), qs.structure().clone(), ps.chart.structure().clone()));
    cases.push(("evaluation", ps.evaluation.clone(), ps.chart.structure().clone(), ps.square.structure().clone()));
    // Wrong direction: the transport read backwards is not a morphism.
    cases.push(("backwards", m.clone(), t.clone(), s.clone()));
    let toy = samples::toy();
    let mut doubled = OpFamily::new(toy.bundle().clone(), toy.bundle().clone(), 0);
    doubled.set_op(OpFamily::identity(toy.bundle().clone()).op(1).unwrap().scale(&crate::poly::q(2))).unwrap();
    let doubled = LooMorphism::new(toy.bundle().clone(), toy.bundle().clone(), vec![], doubled).unwrap();
    cases.push(("doubled", doubled, toy.clone(), toy));
    let mut passes = 0;
    for (name, m, src, tgt) in cases {
        let direct = check_morphism(&m, &src, &tgt).unwrap().pass;
        let dual = check_morphism_dual(&m, &src, &tgt).unwrap();
        assert_eq!(dual.is_empty(), direct, "{name}: {dual:?}");
        passes += direct as usize;
    }
    assert_eq!(passes, 5);
}

#[test]
fn leibniz_on_products() {
    let s = samples::toy();
    let q = to_derivation(&s);
    let b = s.bundle();
    let degs = b.degrees();
    let (e, g) = (b.index_of("e").unwrap(), b.index_of("g").unwrap());
    let eg = monomial(&[e, g], 0);
    let expected = {
        let mut x = q.image(e).mul(&monomial(&[g], 0), &degs);
        let y = monomial(&[e], 0).mul(q.image(g), &degs).map_coefficients(0, |p| -p);
        x.add_assign(&y, &degs);
        x
    };
    assert_eq!(q.apply(&eg), expected);
    let _ = FVec::zero(0, 0);
}

