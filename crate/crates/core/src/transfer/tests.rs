use super::*;
use crate::graded::Chart;
use crate::poly::Poly;
use crate::samples;

fn name_vec(b: &GradedBundle, terms: &[(&str, i64)]) -> FVec {
    let mut v = b.zero_vec();
    for &(n, c) in terms {
        v.0[b.index_of(n).unwrap()] = Poly::constant(b.nvars(), crate::poly::q(c));
    }
    v
}

#[test]
fn trivial_contraction_keeps_everything() {
    let s = samples::toy();
    let r = validate_contraction(&ContractionData::trivial(s.bundle().clone())).unwrap();
    assert_eq!(r.h.degrees(), s.bundle().degrees());
    assert_eq!(r.iota.to_matrix(), PolyMatrix::identity(5, 0));
    assert_eq!(r.pi.to_matrix(), PolyMatrix::identity(5, 0));
}

#[test]
fn toy_retract_is_e_f_h() {
    let r = validate_contraction(&samples::toy_contraction()).unwrap();
    let names: Vec<(&str, i32)> = r.h.basis().iter().map(|b| (b.name.as_str(), b.degree)).collect();
    assert_eq!(names, vec![("e", 1), ("f", 1), ("h", 2)]);
}

#[test]
fn acyclic_pair_has_zero_retract() {
    let b = GradedBundle::new(Chart::point(), vec![("e1".into(), 1), ("e2".into(), 2)]).unwrap().shared();
    let mut d = MultiOp::new(b.clone(), b.clone(), 1, 1);
    d.set(&[0], b.unit(1)).unwrap();
    let mut e = MultiOp::new(b.clone(), b.clone(), 1, -1);
    e.set(&[1], b.unit(0)).unwrap();
    let c = ContractionData::new(b.clone(), d.clone(), e, FiltrationSpec::Custom(vec![0, 0])).unwrap();
    assert_eq!(validate_contraction(&c).unwrap().h.rank(), 0);
    let s = CurvedStructure::with_delta(b.clone(), d, OpFamily::new(b.clone(), b.clone(), 1)).unwrap();
    let t = transfer_structure(&s, &c).unwrap();
    assert!(t.h_structure.total().is_zero());
    assert_eq!(t.h_structure.bundle().rank(), 0);
}

#[test]
fn broken_identities_report_witnesses() {
    let b = GradedBundle::new(Chart::point(), vec![("e1".into(), 1), ("e2".into(), 2)]).unwrap().shared();
    let mut d = MultiOp::new(b.clone(), b.clone(), 1, 1);
    d.set(&[0], b.unit(1)).unwrap();
    // η = 2·(e2 ↦ e1) gives ηδη = 4η ≠ η
    let mut e = MultiOp::new(b.clone(), b.clone(), 1, -1);
    e.set(&[1], b.unit(0).scale(&crate::poly::q(2))).unwrap();
    let c = ContractionData::new(b.clone(), d, e, FiltrationSpec::Auto).unwrap();
    match validate_contraction(&c) {
        Err(Error::Contraction { identity, witness }) => {
            assert_eq!(identity, "ηδη = η");
            assert_eq!(witness, "e2");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn natural_filtration_is_incompatible_with_eta() {
    let mut c = samples::toy_contraction();
    c.filtration = FiltrationSpec::Natural;
    assert!(matches!(validate_contraction(&c), Err(Error::Contraction { .. })));
}

#[test]
fn zero_lambda_transfers_to_zero() {
    let c = samples::toy_contraction();
    let b = c.bundle.clone();
    let s = CurvedStructure::with_delta(b.clone(), c.delta.clone(), OpFamily::new(b.clone(), b.clone(), 1)).unwrap();
    let t = transfer_structure(&s, &c).unwrap();
    assert!(t.h_structure.lambda().is_zero());
    assert_eq!(t.phi.phi().arities(), vec![1]);
    assert_eq!(t.phi1(), t.retract.iota);
}

#[test]
fn toy_transfer_values() {
    let s = samples::toy();
    let c = samples::toy_contraction();
    let t = transfer_structure(&s, &c).unwrap();
    let h = t.retract.h.clone();
    let l = c.bundle.clone();
    let (e, f, hh) = (h.index_of("e").unwrap(), h.index_of("f").unwrap(), h.index_of("h").unwrap());
    let mu = t.h_structure.lambda();
    assert_eq!(mu.eval_basis(&[e]), name_vec(&h, &[("h", 1)]));
    assert!(mu.op(2).is_none());
    assert_eq!(t.phi.phi().eval_basis(&[hh]), name_vec(&l, &[("g", 1), ("h", 1)]));
    assert_eq!(t.phi.phi().eval_basis(&[e, f]), name_vec(&l, &[("g", -1)]));
    assert_eq!(t.phi.phi().eval_basis(&[f, e]), name_vec(&l, &[("g", 1)]));
    assert_eq!(t.diagnostics.filtration, vec![0, 0, 2, 1, 2]);
    assert!(t.left_inverse_holds());
}

#[test]
fn oracle_and_closed_forms_match_recursion_on_toy() {
    let s = samples::toy();
    let c = samples::toy_contraction();
    let rec = transfer_structure(&s, &c).unwrap();
    let tree = transfer_tree_oracle(&s, &c).unwrap();
    assert_eq!(rec.phi, tree.phi);
    assert_eq!(rec.h_structure, tree.h_structure);
    let cf = transfer_closed_forms(&s, &c).unwrap();
    assert_eq!(cf.phi1, rec.phi1());
    assert_eq!(cf.mu0, rec.h_structure.curvature());
    assert_eq!(Some(&cf.mu1), rec.h_structure.lambda().op(1));
    assert_eq!(cf.pi1_tilde, rec.pi1_tilde);
}

#[test]
fn curvature_below_eta_vanishes_in_tree_sums() {
    // L¹ = ⟨e⟩ with λ₀ = e, λ₂(e, ·) on nothing else; η(λ₀) lands in degree 0
    let b = GradedBundle::new(Chart::point(), vec![("e".into(), 1), ("a".into(), 2)]).unwrap().shared();
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(0).set(&[], b.unit(0)).unwrap();
    let s = CurvedStructure::new(b.clone(), lam).unwrap();
    let c = ContractionData::trivial(b.clone());
    let t = transfer_tree_oracle(&s, &c).unwrap();
    assert_eq!(t.h_structure.curvature(), b.unit(0));
    let trees = trees::enumerate_trees(1, 2, &[0, 2]);
    assert!(trees.iter().any(trees::Tree::has_inner_curvature));
}

#[test]
fn zero_kernel_step_is_identity() {
    let s = samples::toy();
    let b = s.bundle().clone();
    let id = LooMorphism::identity(b.clone());
    let step = reduce::reduce_fibration_step(&id, &s, &s, 3).unwrap();
    assert_eq!(step.transfer.retract.h.rank(), b.rank());
    assert!(step.composite.is_linear());
}

#[test]
fn two_level_kernel_is_dropped() {
    // L¹ = ⟨e,f⟩, L² = ⟨g⟩ with λ₁f = g, onto ⟨e⟩; K¹ = ⟨f⟩, K² = ⟨g⟩
    let b = GradedBundle::new(Chart::point(), vec![("e".into(), 1), ("f".into(), 1), ("g".into(), 2)]).unwrap().shared();
    let t = GradedBundle::new(Chart::point(), vec![("e".into(), 1)]).unwrap().shared();
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(1).set(&[1], b.unit(2)).unwrap();
    let src = CurvedStructure::new(b.clone(), lam).unwrap();
    let tgt = CurvedStructure::zero(t.clone());
    let mut p = MultiOp::new(b.clone(), t.clone(), 1, 0);
    p.set(&[0], t.unit(0)).unwrap();
    let m = LooMorphism::linear(b, t, vec![], p).unwrap();
    let step = reduce::reduce_fibration_step(&m, &src, &tgt, 2).unwrap();
    let names: Vec<&str> = step.transfer.retract.h.basis().iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, vec!["e"]);
    assert!(reduce::degree_profile(&step.composite).iter().all(|p| p.iso));
}

#[test]
fn chain_reaches_isomorphism_in_degrees_two_and_up() {
    let (m, src, tgt) = samples::reduction_example();
    let chain = reduce_chain(&m, &src, &tgt).unwrap();
    assert_eq!(chain.steps.len(), 2);
    let h3 = &chain.steps[0].transfer.retract.h;
    let names: Vec<&str> = h3.basis().iter().map(|b| b.name.as_str()).collect();
    assert_eq!(names, vec!["a", "p", "q"]);
    // the degree-2 survivor is the polynomial frame q + x·r
    let col = chain.steps[0].transfer.retract.iota.eval_basis(&[h3.index_of("q").unwrap()]);
    assert_eq!(src.bundle().show_vec(&col), "q + (x)*r");
    assert!(chain.profile.iter().filter(|p| p.degree >= 2).all(|p| p.iso));
    assert_eq!(chain.structure.bundle().rank(), 1);
}
