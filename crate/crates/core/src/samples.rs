//! Small structures shared by tests, fixtures and documentation.

use crate::graded::{Chart, FVec, GradedBundle};
use crate::linfty::{identity_map, CurvedStructure, LooMorphism};
use crate::transfer::{ContractionData, FiltrationSpec};
use crate::multiop::{MultiOp, OpFamily};
use crate::poly::Poly;

fn toy_with(h_image: bool) -> CurvedStructure {
    let b = GradedBundle::new(
        Chart::point(),
        vec![("e".into(), 1), ("f".into(), 1), ("g".into(), 2), ("h".into(), 2), ("w".into(), 3)],
    )
    .expect("toy bundle")
    .shared();
    let [e, f, g, h, w] = ["e", "f", "g", "h", "w"].map(|n| b.index_of(n).unwrap());
    let mut delta = MultiOp::new(b.clone(), b.clone(), 1, 1);
    delta.set(&[g], b.unit(w)).unwrap();
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    let mut gh = b.unit(g);
    gh.add_assign(&b.unit(h));
    lam.op_mut(1).set(&[e], gh).unwrap();
    if h_image {
        lam.op_mut(1).set(&[h], b.unit(w).neg()).unwrap();
    }
    lam.op_mut(2).set(&[e, f], b.unit(w)).unwrap();
    CurvedStructure::with_delta(b, delta, lam).expect("toy structure")
}

/// Three levels over a point: L¹ = ⟨e,f⟩, L² = ⟨g,h⟩, L³ = ⟨w⟩ with
/// δg = w, λ₁e = g+h, λ₁h = −w, λ₂(e,f) = w.
///
/// The quadratic bracket sits on (e,f): on a single odd generator it would be
/// killed by graded symmetry.
pub fn toy() -> CurvedStructure {
    toy_with(true)
}

/// The toy with λ₁h = 0; fails the structure equation at e.
pub fn broken_toy() -> CurvedStructure {
    toy_with(false)
}

/// (ℝ¹, L¹ = ⟨e⟩, λ₀ = x²e).
pub fn quasi_smooth_square() -> CurvedStructure {
    let c = Chart::new(["x"]).unwrap();
    let b = GradedBundle::new(c.clone(), vec![("e".into(), 1)]).unwrap().shared();
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(0).set(&[], FVec(vec![c.parse("x^2").unwrap()])).unwrap();
    CurvedStructure::new(b, lam).unwrap()
}

/// A plain affine space: no fiber, no structure.
pub fn plain(coords: &[&str]) -> CurvedStructure {
    let b = GradedBundle::new(Chart::new(coords.iter().copied()).unwrap(), vec![]).unwrap().shared();
    CurvedStructure::zero(b)
}

/// Amplitude 2 over ℝ¹: L¹ = ⟨e,u⟩, L² = ⟨r⟩ with λ₀ = x·e and λ₁u = x·r.
pub fn amplitude_two() -> CurvedStructure {
    let c = Chart::new(["x"]).unwrap();
    let b = GradedBundle::new(c.clone(), vec![("e".into(), 1), ("u".into(), 1), ("r".into(), 2)])
        .unwrap()
        .shared();
    let x = c.parse("x").unwrap();
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(0).set(&[], FVec(vec![x.clone(), Poly::zero(1), Poly::zero(1)])).unwrap();
    lam.op_mut(1).set(&[1], FVec(vec![Poly::zero(1), Poly::zero(1), x])).unwrap();
    CurvedStructure::new(b, lam).unwrap()
}

/// The toy's contraction: δg = w, ηw = g, levels found automatically.
pub fn toy_contraction() -> ContractionData {
    let s = toy();
    let b = s.bundle().clone();
    let mut eta = MultiOp::new(b.clone(), b.clone(), 1, -1);
    eta.set(&[b.index_of("w").unwrap()], b.unit(b.index_of("g").unwrap())).unwrap();
    ContractionData::new(b, s.delta().unwrap().clone(), eta, FiltrationSpec::Auto).unwrap()
}

/// A linear fibration over ℝ¹ used to exercise the reduction chain.
///
/// Source: L¹ = ⟨a,p⟩, L² = ⟨q,r⟩, L³ = ⟨s⟩ with λ₀ = x·a, λ₁p = q,
/// λ₁q = −x·s, λ₁r = s, λ₂(a,p) = s. Target: L′¹ = ⟨a⟩ with λ′₀ = x·a.
/// φ₁ projects onto a. Level 3 contracts (r, s) and leaves the polynomial
/// frame q + x·r in degree 2; level 2 then contracts (p, q + x·r).
pub fn reduction_example() -> (LooMorphism, CurvedStructure, CurvedStructure) {
    let c = Chart::new(["x"]).unwrap();
    let x = c.parse("x").unwrap();
    let b = GradedBundle::new(
        c.clone(),
        vec![("a".into(), 1), ("p".into(), 1), ("q".into(), 2), ("r".into(), 2), ("s".into(), 3)],
    )
    .unwrap()
    .shared();
    let [a, p, q, r, s] = ["a", "p", "q", "r", "s"].map(|n| b.index_of(n).unwrap());
    let scaled = |i: usize, k: &Poly| {
        let mut v = b.zero_vec();
        v.0[i] = k.clone();
        v
    };
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(0).set(&[], scaled(a, &x)).unwrap();
    lam.op_mut(1).set(&[p], b.unit(q)).unwrap();
    lam.op_mut(1).set(&[q], scaled(s, &-&x)).unwrap();
    lam.op_mut(1).set(&[r], b.unit(s)).unwrap();
    lam.op_mut(2).set(&[a, p], b.unit(s)).unwrap();
    let src = CurvedStructure::new(b.clone(), lam).unwrap();

    let t = GradedBundle::new(c, vec![("a".into(), 1)]).unwrap().shared();
    let mut lam_t = OpFamily::new(t.clone(), t.clone(), 1);
    lam_t.op_mut(0).set(&[], FVec(vec![x])).unwrap();
    let tgt = CurvedStructure::new(t.clone(), lam_t).unwrap();

    let mut proj = MultiOp::new(b.clone(), t.clone(), 1, 0);
    proj.set(&[a], t.unit(0)).unwrap();
    let m = LooMorphism::linear(b, t, identity_map(1), proj).unwrap();
    (m, src, tgt)
}
