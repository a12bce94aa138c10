//! Acceptance criteria 1–12, one line each. Run with
//! `cargo test -p derive-core --test acceptance`.
//!
//! Criterion 4 contains the literal φ₂(e,e) = −g, which no graded-symmetric
//! operation can satisfy (e is odd, so φ₂(e,e) = −φ₂(e,e)). It is checked as
//! stated, reported FAIL, and listed in `EXPECTED_FAIL`; the harness exits
//! nonzero if any other criterion fails or if criterion 4 starts passing.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use derive_core::cdga::{from_derivation, to_derivation};
use derive_core::compose::{axiom_terms, circ_on, render_axiom};
use derive_core::geometry::{
    classical_points, complex_cohomology, is_classical_point, is_weak_equivalence, tangent_complex,
    virtual_dimension, DerivedChart,
};
use derive_core::graded::{Chart, FVec, GradedBundle};
use derive_core::intersection::{derived_intersection, intersection_point, Presentation, Submanifold};
use derive_core::io::{ChartDocument, MorphismDocument};
use derive_core::linfty::{
    check_morphism, check_structure, compose_morphisms, identity_map, invert_morphism, transport_structure,
    CurvedStructure, LooMorphism,
};
use derive_core::matrix::{PolyMatrix, QMatrix};
use derive_core::multiop::{MultiOp, OpFamily};
use derive_core::pathspace::{
    connection_change_iso, derived_path_space, factorization_check, fm_contraction, path_structure, ConnectionData,
    StraightPath,
};
use derive_core::poly::{q, qf, Poly, Q};
use derive_core::samples;
use derive_core::transfer::{reduce_chain, transfer_closed_forms, transfer_structure, transfer_tree_oracle};

const EXPECTED_FAIL: &[u32] = &[4];
const SEEDS: std::ops::Range<u64> = 0..12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixture(name: &str) -> String {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn chart(s: CurvedStructure) -> DerivedChart {
    DerivedChart::new(s).unwrap()
}

/// The structure equations for n = 0, 1, 2 as written by hand, with TeX
/// spacing removed; each must be reproduced by expanding (δ+λ)∘(δ+λ).
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let expected = [
        "λ_1(λ_0)=0",
        "λ_2(λ_0,x)+λ_1²x=0",
        "λ_3(λ_0,x,y)+λ_2(λ_1(x),y)+(-1)^{|x||y|}λ_2(λ_1(y),x)+λ_1(λ_2(x,y))=0",
    ];
    let rendered: Vec<String> = (0..3).map(render_axiom).collect();
    let mut pass = rendered.iter().zip(expected).all(|(r, e)| r == e);
    // Rank-1 data in every degree pattern: the symbolic terms must sum to the
    // engine's own ∘ on concrete inputs.
    for (d1, d2) in [(1, 1), (1, 2), (2, 2)] {
        let b = GradedBundle::new(
            Chart::new(["s"]).unwrap(),
            vec![("x".into(), d1), ("y".into(), d2), ("c".into(), 1), ("z".into(), d1 + d2 + 1), ("v".into(), d1 + 1), ("u".into(), d2 + 1)],
        );
        let Ok(b) = b.map(GradedBundle::shared) else { continue };
        let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
        let s = b.chart().var(0);
        let idx = |n: &str| b.index_of(n).unwrap();
        let scaled = |i: usize, p: &Poly| {
            let mut v = b.zero_vec();
            v.0[i] = p.clone();
            v
        };
        lam.op_mut(0).set(&[], scaled(idx("c"), &s)).unwrap();
        let _ = lam.op_mut(1).set(&[idx("x")], scaled(idx("v"), &s));
        let _ = lam.op_mut(1).set(&[idx("y")], scaled(idx("u"), &(&s * &s)));
        let _ = lam.op_mut(2).set(&[idx("x"), idx("y")], b.unit(idx("z")));
        let _ = lam.op_mut(2).set(&[idx("v"), idx("y")], b.unit(idx("z")));
        let _ = lam.op_mut(3).set(&[idx("c"), idx("x"), idx("y")], b.unit(idx("z")));
        let degs = b.degrees();
        for inputs in [vec![], vec![idx("x")], vec![idx("x"), idx("y")]] {
            let xs: Vec<FVec> = inputs.iter().map(|&i| b.unit(i)).collect();
            let d: Vec<i32> = inputs.iter().map(|&i| degs[i]).collect();
            let mut sum = lam.zero_output_vec();
            for t in axiom_terms(xs.len()) {
                sum.add_assign(&t.evaluate(&lam, &xs, &d));
            }
            pass &= sum == circ_on(&lam, &lam, &xs, &d);
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    outcome(pass, format!("n=0,1,2 reproduced, symbolic sum = ∘ on rank-1 data, {elapsed:.1?}"))
}

trait ZeroOutput {
    fn zero_output_vec(&self) -> FVec;
}

impl ZeroOutput for OpFamily {
    fn zero_output_vec(&self) -> FVec {
        self.target().zero_vec()
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut good = 0;
    for seed in SEEDS {
        let inst = common::instance(seed);
        let s = &inst.structure;
        let t = transfer_structure(s, &inst.contraction).unwrap();
        let o = transfer_tree_oracle(s, &inst.contraction).unwrap();
        let ok = check_structure(&t.h_structure).pass
            && check_morphism(&t.phi, &t.h_structure, s).unwrap().pass
            && o.h_structure == t.h_structure
            && o.phi == t.phi;
        good += ok as usize;
    }
    let elapsed = start.elapsed();
    let n = SEEDS.count();
    outcome(good == n && elapsed < Duration::from_secs(30), format!("{good}/{n} instances clean and equal to the tree sum, {elapsed:.1?}"))
}

fn criterion_3() -> Outcome {
    let mut good = 0;
    for seed in SEEDS {
        let inst = common::instance(seed);
        let s = &inst.structure;
        let t = transfer_structure(s, &inst.contraction).unwrap();
        let c = transfer_closed_forms(s, &inst.contraction).unwrap();
        let mu = t.h_structure.total();
        let mu1 = mu.op(1).cloned().unwrap_or_else(|| MultiOp::new(t.retract.h.clone(), t.retract.h.clone(), 1, 1));
        let ok = c.phi1 == t.phi1()
            && c.mu0 == t.h_structure.curvature()
            && c.mu1 == mu1
            && c.pi1_tilde == t.pi1_tilde
            && t.left_inverse_holds();
        good += ok as usize;
    }
    let n = SEEDS.count();
    outcome(good == n, format!("{good}/{n} instances: φ₁, μ₀, μ₁, π̃₁ closed forms match; π̃₁φ₁ = id"))
}

fn criterion_4() -> Outcome {
    let toy = samples::toy();
    let c = samples::toy_contraction();
    let t = transfer_structure(&toy, &c).unwrap();
    let h = t.retract.h.clone();
    let l = toy.bundle().clone();
    let expected_h = ChartDocument::from_json(&fixture("toy_expected_retract.json")).unwrap().structure().unwrap();
    let hb = expected_h.bundle().clone();
    let expected_phi =
        MorphismDocument::from_json(&fixture("toy_expected_phi.json")).unwrap().morphism(&hb, &l).unwrap();
    let oracle_match = t.h_structure.rebind(hb.clone()) == expected_h
        && t.phi.phi().rebind(hb.clone(), expected_phi.pulled().clone()) == *expected_phi.phi();
    let hi = |n: &str| h.index_of(n).unwrap();
    let li = |n: &str| l.index_of(n).unwrap();
    let mu = t.h_structure.total();
    let mu1_e = mu.eval_basis(&[hi("e")]) == h.unit(hi("h"));
    let mu2_zero = mu.op(2).is_none_or(MultiOp::is_zero);
    let mut gh = l.unit(li("g"));
    gh.add_assign(&l.unit(li("h")));
    let phi1_h = t.phi.phi().eval_basis(&[hi("h")]) == gh;
    let minus_g = l.unit(li("g")).neg();
    let phi2_ef = t.phi.phi().eval_basis(&[hi("e"), hi("f")]) == minus_g;
    let phi2_ee = t.phi.phi().eval_basis(&[hi("e"), hi("e")]) == minus_g;
    outcome(
        oracle_match && mu1_e && mu2_zero && phi1_h && phi2_ee,
        format!(
            "fixture oracle {oracle_match}, μ₁(e)=h {mu1_e}, μ₂=0 {mu2_zero}, φ₁(h)=g+h {phi1_h}, φ₂(e,f)=−g {phi2_ef}, \
             literal φ₂(e,e)=−g {phi2_ee} (e is odd, so φ₂(e,e)=0 by graded symmetry)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut good = 0;
    let mut checked_points = 0;
    for seed in SEEDS {
        let inst = common::instance(seed);
        let s = &inst.structure;
        let t = transfer_structure(s, &inst.contraction).unwrap();
        let (hc, lc) = (chart(t.h_structure.clone()), chart(s.clone()));
        let mut candidates = inst.points.clone();
        if hc.dim() == 1 {
            candidates.extend([-2, 0, 1, 5].map(|k| vec![q(k)]));
            candidates.push(vec![qf(7, 3)]);
        }
        let loci_equal = classical_points(&hc, &candidates).unwrap() == classical_points(&lc, &candidates).unwrap();
        let we = is_weak_equivalence(&t.phi, &hc, &lc, &inst.points, &inst.points).unwrap();
        // Degreewise: the retract may stop at a lower degree, so pad with zeros.
        let cohomology_equal = inst.points.iter().all(|p| {
            let mut a = complex_cohomology(&tangent_complex(&hc, p).unwrap());
            let mut b = complex_cohomology(&tangent_complex(&lc, p).unwrap());
            let len = a.len().max(b.len());
            a.resize(len, 0);
            b.resize(len, 0);
            a == b
        });
        checked_points += inst.points.len();
        good += (loci_equal && we && cohomology_equal) as usize;
    }
    let n = SEEDS.count();
    outcome(good == n, format!("{good}/{n} instances: classical loci equal, étale, cohomology equal at {checked_points} points"))
}

fn criterion_6() -> Outcome {
    let cases = [
        ("ℝ¹", samples::plain(&["x"]), vec![vec![q(0)], vec![q(2)]]),
        ("x²", samples::quasi_smooth_square(), vec![vec![q(0)]]),
        ("amplitude 2", samples::amplitude_two(), vec![vec![q(0)]]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, s, points) in cases {
        let start = Instant::now();
        let dc = chart(s);
        let ps = derived_path_space(&dc).unwrap();
        let rep = factorization_check(&dc, &ps, &points).unwrap();
        let amp = dc.bundle().max_degree().max(0) as usize;
        let high_vanish = ps.chart.structure().total().arities().iter().all(|&k| k <= amp);
        let vdim = virtual_dimension(&ps.chart) == virtual_dimension(&dc);
        let elapsed = start.elapsed();
        let ok = rep.pass
            && rep.inclusion_etale.iter().all(|&e| e)
            && rep.evaluation_linear
            && rep.evaluation_fibration
            && rep.composite_is_diagonal
            && vdim
            && high_vanish
            && elapsed < Duration::from_secs(10);
        pass &= ok;
        parts.push(format!("{name} {} {elapsed:.1?}", if ok { "ok" } else { "bad" }));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut checked = 0;
    for s in [samples::amplitude_two(), samples::toy(), samples::quasi_smooth_square()] {
        let r = fm_contraction(s.bundle()).unwrap().verify(8);
        checked += r.checked;
        pass &= r.pass;
    }
    outcome(pass, format!("η²=0, ηδη=η, id−[δ,η]=ι(π_lin+π_con) on {checked} monomial sections to t-degree 8"))
}

fn criterion_8() -> Outcome {
    let mut pass = true;
    let mut checked = 0;
    for (s, path) in [
        (samples::amplitude_two(), StraightPath { start: vec![q(-1)], end: vec![qf(3, 2)] }),
        (samples::quasi_smooth_square(), StraightPath { start: vec![q(0)], end: vec![q(2)] }),
        (samples::plain(&["x", "y"]), StraightPath { start: vec![q(1), q(0)], end: vec![q(0), q(3)] }),
    ] {
        let dc = chart(s);
        let ps = path_structure(&dc, &path, &ConnectionData::flat(dc.bundle().clone())).unwrap();
        let r = ps.check_square_zero(6);
        checked += r.checked;
        pass &= r.pass;
    }
    outcome(pass, format!("square zero on all {checked} degree-admissible tuples of monomial sections to t-degree 6"))
}

fn criterion_9() -> Outcome {
    let plane = Chart::new(["x", "y"]).unwrap();
    let qrow = |r: &[i64]| r.iter().map(|&k| q(k)).collect::<Vec<Q>>();
    let axis = Submanifold::new(
        "a",
        plane.clone(),
        Presentation::ZeroLocus { matrix: QMatrix::from_rows(vec![qrow(&[0, 1])]), rhs: qrow(&[0]) },
    )
    .unwrap();
    let diagonal = Submanifold::new(
        "b",
        plane.clone(),
        Presentation::Parametrized { matrix: QMatrix::from_rows(vec![qrow(&[1]), qrow(&[1])]), offset: qrow(&[0, 0]) },
    )
    .unwrap();
    let x = Chart::new(["x"]).unwrap();
    let parabola =
        Submanifold::new("p", plane, Presentation::Graph { free: vec![0], values: vec![x.parse("x^2").unwrap()] }).unwrap();
    let line = Chart::new(["x"]).unwrap();
    let half = || {
        Submanifold::new(
            "q",
            line.clone(),
            Presentation::ZeroLocus { matrix: QMatrix::from_rows(vec![qrow(&[1])]), rhs: vec![qf(1, 2)] },
        )
        .unwrap()
    };
    let cases = [
        ("transversal lines", axis.clone(), diagonal, vec![q(0), q(0)], vec![0usize, 0], 0i64),
        ("tangent parabola", axis, parabola, vec![q(0), q(0)], vec![1, 1], 0),
        ("point in ℝ¹", half(), half(), vec![qf(1, 2)], vec![0, 1], -1),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, a, b, point, cohomology, vdim) in cases {
        let hfp = derived_intersection(&a, &b).unwrap();
        let ip = intersection_point(&a, &b, &hfp, &point).unwrap();
        // Classical locus against the set-theoretic one on a parameter grid.
        let (ea, eb) = (a.embedding(), b.embedding());
        let grid: Vec<Q> = [-2, -1, 0, 1, 2].map(q).into_iter().chain([qf(1, 2)]).collect();
        let mut params: Vec<Vec<Q>> = vec![vec![]];
        for _ in 0..hfp.chart.dim() {
            params = params.iter().flat_map(|p| grid.iter().map(move |g| [p.clone(), vec![g.clone()]].concat())).collect();
        }
        let loci_match = params.iter().all(|p| {
            let (u, v) = p.split_at(a.dim());
            let same = ea.iter().zip(&eb).all(|(f, g)| f.eval(u) == g.eval(v));
            is_classical_point(&hfp.chart, p).unwrap() == same
        });
        let ok = ip.cohomology == cohomology && virtual_dimension(&hfp.chart) == vdim && loci_match;
        pass &= ok;
        parts.push(format!("{name} {:?} vdim {}", ip.cohomology, virtual_dimension(&hfp.chart)));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_10() -> Outcome {
    let dc = chart(samples::amplitude_two());
    let b = dc.bundle();
    let swap = |c: i64| {
        let mut a = PolyMatrix::zeros(3, 3, 1);
        a.set(b.index_of("e").unwrap(), b.index_of("u").unwrap(), Poly::constant(1, q(c)));
        a.set(b.index_of("u").unwrap(), b.index_of("e").unwrap(), Poly::constant(1, q(c)));
        ConnectionData::new(b.clone(), vec![a]).unwrap()
    };
    let (nabla, nabla_bar) = (swap(2), swap(-1));
    let forward = connection_change_iso(&dc, &nabla, &nabla_bar).unwrap();
    let backward = connection_change_iso(&dc, &nabla_bar, &nabla).unwrap();
    let morphism = check_morphism(&forward.iso, forward.source.structure(), forward.target.structure()).unwrap().pass;
    let inverse = invert_morphism(&forward.iso).unwrap();
    let inverse_matches = inverse == backward.iso;
    let round = compose_morphisms(&forward.iso, &backward.iso).unwrap();
    let t = forward.iso.source().clone();
    let identity = round == LooMorphism::new(t.clone(), t.clone(), identity_map(1), OpFamily::identity(t)).unwrap();
    outcome(
        morphism && inverse_matches && identity,
        format!("α = −3·swap: morphism {morphism}, inverse equals reverse change {inverse_matches}, composite = id {identity}"),
    )
}

fn criterion_11() -> Outcome {
    let line = chart(samples::quasi_smooth_square());
    let amp = chart(samples::amplitude_two());
    let (m, src, tgt) = samples::reduction_example();
    let mut suite: Vec<(String, CurvedStructure)> = vec![
        ("toy".into(), samples::toy()),
        ("broken toy".into(), samples::broken_toy()),
        ("x²".into(), samples::quasi_smooth_square()),
        ("amplitude 2".into(), samples::amplitude_two()),
        ("plane".into(), samples::plain(&["x", "y"])),
        ("reduction source".into(), src),
        ("reduction target".into(), tgt),
        ("path space x²".into(), derived_path_space(&line).unwrap().chart.structure().clone()),
        ("path space amplitude 2".into(), derived_path_space(&amp).unwrap().chart.structure().clone()),
        ("toy retract".into(), transfer_structure(&samples::toy(), &samples::toy_contraction()).unwrap().h_structure),
    ];
    let _ = m;
    for seed in SEEDS {
        let inst = common::instance(seed);
        let t = transfer_structure(&inst.structure, &inst.contraction).unwrap();
        suite.push((format!("random {seed}"), inst.structure.clone()));
        suite.push((format!("random {seed} retract"), t.h_structure));
        let moved = transport_structure(&inst.structure, &common::random_family(seed, inst.structure.bundle(), 0, &[2]).plus_identity()).unwrap();
        suite.push((format!("random {seed} moved"), moved));
    }
    let mut bad = Vec::new();
    let mut failing_structures = 0;
    for (name, s) in &suite {
        let q = to_derivation(s);
        let structure_ok = check_structure(s).pass;
        failing_structures += !structure_ok as usize;
        let roundtrip = from_derivation(&q).unwrap().lambda() == &s.total();
        if q.squares_to_zero() != structure_ok || !roundtrip {
            bad.push(name.clone());
        }
    }
    outcome(
        bad.is_empty() && failing_structures > 0,
        format!("{} structures ({} failing the axioms), mismatches {:?}", suite.len(), failing_structures, bad),
    )
}

trait PlusIdentity {
    fn plus_identity(self) -> OpFamily;
}

impl PlusIdentity for OpFamily {
    fn plus_identity(mut self) -> OpFamily {
        self.set_op(OpFamily::identity(self.source().clone()).op(1).unwrap().clone()).unwrap();
        self
    }
}

/// The reduction example extended by an inert degree-2 summand c on both
/// sides, so the composite has a degree-2 block to certify.
fn criterion_12() -> Outcome {
    let c = Chart::new(["x"]).unwrap();
    let x = c.parse("x").unwrap();
    let decl = |names: &[(&str, i32)]| {
        GradedBundle::new(c.clone(), names.iter().map(|&(n, d)| (n.to_string(), d)).collect()).unwrap().shared()
    };
    let b = decl(&[("a", 1), ("p", 1), ("c", 2), ("q", 2), ("r", 2), ("s", 3)]);
    let t = decl(&[("a", 1), ("c", 2)]);
    let i = |n: &str| b.index_of(n).unwrap();
    let scaled = |bb: &GradedBundle, k: usize, p: &Poly| {
        let mut v = bb.zero_vec();
        v.0[k] = p.clone();
        v
    };
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    lam.op_mut(0).set(&[], scaled(&b, i("a"), &x)).unwrap();
    lam.op_mut(1).set(&[i("p")], b.unit(i("q"))).unwrap();
    lam.op_mut(1).set(&[i("q")], scaled(&b, i("s"), &-&x)).unwrap();
    lam.op_mut(1).set(&[i("r")], b.unit(i("s"))).unwrap();
    lam.op_mut(2).set(&[i("a"), i("p")], b.unit(i("s"))).unwrap();
    let src = CurvedStructure::new(b.clone(), lam).unwrap();
    let mut lam_t = OpFamily::new(t.clone(), t.clone(), 1);
    lam_t.op_mut(0).set(&[], scaled(&t, 0, &x)).unwrap();
    let tgt = CurvedStructure::new(t.clone(), lam_t).unwrap();
    let mut proj = MultiOp::new(b.clone(), t.clone(), 1, 0);
    proj.set(&[i("a")], t.unit(t.index_of("a").unwrap())).unwrap();
    proj.set(&[i("c")], t.unit(t.index_of("c").unwrap())).unwrap();
    let m = LooMorphism::linear(b, t.clone(), identity_map(1), proj).unwrap();

    let chain = reduce_chain(&m, &src, &tgt).unwrap();
    let levels: Vec<i32> = chain.steps.iter().map(|s| s.level).collect();
    let morphism = check_morphism(&chain.composite, &chain.structure, &tgt).unwrap().pass;
    // Exact rank of each degree block of φ₁ at sample points, independent of
    // the chain's own profile.
    let h = chain.composite.source().clone();
    let lin = chain.composite.linear_part();
    let mut iso = true;
    for d in 2..=t.max_degree().max(h.max_degree()) {
        let (rows, cols) = (t.indices_of_degree(d), h.indices_of_degree(d));
        for p in [q(0), q(1), qf(-5, 2)] {
            let block = lin.select(&rows, &cols).eval(std::slice::from_ref(&p));
            iso &= rows.len() == cols.len() && block.rank() == rows.len();
        }
    }
    let has_degree_two = !t.indices_of_degree(2).is_empty();
    outcome(
        levels == vec![3, 2] && morphism && iso && has_degree_two,
        format!("steps {levels:?}, composite morphism {morphism}, iso in degrees ≥ 2 by rank {iso}"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "axiom enumeration", criterion_1),
        (2, "transfer soundness", criterion_2),
        (3, "closed forms", criterion_3),
        (4, "three-level toy", criterion_4),
        (5, "transferred inclusion is a weak equivalence", criterion_5),
        (6, "path-space factorization", criterion_6),
        (7, "integral contraction identities", criterion_7),
        (8, "path structure square zero", criterion_8),
        (9, "intersections", criterion_9),
        (10, "connection change", criterion_10),
        (11, "CDGA biconditional", criterion_11),
        (12, "reduction chain", criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (n, name, run) in criteria {
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let expected_fail = EXPECTED_FAIL.contains(&n);
        let tag = match (o.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        println!("criterion {n:2} {name}: {tag}: {}", o.detail);
        if o.pass == expected_fail {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected outcomes for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
