//! Seeded random nilpotent instances: a contraction δ/η on acyclic pairs
//! plus a retract, with λ obtained by transporting a curvature along a random
//! φ (φ₁ = id). Every basis element carries a level; pairs share one, and φ
//! only raises levels, so the transported λ is filtered-nilpotent.

#![allow(dead_code)]

use derive_core::graded::{canonical_keys, Chart, GradedBundle};
use derive_core::linfty::{transport_structure, CurvedStructure};
use derive_core::multiop::{MultiOp, OpFamily};
use derive_core::poly::{Poly, Q};
use derive_core::transfer::{ContractionData, FiltrationSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub seed: u64,
    pub structure: CurvedStructure,
    pub contraction: ContractionData,
    /// Classical points, identical for the structure and its retract.
    pub points: Vec<Vec<Q>>,
    /// The family (φ₁ = id) the structure was transported along.
    pub transport: OpFamily,
}

fn coefficient(rng: &mut ChaCha8Rng) -> Q {
    let mut n = rng.gen_range(-3i64..=3);
    if n == 0 {
        n = 1;
    }
    Q::new(n.into(), rng.gen_range(1i64..=3).into())
}

fn coefficient_poly(rng: &mut ChaCha8Rng, nvars: usize) -> Poly {
    let c = Poly::constant(nvars, coefficient(rng));
    if nvars > 0 && rng.gen_bool(0.4) {
        &c * &Poly::var(nvars, 0)
    } else {
        c
    }
}

/// Draws until λ has an operation of positive arity besides δ.
pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (structure, contraction, points, transport) = draw(&mut rng);
        if structure.lambda().arities().iter().any(|&k| k > 0) {
            return Instance { seed, structure, contraction, points, transport };
        }
    }
}

fn draw(rng: &mut ChaCha8Rng) -> (CurvedStructure, ContractionData, Vec<Vec<Q>>, OpFamily) {
    let over_line = rng.gen_bool(0.5);
    let chart = if over_line { Chart::new(["x"]).unwrap() } else { Chart::point() };
    let nv = chart.dim();
    let amp: i32 = rng.gen_range(2..=4);

    let mut rank = vec![0usize; amp as usize + 2];
    let mut decl: Vec<(String, i32)> = Vec::new();
    let mut level: Vec<(String, u32)> = Vec::new();
    for d in 1..=amp {
        let count = if d == 1 { rng.gen_range(1..=2) } else { rng.gen_range(0..=2) };
        for i in 0..count {
            let name = format!("h{d}_{i}");
            decl.push((name.clone(), d));
            level.push((name, rng.gen_range(0..=3)));
        }
        rank[d as usize] += count;
    }
    let mut pairs = Vec::new();
    for d in 1..amp {
        if rank[d as usize] < 3 && rank[d as usize + 1] < 3 && rng.gen_bool(0.7) {
            let (a, b) = (format!("a{d}"), format!("b{}", d + 1));
            let l = rng.gen_range(0..=3);
            decl.push((a.clone(), d));
            decl.push((b.clone(), d + 1));
            level.push((a.clone(), l));
            level.push((b.clone(), l));
            rank[d as usize] += 1;
            rank[d as usize + 1] += 1;
            pairs.push((a, b));
        }
    }
    let b = GradedBundle::new(chart, decl).unwrap().shared();
    let lev: Vec<u32> = (0..b.rank()).map(|i| level.iter().find(|(n, _)| n == b.name(i)).unwrap().1).collect();
    let degs = b.degrees();

    let mut delta = MultiOp::new(b.clone(), b.clone(), 1, 1);
    let mut eta = MultiOp::new(b.clone(), b.clone(), 1, -1);
    for (a, c) in &pairs {
        let (ia, ic) = (b.index_of(a).unwrap(), b.index_of(c).unwrap());
        delta.set(&[ia], b.unit(ic)).unwrap();
        eta.set(&[ic], b.unit(ia)).unwrap();
    }

    // Curvature (x − r)·v over the line, vanishing at r; zero over a point.
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    let points = if over_line {
        let r = coefficient(rng);
        let factor = &Poly::var(1, 0) - &Poly::constant(1, r.clone());
        let mut v = b.zero_vec();
        v.0[b.index_of("h1_0").unwrap()] = factor.clone();
        for i in b.indices_of_degree(1) {
            if b.name(i).starts_with('h') && b.name(i) != "h1_0" && rng.gen_bool(0.5) {
                v.0[i] = &factor * &Poly::constant(1, coefficient(rng));
            }
        }
        lam.op_mut(0).set(&[], v).unwrap();
        vec![vec![r]]
    } else {
        vec![vec![]]
    };

    // A bracket among retract elements off the curvature whose outputs are
    // never inputs, so λ₂∘λ₂ = 0 and λ₂(λ₀, ·) = 0.
    let curved: Vec<usize> = lam.eval_basis(&[]).nonzero().map(|(i, _)| i).collect();
    let h: Vec<usize> = (0..b.rank()).filter(|&i| b.name(i).starts_with('h') && !curved.contains(&i)).collect();
    let sources: Vec<usize> = h.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    for key in canonical_keys(&degs, 2, amp - 1) {
        if !key.iter().all(|i| sources.contains(i)) {
            continue;
        }
        let total = key.iter().map(|&i| degs[i]).sum::<i32>() + 1;
        let floor = key.iter().map(|&i| lev[i]).max().unwrap();
        let mut v = b.zero_vec();
        for &j in &h {
            if degs[j] == total && lev[j] > floor && !sources.contains(&j) && rng.gen_bool(0.7) {
                v.0[j] = coefficient_poly(rng, nv);
            }
        }
        if !v.is_zero() {
            lam.op_mut(2).set(&key, v).unwrap();
        }
    }

    let mut phi = OpFamily::identity(b.clone());
    for k in 2..=3 {
        for key in canonical_keys(&degs, k, amp) {
            let total: i32 = key.iter().map(|&i| degs[i]).sum();
            let floor = key.iter().map(|&i| lev[i]).max().unwrap();
            let mut v = b.zero_vec();
            for j in b.indices_of_degree(total) {
                if lev[j] > floor && rng.gen_bool(0.7) {
                    v.0[j] = coefficient_poly(rng, nv);
                }
            }
            if !v.is_zero() {
                phi.op_mut(k).set(&key, v).unwrap();
            }
        }
    }

    let base = CurvedStructure::with_delta(b.clone(), delta.clone(), lam).unwrap();
    let moved = transport_structure(&base, &phi).unwrap();
    let mut only_delta = OpFamily::new(b.clone(), b.clone(), 1);
    only_delta.set_op(delta.clone()).unwrap();
    let lambda = moved.lambda().sub_family(&only_delta).unwrap();
    let structure = CurvedStructure::with_delta(b.clone(), delta.clone(), lambda).unwrap();
    let contraction = ContractionData::new(b, delta, eta, FiltrationSpec::Auto).unwrap();
    (structure, contraction, points, phi)
}

/// A family of the given degree with random entries in the given arities;
/// no axioms are imposed.
pub fn random_family(seed: u64, b: &std::sync::Arc<GradedBundle>, degree: i32, arities: &[usize]) -> OpFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degs = b.degrees();
    let mut fam = OpFamily::new(b.clone(), b.clone(), degree);
    for &k in arities {
        for key in canonical_keys(&degs, k, b.max_degree() - degree) {
            let total = key.iter().map(|&i| degs[i]).sum::<i32>() + degree;
            let mut v = b.zero_vec();
            for j in b.indices_of_degree(total) {
                if rng.gen_bool(0.6) {
                    v.0[j] = coefficient_poly(&mut rng, b.nvars());
                }
            }
            if !v.is_zero() {
                fam.op_mut(k).set(&key, v).unwrap();
            }
        }
    }
    fam
}
