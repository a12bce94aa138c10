//! One step of the reduction of a linear fibration: contract the part of the
//! kernel where λ₁: K^{k−1} → K^k is onto, so the composite becomes an
//! isomorphism one degree lower.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graded::{FVec, GradedBundle};
use crate::linfty::{check_morphism, compose_morphisms, CurvedStructure, LooMorphism};
use crate::matrix::{PolyMatrix, QMatrix};
use crate::multiop::{MultiOp, OpFamily};
use crate::poly::Poly;

use super::{transfer_structure, ContractionData, FiltrationSpec, TransferResult};

#[derive(Clone, Debug)]
pub struct ReductionStep {
    pub level: i32,
    pub contraction: ContractionData,
    pub transfer: TransferResult,
    /// The linear morphism H → L′ (transferred inclusion followed by φ).
    pub composite: LooMorphism,
    pub filtration_used: FiltrationSpec,
}

#[derive(Clone, Debug)]
pub struct ReductionChain {
    pub steps: Vec<ReductionStep>,
    pub structure: CurvedStructure,
    pub composite: LooMorphism,
    pub profile: Vec<DegreeProfile>,
}

/// Whether φ₁ is an isomorphism / epimorphism in one degree, exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeProfile {
    pub degree: i32,
    pub iso: bool,
    pub epi: bool,
}

fn block(m: &PolyMatrix, src: &GradedBundle, tgt: &GradedBundle, d: i32) -> PolyMatrix {
    m.select(&tgt.indices_of_degree(d), &src.indices_of_degree(d))
}

/// Iso/epi per degree of a linear morphism's φ₁, over the whole chart: a block
/// is iso when square with nonzero constant determinant, epi when it has a
/// polynomial right inverse.
pub fn degree_profile(m: &LooMorphism) -> Vec<DegreeProfile> {
    let a = m.linear_part();
    let nv = m.source().nvars();
    let (lo, hi) = (
        m.source().min_degree().min(m.target().min_degree()).max(1),
        m.source().max_degree().max(m.target().max_degree()),
    );
    (lo..=hi)
        .map(|d| {
            let b = block(&a, m.source(), m.pulled(), d);
            let epi = b.rows() == 0 || b.right_inverse_unimodular(nv).is_some();
            let iso = epi && b.rows() == b.cols();
            DegreeProfile { degree: d, iso, epi }
        })
        .collect()
}

fn constant_vectors(vs: &[Vec<crate::poly::Q>], nv: usize) -> Vec<FVec> {
    vs.iter().map(|v| FVec(v.iter().map(|c| Poly::constant(nv, c.clone())).collect())).collect()
}

/// Kernel of the constant φ₁ in degree d, as vectors of L.
fn kernel_in_degree(a: &QMatrix, src: &GradedBundle, tgt: &GradedBundle, d: i32) -> Vec<Vec<crate::poly::Q>> {
    let cols = src.indices_of_degree(d);
    let rows = tgt.indices_of_degree(d);
    let sub = QMatrix::from_rows(rows.iter().map(|&i| cols.iter().map(|&j| a.get(i, j).clone()).collect()).collect());
    let sub = if rows.is_empty() { QMatrix::zeros(0, cols.len()) } else { sub };
    sub.nullspace()
        .into_iter()
        .map(|k| {
            let mut v = vec![crate::poly::Q::from_integer(0.into()); src.rank()];
            for (c, &j) in k.into_iter().zip(&cols) {
                v[j] = c;
            }
            v
        })
        .collect()
}

/// One reduction step at level `k` for a linear fibration over the identity.
pub fn reduce_fibration_step(
    m: &LooMorphism,
    src: &CurvedStructure,
    tgt: &CurvedStructure,
    k: i32,
) -> Result<ReductionStep> {
    if !m.is_identity_on_base() || !m.is_linear() {
        return Err(Error::Verification("reduction needs a linear morphism over the identity".into()));
    }
    let r = check_morphism(m, src, tgt)?;
    if !r.pass {
        return Err(Error::Verification(format!("input is not a morphism: {}", r.failures[0])));
    }
    let l = src.bundle().clone();
    let nv = l.nvars();
    let a = m.linear_part().constant().ok_or_else(|| Error::NonConstant("φ₁ must have constant coefficients".into()))?;
    for p in degree_profile(m) {
        if (p.degree > k && !p.iso) || (p.degree <= k && !p.epi) {
            return Err(Error::NotSurjective(format!(
                "φ must be iso in degrees ≥ {} and epi in degrees ≤ {k}; fails in degree {}",
                k + 1,
                p.degree
            )));
        }
    }

    let km1 = constant_vectors(&kernel_in_degree(&a, &l, m.pulled(), k - 1), nv);
    let kk = constant_vectors(&kernel_in_degree(&a, &l, m.pulled(), k), nv);
    let total = src.total();
    let lam1 = total.op(1).cloned().unwrap_or_else(|| MultiOp::new(l.clone(), l.clone(), 1, 1));

    // j: K^k → L, θ: L → K^k with θj = id (supported on L^k)
    let j_k = PolyMatrix::from_columns(l.rank(), &kk.iter().map(|v| v.0.clone()).collect::<Vec<_>>(), nv);
    let theta = if kk.is_empty() {
        PolyMatrix::zeros(0, l.rank(), nv)
    } else {
        j_k.left_inverse_unimodular(nv).expect("constant independent columns")
    };
    // λ₁ restricted to K^{k−1} → K^k in these bases
    let mut ak_cols = Vec::new();
    for u in &km1 {
        let img = lam1.apply1(u);
        let coords = theta.mul(&PolyMatrix::from_columns(l.rank(), std::slice::from_ref(&img.0), nv));
        if j_k.mul(&coords).column(0) != img.0 {
            return Err(Error::Verification("λ₁ does not preserve the kernel of φ".into()));
        }
        ak_cols.push(coords.column(0));
    }
    let a_k = PolyMatrix::from_columns(kk.len(), &ak_cols, nv);
    let chi = if kk.is_empty() {
        PolyMatrix::zeros(km1.len(), 0, nv)
    } else {
        a_k.right_inverse_unimodular(nv).ok_or_else(|| {
            Error::NotSurjective(format!("λ₁: K^{} → K^{k} has no polynomial section", k - 1))
        })?
    };
    let j_km1 = PolyMatrix::from_columns(l.rank(), &km1.iter().map(|v| v.0.clone()).collect::<Vec<_>>(), nv);

    // η = jχθ on L^k, zero elsewhere
    let mut eta_m = j_km1.mul(&chi).mul(&theta);
    let mut delta_m = PolyMatrix::zeros(l.rank(), l.rank(), nv);
    let lam1_m = lam1.to_matrix();
    for c in 0..l.rank() {
        let deg = l.degree(c);
        if deg != k {
            for r in 0..l.rank() {
                eta_m.set(r, c, Poly::zero(nv));
            }
        }
        if deg == k - 1 {
            for r in 0..l.rank() {
                delta_m.set(r, c, lam1_m.get(r, c).clone());
            }
        }
    }
    let delta = MultiOp::from_matrix(l.clone(), l.clone(), 1, &delta_m)?;
    let eta = MultiOp::from_matrix(l.clone(), l.clone(), -1, &eta_m)?;

    let mut minus = OpFamily::new(l.clone(), l.clone(), 1);
    minus.set_op(delta.clone())?;
    let rest = total.sub_family(&minus)?;
    let split = CurvedStructure::with_delta(l.clone(), delta.clone(), rest)?;

    let mut last_err = None;
    for spec in [FiltrationSpec::Variation(k), FiltrationSpec::Auto] {
        let c = ContractionData::new(l.clone(), delta.clone(), eta.clone(), spec.clone())?;
        match transfer_structure(&split, &c) {
            Ok(t) => return finish_step(m, tgt, k, c, t, spec),
            Err(e @ (Error::NotNilpotent(_) | Error::Contraction { .. })) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

fn finish_step(
    m: &LooMorphism,
    tgt: &CurvedStructure,
    k: i32,
    contraction: ContractionData,
    transfer: TransferResult,
    filtration_used: FiltrationSpec,
) -> Result<ReductionStep> {
    // the transferred inclusion lands in the original structure, with δ folded back in
    let composite = compose_morphisms(&transfer.phi, m)?;
    if !composite.is_linear() {
        return Err(Error::Verification("composite with the transferred inclusion is not linear".into()));
    }
    let r = check_morphism(&composite, &transfer.h_structure, tgt)?;
    if !r.pass {
        return Err(Error::Verification(format!("composite fails the morphism equation at {}", r.failures[0])));
    }
    for p in degree_profile(&composite) {
        if (p.degree >= k && !p.iso) || (p.degree < k && !p.epi) {
            return Err(Error::Verification(format!("composite is not iso/epi as expected in degree {}", p.degree)));
        }
    }
    Ok(ReductionStep { level: k, contraction, transfer, composite, filtration_used })
}

/// Steps k = amplitude, …, 2; the final composite is an isomorphism in
/// degrees ≥ 2.
pub fn reduce_chain(m: &LooMorphism, src: &CurvedStructure, tgt: &CurvedStructure) -> Result<ReductionChain> {
    let mut steps = Vec::new();
    let mut cur_m = m.clone();
    let mut cur_s = src.clone();
    for k in (2..=src.amplitude()).rev() {
        let step = reduce_fibration_step(&cur_m, &cur_s, tgt, k)?;
        cur_m = step.composite.clone();
        cur_s = step.transfer.h_structure.clone();
        steps.push(step);
    }
    let profile = degree_profile(&cur_m);
    Ok(ReductionChain { steps, structure: cur_s, composite: cur_m, profile })
}
