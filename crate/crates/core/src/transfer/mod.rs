//! Homotopy transfer of curved L∞[1] structures along a contraction.
//!
//! Given (L, δ, λ) and η with η² = 0, ηδη = η, the retract H = im(id − [δ,η])
//! carries μ = π(λ•φ), where φ solves φ = ι − η(λ•φ). The recursion is solved
//! arity by arity; within one arity the λ₁ term makes it implicit and is
//! resolved by fixed-point iteration, which terminates because λ raises a
//! filtration that δ and η preserve.

pub mod reduce;
pub mod trees;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compose::bullet_on;
use crate::error::{Error, Result};
use crate::graded::{canonical_keys, FVec, GradedBundle};
use crate::linfty::{check_morphism, check_structure, degree_arity_bound, CurvedStructure, LooMorphism};
use crate::matrix::PolyMatrix;
use crate::multiop::{MultiMap, MultiOp, OpFamily};

pub use reduce::{reduce_chain, reduce_fibration_step, ReductionChain, ReductionStep};
pub use trees::transfer_tree_oracle;

/// How filtration levels are assigned to basis elements; F_k is spanned by the
/// elements of level ≥ k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationSpec {
    /// Level = degree.
    Natural,
    /// Level = degree, except degree n−1 is raised to level n.
    Variation(i32),
    /// One level per basis element, in basis order.
    Custom(Vec<u32>),
    /// Least levels making δ, η filtered and λ nilpotent, found by relaxation.
    Auto,
}

/// An explicit frame for H: names and degrees of the new basis with the
/// columns of ι in L.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub names: Vec<(String, i32)>,
    pub columns: Vec<FVec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionData {
    pub bundle: Arc<GradedBundle>,
    pub delta: MultiOp,
    pub eta: MultiOp,
    pub filtration: FiltrationSpec,
    pub frame: Option<Frame>,
}

impl ContractionData {
    pub fn new(bundle: Arc<GradedBundle>, delta: MultiOp, eta: MultiOp, filtration: FiltrationSpec) -> Result<Self> {
        for (op, d, name) in [(&delta, 1, "δ"), (&eta, -1, "η")] {
            if op.arity() != 1 || op.degree() != d {
                return Err(Error::Degree(format!("{name} must be an arity-1 operation of degree {d}")));
            }
            if op.source() != &bundle || op.target() != &bundle {
                return Err(Error::BundleMismatch(format!("{name} must act on the contraction's bundle")));
            }
        }
        Ok(ContractionData { bundle, delta, eta, filtration, frame: None })
    }

    /// δ = 0, η = 0: H = L.
    pub fn trivial(bundle: Arc<GradedBundle>) -> Self {
        ContractionData {
            delta: MultiOp::new(bundle.clone(), bundle.clone(), 1, 1),
            eta: MultiOp::new(bundle.clone(), bundle.clone(), 1, -1),
            bundle,
            filtration: FiltrationSpec::Auto,
            frame: None,
        }
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = Some(frame);
        self
    }
}

/// H with its inclusion, projection and induced differential.
#[derive(Clone, Debug, PartialEq)]
pub struct Retract {
    pub h: Arc<GradedBundle>,
    pub iota: MultiOp,
    pub pi: MultiOp,
    pub delta_h: MultiOp,
    /// id − [δ,η] on L.
    pub projector: PolyMatrix,
}

fn witness_column(a: &PolyMatrix, b: &PolyMatrix, bundle: &GradedBundle) -> Option<String> {
    (0..a.cols()).find(|&j| a.column(j) != b.column(j)).map(|j| bundle.name(j).to_string())
}

fn require_equal(a: &PolyMatrix, b: &PolyMatrix, bundle: &GradedBundle, identity: &str) -> Result<()> {
    match witness_column(a, b, bundle) {
        None => Ok(()),
        Some(w) => Err(Error::Contraction { identity: identity.into(), witness: w }),
    }
}

/// Checks η² = 0, ηδη = η, δ² = 0, idempotence of id − [δ,η] and, for fixed
/// filtrations, that δ and η are filtered; returns H with ι and π.
pub fn validate_contraction(c: &ContractionData) -> Result<Retract> {
    let l = &c.bundle;
    let nv = l.nvars();
    let n = l.rank();
    let d = c.delta.to_matrix();
    let e = c.eta.to_matrix();
    let zero = PolyMatrix::zeros(n, n, nv);
    require_equal(&e.mul(&e), &zero, l, "η² = 0")?;
    require_equal(&e.mul(&d).mul(&e), &e, l, "ηδη = η")?;
    require_equal(&d.mul(&d), &zero, l, "δ² = 0")?;
    let p = PolyMatrix::identity(n, nv).sub(&d.mul(&e).add(&e.mul(&d)));
    require_equal(&p.mul(&p), &p, l, "(id − [δ,η])² = id − [δ,η]")?;
    if !matches!(c.filtration, FiltrationSpec::Auto) {
        let levels = fixed_levels(&c.filtration, l)?;
        check_filtered(&levels, &c.delta, "δ")?;
        check_filtered(&levels, &c.eta, "η")?;
    }

    let (names, cols): (Vec<(String, i32)>, Vec<Vec<crate::poly::Poly>>) = match &c.frame {
        Some(f) => (f.names.clone(), f.columns.iter().map(|v| v.0.clone()).collect()),
        None => {
            let s = frame_columns(&p, nv)?;
            (s.iter().map(|&j| (l.name(j).to_string(), l.degree(j))).collect(), s.iter().map(|&j| p.column(j)).collect())
        }
    };
    let h = GradedBundle::new(l.chart().clone(), names.clone())?.shared();
    // GradedBundle sorts by degree; place columns at their sorted positions
    let mut sorted = vec![Vec::new(); cols.len()];
    for ((name, _), col) in names.iter().zip(cols) {
        sorted[h.index_of(name).unwrap()] = col;
    }
    let iota_m = PolyMatrix::from_columns(n, &sorted, nv);
    let left = iota_m
        .left_inverse_unimodular(nv)
        .ok_or_else(|| Error::NonConstant("H has no polynomial frame with a polynomial left inverse".into()))?;
    let pi_m = left.mul(&p);
    if pi_m.mul(&iota_m) != PolyMatrix::identity(h.rank(), nv) || iota_m.mul(&pi_m) != p {
        return Err(Error::Contraction { identity: "ιπ = id − [δ,η], πι = id".into(), witness: "frame of H".into() });
    }
    let iota = MultiOp::from_matrix(h.clone(), l.clone(), 0, &iota_m)?;
    let pi = MultiOp::from_matrix(l.clone(), h.clone(), 0, &pi_m)?;
    let delta_h = MultiOp::from_matrix(h.clone(), h.clone(), 1, &pi_m.mul(&d).mul(&iota_m))?;
    Ok(Retract { h, iota, pi, delta_h, projector: p })
}

/// Columns of the projector forming a frame of its image.
fn frame_columns(p: &PolyMatrix, nv: usize) -> Result<Vec<usize>> {
    if let Some(c) = p.constant() {
        return Ok(c.independent_columns());
    }
    let point: Vec<crate::poly::Q> = (0..nv)
        .map(|i| crate::poly::Q::from_integer(((2 * i + 3) as i64).into()) / crate::poly::Q::from_integer(7.into()))
        .collect();
    Ok(p.eval(&point).independent_columns())
}

fn fixed_levels(spec: &FiltrationSpec, l: &GradedBundle) -> Result<Vec<u32>> {
    let degs = l.degrees();
    Ok(match spec {
        FiltrationSpec::Natural => degs.iter().map(|&d| d as u32).collect(),
        FiltrationSpec::Variation(n) => degs.iter().map(|&d| if d == n - 1 { *n as u32 } else { d as u32 }).collect(),
        FiltrationSpec::Custom(v) => {
            if v.len() != l.rank() {
                return Err(Error::Dimension(format!("{} filtration levels for a bundle of rank {}", v.len(), l.rank())));
            }
            v.clone()
        }
        FiltrationSpec::Auto => unreachable!("auto levels depend on λ"),
    })
}

fn check_filtered(levels: &[u32], op: &MultiOp, name: &str) -> Result<()> {
    for (key, v) in op.entries() {
        for (j, _) in v.nonzero() {
            if levels[j] < levels[key[0]] {
                let b = op.source();
                return Err(Error::Contraction {
                    identity: format!("{name} preserves the filtration"),
                    witness: format!("{} ↦ {}", b.name(key[0]), b.name(j)),
                });
            }
        }
    }
    Ok(())
}

fn check_nilpotent(levels: &[u32], lambda: &OpFamily) -> Result<()> {
    for k in lambda.arities().into_iter().filter(|&k| k >= 1) {
        for (key, v) in lambda.op(k).unwrap().entries() {
            let need: u32 = key.iter().map(|&i| levels[i]).sum::<u32>() + 1;
            if let Some((j, _)) = v.nonzero().find(|&(j, _)| levels[j] < need) {
                let b = lambda.source();
                let ins: Vec<&str> = key.iter().map(|&i| b.name(i)).collect();
                return Err(Error::NotNilpotent(format!(
                    "λ_{k}({}) has a component on {} below filtration level {need}",
                    ins.join(","),
                    b.name(j)
                )));
            }
        }
    }
    Ok(())
}

/// Levels for `spec`, checked against δ, η (filtered) and λ (raises by one).
pub fn resolve_filtration(spec: &FiltrationSpec, c: &ContractionData, lambda: &OpFamily) -> Result<Vec<u32>> {
    let levels = match spec {
        FiltrationSpec::Auto => auto_levels(c, lambda)?,
        other => fixed_levels(other, &c.bundle)?,
    };
    check_filtered(&levels, &c.delta, "δ")?;
    check_filtered(&levels, &c.eta, "η")?;
    check_nilpotent(&levels, lambda)?;
    Ok(levels)
}

/// Least fixed point of the level constraints; diverges exactly when some
/// cycle of constraints contains a strict increase.
fn auto_levels(c: &ContractionData, lambda: &OpFamily) -> Result<Vec<u32>> {
    let n = c.bundle.rank();
    let cap = (n as u32 + 1) * (lambda.max_arity() as u32 + 2) * 4;
    let mut lv = vec![0u32; n];
    loop {
        let mut changed = false;
        let mut raise = |j: usize, need: u32, lv: &mut Vec<u32>| {
            if lv[j] < need {
                lv[j] = need;
                changed = true;
            }
        };
        for op in [&c.delta, &c.eta] {
            for (key, v) in op.entries() {
                for (j, _) in v.nonzero() {
                    raise(j, lv[key[0]], &mut lv);
                }
            }
        }
        for k in lambda.arities().into_iter().filter(|&k| k >= 1) {
            for (key, v) in lambda.op(k).unwrap().entries() {
                let need: u32 = key.iter().map(|&i| lv[i]).sum::<u32>() + 1;
                for (j, _) in v.nonzero() {
                    raise(j, need, &mut lv);
                }
            }
        }
        if !changed {
            return Ok(lv);
        }
        if lv.iter().any(|&l| l > cap) {
            return Err(Error::NotNilpotent("no filtration makes λ raise levels while δ and η preserve them".into()));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransferDiagnostics {
    /// Decorated trees enumerated (oracle) or canonical keys solved (recursion).
    pub trees: usize,
    pub max_arity: usize,
    pub filtration: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct TransferResult {
    pub retract: Retract,
    pub h_structure: CurvedStructure,
    pub phi: LooMorphism,
    pub pi1_tilde: MultiOp,
    pub diagnostics: TransferDiagnostics,
}

pub(crate) struct Prepared {
    pub retract: Retract,
    pub levels: Vec<u32>,
    pub lambda: OpFamily,
    pub phi_bound: usize,
    pub mu_bound: usize,
}

pub(crate) fn prepare(s: &CurvedStructure, c: &ContractionData) -> Result<Prepared> {
    if s.bundle() != &c.bundle {
        return Err(Error::BundleMismatch("structure and contraction live on different bundles".into()));
    }
    let (delta, lambda) = s.split();
    if delta != c.delta {
        return Err(Error::BundleMismatch("the structure's δ differs from the contraction's δ".into()));
    }
    let retract = validate_contraction(c)?;
    let levels = resolve_filtration(&c.filtration, c, &lambda)?;
    let hdegs = retract.h.degrees();
    let guard = |max_total| {
        degree_arity_bound(&hdegs, max_total)
            .ok_or_else(|| Error::ArityGuard("H has degree-0 elements; arities are not bounded by degree".into()))
    };
    let phi_bound = guard(c.bundle.max_degree())?;
    let mu_bound = guard(retract.h.max_degree() - 1)?;
    Ok(Prepared { retract, levels, lambda, phi_bound, mu_bound })
}

/// Solves φ = ι − η(λ•φ) on every canonical key of H.
pub fn transfer_structure(s: &CurvedStructure, c: &ContractionData) -> Result<TransferResult> {
    let prep = prepare(s, c)?;
    let Prepared { retract, levels, lambda, phi_bound, .. } = &prep;
    let h = &retract.h;
    let l = &c.bundle;
    let hdegs = h.degrees();
    let max_level = levels.iter().copied().max().unwrap_or(0) as usize;
    let lam1 = lambda.op(1).cloned();

    let mut phi = OpFamily::new(h.clone(), l.clone(), 0);
    let mut solved = 0;
    for n in 1..=*phi_bound {
        let keys = canonical_keys(&hdegs, n, l.max_degree());
        solved += keys.len();
        let values: Vec<Result<(Vec<usize>, FVec)>> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| h.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| hdegs[i]).collect();
                // contributions with at least two blocks use only lower arities of φ
                let rest = bullet_on(lambda, &phi, &xs, &kd);
                let base = if n == 1 { retract.iota.apply1(&xs[0]) } else { l.zero_vec() };
                let fixed = base.sub(&c.eta.apply1(&rest));
                let mut v = fixed.clone();
                for _ in 0..=max_level + 1 {
                    let next = match &lam1 {
                        Some(l1) => fixed.sub(&c.eta.apply1(&l1.apply1(&v))),
                        None => fixed.clone(),
                    };
                    if next == v {
                        return Ok((key, v));
                    }
                    v = next;
                }
                Err(Error::NotNilpotent("ηλ₁ iteration did not stabilize".into()))
            })
            .collect();
        let op = phi.op_mut(n);
        for r in values {
            let (k, v) = r?;
            op.insert_canonical(k, v);
        }
    }

    let mu = tabulate_mu(&prep, &phi)?;
    finish(s, c, prep, phi, mu, solved)
}

pub(crate) fn tabulate_mu(prep: &Prepared, phi: &OpFamily) -> Result<OpFamily> {
    let h = &prep.retract.h;
    let hdegs = h.degrees();
    let mut mu = OpFamily::new(h.clone(), h.clone(), 1);
    for n in 0..=prep.mu_bound {
        let keys = canonical_keys(&hdegs, n, h.max_degree() - 1);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| h.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| hdegs[i]).collect();
                let v = prep.retract.pi.apply1(&bullet_on(&prep.lambda, phi, &xs, &kd));
                (key, v)
            })
            .collect();
        let op = mu.op_mut(n);
        for (k, v) in values {
            op.insert_canonical(k, v);
        }
    }
    Ok(mu)
}

pub(crate) fn finish(
    s: &CurvedStructure,
    c: &ContractionData,
    prep: Prepared,
    phi: OpFamily,
    mu: OpFamily,
    trees: usize,
) -> Result<TransferResult> {
    let Prepared { retract, levels, lambda, .. } = prep;
    let h = retract.h.clone();
    let h_structure = CurvedStructure::with_delta(h.clone(), retract.delta_h.clone(), mu)?;
    let max_arity = phi.max_arity().max(h_structure.lambda().max_arity());
    let phi = LooMorphism::new(h.clone(), c.bundle.clone(), crate::linfty::identity_map(h.nvars()), phi)?;
    let pi1_tilde = pi1_tilde(&retract.pi, lambda.op(1), &c.eta)?;
    let r = check_structure(&h_structure);
    if !r.pass {
        return Err(Error::Verification(format!("transferred structure fails at {}", r.failures[0])));
    }
    let r = check_morphism(&phi, &h_structure, s)?;
    if !r.pass {
        return Err(Error::Verification(format!("transferred inclusion fails at {}", r.failures[0])));
    }
    Ok(TransferResult {
        retract,
        h_structure,
        phi,
        pi1_tilde,
        diagnostics: TransferDiagnostics { trees, max_arity, filtration: levels },
    })
}

/// (1+A)⁻¹ = Σ_j (−A)^j for nilpotent A.
fn neumann(a: &PolyMatrix, nv: usize) -> Result<PolyMatrix> {
    let n = a.rows();
    let mut sum = PolyMatrix::identity(n, nv);
    let mut pow = PolyMatrix::identity(n, nv);
    for j in 1..=n + 1 {
        pow = pow.mul(a);
        if pow.is_zero() {
            return Ok(sum);
        }
        sum = if j % 2 == 1 { sum.sub(&pow) } else { sum.add(&pow) };
    }
    Err(Error::NotNilpotent("linear perturbation is not nilpotent".into()))
}

fn pi1_tilde(pi: &MultiOp, lam1: Option<&MultiOp>, eta: &MultiOp) -> Result<MultiOp> {
    let l = eta.source();
    let nv = l.nvars();
    let lam = lam1.map_or_else(|| PolyMatrix::zeros(l.rank(), l.rank(), nv), MultiOp::to_matrix);
    let inv = neumann(&lam.mul(&eta.to_matrix()), nv)?;
    MultiOp::from_matrix(l.clone(), pi.target().clone(), 0, &pi.to_matrix().mul(&inv))
}

/// The arity-0 and arity-1 data in closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForms {
    pub phi1: MultiOp,
    pub mu0: FVec,
    pub mu1: MultiOp,
    pub pi1_tilde: MultiOp,
}

/// φ₁ = (1+ηλ₁)⁻¹ι, μ₀ = π(λ₀), μ₁ = π(1+λ₁η)⁻¹λ₁ι, π̃₁ = π(1+λ₁η)⁻¹.
pub fn transfer_closed_forms(s: &CurvedStructure, c: &ContractionData) -> Result<ClosedForms> {
    let retract = validate_contraction(c)?;
    let (_, lambda) = s.split();
    let l = &c.bundle;
    let nv = l.nvars();
    let lam1 = lambda.op(1).map_or_else(|| PolyMatrix::zeros(l.rank(), l.rank(), nv), MultiOp::to_matrix);
    let eta = c.eta.to_matrix();
    let iota = retract.iota.to_matrix();
    let pi = retract.pi.to_matrix();
    let left = neumann(&eta.mul(&lam1), nv)?;
    let right = neumann(&lam1.mul(&eta), nv)?;
    let h = &retract.h;
    Ok(ClosedForms {
        phi1: MultiOp::from_matrix(h.clone(), l.clone(), 0, &left.mul(&iota))?,
        mu0: retract.pi.apply1(&lambda.eval_basis(&[])),
        mu1: MultiOp::from_matrix(h.clone(), h.clone(), 1, &pi.mul(&right).mul(&lam1).mul(&iota))?,
        pi1_tilde: MultiOp::from_matrix(l.clone(), h.clone(), 0, &pi.mul(&right))?,
    })
}

impl TransferResult {
    /// The arity-1 part of φ, or zero.
    pub fn phi1(&self) -> MultiOp {
        self.phi
            .phi()
            .op(1)
            .cloned()
            .unwrap_or_else(|| MultiOp::new(self.retract.h.clone(), self.phi.target().clone(), 1, 0))
    }

    /// Whether π̃₁φ₁ = id on H.
    pub fn left_inverse_holds(&self) -> bool {
        let h = &self.retract.h;
        self.pi1_tilde.to_matrix().mul(&self.phi1().to_matrix()) == PolyMatrix::identity(h.rank(), h.nvars())
    }
}

#[cfg(test)]
mod tests;
