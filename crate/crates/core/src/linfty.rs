//! Curved L∞[1] structures, their morphisms, and exact axiom checks.
//!
//! A structure is a degree-1 family λ on a graded bundle, optionally with a
//! split differential δ kept apart so transfer can see it; every check runs on
//! the total δ+λ. Morphisms carry a polynomial base map and a degree-0 family
//! into the target bundle pulled back along it (coefficient substitution).

use std::sync::Arc;

use num::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::compose::{bullet_on, circ_on, compose_bullet};
use crate::error::{Error, Result};
use crate::graded::{canonical_keys, FVec, GradedBundle};
use crate::matrix::{PolyMatrix, QMatrix};
use crate::multiop::{MultiMap, MultiOp, OpFamily};
use crate::poly::{Poly, Q};

/// Arities beyond which no canonical key fits under `max_total`; `None` when a
/// degree-0 basis element makes the degree bound vacuous.
pub(crate) fn degree_arity_bound(degs: &[i32], max_total: i32) -> Option<usize> {
    if max_total < 0 {
        return Some(0);
    }
    match degs.iter().min() {
        None => Some(0),
        Some(&d) if d >= 1 => Some((max_total / d) as usize),
        Some(_) => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvedStructure {
    bundle: Arc<GradedBundle>,
    lambda: OpFamily,
    delta: Option<MultiOp>,
}

impl CurvedStructure {
    pub fn new(bundle: Arc<GradedBundle>, lambda: OpFamily) -> Result<Self> {
        if lambda.source() != &bundle || lambda.target() != &bundle {
            return Err(Error::BundleMismatch("λ must act on the structure's bundle".into()));
        }
        if lambda.degree() != 1 {
            return Err(Error::Degree(format!("λ has degree {}, expected 1", lambda.degree())));
        }
        Ok(CurvedStructure { bundle, lambda, delta: None })
    }

    pub fn with_delta(bundle: Arc<GradedBundle>, delta: MultiOp, lambda: OpFamily) -> Result<Self> {
        let mut s = Self::new(bundle, lambda)?;
        if delta.arity() != 1 || delta.degree() != 1 {
            return Err(Error::Degree("δ must be an arity-1 operation of degree 1".into()));
        }
        if delta.source() != &s.bundle || delta.target() != &s.bundle {
            return Err(Error::BundleMismatch("δ must act on the structure's bundle".into()));
        }
        s.delta = (!delta.is_zero()).then_some(delta);
        Ok(s)
    }

    pub fn zero(bundle: Arc<GradedBundle>) -> Self {
        let lambda = OpFamily::new(bundle.clone(), bundle.clone(), 1);
        CurvedStructure { bundle, lambda, delta: None }
    }

    pub fn bundle(&self) -> &Arc<GradedBundle> {
        &self.bundle
    }

    pub fn lambda(&self) -> &OpFamily {
        &self.lambda
    }

    pub fn delta(&self) -> Option<&MultiOp> {
        self.delta.as_ref()
    }

    /// δ folded into the arity-1 slot of λ.
    pub fn total(&self) -> OpFamily {
        let mut t = self.lambda.clone();
        if let Some(d) = &self.delta {
            t.op_mut(1).add_op(d).expect("δ shape checked at construction");
        }
        t
    }

    /// The split form (δ, λ) with δ = 0 when none was recorded.
    pub fn split(&self) -> (MultiOp, OpFamily) {
        let d = self.delta.clone().unwrap_or_else(|| MultiOp::new(self.bundle.clone(), self.bundle.clone(), 1, 1));
        (d, self.lambda.clone())
    }

    pub fn curvature(&self) -> FVec {
        self.lambda.eval_basis(&[])
    }

    /// Largest degree present in the bundle.
    pub fn amplitude(&self) -> i32 {
        self.bundle.max_degree()
    }

    /// Same operations over a bundle with identical bases.
    pub fn rebind(&self, bundle: Arc<GradedBundle>) -> CurvedStructure {
        CurvedStructure {
            lambda: self.lambda.rebind(bundle.clone(), bundle.clone()),
            delta: self.delta.as_ref().map(|d| d.rebind(bundle.clone(), bundle.clone())),
            bundle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub arity: usize,
    pub inputs: Vec<String>,
    pub residual: String,
    #[serde(skip)]
    pub input_indices: Vec<usize>,
    #[serde(skip)]
    pub residual_vec: FVec,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inputs = if self.inputs.is_empty() { "()".to_string() } else { self.inputs.join(",") };
        write!(f, "n={}, input {}, residual {}", self.arity, inputs, self.residual)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub pass: bool,
    /// Number of basis tuples evaluated.
    pub checked: usize,
    pub failures: Vec<Failure>,
}

impl AxiomReport {
    pub(crate) fn from_failures(checked: usize, failures: Vec<Failure>) -> Self {
        AxiomReport { pass: failures.is_empty(), checked, failures }
    }

    /// Merges another report, as for a conjunction of checks.
    pub fn merge(&mut self, other: AxiomReport) {
        self.checked += other.checked;
        self.failures.extend(other.failures);
        self.pass = self.failures.is_empty();
    }
}

/// Evaluates `residual` on every canonical basis key of arities `0..=max_arity`
/// whose output degree stays within the target.
fn scan(
    source: &GradedBundle,
    target: &GradedBundle,
    max_total: i32,
    max_arity: usize,
    residual: &(dyn Fn(&[FVec], &[i32]) -> FVec + Sync),
) -> AxiomReport {
    let degs = source.degrees();
    let mut keys = Vec::new();
    for n in 0..=max_arity {
        keys.extend(canonical_keys(&degs, n, max_total));
    }
    let checked = keys.len();
    let failures: Vec<Failure> = keys
        .par_iter()
        .filter_map(|key| {
            let xs: Vec<FVec> = key.iter().map(|&i| source.unit(i)).collect();
            let kd: Vec<i32> = key.iter().map(|&i| degs[i]).collect();
            let r = residual(&xs, &kd);
            (!r.is_zero()).then(|| Failure {
                arity: key.len(),
                inputs: key.iter().map(|&i| source.name(i).to_string()).collect(),
                residual: target.show_vec(&r),
                input_indices: key.clone(),
                residual_vec: r,
            })
        })
        .collect();
    AxiomReport::from_failures(checked, failures)
}

/// The square-zero identity for an arbitrary evaluator on `bundle`; `max_arity`
/// bounds the arities tried.
pub fn check_square_zero(total: &dyn MultiMap, bundle: &GradedBundle, max_arity: usize) -> AxiomReport {
    scan(bundle, bundle, bundle.max_degree() - 2, max_arity, &|xs, d| circ_on(total, total, xs, d))
}

/// ((δ+λ)∘(δ+λ))_n on every basis tuple that can reach a nonzero degree.
pub fn check_structure(s: &CurvedStructure) -> AxiomReport {
    let total = s.total();
    if total.is_zero() {
        return AxiomReport::from_failures(0, Vec::new());
    }
    let by_arity = (2 * total.max_arity()).saturating_sub(1);
    let degs = s.bundle.degrees();
    let bound = degree_arity_bound(&degs, s.bundle.max_degree() - 2).map_or(by_arity, |b| b.min(by_arity));
    check_square_zero(&total, &s.bundle, bound)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LooMorphism {
    source: Arc<GradedBundle>,
    target: Arc<GradedBundle>,
    pulled: Arc<GradedBundle>,
    base_map: Vec<Poly>,
    phi: OpFamily,
}

/// The target bundle's bases over the source chart.
pub fn pulled_target(source: &GradedBundle, target: &GradedBundle) -> Arc<GradedBundle> {
    Arc::new(target.with_chart(source.chart().clone()))
}

pub fn identity_map(nvars: usize) -> Vec<Poly> {
    (0..nvars).map(|i| Poly::var(nvars, i)).collect()
}

impl LooMorphism {
    pub fn new(
        source: Arc<GradedBundle>,
        target: Arc<GradedBundle>,
        base_map: Vec<Poly>,
        phi: OpFamily,
    ) -> Result<Self> {
        if base_map.len() != target.nvars() {
            return Err(Error::Dimension(format!(
                "base map has {} components for a {}-dimensional target chart",
                base_map.len(),
                target.nvars()
            )));
        }
        if base_map.iter().any(|p| p.nvars() != source.nvars()) {
            return Err(Error::Dimension("base map components not in the source coordinates".into()));
        }
        let pulled = pulled_target(&source, &target);
        if phi.source() != &source || phi.target() != &pulled {
            return Err(Error::BundleMismatch("φ must map the source bundle to the pulled-back target".into()));
        }
        if phi.degree() != 0 {
            return Err(Error::Degree("φ must have degree 0".into()));
        }
        if phi.op(0).is_some() {
            return Err(Error::Degree("φ has no arity-0 component".into()));
        }
        Ok(LooMorphism { source, target, pulled, base_map, phi })
    }

    pub fn identity(bundle: Arc<GradedBundle>) -> Self {
        let phi = OpFamily::identity(bundle.clone());
        LooMorphism { source: bundle.clone(), target: bundle.clone(), pulled: bundle.clone(), base_map: identity_map(bundle.nvars()), phi }
    }

    /// A morphism whose only component is the arity-1 `linear` part.
    pub fn linear(
        source: Arc<GradedBundle>,
        target: Arc<GradedBundle>,
        base_map: Vec<Poly>,
        linear: MultiOp,
    ) -> Result<Self> {
        let pulled = pulled_target(&source, &target);
        let mut phi = OpFamily::new(source.clone(), pulled, 0);
        phi.set_op(linear)?;
        Self::new(source, target, base_map, phi)
    }

    pub fn source(&self) -> &Arc<GradedBundle> {
        &self.source
    }

    pub fn target(&self) -> &Arc<GradedBundle> {
        &self.target
    }

    pub fn pulled(&self) -> &Arc<GradedBundle> {
        &self.pulled
    }

    pub fn base_map(&self) -> &[Poly] {
        &self.base_map
    }

    pub fn phi(&self) -> &OpFamily {
        &self.phi
    }

    pub fn is_linear(&self) -> bool {
        self.phi.arities().iter().all(|&k| k == 1)
    }

    pub fn is_identity_on_base(&self) -> bool {
        self.source.nvars() == self.target.nvars() && self.base_map == identity_map(self.source.nvars())
    }

    /// A family on the target, pulled back to the source chart.
    pub fn pull_family(&self, fam: &OpFamily) -> OpFamily {
        fam.pullback(&self.base_map, self.pulled.clone(), self.pulled.clone())
    }

    /// φ₁ as a matrix (rows: target basis, columns: source basis).
    pub fn linear_part(&self) -> PolyMatrix {
        op_matrix(self.phi.op(1), self.source.rank(), self.pulled.rank(), self.source.nvars())
    }

    pub fn linear_part_at(&self, point: &[Q]) -> QMatrix {
        self.linear_part().eval(point)
    }

    /// Jacobian of the base map (rows: target coordinates).
    pub fn base_jacobian(&self) -> PolyMatrix {
        let n = self.source.nvars();
        let mut j = PolyMatrix::zeros(self.base_map.len(), n, n);
        for (r, p) in self.base_map.iter().enumerate() {
            for c in 0..n {
                j.set(r, c, p.derivative(c));
            }
        }
        j
    }

    pub fn map_point(&self, point: &[Q]) -> Vec<Q> {
        self.base_map.iter().map(|p| p.eval(point)).collect()
    }
}

/// Matrix of an arity-1 operation (rows: target basis, columns: source basis).
pub fn op_matrix(op: Option<&MultiOp>, src_rank: usize, tgt_rank: usize, nvars: usize) -> PolyMatrix {
    let mut m = PolyMatrix::zeros(tgt_rank, src_rank, nvars);
    if let Some(op) = op {
        for (key, v) in op.entries() {
            for (i, p) in v.nonzero() {
                m.set(i, key[0], p.clone());
            }
        }
    }
    m
}

fn check_endpoints(m: &LooMorphism, src: &CurvedStructure, tgt: &CurvedStructure) -> Result<()> {
    if src.bundle() != &m.source || tgt.bundle() != &m.target {
        return Err(Error::BundleMismatch("structures do not match the morphism's endpoints".into()));
    }
    Ok(())
}

/// Residuals of φ∘(δ+λ) − f*(δ′+λ′)•φ, including the arity-0 slot φ₁(λ₀) = f*λ′₀.
pub fn check_morphism(m: &LooMorphism, src: &CurvedStructure, tgt: &CurvedStructure) -> Result<AxiomReport> {
    check_endpoints(m, src, tgt)?;
    let s_tot = src.total();
    let t_tot = m.pull_family(&tgt.total());
    let phi = &m.phi;
    let by_arity = (phi.max_arity() + s_tot.max_arity()).saturating_sub(1).max(t_tot.max_arity() * phi.max_arity());
    let degs = m.source.degrees();
    let max_total = m.target.max_degree() - 1;
    let bound = degree_arity_bound(&degs, max_total).map_or(by_arity, |b| b.min(by_arity));
    Ok(scan(&m.source, &m.pulled, max_total, bound, &|xs, d| {
        circ_on(phi, &s_tot, xs, d).sub(&bullet_on(&t_tot, phi, xs, d))
    }))
}

/// `second ∘ first`: base maps compose, families combine as f*ψ • φ.
pub fn compose_morphisms(first: &LooMorphism, second: &LooMorphism) -> Result<LooMorphism> {
    if first.target != second.source {
        return Err(Error::BundleMismatch("morphisms are not composable".into()));
    }
    let base: Vec<Poly> = second.base_map.iter().map(|p| p.substitute_into(&first.base_map, first.source.nvars())).collect();
    let outer_pulled = pulled_target(&first.source, &second.target);
    let psi = second.phi.pullback(&first.base_map, first.pulled.clone(), outer_pulled);
    let phi = compose_bullet(&psi, &first.phi)?;
    LooMorphism::new(first.source.clone(), second.target.clone(), base, phi)
}

/// Inverse of an affine bijection between charts, as polynomials in the target coordinates.
pub fn affine_inverse(base_map: &[Poly], source_dim: usize) -> Result<Vec<Poly>> {
    let n = base_map.len();
    if n != source_dim {
        return Err(Error::NotInvertible("base map between charts of different dimension".into()));
    }
    if base_map == identity_map(n).as_slice() {
        return Ok(identity_map(n));
    }
    let mut a = QMatrix::zeros(n, n);
    let mut b = vec![Q::zero(); n];
    for (i, p) in base_map.iter().enumerate() {
        for (e, c) in p.terms() {
            match e.iter().sum::<u32>() {
                0 => b[i] = c.clone(),
                1 => a.set(i, e.iter().position(|&k| k == 1).unwrap(), c.clone()),
                _ => return Err(Error::NotInvertible("base map is not affine".into())),
            }
        }
    }
    let inv = a.inverse().ok_or_else(|| Error::NotInvertible("affine base map is singular".into()))?;
    Ok((0..n)
        .map(|j| {
            let mut p = Poly::zero(n);
            for (i, bi) in b.iter().enumerate() {
                let c = inv.get(j, i);
                if c.is_zero() {
                    continue;
                }
                p.add_scaled(&Poly::var(n, i), c);
                p.add_scaled(&Poly::constant(n, bi.clone()), &-c.clone());
            }
            p
        })
        .collect())
}

/// The unique ψ with ψ•φ = id (and then φ•ψ = id), both verified exactly.
///
/// Over the source chart, ψ̃₁ = φ₁⁻¹ and for n ≥ 2 the arity-n part of
/// ψ̃•φ = id determines ψ̃_n on φ₁-images; ψ is ψ̃ pulled back along f⁻¹.
pub fn invert_morphism(m: &LooMorphism) -> Result<LooMorphism> {
    let g = affine_inverse(&m.base_map, m.source.nvars())?;
    let nv = m.source.nvars();
    let inv = m.linear_part().inverse_unimodular(nv)?;
    let col = |j: usize| FVec((0..inv.rows()).map(|i| inv.get(i, j).clone()).collect());
    let mut tilde = OpFamily::new(m.pulled.clone(), m.source.clone(), 0);
    for j in 0..m.pulled.rank() {
        tilde.op_mut(1).set(&[j], col(j))?;
    }
    if !m.is_linear() {
        let degs = m.pulled.degrees();
        let max_total = m.source.max_degree();
        let bound = degree_arity_bound(&degs, max_total)
            .ok_or_else(|| Error::ArityGuard("inverting a nonlinear morphism on a degree-0 bundle".into()))?;
        let preimages: Vec<FVec> = (0..m.pulled.rank()).map(col).collect();
        for n in 2..=bound {
            let keys = canonical_keys(&degs, n, max_total);
            let values: Vec<(Vec<usize>, FVec)> = keys
                .into_par_iter()
                .map(|key| {
                    let xs: Vec<FVec> = key.iter().map(|&j| preimages[j].clone()).collect();
                    let kd: Vec<i32> = key.iter().map(|&j| degs[j]).collect();
                    let v = bullet_on(&tilde, &m.phi, &xs, &kd).neg();
                    (key, v)
                })
                .collect();
            let op = tilde.op_mut(n);
            for (k, v) in values {
                op.insert_canonical(k, v);
            }
        }
    }
    let src_over_tgt = pulled_target(&m.target, &m.source);
    let psi = tilde.pullback(&g, m.target.clone(), src_over_tgt);
    let out = LooMorphism::new(m.target.clone(), m.source.clone(), g, psi)?;
    if compose_morphisms(m, &out)? != LooMorphism::identity(m.source.clone()) {
        return Err(Error::Verification("ψ•φ ≠ id".into()));
    }
    if compose_morphisms(&out, m)? != LooMorphism::identity(m.target.clone()) {
        return Err(Error::Verification("φ•ψ ≠ id".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Strictification {
    /// φ′ with φ′₁ = id, from the original source to the new one.
    pub iso: LooMorphism,
    /// The linear fibration π with π•φ′ = φ.
    pub linear_fib: LooMorphism,
    pub new_source: CurvedStructure,
}

/// A splitting s of φ₁ (φ₁s = id) by exact elimination when φ₁ is constant.
fn constant_splitting(m: &LooMorphism) -> Result<MultiOp> {
    let a = m
        .linear_part()
        .constant()
        .ok_or_else(|| Error::NonConstant("φ₁ has non-constant coefficients; supply a splitting".into()))?;
    let s = a.right_inverse().ok_or_else(|| Error::NotSurjective("φ₁ is not degreewise surjective".into()))?;
    let nv = m.source.nvars();
    let mut op = MultiOp::new(m.pulled.clone(), m.source.clone(), 1, 0);
    for j in 0..s.cols() {
        let v = FVec(s.column(j).into_iter().map(|c| Poly::constant(nv, c)).collect());
        op.set(&[j], v)?;
    }
    Ok(op)
}

/// Factors a fibration as a linear fibration after an isomorphism.
///
/// With a splitting s of φ₁, φ′ = (id, sφ₂, sφ₃, …) is an automorphism of the
/// source bundle and λ′ is solved arity by arity from φ′∘λ = λ′•φ′; the
/// projection π = φ₁ is then linear with π•φ′ = φ.
pub fn strictify_fibration(
    m: &LooMorphism,
    src: &CurvedStructure,
    tgt: &CurvedStructure,
    splitting: Option<MultiOp>,
) -> Result<Strictification> {
    check_endpoints(m, src, tgt)?;
    let s = match splitting {
        Some(s) => {
            if s.source() != &m.pulled || s.target() != &m.source || s.arity() != 1 || s.degree() != 0 {
                return Err(Error::BundleMismatch("splitting must map the pulled target into the source".into()));
            }
            s
        }
        None => constant_splitting(m)?,
    };
    let nv = m.source.nvars();
    let ps = m.linear_part().mul(&op_matrix(Some(&s), m.pulled.rank(), m.source.rank(), nv));
    if ps != PolyMatrix::identity(m.pulled.rank(), nv) {
        return Err(Error::Verification("supplied splitting is not a right inverse of φ₁".into()));
    }

    let bundle = m.source.clone();
    let mut iso_phi = OpFamily::identity(bundle.clone());
    for k in m.phi.arities().into_iter().filter(|&k| k >= 2) {
        let op = m.phi.op(k).unwrap();
        let lifted = iso_phi.op_mut(k);
        for (key, v) in op.entries() {
            lifted.insert_canonical(key.clone(), s.eval(std::slice::from_ref(v)));
        }
    }

    let lam = src.total();
    let degs = bundle.degrees();
    let max_total = bundle.max_degree() - 1;
    let bound = degree_arity_bound(&degs, max_total)
        .ok_or_else(|| Error::ArityGuard("strictifying over a degree-0 bundle".into()))?;
    let mut new_lam = OpFamily::new(bundle.clone(), bundle.clone(), 1);
    for n in 0..=bound {
        let keys = canonical_keys(&degs, n, max_total);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| bundle.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| degs[i]).collect();
                let mut v = circ_on(&iso_phi, &lam, &xs, &kd);
                if n > 0 {
                    v = v.sub(&bullet_on(&new_lam, &iso_phi, &xs, &kd));
                }
                (key, v)
            })
            .collect();
        let op = new_lam.op_mut(n);
        for (k, v) in values {
            op.insert_canonical(k, v);
        }
    }
    let new_source = CurvedStructure::new(bundle.clone(), new_lam)?;
    let iso = LooMorphism::new(bundle.clone(), bundle.clone(), identity_map(nv), iso_phi)?;
    let linear_fib = LooMorphism::linear(bundle.clone(), m.target.clone(), m.base_map.clone(), m.phi.op(1).cloned().unwrap_or_else(|| MultiOp::new(bundle.clone(), m.pulled.clone(), 1, 0)))?;

    let r = check_morphism(&iso, src, &new_source)?;
    if !r.pass {
        return Err(Error::Verification(format!("φ′ fails the morphism equation at {}", r.failures[0])));
    }
    let r = check_morphism(&linear_fib, &new_source, tgt)?;
    if !r.pass {
        return Err(Error::Verification(format!("μ•π ≠ π∘λ′ at {}", r.failures[0])));
    }
    if compose_morphisms(&iso, &linear_fib)?.phi != m.phi {
        return Err(Error::Verification("π•φ′ ≠ φ".into()));
    }
    Ok(Strictification { iso, linear_fib, new_source })
}

/// Surjectivity of the base differential and of φ₁ at a point, by exact rank.
pub fn is_fibration_at(m: &LooMorphism, point: &[Q]) -> Result<bool> {
    if point.len() != m.source.nvars() {
        return Err(Error::Dimension(format!("point has {} coordinates, chart has {}", point.len(), m.source.nvars())));
    }
    let jac = m.base_jacobian().eval(point);
    if jac.rank() != m.target.nvars() {
        return Ok(false);
    }
    // φ₁ preserves degree, so full row rank overall means surjective in each degree.
    Ok(m.linear_part_at(point).rank() == m.pulled.rank())
}

/// Fibration test for constant-rank data: requires a constant Jacobian and
/// constant φ₁.
pub fn is_fibration(m: &LooMorphism) -> Result<bool> {
    let jac = m.base_jacobian().constant().ok_or_else(|| Error::NonConstant("base map is not affine".into()))?;
    let lin = m.linear_part().constant().ok_or_else(|| Error::NonConstant("φ₁ has non-constant coefficients".into()))?;
    Ok(jac.rank() == m.target.nvars() && lin.rank() == m.pulled.rank())
}

/// The structure μ on the same bundle making `phi` (identity base map,
/// φ₁ = id) a morphism from `s` to μ: solved arity by arity from
/// μ_n = (φ∘λ)_n − (μ_{<n}•φ)_n.
pub fn transport_structure(s: &CurvedStructure, phi: &OpFamily) -> Result<CurvedStructure> {
    let b = &s.bundle;
    if phi.source() != b || phi.target() != b {
        return Err(Error::BundleMismatch("φ must be an endomorphism family of the structure's bundle".into()));
    }
    if phi.op(1).map(MultiOp::to_matrix) != Some(PolyMatrix::identity(b.rank(), b.nvars())) || phi.op(0).is_some() {
        return Err(Error::Verification("φ₁ must be the identity and φ₀ absent".into()));
    }
    let total = s.total();
    let degs = b.degrees();
    let max_total = b.max_degree() - 1;
    let bound = degree_arity_bound(&degs, max_total).ok_or_else(|| Error::ArityGuard("degree-0 basis element".into()))?;
    let mut mu = OpFamily::new(b.clone(), b.clone(), 1);
    for n in 0..=bound {
        let keys = canonical_keys(&degs, n, max_total);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| b.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| degs[i]).collect();
                (key, circ_on(phi, &total, &xs, &kd).sub(&bullet_on(&mu, phi, &xs, &kd)))
            })
            .collect();
        for (k, v) in values {
            mu.op_mut(n).insert_canonical(k, v);
        }
    }
    CurvedStructure::new(b.clone(), mu)
}
