//! Shifted tangent bundles, connection changes, the polynomial path
//! structure with its integral contraction, and the finite-rank derived path
//! space over M × M.
//!
//! Every fiber is trivialized: a connection is a family of matrices Aⱼ, one
//! per coordinate, and ∇ⱼ = ∂ⱼ + Aⱼ. Paths are straight, so sections along a
//! path are polynomials in an extra variable t.

use std::sync::Arc;

use num::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::compose::{bullet_on, circ_on};
use crate::error::{Error, Result};
use crate::geometry::{diagonal, is_etale_at, product, DerivedChart};
use crate::graded::{canonical_keys, Chart, FVec, GradedBundle};
use crate::linfty::{
    check_morphism, check_structure, compose_morphisms, degree_arity_bound, is_fibration, AxiomReport, CurvedStructure,
    Failure, LooMorphism,
};
use crate::matrix::PolyMatrix;
use crate::multiop::{MultiMap, MultiOp, OpFamily};
use crate::poly::{Poly, Q};

/// A connection on a trivialized bundle: one matrix per coordinate direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionData {
    bundle: Arc<GradedBundle>,
    matrices: Vec<PolyMatrix>,
    flat: bool,
}

impl ConnectionData {
    /// The standard flat connection ∇ = d.
    pub fn flat(bundle: Arc<GradedBundle>) -> Self {
        let (r, n) = (bundle.rank(), bundle.nvars());
        ConnectionData { matrices: vec![PolyMatrix::zeros(r, r, n); n], bundle, flat: true }
    }

    pub fn new(bundle: Arc<GradedBundle>, matrices: Vec<PolyMatrix>) -> Result<Self> {
        let (r, n) = (bundle.rank(), bundle.nvars());
        if matrices.len() != n {
            return Err(Error::Dimension(format!("{} connection matrices for a {n}-dimensional chart", matrices.len())));
        }
        for (j, m) in matrices.iter().enumerate() {
            if m.rows() != r || m.cols() != r {
                return Err(Error::Dimension(format!("connection matrix {j} is not {r}×{r}")));
            }
            for a in 0..r {
                for b in 0..r {
                    if !m.get(a, b).is_zero() && bundle.degree(a) != bundle.degree(b) {
                        return Err(Error::Degree(format!(
                            "connection matrix {j} mixes '{}' and '{}' of different degrees",
                            bundle.name(a),
                            bundle.name(b)
                        )));
                    }
                }
            }
        }
        let flat = matrices.iter().all(PolyMatrix::is_zero);
        Ok(ConnectionData { bundle, matrices, flat })
    }

    pub fn bundle(&self) -> &Arc<GradedBundle> {
        &self.bundle
    }

    pub fn matrices(&self) -> &[PolyMatrix] {
        &self.matrices
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    /// Aⱼ applied to a section.
    fn act(&self, j: usize, v: &FVec) -> FVec {
        let m = &self.matrices[j];
        let mut out = FVec::zero(v.rank(), v.0.first().map_or(self.bundle.nvars(), Poly::nvars));
        for (c, p) in v.nonzero() {
            for r in 0..m.rows() {
                let a = m.get(r, c);
                if !a.is_zero() {
                    out.0[r].add_assign(&(a * p));
                }
            }
        }
        out
    }
}

/// Positions of the summands TM·dt ⊕ L·dt ⊕ L inside the shifted tangent bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentLayout {
    pub bundle: Arc<GradedBundle>,
    /// One per coordinate.
    pub tm: Vec<usize>,
    /// One per basis element of L.
    pub ldt: Vec<usize>,
    pub l: Vec<usize>,
    /// Degrees in L.
    pub l_degrees: Vec<i32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Tm(usize),
    Ldt(usize),
    L(usize),
}

impl TangentLayout {
    /// Names: `d<coord>` for TM·dt, `<name>_dt` for L·dt, `<name>` for L.
    pub fn new(l: &GradedBundle) -> Result<Self> {
        let coords = l.chart().coords();
        let mut decl: Vec<(String, i32)> = coords.iter().map(|c| (format!("d{c}"), 1)).collect();
        decl.extend(l.basis().iter().map(|b| (format!("{}_dt", b.name), b.degree + 1)));
        decl.extend(l.basis().iter().map(|b| (b.name.clone(), b.degree)));
        let bundle = GradedBundle::new(l.chart().clone(), decl.clone())?.shared();
        let find = |k: usize| bundle.index_of(&decl[k].0).unwrap();
        let (m, r) = (coords.len(), l.rank());
        Ok(TangentLayout {
            tm: (0..m).map(find).collect(),
            ldt: (m..m + r).map(find).collect(),
            l: (m + r..m + 2 * r).map(find).collect(),
            l_degrees: l.degrees(),
            bundle,
        })
    }

    fn slots(&self) -> Vec<Slot> {
        let mut s = vec![Slot::L(0); self.bundle.rank()];
        for (j, &p) in self.tm.iter().enumerate() {
            s[p] = Slot::Tm(j);
        }
        for (i, &p) in self.ldt.iter().enumerate() {
            s[p] = Slot::Ldt(i);
        }
        for (i, &p) in self.l.iter().enumerate() {
            s[p] = Slot::L(i);
        }
        s
    }

    fn over(&self, chart: Chart) -> TangentLayout {
        TangentLayout { bundle: Arc::new(self.bundle.with_chart(chart)), ..self.clone() }
    }
}

/// (∇ⱼλ_k)(x…) = ∇ⱼ(λ_k(x…)) − Σ λ_k(…, Aⱼx_m, …) on basis inputs of L.
fn covariant_derivative(total: &OpFamily, conn: &ConnectionData, j: usize, idx: &[usize]) -> FVec {
    let l = conn.bundle();
    let val = total.eval_basis(idx);
    let mut out = val.map(|p| p.derivative(j));
    out.add_assign(&conn.act(j, &val));
    if let Some(op) = total.op(idx.len()) {
        for m in 0..idx.len() {
            let moved = conn.act(j, &l.unit(idx[m]));
            if moved.is_zero() {
                continue;
            }
            let args: Vec<FVec> = idx.iter().enumerate().map(|(a, &i)| if a == m { moved.clone() } else { l.unit(i) }).collect();
            out = out.sub(&op.eval(&args));
        }
    }
    out
}

fn sign_pow(e: i32) -> Q {
    if e.rem_euclid(2) == 0 {
        Q::one()
    } else {
        -Q::one()
    }
}

/// μ = λ + λ̃ + ∇λ on TM·dt ⊕ L·dt ⊕ L.
pub fn shifted_tangent(dc: &DerivedChart, conn: &ConnectionData) -> Result<DerivedChart> {
    let layout = TangentLayout::new(dc.bundle())?;
    let lam = tangent_operations(dc, conn, &layout)?;
    DerivedChart::new(CurvedStructure::new(layout.bundle.clone(), lam)?)
}

fn tangent_operations(dc: &DerivedChart, conn: &ConnectionData, layout: &TangentLayout) -> Result<OpFamily> {
    if conn.bundle() != dc.bundle() {
        return Err(Error::BundleMismatch("connection is on a different bundle".into()));
    }
    let t = &layout.bundle;
    let total = dc.structure().total();
    let slots = layout.slots();
    let degs = t.degrees();
    let max_total = t.max_degree() - 1;
    let bound = degree_arity_bound(&degs, max_total).expect("tangent bundle has positive degrees");
    let mut out = OpFamily::new(t.clone(), t.clone(), 1);
    for n in 0..=bound {
        let keys = canonical_keys(&degs, n, max_total);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let s: Vec<Slot> = key.iter().map(|&i| slots[i]).collect();
                let dt: Vec<usize> = (0..n).filter(|&a| !matches!(s[a], Slot::L(_))).collect();
                let mut v = t.zero_vec();
                let l_of = |a: usize| match s[a] {
                    Slot::L(i) | Slot::Ldt(i) => i,
                    Slot::Tm(_) => unreachable!(),
                };
                match dt.len() {
                    0 => {
                        let idx: Vec<usize> = (0..n).map(l_of).collect();
                        for (j, p) in total.eval_basis(&idx).nonzero() {
                            v.0[layout.l[j]] = p.clone();
                        }
                    }
                    1 => {
                        let pos = dt[0];
                        let after: i32 = (pos + 1..n).map(|a| layout.l_degrees[l_of(a)]).sum();
                        let sign = sign_pow(after);
                        let w = match s[pos] {
                            Slot::Ldt(_) => total.eval_basis(&(0..n).map(l_of).collect::<Vec<_>>()),
                            Slot::Tm(j) => {
                                let rest: Vec<usize> = (0..n).filter(|&a| a != pos).map(l_of).collect();
                                covariant_derivative(&total, conn, j, &rest)
                            }
                            Slot::L(_) => unreachable!(),
                        };
                        for (j, p) in w.nonzero() {
                            v.0[layout.ldt[j]] = p.scale(&sign);
                        }
                    }
                    _ => {}
                }
                (key, v)
            })
            .collect();
        for (k, v) in values {
            out.op_mut(n).insert_canonical(k, v);
        }
    }
    Ok(out)
}

/// The isomorphism between the shifted tangent charts of two connections.
#[derive(Clone, Debug)]
pub struct ConnectionChange {
    pub iso: LooMorphism,
    pub source: DerivedChart,
    pub target: DerivedChart,
}

/// Φ₁ = id, Φ₂(ξ₁, ξ₂) = α(v₂, x₁)dt + (−1)^|x₂| α(v₁, x₂)dt with α = Ā − A.
pub fn connection_change_iso(dc: &DerivedChart, from: &ConnectionData, to: &ConnectionData) -> Result<ConnectionChange> {
    let source = shifted_tangent(dc, from)?;
    let target = shifted_tangent(dc, to)?;
    let layout = TangentLayout::new(dc.bundle())?;
    let t = layout.bundle.clone();
    let mut phi = OpFamily::identity(t.clone());
    let l = dc.bundle();
    for j in 0..l.nvars() {
        for x in 0..l.rank() {
            let a = to.act(j, &l.unit(x)).sub(&from.act(j, &l.unit(x)));
            if a.is_zero() {
                continue;
            }
            let mut v = t.zero_vec();
            for (i, p) in a.nonzero() {
                v.0[layout.ldt[i]] = p.clone();
            }
            phi.op_mut(2).set(&[layout.l[x], layout.tm[j]], v)?;
        }
    }
    let iso = LooMorphism::new(t.clone(), t.clone(), crate::linfty::identity_map(l.nvars()), phi)?;
    let report = check_morphism(&iso, source.structure(), target.structure())?;
    if let Some(f) = report.failures.first() {
        return Err(Error::Verification(format!("connection change fails the morphism identity at {f}")));
    }
    Ok(ConnectionChange { iso, source, target })
}

/// Polynomial sections of a*(TM·dt ⊕ L·dt ⊕ L) along a straight path, with t
/// the coordinate at index `t` of the fiber's chart.
#[derive(Clone, Debug)]
pub struct PathFiber {
    layout: TangentLayout,
    t: usize,
}

/// The integral contraction (η, π_lin, π_con) on path sections.
pub type PathContraction = PathFiber;

impl PathFiber {
    pub fn bundle(&self) -> &Arc<GradedBundle> {
        &self.layout.bundle
    }

    pub fn layout(&self) -> &TangentLayout {
        &self.layout
    }

    pub fn t_var(&self) -> usize {
        self.t
    }

    fn nvars(&self) -> usize {
        self.layout.bundle.nvars()
    }

    fn tpoly(&self) -> Poly {
        Poly::var(self.nvars(), self.t)
    }

    /// δ(l) = (−1)^k (dl/dt) dt on Γ(a*L^k); zero on the dt summands.
    pub fn delta(&self, x: &FVec) -> FVec {
        let mut out = self.bundle().zero_vec();
        for (i, &p) in self.layout.l.iter().enumerate() {
            let d = x.0[p].derivative(self.t);
            if !d.is_zero() {
                out.0[self.layout.ldt[i]] = d.scale(&sign_pow(self.layout.l_degrees[i]));
            }
        }
        out
    }

    /// η(α dt) = (−1)^k (∫₀ᵗ α − t ∫₀¹ α) from Γ(a*L^k)dt to Γ(a*L^k).
    pub fn eta(&self, x: &FVec) -> FVec {
        let mut out = self.bundle().zero_vec();
        let t = self.tpoly();
        for (i, &p) in self.layout.ldt.iter().enumerate() {
            let a = &x.0[p];
            if a.is_zero() {
                continue;
            }
            let prim = a.integrate(self.t);
            let whole = prim.specialize(self.t, &Q::one());
            let v = &prim - &(&t * &whole);
            out.0[self.layout.l[i]] = v.scale(&sign_pow(self.layout.l_degrees[i]));
        }
        out
    }

    /// Linear interpolation (1−t)·α(0) + t·α(1) on the L summand.
    pub fn pi_lin(&self, x: &FVec) -> FVec {
        let mut out = self.bundle().zero_vec();
        let t = self.tpoly();
        let one_minus = &Poly::one(self.nvars()) - &t;
        for &p in &self.layout.l {
            let a = &x.0[p];
            if a.is_zero() {
                continue;
            }
            let (a0, a1) = (a.specialize(self.t, &Q::zero()), a.specialize(self.t, &Q::one()));
            out.0[p] = &(&one_minus * &a0) + &(&t * &a1);
        }
        out
    }

    /// ∫₀¹ on the dt summands, as constant sections.
    pub fn pi_con(&self, x: &FVec) -> FVec {
        let mut out = self.bundle().zero_vec();
        for &p in self.layout.tm.iter().chain(&self.layout.ldt) {
            let a = &x.0[p];
            if !a.is_zero() {
                out.0[p] = a.integrate(self.t).specialize(self.t, &Q::one());
            }
        }
        out
    }

    /// ι∘π = π_lin + π_con.
    pub fn project(&self, x: &FVec) -> FVec {
        let mut v = self.pi_lin(x);
        v.add_assign(&self.pi_con(x));
        v
    }

    fn monomial(&self, i: usize, j: u32) -> FVec {
        let mut v = self.bundle().zero_vec();
        v.0[i] = self.tpoly().pow(j);
        v
    }

    fn monomial_name(&self, i: usize, j: u32) -> String {
        let name = self.bundle().name(i);
        match j {
            0 => name.to_string(),
            1 => format!("t*{name}"),
            _ => format!("t^{j}*{name}"),
        }
    }

    /// η² = 0, ηδη = η, π² = π and id − [δ, η] = ι∘π on every monomial section
    /// t^j·e with j ≤ `cap` (constants only on TM·dt).
    pub fn verify(&self, cap: u32) -> IdentityReport {
        let mut checked = 0;
        let mut failures = Vec::new();
        for i in 0..self.bundle().rank() {
            let top = if self.layout.tm.contains(&i) { 0 } else { cap };
            for j in 0..=top {
                let x = self.monomial(i, j);
                let eta = self.eta(&x);
                let proj = self.project(&x);
                let homotopy = {
                    let mut h = self.delta(&eta);
                    h.add_assign(&self.eta(&self.delta(&x)));
                    h
                };
                let checks = [
                    ("η² = 0", self.eta(&eta)),
                    ("ηδη = η", self.eta(&self.delta(&eta)).sub(&eta)),
                    ("π² = π", self.project(&proj).sub(&proj)),
                    ("id − [δ,η] = ιπ", x.sub(&homotopy).sub(&proj)),
                ];
                for (identity, r) in checks {
                    checked += 1;
                    if !r.is_zero() {
                        failures.push(IdentityFailure {
                            identity: identity.to_string(),
                            input: self.monomial_name(i, j),
                            residual: self.bundle().show_vec(&r),
                        });
                    }
                }
            }
        }
        IdentityReport { pass: failures.is_empty(), checked, failures }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityFailure {
    pub identity: String,
    pub input: String,
    pub residual: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub pass: bool,
    pub checked: usize,
    pub failures: Vec<IdentityFailure>,
}

fn fresh_t(coords: &[String]) -> String {
    let mut t = "t".to_string();
    while coords.contains(&t) {
        t.push('_');
    }
    t
}

/// The integral contraction on sections of a*(TM·dt ⊕ L·dt ⊕ L) over an
/// interval; the chart of the result is the single variable t.
pub fn fm_contraction(l: &GradedBundle) -> Result<PathContraction> {
    let layout = TangentLayout::new(l)?;
    let chart = Chart::new([fresh_t(&[])])?;
    Ok(PathFiber { layout: layout.over(chart), t: 0 })
}

/// a(t) = start + t·(end − start).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StraightPath {
    pub start: Vec<Q>,
    pub end: Vec<Q>,
}

impl StraightPath {
    pub fn constant(p: Vec<Q>) -> Self {
        StraightPath { start: p.clone(), end: p }
    }

    fn images(&self, nvars: usize, t: usize) -> Vec<Poly> {
        let tp = Poly::var(nvars, t);
        self.start
            .iter()
            .zip(&self.end)
            .map(|(a, b)| {
                let mut p = Poly::constant(nvars, a.clone());
                p.add_scaled(&tp, &(b - a));
                p
            })
            .collect()
    }
}

/// δ + a′dt + a*μ acting pointwise in t on polynomial path sections.
#[derive(Clone, Debug)]
pub struct PathStructure {
    fiber: PathFiber,
    lam: OpFamily,
}

impl MultiMap for PathStructure {
    fn apply(&self, k: usize, inputs: &[FVec]) -> Option<FVec> {
        let pointwise = self.lam.apply(k, inputs);
        if k != 1 {
            return pointwise;
        }
        let mut d = self.fiber.delta(&inputs[0]);
        if let Some(v) = pointwise {
            d.add_assign(&v);
        }
        Some(d)
    }

    fn max_arity(&self) -> usize {
        self.lam.max_arity().max(1)
    }

    fn zero_output(&self) -> FVec {
        self.fiber.bundle().zero_vec()
    }
}

impl PathStructure {
    pub fn fiber(&self) -> &PathFiber {
        &self.fiber
    }

    /// The pointwise part a′dt + a*μ.
    pub fn pointwise(&self) -> &OpFamily {
        &self.lam
    }

    pub fn curvature(&self) -> FVec {
        self.lam.eval_basis(&[])
    }

    /// The square-zero identity on every tuple of monomial sections t^j·e
    /// with j ≤ `cap`.
    pub fn check_square_zero(&self, cap: u32) -> AxiomReport {
        let b = self.fiber.bundle();
        let width = cap as usize + 1;
        let degs: Vec<i32> = (0..b.rank()).flat_map(|i| std::iter::repeat_n(b.degree(i), width)).collect();
        let max_total = b.max_degree() - 2;
        let bound = degree_arity_bound(&degs, max_total).expect("positive degrees");
        let mut keys = Vec::new();
        for n in 0..=bound {
            keys.extend(canonical_keys(&degs, n, max_total));
        }
        let checked = keys.len();
        let failures: Vec<Failure> = keys
            .par_iter()
            .filter_map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&k| self.fiber.monomial(k / width, (k % width) as u32)).collect();
                let kd: Vec<i32> = key.iter().map(|&k| degs[k]).collect();
                let r = circ_on(self, self, &xs, &kd);
                (!r.is_zero()).then(|| Failure {
                    arity: key.len(),
                    inputs: key.iter().map(|&k| self.fiber.monomial_name(k / width, (k % width) as u32)).collect(),
                    residual: b.show_vec(&r),
                    input_indices: key.clone(),
                    residual_vec: r,
                })
            })
            .collect();
        AxiomReport::from_failures(checked, failures)
    }
}

/// The curved structure a′dt + a*μ (with δ) on polynomial sections along a
/// straight path, for the standard flat connection.
pub fn path_structure(dc: &DerivedChart, path: &StraightPath, conn: &ConnectionData) -> Result<PathStructure> {
    if !conn.is_flat() {
        return Err(Error::Verification("path structures need the standard flat connection".into()));
    }
    let m = dc.dim();
    if path.start.len() != m || path.end.len() != m {
        return Err(Error::Dimension(format!("path endpoints must have {m} coordinates")));
    }
    let layout = TangentLayout::new(dc.bundle())?;
    let mu = tangent_operations(dc, conn, &layout)?;
    let chart = Chart::new([fresh_t(&[])])?;
    let fiber = PathFiber { layout: layout.over(chart), t: 0 };
    let images = path.images(1, 0);
    let mut lam = mu.pullback(&images, fiber.bundle().clone(), fiber.bundle().clone());
    add_velocity(&mut lam, &fiber, &path_velocity(path, 1))?;
    Ok(PathStructure { fiber, lam })
}

fn path_velocity(path: &StraightPath, nvars: usize) -> Vec<Poly> {
    path.start.iter().zip(&path.end).map(|(a, b)| Poly::constant(nvars, b - a)).collect()
}

fn add_velocity(lam: &mut OpFamily, fiber: &PathFiber, velocity: &[Poly]) -> Result<()> {
    let mut v = fiber.bundle().zero_vec();
    for (j, p) in velocity.iter().enumerate() {
        v.0[fiber.layout.tm[j]] = p.clone();
    }
    lam.op_mut(0).add(&[], &v)
}

/// The derived path space with its inclusion of constant paths and the
/// evaluation at both ends.
#[derive(Clone, Debug)]
pub struct PathSpace {
    pub chart: DerivedChart,
    /// 𝓜 × 𝓜 with coordinates `<c>0`, `<c>1` and bases `<e>_0`, `<e>_1`.
    pub square: DerivedChart,
    pub inclusion: LooMorphism,
    pub evaluation: LooMorphism,
    /// The transfer morphism φ from the path space into polynomial path
    /// sections, over the coordinates (x₀, x₁, t).
    pub transfer_map: OpFamily,
}

struct PathSetup {
    fiber: PathFiber,
    lam: OpFamily,
    h3: Arc<GradedBundle>,
    h2: Arc<GradedBundle>,
    /// For each basis element of H: its image under ι.
    iota: Vec<FVec>,
    /// Per summand of the fiber: where π sends it in H.
    drop_t: Vec<Poly>,
    h_tm: Vec<usize>,
    h_dt: Vec<usize>,
    h_0: Vec<usize>,
    h_1: Vec<usize>,
}

impl PathSetup {
    /// π as H-coordinates over (x₀, x₁).
    fn pi(&self, x: &FVec) -> FVec {
        let lay = &self.fiber.layout;
        let con = self.fiber.pi_con(x);
        let mut out = self.h2.zero_vec();
        let t = self.fiber.t;
        let strip = |p: &Poly| {
            debug_assert_eq!(p.degree_in(t), 0);
            p.substitute(&self.drop_t)
        };
        for (j, &p) in lay.tm.iter().enumerate() {
            out.0[self.h_tm[j]] = strip(&con.0[p]);
        }
        for (i, &p) in lay.ldt.iter().enumerate() {
            out.0[self.h_dt[i]] = strip(&con.0[p]);
        }
        for (i, &p) in lay.l.iter().enumerate() {
            out.0[self.h_0[i]] = strip(&x.0[p].specialize(t, &Q::zero()));
            out.0[self.h_1[i]] = strip(&x.0[p].specialize(t, &Q::one()));
        }
        out
    }
}

fn path_setup(dc: &DerivedChart) -> Result<PathSetup> {
    let l = dc.bundle();
    let coords = l.chart().coords();
    let m = coords.len();
    let mut names: Vec<String> = coords.iter().map(|c| format!("{c}0")).collect();
    names.extend(coords.iter().map(|c| format!("{c}1")));
    let chart2 = Chart::new(names.clone())?;
    names.push(fresh_t(&names));
    let chart3 = Chart::new(names)?;
    let t = 2 * m;

    let layout = TangentLayout::new(l)?;
    let conn = ConnectionData::flat(l.clone());
    let mu = tangent_operations(dc, &conn, &layout)?;
    let fiber = PathFiber { layout: layout.over(chart3.clone()), t };
    let tp = Poly::var(2 * m + 1, t);
    let images: Vec<Poly> = (0..m)
        .map(|j| {
            let (x0, x1) = (Poly::var(2 * m + 1, j), Poly::var(2 * m + 1, m + j));
            &x0 + &(&tp * &(&x1 - &x0))
        })
        .collect();
    let velocity: Vec<Poly> = (0..m).map(|j| &Poly::var(2 * m + 1, m + j) - &Poly::var(2 * m + 1, j)).collect();
    let mut lam = mu.pullback(&images, fiber.bundle().clone(), fiber.bundle().clone());
    add_velocity(&mut lam, &fiber, &velocity)?;

    let mut decl: Vec<(String, i32)> = coords.iter().map(|c| (format!("d{c}"), 1)).collect();
    decl.extend(l.basis().iter().map(|b| (format!("{}_dt", b.name), b.degree + 1)));
    decl.extend(l.basis().iter().map(|b| (format!("{}_0", b.name), b.degree)));
    decl.extend(l.basis().iter().map(|b| (format!("{}_1", b.name), b.degree)));
    let h2 = GradedBundle::new(chart2, decl.clone())?.shared();
    let h3 = Arc::new(h2.with_chart(chart3));
    let find = |k: usize| h2.index_of(&decl[k].0).unwrap();
    let r = l.rank();
    let h_tm: Vec<usize> = (0..m).map(find).collect();
    let h_dt: Vec<usize> = (m..m + r).map(find).collect();
    let h_0: Vec<usize> = (m + r..m + 2 * r).map(find).collect();
    let h_1: Vec<usize> = (m + 2 * r..m + 3 * r).map(find).collect();

    let lay = &fiber.layout;
    let mut iota = vec![fiber.bundle().zero_vec(); h2.rank()];
    let one = Poly::one(2 * m + 1);
    for j in 0..m {
        iota[h_tm[j]].0[lay.tm[j]] = one.clone();
    }
    for i in 0..r {
        iota[h_dt[i]].0[lay.ldt[i]] = one.clone();
        iota[h_0[i]].0[lay.l[i]] = &one - &tp;
        iota[h_1[i]].0[lay.l[i]] = tp.clone();
    }
    let mut drop_t: Vec<Poly> = (0..2 * m).map(|j| Poly::var(2 * m, j)).collect();
    drop_t.push(Poly::zero(2 * m));
    Ok(PathSetup { fiber, lam, h3, h2, iota, drop_t, h_tm, h_dt, h_0, h_1 })
}

/// Solves φ = ι − η((a′dt + a*μ)•φ) arity by arity over (x₀, x₁, t).
fn path_transfer_map(setup: &PathSetup) -> Result<OpFamily> {
    let fiber = &setup.fiber;
    let h = &setup.h3;
    let degs = h.degrees();
    let top = fiber.bundle().max_degree();
    let bound = degree_arity_bound(&degs, top).expect("positive degrees");
    let lam_t = setup.lam.arities().iter().map(|&k| setup.lam.op(k).unwrap().max_coefficient_degree(fiber.t)).max().unwrap_or(0);
    let cap = (top as u32 + 2) * (lam_t + 2);
    let mut phi = OpFamily::new(h.clone(), fiber.bundle().clone(), 0);
    for n in 1..=bound {
        let keys = canonical_keys(&degs, n, top);
        let values: Vec<Result<(Vec<usize>, FVec)>> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| h.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| degs[i]).collect();
                let rest = bullet_on(&setup.lam, &phi, &xs, &kd);
                let mut base = if n == 1 { setup.iota[key[0]].clone() } else { fiber.bundle().zero_vec() };
                base = base.sub(&fiber.eta(&rest));
                let mut v = base.clone();
                for _ in 0..=(top + 2) {
                    let mut inner = rest.clone();
                    if let Some(w) = setup.lam.apply(1, &[v.clone()]) {
                        inner.add_assign(&w);
                    }
                    let next = fiber.eta(&inner);
                    let next = if n == 1 { setup.iota[key[0]].sub(&next) } else { next.neg() };
                    if next == v {
                        let tdeg = v.0.iter().map(|p| p.degree_in(fiber.t)).max().unwrap_or(0);
                        if tdeg > cap {
                            return Err(Error::DegreeCap(format!("t-degree {tdeg} exceeds the cap {cap}")));
                        }
                        return Ok((key, v));
                    }
                    v = next;
                }
                Err(Error::NotNilpotent("path transfer did not stabilize".into()))
            })
            .collect();
        for r in values {
            let (k, v) = r?;
            phi.op_mut(n).insert_canonical(k, v);
        }
    }
    Ok(phi)
}

/// The derived path space for the standard flat connection.
pub fn derived_path_space(dc: &DerivedChart) -> Result<PathSpace> {
    derived_path_space_with(dc, &ConnectionData::flat(dc.bundle().clone()))
}

pub fn derived_path_space_with(dc: &DerivedChart, conn: &ConnectionData) -> Result<PathSpace> {
    if !conn.is_flat() {
        return Err(Error::Verification("the derived path space needs the standard flat connection".into()));
    }
    let setup = path_setup(dc)?;
    let phi = path_transfer_map(&setup)?;
    let h2 = setup.h2.clone();
    let degs = h2.degrees();
    let max_total = h2.max_degree() - 1;
    let bound = degree_arity_bound(&degs, max_total).expect("positive degrees");
    let mut nu = OpFamily::new(h2.clone(), h2.clone(), 1);
    for n in 0..=bound {
        let keys = canonical_keys(&degs, n, max_total);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| setup.h3.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| degs[i]).collect();
                (key, setup.pi(&bullet_on(&setup.lam, &phi, &xs, &kd)))
            })
            .collect();
        for (k, v) in values {
            nu.op_mut(n).insert_canonical(k, v);
        }
    }
    let mut delta = MultiOp::new(h2.clone(), h2.clone(), 1, 1);
    for i in 0..h2.rank() {
        let v = setup.pi(&setup.fiber.delta(&setup.iota[i]));
        if !v.is_zero() {
            delta.set(&[i], v)?;
        }
    }
    let chart = DerivedChart::new(CurvedStructure::with_delta(h2.clone(), delta, nu)?)?;

    let l = dc.bundle();
    let m = l.nvars();
    let square = product(dc, dc, ["0", "1"])?;
    let pulled = crate::linfty::pulled_target(l, &h2);
    let mut inc = MultiOp::new(l.clone(), pulled, 1, 0);
    for i in 0..l.rank() {
        let mut v = inc.target().zero_vec();
        v.0[setup.h_0[i]] = Poly::one(m);
        v.0[setup.h_1[i]] = Poly::one(m);
        inc.set(&[i], v)?;
    }
    let id = crate::linfty::identity_map(m);
    let doubled: Vec<Poly> = id.iter().chain(id.iter()).cloned().collect();
    let inclusion = LooMorphism::linear(l.clone(), h2.clone(), doubled, inc)?;

    let sq = square.bundle().clone();
    let pulled = crate::linfty::pulled_target(&h2, &sq);
    let mut ev = MultiOp::new(h2.clone(), pulled.clone(), 1, 0);
    for i in 0..l.rank() {
        let name = l.name(i);
        ev.set(&[setup.h_0[i]], pulled.unit(sq.index_of(&format!("{name}_0")).unwrap()))?;
        ev.set(&[setup.h_1[i]], pulled.unit(sq.index_of(&format!("{name}_1")).unwrap()))?;
    }
    let evaluation = LooMorphism::linear(h2.clone(), sq, crate::linfty::identity_map(2 * m), ev)?;
    Ok(PathSpace { chart, square, inclusion, evaluation, transfer_map: phi })
}

/// The factorization 𝓜 → 𝓟𝓜 → 𝓜 × 𝓜 of the diagonal, checked piece by piece.
#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub pass: bool,
    pub structure: AxiomReport,
    pub inclusion: AxiomReport,
    pub inclusion_linear: bool,
    pub evaluation: AxiomReport,
    pub evaluation_linear: bool,
    pub evaluation_fibration: bool,
    pub composite_is_diagonal: bool,
    /// Étaleness of the inclusion at each supplied classical point.
    pub inclusion_etale: Vec<bool>,
}

pub fn factorization_check(dc: &DerivedChart, ps: &PathSpace, points: &[Vec<Q>]) -> Result<FactorizationReport> {
    let structure = check_structure(ps.chart.structure());
    let inclusion = check_morphism(&ps.inclusion, dc.structure(), ps.chart.structure())?;
    let evaluation = check_morphism(&ps.evaluation, ps.chart.structure(), ps.square.structure())?;
    let evaluation_fibration = is_fibration(&ps.evaluation)?;
    let composite = compose_morphisms(&ps.inclusion, &ps.evaluation)?;
    let composite_is_diagonal = composite == diagonal(dc, ["0", "1"])?;
    let inclusion_etale = points.iter().map(|p| is_etale_at(&ps.inclusion, dc, &ps.chart, p)).collect::<Result<Vec<_>>>()?;
    let pass = structure.pass
        && inclusion.pass
        && ps.inclusion.is_linear()
        && evaluation.pass
        && ps.evaluation.is_linear()
        && evaluation_fibration
        && composite_is_diagonal
        && inclusion_etale.iter().all(|&b| b);
    Ok(FactorizationReport {
        pass,
        structure,
        inclusion,
        inclusion_linear: ps.inclusion.is_linear(),
        evaluation,
        evaluation_linear: ps.evaluation.is_linear(),
        evaluation_fibration,
        composite_is_diagonal,
        inclusion_etale,
    })
}

#[cfg(test)]
mod tests;
