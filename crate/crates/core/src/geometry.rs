//! Derived charts as geometric objects: classical points, tangent complexes,
//! étale and weak-equivalence tests, virtual dimension, products and
//! pullbacks along linear fibrations.

use std::collections::BTreeSet;
use std::sync::Arc;

use num::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::compose::bullet_on;
use crate::error::{Error, Result};
use crate::graded::{canonical_keys, Chart, FVec, GradedBundle};
use crate::linfty::{check_morphism, check_structure, degree_arity_bound, identity_map, CurvedStructure, LooMorphism};
use crate::matrix::QMatrix;
use crate::multiop::{MultiOp, OpFamily};
use crate::poly::{Poly, Q};

/// A curved structure with positive degrees that passes the square-zero check.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedChart {
    structure: CurvedStructure,
}

impl DerivedChart {
    pub fn new(structure: CurvedStructure) -> Result<Self> {
        let b = structure.bundle();
        if let Some(i) = (0..b.rank()).find(|&i| b.degree(i) < 1) {
            return Err(Error::Degree(format!("'{}' has degree {}; derived charts live in degrees ≥ 1", b.name(i), b.degree(i))));
        }
        let report = check_structure(&structure);
        if let Some(f) = report.failures.first() {
            return Err(Error::Verification(format!("structure fails the square-zero identity at {f}")));
        }
        Ok(DerivedChart { structure })
    }

    /// A plain manifold: the chart with the zero bundle.
    pub fn plain(chart: Chart) -> Self {
        let b = GradedBundle::new(chart, Vec::new()).expect("empty bundle").shared();
        DerivedChart { structure: CurvedStructure::zero(b) }
    }

    pub fn structure(&self) -> &CurvedStructure {
        &self.structure
    }

    pub fn bundle(&self) -> &Arc<GradedBundle> {
        self.structure.bundle()
    }

    pub fn chart(&self) -> &Chart {
        self.structure.bundle().chart()
    }

    pub fn dim(&self) -> usize {
        self.chart().dim()
    }
}

fn check_point(chart: &Chart, p: &[Q]) -> Result<()> {
    if p.len() != chart.dim() {
        return Err(Error::Dimension(format!("point has {} coordinates, chart has {}", p.len(), chart.dim())));
    }
    Ok(())
}

pub fn is_classical_point(dc: &DerivedChart, p: &[Q]) -> Result<bool> {
    check_point(dc.chart(), p)?;
    Ok(dc.structure.curvature().eval(p).iter().all(Zero::is_zero))
}

fn require_classical(dc: &DerivedChart, p: &[Q]) -> Result<()> {
    if !is_classical_point(dc, p)? {
        let shown: Vec<String> = p.iter().map(crate::poly::format_rational).collect();
        return Err(Error::NotClassical(format!("curvature does not vanish at ({})", shown.join(", "))));
    }
    Ok(())
}

/// Keeps the candidates at which the curvature vanishes.
pub fn classical_points(dc: &DerivedChart, candidates: &[Vec<Q>]) -> Result<Vec<Vec<Q>>> {
    let mut out = Vec::new();
    for p in candidates {
        if is_classical_point(dc, p)? {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// TM|P → L¹|P → L²|P → …, term `i` in degree `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentComplex {
    pub dims: Vec<usize>,
    #[serde(skip)]
    pub differentials: Vec<QMatrix>,
}

impl TangentComplex {
    pub fn euler_characteristic(&self) -> i64 {
        self.dims.iter().enumerate().map(|(i, &d)| if i % 2 == 0 { d as i64 } else { -(d as i64) }).sum()
    }
}

/// Rows: basis of degree `to`; columns: basis of degree `from`.
fn degree_block(m: &QMatrix, b_src: &GradedBundle, b_tgt: &GradedBundle, from: i32, to: i32) -> QMatrix {
    let cols = b_src.indices_of_degree(from);
    let rows = b_tgt.indices_of_degree(to);
    let mut out = QMatrix::zeros(rows.len(), cols.len());
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            out.set(r, c, m.get(i, j).clone());
        }
    }
    out
}

pub fn tangent_complex(dc: &DerivedChart, p: &[Q]) -> Result<TangentComplex> {
    require_classical(dc, p)?;
    let b = dc.bundle();
    let m = dc.dim();
    let top = b.max_degree().max(0) as usize;
    let mut dims = vec![m];
    dims.extend((1..=top).map(|d| b.rank_in_degree(d as i32)));

    let curv = dc.structure.curvature();
    let ones = b.indices_of_degree(1);
    let mut jac = QMatrix::zeros(ones.len(), m);
    for (r, &i) in ones.iter().enumerate() {
        for c in 0..m {
            jac.set(r, c, curv.0[i].derivative(c).eval(p));
        }
    }
    let mut differentials = Vec::new();
    if top >= 1 {
        differentials.push(jac);
    }
    let total = dc.structure.total();
    let lin = crate::linfty::op_matrix(total.op(1), b.rank(), b.rank(), b.nvars()).eval(p);
    for d in 1..top as i32 {
        differentials.push(degree_block(&lin, b, b, d, d + 1));
    }
    let tc = TangentComplex { dims, differentials };
    for (i, w) in tc.differentials.windows(2).enumerate() {
        if !w[1].mul(&w[0]).is_zero() {
            return Err(Error::Verification(format!("tangent differentials {i} and {} do not compose to zero", i + 1)));
        }
    }
    Ok(tc)
}

fn cohomology_of(dims: &[usize], diffs: &[QMatrix]) -> Vec<usize> {
    let ranks: Vec<usize> = diffs.iter().map(QMatrix::rank).collect();
    (0..dims.len())
        .map(|i| {
            let out_rank = ranks.get(i).copied().unwrap_or(0);
            let in_rank = if i == 0 { 0 } else { ranks.get(i - 1).copied().unwrap_or(0) };
            dims[i] - out_rank - in_rank
        })
        .collect()
}

/// dim Hⁱ = nullity(dᵢ) − rank(dᵢ₋₁).
pub fn complex_cohomology(tc: &TangentComplex) -> Vec<usize> {
    cohomology_of(&tc.dims, &tc.differentials)
}

/// The components Tf|P in each degree: the base Jacobian in degree 0, then φ₁|P.
pub fn tangent_map(m: &LooMorphism, src: &DerivedChart, tgt: &DerivedChart, p: &[Q]) -> Result<Vec<QMatrix>> {
    if m.source() != src.bundle() || m.target() != tgt.bundle() {
        return Err(Error::BundleMismatch("morphism endpoints differ from the given charts".into()));
    }
    check_point(src.chart(), p)?;
    let top = src.bundle().max_degree().max(tgt.bundle().max_degree()).max(0);
    let mut out = vec![m.base_jacobian().eval(p)];
    let lin = m.linear_part_at(p);
    for d in 1..=top {
        out.push(degree_block(&lin, m.source(), m.pulled(), d, d));
    }
    Ok(out)
}

fn padded(tc: &TangentComplex, top: usize) -> (Vec<usize>, Vec<QMatrix>) {
    let mut dims = tc.dims.clone();
    dims.resize(top + 1, 0);
    let mut diffs = tc.differentials.clone();
    while diffs.len() < top {
        let i = diffs.len();
        diffs.push(QMatrix::zeros(dims[i + 1], dims[i]));
    }
    (dims, diffs)
}

fn block2(a: &QMatrix, b: &QMatrix, c: &QMatrix, d: &QMatrix) -> QMatrix {
    // [[a, b], [c, d]]
    let (r1, r2) = (a.rows().max(b.rows()), c.rows().max(d.rows()));
    let (c1, c2) = (a.cols().max(c.cols()), b.cols().max(d.cols()));
    let mut out = QMatrix::zeros(r1 + r2, c1 + c2);
    let mut put = |m: &QMatrix, r0: usize, c0: usize| {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.set(r0 + i, c0 + j, m.get(i, j).clone());
            }
        }
    };
    put(a, 0, 0);
    put(b, 0, c1);
    put(c, r1, 0);
    put(d, r1, c1);
    out
}

/// Cohomology of the mapping cone of `f: A → B`, degrees −1, 0, 1, …
pub fn cone_cohomology(f: &[QMatrix], a: &TangentComplex, b: &TangentComplex) -> Result<Vec<usize>> {
    let top = (a.dims.len().max(b.dims.len()).max(f.len())).saturating_sub(1);
    let (ad, am) = padded(a, top);
    let (bd, bm) = padded(b, top);
    let fi = |i: usize| f.get(i).cloned().unwrap_or_else(|| QMatrix::zeros(bd[i], ad[i]));
    for i in 0..top {
        if fi(i + 1).mul(&am[i]) != bm[i].mul(&fi(i)) {
            return Err(Error::Verification(format!("tangent map is not a chain map in degree {i}")));
        }
    }
    // cone degree c (c = −1..=top) is A^{c+1} ⊕ B^c
    let cdim = |c: i64| -> usize {
        let a_part = if c < top as i64 { ad[(c + 1) as usize] } else { 0 };
        let b_part = if c >= 0 { bd[c as usize] } else { 0 };
        a_part + b_part
    };
    let mut dims = Vec::new();
    let mut diffs = Vec::new();
    for c in -1..=top as i64 {
        dims.push(cdim(c));
        if c == top as i64 {
            break;
        }
        // d(a, b) = (−d_A a, f a + d_B b) from A^{c+1} ⊕ B^c to A^{c+2} ⊕ B^{c+1}
        let a1 = (c + 1) as usize;
        let da = if a1 < top { am[a1].clone() } else { QMatrix::zeros(0, ad[a1]) };
        let neg_da = negate(&da);
        let f_part = fi(a1);
        let db = if c >= 0 { bm[c as usize].clone() } else { QMatrix::zeros(bd[0], 0) };
        let zero_tr = QMatrix::zeros(neg_da.rows(), db.cols());
        diffs.push(block2(&neg_da, &zero_tr, &f_part, &db));
    }
    Ok(cohomology_of(&dims, &diffs))
}

fn negate(m: &QMatrix) -> QMatrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.set(i, j, -m.get(i, j).clone());
        }
    }
    out
}

/// Tf|P is a quasi-isomorphism: its mapping cone is exact.
pub fn is_etale_at(m: &LooMorphism, src: &DerivedChart, tgt: &DerivedChart, p: &[Q]) -> Result<bool> {
    let ta = tangent_complex(src, p)?;
    let q = m.map_point(p);
    let tb = tangent_complex(tgt, &q)?;
    let f = tangent_map(m, src, tgt, p)?;
    Ok(cone_cohomology(&f, &ta, &tb)?.iter().all(|&d| d == 0))
}

/// Bijection between the supplied classical loci plus étale at every source point.
pub fn is_weak_equivalence(
    m: &LooMorphism,
    src: &DerivedChart,
    tgt: &DerivedChart,
    src_points: &[Vec<Q>],
    tgt_points: &[Vec<Q>],
) -> Result<bool> {
    for p in src_points {
        require_classical(src, p)?;
    }
    for p in tgt_points {
        require_classical(tgt, p)?;
    }
    let images: Vec<Vec<Q>> = src_points.iter().map(|p| m.map_point(p)).collect();
    let distinct: BTreeSet<&Vec<Q>> = images.iter().collect();
    let wanted: BTreeSet<&Vec<Q>> = tgt_points.iter().collect();
    if distinct.len() != images.len() || distinct != wanted {
        return Ok(false);
    }
    for p in src_points {
        if !is_etale_at(m, src, tgt, p)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Euler characteristic of the tangent complex: dim M + Σ (−1)ⁱ rk Lⁱ.
pub fn virtual_dimension(dc: &DerivedChart) -> i64 {
    let b = dc.bundle();
    let mut v = dc.dim() as i64;
    for i in 0..b.rank() {
        v += if b.degree(i) % 2 == 0 { 1 } else { -1 };
    }
    v
}

/// Re-indexes an operation along injective basis maps, substituting `images`
/// for the old coordinates.
pub(crate) fn transport_op(
    op: &MultiOp,
    src_map: &[usize],
    tgt_map: &[usize],
    images: &[Poly],
    source: &Arc<GradedBundle>,
    target: &Arc<GradedBundle>,
) -> Result<MultiOp> {
    let mut out = MultiOp::new(source.clone(), target.clone(), op.arity(), op.degree());
    for (key, v) in op.entries() {
        let k: Vec<usize> = key.iter().map(|&i| src_map[i]).collect();
        let mut w = target.zero_vec();
        for (j, p) in v.nonzero() {
            w.0[tgt_map[j]] = p.substitute_into(images, target.nvars());
        }
        out.add(&k, &w)?;
    }
    Ok(out)
}

pub(crate) fn transport_family(
    fam: &OpFamily,
    src_map: &[usize],
    tgt_map: &[usize],
    images: &[Poly],
    source: &Arc<GradedBundle>,
    target: &Arc<GradedBundle>,
    out: &mut OpFamily,
) -> Result<()> {
    for k in fam.arities() {
        let op = transport_op(fam.op(k).unwrap(), src_map, tgt_map, images, source, target)?;
        out.op_mut(k).add_op(&op)?;
    }
    Ok(())
}

fn tagged(name: &str, tag: &str, sep: &str) -> String {
    if tag.is_empty() {
        name.to_string()
    } else {
        format!("{name}{sep}{tag}")
    }
}

/// The product bundle A ⊕ B over the product chart. Coordinates get `tag`
/// appended, basis names get `_tag`; empty tags keep names.
pub fn product_bundle(a: &GradedBundle, b: &GradedBundle, tags: [&str; 2]) -> Result<Arc<GradedBundle>> {
    let coords: Vec<String> = a
        .chart()
        .coords()
        .iter()
        .map(|c| tagged(c, tags[0], ""))
        .chain(b.chart().coords().iter().map(|c| tagged(c, tags[1], "")))
        .collect();
    let chart = Chart::new(coords)?;
    let decl: Vec<(String, i32)> = a
        .basis()
        .iter()
        .map(|e| (tagged(&e.name, tags[0], "_"), e.degree))
        .chain(b.basis().iter().map(|e| (tagged(&e.name, tags[1], "_"), e.degree)))
        .collect();
    Ok(GradedBundle::new(chart, decl)?.shared())
}

/// Positions of the two factors inside a product bundle.
fn factor_maps(a: &GradedBundle, b: &GradedBundle, prod: &GradedBundle, tags: [&str; 2]) -> (Vec<usize>, Vec<usize>) {
    let fa = a.basis().iter().map(|e| prod.index_of(&tagged(&e.name, tags[0], "_")).unwrap()).collect();
    let fb = b.basis().iter().map(|e| prod.index_of(&tagged(&e.name, tags[1], "_")).unwrap()).collect();
    (fa, fb)
}

fn shifted_vars(n: usize, offset: usize, total: usize) -> Vec<Poly> {
    (0..n).map(|i| Poly::var(total, offset + i)).collect()
}

pub fn product(a: &DerivedChart, b: &DerivedChart, tags: [&str; 2]) -> Result<DerivedChart> {
    let prod = product_bundle(a.bundle(), b.bundle(), tags)?;
    let (fa, fb) = factor_maps(a.bundle(), b.bundle(), &prod, tags);
    let n = prod.nvars();
    let mut lam = OpFamily::new(prod.clone(), prod.clone(), 1);
    transport_family(&a.structure.total(), &fa, &fa, &shifted_vars(a.dim(), 0, n), &prod, &prod, &mut lam)?;
    transport_family(&b.structure.total(), &fb, &fb, &shifted_vars(b.dim(), a.dim(), n), &prod, &prod, &mut lam)?;
    DerivedChart::new(CurvedStructure::new(prod, lam)?)
}

/// f × g between product bundles built with the given tags.
pub fn product_morphism(f: &LooMorphism, g: &LooMorphism, src_tags: [&str; 2], tgt_tags: [&str; 2]) -> Result<LooMorphism> {
    let src = product_bundle(f.source(), g.source(), src_tags)?;
    let tgt = product_bundle(f.target(), g.target(), tgt_tags)?;
    let pulled = crate::linfty::pulled_target(&src, &tgt);
    let (sa, sb) = factor_maps(f.source(), g.source(), &src, src_tags);
    let (ta, tb) = factor_maps(f.target(), g.target(), &tgt, tgt_tags);
    let n = src.nvars();
    let (ia, ib) = (shifted_vars(f.source().nvars(), 0, n), shifted_vars(g.source().nvars(), f.source().nvars(), n));
    let mut phi = OpFamily::new(src.clone(), pulled.clone(), 0);
    transport_family(f.phi(), &sa, &ta, &ia, &src, &pulled, &mut phi)?;
    transport_family(g.phi(), &sb, &tb, &ib, &src, &pulled, &mut phi)?;
    let base: Vec<Poly> = f
        .base_map()
        .iter()
        .map(|p| p.substitute_into(&ia, n))
        .chain(g.base_map().iter().map(|p| p.substitute_into(&ib, n)))
        .collect();
    LooMorphism::new(src, tgt, base, phi)
}

/// The fibered product 𝓝 ×_𝓜 𝓜′ with its two projections.
#[derive(Clone, Debug)]
pub struct FiberedProduct {
    pub chart: DerivedChart,
    /// The pulled-back fibration 𝓝′ ↠ 𝓝 (linear projection onto E).
    pub projection: LooMorphism,
    /// 𝓝′ → 𝓜′.
    pub lift: LooMorphism,
}

fn fresh_name(base: String, taken: &BTreeSet<String>, suffix: &str) -> String {
    let mut name = base;
    while taken.contains(&name) {
        name.push_str(suffix);
    }
    name
}

fn unit_position(v: &[Q]) -> Option<usize> {
    let nz: Vec<usize> = (0..v.len()).filter(|&i| !v[i].is_zero()).collect();
    (nz.len() == 1 && v[nz[0]].is_one()).then(|| nz[0])
}

fn is_affine(p: &Poly) -> bool {
    p.terms().all(|(e, _)| e.iter().sum::<u32>() <= 1)
}

/// Pulls the linear fibration `fib: 𝓜′ → 𝓜` back along `g: 𝓝 → 𝓜`.
///
/// The base map of `fib` must be affine and surjective and φ₁ constant, so
/// N ×_M M′ is the chart N × ker(Tf) and E ×_L L′ = E ⊕ ker φ₁.
pub fn pullback_fibration(
    fib: &LooMorphism,
    fib_src: &DerivedChart,
    fib_tgt: &DerivedChart,
    g: &LooMorphism,
    g_src: &DerivedChart,
) -> Result<FiberedProduct> {
    if fib.source() != fib_src.bundle() || fib.target() != fib_tgt.bundle() {
        return Err(Error::BundleMismatch("fibration endpoints differ from the given charts".into()));
    }
    if g.source() != g_src.bundle() || g.target() != fib_tgt.bundle() {
        return Err(Error::BundleMismatch("the base-change morphism must land in the fibration's target".into()));
    }
    if !fib.is_linear() {
        return Err(Error::Unrealizable("the fibration must be linear".into()));
    }
    if !fib.base_map().iter().all(is_affine) {
        return Err(Error::Unrealizable("the fibration's base map must be affine".into()));
    }
    let jac = fib.base_jacobian().constant().expect("affine map has constant Jacobian");
    let lin = fib
        .linear_part()
        .constant()
        .ok_or_else(|| Error::Unrealizable("the fibration's linear part must be constant".into()))?;
    let (lp, l) = (fib.source().clone(), fib.target().clone());
    let dim_mp = lp.nvars();
    let zero_pt = vec![Q::zero(); dim_mp];
    let offset: Vec<Q> = fib.map_point(&zero_pt);
    let jac_right = jac.right_inverse().ok_or_else(|| Error::NotSurjective("the fibration's base map is not a submersion".into()))?;
    let base_kernel = jac.nullspace();

    // splitting s: L → L′ and kernel frame, degree by degree
    let mut split = QMatrix::zeros(lp.rank(), l.rank());
    let mut kernel: Vec<(Vec<Q>, i32)> = Vec::new();
    let degrees: BTreeSet<i32> = lp.degrees().into_iter().chain(l.degrees()).collect();
    for &d in &degrees {
        let (cols, rows) = (lp.indices_of_degree(d), l.indices_of_degree(d));
        let block = degree_block(&lin, &lp, &l, d, d);
        let s = if rows.is_empty() {
            QMatrix::zeros(cols.len(), 0)
        } else {
            block.right_inverse().ok_or_else(|| Error::NotSurjective(format!("φ₁ is not onto in degree {d}")))?
        };
        for (a, &i) in cols.iter().enumerate() {
            for (b, &j) in rows.iter().enumerate() {
                split.set(i, j, s.get(a, b).clone());
            }
        }
        for v in block.nullspace() {
            let mut full = vec![Q::zero(); lp.rank()];
            for (a, &i) in cols.iter().enumerate() {
                full[i] = v[a].clone();
            }
            kernel.push((full, d));
        }
    }

    // base chart N′ = N × ker(Tf)
    let n_chart = g_src.chart();
    let mut taken: BTreeSet<String> = n_chart.coords().iter().cloned().collect();
    let mut coords: Vec<String> = n_chart.coords().to_vec();
    for (i, v) in base_kernel.iter().enumerate() {
        let base = unit_position(v).map_or(format!("y{}", i + 1), |j| lp.chart().coords()[j].clone());
        let name = fresh_name(base, &taken, "_2");
        taken.insert(name.clone());
        coords.push(name);
    }
    let chart = Chart::new(coords)?;
    let np = chart.dim();
    let n_images = shifted_vars(n_chart.dim(), 0, np);
    let g_base: Vec<Poly> = g.base_map().iter().map(|p| p.substitute_into(&n_images, np)).collect();
    let mp_images: Vec<Poly> = (0..dim_mp)
        .map(|r| {
            let mut p = Poly::zero(np);
            for (c, gb) in g_base.iter().enumerate() {
                p.add_scaled(&(gb - &Poly::constant(np, offset[c].clone())), jac_right.get(r, c));
            }
            for (k, v) in base_kernel.iter().enumerate() {
                p.add_scaled(&Poly::var(np, n_chart.dim() + k), &v[r]);
            }
            p
        })
        .collect();

    // bundle E′ = E ⊕ K
    let e = g_src.bundle();
    let mut taken: BTreeSet<String> = e.basis().iter().map(|b| b.name.clone()).collect();
    let mut decl: Vec<(String, i32)> = e.basis().iter().map(|b| (b.name.clone(), b.degree)).collect();
    for (i, (v, d)) in kernel.iter().enumerate() {
        let base = unit_position(v).map_or(format!("k{}", i + 1), |j| lp.name(j).to_string());
        let name = fresh_name(base, &taken, "_k");
        taken.insert(name.clone());
        decl.push((name, *d));
    }
    let ep = GradedBundle::new(chart.clone(), decl.clone())?.shared();
    let e_pos: Vec<usize> = (0..e.rank()).map(|i| ep.index_of(&decl[i].0).unwrap()).collect();
    let k_pos: Vec<usize> = (0..kernel.len()).map(|i| ep.index_of(&decl[e.rank() + i].0).unwrap()).collect();
    let lp_here = Arc::new(lp.with_chart(chart.clone()));
    let e_here = Arc::new(e.with_chart(chart.clone()));

    // Ψ: E′ → L′ over N′, Ψ = s∘φ_g on E and the kernel frame on K
    let mut psi = OpFamily::new(ep.clone(), lp_here.clone(), 0);
    for k in g.phi().arities() {
        for (key, v) in g.phi().op(k).unwrap().entries() {
            let mut w = lp_here.zero_vec();
            for (j, p) in v.nonzero() {
                let p = p.substitute_into(&n_images, np);
                for i in 0..lp.rank() {
                    let c = split.get(i, j);
                    if !c.is_zero() {
                        w.0[i].add_scaled(&p, c);
                    }
                }
            }
            let nk: Vec<usize> = key.iter().map(|&i| e_pos[i]).collect();
            psi.op_mut(k).add(&nk, &w)?;
        }
    }
    for (i, (v, _)) in kernel.iter().enumerate() {
        psi.op_mut(1).set(&[k_pos[i]], FVec::from_constants(v, np))?;
    }

    // ρ: L′ → K with ρ s = 0 and ρ on the frame = id
    let frame = QMatrix::from_columns(lp.rank(), &kernel.iter().map(|(v, _)| v.clone()).collect::<Vec<_>>());
    let frame_left = if kernel.is_empty() { QMatrix::zeros(0, lp.rank()) } else { frame.left_inverse().expect("kernel frame is independent") };
    let mut comp = QMatrix::identity(lp.rank());
    let s_pi = split.mul(&lin);
    for i in 0..lp.rank() {
        for j in 0..lp.rank() {
            comp.set(i, j, comp.get(i, j) - s_pi.get(i, j));
        }
    }
    let rho = frame_left.mul(&comp);

    let lam_p = fib_src.structure.total().pullback(&mp_images, lp_here.clone(), lp_here.clone());
    let mu = g_src.structure.total().pullback(&n_images, e_here.clone(), e_here.clone());
    let degs = ep.degrees();
    let max_total = ep.max_degree() - 1;
    let bound = degree_arity_bound(&degs, max_total).ok_or_else(|| Error::ArityGuard("degree-0 summand in the fibered product".into()))?;
    let e_of: Vec<Option<usize>> = (0..ep.rank()).map(|i| e_pos.iter().position(|&p| p == i)).collect();
    let mut nu = OpFamily::new(ep.clone(), ep.clone(), 1);
    for n in 0..=bound {
        let keys = canonical_keys(&degs, n, max_total);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| ep.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| degs[i]).collect();
                let image = bullet_on(&lam_p, &psi, &xs, &kd);
                let mut out = ep.zero_vec();
                for (r, &pos) in k_pos.iter().enumerate() {
                    let mut acc = Poly::zero(np);
                    for (j, p) in image.nonzero() {
                        let c = rho.get(r, j);
                        if !c.is_zero() {
                            acc.add_scaled(p, c);
                        }
                    }
                    out.0[pos] = acc;
                }
                let e_key: Option<Vec<usize>> = key.iter().map(|&i| e_of[i]).collect();
                if let Some(ek) = e_key {
                    let v = mu.eval_basis(&ek);
                    for (j, p) in v.nonzero() {
                        out.0[e_pos[j]] = p.clone();
                    }
                }
                (key, out)
            })
            .collect();
        for (k, v) in values {
            nu.op_mut(n).insert_canonical(k, v);
        }
    }
    let chart_out = DerivedChart::new(CurvedStructure::new(ep.clone(), nu)?)?;

    let mut proj = MultiOp::new(ep.clone(), e_here.clone(), 1, 0);
    for (i, &p) in e_pos.iter().enumerate() {
        proj.set(&[p], e_here.unit(i))?;
    }
    let projection = LooMorphism::linear(ep.clone(), e.clone(), n_images.clone(), proj)?;
    let lift = LooMorphism::new(ep, lp, mp_images, psi)?;
    for (m, tgt, what) in [(&projection, g_src, "projection to 𝓝"), (&lift, fib_src, "projection to 𝓜′")] {
        let r = check_morphism(m, chart_out.structure(), tgt.structure())?;
        if let Some(f) = r.failures.first() {
            return Err(Error::Verification(format!("{what} fails the morphism identity at {f}")));
        }
    }
    let expected = virtual_dimension(g_src) + virtual_dimension(fib_src) - virtual_dimension(fib_tgt);
    if virtual_dimension(&chart_out) != expected {
        return Err(Error::Verification("virtual dimension is not additive".into()));
    }
    Ok(FiberedProduct { chart: chart_out, projection, lift })
}

/// The diagonal 𝓜 → 𝓜 × 𝓜 into the product built with `tags`.
pub fn diagonal(dc: &DerivedChart, tags: [&str; 2]) -> Result<LooMorphism> {
    let b = dc.bundle();
    let prod = product_bundle(b, b, tags)?;
    let pulled = crate::linfty::pulled_target(b, &prod);
    let (fa, fb) = factor_maps(b, b, &prod, tags);
    let mut op = MultiOp::new(b.clone(), pulled.clone(), 1, 0);
    for i in 0..b.rank() {
        let mut v = pulled.zero_vec();
        v.0[fa[i]] = Poly::one(b.nvars());
        v.0[fb[i]] = Poly::one(b.nvars());
        op.set(&[i], v)?;
    }
    let id = identity_map(b.nvars());
    let base: Vec<Poly> = id.iter().chain(id.iter()).cloned().collect();
    LooMorphism::linear(b.clone(), prod, base, op)
}

#[cfg(test)]
mod tests;
