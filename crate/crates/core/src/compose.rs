//! The compositions ∘ and • of graded-symmetric operation families.
//!
//! Two evaluators exist for each. The `*_verbatim` ones sum over all of S_n
//! with the fractional weights 1/(k!(n−k)!) and 1/(k! n₁!…n_k!). The default
//! ones sum once over unshuffles and unordered set partitions, which is the
//! same quantity when every operation is graded-symmetric; the tests check
//! both agree on every bundle they touch.

use rayon::prelude::*;

use std::sync::Arc;

use num::One;

use crate::error::{Error, Result};
use crate::graded::{canonical_keys, sign_of_order, FVec, GradedBundle};
use crate::multiop::{MultiMap, OpFamily};
use crate::poly::Q;

fn factorial(n: usize) -> Q {
    (1..=n).fold(Q::one(), |acc, k| acc * Q::from_integer((k as i64).into()))
}

fn signed(v: &mut FVec, add: &FVec, sign: i32) {
    v.add_scaled(add, &Q::from_integer(sign.into()));
}

fn subset(xs: &[FVec], mask: usize) -> Vec<FVec> {
    (0..xs.len()).filter(|i| mask >> i & 1 == 1).map(|i| xs[i].clone()).collect()
}

/// (λ∘μ)_n(x₁…x_n) = Σ_S ε λ_{n+1−|S|}(μ_{|S|}(x_S), x_{S^c}), S ranging over subsets.
pub fn circ_on(lam: &dyn MultiMap, mu: &dyn MultiMap, xs: &[FVec], degs: &[i32]) -> FVec {
    let n = xs.len();
    let mut out = lam.zero_output();
    for mask in 0..(1usize << n) {
        let k = mask.count_ones() as usize;
        if k > mu.max_arity() || n + 1 - k > lam.max_arity() {
            continue;
        }
        let Some(inner) = mu.apply(k, &subset(xs, mask)) else { continue };
        if inner.is_zero() {
            continue;
        }
        let order: Vec<usize> =
            (0..n).filter(|i| mask >> i & 1 == 1).chain((0..n).filter(|i| mask >> i & 1 == 0)).collect();
        let mut args = vec![inner];
        args.extend(subset(xs, !mask & ((1 << n) - 1)));
        if let Some(v) = lam.apply(n + 1 - k, &args) {
            signed(&mut out, &v, sign_of_order(&order, degs));
        }
    }
    out
}

/// The ∘ sum taken literally over all permutations with fractional weights.
pub fn circ_on_verbatim(lam: &dyn MultiMap, mu: &dyn MultiMap, xs: &[FVec], degs: &[i32]) -> FVec {
    let n = xs.len();
    let mut out = lam.zero_output();
    for sigma in permutations(n) {
        let sign = sign_of_order(&sigma, degs);
        let permuted: Vec<FVec> = sigma.iter().map(|&i| xs[i].clone()).collect();
        for k in 0..=n {
            let Some(inner) = mu.apply(k, &permuted[..k]) else { continue };
            let mut args = vec![inner];
            args.extend_from_slice(&permuted[k..]);
            if let Some(v) = lam.apply(n + 1 - k, &args) {
                let w = Q::from_integer(sign.into()) / (factorial(k) * factorial(n - k));
                out.add_scaled(&v, &w);
            }
        }
    }
    out
}

/// (λ•φ)_n(x₁…x_n) = Σ over unordered set partitions {B₁…B_k} of
/// ε λ_k(φ_{|B₁|}(x_{B₁}), …, φ_{|B_k|}(x_{B_k})).
pub fn bullet_on(lam: &dyn MultiMap, phi: &dyn MultiMap, xs: &[FVec], degs: &[i32]) -> FVec {
    let n = xs.len();
    if n == 0 {
        return lam.apply(0, &[]).unwrap_or_else(|| lam.zero_output());
    }
    let mut blocks_val: Vec<Option<FVec>> = vec![None; 1 << n];
    for (mask, slot) in blocks_val.iter_mut().enumerate().skip(1) {
        let k = mask.count_ones() as usize;
        if k <= phi.max_arity() {
            *slot = phi.apply(k, &subset(xs, mask)).filter(|v| !v.is_zero());
        }
    }
    let mut out = lam.zero_output();
    for_each_partition(n, &mut |blocks: &[usize]| {
        if blocks.len() > lam.max_arity() {
            return;
        }
        let mut args = Vec::with_capacity(blocks.len());
        for &b in blocks {
            match &blocks_val[b] {
                Some(v) => args.push(v.clone()),
                None => return,
            }
        }
        let order: Vec<usize> = blocks.iter().flat_map(|&b| (0..n).filter(move |i| b >> i & 1 == 1)).collect();
        if let Some(v) = lam.apply(blocks.len(), &args) {
            signed(&mut out, &v, sign_of_order(&order, degs));
        }
    });
    out
}

/// The • sum taken literally over permutations and ordered compositions.
pub fn bullet_on_verbatim(lam: &dyn MultiMap, phi: &dyn MultiMap, xs: &[FVec], degs: &[i32]) -> FVec {
    let n = xs.len();
    if n == 0 {
        return lam.apply(0, &[]).unwrap_or_else(|| lam.zero_output());
    }
    let mut out = lam.zero_output();
    let comps = compositions(n);
    for sigma in permutations(n) {
        let sign = sign_of_order(&sigma, degs);
        let permuted: Vec<FVec> = sigma.iter().map(|&i| xs[i].clone()).collect();
        'comp: for parts in &comps {
            let mut args = Vec::with_capacity(parts.len());
            let mut start = 0;
            let mut weight = factorial(parts.len());
            for &p in parts {
                match phi.apply(p, &permuted[start..start + p]) {
                    Some(v) => args.push(v),
                    None => continue 'comp,
                }
                weight *= factorial(p);
                start += p;
            }
            if let Some(v) = lam.apply(parts.len(), &args) {
                out.add_scaled(&v, &(Q::from_integer(sign.into()) / weight));
            }
        }
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn compositions(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=n {
        for mut rest in compositions(n - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Calls `f` once per set partition of {0..n}, blocks as bitmasks ordered by
/// their smallest element.
pub fn for_each_partition(n: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(i: usize, n: usize, blocks: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i == n {
            f(blocks);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << i;
            rec(i + 1, n, blocks, f);
            blocks[b] &= !(1 << i);
        }
        blocks.push(1 << i);
        rec(i + 1, n, blocks, f);
        blocks.pop();
    }
    rec(0, n, &mut Vec::new(), f);
}

/// Tabulates an evaluator on every canonical key up to `max_arity`, skipping
/// keys whose output degree exceeds the target.
pub(crate) fn tabulate(
    source: &Arc<GradedBundle>,
    target: &Arc<GradedBundle>,
    degree: i32,
    max_arity: usize,
    eval: &(dyn Fn(&[FVec], &[i32]) -> FVec + Sync),
) -> OpFamily {
    let mut out = OpFamily::new(source.clone(), target.clone(), degree);
    let degs = source.degrees();
    let max_total = target.max_degree() - degree;
    for n in 0..=max_arity {
        let keys = canonical_keys(&degs, n, max_total);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| source.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| degs[i]).collect();
                let v = eval(&xs, &kd);
                (key, v)
            })
            .collect();
        let op = out.op_mut(n);
        for (k, v) in values {
            op.insert_canonical(k, v);
        }
    }
    out
}

fn check_circ(lam: &OpFamily, mu: &OpFamily) -> Result<()> {
    if mu.source() != mu.target() || lam.source() != mu.source() {
        return Err(Error::BundleMismatch("∘ needs λ: E→F and μ: E→E".into()));
    }
    Ok(())
}

fn check_bullet(lam: &OpFamily, phi: &OpFamily) -> Result<()> {
    if lam.source() != phi.target() {
        return Err(Error::BundleMismatch("• needs λ: E→G and φ: F→E".into()));
    }
    if phi.degree() != 0 {
        return Err(Error::Degree("the right factor of • must have degree 0".into()));
    }
    if phi.op(0).is_some() {
        return Err(Error::Degree("the right factor of • must have no arity-0 component".into()));
    }
    Ok(())
}

fn circ_bound(lam: &OpFamily, mu: &OpFamily) -> Option<usize> {
    if lam.is_zero() || mu.is_zero() {
        return None;
    }
    Some((lam.max_arity() + mu.max_arity()).saturating_sub(1))
}

pub fn compose_circ(lam: &OpFamily, mu: &OpFamily) -> Result<OpFamily> {
    check_circ(lam, mu)?;
    let degree = lam.degree() + mu.degree();
    match circ_bound(lam, mu) {
        None => Ok(OpFamily::new(lam.source().clone(), lam.target().clone(), degree)),
        Some(b) => Ok(tabulate(lam.source(), lam.target(), degree, b, &|xs, d| circ_on(lam, mu, xs, d))),
    }
}

pub fn compose_circ_verbatim(lam: &OpFamily, mu: &OpFamily) -> Result<OpFamily> {
    check_circ(lam, mu)?;
    let degree = lam.degree() + mu.degree();
    match circ_bound(lam, mu) {
        None => Ok(OpFamily::new(lam.source().clone(), lam.target().clone(), degree)),
        Some(b) => Ok(tabulate(lam.source(), lam.target(), degree, b, &|xs, d| circ_on_verbatim(lam, mu, xs, d))),
    }
}

fn bullet_bound(lam: &OpFamily, phi: &OpFamily) -> usize {
    lam.max_arity() * phi.max_arity().max(1)
}

pub fn compose_bullet(lam: &OpFamily, phi: &OpFamily) -> Result<OpFamily> {
    check_bullet(lam, phi)?;
    let b = bullet_bound(lam, phi);
    Ok(tabulate(phi.source(), lam.target(), lam.degree(), b, &|xs, d| bullet_on(lam, phi, xs, d)))
}

pub fn compose_bullet_verbatim(lam: &OpFamily, phi: &OpFamily) -> Result<OpFamily> {
    check_bullet(lam, phi)?;
    let b = bullet_bound(lam, phi);
    Ok(tabulate(phi.source(), lam.target(), lam.degree(), b, &|xs, d| bullet_on_verbatim(lam, phi, xs, d)))
}

/// One summand λ_{outer}(λ_{|inner|}(x_inner), x_rest) of (λ∘λ)_n, with the
/// Koszul sign kept symbolic: `swaps` lists the argument pairs (i, j), i < j,
/// whose order is reversed, each contributing (−1)^{|x_i||x_j|}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomTerm {
    pub inner: Vec<usize>,
    pub rest: Vec<usize>,
    pub swaps: Vec<(usize, usize)>,
}

const SYMBOLS: [&str; 6] = ["x", "y", "z", "u", "v", "w"];

impl AxiomTerm {
    pub fn outer_arity(&self) -> usize {
        self.rest.len() + 1
    }

    /// The sign the symbolic factor takes for concrete argument degrees.
    pub fn sign(&self, degs: &[i32]) -> i32 {
        let odd = self.swaps.iter().filter(|&&(i, j)| degs[i] * degs[j] % 2 != 0).count();
        if odd % 2 == 0 { 1 } else { -1 }
    }

    pub fn evaluate(&self, lam: &dyn MultiMap, xs: &[FVec], degs: &[i32]) -> FVec {
        let mut out = lam.zero_output();
        let pick = |ix: &[usize]| ix.iter().map(|&i| xs[i].clone()).collect::<Vec<_>>();
        let Some(inner) = lam.apply(self.inner.len(), &pick(&self.inner)) else { return out };
        let mut args = vec![inner];
        args.extend(pick(&self.rest));
        if let Some(v) = lam.apply(self.outer_arity(), &args) {
            signed(&mut out, &v, self.sign(degs));
        }
        out
    }

    /// Written as in hand expansions: `λ_1²x` for the iterated unary term.
    pub fn render(&self) -> String {
        let sym = |ix: &[usize]| ix.iter().map(|&i| SYMBOLS[i]).collect::<Vec<_>>().join(",");
        let sign = if self.swaps.is_empty() {
            String::new()
        } else {
            let exps: Vec<String> =
                self.swaps.iter().map(|&(i, j)| format!("|{}||{}|", SYMBOLS[i], SYMBOLS[j])).collect();
            format!("(-1)^{{{}}}", exps.join("+"))
        };
        let body = match (self.inner.len(), self.rest.len()) {
            (1, 0) => format!("λ_1²{}", sym(&self.inner)),
            (0, 0) => "λ_1(λ_0)".to_string(),
            (0, _) => format!("λ_{}(λ_0,{})", self.outer_arity(), sym(&self.rest)),
            (k, 0) => format!("λ_1(λ_{k}({}))", sym(&self.inner)),
            (k, _) => format!("λ_{}(λ_{k}({}),{})", self.outer_arity(), sym(&self.inner), sym(&self.rest)),
        };
        sign + &body
    }
}

/// The summands of (λ∘λ)_n on arguments x₀…x_{n−1}, ordered by inner arity
/// and then lexicographically by the inner arguments.
pub fn axiom_terms(n: usize) -> Vec<AxiomTerm> {
    assert!(n <= SYMBOLS.len(), "at most {} symbolic arguments", SYMBOLS.len());
    let mut out = Vec::new();
    for k in 0..=n {
        let mut subsets: Vec<Vec<usize>> =
            (0..1usize << n).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect();
        subsets.sort();
        for inner in subsets {
            let rest: Vec<usize> = (0..n).filter(|i| !inner.contains(i)).collect();
            let swaps = rest.iter().flat_map(|&i| inner.iter().filter(move |&&j| j > i).map(move |&j| (i, j))).collect();
            out.push(AxiomTerm { inner, rest, swaps });
        }
    }
    out
}

/// The n-th structure equation as a single line, e.g. `λ_2(λ_0,x)+λ_1²x=0`.
pub fn render_axiom(n: usize) -> String {
    let terms: Vec<String> = axiom_terms(n).iter().map(AxiomTerm::render).collect();
    terms.join("+") + "=0"
}
