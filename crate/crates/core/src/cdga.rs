//! The algebra model: Sym L^∨ with the degree +1 derivation dual to λ, and
//! algebra maps dual to morphisms.
//!
//! Generators ξᵢ are dual to the basis eᵢ of L and have degree −|eᵢ|.
//! Pairing convention: the coefficient of the sorted monomial ξ_K in Q(ξᵢ) is
//! λ(e_K)ᵢ / ∏ m!, where m runs over the multiplicities in K. Since ξᵢ and eᵢ
//! have the same parity, e_K ↦ ξ_K respects the Koszul signs of reordering
//! and no extra pairing sign enters; inserting (−1)^{Σ_{a<b}|e_a||e_b|}
//! breaks both Q² = 0 ⇔ λ∘λ = 0 and the morphism duality.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graded::{canonical_key, GradedBundle};
use crate::linfty::{CurvedStructure, LooMorphism};
use crate::multiop::OpFamily;
use crate::poly::{Poly, Q};

/// A polynomial-coefficient element of Sym L^∨, keyed by sorted monomials
/// (odd generators appear at most once).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymElement {
    nvars: usize,
    terms: BTreeMap<Vec<usize>, Poly>,
}

impl SymElement {
    pub fn zero(nvars: usize) -> Self {
        SymElement { nvars, terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Poly)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, monomial: &[usize]) -> Option<&Poly> {
        self.terms.get(monomial)
    }

    /// Adds c·(ξ_{m₁}⋯ξ_{mₙ}) for an unsorted word, normal-ordering it.
    fn add_word(&mut self, word: &[usize], c: &Poly, degs: &[i32]) {
        if c.is_zero() {
            return;
        }
        let Some((key, sign)) = canonical_key(word, degs) else { return };
        let entry = self.terms.entry(key.clone()).or_insert_with(|| Poly::zero(self.nvars));
        if sign < 0 {
            entry.add_assign(&-c);
        } else {
            entry.add_assign(c);
        }
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    fn add_assign(&mut self, other: &SymElement, degs: &[i32]) {
        for (k, c) in &other.terms {
            self.add_word(k, c, degs);
        }
    }

    /// Product in the graded-commutative algebra.
    fn mul(&self, other: &SymElement, degs: &[i32]) -> SymElement {
        let mut out = SymElement::zero(self.nvars);
        for (a, p) in &self.terms {
            for (b, r) in &other.terms {
                let word: Vec<usize> = a.iter().chain(b).copied().collect();
                out.add_word(&word, &(p * r), degs);
            }
        }
        out
    }

    fn one(nvars: usize) -> SymElement {
        let mut out = SymElement::zero(nvars);
        out.terms.insert(vec![], Poly::one(nvars));
        out
    }

    fn map_coefficients(&self, nvars: usize, f: impl Fn(&Poly) -> Poly) -> SymElement {
        let terms = self
            .terms
            .iter()
            .filter_map(|(k, p)| {
                let q = f(p);
                (!q.is_zero()).then(|| (k.clone(), q))
            })
            .collect();
        SymElement { nvars, terms }
    }

    /// Human-readable form with generator names `<name>^`.
    pub fn show(&self, b: &GradedBundle) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, p)| {
                let word: Vec<String> = k.iter().map(|&i| format!("{}^", b.name(i))).collect();
                let coef = b.chart().show(p);
                match (word.is_empty(), coef.as_str()) {
                    (true, _) => coef,
                    (false, "1") => word.join("·"),
                    (false, "-1") => format!("-{}", word.join("·")),
                    _ => format!("({coef})·{}", word.join("·")),
                }
            })
            .collect();
        let mut out = parts[0].clone();
        for part in &parts[1..] {
            match part.strip_prefix('-') {
                Some(rest) => out.push_str(&format!(" - {rest}")),
                None => out.push_str(&format!(" + {part}")),
            }
        }
        out
    }
}

fn weight(key: &[usize]) -> Q {
    let mut denom = Q::one();
    let mut run = 1;
    for w in 0..key.len() {
        if w + 1 < key.len() && key[w + 1] == key[w] {
            run += 1;
            denom *= Q::from_integer(run.into());
        } else {
            run = 1;
        }
    }
    Q::one() / denom
}

/// A degree +1 derivation of Sym L^∨ vanishing on functions, given by its
/// values on generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdgaDerivation {
    bundle: Arc<GradedBundle>,
    images: Vec<SymElement>,
}

impl CdgaDerivation {
    pub fn new(bundle: Arc<GradedBundle>, images: Vec<SymElement>) -> Result<Self> {
        if images.len() != bundle.rank() {
            return Err(Error::Dimension(format!("{} generator images for rank {}", images.len(), bundle.rank())));
        }
        let degs = bundle.degrees();
        for (i, img) in images.iter().enumerate() {
            for (k, p) in img.terms() {
                let total: i32 = k.iter().map(|&j| degs[j]).sum();
                if total + 1 != degs[i] {
                    return Err(Error::Degree(format!(
                        "Q({}^) has a monomial of degree {}, expected {}",
                        bundle.name(i),
                        -total,
                        1 - degs[i]
                    )));
                }
                if p.nvars() != bundle.nvars() {
                    return Err(Error::Dimension("coefficient ring mismatch".into()));
                }
            }
        }
        Ok(CdgaDerivation { bundle, images })
    }

    pub fn bundle(&self) -> &Arc<GradedBundle> {
        &self.bundle
    }

    pub fn image(&self, i: usize) -> &SymElement {
        &self.images[i]
    }

    /// Q on an arbitrary element, by the graded Leibniz rule.
    pub fn apply(&self, x: &SymElement) -> SymElement {
        let degs = self.bundle.degrees();
        let mut out = SymElement::zero(self.bundle.nvars());
        for (k, p) in x.terms() {
            let mut sign_exp = 0;
            for j in 0..k.len() {
                let head: SymElement = monomial(&k[..j], self.bundle.nvars());
                let tail: SymElement = monomial(&k[j + 1..], self.bundle.nvars());
                let mid = head.mul(&self.images[k[j]], &degs).mul(&tail, &degs);
                let c = if sign_exp % 2 == 0 { p.clone() } else { -p };
                out.add_assign(&mid.map_coefficients(self.bundle.nvars(), |q| &c * q), &degs);
                sign_exp += degs[k[j]];
            }
        }
        out
    }

    /// Q² on each generator.
    pub fn square_on_generators(&self) -> Vec<SymElement> {
        self.images.iter().map(|x| self.apply(x)).collect()
    }

    pub fn squares_to_zero(&self) -> bool {
        self.square_on_generators().iter().all(SymElement::is_zero)
    }
}

fn monomial(word: &[usize], nvars: usize) -> SymElement {
    let mut out = SymElement::zero(nvars);
    out.terms.insert(word.to_vec(), Poly::one(nvars));
    out
}

fn dualize(fam: &OpFamily, nvars: usize) -> Vec<SymElement> {
    let mut images = vec![SymElement::zero(nvars); fam.target().rank()];
    for k in fam.arities() {
        for (key, v) in fam.op(k).unwrap().entries() {
            let w = weight(key);
            for (i, p) in v.nonzero() {
                images[i].terms.insert(key.clone(), p.scale(&w));
            }
        }
    }
    images
}

/// Q_λ with the structure's δ folded into the arity-one part.
pub fn to_derivation(s: &CurvedStructure) -> CdgaDerivation {
    let b = s.bundle().clone();
    let images = dualize(&s.total(), b.nvars());
    CdgaDerivation { bundle: b, images }
}

/// The operations whose dual is `q`; inverse of `to_derivation` on total λ.
pub fn from_derivation(q: &CdgaDerivation) -> Result<CurvedStructure> {
    let b = q.bundle.clone();
    let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
    for (i, img) in q.images.iter().enumerate() {
        for (key, p) in img.terms() {
            let mut v = b.zero_vec();
            v.0[i] = p.scale(&(Q::one() / weight(key)));
            lam.op_mut(key.len()).add(key, &v)?;
        }
    }
    CurvedStructure::new(b, lam)
}

/// Φ on generators of f*Sym E^∨, as elements of Sym L^∨.
pub fn algebra_map(m: &LooMorphism) -> Vec<SymElement> {
    dualize(m.phi(), m.source().nvars())
}

/// Where Q_λΦ and Φ f*Q_μ differ on a generator of E^∨.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DualityFailure {
    pub generator: String,
    pub residual: String,
}

/// Compares Q_λ∘Φ with Φ∘f*Q_μ on every generator of E^∨.
pub fn check_morphism_dual(m: &LooMorphism, src: &CurvedStructure, tgt: &CurvedStructure) -> Result<Vec<DualityFailure>> {
    if m.source() != src.bundle() || m.target() != tgt.bundle() {
        return Err(Error::BundleMismatch("morphism endpoints differ from the given structures".into()));
    }
    let l = src.bundle();
    let degs = l.degrees();
    let n = l.nvars();
    let q_src = to_derivation(src);
    let q_tgt = to_derivation(tgt);
    let phi = algebra_map(m);
    let mut failures = Vec::new();
    for j in 0..tgt.bundle().rank() {
        let left = q_src.apply(&phi[j]);
        let mut right = SymElement::zero(n);
        for (key, c) in q_tgt.image(j).terms() {
            let mut prod = SymElement::one(n);
            for &k in key {
                prod = prod.mul(&phi[k], &degs);
            }
            let c = c.substitute_into(m.base_map(), n);
            right.add_assign(&prod.map_coefficients(n, |p| &c * p), &degs);
        }
        let mut diff = left;
        diff.add_assign(&right.map_coefficients(n, |p| -p), &degs);
        if !diff.is_zero() {
            failures.push(DualityFailure { generator: format!("{}^", tgt.bundle().name(j)), residual: diff.show(l) });
        }
    }
    Ok(failures)
}

#[cfg(test)]
mod tests;
