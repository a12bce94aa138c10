//! Charts, graded bundles, fiber vectors and the Koszul sign rule.

use std::collections::HashSet;
use std::sync::Arc;

use num::One;

use crate::error::{Error, Result};
use crate::poly::{Poly, Q};

/// An affine coordinate chart; the coordinate names double as the variables
/// of the coefficient ring.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chart {
    coords: Vec<String>,
}

impl Chart {
    pub fn new<S: Into<String>>(coords: impl IntoIterator<Item = S>) -> Result<Self> {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for c in &coords {
            if !is_identifier(c) {
                return Err(Error::Parse(format!("coordinate name '{c}' is not an identifier")));
            }
            if !seen.insert(c) {
                return Err(Error::Parse(format!("duplicate coordinate '{c}'")));
            }
        }
        Ok(Chart { coords })
    }

    pub fn point() -> Self {
        Chart { coords: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn var(&self, i: usize) -> Poly {
        Poly::var(self.dim(), i)
    }

    pub fn parse(&self, s: &str) -> Result<Poly> {
        Poly::parse(s, &self.coords)
    }

    pub fn show(&self, p: &Poly) -> String {
        p.to_string_with(&self.coords)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisElem {
    pub name: String,
    pub degree: i32,
}

/// A trivial graded vector bundle over a chart. The basis is stored in
/// canonical order: by degree, then by declaration index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GradedBundle {
    chart: Chart,
    basis: Vec<BasisElem>,
}

impl GradedBundle {
    pub fn new(chart: Chart, decl: Vec<(String, i32)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (n, d) in &decl {
            if n.is_empty() {
                return Err(Error::Parse("empty basis name".into()));
            }
            if *d < 0 {
                return Err(Error::Degree(format!("basis element '{n}' has negative degree {d}")));
            }
            if !seen.insert(n.clone()) {
                return Err(Error::Parse(format!("duplicate basis name '{n}'")));
            }
        }
        let mut basis: Vec<BasisElem> = decl.into_iter().map(|(name, degree)| BasisElem { name, degree }).collect();
        basis.sort_by_key(|b| b.degree);
        Ok(GradedBundle { chart, basis })
    }

    pub fn shared(self) -> Arc<GradedBundle> {
        Arc::new(self)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn nvars(&self) -> usize {
        self.chart.dim()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[BasisElem] {
        &self.basis
    }

    pub fn degree(&self, i: usize) -> i32 {
        self.basis[i].degree
    }

    pub fn name(&self, i: usize) -> &str {
        &self.basis[i].name
    }

    pub fn names(&self) -> Vec<&str> {
        self.basis.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.basis.iter().position(|b| b.name == name)
    }

    pub fn degrees(&self) -> Vec<i32> {
        self.basis.iter().map(|b| b.degree).collect()
    }

    pub fn max_degree(&self) -> i32 {
        self.basis.iter().map(|b| b.degree).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> i32 {
        self.basis.iter().map(|b| b.degree).min().unwrap_or(0)
    }

    pub fn indices_of_degree(&self, d: i32) -> Vec<usize> {
        (0..self.rank()).filter(|&i| self.degree(i) == d).collect()
    }

    pub fn rank_in_degree(&self, d: i32) -> usize {
        self.basis.iter().filter(|b| b.degree == d).count()
    }

    /// Same basis over another chart (pullback of a trivial bundle).
    pub fn with_chart(&self, chart: Chart) -> GradedBundle {
        GradedBundle { chart, basis: self.basis.clone() }
    }

    pub fn zero_vec(&self) -> FVec {
        FVec::zero(self.rank(), self.nvars())
    }

    pub fn unit(&self, i: usize) -> FVec {
        FVec::unit(self.rank(), self.nvars(), i)
    }

    /// Degree of a nonzero homogeneous vector; `None` for zero, error if mixed.
    pub fn vec_degree(&self, v: &FVec) -> Result<Option<i32>> {
        let mut d = None;
        for (i, c) in v.0.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            match d {
                None => d = Some(self.degree(i)),
                Some(e) if e != self.degree(i) => {
                    return Err(Error::Degree(format!("vector mixes degrees {e} and {}", self.degree(i))))
                }
                _ => {}
            }
        }
        Ok(d)
    }

    pub fn show_vec(&self, v: &FVec) -> String {
        let mut out = String::new();
        for (i, c) in v.nonzero() {
            let (neg, body) = match c.as_constant() {
                Some(k) => {
                    let mag = num::Signed::abs(&k);
                    let name = self.name(i);
                    let body =
                        if mag.is_one() { name.to_string() } else { format!("{}*{name}", crate::poly::format_rational(&mag)) };
                    (num::Signed::is_negative(&k), body)
                }
                None => (false, format!("({})*{}", self.chart.show(c), self.name(i))),
            };
            match (out.is_empty(), neg) {
                (true, true) => out.push('-'),
                (true, false) => {}
                (false, true) => out.push_str(" - "),
                (false, false) => out.push_str(" + "),
            }
            out.push_str(&body);
        }
        if out.is_empty() {
            "0".into()
        } else {
            out
        }
    }
}

/// A fiber vector: one polynomial coefficient per basis element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FVec(pub Vec<Poly>);

impl FVec {
    pub fn zero(rank: usize, nvars: usize) -> Self {
        FVec(vec![Poly::zero(nvars); rank])
    }

    pub fn unit(rank: usize, nvars: usize, i: usize) -> Self {
        let mut v = FVec::zero(rank, nvars);
        v.0[i] = Poly::one(nvars);
        v
    }

    pub fn from_constants(values: &[Q], nvars: usize) -> Self {
        FVec(values.iter().map(|c| Poly::constant(nvars, c.clone())).collect())
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Poly::is_zero)
    }

    pub fn add_assign(&mut self, other: &FVec) {
        assert_eq!(self.rank(), other.rank(), "vector rank mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn add_scaled(&mut self, other: &FVec, c: &Q) {
        assert_eq!(self.rank(), other.rank(), "vector rank mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_scaled(b, c);
        }
    }

    /// `self += p * other` for a polynomial scalar `p`.
    pub fn add_poly_scaled(&mut self, other: &FVec, p: &Poly) {
        assert_eq!(self.rank(), other.rank(), "vector rank mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if !b.is_zero() {
                a.add_assign(&(b * p));
            }
        }
    }

    pub fn scale(&self, c: &Q) -> FVec {
        FVec(self.0.iter().map(|p| p.scale(c)).collect())
    }

    pub fn neg(&self) -> FVec {
        self.scale(&-Q::one())
    }

    pub fn sub(&self, other: &FVec) -> FVec {
        let mut out = self.clone();
        out.add_scaled(other, &-Q::one());
        out
    }

    pub fn map(&self, f: impl Fn(&Poly) -> Poly) -> FVec {
        FVec(self.0.iter().map(f).collect())
    }

    pub fn substitute(&self, images: &[Poly]) -> FVec {
        self.map(|p| p.substitute(images))
    }

    pub fn eval(&self, point: &[Q]) -> Vec<Q> {
        self.0.iter().map(|p| p.eval(point)).collect()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (usize, &Poly)> {
        self.0.iter().enumerate().filter(|(_, p)| !p.is_zero())
    }
}

/// Koszul sign of listing graded symbols in the order `perm` (position `i`
/// holds original symbol `perm[i]`): −1 per transposed pair of odd symbols.
pub fn koszul_sign(perm: &[usize], degs: &[i32]) -> Result<i32> {
    if perm.len() != degs.len() {
        return Err(Error::Dimension(format!(
            "permutation of length {} with {} degrees",
            perm.len(),
            degs.len()
        )));
    }
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Dimension("not a permutation".into()));
        }
    }
    Ok(sign_of_order(perm, degs))
}

pub(crate) fn sign_of_order(perm: &[usize], degs: &[i32]) -> i32 {
    let mut s = 1;
    for i in 0..perm.len() {
        if degs[perm[i]] % 2 == 0 {
            continue;
        }
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] && degs[perm[j]] % 2 != 0 {
                s = -s;
            }
        }
    }
    s
}

/// Sorts a tuple of basis indices into canonical key order, returning the
/// Koszul sign with `op(tuple) = sign * op(key)`. `None` if an odd element
/// repeats (the graded-symmetric value is then zero).
pub fn canonical_key(tuple: &[usize], degs: &[i32]) -> Option<(Vec<usize>, i32)> {
    let mut key = tuple.to_vec();
    let mut sign = 1;
    // insertion sort, counting odd-odd transpositions
    for i in 1..key.len() {
        let mut j = i;
        while j > 0 && key[j - 1] > key[j] {
            if degs[key[j - 1]] % 2 != 0 && degs[key[j]] % 2 != 0 {
                sign = -sign;
            }
            key.swap(j - 1, j);
            j -= 1;
        }
    }
    for w in key.windows(2) {
        if w[0] == w[1] && degs[w[0]] % 2 != 0 {
            return None;
        }
    }
    Some((key, sign))
}

/// All canonical keys of length `n` whose total degree is at most `max_total`.
pub fn canonical_keys(degs: &[i32], n: usize, max_total: i32) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(degs: &[i32], n: usize, start: usize, total: i32, max_total: i32, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..degs.len() {
            if total + degs[i] > max_total {
                continue;
            }
            let next = if degs[i] % 2 != 0 { i + 1 } else { i };
            cur.push(i);
            rec(degs, n, next, total + degs[i], max_total, cur, out);
            cur.pop();
        }
    }
    rec(degs, n, 0, 0, max_total, &mut cur, &mut out);
    out
}

/// Multiplicity factorial product of a sorted key: ∏ m_i!.
pub fn multiplicity_factor(key: &[usize]) -> Q {
    let mut f = Q::one();
    let mut run = 1i64;
    for w in key.windows(2) {
        if w[0] == w[1] {
            run += 1;
            f *= Q::from_integer(run.into());
        } else {
            run = 1;
        }
    }
    f
}
