//! Graded-symmetric multilinear operations with polynomial coefficients.
//!
//! A `MultiOp` stores one value per canonical key (sorted multiset of source
//! basis indices, no repeated odd element). Evaluation on an unsorted tuple
//! re-sorts and applies the Koszul sign, so the stored table always denotes
//! the fully graded-symmetric operation.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::graded::{canonical_key, FVec, GradedBundle};
use crate::matrix::PolyMatrix;
use crate::poly::{Poly, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiOp {
    source: Arc<GradedBundle>,
    target: Arc<GradedBundle>,
    arity: usize,
    degree: i32,
    entries: BTreeMap<Vec<usize>, FVec>,
}

impl MultiOp {
    pub fn new(source: Arc<GradedBundle>, target: Arc<GradedBundle>, arity: usize, degree: i32) -> Self {
        assert_eq!(source.nvars(), target.nvars(), "source and target over different rings");
        MultiOp { source, target, arity, degree, entries: BTreeMap::new() }
    }

    pub fn source(&self) -> &Arc<GradedBundle> {
        &self.source
    }

    pub fn target(&self) -> &Arc<GradedBundle> {
        &self.target
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &FVec)> {
        self.entries.iter()
    }

    pub fn get(&self, key: &[usize]) -> Option<&FVec> {
        self.entries.get(key)
    }

    fn check_value(&self, inputs: &[usize], value: &FVec) -> Result<()> {
        if inputs.len() != self.arity {
            return Err(Error::Dimension(format!("{} inputs for an arity-{} operation", inputs.len(), self.arity)));
        }
        if let Some(&bad) = inputs.iter().find(|&&i| i >= self.source.rank()) {
            return Err(Error::Dimension(format!("input index {bad} out of range")));
        }
        if value.rank() != self.target.rank() {
            return Err(Error::Dimension(format!(
                "value of rank {} for a target of rank {}",
                value.rank(),
                self.target.rank()
            )));
        }
        let total: i32 = inputs.iter().map(|&i| self.source.degree(i)).sum::<i32>() + self.degree;
        for (j, _) in value.nonzero() {
            if value.0[j].nvars() != self.target.nvars() {
                return Err(Error::Dimension("coefficient ring mismatch".into()));
            }
            if self.target.degree(j) != total {
                let names: Vec<&str> = inputs.iter().map(|&i| self.source.name(i)).collect();
                return Err(Error::Degree(format!(
                    "inputs ({}) with operation degree {} cannot reach '{}' of degree {}",
                    names.join(","),
                    self.degree,
                    self.target.name(j),
                    self.target.degree(j)
                )));
            }
        }
        Ok(())
    }

    /// Sets the value on an arbitrary ordering of inputs; the canonical key
    /// absorbs the Koszul sign.
    pub fn set(&mut self, inputs: &[usize], value: FVec) -> Result<()> {
        self.check_value(inputs, &value)?;
        let degs = self.source.degrees();
        match canonical_key(inputs, &degs) {
            None if value.is_zero() => Ok(()),
            None => Err(self.symmetry_error(inputs)),
            Some((key, sign)) => {
                let v = if sign < 0 { value.neg() } else { value };
                if v.is_zero() {
                    self.entries.remove(&key);
                } else {
                    self.entries.insert(key, v);
                }
                Ok(())
            }
        }
    }

    /// Adds to the value on an arbitrary ordering of inputs.
    pub fn add(&mut self, inputs: &[usize], value: &FVec) -> Result<()> {
        self.check_value(inputs, value)?;
        let degs = self.source.degrees();
        match canonical_key(inputs, &degs) {
            None if value.is_zero() => Ok(()),
            None => Err(self.symmetry_error(inputs)),
            Some((key, sign)) => {
                let slot = self.entries.entry(key.clone()).or_insert_with(|| self.target.zero_vec());
                slot.add_scaled(value, &Q::from_integer(sign.into()));
                if slot.is_zero() {
                    self.entries.remove(&key);
                }
                Ok(())
            }
        }
    }

    fn symmetry_error(&self, inputs: &[usize]) -> Error {
        let names: Vec<&str> = inputs.iter().map(|&i| self.source.name(i)).collect();
        Error::Symmetry(format!(
            "nonzero value on ({}) repeats an odd-degree input, which a graded-symmetric operation sends to zero",
            names.join(",")
        ))
    }

    /// Canonicalizes a raw table given on ordered tuples. Entries falling in
    /// the same symmetric orbit are re-keyed with their Koszul signs and
    /// averaged, so a complete unsymmetrized table is graded-symmetrized and
    /// a table already symmetric (or given on any one ordering) is preserved.
    pub fn symmetrize(
        source: Arc<GradedBundle>,
        target: Arc<GradedBundle>,
        arity: usize,
        degree: i32,
        raw: &[(Vec<usize>, FVec)],
    ) -> Result<MultiOp> {
        let mut op = MultiOp::new(source, target, arity, degree);
        let degs = op.source.degrees();
        let mut orbits: BTreeMap<Vec<usize>, (FVec, usize)> = BTreeMap::new();
        for (tuple, value) in raw {
            op.check_value(tuple, value)?;
            match canonical_key(tuple, &degs) {
                None if value.is_zero() => {}
                None => return Err(op.symmetry_error(tuple)),
                Some((key, sign)) => {
                    let slot = orbits.entry(key).or_insert_with(|| (op.target.zero_vec(), 0));
                    slot.0.add_scaled(value, &Q::from_integer(sign.into()));
                    slot.1 += 1;
                }
            }
        }
        for (key, (sum, count)) in orbits {
            let v = sum.scale(&Q::new(1.into(), (count as i64).into()));
            if !v.is_zero() {
                op.entries.insert(key, v);
            }
        }
        Ok(op)
    }

    /// Value on a tuple of basis indices in any order.
    pub fn eval_basis(&self, tuple: &[usize]) -> FVec {
        let degs = self.source.degrees();
        match canonical_key(tuple, &degs) {
            Some((key, sign)) => match self.entries.get(&key) {
                Some(v) if sign < 0 => v.neg(),
                Some(v) => v.clone(),
                None => self.target.zero_vec(),
            },
            None => self.target.zero_vec(),
        }
    }

    /// Multilinear evaluation on vectors.
    pub fn eval(&self, inputs: &[FVec]) -> FVec {
        assert_eq!(inputs.len(), self.arity, "wrong number of inputs");
        let mut out = self.target.zero_vec();
        if self.entries.is_empty() {
            return out;
        }
        let nvars = self.source.nvars();
        let comps: Vec<Vec<(usize, &Poly)>> = inputs.iter().map(|v| v.nonzero().collect()).collect();
        if comps.iter().any(Vec::is_empty) && self.arity > 0 {
            return out;
        }
        let degs = self.source.degrees();
        let mut tuple = vec![0usize; self.arity];
        self.expand(&comps, &degs, 0, &mut tuple, &Poly::one(nvars), &mut out);
        out
    }

    fn expand(
        &self,
        comps: &[Vec<(usize, &Poly)>],
        degs: &[i32],
        pos: usize,
        tuple: &mut Vec<usize>,
        coeff: &Poly,
        out: &mut FVec,
    ) {
        if pos == comps.len() {
            if let Some((key, sign)) = canonical_key(tuple, degs) {
                if let Some(v) = self.entries.get(&key) {
                    let c = if sign < 0 { -coeff } else { coeff.clone() };
                    out.add_poly_scaled(v, &c);
                }
            }
            return;
        }
        for &(j, p) in &comps[pos] {
            tuple[pos] = j;
            let c = match p.as_constant() {
                Some(k) if k.is_one() => coeff.clone(),
                _ => coeff * p,
            };
            self.expand(comps, degs, pos + 1, tuple, &c, out);
        }
    }

    /// Substitutes coefficients along a base map, landing over new bundles
    /// with the same bases.
    pub fn pullback(&self, images: &[Poly], source: Arc<GradedBundle>, target: Arc<GradedBundle>) -> MultiOp {
        assert_eq!(source.rank(), self.source.rank());
        assert_eq!(target.rank(), self.target.rank());
        let entries = self
            .entries
            .iter()
            .filter_map(|(k, v)| {
                let w = v.map(|p| p.substitute_into(images, target.nvars()));
                (!w.is_zero()).then(|| (k.clone(), w))
            })
            .collect();
        MultiOp { source, target, arity: self.arity, degree: self.degree, entries }
    }

    /// Rebinds to bundles with identical bases (e.g. after renaming the chart).
    pub fn rebind(&self, source: Arc<GradedBundle>, target: Arc<GradedBundle>) -> MultiOp {
        assert_eq!(source.degrees(), self.source.degrees());
        assert_eq!(target.degrees(), self.target.degrees());
        assert_eq!(source.nvars(), self.source.nvars());
        MultiOp { source, target, arity: self.arity, degree: self.degree, entries: self.entries.clone() }
    }

    pub fn scale(&self, c: &Q) -> MultiOp {
        let mut out = self.clone();
        if c.is_zero() {
            out.entries.clear();
        } else {
            for v in out.entries.values_mut() {
                *v = v.scale(c);
            }
        }
        out
    }

    pub fn add_op(&mut self, other: &MultiOp) -> Result<()> {
        if self.source != other.source || self.target != other.target || self.arity != other.arity {
            return Err(Error::BundleMismatch("adding operations of different shapes".into()));
        }
        if self.degree != other.degree && !other.is_zero() {
            return Err(Error::Degree("adding operations of different degrees".into()));
        }
        for (k, v) in &other.entries {
            let slot = self.entries.entry(k.clone()).or_insert_with(|| self.target.zero_vec());
            slot.add_assign(v);
            if slot.is_zero() {
                self.entries.remove(k);
            }
        }
        Ok(())
    }

    /// Inserts a value already in canonical form; used by constructors that
    /// enumerate canonical keys themselves.
    pub(crate) fn insert_canonical(&mut self, key: Vec<usize>, value: FVec) {
        debug_assert!(self.check_value(&key, &value).is_ok(), "degree bookkeeping");
        if !value.is_zero() {
            self.entries.insert(key, value);
        }
    }

    pub fn max_coefficient_degree(&self, var: usize) -> u32 {
        self.entries.values().flat_map(|v| v.0.iter().map(move |p| p.degree_in(var))).max().unwrap_or(0)
    }

    /// Matrix of an arity-1 operation (rows: target basis, columns: source basis).
    pub fn to_matrix(&self) -> PolyMatrix {
        assert_eq!(self.arity, 1, "only arity-1 operations have matrices");
        let mut m = PolyMatrix::zeros(self.target.rank(), self.source.rank(), self.source.nvars());
        for (key, v) in &self.entries {
            for (i, p) in v.nonzero() {
                m.set(i, key[0], p.clone());
            }
        }
        m
    }

    /// Arity-1 operation from its matrix; degree bookkeeping is checked.
    pub fn from_matrix(
        source: Arc<GradedBundle>,
        target: Arc<GradedBundle>,
        degree: i32,
        m: &PolyMatrix,
    ) -> Result<MultiOp> {
        if m.rows() != target.rank() || m.cols() != source.rank() {
            return Err(Error::Dimension("matrix shape does not match the bundles".into()));
        }
        let mut op = MultiOp::new(source, target, 1, degree);
        for j in 0..m.cols() {
            op.set(&[j], FVec(m.column(j)))?;
        }
        Ok(op)
    }

    /// Applies an arity-1 operation.
    pub fn apply1(&self, v: &FVec) -> FVec {
        self.eval(std::slice::from_ref(v))
    }
}

/// Anything that can be evaluated arity by arity on fiber vectors.
pub trait MultiMap: Sync {
    /// The arity-`k` component on `inputs`, or `None` when that component is zero.
    fn apply(&self, k: usize, inputs: &[FVec]) -> Option<FVec>;
    fn max_arity(&self) -> usize;
    fn zero_output(&self) -> FVec;
}

/// A family (λ_k) of operations of one common degree.
#[derive(Clone, Debug)]
pub struct OpFamily {
    source: Arc<GradedBundle>,
    target: Arc<GradedBundle>,
    degree: i32,
    ops: BTreeMap<usize, MultiOp>,
}

impl PartialEq for OpFamily {
    fn eq(&self, other: &Self) -> bool {
        if self.source != other.source || self.target != other.target {
            return false;
        }
        let arities: std::collections::BTreeSet<usize> = self.ops.keys().chain(other.ops.keys()).copied().collect();
        arities.into_iter().all(|k| match (self.op(k), other.op(k)) {
            (Some(a), Some(b)) => a.entries == b.entries,
            (Some(a), None) | (None, Some(a)) => a.is_zero(),
            (None, None) => true,
        })
    }
}

impl OpFamily {
    pub fn new(source: Arc<GradedBundle>, target: Arc<GradedBundle>, degree: i32) -> Self {
        assert_eq!(source.nvars(), target.nvars(), "source and target over different rings");
        OpFamily { source, target, degree, ops: BTreeMap::new() }
    }

    /// The family whose only component is the identity in arity 1.
    pub fn identity(bundle: Arc<GradedBundle>) -> Self {
        let mut f = OpFamily::new(bundle.clone(), bundle.clone(), 0);
        let op = f.op_mut(1);
        for i in 0..bundle.rank() {
            op.insert_canonical(vec![i], bundle.unit(i));
        }
        f
    }

    pub fn source(&self) -> &Arc<GradedBundle> {
        &self.source
    }

    pub fn target(&self) -> &Arc<GradedBundle> {
        &self.target
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn op(&self, k: usize) -> Option<&MultiOp> {
        self.ops.get(&k).filter(|o| !o.is_zero())
    }

    pub fn op_mut(&mut self, k: usize) -> &mut MultiOp {
        let (s, t, d) = (self.source.clone(), self.target.clone(), self.degree);
        self.ops.entry(k).or_insert_with(|| MultiOp::new(s, t, k, d))
    }

    pub fn set_op(&mut self, op: MultiOp) -> Result<()> {
        if op.source != self.source || op.target != self.target {
            return Err(Error::BundleMismatch("operation does not match the family's bundles".into()));
        }
        if op.degree != self.degree {
            return Err(Error::Degree(format!(
                "arity-{} operation of degree {} in a family of degree {}",
                op.arity, op.degree, self.degree
            )));
        }
        self.ops.insert(op.arity, op);
        Ok(())
    }

    pub fn remove(&mut self, k: usize) {
        self.ops.remove(&k);
    }

    pub fn arities(&self) -> Vec<usize> {
        self.ops.iter().filter(|(_, o)| !o.is_zero()).map(|(&k, _)| k).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.ops.values().all(MultiOp::is_zero)
    }

    pub fn add_family(&mut self, other: &OpFamily) -> Result<()> {
        if other.source != self.source || other.target != self.target {
            return Err(Error::BundleMismatch("adding families over different bundles".into()));
        }
        for (k, op) in &other.ops {
            if op.is_zero() {
                continue;
            }
            if op.degree != self.degree {
                return Err(Error::Degree("adding families of different degrees".into()));
            }
            self.op_mut(*k).add_op(op)?;
        }
        Ok(())
    }

    pub fn sub_family(&self, other: &OpFamily) -> Result<OpFamily> {
        let mut out = self.clone();
        let mut neg = other.clone();
        for op in neg.ops.values_mut() {
            *op = op.scale(&-Q::one());
        }
        out.add_family(&neg)?;
        Ok(out)
    }

    pub fn pullback(&self, images: &[Poly], source: Arc<GradedBundle>, target: Arc<GradedBundle>) -> OpFamily {
        OpFamily {
            source: source.clone(),
            target: target.clone(),
            degree: self.degree,
            ops: self.ops.iter().map(|(&k, o)| (k, o.pullback(images, source.clone(), target.clone()))).collect(),
        }
    }

    pub fn rebind(&self, source: Arc<GradedBundle>, target: Arc<GradedBundle>) -> OpFamily {
        OpFamily {
            source: source.clone(),
            target: target.clone(),
            degree: self.degree,
            ops: self.ops.iter().map(|(&k, o)| (k, o.rebind(source.clone(), target.clone()))).collect(),
        }
    }

    pub fn eval(&self, k: usize, inputs: &[FVec]) -> FVec {
        match self.op(k) {
            Some(op) => op.eval(inputs),
            None => self.target.zero_vec(),
        }
    }

    pub fn eval_basis(&self, tuple: &[usize]) -> FVec {
        match self.op(tuple.len()) {
            Some(op) => op.eval_basis(tuple),
            None => self.target.zero_vec(),
        }
    }
}

impl MultiMap for OpFamily {
    fn apply(&self, k: usize, inputs: &[FVec]) -> Option<FVec> {
        self.op(k).map(|op| op.eval(inputs))
    }

    fn max_arity(&self) -> usize {
        self.arities().last().copied().unwrap_or(0)
    }

    fn zero_output(&self) -> FVec {
        self.target.zero_vec()
    }
}

/// A family plus an extra arity-1 linear operator given as a function; used
/// for differentials that are not bundle maps (such as t-derivatives).
pub struct WithLinear<'a> {
    pub base: &'a dyn MultiMap,
    pub linear: &'a (dyn Fn(&FVec) -> FVec + Sync),
}

impl MultiMap for WithLinear<'_> {
    fn apply(&self, k: usize, inputs: &[FVec]) -> Option<FVec> {
        let b = self.base.apply(k, inputs);
        if k != 1 {
            return b;
        }
        let mut l = (self.linear)(&inputs[0]);
        if let Some(b) = b {
            l.add_assign(&b);
        }
        Some(l)
    }

    fn max_arity(&self) -> usize {
        self.base.max_arity().max(1)
    }

    fn zero_output(&self) -> FVec {
        self.base.zero_output()
    }
}
