//! Independent evaluation of the transferred data as sums over decorated
//! rooted trees.
//!
//! Leaves carry ι, nodes with k children carry λ_k, internal edges carry −η;
//! the root carries −η for φ (ι for the tree without nodes) and π for μ. Each
//! unlabeled tree contributes 1/|Aut T| times its value summed over all leaf
//! labelings with Koszul signs. Trees with more nodes than the top filtration
//! level vanish, which bounds the enumeration.

use std::collections::BTreeMap;

use num::One;
use rayon::prelude::*;

use crate::compose::permutations;
use crate::error::Result;
use crate::graded::{canonical_keys, koszul_sign, FVec};
use crate::multiop::{MultiMap, MultiOp, OpFamily};
use crate::poly::Q;

use super::{finish, prepare, tabulate_mu, ContractionData, Prepared, TransferResult};
use crate::linfty::CurvedStructure;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tree {
    Leaf,
    /// Children in canonical (sorted) order.
    Node(Vec<Tree>),
}

impl Tree {
    pub fn leaves(&self) -> usize {
        match self {
            Tree::Leaf => 1,
            Tree::Node(ch) => ch.iter().map(Tree::leaves).sum(),
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            Tree::Leaf => 0,
            Tree::Node(ch) => 1 + ch.iter().map(Tree::nodes).sum::<usize>(),
        }
    }

    /// Order of the automorphism group fixing the root.
    pub fn automorphisms(&self) -> u64 {
        match self {
            Tree::Leaf => 1,
            Tree::Node(ch) => {
                let mut a: u64 = ch.iter().map(Tree::automorphisms).product();
                let mut run = 1u64;
                for w in ch.windows(2) {
                    if w[0] == w[1] {
                        run += 1;
                        a *= run;
                    } else {
                        run = 1;
                    }
                }
                a
            }
        }
    }

    /// Whether some λ₀ node sits below an η edge.
    pub fn has_inner_curvature(&self) -> bool {
        match self {
            Tree::Leaf => false,
            Tree::Node(ch) => ch.iter().any(|c| matches!(c, Tree::Node(g) if g.is_empty()) || c.has_inner_curvature()),
        }
    }
}

/// All trees with exactly `leaves` leaves, at most `max_nodes` nodes and node
/// arities in `arities`.
pub fn enumerate_trees(leaves: usize, max_nodes: usize, arities: &[usize]) -> Vec<Tree> {
    let mut table: BTreeMap<(usize, usize), Vec<Tree>> = BTreeMap::new();
    for c in 0..=max_nodes {
        for l in 0..=leaves {
            let trees = build(l, c, arities, &table);
            table.insert((l, c), trees);
        }
    }
    (0..=max_nodes).flat_map(|c| table[&(leaves, c)].clone()).collect()
}

fn build(l: usize, c: usize, arities: &[usize], table: &BTreeMap<(usize, usize), Vec<Tree>>) -> Vec<Tree> {
    if c == 0 {
        return if l == 1 { vec![Tree::Leaf] } else { Vec::new() };
    }
    // candidate children: every smaller tree, in canonical order
    let mut cands: Vec<&Tree> = table.iter().filter(|((cl, cc), _)| *cl <= l && *cc < c).flat_map(|(_, v)| v).collect();
    cands.sort();
    let mut out = Vec::new();
    for &k in arities {
        let mut cur = Vec::with_capacity(k);
        choose(&cands, 0, k, l, c - 1, &mut cur, &mut out);
    }
    out
}

fn choose(cands: &[&Tree], start: usize, k: usize, l: usize, c: usize, cur: &mut Vec<Tree>, out: &mut Vec<Tree>) {
    if cur.len() == k {
        if l == 0 && c == 0 {
            out.push(Tree::Node(cur.clone()));
        }
        return;
    }
    for i in start..cands.len() {
        let t = cands[i];
        let (tl, tc) = (t.leaves(), t.nodes());
        if tl > l || tc > c {
            continue;
        }
        cur.push(t.clone());
        choose(cands, i, k, l - tl, c - tc, cur, out);
        cur.pop();
    }
}

struct Evaluator<'a> {
    prep: &'a Prepared,
    eta: &'a MultiOp,
}

impl Evaluator<'_> {
    /// Value of a node subtree on its leaf inputs (planar order).
    fn node(&self, t: &Tree, xs: &[FVec]) -> Option<FVec> {
        let Tree::Node(ch) = t else { unreachable!() };
        let mut args = Vec::with_capacity(ch.len());
        let mut pos = 0;
        for c in ch {
            let n = c.leaves();
            args.push(self.edge(c, &xs[pos..pos + n])?);
            pos += n;
        }
        self.prep.lambda.apply(ch.len(), &args)
    }

    /// Value carried by the edge below `t`: ι on a leaf, −η on a node.
    fn edge(&self, t: &Tree, xs: &[FVec]) -> Option<FVec> {
        match t {
            Tree::Leaf => Some(self.prep.retract.iota.apply1(&xs[0])),
            Tree::Node(_) => Some(self.eta.apply1(&self.node(t, xs)?).neg()),
        }
    }

    /// 1/|Aut T| Σ_σ ε(σ) T(x_σ).
    fn symmetric(&self, t: &Tree, xs: &[FVec], degs: &[i32], root: &dyn Fn(&Tree, &[FVec]) -> Option<FVec>, zero: FVec) -> FVec {
        let mut out = zero;
        for sigma in permutations(xs.len()) {
            let permuted: Vec<FVec> = sigma.iter().map(|&i| xs[i].clone()).collect();
            if let Some(v) = root(t, &permuted) {
                let sign = koszul_sign(&sigma, degs).expect("permutation");
                out.add_scaled(&v, &Q::from_integer(sign.into()));
            }
        }
        out.scale(&(Q::one() / Q::from_integer(t.automorphisms().into())))
    }
}

/// Tree-sum evaluation of φ and μ; must agree with [`super::transfer_structure`].
pub fn transfer_tree_oracle(s: &CurvedStructure, c: &ContractionData) -> Result<TransferResult> {
    let prep = prepare(s, c)?;
    let h = prep.retract.h.clone();
    let l = c.bundle.clone();
    let hdegs = h.degrees();
    let max_nodes = prep.levels.iter().copied().max().unwrap_or(0) as usize + 1;
    let arities = prep.lambda.arities();
    let ev = Evaluator { prep: &prep, eta: &c.eta };
    let mut count = 0;

    let mut phi = OpFamily::new(h.clone(), l.clone(), 0);
    for n in 1..=prep.phi_bound {
        let trees = enumerate_trees(n, max_nodes, &arities);
        count += trees.len();
        let keys = canonical_keys(&hdegs, n, l.max_degree());
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| h.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| hdegs[i]).collect();
                let mut v = l.zero_vec();
                for t in &trees {
                    v.add_assign(&ev.symmetric(t, &xs, &kd, &|t, xs| ev.edge(t, xs), l.zero_vec()));
                }
                (key, v)
            })
            .collect();
        let op = phi.op_mut(n);
        for (k, v) in values {
            op.insert_canonical(k, v);
        }
    }

    let mut mu = OpFamily::new(h.clone(), h.clone(), 1);
    for n in 0..=prep.mu_bound {
        let trees: Vec<Tree> =
            enumerate_trees(n, max_nodes, &arities).into_iter().filter(|t| matches!(t, Tree::Node(_))).collect();
        count += trees.len();
        let keys = canonical_keys(&hdegs, n, h.max_degree() - 1);
        let values: Vec<(Vec<usize>, FVec)> = keys
            .into_par_iter()
            .map(|key| {
                let xs: Vec<FVec> = key.iter().map(|&i| h.unit(i)).collect();
                let kd: Vec<i32> = key.iter().map(|&i| hdegs[i]).collect();
                let mut v = h.zero_vec();
                let root = |t: &Tree, xs: &[FVec]| ev.node(t, xs).map(|w| prep.retract.pi.apply1(&w));
                for t in &trees {
                    v.add_assign(&ev.symmetric(t, &xs, &kd, &root, h.zero_vec()));
                }
                (key, v)
            })
            .collect();
        let op = mu.op_mut(n);
        for (k, v) in values {
            op.insert_canonical(k, v);
        }
    }
    // the recursion's μ from the oracle's φ must also match the oracle's μ
    debug_assert_eq!(tabulate_mu(&prep, &phi).ok().as_ref(), Some(&mu));
    finish(s, c, prep, phi, mu, count)
}
