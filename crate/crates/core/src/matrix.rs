//! Exact matrices over the rationals and over polynomial rings.

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::{Poly, Q};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMatrix { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = QMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Q::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged matrix");
        QMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    /// Builds a matrix whose columns are the given vectors of length `rows`.
    pub fn from_columns(rows: usize, cols: &[Vec<Q>]) -> Self {
        let mut m = QMatrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows);
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn mul(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = QMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        let v = out.get(i, j) + a * b;
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).fold(Q::zero(), |acc, j| acc + self.get(i, j) * &v[j]))
            .collect()
    }

    pub fn transpose(&self) -> QMatrix {
        let mut out = QMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Reduced row echelon form together with the pivot columns.
    pub fn rref(&self) -> (QMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else { continue };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = m.get(r, c).recip();
            for j in 0..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r || m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c).clone();
                for j in 0..m.cols {
                    let v = m.get(i, j) - &f * m.get(r, j);
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel, one vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<Q>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (row, &p) in pivots.iter().enumerate() {
                    v[p] = -r.get(row, f).clone();
                }
                v
            })
            .collect()
    }

    pub fn inverse(&self) -> Option<QMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        if n == 0 {
            return Some(QMatrix::zeros(0, 0));
        }
        let mut aug = QMatrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j).clone());
            }
            aug.set(i, n + i, Q::one());
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut out = QMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, r.get(i, n + j).clone());
            }
        }
        Some(out)
    }

    /// Some `s` with `self * s = id`, if `self` has full row rank.
    pub fn right_inverse(&self) -> Option<QMatrix> {
        if self.rank() != self.rows {
            return None;
        }
        let t = self.transpose();
        let gram = self.mul(&t).inverse()?;
        Some(t.mul(&gram))
    }

    /// Some `r` with `r * self = id`, if `self` has full column rank.
    pub fn left_inverse(&self) -> Option<QMatrix> {
        Some(self.transpose().right_inverse()?.transpose())
    }

    /// Indices of a maximal independent set of columns (the pivot columns).
    pub fn independent_columns(&self) -> Vec<usize> {
        self.rref().1
    }

    pub fn to_poly(&self, nvars: usize) -> PolyMatrix {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|c| Poly::constant(nvars, c.clone())).collect(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix { rows, cols, data: vec![Poly::zero(nvars); rows * cols] }
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        let mut m = PolyMatrix::zeros(n, n, nvars);
        for i in 0..n {
            m.set(i, i, Poly::one(nvars));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Poly) {
        self.data[i * self.cols + j] = v;
    }

    pub fn eval(&self, point: &[Q]) -> QMatrix {
        QMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|p| p.eval(point)).collect() }
    }

    pub fn constant(&self) -> Option<QMatrix> {
        let data = self.data.iter().map(Poly::as_constant).collect::<Option<Vec<_>>>()?;
        Some(QMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn mul(&self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let nvars = self.data.first().or(rhs.data.first()).map_or(0, Poly::nvars);
        let mut out = PolyMatrix::zeros(self.rows, rhs.cols, nvars);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        out.data[i * rhs.cols + j].add_assign(&(a * b));
                    }
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Poly::is_zero)
    }

    pub fn column(&self, j: usize) -> Vec<Poly> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn from_columns(rows: usize, cols: &[Vec<Poly>], nvars: usize) -> PolyMatrix {
        let mut m = PolyMatrix::zeros(rows, cols.len(), nvars);
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows, "column length mismatch");
            for (i, p) in c.iter().enumerate() {
                m.set(i, j, p.clone());
            }
        }
        m
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> PolyMatrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self.get(i, j).clone());
            }
        }
        PolyMatrix { rows: rows.len(), cols: cols.len(), data }
    }

    pub fn transpose(&self) -> PolyMatrix {
        let rows: Vec<usize> = (0..self.rows).collect();
        let mut out = PolyMatrix { rows: self.cols, cols: self.rows, data: Vec::with_capacity(self.data.len()) };
        for j in 0..self.cols {
            for &i in &rows {
                out.data.push(self.get(i, j).clone());
            }
        }
        out
    }

    pub fn add(&self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum shape mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        PolyMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference shape mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        PolyMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Rows `S` with `self[S, :]` square of nonzero constant determinant, so
    /// that `self` has a polynomial left inverse supported on `S`.
    pub fn unimodular_rows(&self, nvars: usize) -> Option<Vec<usize>> {
        let n = self.cols;
        if n == 0 {
            return Some(Vec::new());
        }
        if n > self.rows {
            return None;
        }
        let good = |s: &[usize]| {
            let sub = self.select(s, &(0..n).collect::<Vec<_>>());
            match sub.constant() {
                Some(c) => c.rank() == n,
                None => sub.det(nvars).as_constant().is_some_and(|d| !d.is_zero()),
            }
        };
        if let Some(c) = self.constant() {
            let piv = c.transpose().independent_columns();
            return (piv.len() == n).then_some(piv);
        }
        // generic point first: its pivot rows are the likely answer
        let point: Vec<Q> = (0..nvars).map(|i| Q::from_integer(((2 * i + 3) as i64).into()) / Q::from_integer(7.into())).collect();
        let piv = self.eval(&point).transpose().independent_columns();
        if piv.len() < n {
            return None;
        }
        if good(&piv) {
            return Some(piv);
        }
        let mut found = None;
        for_each_combination(self.rows, n, 20_000, &mut |s| {
            if found.is_none() && good(s) {
                found = Some(s.to_vec());
            }
            found.is_none()
        });
        found
    }

    /// Polynomial left inverse `r` (r · self = id), if some row subset is unimodular.
    pub fn left_inverse_unimodular(&self, nvars: usize) -> Option<PolyMatrix> {
        let rows = self.unimodular_rows(nvars)?;
        let sub = self.select(&rows, &(0..self.cols).collect::<Vec<_>>());
        let inv = sub.inverse_unimodular(nvars).ok()?;
        let mut out = PolyMatrix::zeros(self.cols, self.rows, nvars);
        for (k, &r) in rows.iter().enumerate() {
            for i in 0..self.cols {
                out.set(i, r, inv.get(i, k).clone());
            }
        }
        Some(out)
    }

    /// Polynomial right inverse `s` (self · s = id), if some column subset is unimodular.
    pub fn right_inverse_unimodular(&self, nvars: usize) -> Option<PolyMatrix> {
        Some(self.transpose().left_inverse_unimodular(nvars)?.transpose())
    }

    fn minor(&self, skip_row: usize, skip_col: usize) -> PolyMatrix {
        let mut data = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for i in (0..self.rows).filter(|&i| i != skip_row) {
            for j in (0..self.cols).filter(|&j| j != skip_col) {
                data.push(self.get(i, j).clone());
            }
        }
        PolyMatrix { rows: self.rows - 1, cols: self.cols - 1, data }
    }

    /// Determinant by cofactor expansion; sizes here are tiny.
    pub fn det(&self, nvars: usize) -> Poly {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        match self.rows {
            0 => Poly::one(nvars),
            1 => self.get(0, 0).clone(),
            n => {
                let mut acc = Poly::zero(nvars);
                for j in 0..n {
                    let a = self.get(0, j);
                    if a.is_zero() {
                        continue;
                    }
                    let term = a * &self.minor(0, j).det(nvars);
                    if j % 2 == 0 {
                        acc.add_assign(&term);
                    } else {
                        acc = &acc - &term;
                    }
                }
                acc
            }
        }
    }

    /// Inverse over the polynomial ring; requires a nonzero constant determinant.
    pub fn inverse_unimodular(&self, nvars: usize) -> Result<PolyMatrix> {
        if self.rows != self.cols {
            return Err(Error::NotInvertible("non-square linear part".into()));
        }
        if let Some(c) = self.constant() {
            let inv = c.inverse().ok_or_else(|| Error::NotInvertible("singular constant matrix".into()))?;
            return Ok(inv.to_poly(nvars));
        }
        let det = self.det(nvars);
        let d = det
            .as_constant()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| Error::NotInvertible("determinant is not a nonzero constant".into()))?;
        let dinv = d.recip();
        let n = self.rows;
        let mut out = PolyMatrix::zeros(n, n, nvars);
        for i in 0..n {
            for j in 0..n {
                let cof = self.minor(j, i).det(nvars).scale(&dinv);
                out.set(i, j, if (i + j) % 2 == 0 { cof } else { -&cof });
            }
        }
        Ok(out)
    }
}

/// Visits k-subsets of 0..n in lexicographic order until `f` returns false or
/// `limit` subsets have been visited.
fn for_each_combination(n: usize, k: usize, limit: usize, f: &mut dyn FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    for _ in 0..limit {
        if !f(&idx) {
            return;
        }
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { return };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{q, qf};

    fn m(rows: &[&[i64]]) -> QMatrix {
        QMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect())
    }

    #[test]
    fn rank_and_nullspace() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[0, 1, 1]]);
        assert_eq!(a.rank(), 2);
        let ns = a.nullspace();
        assert_eq!(ns.len(), 1);
        assert!(a.apply(&ns[0]).iter().all(Zero::is_zero));
    }

    #[test]
    fn inverses() {
        let a = m(&[&[2, 1], &[1, 1]]);
        assert_eq!(a.mul(&a.inverse().unwrap()), QMatrix::identity(2));
        assert!(m(&[&[1, 2], &[2, 4]]).inverse().is_none());
        let s = m(&[&[1, 0, 2], &[0, 1, 1]]);
        assert_eq!(s.mul(&s.right_inverse().unwrap()), QMatrix::identity(2));
        assert_eq!(s.transpose().left_inverse().unwrap().mul(&s.transpose()), QMatrix::identity(2));
        assert_eq!(m(&[&[2]]).inverse().unwrap().get(0, 0), &qf(1, 2));
    }

    #[test]
    fn unimodular_polynomial_inverse() {
        let names = vec!["x".to_string()];
        let mut a = PolyMatrix::identity(2, 1);
        a.set(0, 1, Poly::parse("x^2", &names).unwrap());
        let inv = a.inverse_unimodular(1).unwrap();
        assert_eq!(a.mul(&inv), PolyMatrix::identity(2, 1));
        let mut b = PolyMatrix::identity(1, 1);
        b.set(0, 0, Poly::parse("x", &names).unwrap());
        assert!(b.inverse_unimodular(1).is_err());
    }
}
