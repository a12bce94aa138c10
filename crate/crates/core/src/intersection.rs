//! Homotopy fibered products through the path space, and derived
//! intersections of submanifolds of an affine space.
//!
//! 𝓧 ×ʰ_𝓩 𝓨 is built in two strict pullbacks of linear fibrations: first the
//! endpoint evaluation 𝓟𝓩 ↠ 𝓩 × 𝓩 along id × g, then the resulting
//! projection along f × id. Both stay inside what `pullback_fibration`
//! realizes, because evaluation has identity base map and constant φ₁.

use num::Zero;

use crate::error::{Error, Result};
use crate::geometry::{
    complex_cohomology, is_classical_point, product, product_morphism, pullback_fibration, tangent_complex,
    virtual_dimension, DerivedChart,
};
use crate::graded::{Chart, GradedBundle};
use crate::linfty::{compose_morphisms, pulled_target, LooMorphism};
use crate::matrix::QMatrix;
use crate::multiop::OpFamily;
use crate::pathspace::derived_path_space;
use crate::poly::{Poly, Q};

/// 𝓧 ×ʰ_𝓩 𝓨 with its maps to 𝓧 × 𝓨 and to the path space of 𝓩.
#[derive(Clone, Debug)]
pub struct HomotopyFiberedProduct {
    pub chart: DerivedChart,
    /// 𝓧 × 𝓨, with tags "0" and "1".
    pub base: DerivedChart,
    pub to_base: LooMorphism,
    pub to_path_space: LooMorphism,
}

/// vdim 𝓧 + vdim 𝓨 − vdim 𝓩 is checked on the result.
pub fn homotopy_fibered_product(
    f: &LooMorphism,
    x: &DerivedChart,
    g: &LooMorphism,
    y: &DerivedChart,
    z: &DerivedChart,
) -> Result<HomotopyFiberedProduct> {
    if f.source() != x.bundle() || g.source() != y.bundle() {
        return Err(Error::BundleMismatch("morphism sources differ from the given charts".into()));
    }
    if f.target() != z.bundle() || g.target() != z.bundle() {
        return Err(Error::BundleMismatch("both morphisms must land in the common target".into()));
    }
    let tags = ["0", "1"];
    let paths = derived_path_space(z)?;
    let zy = product(z, y, tags)?;
    let id_z = LooMorphism::identity(z.bundle().clone());
    let id_y = LooMorphism::identity(y.bundle().clone());
    let first = pullback_fibration(&paths.evaluation, &paths.chart, &paths.square, &product_morphism(&id_z, g, tags, tags)?, &zy)?;
    let xy = product(x, y, tags)?;
    let second = pullback_fibration(&first.projection, &first.chart, &zy, &product_morphism(f, &id_y, tags, tags)?, &xy)?;
    let to_path_space = compose_morphisms(&second.lift, &first.lift)?;
    let expected = virtual_dimension(x) + virtual_dimension(y) - virtual_dimension(z);
    let got = virtual_dimension(&second.chart);
    if got != expected {
        return Err(Error::Verification(format!("virtual dimension {got}, expected {expected}")));
    }
    Ok(HomotopyFiberedProduct { chart: second.chart, base: xy, to_base: second.projection, to_path_space })
}

/// How a submanifold of an affine space is given.
#[derive(Clone, Debug, PartialEq)]
pub enum Presentation {
    /// x = A·u + b with A of full column rank.
    Parametrized { matrix: QMatrix, offset: Vec<Q> },
    /// C·x = d with C of full row rank.
    ZeroLocus { matrix: QMatrix, rhs: Vec<Q> },
    /// The coordinates in `free` are parameters; the others, in increasing
    /// order, are the given polynomials in them.
    Graph { free: Vec<usize>, values: Vec<Poly> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Submanifold {
    label: String,
    ambient: Chart,
    presentation: Presentation,
}

impl Submanifold {
    pub fn new(label: impl Into<String>, ambient: Chart, presentation: Presentation) -> Result<Self> {
        let n = ambient.dim();
        match &presentation {
            Presentation::Parametrized { matrix, offset } => {
                if matrix.rows() != n || offset.len() != n {
                    return Err(Error::Dimension(format!("parametrization must have {n} rows")));
                }
                if matrix.rank() != matrix.cols() {
                    return Err(Error::Verification("parametrization is not an immersion".into()));
                }
            }
            Presentation::ZeroLocus { matrix, rhs } => {
                if matrix.cols() != n || rhs.len() != matrix.rows() {
                    return Err(Error::Dimension(format!("equations must have {n} columns")));
                }
                if matrix.rank() != matrix.rows() {
                    return Err(Error::Verification("equations are not independent".into()));
                }
            }
            Presentation::Graph { free, values } => {
                let sorted = free.windows(2).all(|w| w[0] < w[1]);
                if !sorted || free.last().is_some_and(|&j| j >= n) {
                    return Err(Error::Dimension("free coordinates must be increasing ambient indices".into()));
                }
                if values.len() != n - free.len() || values.iter().any(|p| p.nvars() != free.len()) {
                    return Err(Error::Dimension("one polynomial in the free coordinates per dependent coordinate".into()));
                }
            }
        }
        Ok(Submanifold { label: label.into(), ambient, presentation })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn ambient(&self) -> &Chart {
        &self.ambient
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    /// x = x₀ + N·u for a zero locus.
    fn affine_form(&self) -> Option<(QMatrix, Vec<Q>)> {
        match &self.presentation {
            Presentation::Parametrized { matrix, offset } => Some((matrix.clone(), offset.clone())),
            Presentation::ZeroLocus { matrix, rhs } => {
                let start = matrix.right_inverse().expect("full row rank").apply(rhs);
                let kernel = matrix.nullspace();
                Some((QMatrix::from_columns(self.ambient.dim(), &kernel), start))
            }
            Presentation::Graph { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.presentation {
            Presentation::Graph { free, .. } => free.len(),
            _ => self.affine_form().unwrap().0.cols(),
        }
    }

    /// Parameter chart with coordinates `<label>0`, `<label>1`, …
    pub fn parameter_chart(&self) -> Result<Chart> {
        Chart::new((0..self.dim()).map(|i| format!("{}{i}", self.label)))
    }

    /// Ambient coordinates as polynomials in the parameters.
    pub fn embedding(&self) -> Vec<Poly> {
        let k = self.dim();
        match &self.presentation {
            Presentation::Graph { free, values } => {
                let mut dependent = values.iter();
                (0..self.ambient.dim())
                    .map(|j| match free.iter().position(|&f| f == j) {
                        Some(i) => Poly::var(k, i),
                        None => dependent.next().unwrap().clone(),
                    })
                    .collect()
            }
            _ => {
                let (a, b) = self.affine_form().unwrap();
                (0..self.ambient.dim())
                    .map(|j| {
                        let mut p = Poly::constant(k, b[j].clone());
                        for i in 0..k {
                            p.add_scaled(&Poly::var(k, i), a.get(j, i));
                        }
                        p
                    })
                    .collect()
            }
        }
    }

    /// The parameters of an ambient point, if it lies on the submanifold.
    pub fn preimage(&self, p: &[Q]) -> Result<Option<Vec<Q>>> {
        if p.len() != self.ambient.dim() {
            return Err(Error::Dimension(format!("point must have {} coordinates", self.ambient.dim())));
        }
        let u: Vec<Q> = match &self.presentation {
            Presentation::Graph { free, .. } => free.iter().map(|&j| p[j].clone()).collect(),
            _ => {
                let (a, b) = self.affine_form().unwrap();
                let shifted: Vec<Q> = p.iter().zip(&b).map(|(x, y)| x - y).collect();
                a.left_inverse().expect("full column rank").apply(&shifted)
            }
        };
        let back: Vec<Q> = self.embedding().iter().map(|e| e.eval(&u)).collect();
        Ok((back == p).then_some(u))
    }

    /// The submanifold as a plain chart with its inclusion into the ambient space.
    pub fn inclusion(&self) -> Result<(DerivedChart, LooMorphism)> {
        let src = DerivedChart::plain(self.parameter_chart()?);
        let tgt = GradedBundle::new(self.ambient.clone(), vec![])?.shared();
        let phi = OpFamily::new(src.bundle().clone(), pulled_target(src.bundle(), &tgt), 0);
        let m = LooMorphism::new(src.bundle().clone(), tgt, self.embedding(), phi)?;
        Ok((src, m))
    }
}

/// X ∩ʰ Y inside their common ambient affine space.
pub fn derived_intersection(x: &Submanifold, y: &Submanifold) -> Result<HomotopyFiberedProduct> {
    if x.ambient() != y.ambient() {
        return Err(Error::BundleMismatch("submanifolds live in different spaces".into()));
    }
    let z = DerivedChart::plain(x.ambient().clone());
    let (xc, f) = x.inclusion()?;
    let (yc, g) = y.inclusion()?;
    homotopy_fibered_product(&f, &xc, &g, &yc, &z)
}

/// Tangent cohomology of the derived intersection at an ambient point of X ∩ Y.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionPoint {
    pub coordinates: Vec<Q>,
    pub cohomology: Vec<usize>,
}

pub fn intersection_point(
    x: &Submanifold,
    y: &Submanifold,
    hfp: &HomotopyFiberedProduct,
    ambient_point: &[Q],
) -> Result<IntersectionPoint> {
    let (Some(u), Some(v)) = (x.preimage(ambient_point)?, y.preimage(ambient_point)?) else {
        return Err(Error::NotClassical("the point is not on both submanifolds".into()));
    };
    let mut coordinates = u;
    coordinates.extend(v);
    // New coordinates from the fibration kernels start at zero; with plain
    // ambient spaces there are none.
    coordinates.resize(hfp.chart.dim(), Q::zero());
    if !is_classical_point(&hfp.chart, &coordinates)? {
        return Err(Error::NotClassical("the lifted point is not a classical point of the intersection".into()));
    }
    let tc = tangent_complex(&hfp.chart, &coordinates)?;
    Ok(IntersectionPoint { cohomology: complex_cohomology(&tc), coordinates })
}

#[cfg(test)]
mod tests;
