//! Finite-dimensional affine spaces with explicit charts.
//!
//! A space has a reference chart and any number of secondary charts, each
//! related to the reference by an invertible affine transition
//! `x_ref = M x_chart + b`. Points and model vectors remember the chart they
//! are written in; differences and map applications convert to the reference
//! chart first, so results do not depend on which chart the inputs used.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

/// Identities that hold by construction are checked at this tolerance.
pub const CONSTRUCTION_TOL: f64 = 1e-12;

/// Transitions whose reciprocal condition number falls below this are rejected.
const MIN_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AffineError {
    #[error("chart `{chart}` is not defined on space `{space}`")]
    UnknownChart { space: String, chart: String },
    #[error("point belongs to space `{found}`, expected `{expected}`")]
    SpaceMismatch { expected: String, found: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("transition for chart `{0}` is singular or ill-conditioned")]
    Singular(String),
    #[error("chart `{0}` defined twice")]
    DuplicateChart(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Transition {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
    inverse: DMatrix<f64>,
}

/// An affine space of dimension `n`, realized by charts.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSpaceSpec {
    name: String,
    dim: usize,
    reference: String,
    charts: BTreeMap<String, Transition>,
}

/// A point written in one of the space's charts.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePoint {
    pub space: String,
    pub chart: String,
    pub coords: DVector<f64>,
}

/// An element of the model vector space, written in a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec {
    pub space: String,
    pub chart: String,
    pub components: DVector<f64>,
}

fn rcond(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

impl AffineSpaceSpec {
    /// A space with only its reference chart.
    pub fn new(name: impl Into<String>, dim: usize, reference_chart: impl Into<String>) -> Self {
        let reference = reference_chart.into();
        let mut charts = BTreeMap::new();
        charts.insert(
            reference.clone(),
            Transition {
                matrix: DMatrix::identity(dim, dim),
                offset: DVector::zeros(dim),
                inverse: DMatrix::identity(dim, dim),
            },
        );
        Self {
            name: name.into(),
            dim,
            reference,
            charts,
        }
    }

    /// Register a chart with transition `x_ref = matrix * x_chart + offset`.
    pub fn add_chart(
        &mut self,
        chart: impl Into<String>,
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    ) -> Result<(), AffineError> {
        let chart = chart.into();
        if self.charts.contains_key(&chart) {
            return Err(AffineError::DuplicateChart(chart));
        }
        if matrix.nrows() != self.dim || matrix.ncols() != self.dim {
            return Err(AffineError::Dimension {
                expected: self.dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        if offset.len() != self.dim {
            return Err(AffineError::Dimension {
                expected: self.dim,
                found: offset.len(),
            });
        }
        if self.dim > 0 && rcond(&matrix) < MIN_RCOND {
            return Err(AffineError::Singular(chart));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| AffineError::Singular(chart.clone()))?;
        let round_trip = (&inverse * &matrix - DMatrix::identity(self.dim, self.dim)).amax();
        if round_trip > CONSTRUCTION_TOL {
            return Err(AffineError::Singular(chart));
        }
        self.charts.insert(chart, Transition { matrix, offset, inverse });
        Ok(())
    }

    pub fn with_chart(mut self, chart: &str, matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self, AffineError> {
        self.add_chart(chart, matrix, offset)?;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reference_chart(&self) -> &str {
        &self.reference
    }

    pub fn charts(&self) -> impl Iterator<Item = &str> {
        self.charts.keys().map(String::as_str)
    }

    fn transition(&self, chart: &str) -> Result<&Transition, AffineError> {
        self.charts.get(chart).ok_or_else(|| AffineError::UnknownChart {
            space: self.name.clone(),
            chart: chart.to_string(),
        })
    }

    /// Linear part of the transition chart → reference.
    pub fn transition_matrix(&self, chart: &str) -> Result<&DMatrix<f64>, AffineError> {
        Ok(&self.transition(chart)?.matrix)
    }

    pub fn transition_offset(&self, chart: &str) -> Result<&DVector<f64>, AffineError> {
        Ok(&self.transition(chart)?.offset)
    }

    fn check_dim(&self, len: usize) -> Result<(), AffineError> {
        if len == self.dim {
            Ok(())
        } else {
            Err(AffineError::Dimension {
                expected: self.dim,
                found: len,
            })
        }
    }

    fn check_space(&self, space: &str) -> Result<(), AffineError> {
        if space == self.name {
            Ok(())
        } else {
            Err(AffineError::SpaceMismatch {
                expected: self.name.clone(),
                found: space.to_string(),
            })
        }
    }

    pub fn point(&self, chart: &str, coords: DVector<f64>) -> Result<AffinePoint, AffineError> {
        self.transition(chart)?;
        self.check_dim(coords.len())?;
        Ok(AffinePoint {
            space: self.name.clone(),
            chart: chart.to_string(),
            coords,
        })
    }

    pub fn vector(&self, chart: &str, components: DVector<f64>) -> Result<TangentVec, AffineError> {
        self.transition(chart)?;
        self.check_dim(components.len())?;
        Ok(TangentVec {
            space: self.name.clone(),
            chart: chart.to_string(),
            components,
        })
    }

    pub fn to_reference(&self, p: &AffinePoint) -> Result<DVector<f64>, AffineError> {
        self.check_space(&p.space)?;
        let t = self.transition(&p.chart)?;
        Ok(&t.matrix * &p.coords + &t.offset)
    }

    pub fn vector_to_reference(&self, v: &TangentVec) -> Result<DVector<f64>, AffineError> {
        self.check_space(&v.space)?;
        Ok(&self.transition(&v.chart)?.matrix * &v.components)
    }

    /// Re-express a point in another chart.
    pub fn convert(&self, p: &AffinePoint, chart: &str) -> Result<AffinePoint, AffineError> {
        let x = self.to_reference(p)?;
        let t = self.transition(chart)?;
        self.point(chart, &t.inverse * (x - &t.offset))
    }

    /// Model vectors transform by the linear part only.
    pub fn convert_vector(&self, v: &TangentVec, chart: &str) -> Result<TangentVec, AffineError> {
        let x = self.vector_to_reference(v)?;
        let t = self.transition(chart)?;
        self.vector(chart, &t.inverse * x)
    }

    /// `p - q`: the unique model vector carrying `q` to `p`. Returned in the
    /// shared chart when both points use the same one, in the reference chart
    /// otherwise.
    pub fn difference(&self, p: &AffinePoint, q: &AffinePoint) -> Result<TangentVec, AffineError> {
        self.check_space(&p.space)?;
        self.check_space(&q.space)?;
        if p.chart == q.chart {
            self.check_dim(p.coords.len())?;
            return self.vector(&p.chart, &p.coords - &q.coords);
        }
        let d = self.to_reference(p)? - self.to_reference(q)?;
        self.vector(&self.reference, d)
    }

    /// `q + u`, in the chart of `q`.
    pub fn translate(&self, q: &AffinePoint, u: &TangentVec) -> Result<AffinePoint, AffineError> {
        let u = self.convert_vector(u, &q.chart)?;
        self.point(&q.chart, &q.coords + u.components)
    }

    /// Norm of `α(a3,a2) + α(a2,a1) + α(a1,a3)`, computed in reference coordinates.
    pub fn cocycle_check(&self, a1: &AffinePoint, a2: &AffinePoint, a3: &AffinePoint) -> Result<f64, AffineError> {
        let d32 = self.vector_to_reference(&self.difference(a3, a2)?)?;
        let d21 = self.vector_to_reference(&self.difference(a2, a1)?)?;
        let d13 = self.vector_to_reference(&self.difference(a1, a3)?)?;
        Ok((d32 + d21 + d13).norm())
    }
}

/// An affine map between coordinate spaces, `x ↦ L x + b`, in reference charts.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self, AffineError> {
        if linear.nrows() != offset.len() {
            return Err(AffineError::Dimension {
                expected: linear.nrows(),
                found: offset.len(),
            });
        }
        Ok(Self { linear, offset })
    }

    pub fn translation(b: DVector<f64>) -> Self {
        let n = b.len();
        Self {
            linear: DMatrix::identity(n, n),
            offset: b,
        }
    }

    pub fn constant(domain_dim: usize, value: DVector<f64>) -> Self {
        Self {
            linear: DMatrix::zeros(value.len(), domain_dim),
            offset: value,
        }
    }

    pub fn domain_dim(&self) -> usize {
        self.linear.ncols()
    }

    pub fn codomain_dim(&self) -> usize {
        self.linear.nrows()
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// The linear part `φ_V`, with `φ(a + u) = φ(a) + φ_V(u)`.
    pub fn linear_part(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>, AffineError> {
        if x.len() != self.domain_dim() {
            return Err(AffineError::Dimension {
                expected: self.domain_dim(),
                found: x.len(),
            });
        }
        Ok(&self.linear * x + &self.offset)
    }

    pub fn apply_linear(&self, u: &DVector<f64>) -> Result<DVector<f64>, AffineError> {
        if u.len() != self.domain_dim() {
            return Err(AffineError::Dimension {
                expected: self.domain_dim(),
                found: u.len(),
            });
        }
        Ok(&self.linear * u)
    }

    /// Apply to a point of `domain` given in any chart; result in the
    /// codomain's reference chart.
    pub fn apply_point(&self, domain: &AffineSpaceSpec, p: &AffinePoint) -> Result<DVector<f64>, AffineError> {
        self.apply(&domain.to_reference(p)?)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap, AffineError> {
        if inner.codomain_dim() != self.domain_dim() {
            return Err(AffineError::Dimension {
                expected: self.domain_dim(),
                found: inner.codomain_dim(),
            });
        }
        AffineMap::new(&self.linear * &inner.linear, &self.linear * &inner.offset + &self.offset)
    }
}

/// `Φ(x, y) = C(x ⊗ y) + D x + E y + F` with values in `ℝ^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiAffineMap {
    /// One `n1 × n2` slice per output component.
    bilinear: Vec<DMatrix<f64>>,
    first: DMatrix<f64>,
    second: DMatrix<f64>,
    constant: DVector<f64>,
}

/// The partial linear parts of a bi-affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct BiAffineParts {
    map: BiAffineMap,
}

impl BiAffineMap {
    pub fn new(
        bilinear: Vec<DMatrix<f64>>,
        first: DMatrix<f64>,
        second: DMatrix<f64>,
        constant: DVector<f64>,
    ) -> Result<Self, AffineError> {
        let k = constant.len();
        let (n1, n2) = (first.ncols(), second.ncols());
        let dim_err = |expected, found| Err(AffineError::Dimension { expected, found });
        if bilinear.len() != k {
            return dim_err(k, bilinear.len());
        }
        if first.nrows() != k {
            return dim_err(k, first.nrows());
        }
        if second.nrows() != k {
            return dim_err(k, second.nrows());
        }
        for c in &bilinear {
            if c.nrows() != n1 {
                return dim_err(n1, c.nrows());
            }
            if c.ncols() != n2 {
                return dim_err(n2, c.ncols());
            }
        }
        Ok(Self {
            bilinear,
            first,
            second,
            constant,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.first.ncols(), self.second.ncols(), self.constant.len())
    }

    fn bilinear_at(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.bilinear.len(),
            self.bilinear.iter().map(|c| (x.transpose() * c * y)[(0, 0)]),
        )
    }

    fn check(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<(), AffineError> {
        let (n1, n2, _) = self.dims();
        if x.len() != n1 {
            return Err(AffineError::Dimension { expected: n1, found: x.len() });
        }
        if y.len() != n2 {
            return Err(AffineError::Dimension { expected: n2, found: y.len() });
        }
        Ok(())
    }

    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, AffineError> {
        self.check(x, y)?;
        Ok(self.bilinear_at(x, y) + &self.first * x + &self.second * y + &self.constant)
    }

    /// Split into `(Φ¹_V, Φ²_V, Φ_V)`.
    pub fn parts(&self) -> BiAffineParts {
        BiAffineParts { map: self.clone() }
    }
}

impl BiAffineParts {
    /// `Φ¹_V(u, y) = C(u ⊗ y) + D u`: linear in the first slot, affine in the second.
    pub fn first(&self, u: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, AffineError> {
        self.map.check(u, y)?;
        Ok(self.map.bilinear_at(u, y) + &self.map.first * u)
    }

    /// `Φ²_V(x, w) = C(x ⊗ w) + E w`.
    pub fn second(&self, x: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>, AffineError> {
        self.map.check(x, w)?;
        Ok(self.map.bilinear_at(x, w) + &self.map.second * w)
    }

    /// `Φ_V(u, w) = C(u ⊗ w)`.
    pub fn bilinear(&self, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>, AffineError> {
        self.map.check(u, w)?;
        Ok(self.map.bilinear_at(u, w))
    }

    pub fn bilinear_tensor(&self) -> &[DMatrix<f64>] {
        &self.map.bilinear
    }
}

/// Free-function form of [`AffineMap::linear_part`].
pub fn linear_part(map: &AffineMap) -> DMatrix<f64> {
    map.linear_part().clone()
}

/// Free-function form of [`BiAffineMap::parts`].
pub fn biaffine_parts(map: &BiAffineMap) -> BiAffineParts {
    map.parts()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn plane() -> AffineSpaceSpec {
        AffineSpaceSpec::new("A", 2, "ref")
            .with_chart("B", DMatrix::identity(2, 2), dvector![1.0, 1.0])
            .unwrap()
            .with_chart("C", DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]), dvector![0.5, -2.0])
            .unwrap()
    }

    #[test]
    fn difference_examples() {
        let a = plane();
        let p = a.point("ref", dvector![1.0, 2.0]).unwrap();
        let q = a.point("ref", dvector![0.0, 0.0]).unwrap();
        assert_eq!(a.difference(&p, &q).unwrap().components, dvector![1.0, 2.0]);
        assert_eq!(a.difference(&p, &p).unwrap().components, dvector![0.0, 0.0]);
        let pb = a.point("B", dvector![0.0, 0.0]).unwrap();
        assert_eq!(a.difference(&pb, &q).unwrap().components, dvector![1.0, 1.0]);
    }

    #[test]
    fn points_from_other_spaces_are_rejected() {
        let a = plane();
        let other = AffineSpaceSpec::new("Other", 2, "ref");
        let p = a.point("ref", dvector![1.0, 2.0]).unwrap();
        let q = other.point("ref", dvector![0.0, 0.0]).unwrap();
        assert!(matches!(a.difference(&p, &q), Err(AffineError::SpaceMismatch { .. })));
        assert!(matches!(a.point("nope", dvector![0.0, 0.0]), Err(AffineError::UnknownChart { .. })));
        assert!(matches!(a.point("ref", dvector![0.0]), Err(AffineError::Dimension { .. })));
    }

    #[test]
    fn singular_transition_rejected() {
        let mut a = AffineSpaceSpec::new("A", 2, "ref");
        let err = a.add_chart("S", DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]), dvector![0.0, 0.0]);
        assert_eq!(err, Err(AffineError::Singular("S".into())));
    }

    #[test]
    fn cocycle_equal_points_and_one_chart() {
        let a = plane();
        let p = a.point("C", dvector![0.3, 0.1]).unwrap();
        assert_eq!(a.cocycle_check(&p, &p, &p).unwrap(), 0.0);
        let p1 = a.point("ref", dvector![0.25, -1.0]).unwrap();
        let p2 = a.point("ref", dvector![3.5, 0.125]).unwrap();
        let p3 = a.point("ref", dvector![-2.0, 4.0]).unwrap();
        assert_eq!(a.cocycle_check(&p1, &p2, &p3).unwrap(), 0.0);
    }

    #[test]
    fn convert_round_trip() {
        let a = plane();
        let p = a.point("C", dvector![0.3, -0.7]).unwrap();
        let back = a.convert(&a.convert(&p, "B").unwrap(), "C").unwrap();
        assert!((back.coords - p.coords).amax() < 1e-14);
        let v = a.vector("C", dvector![1.0, 0.0]).unwrap();
        assert_eq!(a.convert_vector(&v, "ref").unwrap().components, dvector![2.0, -1.0]);
    }

    #[test]
    fn linear_part_examples() {
        let t = AffineMap::translation(dvector![3.0, -1.0]);
        assert_eq!(linear_part(&t), DMatrix::identity(2, 2));
        let c = AffineMap::constant(2, dvector![5.0]);
        assert_eq!(linear_part(&c), DMatrix::zeros(1, 2));
        let m = AffineMap::new(DMatrix::from_element(1, 1, 2.0), dvector![1.0]).unwrap();
        assert_eq!(linear_part(&m), DMatrix::from_element(1, 1, 2.0));
        assert_eq!(m.apply(&dvector![4.0]).unwrap(), dvector![9.0]);
    }

    #[test]
    fn biaffine_quadratic_example() {
        // Φ(x,y) = xy + x + y + 1
        let phi = BiAffineMap::new(
            vec![DMatrix::from_element(1, 1, 1.0)],
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            dvector![1.0],
        )
        .unwrap();
        let parts = biaffine_parts(&phi);
        let (u, w, x, y) = (dvector![2.0], dvector![-3.0], dvector![0.5], dvector![7.0]);
        assert_eq!(parts.bilinear(&u, &w).unwrap(), dvector![-6.0]);
        assert_eq!(parts.first(&u, &y).unwrap(), dvector![2.0 * 7.0 + 2.0]);
        assert_eq!(parts.second(&x, &w).unwrap(), dvector![0.5 * -3.0 - 3.0]);
    }

    #[test]
    fn biaffine_constant_has_zero_parts() {
        let phi = BiAffineMap::new(
            vec![DMatrix::zeros(2, 3)],
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 3),
            dvector![4.0],
        )
        .unwrap();
        let p = phi.parts();
        let (u, w) = (dvector![1.0, 2.0], dvector![3.0, 4.0, 5.0]);
        assert_eq!(p.first(&u, &w).unwrap(), dvector![0.0]);
        assert_eq!(p.second(&u, &w).unwrap(), dvector![0.0]);
        assert_eq!(p.bilinear(&u, &w).unwrap(), dvector![0.0]);
    }

    #[test]
    fn biaffine_shape_validation() {
        let bad = BiAffineMap::new(vec![DMatrix::zeros(2, 2)], DMatrix::zeros(1, 2), DMatrix::zeros(1, 3), dvector![0.0]);
        assert!(matches!(bad, Err(AffineError::Dimension { .. })));
    }
}
