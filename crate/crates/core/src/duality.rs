//! Duals of affine spaces.
//!
//! * [`DualElement`]: an affine function `x ↦ ⟨w, x⟩ + c` (an element of the
//!   vector dual `A†`), stored in reference-chart coordinates.
//! * [`HullPoint`]: an element `(z, λ)` of the vector hull `Â = (A†)*`;
//!   points of `A` sit at weight 1, model vectors at weight 0.
//! * [`SpecialAffineSpace`] and [`SpecialDual`]: a space with a distinguished
//!   model vector `v` and its special dual `A# = {φ ∈ A† : φ_V(v) = 1}`.
//! * [`SpecialDualChart`]: coordinates on `A#` used by the bracket
//!   constructions, with `ι†`/`ι#` and the section ↔ element identification.
//!
//! Orientation convention: the fundamental field of the translation action
//! `a ↦ a + t v` is `χ = -v` (fundamental fields generate `exp(-tY)`), and
//! adapted fibre coordinates satisfy `∂_s = -χ`, so `s` increases along `v`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::affine::{AffineError, AffineSpaceSpec};
use crate::symexpr::{Expr, ExprError};

/// Sign relating the fundamental vector field of the translation action to
/// the distinguished vector: `χ = FUNDAMENTAL_FIELD_SIGN · v`.
pub const FUNDAMENTAL_FIELD_SIGN: f64 = -1.0;

/// Probe points used to decide whether an expression is affine in the fibre.
const AFFINITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DualityError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("distinguished vector must be non-zero")]
    ZeroDistinguished,
    #[error("section depends on the fibre coordinate `{0}`")]
    SectionDependsOnFiber(String),
    #[error("section is not affine in the fibre coordinate `{0}`")]
    NotAffine(String),
    #[error("element does not satisfy the special-dual constraint (residual {0:e})")]
    NotSpecial(f64),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Affine function `x ↦ ⟨w, x⟩ + c` on an `n`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct DualElement {
    pub w: DVector<f64>,
    pub c: f64,
}

/// Element `(z, λ)` of the vector hull.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPoint {
    pub z: DVector<f64>,
    pub weight: f64,
}

impl DualElement {
    pub fn new(w: DVector<f64>, c: f64) -> Self {
        Self { w, c }
    }

    /// The constant function `1_A`.
    pub fn one(n: usize) -> Self {
        Self {
            w: DVector::zeros(n),
            c: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.w.dot(x) + self.c
    }

    /// Linear part applied to a model vector.
    pub fn eval_linear(&self, u: &DVector<f64>) -> f64 {
        self.w.dot(u)
    }

    /// Coefficients of the same function in another chart of `space`.
    pub fn in_chart(&self, space: &AffineSpaceSpec, chart: &str) -> Result<DualElement, DualityError> {
        let m = space.transition_matrix(chart)?;
        let b = space.transition_offset(chart)?;
        Ok(DualElement {
            w: m.transpose() * &self.w,
            c: self.w.dot(b) + self.c,
        })
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            w: &self.w * k,
            c: self.c * k,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            w: &self.w + &other.w,
            c: self.c + other.c,
        }
    }
}

impl HullPoint {
    pub fn new(z: DVector<f64>, weight: f64) -> Self {
        Self { z, weight }
    }

    pub fn embed_point(x: DVector<f64>) -> Self {
        Self { z: x, weight: 1.0 }
    }

    pub fn embed_vector(v: DVector<f64>) -> Self {
        Self { z: v, weight: 0.0 }
    }

    /// Reference-chart hull coordinates of an element written in `chart`.
    pub fn from_chart(space: &AffineSpaceSpec, chart: &str, z: DVector<f64>, weight: f64) -> Result<Self, DualityError> {
        let m = space.transition_matrix(chart)?;
        let b = space.transition_offset(chart)?;
        Ok(Self {
            z: m * z + b * weight,
            weight,
        })
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            z: &self.z * k,
            weight: self.weight * k,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            z: &self.z + &other.z,
            weight: self.weight + other.weight,
        }
    }
}

/// `⟨(z, λ), (w, c)⟩ = ⟨w, z⟩ + c λ`.
pub fn pair(h: &HullPoint, d: &DualElement) -> Result<f64, DualityError> {
    if h.z.len() != d.w.len() {
        return Err(DualityError::Dimension {
            expected: d.w.len(),
            found: h.z.len(),
        });
    }
    Ok(d.w.dot(&h.z) + d.c * h.weight)
}

/// Dimension of `A†` as a vector space, computed as the rank of the
/// evaluation matrix of the coordinate functions and `1_A` on an affine
/// basis of `A`.
pub fn dual_dimension(space: &AffineSpaceSpec) -> usize {
    let n = space.dim();
    let mut eval = DMatrix::zeros(n + 1, n + 1);
    for row in 0..=n {
        let mut pt = DVector::zeros(n);
        if row > 0 {
            pt[row - 1] = 1.0;
        }
        for col in 0..=n {
            let f = if col < n {
                let mut w = DVector::zeros(n);
                w[col] = 1.0;
                DualElement::new(w, 0.0)
            } else {
                DualElement::one(n)
            };
            eval[(row, col)] = f.eval(&pt);
        }
    }
    eval.rank(1e-12)
}

/// Affine space whose model carries a distinguished non-zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialAffineSpace {
    pub space: AffineSpaceSpec,
    /// Distinguished vector in reference-chart components.
    pub v: DVector<f64>,
}

/// Description of the special dual `A#` of a [`SpecialAffineSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialDual {
    pub v: DVector<f64>,
    /// Particular element of `A#`.
    pub particular: DualElement,
    /// Basis of the model of `A#`; its last element is `1_A`.
    pub model_basis: Vec<DualElement>,
    pub one: DualElement,
    pub pivot: usize,
}

fn pivot_of(v: &DVector<f64>) -> usize {
    v.iamax()
}

impl SpecialAffineSpace {
    pub fn new(space: AffineSpaceSpec, v: DVector<f64>) -> Result<Self, DualityError> {
        if v.len() != space.dim() {
            return Err(DualityError::Dimension {
                expected: space.dim(),
                found: v.len(),
            });
        }
        if v.norm() == 0.0 {
            return Err(DualityError::ZeroDistinguished);
        }
        Ok(Self { space, v })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Fundamental vector field of the translation action, in reference components.
    pub fn fundamental_field(&self) -> DVector<f64> {
        &self.v * FUNDAMENTAL_FIELD_SIGN
    }

    /// Adapted coordinates on `AV(A)`.
    pub fn av_chart(&self) -> AvChart {
        AvChart {
            v: self.v.clone(),
            pivot: pivot_of(&self.v),
        }
    }

    pub fn special_dual(&self) -> SpecialDual {
        special_dual(self)
    }

    pub fn double_dual(&self) -> DoubleDual {
        DoubleDual {
            v: self.v.clone(),
            pivot: pivot_of(&self.v),
        }
    }
}

/// `A# = Aff(A, I)`, as an affine subspace of `A†`.
pub fn special_dual(s: &SpecialAffineSpace) -> SpecialDual {
    let n = s.dim();
    let v = &s.v;
    let pivot = pivot_of(v);
    let particular = DualElement::new(v / v.norm_squared(), 0.0);
    let mut model_basis = Vec::with_capacity(n);
    for i in (0..n).filter(|&i| i != pivot) {
        // e_i - (v_i / v_k) e_k annihilates v
        let mut w = DVector::zeros(n);
        w[i] = 1.0;
        w[pivot] = -v[i] / v[pivot];
        model_basis.push(DualElement::new(w, 0.0));
    }
    model_basis.push(DualElement::one(n));
    SpecialDual {
        v: v.clone(),
        particular,
        model_basis,
        one: DualElement::one(n),
        pivot,
    }
}

impl SpecialDual {
    /// Dimension of `A#` as an affine space.
    pub fn dim(&self) -> usize {
        self.model_basis.len()
    }

    pub fn constraint_residual(&self, d: &DualElement) -> f64 {
        d.w.dot(&self.v) - 1.0
    }

    pub fn contains(&self, d: &DualElement) -> bool {
        self.constraint_residual(d).abs() < 1e-12
    }

    pub fn is_model(&self, d: &DualElement) -> bool {
        d.w.dot(&self.v).abs() < 1e-12
    }

    /// Coordinates `(w_i for i ≠ pivot, c)` of an element of `A#`.
    pub fn coords(&self, d: &DualElement) -> Result<DVector<f64>, DualityError> {
        let r = self.constraint_residual(d);
        if r.abs() > 1e-12 {
            return Err(DualityError::NotSpecial(r));
        }
        let n = self.v.len();
        let mut out: Vec<f64> = (0..n).filter(|&i| i != self.pivot).map(|i| d.w[i]).collect();
        out.push(d.c);
        Ok(DVector::from_vec(out))
    }

    pub fn element(&self, coords: &DVector<f64>) -> Result<DualElement, DualityError> {
        let n = self.v.len();
        if coords.len() != n {
            return Err(DualityError::Dimension {
                expected: n,
                found: coords.len(),
            });
        }
        let mut w = DVector::zeros(n);
        let mut acc = 0.0;
        for (slot, i) in (0..n).filter(|&i| i != self.pivot).enumerate() {
            w[i] = coords[slot];
            acc += coords[slot] * self.v[i];
        }
        w[self.pivot] = (1.0 - acc) / self.v[self.pivot];
        Ok(DualElement::new(w, coords[n - 1]))
    }
}

/// The canonical identification `A ≅ (A#)#`.
///
/// Elements of `(A#)#` are written as [`DualElement`]s on `A#` in the
/// coordinates of [`SpecialDual::coords`]; the distinguished vector of `A#`
/// (which is `1_A`) is the last coordinate direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleDual {
    v: DVector<f64>,
    pivot: usize,
}

impl DoubleDual {
    fn n(&self) -> usize {
        self.v.len()
    }

    /// Evaluation at `a`, restricted to `A#`.
    pub fn to_double(&self, a: &DVector<f64>) -> DualElement {
        let (n, k) = (self.n(), self.pivot);
        let mut w: Vec<f64> = (0..n).filter(|&i| i != k).map(|i| a[i] - self.v[i] * a[k] / self.v[k]).collect();
        w.push(1.0);
        DualElement::new(DVector::from_vec(w), a[k] / self.v[k])
    }

    pub fn from_double(&self, d: &DualElement) -> Result<DVector<f64>, DualityError> {
        let n = self.n();
        if d.w.len() != n {
            return Err(DualityError::Dimension {
                expected: n,
                found: d.w.len(),
            });
        }
        let r = d.w[n - 1] - 1.0;
        if r.abs() > 1e-12 {
            return Err(DualityError::NotSpecial(r));
        }
        Ok(self.reconstruct(d))
    }

    fn reconstruct(&self, d: &DualElement) -> DVector<f64> {
        let (n, k) = (self.n(), self.pivot);
        let mut a = DVector::zeros(n);
        a[k] = d.c * self.v[k];
        for (slot, i) in (0..n).filter(|&i| i != k).enumerate() {
            a[i] = d.w[slot] + self.v[i] * d.c;
        }
        a
    }

    /// Linear part of the identification: model vectors of `A` to model
    /// elements of `(A#)#`.
    pub fn vector_to_double(&self, u: &DVector<f64>) -> DualElement {
        let (n, k) = (self.n(), self.pivot);
        let mut w: Vec<f64> = (0..n).filter(|&i| i != k).map(|i| u[i] - self.v[i] * u[k] / self.v[k]).collect();
        w.push(0.0);
        DualElement::new(DVector::from_vec(w), u[k] / self.v[k])
    }

    pub fn vector_from_double(&self, d: &DualElement) -> Result<DVector<f64>, DualityError> {
        let n = self.n();
        if d.w.len() != n {
            return Err(DualityError::Dimension {
                expected: n,
                found: d.w.len(),
            });
        }
        if d.w[n - 1].abs() > 1e-12 {
            return Err(DualityError::NotSpecial(d.w[n - 1]));
        }
        Ok(self.reconstruct(d))
    }

    /// Distinguished vector of `(A#)#`: the constant function 1 on `A#`.
    pub fn distinguished(&self) -> DualElement {
        DualElement::one(self.n())
    }
}

/// Adapted coordinates `(x, s)` on `AV(A)`: `x` on the quotient `A/⟨v⟩`,
/// `s` along `v` with `∂_s = -χ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AvChart {
    v: DVector<f64>,
    pivot: usize,
}

impl AvChart {
    pub fn to_av(&self, a: &DVector<f64>) -> (DVector<f64>, f64) {
        let (n, k) = (self.v.len(), self.pivot);
        let s = a[k] / self.v[k];
        let x = DVector::from_iterator(n - 1, (0..n).filter(|&i| i != k).map(|i| a[i] - self.v[i] * s));
        (x, s)
    }

    pub fn from_av(&self, x: &DVector<f64>, s: f64) -> DVector<f64> {
        let (n, k) = (self.v.len(), self.pivot);
        let mut a = &self.v * s;
        for (slot, i) in (0..n).filter(|&i| i != k).enumerate() {
            a[i] += x[slot];
        }
        a
    }

    /// Direction of `∂_s` in `A`-components.
    pub fn fiber_direction(&self) -> DVector<f64> {
        &self.v * -FUNDAMENTAL_FIELD_SIGN
    }
}

/// `F_σ(x, s) = s - σ(x)`: the affine function with `χ(F_σ) = -1` and
/// `F_σ ∘ σ = 0`.
pub fn f_of_section(sigma: &Expr, s_var: &str) -> Result<Expr, DualityError> {
    if sigma.depends_on(s_var) {
        return Err(DualityError::SectionDependsOnFiber(s_var.to_string()));
    }
    Ok(Expr::var(s_var) - sigma.clone())
}

/// `χ(F)` for a function in adapted coordinates.
pub fn chi_derivative(f: &Expr, s_var: &str) -> Expr {
    -f.diff(s_var)
}

/// Coordinates on `A#` for a bundle with frame `{e_i}` and distinguished
/// section `v = v^i e_i`: full dual coordinates `w_1..w_n, c`; the pivot
/// `w_k` is solved from `⟨w, v⟩ = 1`, the remaining `w_i` are coordinates on
/// `A#/⟨1_A⟩`, and `c` is the adapted fibre coordinate of `AV(A#)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialDualChart {
    v: Vec<Expr>,
    pivot: usize,
    w_names: Vec<String>,
    c_name: String,
}

impl SpecialDualChart {
    /// The pivot is the constant component of largest magnitude, or the
    /// first structurally non-zero component if none is constant.
    pub fn new(v: Vec<Expr>, w_names: Vec<String>, c_name: impl Into<String>) -> Result<Self, DualityError> {
        if v.len() != w_names.len() {
            return Err(DualityError::Dimension {
                expected: v.len(),
                found: w_names.len(),
            });
        }
        let pivot = v
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_constant().filter(|c| *c != 0.0).map(|c| (i, c.abs())))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .or_else(|| v.iter().position(|e| !e.is_zero()))
            .ok_or(DualityError::ZeroDistinguished)?;
        Ok(Self {
            v,
            pivot,
            w_names,
            c_name: c_name.into(),
        })
    }

    pub fn rank(&self) -> usize {
        self.v.len()
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn distinguished(&self) -> &[Expr] {
        &self.v
    }

    pub fn c_name(&self) -> &str {
        &self.c_name
    }

    /// Coordinate names on `A#/⟨1_A⟩`.
    pub fn quotient_names(&self) -> Vec<String> {
        self.w_names
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.pivot)
            .map(|(_, n)| n.clone())
            .collect()
    }

    /// `w_k` as a function of the quotient coordinates.
    pub fn solved_pivot(&self) -> Expr {
        let rest: Expr = (0..self.rank())
            .filter(|&i| i != self.pivot)
            .map(|i| Expr::var(&self.w_names[i]) * self.v[i].clone())
            .sum();
        (Expr::one() - rest) / self.v[self.pivot].clone()
    }

    /// `ι†_X`: the linear function `(w, c) ↦ ⟨w, X⟩` on `A†`.
    pub fn iota_dagger(&self, x: &[Expr]) -> Result<Expr, DualityError> {
        self.check_len(x.len())?;
        Ok(x.iter()
            .zip(&self.w_names)
            .map(|(xi, wi)| Expr::var(wi) * xi.clone())
            .sum())
    }

    /// `ι#_X`: `ι†_X` restricted to `A#` and descended to `A#/⟨1_A⟩`.
    pub fn iota_sharp(&self, x: &[Expr]) -> Result<Expr, DualityError> {
        let dagger = self.iota_dagger(x)?;
        Ok(dagger.substitute(&self.w_names[self.pivot], &self.solved_pivot()))
    }

    /// Element `a` of `A ≅ (A#)#` (frame components relative to the
    /// reference section) with `F_σ = s - σ` equal to evaluation at `a`.
    /// `σ` must be affine in the quotient coordinates.
    pub fn element_of_section(&self, sigma: &Expr, probes: &[BTreeMap<String, f64>]) -> Result<Vec<Expr>, DualityError> {
        let q = self.quotient_names();
        if sigma.depends_on(&self.c_name) {
            return Err(DualityError::SectionDependsOnFiber(self.c_name.clone()));
        }
        let zero: BTreeMap<String, Expr> = q.iter().map(|n| (n.clone(), Expr::zero())).collect();
        let slopes: Vec<Expr> = q.iter().map(|n| sigma.diff(n)).collect();
        for (name, slope) in q.iter().zip(&slopes) {
            for other in &q {
                let second = slope.diff(other);
                if second.is_zero() {
                    continue;
                }
                for p in probes {
                    if second.eval(p)?.abs() > AFFINITY_TOL {
                        return Err(DualityError::NotAffine(name.clone()));
                    }
                }
            }
        }
        let base = sigma.substitute_all(&zero);
        let slopes: Vec<Expr> = slopes.iter().map(|s| s.substitute_all(&zero)).collect();
        let mut a: Vec<Expr> = self.v.iter().map(|vi| -(vi.clone() * base.clone())).collect();
        for (slot, i) in (0..self.rank()).filter(|&i| i != self.pivot).enumerate() {
            a[i] = a[i].clone() - slopes[slot].clone();
        }
        Ok(a)
    }

    fn check_len(&self, len: usize) -> Result<(), DualityError> {
        if len == self.rank() {
            Ok(())
        } else {
            Err(DualityError::Dimension {
                expected: self.rank(),
                found: len,
            })
        }
    }
}

/// Free-function form of [`SpecialDualChart::iota_sharp`].
pub fn iota_sharp(x: &[Expr], chart: &SpecialDualChart) -> Result<Expr, DualityError> {
    chart.iota_sharp(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse_free;
    use nalgebra::dvector;

    fn special(n: usize, v: DVector<f64>) -> SpecialAffineSpace {
        SpecialAffineSpace::new(AffineSpaceSpec::new("A", n, "ref"), v).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let h = HullPoint::new(dvector![1.0, 0.0], 1.0);
        let d = DualElement::new(dvector![2.0, 3.0], 5.0);
        assert_eq!(pair(&h, &d).unwrap(), 7.0);
        let one = DualElement::one(2);
        assert_eq!(pair(&HullPoint::embed_point(dvector![4.0, -9.0]), &one).unwrap(), 1.0);
        assert_eq!(pair(&HullPoint::embed_vector(dvector![4.0, -9.0]), &one).unwrap(), 0.0);
        assert!(matches!(
            pair(&HullPoint::embed_point(dvector![1.0]), &one),
            Err(DualityError::Dimension { .. })
        ));
    }

    #[test]
    fn pairing_is_chart_invariant() {
        let space = AffineSpaceSpec::new("A", 2, "ref")
            .with_chart("B", DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), dvector![3.0, -1.0])
            .unwrap();
        let d = DualElement::new(dvector![0.5, -2.0], 1.5);
        let (zc, lam) = (dvector![0.3, 0.9], 1.0);
        let h = HullPoint::from_chart(&space, "B", zc.clone(), lam).unwrap();
        let dc = d.in_chart(&space, "B").unwrap();
        let lhs = pair(&h, &d).unwrap();
        let rhs = dc.w.dot(&zc) + dc.c * lam;
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn special_dual_of_line() {
        let sd = special(1, dvector![1.0]).special_dual();
        assert_eq!(sd.dim(), 1);
        assert!(sd.contains(&DualElement::new(dvector![1.0], 7.0)));
        assert!(!sd.contains(&DualElement::new(dvector![2.0], 0.0)));
        assert_eq!(sd.model_basis, vec![DualElement::one(1)]);
        assert!(sd.is_model(&sd.one));
        assert!(!sd.contains(&sd.one));
    }

    #[test]
    fn special_dual_of_plane() {
        let sd = special(2, dvector![0.0, 1.0]).special_dual();
        assert_eq!(sd.dim(), 2);
        assert_eq!(sd.pivot, 1);
        assert!(sd.contains(&DualElement::new(dvector![-4.0, 1.0], 2.0)));
        for m in &sd.model_basis {
            assert!(sd.is_model(m));
        }
        let coords = sd.coords(&DualElement::new(dvector![-4.0, 1.0], 2.0)).unwrap();
        assert_eq!(coords, dvector![-4.0, 2.0]);
        assert_eq!(sd.element(&coords).unwrap(), DualElement::new(dvector![-4.0, 1.0], 2.0));
    }

    #[test]
    fn double_dual_origin_and_distinguished() {
        let s = special(3, dvector![0.5, -2.0, 1.0]);
        let dd = s.double_dual();
        let origin = DVector::zeros(3);
        assert_eq!(dd.from_double(&dd.to_double(&origin)).unwrap(), origin);
        assert_eq!(dd.vector_to_double(&s.v), dd.distinguished());
        let back = dd.vector_from_double(&dd.distinguished()).unwrap();
        assert!((back - &s.v).amax() < 1e-15);
    }

    #[test]
    fn double_dual_is_evaluation() {
        let s = special(3, dvector![0.5, -2.0, 1.0]);
        let sd = s.special_dual();
        let dd = s.double_dual();
        let a = dvector![0.7, 1.1, -0.3];
        let ev = dd.to_double(&a);
        let phi = DualElement::new(dvector![0.2, -0.1, 0.7], 4.0);
        assert!(sd.contains(&phi));
        let theta = sd.coords(&phi).unwrap();
        assert!((ev.eval(&theta) - phi.eval(&a)).abs() < 1e-14);
    }

    #[test]
    fn av_chart_orientation() {
        let s = special(2, dvector![0.0, 2.0]);
        let chart = s.av_chart();
        let a = dvector![1.0, 3.0];
        let (x, s0) = chart.to_av(&a);
        let (x1, s1) = chart.to_av(&(&a + &s.v));
        assert_eq!(x, x1);
        assert_eq!(s1 - s0, 1.0);
        assert_eq!(chart.from_av(&x, s0), a);
        assert_eq!(chart.fiber_direction(), -s.fundamental_field());
    }

    #[test]
    fn f_of_section_examples() {
        let f = f_of_section(&parse_free("x^2").unwrap(), "s").unwrap();
        assert_eq!(f.eval(&[("x", 2.0), ("s", 4.0)]).unwrap(), 0.0);
        assert_eq!(f_of_section(&Expr::zero(), "s").unwrap(), Expr::var("s"));
        let g = f_of_section(&parse_free("3*x + 1").unwrap(), "s").unwrap();
        assert_eq!(g.eval(&[("x", 1.0), ("s", 5.0)]).unwrap(), 1.0);
        assert_eq!(chi_derivative(&g, "s"), Expr::num(-1.0));
        assert_eq!(
            f_of_section(&parse_free("x*s").unwrap(), "s"),
            Err(DualityError::SectionDependsOnFiber("s".into()))
        );
    }

    fn chart2() -> SpecialDualChart {
        SpecialDualChart::new(vec![Expr::zero(), Expr::one()], vec!["w1".into(), "w2".into()], "c").unwrap()
    }

    #[test]
    fn iota_sharp_examples() {
        let ch = chart2();
        let v: Vec<Expr> = ch.distinguished().to_vec();
        assert_eq!(ch.iota_sharp(&v).unwrap(), Expr::one());
        assert!(ch.iota_sharp(&[Expr::zero(), Expr::zero()]).unwrap().is_zero());
        assert_eq!(ch.iota_sharp(&[Expr::one(), Expr::zero()]).unwrap(), Expr::var("w1"));
        assert!(!ch.iota_dagger(&[Expr::var("x"), Expr::one()]).unwrap().depends_on("c"));
    }

    #[test]
    fn element_of_section_rejects_non_affine() {
        let ch = chart2();
        let probes = vec![BTreeMap::from([("w1".to_string(), 0.3), ("x".to_string(), 1.0)])];
        let bad = parse_free("w1^2").unwrap();
        assert_eq!(ch.element_of_section(&bad, &probes), Err(DualityError::NotAffine("w1".into())));
        let a = ch.element_of_section(&parse_free("x*w1 + 2").unwrap(), &probes).unwrap();
        assert_eq!(a[0].eval(&[("x", 3.0)]).unwrap(), -3.0);
        assert_eq!(a[1], Expr::num(-2.0));
    }
}
