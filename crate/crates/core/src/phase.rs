//! AV-bundles over a coordinate patch, the phase bundle `PZ`, differential
//! forms, the canonical Poisson bracket on `T*M`, and the aff-Poisson
//! bracket on sections of `T*M → T*M/⟨dt⟩`.
//!
//! `PZ` is kept in the trivialization given by a tagged section: a phase
//! point `𝐝σ(m)` in tag `σ₀` has momentum `p = d(σ − σ₀)(m)`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;

use crate::duality::f_of_section;
use crate::report::{Check, CheckReport, Worst};
use crate::sampling::Point;
use crate::symexpr::{Expr, ExprError};

pub const FIBER_CONSTANCY_TOL: f64 = 1e-9;
pub const REDUCTION_TOL: f64 = 1e-9;

/// Sign of the ℝ-action on the fibre coordinate of the extended bundle
/// `T*M × ℝ` used in affine reduction: the action moves `r` to `r − c`, so
/// that `(a, r) ↦ a − r dt` is equivariant.
pub const EXTENDED_ACTION_SIGN: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhaseError {
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("section `{0}` is already registered")]
    DuplicateSection(String),
    #[error("section depends on the fibre coordinate `{0}`")]
    SectionDependsOnFiber(String),
    #[error("{what}: expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("bracket is not constant along the fibres (residual {residual:e} at {witness})")]
    FiberConstancy { residual: f64, witness: String },
    #[error("AV-morphism must be affine in the fibre coordinate with non-vanishing slope")]
    NotAffineMorphism,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn dim_check(what: &'static str, expected: usize, found: usize) -> Result<(), PhaseError> {
    if expected == found {
        Ok(())
    } else {
        Err(PhaseError::Dimension { what, expected, found })
    }
}

/// Trivial AV-bundle `M × ℝ` with a registry of trivializing sections.
#[derive(Debug, Clone, PartialEq)]
pub struct AvBundle {
    base: Vec<String>,
    momenta: Vec<String>,
    fiber: String,
    sections: BTreeMap<String, Expr>,
    reference: Option<String>,
}

impl AvBundle {
    /// `base` are coordinates on `M`, `momenta` the matching coordinates on
    /// the fibres of `PZ`, `fiber` the coordinate along the AV fibre.
    pub fn new(base: Vec<String>, momenta: Vec<String>, fiber: &str) -> Result<Self, PhaseError> {
        dim_check("momenta", base.len(), momenta.len())?;
        Ok(Self {
            base,
            momenta,
            fiber: fiber.to_string(),
            sections: BTreeMap::new(),
            reference: None,
        })
    }

    /// Registers a section; the first one registered is the reference tag.
    pub fn register(&mut self, name: &str, sigma: Expr) -> Result<(), PhaseError> {
        if sigma.depends_on(&self.fiber) {
            return Err(PhaseError::SectionDependsOnFiber(self.fiber.clone()));
        }
        if self.sections.contains_key(name) {
            return Err(PhaseError::DuplicateSection(name.to_string()));
        }
        self.sections.insert(name.to_string(), sigma);
        self.reference.get_or_insert_with(|| name.to_string());
        Ok(())
    }

    pub fn with_section(mut self, name: &str, sigma: Expr) -> Result<Self, PhaseError> {
        self.register(name, sigma)?;
        Ok(self)
    }

    pub fn base(&self) -> &[String] {
        &self.base
    }

    pub fn momenta(&self) -> &[String] {
        &self.momenta
    }

    pub fn fiber(&self) -> &str {
        &self.fiber
    }

    pub fn reference(&self) -> Option<&str> {
        self.reference.as_deref()
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    pub fn section(&self, name: &str) -> Result<&Expr, PhaseError> {
        self.sections
            .get(name)
            .ok_or_else(|| PhaseError::UnknownSection(name.to_string()))
    }

    /// `σ₁ − σ₂`, a function on `M`.
    pub fn difference(&self, a: &str, b: &str) -> Result<Expr, PhaseError> {
        Ok((self.section(a)?.clone() - self.section(b)?.clone()).simplify())
    }

    /// Coordinates `(x, p)` on `PZ`.
    pub fn phase_vars(&self) -> Vec<String> {
        self.base.iter().chain(&self.momenta).cloned().collect()
    }

    fn gradient(&self, f: &Expr) -> Vec<Expr> {
        self.base.iter().map(|x| f.diff(x).simplify()).collect()
    }
}

/// A point of `PZ` written in the trivialization of a tagged section.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub m: Point,
    pub p: DVector<f64>,
    pub tag: String,
}

impl PhasePoint {
    /// Re-expresses the point in tag `to`: `p' = p + d(σ − σ')(m)`.
    pub fn retag(&self, bundle: &AvBundle, to: &str) -> Result<PhasePoint, PhaseError> {
        let shift = bundle.gradient(&bundle.difference(&self.tag, to)?);
        let mut p = self.p.clone();
        for (pi, e) in p.iter_mut().zip(&shift) {
            *pi += e.eval(&self.m)?;
        }
        Ok(PhasePoint {
            m: self.m.clone(),
            p,
            tag: to.to_string(),
        })
    }
}

/// `𝐝σ(m)` in tag `tag`, i.e. momentum `d(σ − σ_tag)(m)`.
pub fn bold_d(bundle: &AvBundle, sigma: &Expr, tag: &str, m: &Point) -> Result<PhasePoint, PhaseError> {
    if sigma.depends_on(&bundle.fiber) {
        return Err(PhaseError::SectionDependsOnFiber(bundle.fiber.clone()));
    }
    let diff = sigma.clone() - bundle.section(tag)?.clone();
    let p = bundle
        .gradient(&diff)
        .iter()
        .map(|e| e.eval(m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhasePoint {
        m: m.clone(),
        p: DVector::from_vec(p),
        tag: tag.to_string(),
    })
}

/// A section of `PZ`: covector field `α − dσ_tag` in the trivialization of
/// its tag.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOneForm {
    pub components: Vec<Expr>,
    pub tag: String,
}

impl AffineOneForm {
    /// `𝐝σ` as a section of `PZ`.
    pub fn of_section(bundle: &AvBundle, sigma: &Expr, tag: &str) -> Result<Self, PhaseError> {
        let diff = sigma.clone() - bundle.section(tag)?.clone();
        Ok(Self {
            components: bundle.gradient(&diff),
            tag: tag.to_string(),
        })
    }

    pub fn retag(&self, bundle: &AvBundle, to: &str) -> Result<Self, PhaseError> {
        let shift = bundle.gradient(&bundle.difference(&self.tag, to)?);
        Ok(Self {
            components: self
                .components
                .iter()
                .zip(&shift)
                .map(|(a, s)| (a.clone() + s.clone()).simplify())
                .collect(),
            tag: to.to_string(),
        })
    }
}

/// `dα := d(α − dσ)`, independent of the tag.
pub fn bold_d_oneform(bundle: &AvBundle, alpha: &AffineOneForm) -> Result<TwoForm, PhaseError> {
    dim_check("one-form", bundle.base.len(), alpha.components.len())?;
    Ok(exterior_derivative(&alpha.components, &bundle.base))
}

/// `Σ_{i<j} c_ij dx^i ∧ dx^j`; only `i < j` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    vars: Vec<String>,
    coeffs: BTreeMap<(usize, usize), Expr>,
}

impl TwoForm {
    pub fn zero(vars: Vec<String>) -> Self {
        Self {
            vars,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Adds `c dx^i ∧ dx^j` (any order of `i`, `j`).
    pub fn add_term(&mut self, i: usize, j: usize, c: Expr) {
        if i == j || c.is_zero() {
            return;
        }
        let (key, c) = if i < j { ((i, j), c) } else { ((j, i), -c) };
        let entry = self.coeffs.entry(key).or_insert_with(Expr::zero);
        *entry = (entry.clone() + c).simplify();
        if entry.is_zero() {
            self.coeffs.remove(&key);
        }
    }

    /// Coefficient of `dx^i ∧ dx^j`, antisymmetric in `(i, j)`.
    pub fn coeff(&self, i: usize, j: usize) -> Expr {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Expr::zero(),
            std::cmp::Ordering::Less => self.coeffs.get(&(i, j)).cloned().unwrap_or_else(Expr::zero),
            std::cmp::Ordering::Greater => -self.coeffs.get(&(j, i)).cloned().unwrap_or_else(Expr::zero),
        }
    }

    pub fn coeff_by_name(&self, a: &str, b: &str) -> Option<Expr> {
        let i = self.vars.iter().position(|v| v == a)?;
        let j = self.vars.iter().position(|v| v == b)?;
        Some(self.coeff(i, j))
    }

    /// True when every stored coefficient simplified to zero.
    pub fn is_structurally_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest `|c_ij(p)|` over the samples.
    pub fn max_abs(&self, samples: &[Point]) -> Result<f64, ExprError> {
        let mut m = 0.0_f64;
        for c in self.coeffs.values() {
            for p in samples {
                m = m.max(c.eval(p)?.abs());
            }
        }
        Ok(m)
    }

    /// Largest coefficient difference over the samples.
    pub fn max_deviation(&self, other: &TwoForm, samples: &[Point]) -> Result<f64, ExprError> {
        let n = self.vars.len();
        let mut m = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                let d = (self.coeff(i, j) - other.coeff(i, j)).simplify();
                if d.is_zero() {
                    continue;
                }
                for p in samples {
                    m = m.max(d.eval(p)?.abs());
                }
            }
        }
        Ok(m)
    }

    /// Pullback along `y^μ = map[μ](x)`, where `y` are this form's variables
    /// and `x` are `source`.
    pub fn pullback(&self, map: &[Expr], source: &[String]) -> TwoForm {
        let subs: BTreeMap<String, Expr> = self.vars.iter().cloned().zip(map.iter().cloned()).collect();
        let jac: Vec<Vec<Expr>> = map
            .iter()
            .map(|y| source.iter().map(|x| y.diff(x).simplify()).collect())
            .collect();
        let mut out = TwoForm::zero(source.to_vec());
        for (&(mu, nu), c) in &self.coeffs {
            let c = c.substitute_all(&subs);
            for a in 0..source.len() {
                for b in a + 1..source.len() {
                    let det = jac[mu][a].clone() * jac[nu][b].clone() - jac[mu][b].clone() * jac[nu][a].clone();
                    if !det.is_zero() {
                        out.add_term(a, b, c.clone() * det);
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for TwoForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .map(|(&(i, j), c)| format!("({c}) d{}^d{}", self.vars[i], self.vars[j]))
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

/// `d(α_j dx^j) = Σ_{i<j} (∂_i α_j − ∂_j α_i) dx^i ∧ dx^j`.
pub fn exterior_derivative(alpha: &[Expr], vars: &[String]) -> TwoForm {
    let mut out = TwoForm::zero(vars.to_vec());
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            out.add_term(i, j, alpha[j].diff(&vars[i]) - alpha[i].diff(&vars[j]));
        }
    }
    out
}

/// `ω_M = Σ dp_i ∧ dx^i` on coordinates `(x, p)`.
pub fn canonical_two_form(base: &[String], momenta: &[String]) -> TwoForm {
    let vars: Vec<String> = base.iter().chain(momenta).cloned().collect();
    let n = base.len();
    let mut w = TwoForm::zero(vars);
    for i in 0..n {
        w.add_term(n + i, i, Expr::one());
    }
    w
}

/// `ω_Z` on `PZ` (coordinates in the reference tag), computed as the
/// pullback of `ω_M` through the trivialization `I_{dσ}` of section `via`.
pub fn omega_z_via(bundle: &AvBundle, via: &str) -> Result<TwoForm, PhaseError> {
    let reference = bundle
        .reference()
        .ok_or_else(|| PhaseError::UnknownSection("<none registered>".into()))?;
    let shift = bundle.gradient(&bundle.difference(reference, via)?);
    let mut map: Vec<Expr> = bundle.base.iter().map(Expr::var).collect();
    map.extend(
        bundle
            .momenta
            .iter()
            .zip(&shift)
            .map(|(p, s)| (Expr::var(p) + s.clone()).simplify()),
    );
    let omega_m = canonical_two_form(&bundle.base, &bundle.momenta);
    Ok(omega_m.pullback(&map, &bundle.phase_vars()))
}

/// `ω_Z` through the reference section.
pub fn omega_z(bundle: &AvBundle) -> Result<TwoForm, PhaseError> {
    let reference = bundle
        .reference()
        .ok_or_else(|| PhaseError::UnknownSection("<none registered>".into()))?
        .to_string();
    omega_z_via(bundle, &reference)
}

/// Canonical Poisson bracket on `T*M`,
/// `{F, G} = Σ ∂F/∂p_i ∂G/∂x^i − ∂F/∂x^i ∂G/∂p_i`, so `{p, x} = 1`.
pub fn canonical_poisson(f: &Expr, g: &Expr, base: &[String], momenta: &[String]) -> Expr {
    base.iter()
        .zip(momenta)
        .map(|(x, p)| f.diff(p) * g.diff(x) - f.diff(x) * g.diff(p))
        .sum::<Expr>()
        .simplify()
}

/// Hamiltonian vector field `X_F = {F, ·}` in the order `(x, p)`:
/// `ẋ = ∂F/∂p`, `ṗ = −∂F/∂x`.
pub fn hamiltonian_vector_field(f: &Expr, base: &[String], momenta: &[String]) -> Vec<Expr> {
    let mut out: Vec<Expr> = momenta.iter().map(|p| f.diff(p).simplify()).collect();
    out.extend(base.iter().map(|x| (-f.diff(x)).simplify()));
    out
}

/// `T*M` for `M = Q × T`, with coordinates `(q, t, p, s)`: `s` is the
/// momentum conjugate to `t`, and the quotient `T*M/⟨dt⟩` drops it.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentSpacetime {
    space: Vec<String>,
    time: String,
    momenta: Vec<String>,
    energy: String,
}

impl CotangentSpacetime {
    pub fn new(space: Vec<String>, time: &str, momenta: Vec<String>, energy: &str) -> Result<Self, PhaseError> {
        dim_check("momenta", space.len(), momenta.len())?;
        Ok(Self {
            space,
            time: time.to_string(),
            momenta,
            energy: energy.to_string(),
        })
    }

    /// Coordinates `q_i, t, p_i, s` named `q`/`q1…`, `t`, `p`/`p1…`, `s`.
    pub fn standard(d: usize) -> Self {
        let (q, p) = if d == 1 {
            (vec!["q".to_string()], vec!["p".to_string()])
        } else {
            ((1..=d).map(|i| format!("q{i}")).collect(), (1..=d).map(|i| format!("p{i}")).collect())
        };
        Self::new(q, "t", p, "s").expect("equal lengths")
    }

    pub fn space(&self) -> &[String] {
        &self.space
    }

    pub fn time(&self) -> &str {
        &self.time
    }

    pub fn momenta(&self) -> &[String] {
        &self.momenta
    }

    pub fn energy(&self) -> &str {
        &self.energy
    }

    /// `(q, t)`.
    pub fn base(&self) -> Vec<String> {
        self.space.iter().cloned().chain(std::iter::once(self.time.clone())).collect()
    }

    /// `(p, s)`.
    pub fn all_momenta(&self) -> Vec<String> {
        self.momenta.iter().cloned().chain(std::iter::once(self.energy.clone())).collect()
    }

    /// Coordinates on the quotient: `(q, t, p)`.
    pub fn quotient_vars(&self) -> Vec<String> {
        let mut v = self.base();
        v.extend(self.momenta.iter().cloned());
        v
    }

    /// Coordinates on `T*M`: `(q, t, p, s)`.
    pub fn total_vars(&self) -> Vec<String> {
        let mut v = self.quotient_vars();
        v.push(self.energy.clone());
        v
    }

    pub fn poisson(&self, f: &Expr, g: &Expr) -> Expr {
        canonical_poisson(f, g, &self.base(), &self.all_momenta())
    }

    /// `F_σ = s − σ`.
    pub fn f_of(&self, sigma: &Expr) -> Result<Expr, PhaseError> {
        f_of_section(sigma, &self.energy).map_err(|_| PhaseError::SectionDependsOnFiber(self.energy.clone()))
    }

    /// `{σ, σ'}` defined by `{σ, σ'} ∘ ζ = {F_σ, F_σ'}`. The bracket on
    /// `T*M` is checked to be constant along the fibres at `samples`
    /// (which must bind all of `(q, t, p, s)`).
    pub fn aff_poisson(&self, sigma: &Expr, sigma2: &Expr, samples: &[Point]) -> Result<Expr, PhaseError> {
        let b = self.poisson(&self.f_of(sigma)?, &self.f_of(sigma2)?);
        let ds = b.diff(&self.energy).simplify();
        if !ds.is_zero() {
            let mut worst = Worst::new();
            for p in samples {
                worst.observe(ds.eval(p)?, || crate::brackets::format_point(p));
            }
            if worst.value >= FIBER_CONSTANCY_TOL {
                return Err(PhaseError::FiberConstancy {
                    residual: worst.value,
                    witness: worst.witness.unwrap_or_default(),
                });
            }
        }
        Ok(b.substitute(&self.energy, &Expr::zero()).simplify())
    }

    /// Fibre-constancy residual `max |∂_s {F_σ, F_σ'}|` over the samples.
    pub fn fiber_constancy_residual(&self, sigma: &Expr, sigma2: &Expr, samples: &[Point]) -> Result<f64, PhaseError> {
        let b = self.poisson(&self.f_of(sigma)?, &self.f_of(sigma2)?);
        let ds = b.diff(&self.energy).simplify();
        let mut m = 0.0_f64;
        for p in samples {
            m = m.max(ds.eval(p)?.abs());
        }
        Ok(m)
    }
}

/// Free-function form of [`CotangentSpacetime::aff_poisson`].
pub fn eq1_aff_poisson(z: &CotangentSpacetime, sigma: &Expr, sigma2: &Expr, samples: &[Point]) -> Result<Expr, PhaseError> {
    z.aff_poisson(sigma, sigma2, samples)
}

/// An AV-morphism `T*M × ℝ → T*M` covering `ζ`, given by the energy
/// coordinate of the image, `s_Y = A + B r`, as an expression in
/// `(q, t, p, s, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionMap {
    pub image_energy: Expr,
    pub fiber: String,
}

impl ReductionMap {
    /// `(a, r) ↦ a − r dt`.
    pub fn standard(z: &CotangentSpacetime, fiber: &str) -> Self {
        Self {
            image_energy: Expr::var(z.energy()) - Expr::var(fiber),
            fiber: fiber.to_string(),
        }
    }

    /// `(a, r) ↦ a + r dt`.
    pub fn flipped(z: &CotangentSpacetime, fiber: &str) -> Self {
        Self {
            image_energy: Expr::var(z.energy()) + Expr::var(fiber),
            fiber: fiber.to_string(),
        }
    }

    fn parts(&self) -> Result<(Expr, Expr), PhaseError> {
        let slope = self.image_energy.diff(&self.fiber).simplify();
        if slope.depends_on(&self.fiber) || slope.is_zero() {
            return Err(PhaseError::NotAffineMorphism);
        }
        let offset = self.image_energy.substitute(&self.fiber, &Expr::zero()).simplify();
        Ok((offset, slope))
    }

    /// Pullback of a section `s_Y = σ(q, t, p)`: the `r` solving `A + B r = σ`.
    pub fn pull_section(&self, sigma: &Expr) -> Result<Expr, PhaseError> {
        let (a, b) = self.parts()?;
        Ok(((sigma.clone() - a) / b).simplify())
    }

    /// Linear part of the pullback, acting on bracket values. Measured along
    /// the ℝ-action of the extended bundle.
    pub fn pull_linear(&self, f: &Expr) -> Result<Expr, PhaseError> {
        let (_, b) = self.parts()?;
        Ok((Expr::num(EXTENDED_ACTION_SIGN) * f.clone() / b).simplify())
    }
}

/// Residual of `{ρ*σ, ρ*σ'}_Z = ρ*{σ, σ'}_Y` over section pairs and samples.
/// The bracket on the trivial bundle `T*M × ℝ` is the canonical Poisson
/// bracket of the fibre values; the bracket on `Y` is
/// [`CotangentSpacetime::aff_poisson`].
pub fn check_affine_reduction(
    z: &CotangentSpacetime,
    rho: &ReductionMap,
    pairs: &[(Expr, Expr)],
    samples: &[Point],
) -> Result<CheckReport, PhaseError> {
    let mut worst = Worst::new();
    for (s1, s2) in pairs {
        let lhs = z.poisson(&rho.pull_section(s1)?, &rho.pull_section(s2)?);
        let rhs = rho.pull_linear(&z.aff_poisson(s1, s2, samples)?)?;
        let res = (lhs - rhs).simplify();
        for p in samples {
            worst.observe(res.eval(p)?, || {
                format!("sigma={s1}, sigma'={s2} at {}", crate::brackets::format_point(p))
            });
        }
    }
    let mut report = CheckReport::new();
    report.push(Check::below("affine_reduction", worst, REDUCTION_TOL));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::grid;
    use crate::symexpr::parse_free;

    fn e(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    fn line() -> AvBundle {
        AvBundle::new(vec!["x".into()], vec!["p".into()], "s")
            .unwrap()
            .with_section("zero", Expr::zero())
            .unwrap()
            .with_section("square", e("x^2"))
            .unwrap()
    }

    fn at(x: f64) -> Point {
        Point::from([("x".to_string(), x)])
    }

    #[test]
    fn bold_d_examples() {
        let b = line();
        assert_eq!(bold_d(&b, &Expr::zero(), "zero", &at(0.7)).unwrap().p[0], 0.0);
        assert_eq!(bold_d(&b, &e("x^2"), "zero", &at(1.0)).unwrap().p[0], 2.0);
        let p1 = bold_d(&b, &e("x^3"), "zero", &at(0.4)).unwrap();
        let p2 = bold_d(&b, &e("x^3 + 5"), "zero", &at(0.4)).unwrap();
        assert_eq!(p1, p2);
        assert!(b.clone().with_section("bad", e("s*x")).is_err());
    }

    #[test]
    fn retag_shifts_by_differential() {
        let b = line();
        let p = bold_d(&b, &e("sin(x)"), "zero", &at(0.3)).unwrap();
        let q = p.retag(&b, "square").unwrap();
        let direct = bold_d(&b, &e("sin(x)"), "square", &at(0.3)).unwrap();
        assert!((q.p[0] - direct.p[0]).abs() < 1e-15);
        assert!((q.p[0] - (0.3f64.cos() - 0.6)).abs() < 1e-15);
    }

    #[test]
    fn exterior_derivative_examples() {
        let vars = vec!["x".to_string(), "y".to_string()];
        let b = AvBundle::new(vars.clone(), vec!["px".into(), "py".into()], "s")
            .unwrap()
            .with_section("zero", Expr::zero())
            .unwrap()
            .with_section("bowl", e("x^2 + y^2"))
            .unwrap();
        let alpha = AffineOneForm {
            components: vec![e("-y"), e("x")],
            tag: "zero".into(),
        };
        let w = bold_d_oneform(&b, &alpha).unwrap();
        assert_eq!(w.coeff(0, 1), Expr::num(2.0));
        assert_eq!(w.coeff(1, 0), Expr::num(-2.0));
        let w2 = bold_d_oneform(&b, &alpha.retag(&b, "bowl").unwrap()).unwrap();
        assert_eq!(w, w2);
        let exact = AffineOneForm::of_section(&b, &e("x^3*y + sin(y)"), "bowl").unwrap();
        let dd = bold_d_oneform(&b, &exact).unwrap();
        assert!(dd.max_abs(&grid(&vars, &[-1.0, 0.5, 2.0])).unwrap() < 1e-12);
    }

    #[test]
    fn omega_z_is_section_independent() {
        let b = line();
        let w0 = omega_z(&b).unwrap();
        assert_eq!(w0.coeff_by_name("p", "x").unwrap(), Expr::one());
        let w1 = omega_z_via(&b, "square").unwrap();
        assert_eq!(w0, w1);
    }

    #[test]
    fn canonical_poisson_examples() {
        let (x, p) = (vec!["x".to_string()], vec!["p".to_string()]);
        assert_eq!(canonical_poisson(&e("p"), &e("x"), &x, &p), Expr::one());
        assert!(canonical_poisson(&e("x"), &e("x"), &x, &p).is_zero());
        let r = canonical_poisson(&e("p^2"), &e("x"), &x, &p);
        assert_eq!(r.eval(&[("p", 1.5)]).unwrap(), 3.0);
    }

    #[test]
    fn eq1_examples() {
        let z = CotangentSpacetime::standard(1);
        let samples = grid(&z.total_vars(), &[-0.5, 0.7]);
        let h = e("p^2/2");
        assert!(z.aff_poisson(&-h.clone(), &-h.clone(), &samples).unwrap().is_zero());
        let r = z.aff_poisson(&-h, &e("q*t*p"), &samples).unwrap();
        assert!(!r.depends_on("s"));
        let r = z.aff_poisson(&-e("p"), &-e("q"), &samples).unwrap();
        let oracle = canonical_poisson(&e("p"), &e("q"), &["q".into()], &["p".into()]);
        assert_eq!(r.eval(&[("q", 0.1), ("t", 0.2), ("p", 0.3)]).unwrap(), oracle.eval(&[("q", 0.0)]).unwrap());
    }

    #[test]
    fn eq1_rejects_fiber_dependent_section() {
        let z = CotangentSpacetime::standard(1);
        let samples = grid(&z.total_vars(), &[-0.5, 0.7]);
        assert!(matches!(
            z.aff_poisson(&e("s*q"), &e("q"), &samples),
            Err(PhaseError::SectionDependsOnFiber(_))
        ));
    }

    #[test]
    fn reduction_sign() {
        let z = CotangentSpacetime::standard(1);
        let mut vars = z.total_vars();
        vars.push("r".into());
        let samples = grid(&vars, &[-0.6, 0.9]);
        let pairs = vec![(e("-(p^2/2 + q^2/2)"), e("q*t + p")), (e("3"), e("-1"))];
        let ok = check_affine_reduction(&z, &ReductionMap::standard(&z, "r"), &pairs, &samples).unwrap();
        assert!(ok.pass(), "{ok:?}");
        let bad = check_affine_reduction(&z, &ReductionMap::flipped(&z, "r"), &pairs, &samples).unwrap();
        assert!(!bad.pass());
        assert!(bad.checks[0].witness.is_some());
    }
}
