//! Lie affgebras, Lie affgebroids, their vector hulls, and the aff-Jacobi
//! bracket induced on sections of `AV(A#)`.
//!
//! Sections of an affine bundle are written `a = a₀ + f^i v_i` relative to a
//! reference section `a₀` and a frame `{v_i}` of the model bundle, and stored
//! as the coefficient list `f`. Vector sections `u = u^i v_i` are stored the
//! same way. With `β_j = [a₀, v_j]`, `c_ij = [v_i, v_j]`, the expansion is
//!
//! ```text
//! [a, a'] = (g−f)^j β_j + ρ(a₀)(g^j − f^j) v_j + f^i g^j c_ij
//!           + f^i ρ(v_i)(g^j) v_j − g^j ρ(v_j)(f^i) v_i
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::duality::{DualityError, SpecialDualChart};
use crate::report::{Check, CheckReport, Worst};
use crate::sampling::{self, Point};
use crate::symexpr::{Expr, ExprError};

/// Tolerance for sampled residuals.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Tolerance for exact (enumerated) checks and the centrality test.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BracketError {
    #[error("{what}: expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("structure functions not antisymmetric: c[{i}][{j}] + c[{j}][{i}] has component {k} of size {residual:e}")]
    NotAntisymmetric { i: usize, j: usize, k: usize, residual: f64 },
    #[error("section is not affine in the fibre coordinate `{0}`")]
    NonAffineSection(String),
    #[error("structure has no distinguished section")]
    NotSpecial,
    #[error("variable name `{0}` is used twice")]
    NameClash(String),
    #[error("input structure failed verification: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Duality(DualityError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl From<DualityError> for BracketError {
    fn from(e: DualityError) -> Self {
        match e {
            DualityError::NotAffine(v) => BracketError::NonAffineSection(v),
            DualityError::Expr(e) => BracketError::Expr(e),
            other => BracketError::Duality(other),
        }
    }
}

/// `X(f) = X^μ ∂f/∂x^μ`.
pub fn apply_field(field: &[Expr], base: &[String], f: &Expr) -> Expr {
    field
        .iter()
        .zip(base)
        .filter(|(x, _)| !x.is_zero())
        .map(|(x, name)| x.clone() * f.diff(name))
        .sum()
}

/// Lie bracket of vector fields, `[X, Y]^μ = X(Y^μ) − Y(X^μ)`.
pub fn commutator(x: &[Expr], y: &[Expr], base: &[String]) -> Vec<Expr> {
    (0..base.len())
        .map(|mu| apply_field(x, base, &y[mu]) - apply_field(y, base, &x[mu]))
        .collect()
}

fn add(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    a.iter().zip(b).map(|(x, y)| x.clone() + y.clone()).collect()
}

fn sub(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    a.iter().zip(b).map(|(x, y)| x.clone() - y.clone()).collect()
}

fn scale(k: &Expr, a: &[Expr]) -> Vec<Expr> {
    a.iter().map(|x| k.clone() * x.clone()).collect()
}

fn axpy(acc: &mut [Expr], k: &Expr, a: &[Expr]) {
    if k.is_zero() {
        return;
    }
    for (t, x) in acc.iter_mut().zip(a) {
        if !x.is_zero() {
            *t = t.clone() + k.clone() * x.clone();
        }
    }
}

/// Largest absolute component of an Expression vector at a point.
pub fn max_abs_at(v: &[Expr], p: &Point) -> Result<f64, ExprError> {
    v.iter().try_fold(0.0_f64, |m, e| Ok(m.max(e.eval(p)?.abs())))
}

pub fn format_section(v: &[Expr]) -> String {
    let parts: Vec<String> = v.iter().map(|e| e.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

pub fn format_point(p: &Point) -> String {
    let parts: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("({})", parts.join(", "))
}

/// Frame data of a Lie affgebroid over a coordinate patch.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAffgebroidData {
    base: Vec<String>,
    beta: Vec<Vec<Expr>>,
    structure: Vec<Vec<Vec<Expr>>>,
    anchor_ref: Vec<Expr>,
    anchor_frame: Vec<Vec<Expr>>,
    // Vector fields acting on coefficients inside the bracket. Equal to the
    // anchor unless replaced through `with_anchor`.
    deriv_ref: Vec<Expr>,
    deriv_frame: Vec<Vec<Expr>>,
    distinguished: Option<Vec<Expr>>,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), BracketError> {
    if expected == found {
        Ok(())
    } else {
        Err(BracketError::Dimension { what, expected, found })
    }
}

impl LieAffgebroidData {
    /// `beta[j] = [a₀, v_j]`, `structure[i][j] = [v_i, v_j]` (frame
    /// components), `anchor_ref = ρ(a₀)`, `anchor_frame[i] = ρ(v_i)`.
    pub fn new(
        base: Vec<String>,
        beta: Vec<Vec<Expr>>,
        structure: Vec<Vec<Vec<Expr>>>,
        anchor_ref: Vec<Expr>,
        anchor_frame: Vec<Vec<Expr>>,
    ) -> Result<Self, BracketError> {
        let (m, n) = (base.len(), beta.len());
        for (i, name) in base.iter().enumerate() {
            if base[..i].contains(name) {
                return Err(BracketError::NameClash(name.clone()));
            }
        }
        for b in &beta {
            check_len("bracket with reference section", n, b.len())?;
        }
        check_len("structure functions", n, structure.len())?;
        for row in &structure {
            check_len("structure functions", n, row.len())?;
            for c in row {
                check_len("structure functions", n, c.len())?;
            }
        }
        check_len("anchor of reference section", m, anchor_ref.len())?;
        check_len("anchor of frame", n, anchor_frame.len())?;
        for a in &anchor_frame {
            check_len("anchor of frame", m, a.len())?;
        }
        let probes = sampling::probes(&base);
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let sum = (structure[i][j][k].clone() + structure[j][i][k].clone()).simplify();
                    if sum.is_zero() {
                        continue;
                    }
                    for p in &probes {
                        let r = sum.eval(p)?.abs();
                        if r > EXACT_TOL {
                            return Err(BracketError::NotAntisymmetric { i, j, k, residual: r });
                        }
                    }
                }
            }
        }
        Ok(Self {
            base,
            beta,
            structure,
            deriv_ref: anchor_ref.clone(),
            deriv_frame: anchor_frame.clone(),
            anchor_ref,
            anchor_frame,
            distinguished: None,
        })
    }

    /// Marks `v = v^i v_i` as the distinguished section of the model bundle.
    pub fn with_distinguished(mut self, v: Vec<Expr>) -> Result<Self, BracketError> {
        check_len("distinguished section", self.rank(), v.len())?;
        if v.iter().all(Expr::is_zero) {
            return Err(BracketError::Duality(DualityError::ZeroDistinguished));
        }
        self.distinguished = Some(v);
        Ok(self)
    }

    /// Replaces the anchor while keeping the bracket unchanged.
    pub fn with_anchor(mut self, anchor_ref: Vec<Expr>, anchor_frame: Vec<Vec<Expr>>) -> Result<Self, BracketError> {
        check_len("anchor of reference section", self.base.len(), anchor_ref.len())?;
        check_len("anchor of frame", self.rank(), anchor_frame.len())?;
        for a in &anchor_frame {
            check_len("anchor of frame", self.base.len(), a.len())?;
        }
        self.anchor_ref = anchor_ref;
        self.anchor_frame = anchor_frame;
        Ok(self)
    }

    /// The anchor multiplied by `k`, bracket unchanged.
    pub fn with_scaled_anchor(self, k: f64) -> Self {
        let kk = Expr::num(k);
        let r = scale(&kk, &self.anchor_ref);
        let f = self.anchor_frame.iter().map(|a| scale(&kk, a)).collect();
        self.with_anchor(r, f).expect("shapes unchanged")
    }

    pub fn base(&self) -> &[String] {
        &self.base
    }

    pub fn rank(&self) -> usize {
        self.beta.len()
    }

    pub fn distinguished(&self) -> Option<&[Expr]> {
        self.distinguished.as_deref()
    }

    pub fn beta(&self) -> &[Vec<Expr>] {
        &self.beta
    }

    pub fn structure(&self) -> &[Vec<Vec<Expr>>] {
        &self.structure
    }

    pub fn anchor_ref(&self) -> &[Expr] {
        &self.anchor_ref
    }

    pub fn anchor_frame(&self) -> &[Vec<Expr>] {
        &self.anchor_frame
    }

    fn check_section(&self, s: &[Expr]) -> Result<(), BracketError> {
        check_len("section", self.rank(), s.len())
    }

    fn field_of(&self, r: &[Expr], frame: &[Vec<Expr>], f: &[Expr]) -> Vec<Expr> {
        let mut out = r.to_vec();
        for (fi, rho) in f.iter().zip(frame) {
            axpy(&mut out, fi, rho);
        }
        out
    }

    /// `ρ(a₀ + f^i v_i) = ρ(a₀) + f^i ρ(v_i)`.
    pub fn anchor(&self, a: &[Expr]) -> Vec<Expr> {
        self.field_of(&self.anchor_ref, &self.anchor_frame, a)
    }

    /// Linear part of the anchor on vector sections.
    pub fn anchor_linear(&self, u: &[Expr]) -> Vec<Expr> {
        let zero = vec![Expr::zero(); self.base.len()];
        self.field_of(&zero, &self.anchor_frame, u)
    }

    fn d(&self, field: &[Expr], f: &Expr) -> Expr {
        apply_field(field, &self.base, f)
    }

    fn cross_terms(&self, f: &[Expr], g: &[Expr], out: &mut [Expr]) {
        let n = self.rank();
        for i in 0..n {
            if f[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if g[j].is_zero() {
                    continue;
                }
                axpy(out, &(f[i].clone() * g[j].clone()), &self.structure[i][j]);
            }
        }
        for i in 0..n {
            if f[i].is_zero() {
                continue;
            }
            for j in 0..n {
                let t = self.d(&self.deriv_frame[i], &g[j]);
                out[j] = out[j].clone() + f[i].clone() * t;
            }
        }
        for j in 0..n {
            if g[j].is_zero() {
                continue;
            }
            for i in 0..n {
                let t = self.d(&self.deriv_frame[j], &f[i]);
                out[i] = out[i].clone() - g[j].clone() * t;
            }
        }
    }

    /// `[a, a']` for `a = a₀ + f^i v_i`, `a' = a₀ + g^j v_j`; a vector section.
    pub fn bracket(&self, f: &[Expr], g: &[Expr]) -> Result<Vec<Expr>, BracketError> {
        self.check_section(f)?;
        self.check_section(g)?;
        let n = self.rank();
        let diff = sub(g, f);
        let mut out = vec![Expr::zero(); n];
        for j in 0..n {
            axpy(&mut out, &diff[j], &self.beta[j]);
            let t = self.d(&self.deriv_ref, &diff[j]);
            out[j] = out[j].clone() + t;
        }
        self.cross_terms(f, g, &mut out);
        Ok(out.iter().map(Expr::simplify).collect())
    }

    /// Partial linear part `[a, u]₂` for a section `a` and a vector section `u`.
    pub fn bracket_mixed(&self, f: &[Expr], u: &[Expr]) -> Result<Vec<Expr>, BracketError> {
        self.check_section(f)?;
        self.check_section(u)?;
        let n = self.rank();
        let mut out = vec![Expr::zero(); n];
        for j in 0..n {
            axpy(&mut out, &u[j], &self.beta[j]);
            let t = self.d(&self.deriv_ref, &u[j]);
            out[j] = out[j].clone() + t;
        }
        self.cross_terms(f, u, &mut out);
        Ok(out.iter().map(Expr::simplify).collect())
    }

    /// Bilinear part `[u, w]_V` on vector sections.
    pub fn bracket_linear(&self, u: &[Expr], w: &[Expr]) -> Result<Vec<Expr>, BracketError> {
        self.check_section(u)?;
        self.check_section(w)?;
        let mut out = vec![Expr::zero(); self.rank()];
        self.cross_terms(u, w, &mut out);
        Ok(out.iter().map(Expr::simplify).collect())
    }

    /// `[a₁,[a₂,a₃]]₂ + [a₂,[a₃,a₁]]₂ + [a₃,[a₁,a₂]]₂`.
    pub fn jacobiator(&self, a1: &[Expr], a2: &[Expr], a3: &[Expr]) -> Result<Vec<Expr>, BracketError> {
        let t1 = self.bracket_mixed(a1, &self.bracket(a2, a3)?)?;
        let t2 = self.bracket_mixed(a2, &self.bracket(a3, a1)?)?;
        let t3 = self.bracket_mixed(a3, &self.bracket(a1, a2)?)?;
        Ok(add(&add(&t1, &t2), &t3))
    }

    /// `[a, f w]₂ − f [a, w]₂ − ρ(a)(f) w`.
    pub fn leibniz_residual(&self, a: &[Expr], w: &[Expr], f: &Expr) -> Result<Vec<Expr>, BracketError> {
        let lhs = self.bracket_mixed(a, &scale(f, w))?;
        let rhs = scale(f, &self.bracket_mixed(a, w)?);
        let rho_f = self.d(&self.anchor(a), f);
        Ok(sub(&sub(&lhs, &rhs), &scale(&rho_f, w)))
    }

    /// `ρ_V([a, a']) − [ρ(a), ρ(a')]`.
    pub fn anchor_morphism_residual(&self, a: &[Expr], b: &[Expr]) -> Result<Vec<Expr>, BracketError> {
        let lhs = self.anchor_linear(&self.bracket(a, b)?);
        let rhs = commutator(&self.anchor(a), &self.anchor(b), &self.base);
        Ok(sub(&lhs, &rhs))
    }

    fn random_section(&self, rng: &mut ChaCha8Rng) -> Vec<Expr> {
        (0..self.rank())
            .map(|_| Expr::random_polynomial(rng, &self.base, 2, 3))
            .collect()
    }
}

/// Sampled verification of the Lie affgebroid axioms. Sections and test
/// functions are random polynomials drawn from a generator seeded by `seed`.
pub fn verify_affgebroid(data: &LieAffgebroidData, samples: &[Point], seed: u64) -> Result<CheckReport, BracketError> {
    const TRIALS: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut skew, mut jacobi, mut leibniz, mut morphism) = (Worst::new(), Worst::new(), Worst::new(), Worst::new());
    for _ in 0..TRIALS {
        let a1 = data.random_section(&mut rng);
        let a2 = data.random_section(&mut rng);
        let a3 = data.random_section(&mut rng);
        let w = data.random_section(&mut rng);
        let f = Expr::random_polynomial(&mut rng, data.base(), 2, 3);
        let sk = add(&data.bracket(&a1, &a2)?, &data.bracket(&a2, &a1)?);
        let self_bracket = data.bracket(&a1, &a1)?;
        let jac = data.jacobiator(&a1, &a2, &a3)?;
        let leib = data.leibniz_residual(&a1, &w, &f)?;
        let morph = data.anchor_morphism_residual(&a1, &a2)?;
        for p in samples {
            let at = || format_point(p);
            let r = max_abs_at(&sk, p)?.max(max_abs_at(&self_bracket, p)?);
            skew.observe(r, || format!("a={} a'={} at {}", format_section(&a1), format_section(&a2), at()));
            jacobi.observe(max_abs_at(&jac, p)?, || {
                format!(
                    "a1={} a2={} a3={} at {}",
                    format_section(&a1),
                    format_section(&a2),
                    format_section(&a3),
                    at()
                )
            });
            leibniz.observe(max_abs_at(&leib, p)?, || {
                format!("a={} w={} f={} at {}", format_section(&a1), format_section(&w), f, at())
            });
            morphism.observe(max_abs_at(&morph, p)?, || {
                format!("a={} a'={} at {}", format_section(&a1), format_section(&a2), at())
            });
        }
    }
    let mut report = CheckReport::new();
    report.push(Check::below("skew", skew, RESIDUAL_TOL));
    report.push(Check::below("jacobi", jacobi, RESIDUAL_TOL));
    report.push(Check::below("leibniz", leibniz, RESIDUAL_TOL));
    report.push(Check::below("anchor_morphism", morphism, RESIDUAL_TOL));
    Ok(report)
}

/// Lie affgebra over a point: `[o+u, o+w] = D w − D u + c(u, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAffgebraData {
    d: DMatrix<f64>,
    /// `c[k][(i, j)]` is the `k`-th component of `c(e_i, e_j)`.
    c: Vec<DMatrix<f64>>,
    distinguished: Option<DVector<f64>>,
}

impl LieAffgebraData {
    pub fn new(d: DMatrix<f64>, c: Vec<DMatrix<f64>>) -> Result<Self, BracketError> {
        let n = d.nrows();
        check_len("matrix D columns", n, d.ncols())?;
        check_len("structure constants", n, c.len())?;
        for (k, ck) in c.iter().enumerate() {
            check_len("structure constants", n, ck.nrows())?;
            check_len("structure constants", n, ck.ncols())?;
            for i in 0..n {
                for j in i..n {
                    let r = (ck[(i, j)] + ck[(j, i)]).abs();
                    if r > EXACT_TOL {
                        return Err(BracketError::NotAntisymmetric { i, j, k, residual: r });
                    }
                }
            }
        }
        Ok(Self {
            d,
            c,
            distinguished: None,
        })
    }

    /// Vanishing bilinear part.
    pub fn abelian(d: DMatrix<f64>) -> Self {
        let n = d.nrows();
        Self::new(d, vec![DMatrix::zeros(n, n); n]).expect("zero constants are antisymmetric")
    }

    /// Bilinear part the cross product on ℝ³ (the structure constants of so(3)).
    pub fn cross_product(d: DMatrix<f64>) -> Result<Self, BracketError> {
        let mut c = vec![DMatrix::zeros(3, 3); 3];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[k][(i, j)] = 1.0;
            c[k][(j, i)] = -1.0;
        }
        Self::new(d, c)
    }

    pub fn with_distinguished(mut self, v: DVector<f64>) -> Result<Self, BracketError> {
        check_len("distinguished vector", self.dim(), v.len())?;
        if v.norm() == 0.0 {
            return Err(BracketError::Duality(DualityError::ZeroDistinguished));
        }
        self.distinguished = Some(v);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn structure_constants(&self) -> &[DMatrix<f64>] {
        &self.c
    }

    pub fn distinguished(&self) -> Option<&DVector<f64>> {
        self.distinguished.as_ref()
    }

    /// `c(u, w)`.
    pub fn bilinear(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.c.iter().map(|ck| u.dot(&(ck * w))))
    }

    /// `[o+u, o+w]`.
    pub fn bracket(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.d * w - &self.d * u + self.bilinear(u, w)
    }

    /// `[o+u, x]₂ = D x + c(u, x)`.
    pub fn bracket_mixed(&self, u: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        &self.d * x + self.bilinear(u, x)
    }

    pub fn jacobiator(&self, a1: &DVector<f64>, a2: &DVector<f64>, a3: &DVector<f64>) -> DVector<f64> {
        self.bracket_mixed(a1, &self.bracket(a2, a3))
            + self.bracket_mixed(a2, &self.bracket(a3, a1))
            + self.bracket_mixed(a3, &self.bracket(a1, a2))
    }

    /// The same structure as an affgebroid over a zero-dimensional base.
    pub fn to_affgebroid(&self) -> LieAffgebroidData {
        let n = self.dim();
        let beta = (0..n).map(|j| (0..n).map(|k| Expr::num(self.d[(k, j)])).collect()).collect();
        let structure = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| Expr::num(self.c[k][(i, j)])).collect()).collect())
            .collect();
        let data = LieAffgebroidData::new(Vec::new(), beta, structure, Vec::new(), vec![Vec::new(); n])
            .expect("validated at construction");
        match &self.distinguished {
            Some(v) => data
                .with_distinguished(v.iter().map(|x| Expr::num(*x)).collect())
                .expect("validated at construction"),
            None => data,
        }
    }
}

fn basis_label(i: usize) -> String {
    if i == 0 {
        "o".to_string()
    } else {
        format!("o+e{i}")
    }
}

fn basis_point(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    if i > 0 {
        v[i - 1] = 1.0;
    }
    v
}

/// Exact verification: both axioms are affine in every slot, so they hold
/// identically iff they hold on the affine basis `{o, o+e₁, …, o+e_n}`.
pub fn verify_affgebra(data: &LieAffgebraData) -> CheckReport {
    let n = data.dim();
    let pts: Vec<DVector<f64>> = (0..=n).map(|i| basis_point(n, i)).collect();
    let mut skew = Worst::new();
    for i in 0..=n {
        for j in i..=n {
            let r = (data.bracket(&pts[i], &pts[j]) + data.bracket(&pts[j], &pts[i])).amax();
            skew.observe(r, || format!("({}, {})", basis_label(i), basis_label(j)));
        }
    }
    let mut jacobi = Worst::new();
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let r = data.jacobiator(&pts[i], &pts[j], &pts[k]);
                jacobi.observe(r.amax(), || {
                    let comps: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
                    format!(
                        "({}, {}, {}) -> [{}]",
                        basis_label(i),
                        basis_label(j),
                        basis_label(k),
                        comps.join(", ")
                    )
                });
            }
        }
    }
    let mut report = CheckReport::new();
    report.push(Check::below("skew", skew, EXACT_TOL));
    report.push(Check::below("jacobi", jacobi, EXACT_TOL));
    report
}

/// Lie algebroid on the vector hull `Â`, in the frame `{â₀, v_1, …, v_n}`.
/// Sections are `h â₀ + f^i v_i`, stored as `[h, f^1, …, f^n]`; `h` is the
/// weight.
#[derive(Debug, Clone, PartialEq)]
pub struct HullAlgebroidData {
    base: Vec<String>,
    structure: Vec<Vec<Vec<Expr>>>,
    anchor: Vec<Vec<Expr>>,
    distinguished: Option<Vec<Expr>>,
}

/// Hull extension of a verified affgebroid.
pub fn hull_extend(data: &LieAffgebroidData, samples: &[Point], seed: u64) -> Result<HullAlgebroidData, BracketError> {
    let report = verify_affgebroid(data, samples, seed)?;
    if !report.pass() {
        let failed: Vec<&str> = report.failures().map(|c| c.check.as_str()).collect();
        return Err(BracketError::VerificationFailed(failed.join(", ")));
    }
    Ok(HullAlgebroidData::from_affgebroid(data))
}

impl HullAlgebroidData {
    /// Extension without running the verifier.
    pub fn from_affgebroid(data: &LieAffgebroidData) -> Self {
        let n = data.rank();
        let lift = |v: &[Expr]| -> Vec<Expr> { std::iter::once(Expr::zero()).chain(v.iter().cloned()).collect() };
        let zero = vec![Expr::zero(); n + 1];
        let mut structure = vec![vec![zero.clone(); n + 1]; n + 1];
        for j in 0..n {
            structure[0][j + 1] = lift(&data.beta[j]);
            structure[j + 1][0] = lift(&data.beta[j]).iter().map(|e| -e.clone()).collect();
            for i in 0..n {
                structure[i + 1][j + 1] = lift(&data.structure[i][j]);
            }
        }
        let mut anchor = vec![data.anchor_ref.clone()];
        anchor.extend(data.anchor_frame.iter().cloned());
        Self {
            base: data.base.clone(),
            structure,
            anchor,
            distinguished: data.distinguished.clone(),
        }
    }

    pub fn base(&self) -> &[String] {
        &self.base
    }

    /// `n + 1`.
    pub fn rank(&self) -> usize {
        self.structure.len()
    }

    pub fn embed_section(&self, f: &[Expr]) -> Vec<Expr> {
        std::iter::once(Expr::one()).chain(f.iter().cloned()).collect()
    }

    pub fn embed_vector(&self, u: &[Expr]) -> Vec<Expr> {
        std::iter::once(Expr::zero()).chain(u.iter().cloned()).collect()
    }

    pub fn unit(&self, alpha: usize) -> Vec<Expr> {
        (0..self.rank()).map(|b| if b == alpha { Expr::one() } else { Expr::zero() }).collect()
    }

    pub fn anchor(&self, x: &[Expr]) -> Vec<Expr> {
        let mut out = vec![Expr::zero(); self.base.len()];
        for (xa, rho) in x.iter().zip(&self.anchor) {
            axpy(&mut out, xa, rho);
        }
        out
    }

    /// `[X, Y] = X^α Y^β C_αβ + X^α ρ_α(Y^β) e_β − Y^β ρ_β(X^α) e_α`.
    pub fn bracket(&self, x: &[Expr], y: &[Expr]) -> Result<Vec<Expr>, BracketError> {
        let r = self.rank();
        check_len("hull section", r, x.len())?;
        check_len("hull section", r, y.len())?;
        let mut out = vec![Expr::zero(); r];
        for a in 0..r {
            for b in 0..r {
                if !x[a].is_zero() && !y[b].is_zero() {
                    axpy(&mut out, &(x[a].clone() * y[b].clone()), &self.structure[a][b]);
                }
            }
        }
        let rx = self.anchor(x);
        let ry = self.anchor(y);
        for b in 0..r {
            out[b] = out[b].clone() + apply_field(&rx, &self.base, &y[b]) - apply_field(&ry, &self.base, &x[b]);
        }
        Ok(out.iter().map(Expr::simplify).collect())
    }

    pub fn jacobiator(&self, x: &[Expr], y: &[Expr], z: &[Expr]) -> Result<Vec<Expr>, BracketError> {
        let t1 = self.bracket(x, &self.bracket(y, z)?)?;
        let t2 = self.bracket(y, &self.bracket(z, x)?)?;
        let t3 = self.bracket(z, &self.bracket(x, y)?)?;
        Ok(add(&add(&t1, &t2), &t3))
    }

    /// `ρ̂(X)(h_Y) − ρ̂(Y)(h_X) − h_{[X,Y]}`: closedness of the weight
    /// functional `1_A` as a cochain.
    pub fn cocycle_residual(&self, x: &[Expr], y: &[Expr]) -> Result<Expr, BracketError> {
        let xy = self.bracket(x, y)?;
        Ok(
            (apply_field(&self.anchor(x), &self.base, &y[0]) - apply_field(&self.anchor(y), &self.base, &x[0])
                - xy[0].clone())
            .simplify(),
        )
    }

    /// Worst `|[v̂, e_α]|` over the frame and the samples.
    pub fn centrality(&self, v: &[Expr], samples: &[Point]) -> Result<Worst, BracketError> {
        let vhat = self.embed_vector(v);
        let mut worst = Worst::new();
        for alpha in 0..self.rank() {
            let b = self.bracket(&vhat, &self.unit(alpha))?;
            for p in samples {
                worst.observe(max_abs_at(&b, p)?, || {
                    format!("[v, e{alpha}] = {} at {}", format_section(&b), format_point(p))
                });
            }
        }
        Ok(worst)
    }

    /// The affgebroid recovered from the weight-1 sector.
    pub fn restrict(&self) -> Result<LieAffgebroidData, BracketError> {
        let n = self.rank() - 1;
        let drop = |v: &[Expr]| v[1..].to_vec();
        let beta = (0..n).map(|j| drop(&self.structure[0][j + 1])).collect();
        let structure = (0..n)
            .map(|i| (0..n).map(|j| drop(&self.structure[i + 1][j + 1])).collect())
            .collect();
        let data = LieAffgebroidData::new(
            self.base.clone(),
            beta,
            structure,
            self.anchor[0].clone(),
            self.anchor[1..].to_vec(),
        )?;
        match &self.distinguished {
            Some(v) => data.with_distinguished(v.clone()),
            None => Ok(data),
        }
    }
}

/// Checks relating an affgebroid to its hull: exact restriction, agreement on
/// weight-1 and weight-0 sections, Jacobi identity and closedness of the
/// weight functional.
pub fn verify_hull_extension(
    data: &LieAffgebroidData,
    hull: &HullAlgebroidData,
    samples: &[Point],
    seed: u64,
) -> Result<CheckReport, BracketError> {
    const TRIALS: usize = 4;
    let mut report = CheckReport::new();
    let restricted = hull.restrict()?;
    let exact = restricted == *data;
    report.push(Check::new(
        "restriction_exact",
        exact,
        if exact { 0.0 } else { 1.0 },
        (!exact).then(|| "restricted structure functions differ from the input".to_string()),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut restriction, mut model, mut jacobi, mut cocycle) = (Worst::new(), Worst::new(), Worst::new(), Worst::new());
    for _ in 0..TRIALS {
        let f = data.random_section(&mut rng);
        let g = data.random_section(&mut rng);
        let direct = data.bracket(&f, &g)?;
        let via_hull = hull.bracket(&hull.embed_section(&f), &hull.embed_section(&g))?;
        let restr = sub(&via_hull, &hull.embed_vector(&direct));
        let direct_v = data.bracket_linear(&f, &g)?;
        let hull_v = hull.bracket(&hull.embed_vector(&f), &hull.embed_vector(&g))?;
        let model_diff = sub(&hull_v, &hull.embed_vector(&direct_v));
        let sections: Vec<Vec<Expr>> = (0..3)
            .map(|_| {
                (0..hull.rank())
                    .map(|_| Expr::random_polynomial(&mut rng, &data.base, 2, 3))
                    .collect()
            })
            .collect();
        let jac = hull.jacobiator(&sections[0], &sections[1], &sections[2])?;
        let coc = hull.cocycle_residual(&sections[0], &sections[1])?;
        for p in samples {
            restriction.observe(max_abs_at(&restr, p)?, || {
                format!("f={} g={} at {}", format_section(&f), format_section(&g), format_point(p))
            });
            model.observe(max_abs_at(&model_diff, p)?, || {
                format!("u={} w={} at {}", format_section(&f), format_section(&g), format_point(p))
            });
            jacobi.observe(max_abs_at(&jac, p)?, || {
                format!(
                    "X={} Y={} Z={} at {}",
                    format_section(&sections[0]),
                    format_section(&sections[1]),
                    format_section(&sections[2]),
                    format_point(p)
                )
            });
            cocycle.observe(coc.eval(p)?, || {
                format!("X={} Y={} at {}", format_section(&sections[0]), format_section(&sections[1]), format_point(p))
            });
        }
    }
    report.push(Check::below("restriction_samples", restriction, EXACT_TOL));
    report.push(Check::below("model_sector", model, EXACT_TOL));
    report.push(Check::below("jacobi", jacobi, RESIDUAL_TOL));
    report.push(Check::below("closed_cocycle", cocycle, RESIDUAL_TOL));
    Ok(report)
}

/// The bracket `{σ, σ'} = ι#_{[F_σ, F_σ']}` on sections of `AV(A#)` for a
/// special Lie affgebroid.
#[derive(Debug, Clone, PartialEq)]
pub struct AffJacobiBracket {
    data: LieAffgebroidData,
    chart: SpecialDualChart,
    probes: Vec<Point>,
}

impl AffJacobiBracket {
    /// `w_names` label the full dual coordinates of `A†` (one per frame
    /// vector); the one solved from `⟨w, v⟩ = 1` disappears from the
    /// quotient. `c_name` is the adapted fibre coordinate of `AV(A#)`.
    pub fn new(data: LieAffgebroidData, w_names: Vec<String>, c_name: &str) -> Result<Self, BracketError> {
        let v = data.distinguished().ok_or(BracketError::NotSpecial)?.to_vec();
        for name in w_names.iter().chain(std::iter::once(&c_name.to_string())) {
            if data.base.contains(name) {
                return Err(BracketError::NameClash(name.clone()));
            }
        }
        for (i, name) in w_names.iter().enumerate() {
            if w_names[..i].contains(name) || name == c_name {
                return Err(BracketError::NameClash(name.clone()));
            }
        }
        let chart = SpecialDualChart::new(v, w_names, c_name)?;
        let mut vars = data.base.clone();
        vars.extend(chart.quotient_names());
        let probes = sampling::probes(&vars);
        Ok(Self { data, chart, probes })
    }

    /// Dual coordinates named `w1, …, wn` and fibre coordinate `s`.
    pub fn with_default_names(data: LieAffgebroidData) -> Result<Self, BracketError> {
        let names = (1..=data.rank()).map(|i| format!("w{i}")).collect();
        Self::new(data, names, "s")
    }

    pub fn data(&self) -> &LieAffgebroidData {
        &self.data
    }

    pub fn chart(&self) -> &SpecialDualChart {
        &self.chart
    }

    /// Coordinates on the base of `AV(A#)`: base coordinates, then the
    /// quotient fibre coordinates.
    pub fn vars(&self) -> Vec<String> {
        let mut v = self.data.base.clone();
        v.extend(self.chart.quotient_names());
        v
    }

    pub fn quotient_names(&self) -> Vec<String> {
        self.chart.quotient_names()
    }

    /// Section of `A` identified with `F_σ`.
    pub fn element(&self, sigma: &Expr) -> Result<Vec<Expr>, BracketError> {
        Ok(self.chart.element_of_section(sigma, &self.probes)?)
    }

    pub fn bracket(&self, sigma: &Expr, sigma2: &Expr) -> Result<Expr, BracketError> {
        let a = self.element(sigma)?;
        let b = self.element(sigma2)?;
        let u = self.data.bracket(&a, &b)?;
        Ok(self.chart.iota_sharp(&u)?.simplify())
    }

    /// `X_σ(f) = {σ, f} − {σ, 0}`.
    pub fn hamiltonian_operator(&self, sigma: &Expr, f: &Expr) -> Result<Expr, BracketError> {
        Ok((self.bracket(sigma, f)? - self.bracket(sigma, &Expr::zero())?).simplify())
    }
}

/// Free-function form of [`AffJacobiBracket::bracket`].
pub fn aff_jacobi_bracket(b: &AffJacobiBracket, sigma: &Expr, sigma2: &Expr) -> Result<Expr, BracketError> {
    b.bracket(sigma, sigma2)
}

/// Outcome of the two aff-Poisson criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct AffPoissonReport {
    pub derivation: Check,
    pub centrality: Check,
}

impl AffPoissonReport {
    pub fn is_aff_poisson(&self) -> bool {
        self.derivation.pass && self.centrality.pass
    }

    pub fn criteria_agree(&self) -> bool {
        self.derivation.pass == self.centrality.pass
    }

    pub fn to_report(&self) -> CheckReport {
        let mut r = CheckReport::new();
        r.push(self.derivation.clone());
        r.push(self.centrality.clone());
        r.push(Check::new(
            "criteria_agree",
            self.criteria_agree(),
            0.0,
            (!self.criteria_agree()).then(|| "derivation and centrality tests disagree".to_string()),
        ));
        r
    }
}

/// Runs both aff-Poisson tests: `X_σ` is a derivation on products of
/// coordinate functions that stay affine in the fibre, and `v` is central in
/// the hull algebroid. `samples` must bind the base and quotient coordinates.
pub fn is_aff_poisson(b: &AffJacobiBracket, samples: &[Point]) -> Result<AffPoissonReport, BracketError> {
    let base: Vec<Expr> = b.data.base.iter().map(Expr::var).collect();
    let fibre: Vec<Expr> = b.quotient_names().iter().map(Expr::var).collect();
    let mut gens: Vec<(Expr, bool)> = vec![(Expr::one(), false)];
    gens.extend(base.iter().map(|e| (e.clone(), false)));
    gens.extend(fibre.iter().map(|e| (e.clone(), true)));
    let sigmas: Vec<Expr> = gens.iter().map(|(e, _)| e.clone()).collect();

    let mut derivation = Worst::new();
    for sigma in &sigmas {
        let mut xs: BTreeMap<usize, Expr> = BTreeMap::new();
        for (i, (f, _)) in gens.iter().enumerate() {
            xs.insert(i, b.hamiltonian_operator(sigma, f)?);
        }
        for i in 0..gens.len() {
            for j in i..gens.len() {
                if gens[i].1 && gens[j].1 {
                    continue;
                }
                let (f, g) = (&gens[i].0, &gens[j].0);
                let prod = (f.clone() * g.clone()).simplify();
                let lhs = b.hamiltonian_operator(sigma, &prod)?;
                let res = (lhs - f.clone() * xs[&j].clone() - g.clone() * xs[&i].clone()).simplify();
                for p in samples {
                    derivation.observe(res.eval(p)?, || {
                        let mut s = String::new();
                        let _ = write!(s, "sigma={sigma}, f={f}, g={g} at {}", format_point(p));
                        s
                    });
                }
            }
        }
    }
    let hull = HullAlgebroidData::from_affgebroid(&b.data);
    let v = b.data.distinguished().ok_or(BracketError::NotSpecial)?;
    let central = hull.centrality(v, samples)?;
    Ok(AffPoissonReport {
        derivation: Check::below("derivation", derivation, RESIDUAL_TOL),
        centrality: Check::below("centrality", central, EXACT_TOL),
    })
}

/// Vector fields on `base × ℝ_t` projecting to `∂_t`: reference section
/// `∂_t`, frame `∂_{q_i}`. With a single `q` this is the structure whose
/// bracket is the Jacobi–Lie bracket of `∂_t + f ∂_q`.
pub fn unit_time_fields(space: &[String], time: &str) -> Result<LieAffgebroidData, BracketError> {
    let d = space.len();
    let mut base = space.to_vec();
    base.push(time.to_string());
    let zeros = vec![vec![Expr::zero(); d]; d];
    let mut anchor_ref = vec![Expr::zero(); d + 1];
    anchor_ref[d] = Expr::one();
    let anchor_frame = (0..d)
        .map(|i| (0..=d).map(|mu| if mu == i { Expr::one() } else { Expr::zero() }).collect())
        .collect();
    LieAffgebroidData::new(base, zeros.clone(), vec![zeros; d], anchor_ref, anchor_frame)
}

/// Atiyah algebroid of the trivial principal ℝ-bundle over a patch with
/// coordinates `base`: sections `X + g χ` stored as `[X^1, …, X^m, g]`,
/// bracket `([X, Y], X(g') − Y(g))`, distinguished section `χ`.
pub fn atiyah_algebroid(base: &[String]) -> Result<LieAffgebroidData, BracketError> {
    let m = base.len();
    let n = m + 1;
    let zeros = vec![vec![Expr::zero(); n]; n];
    let anchor_frame = (0..n)
        .map(|i| (0..m).map(|mu| if mu == i { Expr::one() } else { Expr::zero() }).collect())
        .collect();
    let mut chi = vec![Expr::zero(); n];
    chi[m] = Expr::one();
    LieAffgebroidData::new(base.to_vec(), zeros.clone(), vec![zeros; n], vec![Expr::zero(); m], anchor_frame)?
        .with_distinguished(chi)
}

/// `X + g χ` as a section of [`atiyah_algebroid`].
pub fn atiyah_section(x: &[Expr], g: Expr) -> Vec<Expr> {
    x.iter().cloned().chain(std::iter::once(g)).collect()
}

/// [`unit_time_fields`] extended by a central direction `χ`: sections
/// `∂_t + X + g χ`, distinguished section `χ`. The special affine structure
/// behind time-dependent mechanics.
pub fn clocked_atiyah(space: &[String], time: &str) -> Result<LieAffgebroidData, BracketError> {
    let d = space.len();
    let n = d + 1;
    let mut base = space.to_vec();
    base.push(time.to_string());
    let zeros = vec![vec![Expr::zero(); n]; n];
    let mut anchor_ref = vec![Expr::zero(); d + 1];
    anchor_ref[d] = Expr::one();
    let anchor_frame = (0..n)
        .map(|i| (0..=d).map(|mu| if mu == i && i < d { Expr::one() } else { Expr::zero() }).collect())
        .collect();
    let mut chi = vec![Expr::zero(); n];
    chi[d] = Expr::one();
    LieAffgebroidData::new(base, zeros.clone(), vec![zeros; n], anchor_ref, anchor_frame)?.with_distinguished(chi)
}

/// Random affine section `σ(x, w') = Σ P_j(x) w'_j + P_0(x)` with polynomial
/// coefficients.
pub fn random_affine_section<R: Rng + ?Sized>(rng: &mut R, base: &[String], fibre: &[String]) -> Expr {
    let mut s = Expr::random_polynomial(rng, base, 2, 3);
    for w in fibre {
        s = s + Expr::random_polynomial(rng, base, 2, 2) * Expr::var(w);
    }
    s.simplify()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse_free;
    use nalgebra::dvector;

    fn e(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rotation_affgebra_bracket() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let data = LieAffgebraData::abelian(j);
        let r = data.bracket(&dvector![1.0, 0.0], &dvector![0.0, 0.0]);
        assert_eq!(r, dvector![0.0, -1.0]);
        let a = dvector![0.3, -2.0];
        assert_eq!(data.bracket(&a, &a), dvector![0.0, 0.0]);
    }

    #[test]
    fn affgebra_verifier_outcomes() {
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 0.0, 0.0, 7.0]);
        assert!(verify_affgebra(&LieAffgebraData::abelian(d)).pass());
        let so3 = LieAffgebraData::cross_product(DMatrix::zeros(3, 3)).unwrap();
        assert!(verify_affgebra(&so3).pass());
        let bad = LieAffgebraData::cross_product(DMatrix::identity(3, 3)).unwrap();
        let report = verify_affgebra(&bad);
        assert!(report.get("skew").unwrap().pass);
        let jac = report.get("jacobi").unwrap();
        assert!(!jac.pass);
        assert!(jac.witness.as_ref().unwrap().starts_with('('));
    }

    #[test]
    fn cross_product_jacobiator_closed_form() {
        let bad = LieAffgebraData::cross_product(DMatrix::identity(3, 3)).unwrap();
        let (u1, u2, u3) = (dvector![0.2, -1.0, 0.5], dvector![1.5, 0.3, -0.7], dvector![-0.4, 0.9, 1.1]);
        let s = u1.cross(&u2) + u2.cross(&u3) + u3.cross(&u1);
        let j = bad.jacobiator(&u1, &u2, &u3);
        assert!((j + s).amax() < 1e-12);
    }

    #[test]
    fn rejects_non_antisymmetric_constants() {
        let mut c = vec![DMatrix::zeros(2, 2); 2];
        c[0][(0, 0)] = 1.0;
        assert!(matches!(
            LieAffgebraData::new(DMatrix::zeros(2, 2), c),
            Err(BracketError::NotAntisymmetric { i: 0, j: 0, k: 0, .. })
        ));
        let base = names(&["q", "t"]);
        let r = LieAffgebroidData::new(
            base,
            vec![vec![Expr::zero()]],
            vec![vec![vec![Expr::num(2.0)]]],
            vec![Expr::zero(), Expr::one()],
            vec![vec![Expr::one(), Expr::zero()]],
        );
        assert!(matches!(r, Err(BracketError::NotAntisymmetric { .. })));
    }

    #[test]
    fn time_fields_bracket_is_commutator() {
        let data = unit_time_fields(&names(&["q"]), "t").unwrap();
        let (f, g) = (e("q^2*t"), e("sin(q) + t"));
        let br = data.bracket(std::slice::from_ref(&f), std::slice::from_ref(&g)).unwrap();
        let x = vec![f.clone(), Expr::one()];
        let y = vec![g.clone(), Expr::one()];
        let comm = commutator(&x, &y, data.base());
        assert!(comm[1].is_zero());
        for p in sampling::grid(&["q", "t"], &[-1.0, 0.0, 0.5, 2.0]) {
            assert!((br[0].eval(&p).unwrap() - comm[0].eval(&p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn time_fields_verify_and_broken_anchor() {
        let data = unit_time_fields(&names(&["q"]), "t").unwrap();
        let samples = sampling::grid(&["q", "t"], &[-1.0, -0.3, 0.4, 1.2]);
        let report = verify_affgebroid(&data, &samples, 0).unwrap();
        assert!(report.pass(), "{report:?}");
        let broken = data.with_scaled_anchor(2.0);
        let report = verify_affgebroid(&broken, &samples, 0).unwrap();
        let leib = report.get("leibniz").unwrap();
        assert!(!leib.pass);
        assert!(leib.witness.is_some());
    }

    #[test]
    fn hull_restricts_to_input() {
        let data = unit_time_fields(&names(&["q"]), "t").unwrap();
        let samples = sampling::grid(&["q", "t"], &[-1.0, -0.3, 0.4, 1.2]);
        let hull = hull_extend(&data, &samples, 3).unwrap();
        assert_eq!(hull.restrict().unwrap(), data);
        let a0 = hull.unit(0);
        assert!(hull.bracket(&a0, &a0).unwrap().iter().all(Expr::is_zero));
        let report = verify_hull_extension(&data, &hull, &samples, 3).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn hull_extend_refuses_broken_input() {
        let data = unit_time_fields(&names(&["q"]), "t").unwrap().with_scaled_anchor(2.0);
        let samples = sampling::grid(&["q", "t"], &[-1.0, 0.4]);
        assert!(matches!(hull_extend(&data, &samples, 0), Err(BracketError::VerificationFailed(_))));
    }

    #[test]
    fn atiyah_examples() {
        let data = atiyah_algebroid(&names(&["x"])).unwrap();
        let r = data.bracket(&atiyah_section(&[Expr::one()], Expr::zero()), &atiyah_section(&[Expr::zero()], e("x"))).unwrap();
        assert_eq!(r, vec![Expr::zero(), Expr::one()]);
        let dx = atiyah_section(&[Expr::one()], Expr::zero());
        assert!(data.bracket(&dx, &dx).unwrap().iter().all(Expr::is_zero));
        let chi = atiyah_section(&[Expr::zero()], Expr::one());
        let any = atiyah_section(&[e("x^2")], e("sin(x)"));
        let r = data.bracket_linear(&any, &chi).unwrap();
        assert!(r.iter().all(Expr::is_zero));
    }

    #[test]
    fn atiyah_bracket_is_canonical() {
        let data = atiyah_algebroid(&names(&["x"])).unwrap();
        let b = AffJacobiBracket::new(data, names(&["p", "e"]), "s").unwrap();
        let (s1, s2) = (e("x^2*p + x"), e("p*sin(x) - x^3"));
        let got = b.bracket(&s1, &s2).unwrap();
        let want = s1.diff("p") * s2.diff("x") - s1.diff("x") * s2.diff("p");
        for p in sampling::grid(&["x", "p"], &[-1.1, 0.3, 0.9]) {
            assert!((got.eval(&p).unwrap() - want.eval(&p).unwrap()).abs() < 1e-12);
        }
        assert!(b.bracket(&s1, &s1).unwrap().is_zero());
        assert!(matches!(
            b.bracket(&e("p^2"), &s2),
            Err(BracketError::NonAffineSection(_))
        ));
    }

    #[test]
    fn aff_poisson_criteria() {
        let data = atiyah_algebroid(&names(&["x"])).unwrap();
        let b = AffJacobiBracket::with_default_names(data).unwrap();
        let samples = sampling::grid(&b.vars(), &[-0.7, 0.2, 1.3]);
        let r = is_aff_poisson(&b, &samples).unwrap();
        assert!(r.is_aff_poisson() && r.criteria_agree(), "{r:?}");

        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let aff = LieAffgebraData::abelian(d).with_distinguished(dvector![0.0, 1.0]).unwrap();
        let b = AffJacobiBracket::with_default_names(aff.to_affgebroid()).unwrap();
        let samples = sampling::grid(&b.vars(), &[-0.7, 0.2, 1.3]);
        let r = is_aff_poisson(&b, &samples).unwrap();
        assert!(!r.derivation.pass && !r.centrality.pass, "{r:?}");
        assert!(r.derivation.witness.is_some());

        let flat = LieAffgebraData::abelian(DMatrix::zeros(2, 2))
            .with_distinguished(dvector![0.3, -1.0])
            .unwrap();
        let b = AffJacobiBracket::with_default_names(flat.to_affgebroid()).unwrap();
        let samples = sampling::grid(&b.vars(), &[-0.7, 0.2, 1.3]);
        assert!(is_aff_poisson(&b, &samples).unwrap().is_aff_poisson());
    }

    #[test]
    fn clocked_structure_is_aff_poisson() {
        let data = clocked_atiyah(&names(&["q"]), "t").unwrap();
        let samples = sampling::grid(&["q", "t"], &[-1.0, 0.4, 1.2]);
        assert!(verify_affgebroid(&data, &samples, 1).unwrap().pass());
        let b = AffJacobiBracket::new(data, names(&["p", "e"]), "s").unwrap();
        let samples = sampling::grid(&b.vars(), &[-0.7, 0.2, 1.3]);
        let r = is_aff_poisson(&b, &samples).unwrap();
        assert!(r.is_aff_poisson(), "{r:?}");
    }

    #[test]
    fn central_affgebra_constant_sections() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let aff = LieAffgebraData::abelian(d).with_distinguished(dvector![0.0, 1.0]).unwrap();
        let b = AffJacobiBracket::with_default_names(aff.to_affgebroid()).unwrap();
        let r = b.bracket(&Expr::num(2.0), &Expr::num(-1.0)).unwrap();
        assert!(r.as_constant().is_some(), "{r}");
    }
}
