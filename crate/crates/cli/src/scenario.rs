//! Scenario files: TOML with a header (`id`, `kind`, `description`, `seed`)
//! and one section named after the kind.

use std::collections::BTreeMap;

use affgeo::symexpr::{parse, Expr, VarContext, VarRole};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    AffineAxioms,
    Duality,
    AffgebraVerify,
    AffgebroidVerify,
    AffPoisson,
    TwoForm,
    ReductionCheck,
    Timedep,
    Newton,
    CompareFrames,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::AffineAxioms,
        Kind::Duality,
        Kind::AffgebraVerify,
        Kind::AffgebroidVerify,
        Kind::AffPoisson,
        Kind::TwoForm,
        Kind::ReductionCheck,
        Kind::Timedep,
        Kind::Newton,
        Kind::CompareFrames,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::AffineAxioms => "affine-axioms",
            Kind::Duality => "duality",
            Kind::AffgebraVerify => "affgebra-verify",
            Kind::AffgebroidVerify => "affgebroid-verify",
            Kind::AffPoisson => "aff-poisson",
            Kind::TwoForm => "two-form",
            Kind::ReductionCheck => "reduction-check",
            Kind::Timedep => "timedep",
            Kind::Newton => "newton",
            Kind::CompareFrames => "compare-frames",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub kind: Kind,
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub affine: Option<AffineSection>,
    pub duality: Option<DualitySection>,
    pub affgebra: Option<AffgebraSection>,
    pub affgebroid: Option<AffgebroidSection>,
    pub aff_poisson: Option<AffPoissonSection>,
    pub two_form: Option<TwoFormSection>,
    pub reduction: Option<ReductionSection>,
    pub timedep: Option<TimedepSection>,
    pub newton: Option<NewtonSection>,
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub name: String,
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSection {
    pub dim: usize,
    pub charts: Vec<ChartSpec>,
    pub samples: usize,
    /// Output dimension of the random bi-affine maps.
    #[serde(default = "one")]
    pub biaffine_outputs: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualitySection {
    pub dims: Vec<usize>,
    pub points: usize,
    pub base: Vec<String>,
    pub fiber: String,
    pub sections: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BilinearPart {
    Abelian,
    CrossProduct,
}

/// A matrix given by name (`zero`, `identity`, `random`) or by rows.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffgebraCase {
    pub name: String,
    pub dim: usize,
    pub bilinear: BilinearPart,
    pub d: MatrixSpec,
    /// When present, the check passes iff the verdict matches and, for
    /// `fail`, a witness is reported.
    pub expect: Option<Expect>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffgebraSection {
    pub cases: Vec<AffgebraCase>,
}

/// The structures the verifiers know how to build.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "structure", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StructureSpec {
    UnitTimeFields { space: Vec<String>, time: String },
    ClockedAtiyah { space: Vec<String>, time: String },
    Atiyah { base: Vec<String> },
    Affgebra {
        dim: usize,
        bilinear: BilinearPart,
        d: MatrixSpec,
        distinguished: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct AffgebroidSection {
    #[serde(flatten)]
    pub structure: StructureSpec,
    /// Values per base coordinate; samples are the full grid.
    pub grid: Vec<f64>,
    #[serde(default)]
    pub hull: bool,
    pub anchor_scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NamedStructure {
    pub name: String,
    #[serde(flatten)]
    pub structure: StructureSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffPoissonSection {
    /// Bases on which the Atiyah bracket is compared with the canonical one.
    pub canonical_bases: Vec<Vec<String>>,
    pub points: usize,
    pub pairs: usize,
    pub structures: Vec<NamedStructure>,
    /// Values per coordinate for the aff-Poisson criteria.
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoFormSection {
    pub base: Vec<String>,
    pub momenta: Vec<String>,
    pub fiber: String,
    pub sections: Vec<String>,
    pub grid: Vec<f64>,
    pub random_sections: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionVariant {
    pub map: ReductionKind,
    pub expect: Expect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionKind {
    Standard,
    Flipped,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSection {
    pub dim: usize,
    pub fiber: String,
    pub sections: Vec<String>,
    pub grid: Vec<f64>,
    pub variants: Vec<ReductionVariant>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedepSection {
    pub dim: usize,
    pub hamiltonian: String,
    pub initial: BTreeMap<String, f64>,
    pub step: f64,
    pub duration: f64,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub random_hamiltonians: usize,
    /// Exact solution, as expressions in the time coordinate.
    #[serde(default)]
    pub closed_form: BTreeMap<String, String>,
    #[serde(default = "closed_form_tol")]
    pub closed_form_tol: f64,
    pub period: Option<f64>,
    #[serde(default = "period_tol")]
    pub period_tol: f64,
    #[serde(default = "energy_tol")]
    pub energy_tol: f64,
}

fn closed_form_tol() -> f64 {
    1e-6
}

fn period_tol() -> f64 {
    1e-9
}

fn energy_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPhase {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSection {
    pub dim: usize,
    pub mass: f64,
    pub potential: String,
    pub frame: Vec<f64>,
    pub initial: InitialPhase,
    pub step: f64,
    pub duration: f64,
    /// Spatial boost for the gauge round trip.
    pub boost: Option<Vec<f64>>,
    #[serde(default = "energy_tol")]
    pub energy_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPotential {
    pub name: String,
    pub phi: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub dim: usize,
    pub mass: f64,
    pub potentials: Vec<NamedPotential>,
    pub frame: Vec<f64>,
    pub initial: InitialPhase,
    #[serde(default)]
    pub boosts: Vec<Vec<f64>>,
    #[serde(default)]
    pub random_boosts: usize,
    #[serde(default = "boost_scale")]
    pub boost_scale: f64,
    pub step: f64,
    pub duration: f64,
    #[serde(default = "energy_tol")]
    pub energy_tol: f64,
}

fn boost_scale() -> f64 {
    0.5
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let s: Scenario = toml::from_str(text).map_err(|e| RunError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), RunError> {
        let present = [
            (Kind::AffineAxioms, self.affine.is_some()),
            (Kind::Duality, self.duality.is_some()),
            (Kind::AffgebraVerify, self.affgebra.is_some()),
            (Kind::AffgebroidVerify, self.affgebroid.is_some()),
            (Kind::AffPoisson, self.aff_poisson.is_some()),
            (Kind::TwoForm, self.two_form.is_some()),
            (Kind::ReductionCheck, self.reduction.is_some()),
            (Kind::Timedep, self.timedep.is_some()),
            (Kind::Newton, self.newton.is_some()),
            (Kind::CompareFrames, self.compare.is_some()),
        ];
        for (kind, has) in present {
            if kind == self.kind && !has {
                return Err(RunError::Parse(format!("kind `{}` requires a [{}] section", kind.name(), section_name(kind))));
            }
            if kind != self.kind && has {
                return Err(RunError::Parse(format!(
                    "section [{}] does not belong to kind `{}`",
                    section_name(kind),
                    self.kind.name()
                )));
            }
        }
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(RunError::Parse(format!("invalid scenario id `{}`", self.id)));
        }
        Ok(())
    }
}

pub fn section_name(kind: Kind) -> &'static str {
    match kind {
        Kind::AffineAxioms => "affine",
        Kind::Duality => "duality",
        Kind::AffgebraVerify => "affgebra",
        Kind::AffgebroidVerify => "affgebroid",
        Kind::AffPoisson => "aff_poisson",
        Kind::TwoForm => "two_form",
        Kind::ReductionCheck => "reduction",
        Kind::Timedep => "timedep",
        Kind::Newton => "newton",
        Kind::CompareFrames => "compare",
    }
}

/// Parses `text` with every variable required to be one of `vars`.
pub fn expr_in(text: &str, vars: &[String], what: &str) -> Result<Expr, RunError> {
    let ctx = VarContext::from_names(vars, VarRole::Base).map_err(|e| RunError::Parse(e.to_string()))?;
    parse(text, &ctx).map_err(|e| RunError::Parse(format!("{what}: {e}")))
}

pub fn vector(v: &[f64], len: usize, what: &str) -> Result<DVector<f64>, RunError> {
    if v.len() != len {
        return Err(RunError::Parse(format!("{what}: expected {len} components, found {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

pub fn matrix_rows(rows: &[Vec<f64>], n: usize, m: usize, what: &str) -> Result<DMatrix<f64>, RunError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != m) {
        return Err(RunError::Parse(format!("{what}: expected a {n}x{m} matrix")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}
