//! Scalar expressions over named coordinates.
//!
//! Every coordinate function in the crate (sections, Hamiltonians, structure
//! functions, anchors) is an [`Expr`]. Expressions are immutable trees with a
//! conservative simplifier built into the constructors: constants are folded,
//! `0` and `1` identities are applied, and nested constant factors are
//! merged. [`Expr::expand`] multiplies out and collects like terms for
//! display; equality checks still go through evaluation at sample points.

mod compiled;
mod expand;
mod parse;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::Rng;

pub use compiled::Compiled;
pub use parse::{parse, parse_free};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("duplicate variable `{0}` in context")]
    DuplicateVariable(String),
}

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Sqrt if x < 0.0 => Err(ExprError::Domain(format!("sqrt of negative value {x}"))),
            Func::Sqrt => Ok(x.sqrt()),
        }
    }
}

/// A scalar field on a coordinate patch.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Role of a coordinate inside a [`VarContext`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarRole {
    Base,
    Fiber,
    Time,
    AvFiber,
}

/// Ordered, duplicate-free list of coordinate names with their roles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarContext {
    vars: Vec<(String, VarRole)>,
}

impl VarContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<S: AsRef<str>>(names: &[S], role: VarRole) -> Result<Self, ExprError> {
        let mut ctx = Self::new();
        for n in names {
            ctx.push(n.as_ref(), role)?;
        }
        Ok(ctx)
    }

    pub fn push(&mut self, name: &str, role: VarRole) -> Result<(), ExprError> {
        if self.contains(name) {
            return Err(ExprError::DuplicateVariable(name.to_string()));
        }
        self.vars.push((name.to_string(), role));
        Ok(())
    }

    /// Builder form of [`VarContext::push`]; panics on duplicates.
    pub fn with(mut self, name: &str, role: VarRole) -> Self {
        self.push(name, role).expect("duplicate variable in context");
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.iter().any(|(n, _)| n == name)
    }

    pub fn role(&self, name: &str) -> Option<VarRole> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|(n, _)| n.as_str())
    }

    pub fn names_with_role(&self, role: VarRole) -> Vec<String> {
        self.vars
            .iter()
            .filter(|(_, r)| *r == role)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Source of variable values for [`Expr::eval`].
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

/// Parallel name/value slices; the cheapest binding for small state vectors.
#[derive(Debug, Clone, Copy)]
pub struct Slots<'a> {
    pub names: &'a [String],
    pub values: &'a [f64],
}

impl<'a> Slots<'a> {
    pub fn new(names: &'a [String], values: &'a [f64]) -> Self {
        debug_assert_eq!(names.len(), values.len());
        Self { names, values }
    }
}

impl Bindings for Slots<'_> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    pub fn powi(self, k: i32) -> Expr {
        match (k, &self) {
            (0, _) => Expr::one(),
            (1, _) => self,
            (_, Expr::Num(v)) => {
                let r = v.powi(k);
                if r.is_finite() {
                    Expr::Num(r)
                } else {
                    Expr::Pow(Box::new(self), k)
                }
            }
            (_, Expr::Pow(base, j)) => match j.checked_mul(k) {
                Some(jk) => (**base).clone().powi(jk),
                None => Expr::Pow(Box::new(self), k),
            },
            _ => Expr::Pow(Box::new(self), k),
        }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        if let Expr::Num(v) = arg {
            if let Ok(r) = f.apply(v) {
                if r.is_finite() {
                    return Expr::Num(r);
                }
            }
        }
        Expr::Call(f, Box::new(arg))
    }

    pub fn sin(self) -> Expr {
        Expr::call(Func::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::call(Func::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::call(Func::Sqrt, self)
    }

    /// Names of all variables occurring in the expression.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(n) => n == name,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(name) || b.depends_on(name)
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(name),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
        }
    }

    /// Exact symbolic partial derivative with respect to `v`.
    pub fn diff(&self, v: &str) -> Expr {
        match self {
            Expr::Num(_) => Expr::zero(),
            Expr::Var(n) => {
                if n == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Add(a, b) => a.diff(v) + b.diff(v),
            Expr::Sub(a, b) => a.diff(v) - b.diff(v),
            Expr::Mul(a, b) => a.diff(v) * (**b).clone() + (**a).clone() * b.diff(v),
            Expr::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero() {
                    da / (**b).clone()
                } else {
                    (da * (**b).clone() - (**a).clone() * db) / (**b).clone().powi(2)
                }
            }
            Expr::Pow(a, k) => {
                Expr::Num(*k as f64) * (**a).clone().powi(k - 1) * a.diff(v)
            }
            Expr::Neg(a) => -a.diff(v),
            Expr::Call(f, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                let arg = (**a).clone();
                let outer = match f {
                    Func::Sin => arg.cos(),
                    Func::Cos => -arg.sin(),
                    Func::Exp => arg.exp(),
                    Func::Sqrt => Expr::Num(0.5) / arg.sqrt(),
                };
                outer * da
            }
        }
    }

    /// Gradient with respect to an ordered list of variables.
    pub fn grad<S: AsRef<str>>(&self, vars: &[S]) -> Vec<Expr> {
        vars.iter().map(|v| self.diff(v.as_ref())).collect()
    }

    /// Replace every occurrence of `name` by `with`, re-simplifying on the way up.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        self.map_vars(&|n| if n == name { Some(with.clone()) } else { None })
    }

    pub fn substitute_all(&self, map: &BTreeMap<String, Expr>) -> Expr {
        self.map_vars(&|n| map.get(n).cloned())
    }

    fn map_vars(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(n) => f(n).unwrap_or_else(|| Expr::Var(n.clone())),
            Expr::Add(a, b) => a.map_vars(f) + b.map_vars(f),
            Expr::Sub(a, b) => a.map_vars(f) - b.map_vars(f),
            Expr::Mul(a, b) => a.map_vars(f) * b.map_vars(f),
            Expr::Div(a, b) => a.map_vars(f) / b.map_vars(f),
            Expr::Pow(a, k) => a.map_vars(f).powi(*k),
            Expr::Neg(a) => -a.map_vars(f),
            Expr::Call(g, a) => Expr::call(*g, a.map_vars(f)),
        }
    }

    /// Rebuild the tree through the simplifying constructors.
    pub fn simplify(&self) -> Expr {
        self.map_vars(&|_| None)
    }

    /// Sum of monomials with like terms collected; calls and non-monomial
    /// quotients are kept as atoms.
    pub fn expand(&self) -> Expr {
        expand::expand(self)
    }

    /// Pointwise evaluation. Fails on unbound variables and on domain errors
    /// (division by zero, square root of a negative number, overflow).
    pub fn eval<B: Bindings + ?Sized>(&self, b: &B) -> Result<f64, ExprError> {
        let r = match self {
            Expr::Num(v) => *v,
            Expr::Var(n) => b.lookup(n).ok_or_else(|| ExprError::Unbound(n.clone()))?,
            Expr::Add(x, y) => x.eval(b)? + y.eval(b)?,
            Expr::Sub(x, y) => x.eval(b)? - y.eval(b)?,
            Expr::Mul(x, y) => x.eval(b)? * y.eval(b)?,
            Expr::Div(x, y) => {
                let den = y.eval(b)?;
                if den == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                x.eval(b)? / den
            }
            Expr::Pow(x, k) => {
                let base = x.eval(b)?;
                if base == 0.0 && *k < 0 {
                    return Err(ExprError::Domain("zero raised to a negative power".into()));
                }
                base.powi(*k)
            }
            Expr::Neg(x) => -x.eval(b)?,
            Expr::Call(f, x) => f.apply(x.eval(b)?)?,
        };
        if r.is_finite() {
            Ok(r)
        } else {
            Err(ExprError::Domain(format!("non-finite value while evaluating `{self}`")))
        }
    }

    /// Random polynomial with `terms` monomials of total degree at most
    /// `max_degree`, coefficients uniform in [-1, 1].
    pub fn random_polynomial<R: Rng + ?Sized, S: AsRef<str>>(
        rng: &mut R,
        vars: &[S],
        max_degree: u32,
        terms: usize,
    ) -> Expr {
        let mut acc = Expr::zero();
        for _ in 0..terms {
            let mut mono = Expr::Num(rng.gen_range(-1.0..=1.0));
            if !vars.is_empty() {
                let deg = rng.gen_range(0..=max_degree);
                for _ in 0..deg {
                    let v = &vars[rng.gen_range(0..vars.len())];
                    mono = mono * Expr::var(v.as_ref());
                }
            }
            acc = acc + mono;
        }
        acc
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) | Expr::Neg(_) => 1,
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 4,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(f, "{v:.1}")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Expr::Pow(a, k) => {
                write_child(f, a, 4)?;
                write!(f, "^{k}")
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a + b),
            _ if self.is_zero() => rhs,
            _ if rhs.is_zero() => self,
            (_, Expr::Neg(r)) => self - (**r).clone(),
            (_, Expr::Num(b)) if *b < 0.0 => self - Expr::Num(-b),
            _ => Expr::Add(Box::new(self), Box::new(rhs)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a - b),
            _ if rhs.is_zero() => self,
            _ if self.is_zero() => -rhs,
            _ if self == rhs => Expr::zero(),
            (_, Expr::Neg(r)) => self + (**r).clone(),
            _ => Expr::Sub(Box::new(self), Box::new(rhs)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        if self.is_zero() || rhs.is_zero() {
            return Expr::zero();
        }
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a * b),
            (a, b) if a.is_one() => b,
            (a, b) if b.is_one() => a,
            (Expr::Num(-1.0), b) => -b,
            (a, Expr::Num(-1.0)) => -a,
            (a, Expr::Num(b)) => Expr::Num(b) * a,
            (Expr::Num(a), Expr::Mul(x, y)) if matches!(*x, Expr::Num(_)) => {
                let c = x.as_constant().unwrap_or(1.0);
                Expr::Num(a * c) * *y
            }
            (Expr::Neg(a), Expr::Neg(b)) => *a * *b,
            (Expr::Neg(a), b) => -(*a * b),
            (a, Expr::Neg(b)) => -(a * *b),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self, rhs) {
            (Expr::Num(a), Expr::Num(b)) if b != 0.0 => Expr::Num(a / b),
            (a, b) if a.is_zero() && !b.is_zero() => Expr::zero(),
            (a, b) if b.is_one() => a,
            (a, Expr::Num(-1.0)) => -a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(-v),
            Expr::Neg(a) => *a,
            Expr::Sub(a, b) => Expr::Sub(b, a),
            other => Expr::Neg(Box::new(other)),
        }
    }
}

macro_rules! ref_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $tr::$m(self.clone(), rhs.clone())
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $tr::$m(self.clone(), rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $tr::$m(self, rhs.clone())
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                $tr::$m(self, Expr::Num(rhs))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $tr::$m(Expr::Num(self), rhs)
            }
        }
    )*};
}

ref_ops!(Add add, Sub sub, Mul mul, Div div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |acc, e| acc + e)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Num(v)
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_free(s)
    }
}

/// Free function form of [`Expr::diff`].
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    e.diff(v)
}

/// Free function form of [`Expr::eval`].
pub fn evaluate<B: Bindings + ?Sized>(e: &Expr, point: &B) -> Result<f64, ExprError> {
    e.eval(point)
}

/// Evaluate every expression of a slice at the same point.
pub fn eval_all<B: Bindings + ?Sized>(es: &[Expr], point: &B) -> Result<Vec<f64>, ExprError> {
    es.iter().map(|e| e.eval(point)).collect()
}
