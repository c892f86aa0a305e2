//! Sum-of-monomials normal form.
//!
//! Polynomial structure is multiplied out and like terms are collected.
//! Function calls and quotients by non-monomials are kept as opaque atoms
//! (with their arguments normalised), so the result is a Laurent polynomial
//! in variables and atoms.

use std::collections::{BTreeMap, HashMap};

use super::Expr;

/// Expansion gives up (leaving the expression as is) beyond this many terms.
const MAX_TERMS: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Atom {
    opaque: bool,
    key: String,
}

type Monomial = BTreeMap<Atom, i32>;
type Poly = BTreeMap<Monomial, f64>;

#[derive(Default)]
struct Expander {
    atoms: HashMap<String, Expr>,
}

fn constant(c: f64) -> Poly {
    let mut p = Poly::new();
    if c != 0.0 {
        p.insert(Monomial::new(), c);
    }
    p
}

fn as_constant(p: &Poly) -> Option<f64> {
    match p.len() {
        0 => Some(0.0),
        1 => p.get(&Monomial::new()).copied(),
        _ => None,
    }
}

fn add_into(acc: &mut Poly, p: Poly, sign: f64) {
    for (m, c) in p {
        let e = acc.entry(m.clone()).or_insert(0.0);
        *e += sign * c;
        if *e == 0.0 {
            acc.remove(&m);
        }
    }
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut m = a.clone();
    for (atom, k) in b {
        let e = m.entry(atom.clone()).or_insert(0);
        *e += k;
        if *e == 0 {
            m.remove(atom);
        }
    }
    m
}

fn mul(a: &Poly, b: &Poly) -> Option<Poly> {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            add_into(&mut out, Poly::from([(mul_monomials(ma, mb), ca * cb)]), 1.0);
        }
        if out.len() > MAX_TERMS {
            return None;
        }
    }
    Some(out)
}

impl Expander {
    fn atom(&mut self, e: Expr) -> Poly {
        let (opaque, key) = match &e {
            Expr::Var(n) => (false, n.clone()),
            other => (true, other.to_string()),
        };
        self.atoms.entry(key.clone()).or_insert(e);
        Poly::from([(Monomial::from([(Atom { opaque, key }, 1)]), 1.0)])
    }

    fn power(&mut self, p: Poly, k: i32) -> Option<Poly> {
        if k >= 0 {
            let mut acc = constant(1.0);
            for _ in 0..k {
                acc = mul(&acc, &p)?;
            }
            return Some(acc);
        }
        if p.is_empty() {
            return None;
        }
        if p.len() == 1 {
            let (m, c) = p.into_iter().next()?;
            if c == 0.0 {
                return None;
            }
            let m = m.into_iter().map(|(a, e)| (a, e * k)).collect();
            return Some(Poly::from([(m, c.powi(k))]));
        }
        let base = self.render(&p);
        let atom = self.atom(base);
        let (m, c) = atom.into_iter().next()?;
        Some(Poly::from([(m.into_keys().map(|a| (a, k)).collect(), c)]))
    }

    /// `1/e`, taken factor by factor so a factored denominator stays factored.
    fn reciprocal(&mut self, e: &Expr) -> Option<Poly> {
        match e {
            Expr::Mul(a, b) => mul(&self.reciprocal(a)?, &self.reciprocal(b)?),
            Expr::Neg(a) => {
                let mut acc = Poly::new();
                add_into(&mut acc, self.reciprocal(a)?, -1.0);
                Some(acc)
            }
            Expr::Pow(a, k) => {
                let base = self.poly(a)?;
                self.power(base, -k)
            }
            _ => {
                let den = self.poly(e)?;
                if as_constant(&den) == Some(0.0) {
                    return None;
                }
                self.power(den, -1)
            }
        }
    }

    fn poly(&mut self, e: &Expr) -> Option<Poly> {
        Some(match e {
            Expr::Num(v) => constant(*v),
            Expr::Var(_) => self.atom(e.clone()),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let mut acc = self.poly(a)?;
                let sign = if matches!(e, Expr::Add(..)) { 1.0 } else { -1.0 };
                add_into(&mut acc, self.poly(b)?, sign);
                acc
            }
            Expr::Neg(a) => {
                let mut acc = Poly::new();
                add_into(&mut acc, self.poly(a)?, -1.0);
                acc
            }
            Expr::Mul(a, b) => mul(&self.poly(a)?, &self.poly(b)?)?,
            Expr::Div(a, b) => {
                let inv = self.reciprocal(b)?;
                mul(&self.poly(a)?, &inv)?
            }
            Expr::Pow(a, k) => {
                let base = self.poly(a)?;
                self.power(base, *k)?
            }
            Expr::Call(f, a) => {
                let inner = self.poly(a)?;
                let arg = self.render(&inner);
                self.atom(Expr::call(*f, arg))
            }
        })
    }

    fn render(&self, p: &Poly) -> Expr {
        let degree = |m: &Monomial| -> i32 { m.values().filter(|k| **k > 0).sum() };
        let mut terms: Vec<(&Monomial, f64)> = p.iter().map(|(m, c)| (m, *c)).collect();
        terms.sort_by(|(a, _), (b, _)| degree(b).cmp(&degree(a)).then_with(|| a.cmp(b)));
        let mut out = Expr::zero();
        for (m, c) in terms {
            let (mut num, mut den) = (Expr::Num(c), Expr::one());
            for (atom, k) in m {
                let base = self.atoms[&atom.key].clone();
                if *k > 0 {
                    num = num * base.powi(*k);
                } else {
                    den = den * base.powi(-k);
                }
            }
            out = out + num / den;
        }
        out
    }
}

/// Expanded normal form of `e`, or `e` simplified when expansion would be
/// too large or meets a zero divisor.
pub(super) fn expand(e: &Expr) -> Expr {
    let mut x = Expander::default();
    match x.poly(e) {
        Some(p) => x.render(&p),
        None => e.simplify(),
    }
}
