//! Pass/fail records shared by the verifiers.

use serde::Serialize;

/// One named check with its worst residual and an optional witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub pass: bool,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    pub fn new(check: impl Into<String>, pass: bool, residual: f64, witness: Option<String>) -> Self {
        Self {
            check: check.into(),
            pass,
            residual,
            witness,
        }
    }

    /// Passes iff `worst.value < tol`; the witness is kept only on failure.
    pub fn below(check: impl Into<String>, worst: Worst, tol: f64) -> Self {
        let pass = worst.value < tol;
        Self {
            check: check.into(),
            pass,
            residual: worst.value,
            witness: if pass { None } else { worst.witness },
        }
    }
}

/// A list of checks; passes iff every check passes.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.checks.extend(other.checks);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.check == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Running maximum of residuals, remembering where the maximum occurred.
/// Non-finite residuals count as infinite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Worst {
    pub value: f64,
    pub witness: Option<String>,
}

impl Worst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, residual: f64, witness: impl FnOnce() -> String) {
        let r = if residual.is_finite() { residual.abs() } else { f64::INFINITY };
        if r > self.value {
            self.value = r;
            self.witness = Some(witness());
        }
    }

    pub fn merge(&mut self, other: Worst) {
        if other.value > self.value {
            *self = other;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_tracks_maximum_and_nan() {
        let mut w = Worst::new();
        w.observe(0.0, || "zero".into());
        assert_eq!(w.witness, None);
        w.observe(-2.0, || "a".into());
        w.observe(1.0, || "b".into());
        assert_eq!((w.value, w.witness.as_deref()), (2.0, Some("a")));
        w.observe(f64::NAN, || "nan".into());
        assert_eq!(w.value, f64::INFINITY);
        let c = Check::below("x", w, 1e-9);
        assert!(!c.pass);
        assert_eq!(c.witness.as_deref(), Some("nan"));
    }

    #[test]
    fn report_conjunction() {
        let mut r = CheckReport::new();
        assert!(r.pass());
        r.push(Check::new("a", true, 0.0, None));
        r.push(Check::new("b", false, 1.0, Some("w".into())));
        assert!(!r.pass());
        assert_eq!(r.failures().count(), 1);
        assert!(r.get("a").unwrap().pass);
    }
}
