//! Abstract syntax for Time Window Temporal Logic formulas.
//!
//! A formula is built from *hold* literals (`H^d A`, `H^d !A`), the Boolean
//! connectives, *concatenation* (`phi . psi`) and the *within* window
//! (`[phi]^[a,b]`). The concrete text grammar is implemented in [`parse`] and
//! the canonical printer is the [`Display`] impl of [`Formula`].
//!
//! Durations of hold literals are counted in samples; within bounds are given
//! in time units and must lie on the sampling grid of the word the formula is
//! evaluated on.

mod parser;
mod printer;

use std::fmt::{self, Display};

use crate::trace::PredicateTable;

pub use parser::{parse, ParseError};

/// Name of an atomic proposition, resolved against a [`PredicateTable`] before evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomRef(String);

impl AtomRef {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty(), "atom names are non-empty");
        Self(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl Display for AtomRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A TWTL formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    /// `H^d A` (or `H^d !A` when `negated`): the atom holds (fails) at each of
    /// the `d + 1` samples starting at the evaluation point.
    Hold {
        duration: u64,
        atom: AtomRef,
        negated: bool,
    },
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    /// `lhs . rhs`: the word splits into a prefix satisfying `lhs` followed
    /// immediately by a suffix satisfying `rhs`.
    Concat(Box<Formula>, Box<Formula>),
    /// `[inner]^[start,end]`: `inner` is satisfied by some subword starting in
    /// `[t + start, t + end]` and ending at `t + end`.
    Within {
        inner: Box<Formula>,
        start: u64,
        end: u64,
    },
}

impl Formula {
    pub fn hold(duration: u64, atom: impl Into<String>) -> Self {
        Formula::Hold {
            duration,
            atom: AtomRef::new(atom),
            negated: false,
        }
    }

    pub fn hold_not(duration: u64, atom: impl Into<String>) -> Self {
        Formula::Hold {
            duration,
            atom: AtomRef::new(atom),
            negated: true,
        }
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(sub: Formula) -> Self {
        Formula::Not(Box::new(sub))
    }

    pub fn concat(lhs: Formula, rhs: Formula) -> Self {
        Formula::Concat(Box::new(lhs), Box::new(rhs))
    }

    pub fn within(inner: Formula, start: u64, end: u64) -> Self {
        Formula::Within {
            inner: Box::new(inner),
            start,
            end,
        }
    }

    /// Nesting depth; a hold literal has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Hold { .. } => 1,
            Formula::Not(sub) | Formula::Within { inner: sub, .. } => 1 + sub.depth(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Concat(l, r) => {
                1 + l.depth().max(r.depth())
            }
        }
    }

    /// All atom references in left-to-right order, duplicates included.
    pub fn atoms(&self) -> Vec<&AtomRef> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a AtomRef>) {
        match self {
            Formula::Hold { atom, .. } => out.push(atom),
            Formula::Not(sub) | Formula::Within { inner: sub, .. } => sub.collect_atoms(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Concat(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        printer::write_formula(f, self)
    }
}

/// Canonical text of `f`; `parse(&format(f))` yields `f` again.
pub fn format(f: &Formula) -> String {
    f.to_string()
}

/// Time horizon of a formula, in time units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Horizon(f64);

impl Horizon {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Minimal word duration needed to fully evaluate `f` with sampling step `dt`.
pub fn horizon(f: &Formula, dt: f64) -> Horizon {
    fn go(f: &Formula, dt: f64) -> f64 {
        match f {
            Formula::Hold { duration, .. } => *duration as f64 * dt,
            Formula::And(l, r) | Formula::Or(l, r) => go(l, dt).max(go(r, dt)),
            Formula::Not(sub) => go(sub, dt),
            Formula::Concat(l, r) => go(l, dt) + go(r, dt) + dt,
            Formula::Within { end, .. } => *end as f64,
        }
    }
    Horizon(go(f, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: String) -> Self {
        Self {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Self {
        Self {
            severity: Severity::Warning,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Error => write!(f, "error: {}", self.message),
            Severity::Warning => write!(f, "warning: {}", self.message),
        }
    }
}

/// Checks atom resolution and window well-formedness.
///
/// A within window that is shorter than the horizon of its body is legal (the
/// body can never be satisfied inside it) and only yields a warning.
pub fn validate(f: &Formula, table: &PredicateTable, dt: f64) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut unresolved: Vec<&str> = Vec::new();
    for atom in f.atoms() {
        if table.get(atom.name()).is_none() && !unresolved.contains(&atom.name()) {
            unresolved.push(atom.name());
        }
    }
    for name in unresolved {
        out.push(Diagnostic::error(format!("unresolved atom {name}")));
    }
    validate_windows(f, dt, &mut out);
    out
}

fn validate_windows(f: &Formula, dt: f64, out: &mut Vec<Diagnostic>) {
    match f {
        Formula::Hold { .. } => {}
        Formula::Not(sub) => validate_windows(sub, dt, out),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Concat(l, r) => {
            validate_windows(l, dt, out);
            validate_windows(r, dt, out);
        }
        Formula::Within { inner, start, end } => {
            if end < start {
                out.push(Diagnostic::error(format!(
                    "within bounds [{start},{end}] have end before start"
                )));
            } else {
                for bound in [*start, *end] {
                    if off_grid(bound as f64, dt) {
                        out.push(Diagnostic::error(format!(
                            "within bound {bound} is not a multiple of the sampling step {dt}"
                        )));
                    }
                }
                let inner_h = horizon(inner, dt).value();
                let window = (end - start) as f64;
                if inner_h > window + 1e-9 * dt {
                    out.push(Diagnostic::warning(format!(
                        "inner horizon {inner_h} exceeds window {window}, formula unsatisfiable"
                    )));
                }
            }
            validate_windows(inner, dt, out);
        }
    }
}

pub(crate) fn off_grid(time: f64, dt: f64) -> bool {
    let steps = time / dt;
    (steps - steps.round()).abs() * dt > 1e-9 * dt
}
