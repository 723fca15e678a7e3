//! Offline evaluation of complete words: Boolean satisfaction, robustness
//! `rho`, and AGM robustness `eta`.
//!
//! All three share one recursion over subwords `o[i..=j]`:
//!
//! * hold `H^d` looks at samples `i..=i+d` and is bottom when `j - i < d`;
//! * within `[phi]^[a,b]` ranges over starts `t` in `[i+a, i+b]`, evaluating
//!   `phi` on `o[t..=i+b]`, and is bottom when `j - i < b`;
//! * concatenation ranges over split points `t` in `[i, j)`, pairing
//!   `o[i..=t]` with `o[t+1..=j]`.
//!
//! Bottom is `false`, `rho_bot`, or `-1` respectively. Window lengths are
//! compared in sample counts.

pub(crate) mod agm;
pub(crate) mod engine;

use thiserror::Error;

use crate::formula::Formula;
use crate::trace::{PredicateTable, TraceError, Word};

pub use agm::{agm_and, agm_or, AgmError};
pub use engine::CompiledFormula;

use engine::{evaluate, Domain, Valuation};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unresolved atom {0}")]
    UnresolvedAtom(String),
    #[error("within bound {bound} is not a multiple of the sampling step {dt}")]
    OffGridBound { bound: u64, dt: f64 },
    #[error("within bounds [{start},{end}] have end before start")]
    InvertedWindow { start: u64, end: u64 },
    #[error("atom `{0}` has no normalization bounds")]
    MissingBounds(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("word step {word} differs from configured step {config}")]
    StepMismatch { word: f64, config: f64 },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Agm(#[from] AgmError),
}

impl EvalError {
    fn from_trace(e: TraceError) -> Self {
        match e {
            TraceError::MissingBounds(atom) => EvalError::MissingBounds(atom),
            other => EvalError::Trace(other),
        }
    }
}

/// Robustness of Boolean bottom/top, plus the sampling step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    rho_bot: f64,
    rho_top: f64,
    dt: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            rho_bot: -10.0,
            rho_top: 10.0,
            dt: 1.0,
        }
    }
}

impl EvalConfig {
    pub fn new(rho_bot: f64, rho_top: f64, dt: f64) -> Result<Self, EvalError> {
        if !(rho_bot.is_finite() && rho_bot < 0.0) {
            return Err(EvalError::InvalidConfig(format!(
                "rho_bot must be negative, got {rho_bot}"
            )));
        }
        if !(rho_top.is_finite() && rho_top > 0.0) {
            return Err(EvalError::InvalidConfig(format!(
                "rho_top must be positive, got {rho_top}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EvalError::InvalidConfig(format!(
                "dt must be positive, got {dt}"
            )));
        }
        Ok(Self {
            rho_bot,
            rho_top,
            dt,
        })
    }

    pub fn rho_bot(&self) -> f64 {
        self.rho_bot
    }

    pub fn rho_top(&self) -> f64 {
        self.rho_top
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check_word(&self, w: &Word) -> Result<(), EvalError> {
        if (w.dt() - self.dt).abs() > 1e-9 * self.dt {
            return Err(EvalError::StepMismatch {
                word: w.dt(),
                config: self.dt,
            });
        }
        Ok(())
    }
}

struct BoolDomain<'v>(&'v Valuation);

impl Domain for BoolDomain<'_> {
    type Value = bool;

    fn bottom(&self) -> bool {
        false
    }

    fn literal(&self, atom: usize, negated: bool, k: usize) -> bool {
        // The region is open: a zero margin is outside it.
        (self.0.margin(atom, k) > 0.0) != negated
    }

    fn negate(&self, v: bool) -> bool {
        !v
    }

    fn conj(&self, values: &[bool]) -> bool {
        values.iter().all(|&b| b)
    }

    fn disj(&self, values: &[bool]) -> bool {
        values.iter().any(|&b| b)
    }
}

struct RhoDomain<'v> {
    valuation: &'v Valuation,
    rho_bot: f64,
}

impl Domain for RhoDomain<'_> {
    type Value = f64;

    fn bottom(&self) -> f64 {
        self.rho_bot
    }

    fn literal(&self, atom: usize, negated: bool, k: usize) -> f64 {
        let m = self.valuation.margin(atom, k);
        if negated {
            -m
        } else {
            m
        }
    }

    fn negate(&self, v: f64) -> f64 {
        -v
    }

    fn conj(&self, values: &[f64]) -> f64 {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn disj(&self, values: &[f64]) -> f64 {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct EtaDomain<'v>(&'v Valuation);

impl Domain for EtaDomain<'_> {
    type Value = f64;

    fn bottom(&self) -> f64 {
        -1.0
    }

    fn literal(&self, atom: usize, negated: bool, k: usize) -> f64 {
        let e = self.0.eta(atom, k);
        if negated {
            -e
        } else {
            e
        }
    }

    fn negate(&self, v: f64) -> f64 {
        -v
    }

    fn conj(&self, values: &[f64]) -> f64 {
        agm::and_unchecked(values)
    }

    fn disj(&self, values: &[f64]) -> f64 {
        agm::or_unchecked(values)
    }
}

fn prepare(
    w: &Word,
    f: &Formula,
    table: &PredicateTable,
    with_eta: bool,
) -> Result<(CompiledFormula, Valuation), EvalError> {
    let compiled = CompiledFormula::new(f, table, w.dt())?;
    let valuation = Valuation::from_word(&compiled, w, with_eta).map_err(|e| match e {
        EvalError::Trace(t) => EvalError::from_trace(t),
        other => other,
    })?;
    Ok((compiled, valuation))
}

/// Boolean satisfaction `w |= f`.
pub fn bool_sat(w: &Word, f: &Formula, table: &PredicateTable) -> Result<bool, EvalError> {
    let (compiled, valuation) = prepare(w, f, table, false)?;
    Ok(evaluate(&compiled, &BoolDomain(&valuation), w.len()))
}

/// Robustness degree `rho(w, f)`.
pub fn rho(
    w: &Word,
    f: &Formula,
    table: &PredicateTable,
    cfg: &EvalConfig,
) -> Result<f64, EvalError> {
    cfg.check_word(w)?;
    let (compiled, valuation) = prepare(w, f, table, false)?;
    let domain = RhoDomain {
        valuation: &valuation,
        rho_bot: cfg.rho_bot,
    };
    Ok(evaluate(&compiled, &domain, w.len()))
}

/// AGM robustness `eta(w, f)` in `[-1, 1]`; every atom needs normalization bounds.
pub fn eta(
    w: &Word,
    f: &Formula,
    table: &PredicateTable,
    cfg: &EvalConfig,
) -> Result<f64, EvalError> {
    cfg.check_word(w)?;
    let (compiled, valuation) = prepare(w, f, table, true)?;
    Ok(evaluate(&compiled, &EtaDomain(&valuation), w.len()))
}

/// Evaluation entry points over an already compiled formula, used by the monitor.
pub(crate) fn rho_compiled(
    compiled: &CompiledFormula,
    valuation: &Valuation,
    cfg: &EvalConfig,
) -> f64 {
    let domain = RhoDomain {
        valuation,
        rho_bot: cfg.rho_bot,
    };
    evaluate(compiled, &domain, valuation.len())
}

pub(crate) fn eta_compiled(compiled: &CompiledFormula, valuation: &Valuation) -> f64 {
    evaluate(compiled, &EtaDomain(valuation), valuation.len())
}
