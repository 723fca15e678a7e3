//! Online robustness monitoring over growing prefixes.
//!
//! A prefix is the observed part of a word whose final length is fixed to
//! the formula horizon plus one sample. Every subword boundary the offline
//! recursion visits is therefore known in advance, and the interval semantics
//! evaluate that same recursion with each unobserved sample replaced by the
//! range of values it could take:
//!
//! * robustness literals range over `[rho_bot, rho_top]`;
//! * AGM literals range over the atom's `[eta_min, eta_max]` (or `[-1, 1]`
//!   with [`EtaExtremes::Conservative`]).
//!
//! `min`/`max` and both AGM means are non-decreasing in every argument, so
//! endpoint-wise evaluation encloses the robustness of every completion.
//! Intervals shrink as samples arrive and collapse to the offline value once
//! the horizon has been observed.

mod interval;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::formula::{horizon, Formula};
use crate::semantics::engine::{evaluate, Domain, Valuation};
use crate::semantics::{eta_compiled, rho_compiled, CompiledFormula, EvalConfig, EvalError};
use crate::trace::{PredicateTable, TraceError, Word};

pub use interval::{
    iagm_and, iagm_or, imax, imin, verdict, IntervalError, RobustnessInterval, Verdict,
};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("monitor finalized: the formula horizon has been observed")]
    Finalized,
    #[error("prefix must target at least one sample")]
    EmptyTarget,
    #[error("word step {word} differs from configured step {config}")]
    StepMismatch { word: f64, config: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Extreme attainable AGM literal values assumed for unobserved samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EtaExtremes {
    /// Per-atom `eta_min`/`eta_max` derived from the normalization bounds.
    #[default]
    PerAtom,
    /// `[-1, 1]` for every atom.
    Conservative,
}

/// Observed samples of a word whose complete length is `total_len`.
#[derive(Debug, Clone)]
pub struct Prefix {
    word: Word,
    total_len: usize,
}

impl Prefix {
    /// Samples beyond `total_len` are dropped with a warning.
    pub fn new(word: Word, total_len: usize) -> Result<Self, MonitorError> {
        if total_len == 0 {
            return Err(MonitorError::EmptyTarget);
        }
        let word = if word.len() > total_len {
            log::warn!(
                "prefix has {} samples but the horizon needs only {}; ignoring the rest",
                word.len(),
                total_len
            );
            word.truncated(total_len)
        } else {
            word
        };
        Ok(Self { word, total_len })
    }

    /// Prefix targeting the horizon of `formula`, sampled with the word's step.
    pub fn for_formula(word: Word, formula: &Formula) -> Result<Self, MonitorError> {
        let steps = (horizon(formula, word.dt()).value() / word.dt()).round() as usize;
        Self::new(word, steps + 1)
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn observed(&self) -> usize {
        self.word.len()
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn is_complete(&self) -> bool {
        self.observed() == self.total_len
    }
}

struct RhoIntervals<'v> {
    valuation: &'v Valuation,
    observed: usize,
    rho_bot: f64,
    rho_top: f64,
}

impl Domain for RhoIntervals<'_> {
    type Value = RobustnessInterval;

    fn bottom(&self) -> RobustnessInterval {
        RobustnessInterval::singleton(self.rho_bot)
    }

    fn literal(&self, atom: usize, negated: bool, k: usize) -> RobustnessInterval {
        if k < self.observed {
            let m = self.valuation.margin(atom, k);
            RobustnessInterval::singleton(if negated { -m } else { m })
        } else {
            RobustnessInterval::new_unchecked(self.rho_bot, self.rho_top)
        }
    }

    fn negate(&self, v: RobustnessInterval) -> RobustnessInterval {
        v.reflect()
    }

    fn conj(&self, values: &[RobustnessInterval]) -> RobustnessInterval {
        interval::min_unchecked(values)
    }

    fn disj(&self, values: &[RobustnessInterval]) -> RobustnessInterval {
        interval::max_unchecked(values)
    }
}

struct EtaIntervals<'v> {
    valuation: &'v Valuation,
    observed: usize,
    extremes: &'v [(f64, f64)],
}

impl Domain for EtaIntervals<'_> {
    type Value = RobustnessInterval;

    fn bottom(&self) -> RobustnessInterval {
        RobustnessInterval::singleton(-1.0)
    }

    fn literal(&self, atom: usize, negated: bool, k: usize) -> RobustnessInterval {
        let range = if k < self.observed {
            RobustnessInterval::singleton(self.valuation.eta(atom, k))
        } else {
            let (lo, hi) = self.extremes[atom];
            RobustnessInterval::new_unchecked(lo, hi)
        };
        if negated {
            range.reflect()
        } else {
            range
        }
    }

    fn negate(&self, v: RobustnessInterval) -> RobustnessInterval {
        v.reflect()
    }

    fn conj(&self, values: &[RobustnessInterval]) -> RobustnessInterval {
        let los: Vec<f64> = values.iter().map(|i| i.lo()).collect();
        let his: Vec<f64> = values.iter().map(|i| i.hi()).collect();
        RobustnessInterval::new_unchecked(agm_and_raw(&los), agm_and_raw(&his))
    }

    fn disj(&self, values: &[RobustnessInterval]) -> RobustnessInterval {
        let los: Vec<f64> = values.iter().map(|i| i.lo()).collect();
        let his: Vec<f64> = values.iter().map(|i| i.hi()).collect();
        RobustnessInterval::new_unchecked(agm_or_raw(&los), agm_or_raw(&his))
    }
}

use crate::semantics::agm::{and_unchecked as agm_and_raw, or_unchecked as agm_or_raw};

fn eta_extremes(
    compiled: &CompiledFormula,
    mode: EtaExtremes,
) -> Result<Vec<(f64, f64)>, EvalError> {
    compiled
        .atoms()
        .iter()
        .map(|atom| match mode {
            EtaExtremes::Conservative if atom.has_bounds() => Ok((-1.0, 1.0)),
            _ => atom
                .eta_range()
                .map_err(|_| EvalError::MissingBounds(atom.name().to_string())),
        })
        .collect()
}

fn rho_interval_compiled(
    compiled: &CompiledFormula,
    valuation: &Valuation,
    total_len: usize,
    cfg: &EvalConfig,
) -> RobustnessInterval {
    let domain = RhoIntervals {
        valuation,
        observed: valuation.len(),
        rho_bot: cfg.rho_bot(),
        rho_top: cfg.rho_top(),
    };
    evaluate(compiled, &domain, total_len)
}

fn eta_interval_compiled(
    compiled: &CompiledFormula,
    valuation: &Valuation,
    total_len: usize,
    extremes: &[(f64, f64)],
) -> RobustnessInterval {
    let domain = EtaIntervals {
        valuation,
        observed: valuation.len(),
        extremes,
    };
    evaluate(compiled, &domain, total_len)
}

fn check_step(word: &Word, cfg: &EvalConfig) -> Result<(), MonitorError> {
    if (word.dt() - cfg.dt()).abs() > 1e-9 * cfg.dt() {
        return Err(MonitorError::StepMismatch {
            word: word.dt(),
            config: cfg.dt(),
        });
    }
    Ok(())
}

/// Robustness interval `[rho]` of a prefix.
pub fn rho_interval(
    prefix: &Prefix,
    formula: &Formula,
    table: &PredicateTable,
    cfg: &EvalConfig,
) -> Result<RobustnessInterval, MonitorError> {
    check_step(prefix.word(), cfg)?;
    let compiled = CompiledFormula::new(formula, table, cfg.dt())?;
    let valuation = Valuation::from_word(&compiled, prefix.word(), false)?;
    Ok(rho_interval_compiled(
        &compiled,
        &valuation,
        prefix.total_len(),
        cfg,
    ))
}

/// AGM robustness interval `[eta]` of a prefix.
pub fn eta_interval(
    prefix: &Prefix,
    formula: &Formula,
    table: &PredicateTable,
    cfg: &EvalConfig,
    extremes: EtaExtremes,
) -> Result<RobustnessInterval, MonitorError> {
    check_step(prefix.word(), cfg)?;
    let compiled = CompiledFormula::new(formula, table, cfg.dt())?;
    let valuation = Valuation::from_word(&compiled, prefix.word(), true)?;
    let extremes = eta_extremes(&compiled, extremes)?;
    Ok(eta_interval_compiled(
        &compiled,
        &valuation,
        prefix.total_len(),
        &extremes,
    ))
}

/// CSV header of the monitor output stream.
pub const CSV_HEADER: &str = "t,rho_lo,rho_hi,eta_lo,eta_hi,verdict_rho,verdict_eta";

/// Intervals and verdicts emitted after one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Zero-based index of the sample just observed.
    pub index: usize,
    pub time: f64,
    pub rho: RobustnessInterval,
    pub eta: RobustnessInterval,
    pub rho_verdict: Verdict,
    pub eta_verdict: Verdict,
    /// Set on the record that observes the last sample of the horizon.
    pub complete: bool,
}

fn real(v: f64) -> String {
    format!("{v:.12e}")
}

impl StepRecord {
    /// One CSV row matching [`CSV_HEADER`]; reals carry 13 significant digits.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.time,
            real(self.rho.lo()),
            real(self.rho.hi()),
            real(self.eta.lo()),
            real(self.eta.hi()),
            self.rho_verdict,
            self.eta_verdict
        )
    }

    /// One JSON object with the same fields as the CSV row.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "t": self.time,
            "rho_lo": self.rho.lo(),
            "rho_hi": self.rho.hi(),
            "eta_lo": self.eta.lo(),
            "eta_hi": self.eta.hi(),
            "verdict_rho": self.rho_verdict,
            "verdict_eta": self.eta_verdict,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MonitorOptions {
    pub extremes: EtaExtremes,
    /// Time stamp of the first sample.
    pub start_time: f64,
}

/// Incremental monitor producing `[rho]` and `[eta]` after each sample.
///
/// Each step re-evaluates the interval semantics on the extended prefix, so
/// the stream is identical to batch [`rho_interval`]/[`eta_interval`] calls.
#[derive(Debug, Clone)]
pub struct Monitor {
    formula: CompiledFormula,
    cfg: EvalConfig,
    valuation: Valuation,
    extremes: Vec<(f64, f64)>,
    total_len: usize,
    start_time: f64,
    last: Option<StepRecord>,
}

impl Monitor {
    pub fn new(
        formula: &Formula,
        table: &PredicateTable,
        cfg: EvalConfig,
        options: MonitorOptions,
    ) -> Result<Self, MonitorError> {
        let compiled = CompiledFormula::new(formula, table, cfg.dt())?;
        let valuation = Valuation::empty(&compiled, true)?;
        let extremes = eta_extremes(&compiled, options.extremes)?;
        let total_len = compiled.horizon_steps() + 1;
        Ok(Self {
            formula: compiled,
            cfg,
            valuation,
            extremes,
            total_len,
            start_time: options.start_time,
            last: None,
        })
    }

    /// Number of samples after which the intervals are final.
    pub fn horizon_samples(&self) -> usize {
        self.total_len
    }

    pub fn observed(&self) -> usize {
        self.valuation.len()
    }

    pub fn is_final(&self) -> bool {
        self.observed() == self.total_len
    }

    /// Signals a sample must provide.
    pub fn signals(&self) -> Vec<String> {
        self.formula.signals()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.last.as_ref()
    }

    /// Observes the next sample, keyed by signal name.
    pub fn step(&mut self, sample: &BTreeMap<String, f64>) -> Result<StepRecord, MonitorError> {
        if self.is_final() {
            return Err(MonitorError::Finalized);
        }
        self.valuation
            .push(&self.formula, |s| sample.get(s).copied())?;
        self.warn_if_unbounded();

        let index = self.valuation.len() - 1;
        let rho = rho_interval_compiled(&self.formula, &self.valuation, self.total_len, &self.cfg);
        let eta = eta_interval_compiled(
            &self.formula,
            &self.valuation,
            self.total_len,
            &self.extremes,
        );
        let record = StepRecord {
            index,
            time: self.start_time + index as f64 * self.cfg.dt(),
            rho,
            eta,
            rho_verdict: rho.verdict(),
            eta_verdict: eta.verdict(),
            complete: self.is_final(),
        };
        if let Some(prev) = &self.last {
            debug_assert!(
                !prev.rho_verdict.is_conclusive() || prev.rho_verdict == record.rho_verdict
            );
            debug_assert!(
                !prev.eta_verdict.is_conclusive() || prev.eta_verdict == record.eta_verdict
            );
        }
        self.last = Some(record);
        Ok(record)
    }

    /// Observes sample `k` of `word`.
    pub fn step_from(&mut self, word: &Word, k: usize) -> Result<StepRecord, MonitorError> {
        let sample = word
            .signal_names()
            .iter()
            .map(|name| Ok((name.clone(), word.value(name, k)?)))
            .collect::<Result<BTreeMap<_, _>, TraceError>>()?;
        self.step(&sample)
    }

    /// Offline robustness of the observed samples; equal to the final
    /// interval endpoints once the monitor is final.
    pub fn offline(&self) -> Option<(f64, f64)> {
        if self.valuation.len() == 0 {
            return None;
        }
        Some((
            rho_compiled(&self.formula, &self.valuation, &self.cfg),
            eta_compiled(&self.formula, &self.valuation),
        ))
    }

    fn warn_if_unbounded(&self) {
        let k = self.valuation.len() - 1;
        let limit = self.cfg.rho_top().min(-self.cfg.rho_bot());
        for (a, atom) in self.formula.atoms().iter().enumerate() {
            let m = self.valuation.margin(a, k);
            if m.abs() > limit {
                log::warn!(
                    "margin {m} of atom `{}` at sample {k} exceeds the rho_bot/rho_top range; \
                     intervals are no longer guaranteed to enclose completions",
                    atom.name()
                );
            }
        }
        debug_assert!(self.valuation.has_eta());
    }
}
