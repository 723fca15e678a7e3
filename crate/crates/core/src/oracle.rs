//! Reference evaluators and instance generators for testing.
//!
//! The `oracle_*` functions walk the [`Formula`] tree directly with no
//! memoization, read atom margins straight from the word, and compute
//! geometric means as products rather than in log space. They are slow on
//! purpose and share no code with [`crate::semantics`] beyond margin lookup.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{horizon, Formula};
use crate::monitor::Prefix;
use crate::semantics::engine::Valuation;
use crate::semantics::{eta_compiled, rho_compiled, CompiledFormula, EvalConfig, EvalError};
use crate::trace::{
    Comparison, NormalizationBounds, PredicateSpec, PredicateTable, TraceError, Word,
};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid for signal `{0}` is empty")]
    EmptyGrid(String),
    #[error("grid for signal `{signal}` has {size} values; at most {max} allowed")]
    GridTooLarge {
        signal: String,
        size: usize,
        max: usize,
    },
    #[error("grid has no values for signal `{0}`")]
    MissingSignal(String),
    #[error("enumeration needs {needed} completions, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("unresolved atom {0}")]
    UnresolvedAtom(String),
    #[error("within bound {bound} is not a multiple of the sampling step {dt}")]
    OffGridBound { bound: u64, dt: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

struct Literal<'a> {
    word: &'a Word,
    table: &'a PredicateTable,
}

impl Literal<'_> {
    fn spec(&self, name: &str) -> Result<&PredicateSpec, OracleError> {
        self.table
            .get(name)
            .ok_or_else(|| OracleError::UnresolvedAtom(name.to_string()))
    }

    fn margin(&self, name: &str, k: usize) -> Result<f64, OracleError> {
        Ok(crate::trace::margin(self.word, self.spec(name)?, k)?)
    }

    fn eta_margin(&self, name: &str, k: usize) -> Result<f64, OracleError> {
        Ok(crate::trace::eta_margin(self.word, self.spec(name)?, k)?)
    }

    fn steps(&self, bound: u64) -> Result<usize, OracleError> {
        let dt = self.word.dt();
        let steps = bound as f64 / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.abs().max(1.0) {
            return Err(OracleError::OffGridBound { bound, dt });
        }
        Ok(steps.round() as usize)
    }
}

fn check_nonempty(word: &Word) -> Result<(), OracleError> {
    if word.is_empty() {
        Err(OracleError::Trace(TraceError::NoSamples))
    } else {
        Ok(())
    }
}

/// Boolean satisfaction by direct recursion.
pub fn oracle_bool(
    word: &Word,
    formula: &Formula,
    table: &PredicateTable,
) -> Result<bool, OracleError> {
    check_nonempty(word)?;
    let lit = Literal { word, table };
    bool_rec(&lit, formula, 0, word.len() - 1)
}

fn bool_rec(lit: &Literal, f: &Formula, i: usize, j: usize) -> Result<bool, OracleError> {
    Ok(match f {
        Formula::Hold {
            duration,
            atom,
            negated,
        } => {
            let d = *duration as usize;
            if j - i < d {
                return Ok(false);
            }
            let mut all = true;
            for k in i..=i + d {
                let holds = lit.margin(atom.name(), k)? > 0.0;
                all &= holds != *negated;
            }
            all
        }
        Formula::And(l, r) => bool_rec(lit, l, i, j)? && bool_rec(lit, r, i, j)?,
        Formula::Or(l, r) => bool_rec(lit, l, i, j)? || bool_rec(lit, r, i, j)?,
        Formula::Not(sub) => !bool_rec(lit, sub, i, j)?,
        Formula::Concat(l, r) => {
            for t in i..j {
                if bool_rec(lit, l, i, t)? && bool_rec(lit, r, t + 1, j)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Within { inner, start, end } => {
            let (a, b) = (lit.steps(*start)?, lit.steps(*end)?);
            if j - i < b {
                return Ok(false);
            }
            for t in i + a..=i + b {
                if bool_rec(lit, inner, t, i + b)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

/// Robustness by direct recursion.
pub fn oracle_rho(
    word: &Word,
    formula: &Formula,
    table: &PredicateTable,
    cfg: &EvalConfig,
) -> Result<f64, OracleError> {
    check_nonempty(word)?;
    let lit = Literal { word, table };
    rho_rec(&lit, formula, 0, word.len() - 1, cfg.rho_bot())
}

fn rho_rec(lit: &Literal, f: &Formula, i: usize, j: usize, bot: f64) -> Result<f64, OracleError> {
    Ok(match f {
        Formula::Hold {
            duration,
            atom,
            negated,
        } => {
            let d = *duration as usize;
            if j - i < d {
                return Ok(bot);
            }
            let mut m = f64::INFINITY;
            for k in i..=i + d {
                let v = lit.margin(atom.name(), k)?;
                m = m.min(if *negated { -v } else { v });
            }
            m
        }
        Formula::And(l, r) => rho_rec(lit, l, i, j, bot)?.min(rho_rec(lit, r, i, j, bot)?),
        Formula::Or(l, r) => rho_rec(lit, l, i, j, bot)?.max(rho_rec(lit, r, i, j, bot)?),
        Formula::Not(sub) => -rho_rec(lit, sub, i, j, bot)?,
        Formula::Concat(l, r) => {
            if j == i {
                return Ok(bot);
            }
            let mut best = f64::NEG_INFINITY;
            for t in i..j {
                let v = rho_rec(lit, l, i, t, bot)?.min(rho_rec(lit, r, t + 1, j, bot)?);
                best = best.max(v);
            }
            best
        }
        Formula::Within { inner, start, end } => {
            let (a, b) = (lit.steps(*start)?, lit.steps(*end)?);
            if j - i < b {
                return Ok(bot);
            }
            let mut best = f64::NEG_INFINITY;
            for t in i + a..=i + b {
                best = best.max(rho_rec(lit, inner, t, i + b, bot)?);
            }
            best
        }
    })
}

/// AGM conjunction in product form.
pub fn product_agm_and(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.iter().all(|&r| r > 0.0) {
        values
            .iter()
            .map(|r| 1.0 + r)
            .product::<f64>()
            .powf(1.0 / n)
            - 1.0
    } else {
        values.iter().map(|&r| r.min(0.0)).sum::<f64>() / n
    }
}

/// AGM disjunction in product form.
pub fn product_agm_or(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.iter().all(|&r| r < 0.0) {
        1.0 - values
            .iter()
            .map(|r| 1.0 - r)
            .product::<f64>()
            .powf(1.0 / n)
    } else {
        values.iter().map(|&r| r.max(0.0)).sum::<f64>() / n
    }
}

/// AGM robustness by direct recursion.
pub fn oracle_eta(
    word: &Word,
    formula: &Formula,
    table: &PredicateTable,
) -> Result<f64, OracleError> {
    check_nonempty(word)?;
    let lit = Literal { word, table };
    eta_rec(&lit, formula, 0, word.len() - 1)
}

fn eta_rec(lit: &Literal, f: &Formula, i: usize, j: usize) -> Result<f64, OracleError> {
    Ok(match f {
        Formula::Hold {
            duration,
            atom,
            negated,
        } => {
            let d = *duration as usize;
            if j - i < d {
                return Ok(-1.0);
            }
            let mut values = Vec::new();
            for k in i..=i + d {
                let v = lit.eta_margin(atom.name(), k)?;
                values.push(if *negated { -v } else { v });
            }
            product_agm_and(&values)
        }
        Formula::And(l, r) => product_agm_and(&[eta_rec(lit, l, i, j)?, eta_rec(lit, r, i, j)?]),
        Formula::Or(l, r) => product_agm_or(&[eta_rec(lit, l, i, j)?, eta_rec(lit, r, i, j)?]),
        Formula::Not(sub) => -eta_rec(lit, sub, i, j)?,
        Formula::Concat(l, r) => {
            if j == i {
                return Ok(-1.0);
            }
            let mut splits = Vec::new();
            for t in i..j {
                splits.push(product_agm_and(&[
                    eta_rec(lit, l, i, t)?,
                    eta_rec(lit, r, t + 1, j)?,
                ]));
            }
            product_agm_or(&splits)
        }
        Formula::Within { inner, start, end } => {
            let (a, b) = (lit.steps(*start)?, lit.steps(*end)?);
            if j - i < b {
                return Ok(-1.0);
            }
            let mut starts = Vec::new();
            for t in i + a..=i + b {
                starts.push(eta_rec(lit, inner, t, i + b)?);
            }
            product_agm_or(&starts)
        }
    })
}

/// Largest number of candidate values per signal.
pub const MAX_GRID_VALUES: usize = 5;

/// Candidate sample values per signal for completion enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    values: BTreeMap<String, Vec<f64>>,
}

impl ValueGrid {
    pub fn new(values: BTreeMap<String, Vec<f64>>) -> Result<Self, OracleError> {
        for (signal, v) in &values {
            if v.is_empty() {
                return Err(OracleError::EmptyGrid(signal.clone()));
            }
            if v.len() > MAX_GRID_VALUES {
                return Err(OracleError::GridTooLarge {
                    signal: signal.clone(),
                    size: v.len(),
                    max: MAX_GRID_VALUES,
                });
            }
        }
        Ok(Self { values })
    }

    /// The same values for every listed signal.
    pub fn uniform<S: Into<String>>(
        signals: impl IntoIterator<Item = S>,
        values: &[f64],
    ) -> Result<Self, OracleError> {
        Self::new(
            signals
                .into_iter()
                .map(|s| (s.into(), values.to_vec()))
                .collect(),
        )
    }

    pub fn values(&self, signal: &str) -> Option<&[f64]> {
        self.values.get(signal).map(Vec::as_slice)
    }

    /// True when every bounded constraint of `table` sees both ends of its
    /// normalization range, so the per-atom AGM extremes are realized.
    pub fn covers_bounds(&self, table: &PredicateTable) -> bool {
        table.iter().flat_map(|a| a.constraints()).all(|c| {
            match (c.bounds, self.values(&c.signal)) {
                (Some(b), Some(v)) => v.contains(&b.min()) && v.contains(&b.max()),
                (None, _) => true,
                (Some(_), None) => false,
            }
        })
    }
}

/// Exact ranges of offline robustness over an enumerated completion set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionBounds {
    pub rho: (f64, f64),
    pub eta: (f64, f64),
    pub completions: u64,
}

/// Enumerates every completion of `prefix` to its target length with sample
/// values drawn from `grid`, and returns the range of offline `rho` and `eta`.
pub fn completion_bounds(
    prefix: &Prefix,
    formula: &Formula,
    table: &PredicateTable,
    cfg: &EvalConfig,
    grid: &ValueGrid,
    budget: u64,
) -> Result<CompletionBounds, OracleError> {
    let word = prefix.word();
    let compiled = CompiledFormula::new(formula, table, word.dt())?;
    let signals = word.signal_names().to_vec();
    let choices: Vec<&[f64]> = signals
        .iter()
        .map(|s| {
            grid.values(s)
                .ok_or_else(|| OracleError::MissingSignal(s.clone()))
        })
        .collect::<Result<_, _>>()?;
    if let Some(empty) = signals.iter().zip(&choices).find(|(_, c)| c.is_empty()) {
        return Err(OracleError::EmptyGrid(empty.0.clone()));
    }

    let free = prefix.total_len() - prefix.observed();
    let per_sample: u128 = choices.iter().map(|c| c.len() as u128).product();
    let needed = (0..free)
        .try_fold(1u128, |acc, _| acc.checked_mul(per_sample))
        .unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(OracleError::BudgetExceeded { needed, budget });
    }

    let base = Valuation::from_word(&compiled, word, true)?;
    let mut out = CompletionBounds {
        rho: (f64::INFINITY, f64::NEG_INFINITY),
        eta: (f64::INFINITY, f64::NEG_INFINITY),
        completions: 0,
    };
    // Mixed-radix counter over (sample, signal) digits.
    let digits = free * signals.len();
    let mut counter = vec![0usize; digits];
    loop {
        let mut valuation = base.clone();
        for s in 0..free {
            let row = &counter[s * signals.len()..(s + 1) * signals.len()];
            valuation.push(&compiled, |name| {
                signals
                    .iter()
                    .position(|n| n == name)
                    .map(|p| choices[p][row[p]])
            })?;
        }
        let r = rho_compiled(&compiled, &valuation, cfg);
        let e = eta_compiled(&compiled, &valuation);
        out.rho = (out.rho.0.min(r), out.rho.1.max(r));
        out.eta = (out.eta.0.min(e), out.eta.1.max(e));
        out.completions += 1;

        let mut d = 0;
        loop {
            if d == digits {
                return Ok(out);
            }
            counter[d] += 1;
            if counter[d] < choices[d % signals.len()].len() {
                break;
            }
            counter[d] = 0;
            d += 1;
        }
    }
}

/// Relative frequencies of the generated operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorWeights {
    pub hold: u32,
    pub and: u32,
    pub or: u32,
    pub not: u32,
    pub concat: u32,
    pub within: u32,
}

impl Default for OperatorWeights {
    fn default() -> Self {
        Self {
            hold: 3,
            and: 2,
            or: 2,
            not: 1,
            concat: 2,
            within: 2,
        }
    }
}

/// A generated formula and word.
#[derive(Debug, Clone)]
pub struct Instance {
    pub formula: Formula,
    pub word: Word,
}

/// Deterministic random generator of formulas and words over signals `x`
/// and `y` ranging in `[0, 8]`.
#[derive(Debug, Clone)]
pub struct InstanceGen {
    rng: ChaCha8Rng,
    max_depth: usize,
    max_len: usize,
    max_horizon: Option<usize>,
    weights: OperatorWeights,
    table: PredicateTable,
}

/// Normalization range of the generated signals.
pub const SIGNAL_RANGE: (f64, f64) = (0.0, 8.0);

impl InstanceGen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_depth: 4,
            max_len: 10,
            max_horizon: None,
            weights: OperatorWeights::default(),
            table: Self::standard_table(),
        }
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth.max(1);
        self
    }

    pub fn with_max_len(mut self, len: usize) -> Self {
        self.max_len = len.max(1);
        self
    }

    /// Rejects formulas whose horizon exceeds `steps` samples.
    pub fn with_max_horizon(mut self, steps: usize) -> Self {
        self.max_horizon = Some(steps);
        self
    }

    pub fn with_weights(mut self, weights: OperatorWeights) -> Self {
        self.weights = weights;
        self
    }

    /// Atoms `p: x >= 4`, `q: x <= 5`, `r: y >= 3`, `s: y <= 6` and the box
    /// `b: 2 <= x <= 6, 2 <= y <= 6`, all normalized over [`SIGNAL_RANGE`].
    pub fn standard_table() -> PredicateTable {
        let bounds = NormalizationBounds::new(SIGNAL_RANGE.0, SIGNAL_RANGE.1).expect("valid range");
        let half = |name: &str, signal: &str, op, sigma| {
            PredicateSpec::half_space(name, signal, op, sigma)
                .with_bounds(bounds)
                .expect("threshold in range")
        };
        let boxed = PredicateSpec::new(
            "b",
            vec![
                crate::trace::Constraint::new("x", Comparison::AtLeast, 2.0),
                crate::trace::Constraint::new("x", Comparison::AtMost, 6.0),
                crate::trace::Constraint::new("y", Comparison::AtLeast, 2.0),
                crate::trace::Constraint::new("y", Comparison::AtMost, 6.0),
            ],
        )
        .and_then(|b| b.with_bounds(bounds))
        .expect("valid box");
        [
            half("p", "x", Comparison::AtLeast, 4.0),
            half("q", "x", Comparison::AtMost, 5.0),
            half("r", "y", Comparison::AtLeast, 3.0),
            half("s", "y", Comparison::AtMost, 6.0),
            boxed,
        ]
        .into_iter()
        .collect()
    }

    pub fn table(&self) -> &PredicateTable {
        &self.table
    }

    pub fn formula(&mut self) -> Formula {
        loop {
            let depth = self.rng.gen_range(1..=self.max_depth);
            let f = self.formula_of_depth(depth);
            match self.max_horizon {
                Some(max) if horizon(&f, 1.0).value() as usize > max => continue,
                _ => return f,
            }
        }
    }

    /// Formula using only atoms over the listed signals.
    pub fn formula_over(&mut self, signals: &[&str]) -> Formula {
        loop {
            let f = self.formula();
            let ok = f.atoms().iter().all(|a| {
                self.table.get(a.name()).is_some_and(|spec| {
                    spec.constraints()
                        .iter()
                        .all(|c| signals.contains(&c.signal.as_str()))
                })
            });
            if ok {
                return f;
            }
        }
    }

    fn formula_of_depth(&mut self, depth: usize) -> Formula {
        let w = self.weights;
        if depth <= 1 {
            return self.hold();
        }
        let options = [
            (w.hold, 0u8),
            (w.and, 1),
            (w.or, 2),
            (w.not, 3),
            (w.concat, 4),
            (w.within, 5),
        ];
        let pick = options
            .choose_weighted(&mut self.rng, |o| o.0)
            .map(|o| o.1)
            .unwrap_or(0);
        let sub = depth - 1;
        match pick {
            0 => self.hold(),
            1 => Formula::and(self.formula_of_depth(sub), self.formula_of_depth(sub)),
            2 => Formula::or(self.formula_of_depth(sub), self.formula_of_depth(sub)),
            3 => Formula::not(self.formula_of_depth(sub)),
            4 => Formula::concat(self.formula_of_depth(sub), self.formula_of_depth(sub)),
            _ => {
                let a = self.rng.gen_range(0..=2);
                let b = a + self.rng.gen_range(0..=3);
                Formula::within(self.formula_of_depth(sub), a, b)
            }
        }
    }

    fn hold(&mut self) -> Formula {
        let names = ["p", "q", "r", "s", "b"];
        let atom = *names.choose(&mut self.rng).expect("non-empty");
        let d = self.rng.gen_range(0..=2);
        if self.rng.gen_bool(0.3) {
            Formula::hold_not(d, atom)
        } else {
            Formula::hold(d, atom)
        }
    }

    fn sample(&mut self) -> f64 {
        // Half-unit values hit thresholds and ties; the rest are continuous.
        if self.rng.gen_bool(0.5) {
            self.rng.gen_range(0..=16) as f64 * 0.5
        } else {
            self.rng.gen_range(SIGNAL_RANGE.0..=SIGNAL_RANGE.1)
        }
    }

    /// Word of exactly `len` samples over `signals`, with `dt = 1`.
    pub fn word_over(&mut self, signals: &[&str], len: usize) -> Word {
        let columns = signals
            .iter()
            .map(|s| (s.to_string(), (0..len).map(|_| self.sample()).collect()))
            .collect();
        Word::new(0.0, 1.0, columns).expect("generated word is valid")
    }

    pub fn word(&mut self) -> Word {
        let len = self.rng.gen_range(1..=self.max_len);
        self.word_over(&["x", "y"], len)
    }

    pub fn instance(&mut self) -> Instance {
        Instance {
            formula: self.formula(),
            word: self.word(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
