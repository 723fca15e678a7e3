//! Uniformly sampled output words and the predicates evaluated on them.

mod io;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_table, load_trace, parse_table, read_trace, TraceReader};

/// Relative tolerance (in units of the sampling step) for on-grid time checks.
pub const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("no samples")]
    NoSamples,
    #[error("sampling step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("signal `{name}` has {found} samples, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate signal `{0}`")]
    DuplicateSignal(String),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("sample {value} of signal `{name}` is not finite")]
    NonFinite { name: String, value: f64 },
    #[error("sample index {index} out of range for word of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("time {time} is not on the sampling grid (t0 = {t0}, dt = {dt})")]
    OffGrid { time: f64, t0: f64, dt: f64 },
    #[error("time {time} lies outside the word")]
    OutOfSpan { time: f64 },
    #[error("non-uniform timestamps: row {row} has time {found}, expected {expected}")]
    NonUniform {
        row: usize,
        expected: f64,
        found: f64,
    },
    #[error("trace header must start with `time`, got `{0}`")]
    BadHeader(String),
    #[error("row {row}: expected {expected} columns, found {found}")]
    MissingColumns {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: cannot parse `{text}` as a number")]
    BadNumber { row: usize, text: String },
    #[error("duplicate atom `{0}`")]
    DuplicateAtom(String),
    #[error("atom `{atom}`: {message}")]
    InvalidPredicate { atom: String, message: String },
    #[error("invalid normalization bounds [{min}, {max}]")]
    InvalidBounds { min: f64, max: f64 },
    #[error("atom `{0}` has no normalization bounds")]
    MissingBounds(String),
    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A finite, uniformly sampled, multi-signal word.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    t0: f64,
    dt: f64,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Word {
    /// Builds a word from named columns of equal length `n >= 1`.
    pub fn new(t0: f64, dt: f64, signals: Vec<(String, Vec<f64>)>) -> Result<Self, TraceError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TraceError::InvalidStep(dt));
        }
        let n = signals.first().map(|(_, c)| c.len()).unwrap_or(0);
        if n == 0 {
            return Err(TraceError::NoSamples);
        }
        let mut names = Vec::with_capacity(signals.len());
        let mut columns = Vec::with_capacity(signals.len());
        for (name, column) in signals {
            if names.contains(&name) {
                return Err(TraceError::DuplicateSignal(name));
            }
            if column.len() != n {
                return Err(TraceError::LengthMismatch {
                    name,
                    expected: n,
                    found: column.len(),
                });
            }
            if let Some(&value) = column.iter().find(|v| !v.is_finite()) {
                return Err(TraceError::NonFinite { name, value });
            }
            names.push(name);
            columns.push(column);
        }
        Ok(Self {
            t0,
            dt,
            names,
            columns,
        })
    }

    /// Single-signal word starting at time 0 with step 1.
    pub fn from_samples(signal: &str, samples: &[f64]) -> Result<Self, TraceError> {
        Self::new(0.0, 1.0, vec![(signal.to_string(), samples.to_vec())])
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn signal_names(&self) -> &[String] {
        &self.names
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn signal(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Value of `name` at sample `k`.
    pub fn value(&self, name: &str, k: usize) -> Result<f64, TraceError> {
        let column = self
            .signal(name)
            .ok_or_else(|| TraceError::UnknownSignal(name.to_string()))?;
        column.get(k).copied().ok_or(TraceError::IndexOutOfRange {
            index: k,
            len: column.len(),
        })
    }

    /// Appends one sample; `values` must cover every signal of the word.
    pub fn push(&mut self, values: &BTreeMap<String, f64>) -> Result<(), TraceError> {
        let mut row = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let value = *values
                .get(name)
                .ok_or_else(|| TraceError::UnknownSignal(name.clone()))?;
            if !value.is_finite() {
                return Err(TraceError::NonFinite {
                    name: name.clone(),
                    value,
                });
            }
            row.push(value);
        }
        for (column, value) in self.columns.iter_mut().zip(row) {
            column.push(value);
        }
        Ok(())
    }

    /// The first `n` samples (the whole word if it is shorter).
    pub fn truncated(&self, n: usize) -> Word {
        let n = n.max(1);
        Word {
            t0: self.t0,
            dt: self.dt,
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c[..n.min(c.len())].to_vec())
                .collect(),
        }
    }

    /// Sample index of an on-grid time.
    pub fn index_of(&self, time: f64) -> Result<isize, TraceError> {
        let steps = (time - self.t0) / self.dt;
        let rounded = steps.round();
        if (steps - rounded).abs() > GRID_TOLERANCE {
            return Err(TraceError::OffGrid {
                time,
                t0: self.t0,
                dt: self.dt,
            });
        }
        Ok(rounded as isize)
    }

    /// View of the samples at times `t1..=t2`; empty when `t2 < t1`.
    pub fn slice(&self, t1: f64, t2: f64) -> Result<WordView<'_>, TraceError> {
        self.view().slice(t1, t2)
    }

    pub fn view(&self) -> WordView<'_> {
        WordView {
            word: self,
            start: 0,
            len: self.len(),
        }
    }
}

/// Borrowed contiguous run of samples of a [`Word`].
#[derive(Debug, Clone, Copy)]
pub struct WordView<'a> {
    word: &'a Word,
    start: usize,
    len: usize,
}

impl<'a> WordView<'a> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Index of the first sample of the view in the underlying word.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn start_time(&self) -> f64 {
        self.word.time_at(self.start)
    }

    pub fn signal(&self, name: &str) -> Option<&'a [f64]> {
        self.word
            .signal(name)
            .map(|c| &c[self.start..self.start + self.len])
    }

    pub fn slice(&self, t1: f64, t2: f64) -> Result<WordView<'a>, TraceError> {
        let i1 = self.word.index_of(t1)?;
        let i2 = self.word.index_of(t2)?;
        if i2 < i1 {
            return Ok(WordView {
                word: self.word,
                start: self.start,
                len: 0,
            });
        }
        let lo = self.start as isize;
        let hi = lo + self.len as isize - 1;
        if i1 < lo || i1 > hi {
            return Err(TraceError::OutOfSpan { time: t1 });
        }
        if i2 > hi {
            return Err(TraceError::OutOfSpan { time: t2 });
        }
        Ok(WordView {
            word: self.word,
            start: i1 as usize,
            len: (i2 - i1 + 1) as usize,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparison::AtLeast => ">=",
            Comparison::AtMost => "<=",
        })
    }
}

/// Declared value range `[min, max]` of a signal, used to normalize margins into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationBounds {
    min: f64,
    max: f64,
}

impl NormalizationBounds {
    pub fn new(min: f64, max: f64) -> Result<Self, TraceError> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(TraceError::InvalidBounds { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    fn width(&self) -> f64 {
        self.max - self.min
    }

    /// Affine map of `[min, max]` onto `[-1, 1]`.
    pub fn normalize(&self, v: f64) -> f64 {
        2.0 * (v - self.min) / self.width() - 1.0
    }
}

/// Half-space test `signal op sigma` on one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub signal: String,
    pub op: Comparison,
    pub sigma: f64,
    pub bounds: Option<NormalizationBounds>,
}

impl Constraint {
    pub fn new(signal: impl Into<String>, op: Comparison, sigma: f64) -> Self {
        Self {
            signal: signal.into(),
            op,
            sigma,
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: NormalizationBounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    /// Signed distance to the threshold, positive inside the half-space.
    pub fn margin_of(&self, v: f64) -> f64 {
        match self.op {
            Comparison::AtLeast => v - self.sigma,
            Comparison::AtMost => self.sigma - v,
        }
    }

    /// Normalized margin `½(h_norm(v) − σ_norm)`, in `[eta_min, eta_max]`.
    ///
    /// Samples outside the declared range are clamped first. Returns `None`
    /// when the constraint carries no bounds.
    pub fn eta_margin_of(&self, v: f64) -> Option<f64> {
        let b = self.bounds?;
        let clamped = v.clamp(b.min, b.max);
        if clamped != v {
            log::warn!(
                "sample {v} of `{}` clamped into [{}, {}] for normalization",
                self.signal,
                b.min,
                b.max
            );
        }
        let up = 0.5 * (b.normalize(clamped) - b.normalize(self.sigma));
        Some(match self.op {
            Comparison::AtLeast => up,
            Comparison::AtMost => -up,
        })
    }

    /// Attainable `(eta_min, eta_max)` over the declared range.
    pub fn eta_range(&self) -> Option<(f64, f64)> {
        let b = self.bounds?;
        let low = (b.min - self.sigma) / b.width();
        let high = (b.max - self.sigma) / b.width();
        Some(match self.op {
            Comparison::AtLeast => (low, high),
            Comparison::AtMost => (-high, -low),
        })
    }
}

/// A named atomic proposition.
///
/// Usually a single [`Constraint`]; several constraints describe a box-shaped
/// region whose margin is the smallest constituent margin.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateSpec {
    name: String,
    constraints: Vec<Constraint>,
}

impl PredicateSpec {
    pub fn new(name: impl Into<String>, constraints: Vec<Constraint>) -> Result<Self, TraceError> {
        let name = name.into();
        let invalid = |message: String| TraceError::InvalidPredicate {
            atom: name.clone(),
            message,
        };
        if name.is_empty() {
            return Err(invalid("empty atom name".into()));
        }
        if constraints.is_empty() {
            return Err(invalid("no constraints".into()));
        }
        for c in &constraints {
            if !c.sigma.is_finite() {
                return Err(invalid(format!("threshold {} is not finite", c.sigma)));
            }
            if let Some(b) = c.bounds {
                if c.sigma < b.min || c.sigma > b.max {
                    return Err(invalid(format!(
                        "threshold {} lies outside normalization range [{}, {}]",
                        c.sigma, b.min, b.max
                    )));
                }
            }
        }
        Ok(Self { name, constraints })
    }

    pub fn half_space(
        name: impl Into<String>,
        signal: impl Into<String>,
        op: Comparison,
        sigma: f64,
    ) -> Self {
        Self {
            name: name.into(),
            constraints: vec![Constraint::new(signal, op, sigma)],
        }
    }

    /// Attaches the same bounds to every constraint.
    pub fn with_bounds(mut self, bounds: NormalizationBounds) -> Result<Self, TraceError> {
        for c in &mut self.constraints {
            c.bounds = Some(bounds);
        }
        Self::new(self.name, self.constraints)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn has_bounds(&self) -> bool {
        self.constraints.iter().all(|c| c.bounds.is_some())
    }

    /// Margin given a per-signal value lookup.
    pub fn margin_with(&self, value_of: impl Fn(&str) -> Option<f64>) -> Result<f64, TraceError> {
        let mut m = f64::INFINITY;
        for c in &self.constraints {
            let v =
                value_of(&c.signal).ok_or_else(|| TraceError::UnknownSignal(c.signal.clone()))?;
            m = m.min(c.margin_of(v));
        }
        Ok(m)
    }

    /// Normalized margin given a per-signal value lookup.
    pub fn eta_margin_with(
        &self,
        value_of: impl Fn(&str) -> Option<f64>,
    ) -> Result<f64, TraceError> {
        let mut m = f64::INFINITY;
        for c in &self.constraints {
            let v =
                value_of(&c.signal).ok_or_else(|| TraceError::UnknownSignal(c.signal.clone()))?;
            let e = c
                .eta_margin_of(v)
                .ok_or_else(|| TraceError::MissingBounds(self.name.clone()))?;
            m = m.min(e);
        }
        Ok(m)
    }

    /// `(eta_min, eta_max)` of the normalized margin.
    pub fn eta_range(&self) -> Result<(f64, f64), TraceError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::INFINITY;
        for c in &self.constraints {
            let (l, h) = c
                .eta_range()
                .ok_or_else(|| TraceError::MissingBounds(self.name.clone()))?;
            lo = lo.min(l);
            hi = hi.min(h);
        }
        Ok((lo, hi))
    }
}

/// Atom margin `h(o_k) − σ` at sample `k` of `w`.
pub fn margin(w: &Word, atom: &PredicateSpec, k: usize) -> Result<f64, TraceError> {
    if k >= w.len() {
        return Err(TraceError::IndexOutOfRange {
            index: k,
            len: w.len(),
        });
    }
    atom.margin_with(|s| w.signal(s).map(|c| c[k]))
}

/// Normalized atom margin at sample `k` of `w`, in `[-1, 1]`.
pub fn eta_margin(w: &Word, atom: &PredicateSpec, k: usize) -> Result<f64, TraceError> {
    if k >= w.len() {
        return Err(TraceError::IndexOutOfRange {
            index: k,
            len: w.len(),
        });
    }
    atom.eta_margin_with(|s| w.signal(s).map(|c| c[k]))
}

/// Atom definitions keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredicateTable {
    atoms: BTreeMap<String, PredicateSpec>,
}

impl PredicateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, spec: PredicateSpec) -> Result<(), TraceError> {
        if self.atoms.contains_key(spec.name()) {
            return Err(TraceError::DuplicateAtom(spec.name().to_string()));
        }
        self.atoms.insert(spec.name().to_string(), spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&PredicateSpec> {
        self.atoms.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredicateSpec> {
        self.atoms.values()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl FromIterator<PredicateSpec> for PredicateTable {
    fn from_iter<I: IntoIterator<Item = PredicateSpec>>(iter: I) -> Self {
        let mut table = PredicateTable::new();
        for spec in iter {
            table.atoms.insert(spec.name().to_string(), spec);
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_least(sigma: f64) -> PredicateSpec {
        PredicateSpec::half_space("A", "x", Comparison::AtLeast, sigma)
    }

    fn word(samples: &[f64]) -> Word {
        Word::from_samples("x", samples).unwrap()
    }

    #[test]
    fn margin_examples() {
        let m = margin(&word(&[4.099]), &at_least(4.0), 0).unwrap();
        assert!((m - 0.099).abs() < 1e-12);
        let le = PredicateSpec::half_space("B", "x", Comparison::AtMost, 7.0);
        assert_eq!(margin(&word(&[5.0]), &le, 0).unwrap(), 2.0);
        assert_eq!(margin(&word(&[4.0]), &at_least(4.0), 0).unwrap(), 0.0);
    }

    #[test]
    fn margin_errors() {
        let w = word(&[1.0, 2.0]);
        assert!(matches!(
            margin(&w, &at_least(4.0), 2),
            Err(TraceError::IndexOutOfRange { index: 2, len: 2 })
        ));
        let other = PredicateSpec::half_space("A", "y", Comparison::AtLeast, 0.0);
        assert!(matches!(
            margin(&w, &other, 0),
            Err(TraceError::UnknownSignal(_))
        ));
    }

    #[test]
    fn eta_margin_examples() {
        let bounds = NormalizationBounds::new(0.0, 8.0).unwrap();
        let atom = at_least(4.0).with_bounds(bounds).unwrap();
        let w = word(&[6.0, 4.0, 8.0]);
        // Closed form (v - σ)/(U - L) against the normalized route.
        assert!((eta_margin(&w, &atom, 0).unwrap() - 0.25).abs() < 1e-15);
        let half = 0.5 * (bounds.normalize(6.0) - bounds.normalize(4.0));
        assert!((half - 0.25).abs() < 1e-15);
        assert_eq!(eta_margin(&w, &atom, 1).unwrap(), 0.0);
        assert!((eta_margin(&w, &atom, 2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(atom.eta_range().unwrap(), (-0.5, 0.5));
    }

    #[test]
    fn eta_margin_needs_bounds() {
        let w = word(&[6.0]);
        assert!(matches!(
            eta_margin(&w, &at_least(4.0), 0),
            Err(TraceError::MissingBounds(_))
        ));
    }

    #[test]
    fn eta_margin_clamps_out_of_range_samples() {
        let atom = at_least(4.0)
            .with_bounds(NormalizationBounds::new(0.0, 8.0).unwrap())
            .unwrap();
        assert_eq!(eta_margin(&word(&[100.0]), &atom, 0).unwrap(), 0.5);
        assert_eq!(eta_margin(&word(&[-3.0]), &atom, 0).unwrap(), -0.5);
    }

    #[test]
    fn at_most_eta_range_is_mirrored() {
        let atom = PredicateSpec::half_space("B", "x", Comparison::AtMost, 2.0)
            .with_bounds(NormalizationBounds::new(0.0, 8.0).unwrap())
            .unwrap();
        assert_eq!(atom.eta_range().unwrap(), (-0.75, 0.25));
        assert_eq!(eta_margin(&word(&[0.0]), &atom, 0).unwrap(), 0.25);
        assert_eq!(eta_margin(&word(&[8.0]), &atom, 0).unwrap(), -0.75);
    }

    #[test]
    fn region_margin_is_smallest_face() {
        let b = NormalizationBounds::new(0.0, 12.0).unwrap();
        let region = PredicateSpec::new(
            "A",
            vec![
                Constraint::new("x", Comparison::AtLeast, 1.0).with_bounds(b),
                Constraint::new("x", Comparison::AtMost, 4.0).with_bounds(b),
                Constraint::new("y", Comparison::AtLeast, 1.0).with_bounds(b),
                Constraint::new("y", Comparison::AtMost, 4.0).with_bounds(b),
            ],
        )
        .unwrap();
        let w = Word::new(
            0.0,
            1.0,
            vec![("x".into(), vec![2.0, 6.0]), ("y".into(), vec![3.5, 2.0])],
        )
        .unwrap();
        assert_eq!(margin(&w, &region, 0).unwrap(), 0.5);
        assert_eq!(margin(&w, &region, 1).unwrap(), -2.0);
        assert!((eta_margin(&w, &region, 0).unwrap() - 0.5 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_must_lie_in_range() {
        let err = at_least(9.0).with_bounds(NormalizationBounds::new(0.0, 8.0).unwrap());
        assert!(err.is_err());
        assert!(NormalizationBounds::new(1.0, 1.0).is_err());
    }

    #[test]
    fn slice_examples() {
        let w = word(&[5.0, 4.0, 6.0, 7.0]);
        assert_eq!(w.slice(1.0, 2.0).unwrap().signal("x").unwrap(), &[4.0, 6.0]);
        assert_eq!(
            w.slice(0.0, 3.0).unwrap().signal("x").unwrap(),
            w.signal("x").unwrap()
        );
        let empty = w.slice(2.0, 1.0).unwrap();
        assert_eq!(empty.len(), 0);
        assert!(empty.signal("x").unwrap().is_empty());
    }

    #[test]
    fn slice_rejects_off_grid_and_out_of_span() {
        let w = word(&[5.0, 4.0, 6.0, 7.0]);
        assert!(matches!(w.slice(0.5, 2.0), Err(TraceError::OffGrid { .. })));
        assert!(w.slice(1.0 + 1e-12, 2.0).is_ok());
        assert!(matches!(
            w.slice(1.0, 4.0),
            Err(TraceError::OutOfSpan { .. })
        ));
    }

    #[test]
    fn slice_composes() {
        let w = Word::new(
            0.0,
            0.5,
            vec![("x".into(), (0..12).map(f64::from).collect())],
        )
        .unwrap();
        let outer = w.slice(0.5, 4.5).unwrap();
        let inner = outer.slice(1.0, 3.0).unwrap();
        let direct = w.slice(1.0, 3.0).unwrap();
        assert_eq!(inner.signal("x"), direct.signal("x"));
        assert_eq!(inner.start_time(), 1.0);
    }

    #[test]
    fn word_construction_errors() {
        assert!(matches!(
            Word::new(0.0, 0.0, vec![("x".into(), vec![1.0])]),
            Err(TraceError::InvalidStep(_))
        ));
        assert!(matches!(
            Word::new(0.0, 1.0, vec![("x".into(), vec![])]),
            Err(TraceError::NoSamples)
        ));
        assert!(matches!(
            Word::new(
                0.0,
                1.0,
                vec![("x".into(), vec![1.0]), ("y".into(), vec![1.0, 2.0])]
            ),
            Err(TraceError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Word::new(0.0, 1.0, vec![("x".into(), vec![f64::NAN])]),
            Err(TraceError::NonFinite { .. })
        ));
    }

    #[test]
    fn push_requires_every_signal() {
        let mut w = word(&[1.0]);
        let mut row = BTreeMap::new();
        assert!(w.push(&row).is_err());
        row.insert("x".to_string(), 2.0);
        w.push(&row).unwrap();
        assert_eq!(w.signal("x").unwrap(), &[1.0, 2.0]);
    }
}
