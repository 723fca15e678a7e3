use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::semantics::{agm_and, agm_or};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("interval operation on an empty list")]
    Empty,
    #[error("invalid interval [{lo}, {hi}]")]
    Invalid { lo: f64, hi: f64 },
    #[error("interval endpoint {0} outside [-1, 1]")]
    OutOfRange(f64),
}

/// Closed interval `[lo, hi]` bounding a robustness value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessInterval {
    lo: f64,
    hi: f64,
}

impl RobustnessInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(IntervalError::Invalid { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn singleton(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub(crate) fn new_unchecked(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "[{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.lo - tol <= v && v <= self.hi + tol
    }

    pub fn is_subset_of(&self, other: &Self, tol: f64) -> bool {
        other.lo - tol <= self.lo && self.hi <= other.hi + tol
    }

    /// Interval of `-v` for `v` in `self`.
    pub fn reflect(&self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn verdict(&self) -> Verdict {
        verdict(self)
    }
}

impl fmt::Display for RobustnessInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_singleton() {
            write!(f, "{{{}}}", self.lo)
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn is_conclusive(self) -> bool {
        self != Verdict::Inconclusive
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn verdict(i: &RobustnessInterval) -> Verdict {
    if i.lo > 0.0 {
        Verdict::Satisfied
    } else if i.hi < 0.0 {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    }
}

fn non_empty(intervals: &[RobustnessInterval]) -> Result<(), IntervalError> {
    if intervals.is_empty() {
        Err(IntervalError::Empty)
    } else {
        Ok(())
    }
}

/// Endpoint-wise minimum.
pub fn imin(intervals: &[RobustnessInterval]) -> Result<RobustnessInterval, IntervalError> {
    non_empty(intervals)?;
    Ok(min_unchecked(intervals))
}

/// Endpoint-wise maximum.
pub fn imax(intervals: &[RobustnessInterval]) -> Result<RobustnessInterval, IntervalError> {
    non_empty(intervals)?;
    Ok(max_unchecked(intervals))
}

fn endpoints(intervals: &[RobustnessInterval]) -> Result<(Vec<f64>, Vec<f64>), IntervalError> {
    non_empty(intervals)?;
    let los: Vec<f64> = intervals.iter().map(|i| i.lo).collect();
    let his: Vec<f64> = intervals.iter().map(|i| i.hi).collect();
    Ok((los, his))
}

/// AGM disjunction applied to the lower and to the upper endpoints.
pub fn iagm_or(intervals: &[RobustnessInterval]) -> Result<RobustnessInterval, IntervalError> {
    let (los, his) = endpoints(intervals)?;
    let lo = agm_or(&los).map_err(out_of_range)?;
    let hi = agm_or(&his).map_err(out_of_range)?;
    Ok(RobustnessInterval::new_unchecked(lo, hi))
}

/// AGM conjunction applied to the lower and to the upper endpoints.
pub fn iagm_and(intervals: &[RobustnessInterval]) -> Result<RobustnessInterval, IntervalError> {
    let (los, his) = endpoints(intervals)?;
    let lo = agm_and(&los).map_err(out_of_range)?;
    let hi = agm_and(&his).map_err(out_of_range)?;
    Ok(RobustnessInterval::new_unchecked(lo, hi))
}

fn out_of_range(e: crate::semantics::AgmError) -> IntervalError {
    match e {
        crate::semantics::AgmError::Empty => IntervalError::Empty,
        crate::semantics::AgmError::OutOfRange(v) => IntervalError::OutOfRange(v),
    }
}

pub(crate) fn min_unchecked(intervals: &[RobustnessInterval]) -> RobustnessInterval {
    let lo = intervals.iter().map(|i| i.lo).fold(f64::INFINITY, f64::min);
    let hi = intervals.iter().map(|i| i.hi).fold(f64::INFINITY, f64::min);
    RobustnessInterval { lo, hi }
}

pub(crate) fn max_unchecked(intervals: &[RobustnessInterval]) -> RobustnessInterval {
    let lo = intervals
        .iter()
        .map(|i| i.lo)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = intervals
        .iter()
        .map(|i| i.hi)
        .fold(f64::NEG_INFINITY, f64::max);
    RobustnessInterval { lo, hi }
}
