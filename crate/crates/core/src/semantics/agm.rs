//! Arithmetic-geometric mean (AGM) conjunction and disjunction.
//!
//! For values `r_1..r_N` in `[-1, 1]`:
//!
//! * `AGM_and` is `(Π(1 + r_i))^(1/N) − 1` when every `r_i > 0`, otherwise the
//!   mean of the negative parts `min(r_i, 0)`.
//! * `AGM_or` is `1 − (Π(1 − r_i))^(1/N)` when every `r_i < 0`, otherwise the
//!   mean of the positive parts `max(r_i, 0)`.
//!
//! Both are non-decreasing in every argument, which is what makes endpoint-wise
//! interval evaluation sound. Geometric means are computed in log space
//! (`ln_1p`/`exp_m1`) so the sign of the result never flips through rounding.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgmError {
    #[error("AGM of an empty list")]
    Empty,
    #[error("AGM argument {0} outside [-1, 1]")]
    OutOfRange(f64),
}

fn check(values: &[f64]) -> Result<(), AgmError> {
    if values.is_empty() {
        return Err(AgmError::Empty);
    }
    match values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        Some(&v) => Err(AgmError::OutOfRange(v)),
        None => Ok(()),
    }
}

pub fn agm_and(values: &[f64]) -> Result<f64, AgmError> {
    check(values)?;
    Ok(and_unchecked(values))
}

pub fn agm_or(values: &[f64]) -> Result<f64, AgmError> {
    check(values)?;
    Ok(or_unchecked(values))
}

pub(crate) fn and_unchecked(values: &[f64]) -> f64 {
    if let [single] = values {
        return *single;
    }
    let n = values.len() as f64;
    if values.iter().all(|&r| r > 0.0) {
        let mean_log = values.iter().map(|r| r.ln_1p()).sum::<f64>() / n;
        mean_log.exp_m1().min(1.0)
    } else {
        values.iter().map(|&r| r.min(0.0)).sum::<f64>() / n
    }
}

pub(crate) fn or_unchecked(values: &[f64]) -> f64 {
    if let [single] = values {
        return *single;
    }
    let n = values.len() as f64;
    if values.iter().all(|&r| r < 0.0) {
        let mean_log = values.iter().map(|r| (-r).ln_1p()).sum::<f64>() / n;
        (-mean_log.exp_m1()).max(-1.0)
    } else {
        values.iter().map(|&r| r.max(0.0)).sum::<f64>() / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn conjunction_examples() {
        let v = agm_and(&[0.2, 0.4]).unwrap();
        assert!((v - ((1.2f64 * 1.4).sqrt() - 1.0)).abs() < TOL);
        assert!((v - 0.29615).abs() < 1e-5);
        assert!((agm_and(&[0.2, -0.4]).unwrap() + 0.2).abs() < TOL);
        // Zero is not positive: the negative branch applies and yields 0.
        assert_eq!(agm_and(&[0.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn disjunction_examples() {
        let v = agm_or(&[-0.2, -0.4]).unwrap();
        assert!((v - (1.0 - (1.2f64 * 1.4).sqrt())).abs() < TOL);
        assert!((v + 0.29615).abs() < 1e-5);
        assert!((agm_or(&[-0.2, 0.4]).unwrap() - 0.2).abs() < TOL);
        assert_eq!(agm_or(&[0.0, -0.5]).unwrap(), 0.0);
    }

    #[test]
    fn single_value_is_identity() {
        for r in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(agm_or(&[r]).unwrap(), r);
            assert_eq!(agm_and(&[r]).unwrap(), r);
        }
    }

    #[test]
    fn extremes() {
        assert_eq!(agm_and(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(agm_or(&[-1.0, -1.0]).unwrap(), -1.0);
        assert_eq!(agm_and(&[-1.0, 1.0]).unwrap(), -0.5);
    }

    #[test]
    fn errors() {
        assert_eq!(agm_and(&[]), Err(AgmError::Empty));
        assert_eq!(agm_or(&[]), Err(AgmError::Empty));
        assert_eq!(agm_and(&[0.5, 1.5]), Err(AgmError::OutOfRange(1.5)));
        assert!(matches!(agm_or(&[f64::NAN]), Err(AgmError::OutOfRange(_))));
    }

    fn values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..=1.0, 1..8)
    }

    proptest! {
        #[test]
        fn idempotent_on_equal_arguments(r in -1.0f64..=1.0, n in 1usize..10) {
            let v = vec![r; n];
            prop_assert!((agm_and(&v).unwrap() - r).abs() < TOL);
            prop_assert!((agm_or(&v).unwrap() - r).abs() < TOL);
        }

        #[test]
        fn bounded(v in values()) {
            let max = v.iter().cloned().fold(f64::MIN, f64::max);
            let min = v.iter().cloned().fold(f64::MAX, f64::min);
            let a = agm_and(&v).unwrap();
            let o = agm_or(&v).unwrap();
            prop_assert!(a <= max + TOL && a >= -1.0);
            prop_assert!(o >= min - TOL && o <= 1.0);
        }

        #[test]
        fn permutation_invariant(mut v in values(), seed in any::<u64>()) {
            let a = agm_and(&v).unwrap();
            let o = agm_or(&v).unwrap();
            let k = (seed as usize) % v.len();
            v.rotate_left(k);
            v.reverse();
            prop_assert!((agm_and(&v).unwrap() - a).abs() < TOL);
            prop_assert!((agm_or(&v).unwrap() - o).abs() < TOL);
        }

        #[test]
        fn sign_tracks_min_and_max(v in values()) {
            let max = v.iter().cloned().fold(f64::MIN, f64::max);
            let min = v.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert_eq!(agm_and(&v).unwrap() > 0.0, min > 0.0);
            prop_assert_eq!(agm_and(&v).unwrap() < 0.0, min < 0.0);
            prop_assert_eq!(agm_or(&v).unwrap() > 0.0, max > 0.0);
            prop_assert_eq!(agm_or(&v).unwrap() < 0.0, max < 0.0);
        }

        #[test]
        fn monotone_in_each_argument(v in values(), idx in any::<usize>(), bump in 0.0f64..1.0) {
            let i = idx % v.len();
            let mut w = v.clone();
            w[i] = (w[i] + bump).min(1.0);
            prop_assert!(agm_and(&w).unwrap() >= agm_and(&v).unwrap() - TOL);
            prop_assert!(agm_or(&w).unwrap() >= agm_or(&v).unwrap() - TOL);
        }
    }
}
