//! Regression metrics in price space.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub explained_variance: f64,
    pub r2: f64,
    pub max_error: f64,
    pub samples: usize,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples: {}", self.samples)?;
        writeln!(f, "explained_variance: {:.6}", self.explained_variance)?;
        writeln!(f, "r2: {:.6}", self.r2)?;
        writeln!(f, "max_error: {:.6}", self.max_error)
    }
}

fn check_pair(actual: &[f64], predicted: &[f64], min_len: usize) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension {
            op: "metric",
            lhs: vec![actual.len()],
            rhs: vec![predicted.len()],
        });
    }
    if actual.len() < min_len {
        return Err(Error::TooShort {
            what: "metric".into(),
            length: actual.len(),
            required: min_len,
        });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sum_sq_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

pub fn explained_variance(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted, 2)?;
    let denom = sum_sq_dev(actual);
    if denom == 0.0 {
        return Err(Error::ZeroVariance("actual values".into()));
    }
    let residual: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
    Ok(1.0 - sum_sq_dev(&residual) / denom)
}

pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted, 2)?;
    let denom = sum_sq_dev(actual);
    if denom == 0.0 {
        return Err(Error::ZeroVariance("actual values".into()));
    }
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(1.0 - sse / denom)
}

pub fn max_error(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted, 1)?;
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .fold(0.0, f64::max))
}

pub fn report(actual: &[f64], predicted: &[f64]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        explained_variance: explained_variance(actual, predicted)?,
        r2: r2(actual, predicted)?,
        max_error: max_error(actual, predicted)?,
        samples: actual.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identities() {
        let a = [1.0, 2.0, 3.0, 7.5];
        assert_eq!(r2(&a, &a).unwrap(), 1.0);
        assert_eq!(explained_variance(&a, &a).unwrap(), 1.0);
        assert_eq!(max_error(&a, &a).unwrap(), 0.0);
        let m = [3.375; 4];
        assert!(r2(&a, &m).unwrap().abs() < 1e-12);
        let shifted: Vec<f64> = a.iter().map(|x| x + 4.0).collect();
        assert!((explained_variance(&a, &shifted).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_bias_r2() {
        let r = r2(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((r + 0.5).abs() < 1e-12);
    }

    #[test]
    fn max_error_value() {
        assert_eq!(max_error(&[1.0, 2.0], &[1.0, 5.0]).unwrap(), 3.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(r2(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ZeroVariance(_))));
        assert!(matches!(explained_variance(&[2.0; 3], &[1.0; 3]), Err(Error::ZeroVariance(_))));
        assert!(matches!(max_error(&[1.0], &[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    fn two_pass_variance(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mut m = 0.0;
        for x in v {
            m += x;
        }
        m /= n;
        let mut s = 0.0;
        for x in v {
            s += (x - m).powi(2);
        }
        s / n
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_ordering(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50),
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(two_pass_variance(&a) > 1e-6);
            let ev = explained_variance(&a, &p).unwrap();
            let resid: Vec<f64> = a.iter().zip(&p).map(|(x, y)| x - y).collect();
            let brute = 1.0 - two_pass_variance(&resid) / two_pass_variance(&a);
            prop_assert!((ev - brute).abs() <= 1e-12 * brute.abs().max(1.0));
            let r = r2(&a, &p).unwrap();
            prop_assert!(r <= ev + 1e-12 * ev.abs().max(1.0));
            prop_assert!(r <= 1.0 && ev <= 1.0);

            let mut idx: Vec<usize> = (0..a.len()).collect();
            idx.reverse();
            let ar: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            let pr: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
            prop_assert_eq!(max_error(&a, &p).unwrap(), max_error(&ar, &pr).unwrap());
            prop_assert!((r2(&ar, &pr).unwrap() - r).abs() <= 1e-12 * r.abs().max(1.0));
        }
    }
}
