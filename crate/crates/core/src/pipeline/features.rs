use chrono::NaiveDate;

use super::ohlcv::{OhlcvSeries, PRICE_COLUMNS};
use crate::error::{Error, Result};

pub const TARGET: &str = "close";
pub const YIELD: &str = "yield";
pub const DEFAULT_SMA_WINDOWS: [usize; 3] = [10, 50, 100];

pub fn sma_name(window: usize) -> String {
    format!("sma_{window}")
}

/// Date-aligned named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

impl FeatureFrame {
    pub fn from_series(series: &OhlcvSeries) -> Self {
        FeatureFrame {
            dates: series.dates.clone(),
            names: PRICE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            columns: series.columns.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.index_of(name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Incompatible(format!("frame has no column `{name}`")))
    }

    /// A column that must not contain missing cells.
    pub fn complete_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .iter()
            .enumerate()
            .map(|(r, v)| {
                v.ok_or_else(|| {
                    Error::InvalidArgument(format!("column `{name}` is missing a value at {}", self.dates[r]))
                })
            })
            .collect()
    }

    /// Adds or replaces a column.
    pub fn set_column(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "column `{name}` has {} values, frame has {} rows",
                values.len(),
                self.len()
            )));
        }
        match self.index_of(name) {
            Some(i) => self.columns[i] = values,
            None => {
                self.names.push(name.to_string());
                self.columns.push(values);
            }
        }
        Ok(())
    }

    /// Keeps rows `start..`.
    pub fn drop_leading(&self, start: usize) -> FeatureFrame {
        let start = start.min(self.len());
        FeatureFrame {
            dates: self.dates[start..].to_vec(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[start..].to_vec()).collect(),
        }
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.iter().any(Option::is_none))
    }
}

/// Appends `sma_<w>` columns of trailing close means; the first `w-1` cells are missing.
pub fn add_moving_averages(frame: &FeatureFrame, windows: &[usize]) -> Result<FeatureFrame> {
    let close = frame.complete_column(TARGET)?;
    let mut out = frame.clone();
    for &w in windows {
        if w == 0 {
            return Err(Error::InvalidArgument("moving-average window must be at least 1".into()));
        }
        if close.len() < w {
            return Err(Error::TooShort {
                what: format!("{}-day moving average warm-up", w),
                length: close.len(),
                required: w,
            });
        }
        let sma = (0..close.len())
            .map(|t| (t + 1 >= w).then(|| close[t + 1 - w..=t].iter().sum::<f64>() / w as f64))
            .collect();
        out.set_column(&sma_name(w), sma)?;
    }
    Ok(out)
}

/// Appends the one-day relative change of close; the first cell is missing.
pub fn add_yield(frame: &FeatureFrame) -> Result<FeatureFrame> {
    let close = frame.complete_column(TARGET)?;
    let mut values = Vec::with_capacity(close.len());
    for t in 0..close.len() {
        if t == 0 {
            values.push(None);
            continue;
        }
        if close[t - 1] == 0.0 {
            return Err(Error::ZeroDivision(frame.dates[t].to_string()));
        }
        values.push(Some((close[t] - close[t - 1]) / close[t - 1]));
    }
    let mut out = frame.clone();
    out.set_column(YIELD, values)?;
    Ok(out)
}

/// Number of leading rows with incomplete engineered features.
pub fn warm_up_rows(sma_windows: &[usize]) -> usize {
    sma_windows.iter().copied().max().unwrap_or(0).max(1)
}

/// Pearson correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Candidate features whose |r| against close reaches `threshold`, in frame
/// order, paired with their r. Only `rows` are used.
pub fn select_by_correlation(
    frame: &FeatureFrame,
    rows: &[usize],
    threshold: f64,
) -> Result<Vec<(String, f64)>> {
    if rows.len() < 2 {
        return Err(Error::TooShort {
            what: "correlation analysis".into(),
            length: rows.len(),
            required: 2,
        });
    }
    let gather = |name: &str| -> Result<Vec<f64>> {
        let col = frame.complete_column(name)?;
        Ok(rows.iter().map(|&r| col[r]).collect())
    };
    let target = gather(TARGET)?;
    if target.iter().all(|v| *v == target[0]) {
        return Err(Error::ZeroVariance(TARGET.into()));
    }
    let mut selected = Vec::new();
    for name in frame.names.iter().filter(|n| *n != TARGET) {
        match pearson(&gather(name)?, &target) {
            None => log::warn!("feature `{name}` is constant on the fit rows and was dropped"),
            Some(r) if r.abs() >= threshold => selected.push((name.clone(), r)),
            Some(_) => {}
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn frame_with_close(close: &[f64]) -> FeatureFrame {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        FeatureFrame {
            dates: (0..close.len()).map(|i| start + chrono::Days::new(i as u64)).collect(),
            names: vec![TARGET.to_string()],
            columns: vec![close.iter().map(|v| Some(*v)).collect()],
        }
    }

    #[test]
    fn constant_close_sma() {
        let f = add_moving_averages(&frame_with_close(&[5.0; 12]), &[10]).unwrap();
        let sma = f.column("sma_10").unwrap();
        assert!(sma[..9].iter().all(Option::is_none));
        assert!(sma[9..].iter().all(|v| *v == Some(5.0)));
    }

    #[test]
    fn short_window_values() {
        let f = add_moving_averages(&frame_with_close(&[1.0, 2.0, 3.0]), &[2]).unwrap();
        assert_eq!(f.column("sma_2").unwrap(), &[None, Some(1.5), Some(2.5)]);
    }

    #[test]
    fn sma_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let close: Vec<f64> = (0..200).map(|_| rng.gen_range(10.0..20.0)).collect();
        let f = add_moving_averages(&frame_with_close(&close), &[10, 50]).unwrap();
        for w in [10usize, 50] {
            let sma = f.column(&sma_name(w)).unwrap();
            for t in w - 1..close.len() {
                let mut acc = 0.0;
                for k in 0..w {
                    acc += close[t - k];
                }
                assert!((sma[t].unwrap() - acc / w as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn short_series_names_required_length() {
        let err = add_moving_averages(&frame_with_close(&[1.0; 50]), &[10, 100]).unwrap_err();
        assert!(matches!(err, Error::TooShort { required: 100, .. }));
    }

    #[test]
    fn yield_values() {
        let f = add_yield(&frame_with_close(&[100.0, 110.0, 99.0])).unwrap();
        let y = f.column(YIELD).unwrap();
        assert_eq!(y[0], None);
        assert!((y[1].unwrap() - 0.10).abs() < 1e-15);
        assert!((y[2].unwrap() + 0.10).abs() < 1e-15);
        let flat = add_yield(&frame_with_close(&[3.0; 4])).unwrap();
        assert!(flat.column(YIELD).unwrap()[1..].iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn yield_zero_close_names_date() {
        let err = add_yield(&frame_with_close(&[1.0, 0.0, 2.0])).unwrap_err();
        match err {
            Error::ZeroDivision(d) => assert_eq!(d, "2021-01-03"),
            e => panic!("unexpected {e}"),
        }
    }

    fn frame_with(close: &[f64], extra: &[(&str, Vec<f64>)]) -> FeatureFrame {
        let mut f = frame_with_close(close);
        for (name, values) in extra {
            f.set_column(name, values.iter().map(|v| Some(*v)).collect()).unwrap();
        }
        f
    }

    fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..x.len() {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            syy += y[i] * y[i];
            sxy += x[i] * y[i];
        }
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn correlation_selection() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let close: Vec<f64> = (0..1000).map(|i| 50.0 + (i as f64 * 0.05).sin() * 10.0).collect();
        let noise: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = close.iter().map(|c| -c).collect();
        let f = frame_with(
            &close,
            &[("same", close.clone()), ("neg", neg), ("noise", noise.clone()), ("flat", vec![2.0; 1000])],
        );
        let rows: Vec<usize> = (0..1000).collect();
        let sel = select_by_correlation(&f, &rows, 0.5).unwrap();
        let names: Vec<&str> = sel.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, vec!["same", "neg"]);
        assert!((sel[0].1 - 1.0).abs() < 1e-12 && (sel[1].1 + 1.0).abs() < 1e-12);
        let r = pearson(&noise, &close).unwrap();
        assert!(r.abs() < 0.2);
        assert!((r - brute_pearson(&noise, &close)).abs() < 1e-9);
    }

    #[test]
    fn constant_target_rejected() {
        let f = frame_with(&[1.0; 5], &[("x", vec![1.0, 2.0, 3.0, 4.0, 5.0])]);
        assert!(matches!(
            select_by_correlation(&f, &[0, 1, 2, 3, 4], 0.5),
            Err(Error::ZeroVariance(_))
        ));
    }

    proptest! {
        #[test]
        fn selection_invariant_under_positive_affine(
            scale in 0.01f64..100.0, shift in -50.0f64..50.0, seed in 0u64..500,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let close: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a: Vec<f64> = close.iter().map(|c| c + rng.gen_range(-0.5..0.5)).collect();
            let b: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..1.0)).collect();
            let rows: Vec<usize> = (0..60).collect();
            let base = frame_with(&close, &[("a", a.clone()), ("b", b.clone())]);
            let moved = frame_with(&close, &[
                ("a", a.iter().map(|v| v * scale + shift).collect()),
                ("b", b.iter().map(|v| v * scale + shift).collect()),
            ]);
            let names = |f: &FeatureFrame| select_by_correlation(f, &rows, 0.3).unwrap()
                .into_iter().map(|(n, r)| (n, (r * 1e6).round())).collect::<Vec<_>>();
            prop_assert_eq!(names(&base), names(&moved));
        }
    }
}
