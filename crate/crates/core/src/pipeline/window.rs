use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    #[default]
    Chronological,
    Random,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::Chronological => "chronological",
            SplitMode::Random => "random",
        }
    }
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chronological" => Ok(SplitMode::Chronological),
            "random" => Ok(SplitMode::Random),
            _ => Err(Error::Config(format!(
                "split mode must be `chronological` or `random`, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitKind::Train),
            "validation" | "val" => Ok(SplitKind::Validation),
            "test" => Ok(SplitKind::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

/// Sample indices of each split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn get(&self, kind: SplitKind) -> &[usize] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Validation => &self.validation,
            SplitKind::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.2, 0.1];

pub fn validate_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    Ok(())
}

/// Train and validation counts are floored; the test split takes the remainder.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<(usize, usize, usize)> {
    validate_ratios(ratios)?;
    // The epsilon keeps e.g. 0.7 * 10 = 7.000000000000001 and 0.2 * 10 from flooring low.
    let train = ((ratios[0] * n as f64) + 1e-9).floor() as usize;
    let val = (((ratios[1] * n as f64) + 1e-9).floor() as usize).min(n - train);
    Ok((train, val, n - train - val))
}

pub fn split_indices(n: usize, ratios: [f64; 3], mode: SplitMode, seed: u64) -> Result<Split> {
    let (train, val, _) = split_counts(n, ratios)?;
    let mut order: Vec<usize> = (0..n).collect();
    if mode == SplitMode::Random {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let take = |range: std::ops::Range<usize>| {
        let mut v = order[range].to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: take(0..train),
        validation: take(train..train + val),
        test: take(train + val..n),
    })
}

/// Number of supervised samples a frame of `rows` rows yields.
pub fn sample_count(rows: usize, lookback: usize, horizon: usize) -> Result<usize> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("lookback and horizon must be at least 1".into()));
    }
    if rows < lookback + horizon {
        return Err(Error::TooShort {
            what: format!("windows of lookback {lookback} and horizon {horizon}"),
            length: rows,
            required: lookback + horizon,
        });
    }
    Ok(rows - lookback - horizon + 1)
}

/// Row index of sample `i`'s target.
pub fn target_row(i: usize, lookback: usize, horizon: usize) -> usize {
    i + lookback + horizon - 1
}

/// Sliding windows over model-ready rows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// `[N, T, F]`.
    pub inputs: Tensor,
    /// Scaled closes, `[N]`.
    pub targets: Tensor,
    /// Unscaled closes at the target rows.
    pub target_prices: Vec<f64>,
    pub target_dates: Vec<NaiveDate>,
    pub lookback: usize,
    pub horizon: usize,
    pub split: Split,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.target_prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_prices.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// Gathers the given samples into `([B, T, F], [B])`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let (t, f) = (self.lookback, self.features());
        let stride = t * f;
        let mut x = Vec::with_capacity(indices.len() * stride);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!("sample {i} out of range {}", self.len())));
            }
            x.extend_from_slice(&self.inputs.data()[i * stride..(i + 1) * stride]);
            y.push(self.targets.data()[i]);
        }
        Ok((
            Tensor::new(vec![indices.len(), t, f], x)?,
            Tensor::new(vec![indices.len()], y)?,
        ))
    }
}

/// Builds every window over `rows[r][f]` (model inputs), `scaled_target[r]`
/// and `prices[r]`, without assigning a split.
pub fn make_windows(
    rows: &[Vec<f64>],
    scaled_target: &[f64],
    prices: &[f64],
    dates: &[NaiveDate],
    lookback: usize,
    horizon: usize,
) -> Result<WindowedDataset> {
    let r = rows.len();
    if scaled_target.len() != r || prices.len() != r || dates.len() != r {
        return Err(Error::InvalidArgument("window sources have different lengths".into()));
    }
    let n = sample_count(r, lookback, horizon)?;
    let f = rows.first().map_or(0, Vec::len);
    if f == 0 || rows.iter().any(|row| row.len() != f) {
        return Err(Error::InvalidArgument("window rows must share a non-zero width".into()));
    }
    let mut x = Vec::with_capacity(n * lookback * f);
    let mut y = Vec::with_capacity(n);
    let mut target_prices = Vec::with_capacity(n);
    let mut target_dates = Vec::with_capacity(n);
    for i in 0..n {
        for row in &rows[i..i + lookback] {
            x.extend_from_slice(row);
        }
        let tr = target_row(i, lookback, horizon);
        y.push(scaled_target[tr]);
        target_prices.push(prices[tr]);
        target_dates.push(dates[tr]);
    }
    Ok(WindowedDataset {
        inputs: Tensor::new(vec![n, lookback, f], x)?,
        targets: Tensor::new(vec![n], y)?,
        target_prices,
        target_dates,
        lookback,
        horizon,
        split: Split::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_ratio_counts() {
        assert_eq!(split_counts(10, DEFAULT_RATIOS).unwrap(), (7, 2, 1));
        assert_eq!(split_counts(100, DEFAULT_RATIOS).unwrap(), (70, 20, 10));
    }

    #[test]
    fn ratios_must_sum_to_one() {
        assert!(matches!(split_counts(10, [0.7, 0.2, 0.2]), Err(Error::Config(_))));
    }

    #[test]
    fn sample_counts() {
        assert_eq!(sample_count(10, 3, 1).unwrap(), 7);
        assert_eq!(sample_count(4, 3, 1).unwrap(), 1);
        assert!(matches!(sample_count(3, 3, 1), Err(Error::TooShort { .. })));
    }

    fn toy(rows: usize, lookback: usize, horizon: usize) -> WindowedDataset {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..rows).map(|i| start + chrono::Days::new(i as u64)).collect();
        let data: Vec<Vec<f64>> = (0..rows).map(|r| vec![r as f64, -(r as f64)]).collect();
        let target: Vec<f64> = (0..rows).map(|r| r as f64 * 0.1).collect();
        let prices: Vec<f64> = (0..rows).map(|r| 100.0 + r as f64).collect();
        make_windows(&data, &target, &prices, &dates, lookback, horizon).unwrap()
    }

    #[test]
    fn windows_layout() {
        let ds = toy(10, 3, 2);
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.inputs.shape(), &[6, 3, 2]);
        // sample 1 covers rows 1..4 and targets row 5
        assert_eq!(&ds.inputs.data()[6..12], &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]);
        assert_eq!(ds.target_prices[1], 105.0);
        let (x, y) = ds.batch(&[1, 0]).unwrap();
        assert_eq!(x.shape(), &[2, 3, 2]);
        assert_eq!(y.data(), &[0.5, 0.4]);
    }

    proptest! {
        #[test]
        fn split_is_partition(n in 1usize..400, random in any::<bool>(), seed in any::<u64>()) {
            let mode = if random { SplitMode::Random } else { SplitMode::Chronological };
            let s = split_indices(n, DEFAULT_RATIOS, mode, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            if !random {
                let last_train = s.train.last().copied();
                let first_val = s.validation.first().copied();
                let first_test = s.test.first().copied();
                if let (Some(a), Some(b)) = (last_train, first_val) { prop_assert!(a < b); }
                if let (Some(b), Some(c)) = (s.validation.last().copied(), first_test) { prop_assert!(b < c); }
            }
        }

        #[test]
        fn targets_follow_inputs(rows in 2usize..60, lookback in 1usize..10, horizon in 1usize..5) {
            prop_assume!(rows >= lookback + horizon);
            let ds = toy(rows, lookback, horizon);
            prop_assert_eq!(ds.len(), rows - lookback - horizon + 1);
            for i in 0..ds.len() {
                let last_input = ds.inputs.data()[(i * lookback + lookback - 1) * 2];
                prop_assert!(ds.target_prices[i] - 100.0 > last_input);
            }
        }
    }
}
