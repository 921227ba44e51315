//! Independent reference implementations and fixtures shared by integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use cnnlstm::pipeline::{make_windows, OhlcvSeries, PreprocessingState, ScalerState, Split, WindowedDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and eigenvectors (as rows), unsorted.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// Covariance of standardized columns (sample statistics), computed directly.
pub fn standardized_covariance(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = columns.len();
    let n = columns[0].len();
    let z: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mu = c.iter().sum::<f64>() / n as f64;
            let sd = (c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            c.iter().map(|x| (x - mu) / sd).collect()
        })
        .collect();
    (0..p)
        .map(|a| (0..p).map(|b| (0..n).map(|r| z[a][r] * z[b][r]).sum::<f64>() / (n - 1) as f64).collect())
        .collect()
}

/// Straightforward three-sigma filter followed by mean fill, one column at a time.
pub fn reference_clean_impute(column: &[Option<f64>]) -> Vec<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in column.iter().flatten() {
        sum += *v;
        count += 1;
    }
    let mean = sum / count as f64;
    let mut ss = 0.0;
    for v in column.iter().flatten() {
        ss += (*v - mean) * (*v - mean);
    }
    let sd = (ss / (count - 1) as f64).sqrt();
    let kept: Vec<Option<f64>> = column
        .iter()
        .map(|v| v.filter(|x| (x - mean).abs() <= 3.0 * sd))
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in kept.iter().flatten() {
        sum += *v;
        count += 1;
    }
    let fill = sum / count as f64;
    kept.iter().map(|v| v.unwrap_or(fill)).collect()
}

pub fn dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
    (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
}

/// Random OHLCV-shaped series with injected far outliers and masked cells.
/// Returns the series and the (column, row) positions of the outliers.
pub fn corrupted_series(seed: u64, rows: usize) -> (OhlcvSeries, Vec<(usize, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: [Vec<Option<f64>>; 5] = std::array::from_fn(|c| {
        let level = 50.0 + 10.0 * c as f64;
        (0..rows)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                Some(level + 2.0 * z)
            })
            .collect()
    });
    let mut outliers = Vec::new();
    for (c, col) in columns.iter_mut().enumerate() {
        for _ in 0..2 {
            let r = rng.gen_range(0..rows);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            // Sample sd is about 2; 40 is far beyond six of them even after the spike inflates it.
            col[r] = Some(col[r].unwrap() + sign * 40.0);
            outliers.push((c, r));
        }
        for _ in 0..5 {
            let r = rng.gen_range(0..rows);
            if !outliers.contains(&(c, r)) {
                col[r] = None;
            }
        }
    }
    (
        OhlcvSeries {
            dates: dates(rows),
            columns,
        },
        outliers,
    )
}

/// Preprocessing state whose target scaler is the identity.
pub fn identity_state(features: usize) -> PreprocessingState {
    PreprocessingState {
        horizon: 1,
        sma_windows: vec![],
        selected: (0..features).map(|f| format!("x{f}")).collect(),
        correlations: vec![1.0; features],
        pca: None,
        input_scaler: ScalerState {
            min: vec![0.0; features],
            max: vec![1.0; features],
        },
        target_scaler: ScalerState {
            min: vec![0.0],
            max: vec![1.0],
        },
    }
}

/// Small windowed dataset of a sine with two features; targets in [0, 1].
pub fn toy_windows(rows: usize, lookback: usize, split: Split) -> WindowedDataset {
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            let s = 0.5 + 0.4 * (r as f64 * 0.3).sin();
            vec![s, 0.5 + 0.4 * (r as f64 * 0.3).cos()]
        })
        .collect();
    let target: Vec<f64> = data.iter().map(|r| r[0]).collect();
    let mut ds = make_windows(&data, &target, &target, &dates(rows), lookback, 1).unwrap();
    ds.split = split;
    ds
}
