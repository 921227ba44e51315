use crate::error::{Error, Result};

/// Per-column min-max statistics from the fit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerState {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerState {
    /// `columns[c][r]`; statistics use only `rows`.
    pub fn fit(columns: &[Vec<f64>], rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySplit("scaler fit".into()));
        }
        let mut min = Vec::with_capacity(columns.len());
        let mut max = Vec::with_capacity(columns.len());
        for col in columns {
            let (lo, hi) = rows
                .iter()
                .map(|&r| col[r])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            min.push(lo);
            max.push(hi);
        }
        Ok(ScalerState { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn transform_value(&self, c: usize, v: f64) -> f64 {
        let range = self.max[c] - self.min[c];
        if range == 0.0 {
            0.0
        } else {
            (v - self.min[c]) / range
        }
    }

    pub fn inverse_value(&self, c: usize, v: f64) -> f64 {
        v * (self.max[c] - self.min[c]) + self.min[c]
    }

    pub fn transform(&self, columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
        columns
            .iter()
            .enumerate()
            .map(|(c, col)| col.iter().map(|v| self.transform_value(c, *v)).collect())
            .collect()
    }
}
