use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Principal components of standardized fit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaState {
    pub mean: Vec<f64>,
    /// Sample standard deviation per feature; zero spreads are stored as 1.
    pub std: Vec<f64>,
    /// All eigenvectors as rows, sorted by descending eigenvalue.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub retained: usize,
}

impl PcaState {
    /// `columns[f][r]`; only `rows` contribute to the statistics.
    pub fn fit(columns: &[Vec<f64>], rows: &[usize], variance_target: f64) -> Result<Self> {
        let p = columns.len();
        let n = rows.len();
        if !(variance_target > 0.0 && variance_target <= 1.0) {
            return Err(Error::Config(format!(
                "pca variance target must be in (0, 1], got {variance_target}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("PCA needs at least one feature".into()));
        }
        if n < p.max(2) {
            return Err(Error::TooShort {
                what: format!("PCA over {p} features"),
                length: n,
                required: p.max(2),
            });
        }

        let mut mean = Vec::with_capacity(p);
        let mut std = Vec::with_capacity(p);
        for col in columns {
            let mu = rows.iter().map(|&r| col[r]).sum::<f64>() / n as f64;
            let var = rows.iter().map(|&r| (col[r] - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
            let s = var.sqrt();
            mean.push(mu);
            std.push(if s > 0.0 { s } else { 1.0 });
        }

        let z: Vec<Vec<f64>> = (0..p)
            .map(|f| rows.iter().map(|&r| (columns[f][r] - mean[f]) / std[f]).collect())
            .collect();
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let c = z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum::<f64>() / (n - 1) as f64;
                cov[(a, b)] = c;
                cov[(b, a)] = c;
            }
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PCA covariance"));
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut eigenvalues = Vec::with_capacity(p);
        let mut basis = Vec::with_capacity(p);
        for &k in &order {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = v
                .iter()
                .enumerate()
                .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            eigenvalues.push(eig.eigenvalues[k]);
            basis.push(v);
        }

        let total: f64 = eigenvalues.iter().map(|e| e.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::ZeroVariance("PCA features".into()));
        }
        let mut retained = p;
        let mut cumulative = 0.0;
        for (k, e) in eigenvalues.iter().enumerate() {
            cumulative += e.max(0.0);
            if cumulative / total >= variance_target - 1e-12 {
                retained = k + 1;
                break;
            }
        }

        Ok(PcaState {
            mean,
            std,
            basis,
            eigenvalues,
            retained,
        })
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    /// Fraction of total variance carried by the retained components.
    pub fn explained_share(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().map(|e| e.max(0.0)).sum();
        self.eigenvalues[..self.retained].iter().map(|e| e.max(0.0)).sum::<f64>() / total
    }

    pub fn component_names(&self) -> Vec<String> {
        (1..=self.retained).map(|k| format!("pc{k}")).collect()
    }

    /// Projects `columns[f][r]` onto the retained components, returning `[k][r]`.
    pub fn transform(&self, columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if columns.len() != self.features() {
            return Err(Error::Incompatible(format!(
                "PCA expects {} features, got {}",
                self.features(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        Ok(self.basis[..self.retained]
            .iter()
            .map(|v| {
                (0..rows)
                    .map(|r| {
                        v.iter()
                            .enumerate()
                            .map(|(f, w)| w * (columns[f][r] - self.mean[f]) / self.std[f])
                            .sum()
                    })
                    .collect()
            })
            .collect())
    }
}
