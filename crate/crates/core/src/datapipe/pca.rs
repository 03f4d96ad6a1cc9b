use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};

/// Principal axes fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` unit vectors, largest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

/// Fits the top `k` principal axes. Each axis is oriented so that its
/// largest-magnitude coordinate is positive.
pub fn pca_fit(rows: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if k == 0 || k > d || n < k || n < 2 {
        return Err(QcnnError::arg(format!("cannot fit {k} components to {n} rows of dimension {d}")));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(QcnnError::arg("rows have differing lengths"));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in &order[..k] {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((ci, xi), mi)| ci * (xi - mi)).sum())
            .collect()
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, zi) in self.components.iter().zip(z) {
            for (xj, cj) in x.iter_mut().zip(c) {
                *xj += zi * cj;
            }
        }
        x
    }
}

pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Vec<f64> {
    model.transform(x)
}
