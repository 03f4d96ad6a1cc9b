use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Outputs for finite inputs are clamped to `[KDE_EPS, 1 - KDE_EPS]`.
pub const KDE_EPS: f64 = 1e-12;

/// Bandwidth rule used by [`kde_transform_fit`], recorded in run manifests.
pub const KDE_BANDWIDTH_RULE: &str = "silverman: h = 0.9 * min(sd, IQR/1.34) * n^(-1/5); sd when IQR = 0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureKde {
    /// Training values; empty marks a degenerate feature.
    points: Vec<f64>,
    bandwidth: f64,
}

/// Per-feature Gaussian-kernel CDF transform fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    features: Vec<FeatureKde>,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn silverman(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Fits one smoothed empirical CDF per feature column of `rows`.
pub fn kde_transform_fit(rows: &[Vec<f64>]) -> KdeModel {
    let d = rows.first().map_or(0, Vec::len);
    let features = (0..d)
        .map(|j| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let h = if col.len() >= 2 { silverman(&col) } else { 0.0 };
            if h > 0.0 && h.is_finite() {
                FeatureKde { points: col, bandwidth: h }
            } else {
                FeatureKde {
                    points: Vec::new(),
                    bandwidth: 0.0,
                }
            }
        })
        .collect();
    KdeModel { features }
}

impl KdeModel {
    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.bandwidth).collect()
    }

    /// Maps each feature through its smoothed CDF. Degenerate training
    /// features map to 0.5.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.features
            .iter()
            .zip(x)
            .map(|(f, &v)| {
                if f.points.is_empty() {
                    return 0.5;
                }
                let cdf = f.points.iter().map(|&p| normal_cdf((v - p) / f.bandwidth)).sum::<f64>() / f.points.len() as f64;
                if v.is_finite() {
                    cdf.clamp(KDE_EPS, 1.0 - KDE_EPS)
                } else {
                    cdf
                }
            })
            .collect()
    }
}

pub fn kde_transform(model: &KdeModel, x: &[f64]) -> Vec<f64> {
    model.transform(x)
}
