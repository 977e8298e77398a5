//! Explanation quality: adherence of the surrogate to the black box (R²)
//! and agreement with a gold-standard feature set.

use std::collections::BTreeSet;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::surrogate::{anchored_mean, LinearSurrogate, NeighborhoodSample};

/// Metrics attached to an explanation.
///
/// `r2` is `None` only when the labels have no variance but the surrogate
/// still misses them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub r2: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub coverage: Option<f64>,
}

/// Weighted coefficient of determination
/// `1 − Σ wᵢ (yᵢ − g(zᵢ))² / Σ wᵢ (yᵢ − ȳ)²` with `ȳ` the weighted mean.
///
/// Constant labels give `Ok(1.0)` when the surrogate reproduces them and
/// `Err(ZeroVariance)` otherwise.
pub fn r2_score(surrogate: &LinearSurrogate, sample: &NeighborhoodSample) -> Result<f64> {
    check_dim(surrogate.dim(), sample.dim())?;
    if sample.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "R² needs at least 2 points, got {}",
            sample.len()
        )));
    }
    let w = sample.weights();
    let y = sample.labels();
    let total = w.sum();
    let mean = anchored_mean(y.view(), w.view(), total);
    let coefficients = ArrayView1::from(surrogate.coefficients());
    let mut rss = 0.0;
    let mut tss = 0.0;
    for ((row, wi), yi) in sample.points().rows().into_iter().zip(w).zip(y) {
        let r = yi - (surrogate.intercept() + row.dot(&coefficients));
        rss += wi * r * r;
        tss += wi * (yi - mean) * (yi - mean);
    }
    if tss == 0.0 {
        return if rss == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::ZeroVariance)
        };
    }
    Ok(1.0 - rss / tss)
}

fn as_set(indices: &[usize]) -> BTreeSet<usize> {
    indices.iter().copied().collect()
}

/// `(|F_f ∩ F_g| / |F_f|, |F_f ∩ F_g| / |F_g|)`.
pub fn recall_precision(gold: &[usize], explained: &[usize]) -> Result<(f64, f64)> {
    let gold = as_set(gold);
    let explained = as_set(explained);
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    if explained.is_empty() {
        return Err(Error::EmptyExplained);
    }
    let hits = gold.intersection(&explained).count() as f64;
    Ok((hits / gold.len() as f64, hits / explained.len() as f64))
}

/// Fraction of the gold segments reported by the surrogate.
pub fn coverage(gold_segments: &[usize], explained_segments: &[usize]) -> Result<f64> {
    let gold = as_set(gold_segments);
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    let explained = as_set(explained_segments);
    Ok(gold.intersection(&explained).count() as f64 / gold.len() as f64)
}
