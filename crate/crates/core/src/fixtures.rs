//! Seeded synthetic datasets and the reference models trained on them.

use ndarray::{Array1, Array2};
use rand::Rng as _;

use crate::blackbox::{self, BlackBox, Dataset, LogisticModel, LogisticParams};
use crate::error::Result;
use crate::rng;

/// Column names of [`wine_like`].
pub const WINE_FEATURES: [&str; 13] = [
    "alcohol",
    "malic_acid",
    "ash",
    "alcalinity",
    "magnesium",
    "phenols",
    "flavanoids",
    "nonflavanoid_phenols",
    "proanthocyanins",
    "color_intensity",
    "hue",
    "od280",
    "proline",
];

/// Ranges of the wine-like columns, roughly those of the UCI wine data.
const WINE_RANGES: [(f64, f64); 13] = [
    (11.0, 14.8),
    (0.7, 5.8),
    (1.4, 3.2),
    (10.6, 30.0),
    (70.0, 162.0),
    (1.0, 3.9),
    (0.3, 5.1),
    (0.1, 0.7),
    (0.4, 3.6),
    (1.3, 13.0),
    (0.5, 1.7),
    (1.3, 4.0),
    (278.0, 1680.0),
];

/// 13 strictly positive features; the label depends on alcohol, flavanoids
/// and color intensity, with 5% of labels flipped.
pub fn wine_like(m: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng::seeded(seed);
    let mut x = Array2::zeros((m, 13));
    let mut y = Array1::zeros(m);
    for i in 0..m {
        for (j, (lo, hi)) in WINE_RANGES.iter().enumerate() {
            x[[i, j]] = rng.random_range(*lo..*hi);
        }
        let score = (x[[i, 0]] - 12.9) / 1.9 + (x[[i, 6]] - 2.7) / 2.4 - (x[[i, 9]] - 7.1) / 5.8;
        let flip = rng.random::<f64>() < 0.05;
        y[i] = f64::from((score > 0.0) != flip);
    }
    Dataset::new(x, y, WINE_FEATURES.iter().map(|s| s.to_string()).collect())
}

/// Ten-tree, depth-four forest on 300 wine-like rows.
pub fn stump_forest() -> Result<(Dataset, BlackBox)> {
    let data = wine_like(300, 11)?;
    let model = blackbox::train_stump_forest(&data, 10, 4, 5)?;
    Ok((data, model))
}

/// Dimension of [`sparse_logistic`].
pub const SPARSE_DIM: usize = 10;
/// Non-zero weights of the generating model of [`sparse_logistic`].
pub const SPARSE_SUPPORT: [usize; 4] = [1, 3, 6, 8];
const SPARSE_WEIGHTS: [f64; 4] = [1.5, -1.2, 1.0, -1.8];

/// The generating model: features uniform on `[1, 3]`, four non-zero
/// weights, and a bias that centers the logits.
pub fn sparse_logistic_truth() -> LogisticModel {
    let mut w = vec![0.0; SPARSE_DIM];
    for (&i, &v) in SPARSE_SUPPORT.iter().zip(&SPARSE_WEIGHTS) {
        w[i] = v;
    }
    let bias = -2.0 * SPARSE_WEIGHTS.iter().sum::<f64>();
    LogisticModel::new(w, bias)
}

/// `m` rows with Bernoulli labels drawn from [`sparse_logistic_truth`].
pub fn sparse_logistic(m: usize, seed: u64) -> Result<Dataset> {
    let truth = sparse_logistic_truth();
    let mut rng = rng::seeded(seed);
    let x = Array2::from_shape_simple_fn((m, SPARSE_DIM), || rng.random_range(1.0..3.0));
    let y = x
        .rows()
        .into_iter()
        .map(|r| f64::from(rng.random::<f64>() < truth.predict(&r.to_vec())))
        .collect();
    Dataset::unnamed(x, y)
}

/// L1 strength used by [`logistic`].
pub const LOGISTIC_L1: f64 = 0.02;

/// L1 logistic regression trained on 4000 rows of [`sparse_logistic`].
pub fn logistic() -> Result<(Dataset, BlackBox)> {
    let data = sparse_logistic(4000, 3)?;
    let trained = blackbox::train_logistic_with(
        &data,
        &LogisticParams {
            l1: LOGISTIC_L1,
            ..Default::default()
        },
    )?;
    trained.report.check()?;
    Ok((data, trained.model))
}

/// Four noisy clusters at `(±1, ±1)` labelled by the sign of `x₀ x₁ < 0`.
pub fn xor(m: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng::seeded(seed);
    let mut x = Array2::zeros((m, 2));
    let mut y = Array1::zeros(m);
    for i in 0..m {
        let (a, b) = (i % 2 == 0, (i / 2) % 2 == 0);
        x[[i, 0]] = if a { 1.0 } else { -1.0 } + rng.random_range(-0.3..0.3);
        x[[i, 1]] = if b { 1.0 } else { -1.0 } + rng.random_range(-0.3..0.3);
        y[i] = f64::from(a != b);
    }
    Dataset::unnamed(x, y)
}
