//! Sparse linear surrogates fitted by weighted least squares.
//!
//! A surrogate is the affine map `g(z) = intercept + coefficients · z` on the
//! surrogate space. It is fitted to a [`NeighborhoodSample`] by minimizing
//!
//! ```text
//! Σ wᵢ (yᵢ − intercept − coefficients · zᵢ)² + ridge · ‖coefficients‖²
//! ```
//!
//! The intercept is never penalized. It is eliminated by centering every
//! column on its weighted mean, which leaves the Gram matrix of the centered
//! design as the normal matrix for the coefficients. Centering makes no
//! difference to the minimizer, but it keeps the system well scaled when the
//! neighborhood is a tiny cloud far from the origin (the uniform cube
//! `[1 − σ, 1]^d` at small σ).
//!
//! Sparsity comes from greedy forward selection: features are added one at
//! a time, each time the one whose inclusion leaves the smallest weighted
//! residual sum of squares, and the selected set is refit.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::cholesky_solve;

/// Relative pivot tolerance of the unregularized normal equations. A pivot
/// below `SINGULAR_TOL · Σw` marks the design as rank deficient.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Default threshold of [`LinearSurrogate::is_degenerate`].
pub const DEGENERACY_TOL: f64 = 1e-9;

/// An explanation model `g(z) = intercept + Σ coefficients[i] z[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSurrogate {
    intercept: f64,
    coefficients: Vec<f64>,
    selected: Vec<usize>,
}

impl LinearSurrogate {
    /// Builds a surrogate whose support is every index with a non-zero
    /// coefficient.
    pub fn new(intercept: f64, coefficients: Vec<f64>) -> Result<Self> {
        let selected = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self::from_parts(intercept, coefficients, selected)
    }

    /// Builds a surrogate with an explicit support. Coefficients outside
    /// `selected` must be exactly zero.
    pub fn from_parts(
        intercept: f64,
        coefficients: Vec<f64>,
        mut selected: Vec<usize>,
    ) -> Result<Self> {
        selected.sort_unstable();
        selected.dedup();
        if let Some(&last) = selected.last() {
            if last >= coefficients.len() {
                return Err(Error::DimensionMismatch {
                    expected: coefficients.len(),
                    found: last + 1,
                });
            }
        }
        let finite = intercept.is_finite() && coefficients.iter().all(|c| c.is_finite());
        if !finite {
            return Err(Error::InvalidConfig(
                "surrogate parameters must be finite".into(),
            ));
        }
        for (i, c) in coefficients.iter().enumerate() {
            if *c != 0.0 && selected.binary_search(&i).is_err() {
                return Err(Error::InvalidConfig(format!(
                    "coefficient {i} is non-zero but not selected"
                )));
            }
        }
        Ok(Self {
            intercept,
            coefficients,
            selected,
        })
    }

    /// The constant surrogate: all coefficients zero, nothing selected.
    pub fn constant(intercept: f64, dim: usize) -> Self {
        Self {
            intercept,
            coefficients: vec![0.0; dim],
            selected: Vec::new(),
        }
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Indices picked by the sparse fit, ascending.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Selected features whose refit coefficient is not exactly zero.
    pub fn explained_features(&self) -> Vec<usize> {
        self.selected
            .iter()
            .copied()
            .filter(|&i| self.coefficients[i] != 0.0)
            .collect()
    }

    pub fn predict(&self, point: &[f64]) -> Result<f64> {
        check_dim(self.dim(), point.len())?;
        Ok(self.eval(point))
    }

    pub(crate) fn eval(&self, point: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(point)
                .map(|(c, z)| c * z)
                .sum::<f64>()
    }

    /// True when every coefficient is below `tol` in magnitude; the
    /// intercept is ignored.
    pub fn is_degenerate(&self, tol: f64) -> bool {
        self.coefficients.iter().all(|c| c.abs() < tol)
    }
}

/// Training set of a surrogate: points of the surrogate space, their
/// weights and the black-box answers on them.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSample {
    points: Array2<f64>,
    weights: Array1<f64>,
    labels: Array1<f64>,
}

impl NeighborhoodSample {
    pub fn new(points: Array2<f64>, weights: Array1<f64>, labels: Array1<f64>) -> Result<Self> {
        check_dim(points.nrows(), weights.len())?;
        check_dim(points.nrows(), labels.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::EmptyWeights);
        }
        if points.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "sample contains non-finite values".into(),
            ));
        }
        Ok(Self {
            points,
            weights,
            labels,
        })
    }

    /// Sample with every weight equal to one.
    pub fn unweighted(points: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        let weights = Array1::ones(points.nrows());
        Self::new(points, weights, labels)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Same sample with the weights replaced.
    pub fn with_weights(&self, weights: Array1<f64>) -> Result<Self> {
        Self::new(self.points.clone(), weights, self.labels.clone())
    }
}

/// Weighted mean computed as an offset from `anchor`, so that a column of
/// identical values returns that value exactly.
pub(crate) fn anchored_mean(values: ArrayView1<f64>, weights: ArrayView1<f64>, total: f64) -> f64 {
    let anchor = values[0];
    let shift: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - anchor))
        .sum();
    anchor + shift / total
}

/// Centered second moments of a sample; every subset fit is solved from
/// these without touching the points again.
struct Moments {
    total_weight: f64,
    point_mean: Vec<f64>,
    label_mean: f64,
    /// Σ w (z − z̄)(z − z̄)ᵀ, row-major d × d.
    gram: Vec<f64>,
    /// Σ w (z − z̄)(y − ȳ).
    cross: Vec<f64>,
    /// Σ w (y − ȳ)².
    label_ss: f64,
}

impl Moments {
    fn of(sample: &NeighborhoodSample) -> Result<Self> {
        let n = sample.len();
        let d = sample.dim();
        if n == 0 {
            return Err(Error::EmptyWeights);
        }
        let w = sample.weights.view();
        let total_weight = w.sum();
        let point_mean: Vec<f64> = (0..d)
            .map(|j| anchored_mean(sample.points.column(j), w, total_weight))
            .collect();
        let label_mean = anchored_mean(sample.labels.view(), w, total_weight);

        let mut gram = vec![0.0; d * d];
        let mut cross = vec![0.0; d];
        let mut label_ss = 0.0;
        let mut centered = vec![0.0; d];
        for (i, row) in sample.points.rows().into_iter().enumerate() {
            let wi = w[i];
            let dy = sample.labels[i] - label_mean;
            for (c, (z, m)) in centered.iter_mut().zip(row.iter().zip(&point_mean)) {
                *c = z - m;
            }
            for a in 0..d {
                let wa = wi * centered[a];
                cross[a] += wa * dy;
                for b in a..d {
                    gram[a * d + b] += wa * centered[b];
                }
            }
            label_ss += wi * dy * dy;
        }
        for a in 0..d {
            for b in 0..a {
                gram[a * d + b] = gram[b * d + a];
            }
        }
        Ok(Self {
            total_weight,
            point_mean,
            label_mean,
            gram,
            cross,
            label_ss,
        })
    }

    fn dim(&self) -> usize {
        self.point_mean.len()
    }

    /// Coefficients on `subset` and the weighted residual sum of squares.
    fn solve(&self, subset: &[usize], ridge: f64) -> Result<(Vec<f64>, f64)> {
        let d = self.dim();
        let p = subset.len();
        let mut a = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        for (r, &i) in subset.iter().enumerate() {
            b[r] = self.cross[i];
            for (c, &j) in subset.iter().enumerate() {
                a[r * p + c] = self.gram[i * d + j];
            }
            a[r * p + r] += ridge;
        }
        let tol = if ridge > 0.0 {
            0.0
        } else {
            SINGULAR_TOL * self.total_weight
        };
        let alpha = cholesky_solve(&a, &b, tol).map_err(|s| Error::SingularSystem {
            column: subset[s.column],
            pivot: s.pivot,
        })?;
        // rss = yᵀWy − 2 αᵀb + αᵀGα, with G excluding the ridge term
        let mut quad = 0.0;
        for r in 0..p {
            let mut row = 0.0;
            for c in 0..p {
                row += self.gram[subset[r] * d + subset[c]] * alpha[c];
            }
            quad += alpha[r] * row;
        }
        let lin: f64 = alpha.iter().zip(&b).map(|(x, y)| x * y).sum();
        let rss = (self.label_ss - 2.0 * lin + quad).max(0.0);
        Ok((alpha, rss))
    }

    fn surrogate(&self, subset: &[usize], alpha: &[f64]) -> Result<LinearSurrogate> {
        let mut coefficients = vec![0.0; self.dim()];
        let mut intercept = self.label_mean;
        for (&i, &a) in subset.iter().zip(alpha) {
            coefficients[i] = a;
            intercept -= a * self.point_mean[i];
        }
        LinearSurrogate::from_parts(intercept, coefficients, subset.to_vec())
    }
}

fn check_ridge(ridge: f64) -> Result<()> {
    if ridge >= 0.0 && ridge.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "ridge must be a finite non-negative number, got {ridge}"
        )))
    }
}

/// Dense weighted least-squares fit over every feature.
pub fn fit_weighted_least_squares(
    sample: &NeighborhoodSample,
    ridge: f64,
) -> Result<LinearSurrogate> {
    check_ridge(ridge)?;
    let moments = Moments::of(sample)?;
    let all: Vec<usize> = (0..sample.dim()).collect();
    let (alpha, _) = moments.solve(&all, ridge)?;
    moments.surrogate(&all, &alpha)
}

/// At most `k` features chosen by greedy forward selection, then refit.
///
/// Candidates whose inclusion would make the system singular are skipped.
/// If no feature can be added at all, the singularity is returned; if the
/// selection stalls after some features were added, the fit stops early
/// with fewer than `k` features.
pub fn fit_k_sparse(sample: &NeighborhoodSample, k: usize, ridge: f64) -> Result<LinearSurrogate> {
    check_ridge(ridge)?;
    let d = sample.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidK { k, dim: d });
    }
    let moments = Moments::of(sample)?;
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut best_alpha: Vec<f64> = Vec::new();
    while selected.len() < k {
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        let mut first_failure = None;
        for j in (0..d).filter(|j| !selected.contains(j)) {
            let mut trial = selected.clone();
            trial.push(j);
            match moments.solve(&trial, ridge) {
                Ok((alpha, rss)) => {
                    // strict comparison keeps the lowest index on ties
                    if best.as_ref().is_none_or(|(_, r, _)| rss < *r) {
                        best = Some((j, rss, alpha));
                    }
                }
                Err(e) => {
                    first_failure.get_or_insert(e);
                }
            }
        }
        match best {
            Some((j, _, alpha)) => {
                selected.push(j);
                best_alpha = alpha;
            }
            None if selected.is_empty() => {
                return Err(first_failure.unwrap_or(Error::InvalidK { k, dim: d }));
            }
            None => break,
        }
    }
    // refit on the ascending support
    let mut order: Vec<usize> = (0..selected.len()).collect();
    order.sort_by_key(|&i| selected[i]);
    let subset: Vec<usize> = order.iter().map(|&i| selected[i]).collect();
    let alpha: Vec<f64> = order.iter().map(|&i| best_alpha[i]).collect();
    moments.surrogate(&subset, &alpha)
}

/// `surrogate(point)`; fails when the point has the wrong length.
pub fn predict(surrogate: &LinearSurrogate, point: &[f64]) -> Result<f64> {
    surrogate.predict(point)
}
