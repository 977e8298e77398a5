//! Exact expected-loss minimizers over small binary surrogate spaces.
//!
//! Every distribution here lives on the `2^d̂` vertices of the unit cube, so
//! expectations are finite sums and the best affine surrogate can be solved
//! exactly. The solver is a Householder QR of the row-scaled design, kept
//! separate from the normal-equation route in [`crate::surrogate`] so the two
//! can check each other. Rows are sorted by decreasing weight before the
//! factorization, which keeps it accurate when the weights span hundreds of
//! orders of magnitude.

use ndarray::{Array1, Array2};

use crate::blackbox::{predict_batch, BlackBox};
use crate::error::{check_dim, Error, Result};
use crate::neighborhoods::{kernel_weight, log_kernel_weight, ConversionSpec, KernelSpec};
use crate::surrogate::{LinearSurrogate, NeighborhoodSample};

/// Largest surrogate dimension that is enumerated.
pub const MAX_ENUMERATED_DIM: usize = 14;

/// A probability distribution on `{0, 1}^dim`. Point `i` has coordinate `j`
/// equal to bit `j` of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    dim: usize,
    mass: Vec<f64>,
}

fn check_enumerable(dim: usize) -> Result<()> {
    if dim > MAX_ENUMERATED_DIM {
        Err(Error::EnumerationCap(dim))
    } else {
        Ok(())
    }
}

impl DiscreteDistribution {
    pub fn uniform(dim: usize) -> Result<Self> {
        check_enumerable(dim)?;
        let size = 1usize << dim;
        Ok(Self {
            dim,
            mass: vec![1.0 / size as f64; size],
        })
    }

    /// Normalizes non-negative masses, one per vertex.
    pub fn from_masses(dim: usize, masses: Vec<f64>) -> Result<Self> {
        check_enumerable(dim)?;
        check_dim(1 << dim, masses.len())?;
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidDistribution(
                "masses must be finite and non-negative".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if total == 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self {
            dim,
            mass: masses.into_iter().map(|m| m / total).collect(),
        })
    }

    /// All mass on the vertex with the given coordinates.
    pub fn point_mass(point: &[f64]) -> Result<Self> {
        let dim = point.len();
        check_enumerable(dim)?;
        let mut index = 0;
        for (j, &v) in point.iter().enumerate() {
            match v {
                0.0 => {}
                1.0 => index |= 1 << j,
                _ => {
                    return Err(Error::InvalidDistribution(format!(
                        "coordinate {j} is {v}, not 0 or 1"
                    )))
                }
            }
        }
        let mut mass = vec![0.0; 1 << dim];
        mass[index] = 1.0;
        Ok(Self { dim, mass })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Coordinates of vertex `index`.
    pub fn point(&self, index: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|j| f64::from(((index >> j) & 1) as u8))
            .collect()
    }

    /// Indices of the vertices with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.mass[i] > 0.0).collect()
    }
}

/// Reweights `dist` by the kernel centered at `target` and renormalizes:
/// `ν_σ(z) ∝ π(z) ν(z)`.
///
/// Computed in the log domain. A vertex whose new mass underflows keeps the
/// smallest positive normal mass, so the support is unchanged.
pub fn lemma1_distribution(
    dist: &DiscreteDistribution,
    kernel: &KernelSpec,
    target: &[f64],
) -> Result<DiscreteDistribution> {
    check_dim(dist.dim, target.len())?;
    let support = dist.support();
    let logs: Vec<f64> = support
        .iter()
        .map(|&i| Ok(log_kernel_weight(target, &dist.point(i), kernel)? + dist.mass[i].ln()))
        .collect::<Result<_>>()?;
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::ZeroMass);
    }
    let mut mass = vec![0.0; dist.len()];
    for (&i, l) in support.iter().zip(&logs) {
        mass[i] = (l - top).exp();
    }
    let total: f64 = mass.iter().sum();
    for &i in &support {
        mass[i] = (mass[i] / total).max(f64::MIN_POSITIVE);
    }
    Ok(DiscreteDistribution {
        dim: dist.dim,
        mass,
    })
}

/// The support of `dist` with row weights `mass · weight(z)` and labels
/// `f(η(z))`, as a sample for the regular fitting routines. Vertices with
/// zero mass or zero weight are left out.
pub fn enumerate_sample(
    model: &BlackBox,
    conversion: &ConversionSpec,
    dist: &DiscreteDistribution,
    weight: impl Fn(&[f64]) -> f64,
) -> Result<NeighborhoodSample> {
    let (points, weights, labels) = weighted_support(model, conversion, dist, &weight)?;
    let n = weights.len();
    let flat: Vec<f64> = points.into_iter().flatten().collect();
    let points = Array2::from_shape_vec((n, dist.dim), flat).expect("rows have dist.dim entries");
    NeighborhoodSample::new(points, Array1::from(weights), Array1::from(labels))
}

type Support = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

fn weighted_support(
    model: &BlackBox,
    conversion: &ConversionSpec,
    dist: &DiscreteDistribution,
    weight: &dyn Fn(&[f64]) -> f64,
) -> Result<Support> {
    check_dim(conversion.surrogate_dim()?, dist.dim)?;
    check_dim(model.dim(), conversion.original_dim())?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in dist.support() {
        let z = dist.point(i);
        let w = weight(&z);
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} at vertex {i}"
            )));
        }
        let rw = dist.mass[i] * w;
        if rw > 0.0 {
            points.push(z);
            weights.push(rw);
        }
    }
    if points.is_empty() {
        return Err(Error::ZeroMass);
    }
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let z =
        Array2::from_shape_vec((points.len(), dist.dim), flat).expect("rows have dist.dim entries");
    let labels = predict_batch(model, &conversion.convert_batch(&z)?)?.to_vec();
    Ok((points, weights, labels))
}

/// Householder QR of the `rows × cols` matrix `a` (row-major), applied in
/// place to `b`. Returns the diagonal of `R`; `a` holds `R` in its upper
/// triangle afterwards.
fn householder(a: &mut [f64], b: &mut [f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut diag = vec![0.0; cols];
    for j in 0..cols.min(rows) {
        let norm = (j..rows)
            .map(|i| a[i * cols + j] * a[i * cols + j])
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[j * cols + j] > 0.0 { -norm } else { norm };
        // v = x − αe₁, stored in column j below the diagonal
        a[j * cols + j] -= alpha;
        let vnorm2: f64 = (j..rows).map(|i| a[i * cols + j] * a[i * cols + j]).sum();
        for c in j + 1..cols {
            let dot: f64 = (j..rows).map(|i| a[i * cols + j] * a[i * cols + c]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..rows {
                a[i * cols + c] -= f * a[i * cols + j];
            }
        }
        let dot: f64 = (j..rows).map(|i| a[i * cols + j] * b[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in j..rows {
            b[i] -= f * a[i * cols + j];
        }
        diag[j] = alpha;
    }
    diag
}

/// Rank test on the unscaled 0/1 design `[1 z]`; the entries are small
/// integers, so a fixed relative threshold separates rank from rounding.
fn check_full_rank(points: &[Vec<f64>]) -> Result<()> {
    let rows = points.len();
    let cols = points[0].len() + 1;
    let mut a: Vec<f64> = points
        .iter()
        .flat_map(|z| std::iter::once(1.0).chain(z.iter().copied()))
        .collect();
    let mut b = vec![0.0; rows];
    let diag = householder(&mut a, &mut b, rows, cols);
    let scale = (rows as f64).sqrt();
    for (j, r) in diag.iter().enumerate() {
        if j >= rows || r.abs() <= 1e-9 * scale {
            return Err(Error::SingularSystem {
                column: j.saturating_sub(1),
                pivot: if j < rows { *r } else { 0.0 },
            });
        }
    }
    Ok(())
}

/// Minimizer of `E_dist[weight(z) (f(η(z)) − g(z))²]` over all affine `g`,
/// with no sparsity constraint.
///
/// Fails with `SingularSystem` when the weighted support does not determine
/// an affine function, e.g. a point mass.
pub fn exact_weighted_minimizer(
    model: &BlackBox,
    conversion: &ConversionSpec,
    dist: &DiscreteDistribution,
    weight: impl Fn(&[f64]) -> f64,
) -> Result<LinearSurrogate> {
    let (points, weights, labels) = weighted_support(model, conversion, dist, &weight)?;
    check_full_rank(&points)?;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| weights[j].total_cmp(&weights[i]));
    let rows = points.len();
    let cols = dist.dim + 1;
    let mut a = Vec::with_capacity(rows * cols);
    let mut b = Vec::with_capacity(rows);
    for &i in &order {
        let s = weights[i].sqrt();
        a.push(s);
        a.extend(points[i].iter().map(|z| s * z));
        b.push(s * labels[i]);
    }
    let diag = householder(&mut a, &mut b, rows, cols);

    // back substitution on R β = Qᵀb
    let mut beta = vec![0.0; cols];
    for j in (0..cols).rev() {
        if diag[j] == 0.0 || !diag[j].is_finite() {
            return Err(Error::SingularSystem {
                column: j.saturating_sub(1),
                pivot: diag[j],
            });
        }
        let tail: f64 = (j + 1..cols).map(|c| a[j * cols + c] * beta[c]).sum();
        beta[j] = (b[j] - tail) / diag[j];
    }
    let selected = (0..dist.dim).collect();
    LinearSurrogate::from_parts(beta[0], beta[1..].to_vec(), selected)
}

/// ℓ∞ distance between the kernel-weighted minimizer under `dist` and the
/// unweighted minimizer under the reweighted distribution
/// [`lemma1_distribution`]. The two losses are proportional, so the
/// distance is zero up to rounding.
pub fn verify_lemma1(
    model: &BlackBox,
    conversion: &ConversionSpec,
    dist: &DiscreteDistribution,
    kernel: &KernelSpec,
) -> Result<f64> {
    let target = conversion.target_surrogate()?;
    let weighted = exact_weighted_minimizer(model, conversion, dist, |z| {
        kernel_weight(&target, z, kernel).expect("dimensions checked by the minimizer")
    })?;
    let reweighted = lemma1_distribution(dist, kernel, &target)?;
    let plain = exact_weighted_minimizer(model, conversion, &reweighted, |_| 1.0)?;
    Ok(linf(&weighted, &plain))
}

/// Largest absolute difference over the intercept and the coefficients.
pub fn linf(a: &LinearSurrogate, b: &LinearSurrogate) -> f64 {
    let head = (a.intercept() - b.intercept()).abs();
    a.coefficients()
        .iter()
        .zip(b.coefficients())
        .map(|(x, y)| (x - y).abs())
        .fold(head, f64::max)
}
