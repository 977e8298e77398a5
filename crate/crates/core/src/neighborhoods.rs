//! Neighborhood generation in the surrogate space.
//!
//! Two families of neighborhoods are provided:
//!
//! * the binary neighborhood of LIME, where neighbors of the target
//!   `x̂ = 1^d` are obtained by switching surrogate features off, and where
//!   locality comes afterwards from the kernel weights
//!   `exp(−‖x̂ − z‖² / σ²)`;
//! * the continuous neighborhoods of s-LIME, drawn directly from a
//!   distribution of width σ: uniform on `[1 − σ, 1]^d` for segmented
//!   data, centered Gaussian offsets `N(0, σ² I)` for tabular data.
//!
//! A [`ConversionSpec`] maps surrogate points back to the black box's input
//! space.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng;

/// Distance between surrogate vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Distance {
    #[default]
    Euclidean,
}

/// Exponential kernel `exp(−D(x̂, z)² / σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub sigma: f64,
    pub distance: Distance,
}

impl KernelSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self {
                sigma,
                distance: Distance::Euclidean,
            })
        } else {
            Err(Error::InvalidSigma(sigma))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    BinaryToggle,
    UniformCube,
    GaussianOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub sigma: f64,
    pub n: usize,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind, sigma: f64, n: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            kind,
            sigma,
            n,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig(
                "neighborhood size n must be at least 1".into(),
            ));
        }
        let ok = match self.kind {
            SamplerKind::UniformCube => self.sigma > 0.0 && self.sigma <= 1.0,
            _ => self.sigma > 0.0 && self.sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSigma(self.sigma))
        }
    }

    fn expect(&self, kind: SamplerKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidConfig(format!(
                "sampler kind {:?} used as {kind:?}",
                self.kind
            )));
        }
        self.validate()
    }
}

/// Binary neighborhood around `1^d`. Row 0 is the target itself; every
/// other row switches off `m` distinct features, with `m` uniform on
/// `{1, …, d}` and the subset uniform among those of size `m`.
pub fn sample_binary_neighborhood(dim: usize, spec: &SamplerSpec) -> Result<Array2<f64>> {
    spec.expect(SamplerKind::BinaryToggle)?;
    let mut rng = rng::seeded(spec.seed);
    let mut out = Array2::ones((spec.n, dim));
    if dim == 0 {
        return Ok(out);
    }
    for mut row in out.rows_mut().into_iter().skip(1) {
        let m = rng.random_range(1..=dim);
        for j in index::sample(&mut rng, dim, m) {
            row[j] = 0.0;
        }
    }
    Ok(out)
}

/// i.i.d. rows uniform on `[1 − σ, 1]^d`.
pub fn sample_uniform_cube(dim: usize, spec: &SamplerSpec) -> Result<Array2<f64>> {
    spec.expect(SamplerKind::UniformCube)?;
    let mut rng = rng::seeded(spec.seed);
    let sigma = spec.sigma;
    Ok(Array2::from_shape_simple_fn((spec.n, dim), || {
        let u: f64 = rng.random();
        1.0 - sigma * u
    }))
}

/// i.i.d. rows from `N(0, σ² I)`.
pub fn sample_gaussian_offsets(dim: usize, spec: &SamplerSpec) -> Result<Array2<f64>> {
    spec.expect(SamplerKind::GaussianOffset)?;
    let mut rng = rng::seeded(spec.seed);
    let sigma = spec.sigma;
    Ok(Array2::from_shape_simple_fn((spec.n, dim), || {
        let g: f64 = StandardNormal.sample(&mut rng);
        sigma * g
    }))
}

/// Draws with whichever sampler `spec.kind` names.
pub fn sample(dim: usize, spec: &SamplerSpec) -> Result<Array2<f64>> {
    match spec.kind {
        SamplerKind::BinaryToggle => sample_binary_neighborhood(dim, spec),
        SamplerKind::UniformCube => sample_uniform_cube(dim, spec),
        SamplerKind::GaussianOffset => sample_gaussian_offsets(dim, spec),
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `−D(target, point)² / σ²`, the exact logarithm of the kernel weight.
pub fn log_kernel_weight(target: &[f64], point: &[f64], kernel: &KernelSpec) -> Result<f64> {
    check_dim(target.len(), point.len())?;
    Ok(-squared_distance(target, point) / (kernel.sigma * kernel.sigma))
}

/// `exp(−D(target, point)² / σ²)`.
///
/// Weights that would underflow are returned as `f64::MIN_POSITIVE` so that
/// every neighbor keeps a strictly positive weight; use
/// [`log_kernel_weight`] when the exact magnitude matters.
pub fn kernel_weight(target: &[f64], point: &[f64], kernel: &KernelSpec) -> Result<f64> {
    log_kernel_weight(target, point, kernel).map(|l| l.exp().max(f64::MIN_POSITIVE))
}

/// `(Σw)² / Σw²`: how many equally weighted points the weights are worth.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::EmptyWeights);
    }
    // scale by the largest weight to keep tiny weights representable
    let top = weights.iter().copied().fold(0.0, f64::max);
    let (s, s2) = weights.iter().fold((0.0, 0.0), |(s, s2), w| {
        let v = w / top;
        (s + v, s2 + v * v)
    });
    Ok(s * s / s2)
}

/// Histogram of weights on a log10 scale, between the smallest weight and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHistogram {
    /// `bins + 1` ascending edges in log10 units.
    pub edges_log10: Vec<f64>,
    /// Number of points per bin.
    pub counts: Vec<usize>,
    /// Share of the total weight carried by each bin.
    pub mass: Vec<f64>,
}

/// Bins natural-log weights into `bins` equal log10-width bins.
pub fn weight_histogram(log_weights: &[f64], bins: usize) -> Result<WeightHistogram> {
    if log_weights.is_empty() || bins == 0 {
        return Err(Error::EmptyWeights);
    }
    let to10 = std::f64::consts::LOG10_E;
    let lo = log_weights.iter().copied().fold(f64::INFINITY, f64::min) * to10;
    let hi = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        * to10;
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    let width = (hi - lo) / bins as f64;
    let edges_log10: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    let mut mass = vec![0.0; bins];
    let top = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for &lw in log_weights {
        let b = (((lw * to10 - lo) / width) as usize).min(bins - 1);
        let w = (lw - top).exp();
        counts[b] += 1;
        mass[b] += w;
        total += w;
    }
    mass.iter_mut().for_each(|m| *m /= total);
    Ok(WeightHistogram {
        edges_log10,
        counts,
        mass,
    })
}

/// Assignment of original features to surrogate segments (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    segment_of: Vec<usize>,
    segments: usize,
}

impl Segmentation {
    /// `segment_of[i]` is the segment of original feature `i`. Segments must
    /// be numbered `0..s` with none left empty.
    pub fn new(segment_of: Vec<usize>) -> Result<Self> {
        let segments = segment_of.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; segments];
        for &s in &segment_of {
            used[s] = true;
        }
        if let Some(empty) = used.iter().position(|u| !u) {
            return Err(Error::InvalidSegmentation(format!(
                "segment {empty} covers no feature"
            )));
        }
        Ok(Self {
            segment_of,
            segments,
        })
    }

    /// One segment per feature.
    pub fn identity(dim: usize) -> Self {
        Self {
            segment_of: (0..dim).collect(),
            segments: dim,
        }
    }

    /// `segments` runs of consecutive features of near-equal length.
    pub fn contiguous(dim: usize, segments: usize) -> Result<Self> {
        if segments == 0 || segments > dim {
            return Err(Error::InvalidSegmentation(format!(
                "cannot split {dim} features into {segments} segments"
            )));
        }
        Self::new((0..dim).map(|i| i * segments / dim).collect())
    }

    pub fn original_dim(&self) -> usize {
        self.segment_of.len()
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn segment_of(&self, feature: usize) -> usize {
        self.segment_of[feature]
    }

    pub fn is_identity(&self) -> bool {
        self.segment_of.iter().enumerate().all(|(i, s)| i == *s)
    }

    /// Reads `original_index,segment_index` rows after a header line.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut map = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidSegmentation(e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::InvalidSegmentation(format!(
                    "row {} has {} fields",
                    line + 1,
                    rec.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| {
                    Error::InvalidSegmentation(format!("row {}: bad index {s:?}", line + 1))
                })
            };
            let (orig, seg) = (parse(&rec[0])?, parse(&rec[1])?);
            if map.insert(orig, seg).is_some() {
                return Err(Error::InvalidSegmentation(format!(
                    "feature {orig} listed twice"
                )));
            }
        }
        if map.keys().copied().ne(0..map.len()) {
            return Err(Error::InvalidSegmentation(
                "original indices must cover 0..d exactly once".into(),
            ));
        }
        Self::new(map.into_values().collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["original_index", "segment_index"])
            .map_err(io)?;
        for (i, s) in self.segment_of.iter().enumerate() {
            w.write_record([i.to_string(), s.to_string()]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConversionKind {
    /// `η(z) = x + z`, one surrogate feature per original feature.
    Tabular,
    /// Per-segment interpolation between a baseline and the target.
    Segmented,
}

impl fmt::Display for ConversionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConversionKind::Tabular => "tabular",
            ConversionKind::Segmented => "segmented",
        })
    }
}

impl FromStr for ConversionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tabular" => Ok(ConversionKind::Tabular),
            "segmented" => Ok(ConversionKind::Segmented),
            _ => Err(Error::InvalidConfig(format!("unknown conversion {s:?}"))),
        }
    }
}

/// Conversion `η_x` from the surrogate space to the original space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionSpec {
    pub kind: ConversionKind,
    pub target: Vec<f64>,
    /// Replacement values `x₀`; zero when absent.
    pub baseline: Option<Vec<f64>>,
    pub segmentation: Option<Segmentation>,
}

impl ConversionSpec {
    pub fn tabular(target: Vec<f64>) -> Self {
        Self {
            kind: ConversionKind::Tabular,
            target,
            baseline: None,
            segmentation: None,
        }
    }

    pub fn segmented(
        target: Vec<f64>,
        baseline: Option<Vec<f64>>,
        segmentation: Segmentation,
    ) -> Result<Self> {
        let spec = Self {
            kind: ConversionKind::Segmented,
            target,
            baseline,
            segmentation: Some(segmentation),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Segmented conversion with one segment per feature and a zero baseline.
    pub fn identity_segmented(target: Vec<f64>) -> Self {
        let seg = Segmentation::identity(target.len());
        Self {
            kind: ConversionKind::Segmented,
            target,
            baseline: None,
            segmentation: Some(seg),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = &self.baseline {
            check_dim(self.target.len(), b.len())?;
        }
        if self.kind == ConversionKind::Segmented {
            let seg = self
                .segmentation
                .as_ref()
                .ok_or(Error::MissingSegmentation)?;
            check_dim(self.target.len(), seg.original_dim())?;
        }
        Ok(())
    }

    pub fn original_dim(&self) -> usize {
        self.target.len()
    }

    /// Dimension of the surrogate space.
    pub fn surrogate_dim(&self) -> Result<usize> {
        match self.kind {
            ConversionKind::Tabular => Ok(self.target.len()),
            ConversionKind::Segmented => Ok(self
                .segmentation
                .as_ref()
                .ok_or(Error::MissingSegmentation)?
                .segments()),
        }
    }

    /// The surrogate representation `x̂` of the target: `0` for tabular
    /// offsets, `1^d` for segmented data.
    pub fn target_surrogate(&self) -> Result<Vec<f64>> {
        let d = self.surrogate_dim()?;
        Ok(match self.kind {
            ConversionKind::Tabular => vec![0.0; d],
            ConversionKind::Segmented => vec![1.0; d],
        })
    }

    fn baseline_at(&self, i: usize) -> f64 {
        self.baseline.as_ref().map_or(0.0, |b| b[i])
    }

    pub fn convert(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.target.len()];
        self.convert_into(point, &mut out)?;
        Ok(out)
    }

    pub(crate) fn convert_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.surrogate_dim()?, point.len())?;
        match self.kind {
            ConversionKind::Tabular => {
                for ((o, x), z) in out.iter_mut().zip(&self.target).zip(point) {
                    *o = x + z;
                }
            }
            ConversionKind::Segmented => {
                let seg = self
                    .segmentation
                    .as_ref()
                    .ok_or(Error::MissingSegmentation)?;
                for (i, (o, x)) in out.iter_mut().zip(&self.target).enumerate() {
                    let z = point[seg.segment_of(i)];
                    *o = (1.0 - z) * self.baseline_at(i) + z * x;
                }
            }
        }
        Ok(())
    }

    /// Converts every row of `points`.
    pub fn convert_batch(&self, points: &Array2<f64>) -> Result<Array2<f64>> {
        self.validate()?;
        let mut out = Array2::zeros((points.nrows(), self.target.len()));
        let mut buf = vec![0.0; self.target.len()];
        for (src, mut dst) in points.rows().into_iter().zip(out.rows_mut()) {
            let z = src.to_vec();
            self.convert_into(&z, &mut buf)?;
            dst.assign(&ndarray::ArrayView1::from(&buf[..]));
        }
        Ok(out)
    }
}

/// `η_x(point)`.
pub fn convert(conversion: &ConversionSpec, point: &[f64]) -> Result<Vec<f64>> {
    conversion.convert(point)
}
