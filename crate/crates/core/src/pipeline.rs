//! The two explainers end to end, and bandwidth sweeps.
//!
//! [`explain_lime`] draws a binary neighborhood of `x̂ = 1^d̂`, labels it
//! through the conversion and the black box, and fits a k-sparse surrogate
//! under the kernel weights. [`explain_slime`] draws its neighborhood from
//! a distribution of width σ instead and fits with unit weights.
//!
//! When the weighted design is numerically singular (LIME with a narrow
//! kernel puts almost all the mass on the target row) the fit is retried
//! with a ridge of [`FALLBACK_RIDGE`]. The resulting explanation is usually
//! degenerate, which is reported rather than raised.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::blackbox::{predict_batch, BlackBox};
use crate::error::{check_dim, Error, Result};
use crate::metrics::{coverage, r2_score, recall_precision, FidelityReport};
use crate::neighborhoods::{
    log_kernel_weight, sample, ConversionKind, ConversionSpec, KernelSpec, SamplerKind,
    SamplerSpec, Segmentation,
};
use crate::rng::derive_seed;
use crate::surrogate::{
    anchored_mean, fit_k_sparse, LinearSurrogate, NeighborhoodSample, DEGENERACY_TOL,
};

/// Default number of features in an explanation.
pub const DEFAULT_K: usize = 6;
/// Default bandwidth.
pub const DEFAULT_SIGMA: f64 = 0.75;
/// Default neighborhood size.
pub const DEFAULT_N: usize = 5000;
/// Ridge used when the unregularized fit is singular.
pub const FALLBACK_RIDGE: f64 = 1e-8;
/// Effective sample sizes below this raise a [`Diagnostic::DegenerateWarning`].
pub const WARN_ESS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lime,
    Slime,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lime => "lime",
            Method::Slime => "slime",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lime" => Ok(Method::Lime),
            "slime" | "s-lime" => Ok(Method::Slime),
            _ => Err(Error::InvalidConfig(format!("unknown method {s:?}"))),
        }
    }
}

/// Everything an explainer needs apart from the model and the target.
///
/// The conversion is described without its target so that one config can
/// serve many instances; a missing segmentation means one segment per
/// feature and a missing baseline means zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub method: Method,
    pub sigma: f64,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub conversion: ConversionKind,
    pub segmentation: Option<Segmentation>,
    pub baseline: Option<Vec<f64>>,
}

impl ExplainConfig {
    pub fn new(method: Method, conversion: ConversionKind) -> Self {
        Self {
            method,
            sigma: DEFAULT_SIGMA,
            n: DEFAULT_N,
            k: DEFAULT_K,
            seed: 0,
            conversion,
            segmentation: None,
            baseline: None,
        }
    }

    /// LIME over one binary feature per original feature.
    pub fn lime() -> Self {
        Self::new(Method::Lime, ConversionKind::Segmented)
    }

    pub fn slime_tabular() -> Self {
        Self::new(Method::Slime, ConversionKind::Tabular)
    }

    pub fn slime_segmented() -> Self {
        Self::new(Method::Slime, ConversionKind::Segmented)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_segmentation(mut self, segmentation: Segmentation) -> Self {
        self.segmentation = Some(segmentation);
        self
    }

    pub fn with_baseline(mut self, baseline: Vec<f64>) -> Self {
        self.baseline = Some(baseline);
        self
    }

    /// The conversion `η_x` for a concrete target.
    pub fn conversion_for(&self, target: &[f64]) -> Result<ConversionSpec> {
        match self.conversion {
            ConversionKind::Tabular => {
                if self.segmentation.is_some() || self.baseline.is_some() {
                    return Err(Error::InvalidConfig(
                        "tabular conversion takes no segmentation or baseline".into(),
                    ));
                }
                Ok(ConversionSpec::tabular(target.to_vec()))
            }
            ConversionKind::Segmented => {
                let seg = self
                    .segmentation
                    .clone()
                    .unwrap_or_else(|| Segmentation::identity(target.len()));
                ConversionSpec::segmented(target.to_vec(), self.baseline.clone(), seg)
            }
        }
    }

    /// BinaryToggle for LIME, UniformCube or GaussianOffset for s-LIME.
    pub fn sampler(&self) -> Result<SamplerSpec> {
        let kind = match (self.method, self.conversion) {
            (Method::Lime, ConversionKind::Segmented) => SamplerKind::BinaryToggle,
            (Method::Lime, ConversionKind::Tabular) => {
                return Err(Error::InvalidConfig(
                    "LIME needs a segmented conversion".into(),
                ))
            }
            (Method::Slime, ConversionKind::Segmented) => SamplerKind::UniformCube,
            (Method::Slime, ConversionKind::Tabular) => SamplerKind::GaussianOffset,
        };
        SamplerSpec::new(kind, self.sigma, self.n, self.seed)
    }

    /// Kernel of LIME; s-LIME has none.
    pub fn kernel(&self) -> Result<Option<KernelSpec>> {
        match self.method {
            Method::Lime => KernelSpec::new(self.sigma).map(Some),
            Method::Slime => Ok(None),
        }
    }

    fn check(&self, surrogate_dim: usize) -> Result<()> {
        if self.k == 0 || self.k > surrogate_dim {
            return Err(Error::InvalidK {
                k: self.k,
                dim: surrogate_dim,
            });
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Non-fatal observations made while explaining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Almost all the weight sits on very few rows.
    DegenerateWarning { ess: f64 },
    /// The unregularized fit was singular and was redone with a ridge.
    RidgeFallback { ridge: f64 },
    /// Even the ridge fit failed; the surrogate is the weighted mean label.
    ConstantFallback,
    /// Constant labels missed by the surrogate; R² is undefined.
    ZeroVariance,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DegenerateWarning { ess } => {
                write!(
                    f,
                    "effective sample size {ess:.4}: weights concentrate on the target"
                )
            }
            Diagnostic::RidgeFallback { ridge } => {
                write!(f, "singular weighted design, refit with ridge {ridge:e}")
            }
            Diagnostic::ConstantFallback => {
                f.write_str("no feature could be fitted, surrogate is constant")
            }
            Diagnostic::ZeroVariance => f.write_str("labels have zero variance, R² undefined"),
        }
    }
}

/// A fitted explanation with its metrics and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub method: Method,
    pub sigma: f64,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub surrogate: LinearSurrogate,
    pub report: FidelityReport,
    /// All coefficients below `DEGENERACY_TOL` in magnitude.
    pub degenerate: bool,
    /// Effective sample size of the fitting weights.
    pub ess: f64,
    pub diagnostics: Vec<Diagnostic>,
}

/// Flat serialization of an [`Explanation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub method: Method,
    pub sigma: f64,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub selected: Vec<usize>,
    pub r2: Option<f64>,
    pub degenerate: bool,
    pub ess: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

impl Explanation {
    pub fn record(&self) -> ExplanationRecord {
        ExplanationRecord {
            method: self.method,
            sigma: self.sigma,
            n: self.n,
            k: self.k,
            seed: self.seed,
            intercept: self.surrogate.intercept(),
            coefficients: self.surrogate.coefficients().to_vec(),
            selected: self.surrogate.selected().to_vec(),
            r2: self.report.r2,
            degenerate: self.degenerate,
            ess: self.ess,
            recall: self.report.recall,
            precision: self.report.precision,
            coverage: self.report.coverage,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        self.surrogate.coefficients()
    }
}

/// A labelled neighborhood before fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    /// Surrogate-space points, one per row.
    pub points: Array2<f64>,
    /// Natural-log weights; all zero for s-LIME.
    pub log_weights: Vec<f64>,
    /// Black-box outputs on the converted points.
    pub labels: Array1<f64>,
    pub conversion: ConversionSpec,
}

impl Neighborhood {
    /// Kernel weights, underflow clamped to the smallest positive normal.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights
            .iter()
            .map(|l| l.exp().max(f64::MIN_POSITIVE))
            .collect()
    }

    pub fn ess(&self) -> f64 {
        // relative to the heaviest row, so nothing that matters underflows
        let top = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let (s, s2) = self.log_weights.iter().fold((0.0, 0.0), |(s, s2), l| {
            let w = (l - top).exp();
            (s + w, s2 + w * w)
        });
        s * s / s2
    }
}

/// Samples, converts and labels the neighborhood that `config` describes.
pub fn build_neighborhood(
    model: &BlackBox,
    target: &[f64],
    config: &ExplainConfig,
) -> Result<Neighborhood> {
    check_dim(model.dim(), target.len())?;
    let conversion = config.conversion_for(target)?;
    let dim = conversion.surrogate_dim()?;
    config.check(dim)?;
    let sampler = config.sampler()?;
    let points = sample(dim, &sampler)?;
    let labels = predict_batch(model, &conversion.convert_batch(&points)?)?;
    let log_weights = match config.kernel()? {
        Some(kernel) => {
            let x_hat = conversion.target_surrogate()?;
            points
                .rows()
                .into_iter()
                .map(|row| log_kernel_weight(&x_hat, &row.to_vec(), &kernel))
                .collect::<Result<_>>()?
        }
        None => vec![0.0; points.nrows()],
    };
    Ok(Neighborhood {
        points,
        log_weights,
        labels,
        conversion,
    })
}

/// Fits the k-sparse surrogate of a labelled neighborhood and scores it.
pub fn fit_neighborhood(
    model: &BlackBox,
    hood: &Neighborhood,
    config: &ExplainConfig,
) -> Result<Explanation> {
    let weights = Array1::from(hood.weights());
    let ess = match config.method {
        Method::Lime => hood.ess(),
        Method::Slime => hood.points.nrows() as f64,
    };
    let sample = NeighborhoodSample::new(hood.points.clone(), weights, hood.labels.clone())?;
    let mut diagnostics = Vec::new();
    if ess < WARN_ESS {
        diagnostics.push(Diagnostic::DegenerateWarning { ess });
    }

    let surrogate = match fit_k_sparse(&sample, config.k, 0.0) {
        Ok(s) => s,
        Err(Error::SingularSystem { .. }) => {
            diagnostics.push(Diagnostic::RidgeFallback {
                ridge: FALLBACK_RIDGE,
            });
            match fit_k_sparse(&sample, config.k, FALLBACK_RIDGE) {
                Ok(s) => s,
                Err(Error::SingularSystem { .. }) => {
                    diagnostics.push(Diagnostic::ConstantFallback);
                    let w = sample.weights();
                    let mean = anchored_mean(sample.labels().view(), w.view(), w.sum());
                    LinearSurrogate::constant(mean, sample.dim())
                }
                Err(e) => return Err(e),
            }
        }
        Err(e) => return Err(e),
    };

    let r2 = match r2_score(&surrogate, &sample) {
        Ok(v) => Some(v),
        Err(Error::ZeroVariance) => {
            diagnostics.push(Diagnostic::ZeroVariance);
            None
        }
        Err(e) => return Err(e),
    };
    let mut report = FidelityReport {
        r2,
        ..Default::default()
    };
    score_against_gold(model, &hood.conversion, &surrogate, &mut report)?;

    Ok(Explanation {
        method: config.method,
        sigma: config.sigma,
        n: config.n,
        k: config.k,
        seed: config.seed,
        degenerate: surrogate.is_degenerate(DEGENERACY_TOL),
        surrogate,
        report,
        ess,
        diagnostics,
    })
}

/// Recall and precision when surrogate features are original features,
/// coverage when they are segments.
fn score_against_gold(
    model: &BlackBox,
    conversion: &ConversionSpec,
    surrogate: &LinearSurrogate,
    report: &mut FidelityReport,
) -> Result<()> {
    let Some(gold) = model.gold_features().filter(|g| !g.is_empty()) else {
        return Ok(());
    };
    let explained = surrogate.explained_features();
    let feature_aligned = match conversion.kind {
        ConversionKind::Tabular => true,
        ConversionKind::Segmented => conversion
            .segmentation
            .as_ref()
            .is_some_and(Segmentation::is_identity),
    };
    if feature_aligned {
        match recall_precision(gold, &explained) {
            Ok((r, p)) => {
                report.recall = Some(r);
                report.precision = Some(p);
            }
            // nothing explained: nothing recalled, precision undefined
            Err(Error::EmptyExplained) => report.recall = Some(0.0),
            Err(e) => return Err(e),
        }
    }
    if let Some(seg) = &conversion.segmentation {
        let gold_segments: Vec<usize> = gold.iter().map(|&i| seg.segment_of(i)).collect();
        report.coverage = Some(coverage(&gold_segments, &explained)?);
    }
    Ok(())
}

fn expect_method(config: &ExplainConfig, method: Method) -> Result<()> {
    if config.method == method {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "config is for {}, not {method}",
            config.method
        )))
    }
}

/// Kernel-weighted k-sparse fit over a binary neighborhood.
pub fn explain_lime(
    model: &BlackBox,
    target: &[f64],
    config: &ExplainConfig,
) -> Result<Explanation> {
    expect_method(config, Method::Lime)?;
    let hood = build_neighborhood(model, target, config)?;
    fit_neighborhood(model, &hood, config)
}

/// Unit-weight k-sparse fit over a neighborhood drawn from the width-σ
/// distribution. With a tabular conversion the fit is on the offsets, so the
/// coefficients estimate the gradient of the black box at the target.
pub fn explain_slime(
    model: &BlackBox,
    target: &[f64],
    config: &ExplainConfig,
) -> Result<Explanation> {
    expect_method(config, Method::Slime)?;
    let hood = build_neighborhood(model, target, config)?;
    fit_neighborhood(model, &hood, config)
}

/// Runs whichever explainer `config.method` names.
pub fn explain(model: &BlackBox, target: &[f64], config: &ExplainConfig) -> Result<Explanation> {
    match config.method {
        Method::Lime => explain_lime(model, target, config),
        Method::Slime => explain_slime(model, target, config),
    }
}

/// One row of a bandwidth sweep. Failures are kept in the row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub result: Result<Explanation>,
}

/// Explains `target` once per σ. Row `i` uses the seed
/// `derive_seed(base.seed, i)`.
pub fn sweep_sigma(
    model: &BlackBox,
    target: &[f64],
    base: &ExplainConfig,
    sigmas: &[f64],
) -> Result<Vec<SweepRow>> {
    if sigmas.is_empty() {
        return Err(Error::InvalidConfig("empty σ grid".into()));
    }
    if sigmas
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
    {
        return Err(Error::InvalidConfig(
            "σ grid must be strictly ascending".into(),
        ));
    }
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = sigmas
            .iter()
            .enumerate()
            .map(|(i, &sigma)| {
                let config = base
                    .clone()
                    .with_sigma(sigma)
                    .with_seed(derive_seed(base.seed, i as u64));
                scope.spawn(move || SweepRow {
                    sigma,
                    result: explain(model, target, &config),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    Ok(rows)
}

/// `count` log-spaced values from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
        return Err(Error::InvalidConfig(format!(
            "bad σ grid {lo}:{hi}:{count}"
        )));
    }
    let (a, b) = (lo.log10(), hi.log10());
    let step = (b - a) / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count)
        .map(|i| 10f64.powf(a + step * i as f64))
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    Ok(grid)
}

/// Writes the sweep as CSV. Failed rows keep their σ and leave every other
/// cell empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "sigma",
        "r2",
        "degenerate",
        "ess",
        "recall",
        "precision",
        "coverage",
    ])
    .map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let record = match &row.result {
            Ok(e) => [
                row.sigma.to_string(),
                opt(e.report.r2),
                e.degenerate.to_string(),
                e.ess.to_string(),
                opt(e.report.recall),
                opt(e.report.precision),
                opt(e.report.coverage),
            ],
            Err(_) => [
                row.sigma.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        w.write_record(&record).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// The successful row with the largest R², the smaller σ on ties.
pub fn select_best_sigma(rows: &[SweepRow]) -> Result<(f64, &Explanation)> {
    let mut best: Option<(f64, &Explanation, f64)> = None;
    for row in rows {
        let Ok(e) = &row.result else { continue };
        let Some(r2) = e.report.r2 else { continue };
        let better = match best {
            None => true,
            Some((sigma, _, top)) => r2 > top || (r2 == top && row.sigma < sigma),
        };
        if better {
            best = Some((row.sigma, e, r2));
        }
    }
    best.map(|(s, e, _)| (s, e)).ok_or(Error::AllRowsFailed)
}
