//! Black-box classifiers and the finite-difference gradient oracle.
//!
//! A [`BlackBox`] maps an instance of the original space to a class-1
//! probability. The built-in models can be trained from a [`Dataset`],
//! saved as JSON documents and reloaded; arbitrary closures can be wrapped
//! with [`BlackBox::from_fn`] for tests and experiments.

mod dataset;
pub mod forest;
pub mod logistic;
pub mod mlp;

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use dataset::Dataset;
pub use forest::StumpForest;
pub use logistic::{LogisticModel, LogisticParams};
pub use mlp::{Mlp, MlpParams};

use crate::error::{check_dim, Error, Result};
use crate::neighborhoods::ConversionSpec;

/// Default central-difference step on the surrogate scale.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Smooth,
    PiecewiseConstant,
}

/// Outcome of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub loss: f64,
    pub converged: bool,
}

impl TrainReport {
    /// `NonConvergence` when the budget ran out first.
    pub fn check(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                loss: self.loss,
            })
        }
    }
}

/// A trained model together with its training report.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: BlackBox,
    pub report: TrainReport,
}

type ScoreFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Predictor {
    Logistic(LogisticModel),
    Forest(StumpForest),
    Mlp(Mlp),
    Function { dim: usize, f: Arc<ScoreFn> },
}

impl fmt::Debug for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Logistic(m) => f.debug_tuple("Logistic").field(m).finish(),
            Predictor::Forest(m) => write!(f, "Forest({} trees)", m.trees.len()),
            Predictor::Mlp(m) => write!(f, "Mlp({}x{})", m.input_dim, m.hidden),
            Predictor::Function { dim, .. } => write!(f, "Function(dim {dim})"),
        }
    }
}

/// Opaque classifier `f: ℝ^d → [0, 1]`.
#[derive(Debug, Clone)]
pub struct BlackBox {
    predictor: Predictor,
    gold_features: Option<Vec<usize>>,
    smoothness: Smoothness,
}

impl BlackBox {
    /// Gold standard: the non-zero weights.
    pub fn logistic(model: LogisticModel) -> Self {
        let gold = Some(model.support());
        Self {
            predictor: Predictor::Logistic(model),
            gold_features: gold,
            smoothness: Smoothness::Smooth,
        }
    }

    /// Gold standard: every feature used by a split.
    pub fn forest(model: StumpForest) -> Self {
        let gold = Some(model.split_features());
        Self {
            predictor: Predictor::Forest(model),
            gold_features: gold,
            smoothness: Smoothness::PiecewiseConstant,
        }
    }

    pub fn mlp(model: Mlp) -> Self {
        Self {
            predictor: Predictor::Mlp(model),
            gold_features: None,
            smoothness: Smoothness::Smooth,
        }
    }

    /// Wraps a closure. Its output is clamped to `[0, 1]`.
    pub fn from_fn(
        dim: usize,
        smoothness: Smoothness,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            predictor: Predictor::Function {
                dim,
                f: Arc::new(f),
            },
            gold_features: None,
            smoothness,
        }
    }

    pub fn with_gold_features(mut self, mut gold: Vec<usize>) -> Self {
        gold.sort_unstable();
        gold.dedup();
        self.gold_features = Some(gold);
        self
    }

    pub fn dim(&self) -> usize {
        match &self.predictor {
            Predictor::Logistic(m) => m.dim(),
            Predictor::Forest(m) => m.dim,
            Predictor::Mlp(m) => m.input_dim,
            Predictor::Function { dim, .. } => *dim,
        }
    }

    pub fn gold_features(&self) -> Option<&[usize]> {
        self.gold_features.as_deref()
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Short architecture tag.
    pub fn architecture(&self) -> &'static str {
        match &self.predictor {
            Predictor::Logistic(_) => "logistic",
            Predictor::Forest(_) => "stump_forest",
            Predictor::Mlp(_) => "mlp",
            Predictor::Function { .. } => "function",
        }
    }

    pub fn as_forest(&self) -> Option<&StumpForest> {
        match &self.predictor {
            Predictor::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_logistic(&self) -> Option<&LogisticModel> {
        match &self.predictor {
            Predictor::Logistic(m) => Some(m),
            _ => None,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.score(x))
    }

    fn score(&self, x: &[f64]) -> f64 {
        match &self.predictor {
            Predictor::Logistic(m) => m.predict(x),
            Predictor::Forest(m) => m.predict(x),
            Predictor::Mlp(m) => m.predict(x),
            Predictor::Function { f, .. } => f(x).clamp(0.0, 1.0),
        }
    }

    /// JSON document: an `architecture` tag and flat parameter arrays.
    pub fn to_json(&self) -> Result<String> {
        let doc = match &self.predictor {
            Predictor::Logistic(m) => ModelDocument::Logistic(m.clone()),
            Predictor::Forest(m) => ModelDocument::StumpForest(m.into()),
            Predictor::Mlp(m) => ModelDocument::Mlp(m.clone()),
            Predictor::Function { .. } => {
                return Err(Error::InvalidModel(
                    "closure-backed models cannot be serialized".into(),
                ))
            }
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
        match doc {
            ModelDocument::Logistic(m) => {
                if !m.bias.is_finite() || m.weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidModel("non-finite logistic parameters".into()));
                }
                Ok(Self::logistic(m))
            }
            ModelDocument::StumpForest(flat) => {
                let forest = StumpForest::try_from(flat)?;
                forest.validate()?;
                Ok(Self::forest(forest))
            }
            ModelDocument::Mlp(m) => {
                m.validate()?;
                Ok(Self::mlp(m))
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
enum ModelDocument {
    Logistic(LogisticModel),
    StumpForest(FlatForest),
    Mlp(Mlp),
}

/// Forest with each tree stored as parallel node arrays; `feature = -1`
/// marks a leaf.
#[derive(Debug, Serialize, Deserialize)]
struct FlatForest {
    dim: usize,
    trees: Vec<FlatTree>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FlatTree {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<i64>,
    right: Vec<i64>,
    value: Vec<f64>,
}

impl From<&StumpForest> for FlatForest {
    fn from(forest: &StumpForest) -> Self {
        let trees = forest
            .trees
            .iter()
            .map(|t| {
                let mut flat = FlatTree {
                    feature: vec![],
                    threshold: vec![],
                    left: vec![],
                    right: vec![],
                    value: vec![],
                };
                for node in &t.nodes {
                    match *node {
                        forest::Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            flat.feature.push(feature as i64);
                            flat.threshold.push(threshold);
                            flat.left.push(left as i64);
                            flat.right.push(right as i64);
                            flat.value.push(0.0);
                        }
                        forest::Node::Leaf { value } => {
                            flat.feature.push(-1);
                            flat.threshold.push(0.0);
                            flat.left.push(-1);
                            flat.right.push(-1);
                            flat.value.push(value);
                        }
                    }
                }
                flat
            })
            .collect();
        FlatForest {
            dim: forest.dim,
            trees,
        }
    }
}

impl TryFrom<FlatForest> for StumpForest {
    type Error = Error;

    fn try_from(flat: FlatForest) -> Result<Self> {
        let bad = || Error::InvalidModel("malformed tree arrays".into());
        let mut trees = Vec::with_capacity(flat.trees.len());
        for t in flat.trees {
            let n = t.feature.len();
            if [
                t.threshold.len(),
                t.left.len(),
                t.right.len(),
                t.value.len(),
            ]
            .iter()
            .any(|&l| l != n)
            {
                return Err(bad());
            }
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                let node = if t.feature[i] < 0 {
                    forest::Node::Leaf { value: t.value[i] }
                } else {
                    let idx = |v: i64| usize::try_from(v).map_err(|_| bad());
                    forest::Node::Split {
                        feature: idx(t.feature[i])?,
                        threshold: t.threshold[i],
                        left: idx(t.left[i])?,
                        right: idx(t.right[i])?,
                    }
                };
                nodes.push(node);
            }
            trees.push(forest::Tree { nodes });
        }
        Ok(StumpForest {
            dim: flat.dim,
            trees,
        })
    }
}

/// Applies the model to every row, in order.
pub fn predict_batch(model: &BlackBox, points: &Array2<f64>) -> Result<Array1<f64>> {
    if points.nrows() == 0 {
        return Ok(Array1::zeros(0));
    }
    check_dim(model.dim(), points.ncols())?;
    let mut buf = vec![0.0; points.ncols()];
    Ok(points
        .rows()
        .into_iter()
        .map(|row| {
            for (b, v) in buf.iter_mut().zip(row) {
                *b = *v;
            }
            model.score(&buf)
        })
        .collect())
}

pub fn train_logistic(data: &Dataset, l1: f64) -> Result<Trained> {
    train_logistic_with(
        data,
        &LogisticParams {
            l1,
            ..Default::default()
        },
    )
}

pub fn train_logistic_with(data: &Dataset, params: &LogisticParams) -> Result<Trained> {
    let (model, report) = logistic::train(data, params)?;
    Ok(Trained {
        model: BlackBox::logistic(model),
        report,
    })
}

pub fn train_stump_forest(
    data: &Dataset,
    trees: usize,
    depth: usize,
    seed: u64,
) -> Result<BlackBox> {
    forest::train(data, trees, depth, seed).map(BlackBox::forest)
}

pub fn train_mlp(data: &Dataset, hidden: usize, seed: u64) -> Result<Trained> {
    train_mlp_with(
        data,
        &MlpParams {
            hidden,
            seed,
            ..Default::default()
        },
    )
}

pub fn train_mlp_with(data: &Dataset, params: &MlpParams) -> Result<Trained> {
    let (model, report) = mlp::train(data, params)?;
    Ok(Trained {
        model: BlackBox::mlp(model),
        report,
    })
}

/// Central differences of `f ∘ η_x` at the surrogate point `at`:
/// component `i` is `(f(η(at + h eᵢ)) − f(η(at − h eᵢ))) / 2h`.
///
/// Meaningless for piecewise-constant models, where it returns zero inside
/// a cell and spikes across thresholds.
pub fn surrogate_gradient_fd(
    model: &BlackBox,
    conversion: &ConversionSpec,
    at: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    check_dim(conversion.surrogate_dim()?, at.len())?;
    check_dim(model.dim(), conversion.original_dim())?;
    let mut z = at.to_vec();
    let mut x = vec![0.0; conversion.original_dim()];
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        z[i] = at[i] + h;
        conversion.convert_into(&z, &mut x)?;
        let up = model.score(&x);
        z[i] = at[i] - h;
        conversion.convert_into(&z, &mut x)?;
        let down = model.score(&x);
        z[i] = at[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
