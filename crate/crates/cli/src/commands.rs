use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde_json::{json, Map, Value};
use slime::blackbox::{self, LogisticParams, MlpParams, TrainReport};
use slime::neighborhoods::{weight_histogram, KernelSpec};
use slime::oracle::{self, DiscreteDistribution, MAX_ENUMERATED_DIM};
use slime::pipeline::{self, Explanation, DEFAULT_K, DEFAULT_N};
use slime::{
    BlackBox, ConversionKind, Dataset, Error, ExplainConfig, Method, Result, Segmentation,
};

use crate::settings::Settings;
use crate::{ExplainArgs, LemmaCheckArgs, ParadoxArgs, SweepArgs, TargetArgs, TrainArgs};

const LEMMA_TOL: f64 = 1e-8;
const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Logistic,
    Forest,
    Mlp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
            ModelKind::Mlp => "mlp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ModelKind::Logistic),
            "forest" | "stump_forest" => Ok(ModelKind::Forest),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::InvalidConfig(format!("unknown model kind {s:?}"))),
        }
    }
}

/// Writes through a temporary file in the destination directory, so readers
/// never see a partial file.
fn write_atomic(path: &str, bytes: &[u8]) -> Result<()> {
    let path = Path::new(path);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn write_json(path: &str, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_text(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))
}

fn load_dataset(path: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
    Dataset::read_csv(std::io::BufReader::new(file))
}

/// Reads a model document, ignoring the run metadata `train` adds to it.
fn load_model(path: &str) -> Result<BlackBox> {
    let mut doc: Value = serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::InvalidModel(format!("{path}: {e}")))?;
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("config");
        obj.remove("training");
    }
    BlackBox::from_json(&doc.to_string())
}

fn config_value(resolved: BTreeMap<String, String>) -> Value {
    Value::Object(
        resolved
            .into_iter()
            .map(|(k, v)| (k, Value::String(v)))
            .collect(),
    )
}

fn reject_unused(kind: ModelKind, given: &[(&str, bool)]) -> Result<()> {
    match given.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(Error::InvalidConfig(format!(
            "--{name} does not apply to {kind}"
        ))),
        None => Ok(()),
    }
}

pub fn train(a: TrainArgs) -> Result<u8> {
    let mut s = Settings::load(a.config.as_deref())?;
    let data_path: String = s.require("data", a.data)?;
    let kind: ModelKind = s.require("kind", a.kind)?;
    let out: String = s.require("out", a.out)?;
    let data = load_dataset(&data_path)?;

    let (model, report) = match kind {
        ModelKind::Logistic => {
            reject_unused(
                kind,
                &[
                    ("trees", a.trees.is_some()),
                    ("depth", a.depth.is_some()),
                    ("hidden", a.hidden.is_some()),
                    ("epochs", a.epochs.is_some()),
                    ("learning-rate", a.learning_rate.is_some()),
                    ("seed", a.seed.is_some()),
                ],
            )?;
            let d = LogisticParams::default();
            let params = LogisticParams {
                l1: s.or("l1", a.l1, d.l1)?,
                max_iter: s.or("max-iter", a.max_iter, d.max_iter)?,
                tol: s.or("tol", a.tol, d.tol)?,
            };
            let t = blackbox::train_logistic_with(&data, &params)?;
            (t.model, Some(t.report))
        }
        ModelKind::Forest => {
            reject_unused(
                kind,
                &[
                    ("l1", a.l1.is_some()),
                    ("max-iter", a.max_iter.is_some()),
                    ("tol", a.tol.is_some()),
                    ("hidden", a.hidden.is_some()),
                    ("epochs", a.epochs.is_some()),
                    ("learning-rate", a.learning_rate.is_some()),
                ],
            )?;
            let trees = s.or("trees", a.trees, 10)?;
            let depth = s.or("depth", a.depth, 4)?;
            let seed = s.or("seed", a.seed, 0)?;
            (
                blackbox::train_stump_forest(&data, trees, depth, seed)?,
                None,
            )
        }
        ModelKind::Mlp => {
            reject_unused(
                kind,
                &[
                    ("l1", a.l1.is_some()),
                    ("max-iter", a.max_iter.is_some()),
                    ("trees", a.trees.is_some()),
                    ("depth", a.depth.is_some()),
                ],
            )?;
            let d = MlpParams::default();
            let params = MlpParams {
                hidden: s.or("hidden", a.hidden, d.hidden)?,
                epochs: s.or("epochs", a.epochs, d.epochs)?,
                learning_rate: s.or("learning-rate", a.learning_rate, d.learning_rate)?,
                tol: s.or("tol", a.tol, d.tol)?,
                seed: s.or("seed", a.seed, d.seed)?,
            };
            let t = blackbox::train_mlp_with(&data, &params)?;
            (t.model, Some(t.report))
        }
    };
    let resolved = s.finish()?;

    let accuracy = training_accuracy(&model, &data)?;
    let mut doc: Value = serde_json::from_str(&model.to_json()?).expect("model JSON is valid");
    let obj = doc.as_object_mut().expect("model JSON is an object");
    obj.insert("config".into(), config_value(resolved));
    if let Some(r) = &report {
        obj.insert(
            "training".into(),
            json!({"iterations": r.iterations, "loss": r.loss, "converged": r.converged}),
        );
    }
    write_json(&out, &doc)?;

    match &report {
        Some(TrainReport { iterations, loss, converged }) => eprintln!(
            "{kind}: {iterations} iterations, loss {loss:.6}, converged {converged}, training accuracy {accuracy:.4}"
        ),
        None => eprintln!("{kind}: training accuracy {accuracy:.4}"),
    }
    match report.map(|r| r.check()) {
        Some(Err(e)) => {
            eprintln!("warning: {e}; model written with converged = false");
            Ok(3)
        }
        _ => Ok(0),
    }
}

fn training_accuracy(model: &BlackBox, data: &Dataset) -> Result<f64> {
    let p = blackbox::predict_batch(model, data.features())?;
    let hits = p
        .iter()
        .zip(data.labels())
        .filter(|(p, y)| f64::from(**p > 0.5) == **y)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// A resolved model, target row and explainer settings.
struct Target {
    model: BlackBox,
    x: Vec<f64>,
    config: ExplainConfig,
    out: String,
}

/// Resolves everything but σ. `method` and `conversion` are fixed by the
/// caller when the command allows only one choice.
fn resolve_target(
    s: &mut Settings,
    a: TargetArgs,
    method: Method,
    conversion: Option<ConversionKind>,
) -> Result<Target> {
    let model = load_model(&s.require::<String>("model", a.model)?)?;
    let data = load_dataset(&s.require::<String>("data", a.data)?)?;
    let row = s.or("row", a.row, 0)?;
    let x = data
        .row(row)
        .ok_or_else(|| {
            Error::InvalidConfig(format!("row {row} is outside the {} data rows", data.len()))
        })?
        .to_vec();
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.dim(),
        });
    }

    let default_conversion = match method {
        Method::Lime => ConversionKind::Segmented,
        Method::Slime => ConversionKind::Tabular,
    };
    let conversion = s.or("conversion", conversion, default_conversion)?;
    let mut config = ExplainConfig::new(method, conversion);
    let mut surrogate_dim = x.len();
    if let Some(path) = s.optional::<String>("segments", a.segments)? {
        let file = std::fs::File::open(&path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
        let seg = Segmentation::read_csv(std::io::BufReader::new(file))?;
        surrogate_dim = seg.segments();
        config = config.with_segmentation(seg);
    }
    let config = config
        .with_n(s.or("n", a.n, DEFAULT_N)?)
        .with_k(s.or("k", a.k, DEFAULT_K.min(surrogate_dim))?)
        .with_seed(s.or("seed", a.seed, 0)?);
    let out = s.require("out", a.out)?;
    Ok(Target {
        model,
        x,
        config,
        out,
    })
}

fn explanation_value(e: &Explanation) -> Value {
    let mut v = serde_json::to_value(e.record()).expect("records serialize");
    v.as_object_mut().expect("records are objects").insert(
        "diagnostics".into(),
        serde_json::to_value(&e.diagnostics).expect("serialize"),
    );
    v
}

pub fn explain(a: ExplainArgs) -> Result<u8> {
    let mut s = Settings::load(a.target.config.as_deref())?;
    let method = s.require("method", a.method)?;
    let t = resolve_target(&mut s, a.target, method, a.conversion)?;
    let sigma = s.or("sigma", a.sigma, pipeline::DEFAULT_SIGMA)?;
    let config = t.config.with_sigma(sigma);
    let resolved = s.finish()?;

    let e = pipeline::explain(&t.model, &t.x, &config)?;
    let mut doc = explanation_value(&e);
    doc.as_object_mut()
        .expect("object")
        .insert("config".into(), config_value(resolved));
    write_json(&t.out, &doc)?;
    for d in &e.diagnostics {
        eprintln!("note: {d}");
    }
    println!(
        "{method} σ={sigma}: r2={} degenerate={} ess={:.4} selected={:?}",
        e.report.r2.map_or("n/a".into(), |r| format!("{r:.6}")),
        e.degenerate,
        e.ess,
        e.surrogate.selected()
    );
    Ok(0)
}

/// Parses `lo:hi:points`, optionally suffixed `-log` or `:log`.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("grid {spec:?} is not lo:hi:points"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let (lo, hi, points) = match parts.as_slice() {
        [lo, hi, points] => (lo, hi, points.strip_suffix("-log").unwrap_or(points)),
        [lo, hi, points, "log"] => (lo, hi, *points),
        _ => return Err(bad()),
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let points: usize = points.parse().map_err(|_| bad())?;
    pipeline::log_grid(lo, hi, points)
}

pub fn sweep(a: SweepArgs) -> Result<u8> {
    let mut s = Settings::load(a.target.config.as_deref())?;
    let method = s.require("method", a.method)?;
    let t = resolve_target(&mut s, a.target, method, a.conversion)?;
    let grid = parse_grid(&s.require::<String>("grid", a.grid)?)?;
    let resolved = s.finish()?;

    let rows = pipeline::sweep_sigma(&t.model, &t.x, &t.config, &grid)?;
    // the preamble is itself a valid config file for this run
    let mut bytes = Vec::new();
    for (k, v) in &resolved {
        writeln!(bytes, "# {k} = {v}")?;
    }
    pipeline::write_sweep_csv(&rows, &mut bytes)?;
    write_atomic(&t.out, &bytes)?;

    for row in &rows {
        if let Err(e) = &row.result {
            eprintln!("σ={}: {e}", row.sigma);
        }
    }
    match pipeline::select_best_sigma(&rows) {
        Ok((sigma, e)) => println!(
            "{} rows; best σ={sigma} (r2={:.6}, degenerate={})",
            rows.len(),
            e.report.r2.unwrap_or(f64::NAN),
            e.degenerate
        ),
        Err(e) => eprintln!("{} rows; {e}", rows.len()),
    }
    Ok(0)
}

pub fn lemma_check(a: LemmaCheckArgs) -> Result<u8> {
    let mut s = Settings::load(a.config.as_deref())?;
    let model = load_model(&s.require::<String>("model", a.model)?)?;
    let dim: usize = s.require("dim", a.dim)?;
    let trials: usize = s.require("trials", a.trials)?;
    let seed = s.or("seed", a.seed, 0)?;
    s.finish()?;
    if dim > MAX_ENUMERATED_DIM {
        return Err(Error::EnumerationCap(dim));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let segmentation = Segmentation::contiguous(model.dim(), dim)?;

    let mut rng = slime::rng::seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        // the identity is algebraic, so any target, mass and σ will do
        let target: Vec<f64> = (0..model.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let masses = (0..1usize << dim)
            .map(|_| rng.random_range(0.05..1.0))
            .collect();
        let dist = DiscreteDistribution::from_masses(dim, masses)?;
        let kernel = KernelSpec::new(10f64.powf(rng.random_range(-1.0..=1.0)))?;
        let conv = slime::ConversionSpec::segmented(target, None, segmentation.clone())?;
        worst = worst.max(oracle::verify_lemma1(&model, &conv, &dist, &kernel)?);
    }
    println!("max linf distance over {trials} trials: {worst:e}");
    Ok(if worst <= LEMMA_TOL { 0 } else { 1 })
}

fn parse_pair(spec: &str) -> Result<[f64; 2]> {
    let values: Vec<f64> = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("sigmas {spec:?} are not numbers")))?;
    match values.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::InvalidConfig(format!(
            "sigmas {spec:?}: expected two values"
        ))),
    }
}

pub fn paradox(a: ParadoxArgs) -> Result<u8> {
    let mut s = Settings::load(a.target.config.as_deref())?;
    let t = resolve_target(&mut s, a.target, Method::Lime, None)?;
    let sigmas = parse_pair(&s.or("sigmas", a.sigmas, "0.1,100".to_string())?)?;
    let resolved = s.finish()?;

    let mut blocks = Vec::new();
    for sigma in sigmas {
        // both bandwidths see the same toggles
        let config = t.config.clone().with_sigma(sigma);
        let hood = pipeline::build_neighborhood(&t.model, &t.x, &config)?;
        let hist = weight_histogram(&hood.log_weights, HISTOGRAM_BINS)?;
        let e = pipeline::fit_neighborhood(&t.model, &hood, &config)?;
        println!(
            "σ={sigma}: ess={:.4} degenerate={}",
            hood.ess(),
            e.degenerate
        );
        blocks.push(json!({
            "sigma": sigma,
            "ess": hood.ess(),
            "histogram": {
                "edges_log10": hist.edges_log10,
                "counts": hist.counts,
                "mass": hist.mass,
            },
            "explanation": explanation_value(&e),
        }));
    }
    let mut doc = Map::new();
    doc.insert("config".into(), config_value(resolved));
    doc.insert("blocks".into(), Value::Array(blocks));
    write_json(&t.out, &Value::Object(doc))?;
    Ok(0)
}
