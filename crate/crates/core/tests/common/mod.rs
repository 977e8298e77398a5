//! Property checks shared by the `properties` and `acceptance` targets.
//!
//! Each property draws its parameters from a proptest strategy and builds
//! the rest of its random inputs from a seeded generator, so a failing case
//! is reproduced by its printed parameters alone.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;

use slime::blackbox::{self, LogisticModel, Mlp, Smoothness};
use slime::neighborhoods::{
    convert, effective_sample_size, kernel_weight, sample, ConversionSpec, KernelSpec, SamplerKind,
    SamplerSpec, Segmentation,
};
use slime::oracle::{self, DiscreteDistribution};
use slime::pipeline::{self, ExplainConfig};
use slime::rng::{self as srng, Rng as ChaCha};
use slime::surrogate::{fit_k_sparse, fit_weighted_least_squares, NeighborhoodSample};
use slime::{metrics, surrogate_gradient_fd, BlackBox, Dataset};

pub type Check = Result<(), TestCaseError>;

pub struct Property {
    pub name: &'static str,
    pub run: fn(u32) -> Result<(), String>,
}

/// Runs `test` on `cases` inputs from `strategy` with a fixed generator.
pub fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Check,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 64,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn uniform_vec(rng: &mut ChaCha, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_matrix(rng: &mut ChaCha, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
}

fn random_logistic(rng: &mut ChaCha, dim: usize, scale: f64) -> LogisticModel {
    let w = uniform_vec(rng, dim, -scale, scale);
    LogisticModel::new(w, rng.random_range(-0.5..0.5))
}

fn random_mlp(rng: &mut ChaCha, dim: usize, hidden: usize) -> Mlp {
    let s = 1.0 / (dim as f64).sqrt();
    Mlp {
        input_dim: dim,
        hidden,
        w1: uniform_vec(rng, hidden * dim, -s, s),
        b1: uniform_vec(rng, hidden, -0.5, 0.5),
        w2: uniform_vec(rng, hidden, -2.0, 2.0),
        b2: rng.random_range(-0.5..0.5),
    }
}

fn random_forest(rng: &mut ChaCha, dim: usize, seed: u64) -> (Dataset, BlackBox) {
    let m = 120;
    let x = random_matrix(rng, m, dim, 0.5, 2.0);
    let w = uniform_vec(rng, dim, -1.0, 1.0);
    let mut y: Array1<f64> = x
        .rows()
        .into_iter()
        .map(|r| f64::from(r.dot(&Array1::from(w.clone())) > 0.0))
        .collect();
    y[0] = 0.0;
    y[1] = 1.0;
    let data = Dataset::unnamed(x, y).unwrap();
    let model = blackbox::train_stump_forest(&data, 5, 3, seed).unwrap();
    (data, model)
}

fn random_sample(rng: &mut ChaCha, n: usize, dim: usize) -> NeighborhoodSample {
    let points = random_matrix(rng, n, dim, -1.0, 1.0);
    let weights = Array1::from(uniform_vec(rng, n, 0.1, 2.0));
    let labels = Array1::from(uniform_vec(rng, n, 0.0, 1.0));
    NeighborhoodSample::new(points, weights, labels).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn rel_l2(estimate: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

// ---- surrogate fitting ----

pub fn label_scale_equivariance(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..6, -5.0f64..5.0),
        |(seed, dim, c)| {
            prop_assume!(c.abs() > 1e-3);
            let mut rng = srng::seeded(seed);
            let s = random_sample(&mut rng, 40, dim);
            let scaled =
                NeighborhoodSample::new(s.points().clone(), s.weights().clone(), s.labels() * c)
                    .unwrap();
            let a = fit_weighted_least_squares(&s, 0.0).unwrap();
            let b = fit_weighted_least_squares(&scaled, 0.0).unwrap();
            prop_assert!((b.intercept() - c * a.intercept()).abs() < 1e-10 * (1.0 + c.abs()));
            for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
                prop_assert!(
                    (y - c * x).abs() < 1e-10 * (1.0 + c.abs()),
                    "{} vs {}",
                    y,
                    c * x
                );
            }
            Ok(())
        },
    )
}

pub fn weight_rescaling_invariance(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..6, -6.0f64..6.0),
        |(seed, dim, log_c)| {
            let c = 10f64.powf(log_c);
            let mut rng = srng::seeded(seed);
            let s = random_sample(&mut rng, 40, dim);
            let heavy = s.with_weights(s.weights() * c).unwrap();
            let k = 1 + (seed as usize) % dim;
            let a = fit_k_sparse(&s, k, 0.0).unwrap();
            let b = fit_k_sparse(&heavy, k, 0.0).unwrap();
            prop_assert_eq!(a.selected(), b.selected());
            prop_assert!((a.intercept() - b.intercept()).abs() < 1e-10);
            prop_assert!(max_abs_diff(a.coefficients(), b.coefficients()) < 1e-10);
            Ok(())
        },
    )
}

pub fn full_k_matches_dense_fit(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..8), |(seed, dim)| {
        let mut rng = srng::seeded(seed);
        let s = random_sample(&mut rng, 60, dim);
        let a = fit_k_sparse(&s, dim, 0.0).unwrap();
        let b = fit_weighted_least_squares(&s, 0.0).unwrap();
        prop_assert!((a.intercept() - b.intercept()).abs() < 1e-10);
        prop_assert!(max_abs_diff(a.coefficients(), b.coefficients()) < 1e-10);
        Ok(())
    })
}

pub fn affine_labels_are_recovered(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..8, 0.01f64..100.0),
        |(seed, dim, scale)| {
            let mut rng = srng::seeded(seed);
            let points = random_matrix(&mut rng, 30, dim, -scale, scale);
            let coef = uniform_vec(&mut rng, dim, -3.0, 3.0);
            let intercept = rng.random_range(-3.0..3.0);
            let labels = points.dot(&Array1::from(coef.clone())) + intercept;
            let weights = Array1::from(uniform_vec(&mut rng, 30, 0.1, 2.0));
            let g = fit_weighted_least_squares(
                &NeighborhoodSample::new(points, weights, labels).unwrap(),
                0.0,
            )
            .unwrap();
            prop_assert!((g.intercept() - intercept).abs() < 1e-8);
            prop_assert!(max_abs_diff(g.coefficients(), &coef) < 1e-8);
            Ok(())
        },
    )
}

pub fn fits_are_deterministic(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..8), |(seed, dim)| {
        let mut rng = srng::seeded(seed);
        let s = random_sample(&mut rng, 30, dim);
        let k = 1 + (seed as usize) % dim;
        let a = fit_k_sparse(&s, k, 0.0).unwrap();
        let b = fit_k_sparse(&s.clone(), k, 0.0).unwrap();
        prop_assert_eq!(a.intercept().to_bits(), b.intercept().to_bits());
        for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(a.selected(), b.selected());
        Ok(())
    })
}

// ---- neighborhoods ----

pub fn kernel_weight_shape(cases: u32) -> Result<(), String> {
    // keep D²/σ² below the underflow range, where the weight is exact
    check(
        cases,
        (
            1usize..6,
            0.0f64..3.0,
            0.0f64..3.0,
            0.3f64..5.0,
            1.01f64..3.0,
        ),
        |(dim, d1, extra, sigma, grow)| {
            let point = |d: f64| {
                let mut p = vec![0.0; dim];
                p[0] = d;
                p
            };
            let origin = vec![0.0; dim];
            let k = KernelSpec::new(sigma).unwrap();
            let w1 = kernel_weight(&origin, &point(d1), &k).unwrap();
            prop_assert!(w1 > 0.0 && w1 <= 1.0);
            prop_assert_eq!(w1 == 1.0, d1 == 0.0);
            prop_assert_eq!(kernel_weight(&origin, &origin, &k).unwrap(), 1.0);
            let d2 = d1 + extra + 1e-3;
            prop_assert!(kernel_weight(&origin, &point(d2), &k).unwrap() < w1);
            if d1 > 0.0 {
                let wider = KernelSpec::new(sigma * grow).unwrap();
                prop_assert!(kernel_weight(&origin, &point(d1), &wider).unwrap() > w1);
            }
            Ok(())
        },
    )
}

pub fn binary_weights_concentrate(cases: u32) -> Result<(), String> {
    check(
        cases,
        (10usize..20, 0.01f64..=0.1, 100usize..3000, any::<u64>()),
        |(dim, sigma, n, seed)| {
            let spec = SamplerSpec::new(SamplerKind::BinaryToggle, sigma, n, seed).unwrap();
            let pts = sample(dim, &spec).unwrap();
            let k = KernelSpec::new(sigma).unwrap();
            let target = vec![1.0; dim];
            let weights: Vec<f64> = pts
                .rows()
                .into_iter()
                .map(|r| kernel_weight(&target, &r.to_vec(), &k).unwrap())
                .collect();
            let bound = (-1.0 / (sigma * sigma)).exp();
            prop_assert_eq!(weights[0], 1.0);
            prop_assert!(weights[1..]
                .iter()
                .all(|w| *w <= bound.max(f64::MIN_POSITIVE)));
            prop_assert!(bound <= (-100.0f64).exp());
            // (1 + s)² / (1 + s₂) ≤ 1 + 2s with s ≤ (n − 1)·bound
            let ess = effective_sample_size(&weights).unwrap();
            prop_assert!(ess - 1.0 <= 2.0 * n as f64 * bound, "ess {}", ess);
            prop_assert!(ess < 1.01);
            Ok(())
        },
    )
}

pub fn samplers_follow_the_seed(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            0usize..3,
            3usize..12,
            100usize..300,
            any::<u64>(),
            0.05f64..1.0,
        ),
        |(kind, dim, n, seed, sigma)| {
            // from three toggled features on, 100 rows cannot coincide by chance
            let kind = [
                SamplerKind::BinaryToggle,
                SamplerKind::UniformCube,
                SamplerKind::GaussianOffset,
            ][kind];
            let a = sample(dim, &SamplerSpec::new(kind, sigma, n, seed).unwrap()).unwrap();
            let b = sample(dim, &SamplerSpec::new(kind, sigma, n, seed).unwrap()).unwrap();
            let c = sample(
                dim,
                &SamplerSpec::new(kind, sigma, n, seed.wrapping_add(1)).unwrap(),
            )
            .unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_ne!(&a, &c);
            Ok(())
        },
    )
}

pub fn target_converts_to_itself(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..12), |(seed, dim)| {
        let mut rng = srng::seeded(seed);
        let x = uniform_vec(&mut rng, dim, -10.0, 10.0);
        let segments = 1 + (seed as usize) % dim;
        let baseline = uniform_vec(&mut rng, dim, -10.0, 10.0);
        let conversions = [
            ConversionSpec::tabular(x.clone()),
            ConversionSpec::segmented(
                x.clone(),
                Some(baseline),
                Segmentation::contiguous(dim, segments).unwrap(),
            )
            .unwrap(),
        ];
        for conv in &conversions {
            let x_hat = conv.target_surrogate().unwrap();
            prop_assert_eq!(convert(conv, &x_hat).unwrap(), x.clone());
        }
        Ok(())
    })
}

pub fn segmented_output_is_bracketed(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..12, 0.01f64..=1.0),
        |(seed, dim, sigma)| {
            let mut rng = srng::seeded(seed);
            let x = uniform_vec(&mut rng, dim, -10.0, 10.0);
            let x0 = uniform_vec(&mut rng, dim, -10.0, 10.0);
            let segments = 1 + (seed as usize) % dim;
            let conv = ConversionSpec::segmented(
                x.clone(),
                Some(x0.clone()),
                Segmentation::contiguous(dim, segments).unwrap(),
            )
            .unwrap();
            let cube = sample(
                segments,
                &SamplerSpec::new(SamplerKind::UniformCube, sigma, 50, seed).unwrap(),
            )
            .unwrap();
            let toggles = sample(
                segments,
                &SamplerSpec::new(SamplerKind::BinaryToggle, sigma, 50, seed).unwrap(),
            )
            .unwrap();
            for z in cube.rows().into_iter().chain(toggles.rows()) {
                let out = convert(&conv, &z.to_vec()).unwrap();
                for i in 0..dim {
                    let (lo, hi) = (x[i].min(x0[i]), x[i].max(x0[i]));
                    // one rounding of the interpolation may leave the interval by an ulp
                    let slack = 4.0 * f64::EPSILON * hi.abs().max(lo.abs());
                    prop_assert!(out[i] >= lo - slack && out[i] <= hi + slack);
                }
            }
            Ok(())
        },
    )
}

// ---- black boxes ----

pub fn built_in_models_are_bounded(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..8, 0usize..3),
        |(seed, dim, kind)| {
            let mut rng = srng::seeded(seed);
            let model = match kind {
                0 => BlackBox::logistic(random_logistic(&mut rng, dim, 50.0)),
                1 => BlackBox::mlp(random_mlp(&mut rng, dim, 6)),
                _ => random_forest(&mut rng, dim, seed).1,
            };
            for _ in 0..50 {
                let x = uniform_vec(&mut rng, dim, -1e3, 1e3);
                let p = model.predict(&x).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert_eq!(p.to_bits(), model.predict(&x).unwrap().to_bits());
            }
            Ok(())
        },
    )
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn finite_differences_are_second_order(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..6), |(seed, dim)| {
        let mut rng = srng::seeded(seed);
        let w: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(0.5..2.0) * if rng.random() { 1.0 } else { -1.0 })
            .collect();
        let x = uniform_vec(&mut rng, dim, -1.0, 1.0);
        let b = rng.random_range(-1.0..1.0);
        let t = b + w.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>();
        let s = sigmoid(t);
        // the h² term of the error is proportional to σ'''(t)
        let third = s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s);
        prop_assume!(third.abs() > 5e-3);
        let model = BlackBox::logistic(LogisticModel::new(w.clone(), b));
        let conv = ConversionSpec::tabular(x);
        let exact: Vec<f64> = w.iter().map(|wi| s * (1.0 - s) * wi).collect();
        let err = |h: f64| {
            let g = surrogate_gradient_fd(&model, &conv, &vec![0.0; dim], h).unwrap();
            g.iter()
                .zip(&exact)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt()
        };
        let ratio = err(1e-3) / err(5e-4);
        prop_assert!((ratio - 4.0).abs() < 0.4, "ratio {}", ratio);
        Ok(())
    })
}

pub fn logistic_training_recovers_the_generator(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..4), |(seed, dim)| {
        let mut rng = srng::seeded(seed);
        let w: Vec<f64> = (0..dim)
            .map(|_| rng.random_range(0.8..1.5) * if rng.random() { 1.0 } else { -1.0 })
            .collect();
        let b = rng.random_range(-0.3..0.3);
        let m = 20_000;
        let x = random_matrix(&mut rng, m, dim, -2.0, 2.0);
        let truth = LogisticModel::new(w.clone(), b);
        let y: Array1<f64> = x
            .rows()
            .into_iter()
            .map(|r| f64::from(rng.random::<f64>() < truth.predict(&r.to_vec())))
            .collect();
        let data = Dataset::unnamed(x, y).unwrap();
        let trained = blackbox::train_logistic(&data, 0.0).unwrap();
        prop_assert!(trained.report.converged);
        let fitted = &trained.model.as_logistic().unwrap().weights;
        for (f, t) in fitted.iter().zip(&w) {
            prop_assert_eq!(f.signum(), t.signum());
            prop_assert!(((f - t) / t).abs() < 0.1, "{} vs {}", f, t);
        }
        Ok(())
    })
}

// ---- metrics ----

pub fn r2_ignores_weight_scale(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..5, -6.0f64..6.0),
        |(seed, dim, log_c)| {
            let mut rng = srng::seeded(seed);
            let s = random_sample(&mut rng, 30, dim);
            let g = fit_k_sparse(&s, 1, 0.0).unwrap();
            let heavy = s.with_weights(s.weights() * 10f64.powf(log_c)).unwrap();
            let a = metrics::r2_score(&g, &s).unwrap();
            let b = metrics::r2_score(&g, &heavy).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= 1.0);
            Ok(())
        },
    )
}

fn index_set() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0usize..20, 0..10)
}

pub fn set_metrics_are_bounded_and_symmetric(cases: u32) -> Result<(), String> {
    check(cases, (index_set(), index_set()), |(gold, explained)| {
        match metrics::recall_precision(&gold, &explained) {
            Ok((r, p)) => {
                prop_assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&p));
                let (r2, p2) = metrics::recall_precision(&explained, &gold).unwrap();
                prop_assert_eq!((r, p), (p2, r2));
            }
            Err(_) => prop_assert!(gold.is_empty() || explained.is_empty()),
        }
        if let Ok(c) = metrics::coverage(&gold, &explained) {
            prop_assert!((0.0..=1.0).contains(&c));
        }
        Ok(())
    })
}

pub fn r2_never_exceeds_one(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..5, -3.0f64..3.0),
        |(seed, dim, shift)| {
            let mut rng = srng::seeded(seed);
            let s = random_sample(&mut rng, 20, dim);
            let coef = uniform_vec(&mut rng, dim, -2.0, 2.0);
            let g = slime::LinearSurrogate::new(shift, coef).unwrap();
            prop_assert!(metrics::r2_score(&g, &s).unwrap() <= 1.0);
            Ok(())
        },
    )
}

// ---- oracle ----

fn random_distribution(rng: &mut ChaCha, dim: usize) -> DiscreteDistribution {
    let masses = uniform_vec(rng, 1 << dim, 0.01, 1.0);
    DiscreteDistribution::from_masses(dim, masses).unwrap()
}

/// Logistic model over `features` inputs read through `dim` contiguous
/// segments of a positive target.
fn segmented_logistic(rng: &mut ChaCha, features: usize, dim: usize) -> (BlackBox, ConversionSpec) {
    let model = BlackBox::logistic(random_logistic(rng, features, 1.5));
    let target = uniform_vec(rng, features, 0.2, 2.0);
    let conv = ConversionSpec::segmented(
        target,
        None,
        Segmentation::contiguous(features, dim).unwrap(),
    )
    .unwrap();
    (model, conv)
}

pub fn reweighted_distribution_is_normalized(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..=10, -1.0f64..1.0, proptest::bool::ANY),
        |(seed, dim, log_sigma, holes)| {
            let mut rng = srng::seeded(seed);
            let mut masses = uniform_vec(&mut rng, 1 << dim, 0.0, 1.0);
            if holes {
                for m in masses.iter_mut() {
                    if rng.random::<f64>() < 0.3 {
                        *m = 0.0;
                    }
                }
                masses[(1 << dim) - 1] = 0.5;
            }
            let dist = DiscreteDistribution::from_masses(dim, masses).unwrap();
            let kernel = KernelSpec::new(10f64.powf(log_sigma)).unwrap();
            let out = oracle::lemma1_distribution(&dist, &kernel, &vec![1.0; dim]).unwrap();
            let total: f64 = out.masses().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert_eq!(out.support(), dist.support());
            Ok(())
        },
    )
}

pub fn reweighting_preserves_the_minimizer(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 2usize..=4, -1.0f64..=1.0),
        |(seed, dim, log_sigma)| {
            let mut rng = srng::seeded(seed);
            let (model, conv) = segmented_logistic(&mut rng, 8, dim);
            let dist = random_distribution(&mut rng, dim);
            let kernel = KernelSpec::new(10f64.powf(log_sigma)).unwrap();
            let gap = oracle::verify_lemma1(&model, &conv, &dist, &kernel).unwrap();
            prop_assert!(gap <= 1e-8, "gap {}", gap);
            Ok(())
        },
    )
}

pub fn oracle_matches_the_fitting_routine(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 1usize..=10, proptest::bool::ANY),
        |(seed, dim, kernel_weighted)| {
            let mut rng = srng::seeded(seed);
            let (model, conv) = segmented_logistic(&mut rng, 12, dim);
            let dist = random_distribution(&mut rng, dim);
            let kernel = KernelSpec::new(rng.random_range(0.5..5.0)).unwrap();
            let target = vec![1.0; dim];
            let weight = |z: &[f64]| {
                if kernel_weighted {
                    kernel_weight(&target, z, &kernel).unwrap()
                } else {
                    1.0
                }
            };
            let exact = oracle::exact_weighted_minimizer(&model, &conv, &dist, weight).unwrap();
            let sample = oracle::enumerate_sample(&model, &conv, &dist, weight).unwrap();
            let fitted = fit_weighted_least_squares(&sample, 0.0).unwrap();
            let gap = oracle::linf(&exact, &fitted);
            prop_assert!(gap <= 1e-10, "gap {}", gap);
            Ok(())
        },
    )
}

// ---- pipeline ----

pub fn affine_models_are_explained_exactly(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 2usize..=8, 0usize..3, 0.0f64..1.0),
        |(seed, dim, kind, u)| {
            let mut rng = srng::seeded(seed);
            let x = uniform_vec(&mut rng, dim, 0.5, 2.0);
            let support_size = rng.random_range(1..=dim);
            let support = rand::seq::index::sample(&mut rng, dim, support_size).into_vec();
            let k = rng.random_range(support_size..=dim);
            // magnitudes of the surrogate-space slopes, keeping f inside (0, 1)
            let mut slope = vec![0.0; dim];
            for &i in &support {
                slope[i] = rng.random_range(0.2..1.0) * if rng.random() { 1.0 } else { -1.0 };
            }
            let (config, sigma) = match kind {
                0 => {
                    let sigma = 10f64.powf(u * 2.0);
                    (ExplainConfig::lime().with_sigma(sigma), sigma)
                }
                1 => {
                    let sigma = 10f64.powf(-3.0 + 3.0 * u);
                    (ExplainConfig::slime_segmented().with_sigma(sigma), sigma)
                }
                _ => {
                    let sigma = 10f64.powf(-3.0 + 4.0 * u);
                    (ExplainConfig::slime_tabular().with_sigma(sigma), sigma)
                }
            };
            let config = config.with_n(400).with_k(k).with_seed(seed);
            // coefficients in the surrogate space and the weights of f on x
            let (expected, a): (Vec<f64>, Vec<f64>) = if kind == 2 {
                let a: Vec<f64> = slope
                    .iter()
                    .map(|s| s * 0.1 / (sigma * dim as f64))
                    .collect();
                (a.clone(), a)
            } else {
                let e: Vec<f64> = slope.iter().map(|s| s * 0.4 / dim as f64).collect();
                let a = e.iter().zip(&x).map(|(e, xi)| e / xi).collect();
                (e, a)
            };
            let offset = if kind == 2 {
                0.5 - a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>()
            } else {
                0.5
            };
            let a2 = a.clone();
            let model = BlackBox::from_fn(dim, Smoothness::Smooth, move |v| {
                offset + a2.iter().zip(v).map(|(p, q)| p * q).sum::<f64>()
            });

            let hood = pipeline::build_neighborhood(&model, &x, &config).unwrap();
            prop_assume!(kind != 0 || hood.ess() >= (dim + 1) as f64);
            let e = pipeline::fit_neighborhood(&model, &hood, &config).unwrap();
            prop_assert!(
                (e.report.r2.unwrap() - 1.0).abs() < 1e-6,
                "r2 {:?}",
                e.report.r2
            );
            let gap = max_abs_diff(e.coefficients(), &expected);
            prop_assert!(
                gap < 1e-6,
                "coefficients {:?} vs {:?}",
                e.coefficients(),
                expected
            );
            Ok(())
        },
    )
}

/// Relative ℓ₂ error of s-LIME against finite differences at `(σ, n)`.
fn gradient_error(
    model: &BlackBox,
    x: &[f64],
    config: &ExplainConfig,
    sigma: f64,
    n: usize,
) -> f64 {
    let config = config.clone().with_sigma(sigma).with_n(n);
    let e = pipeline::explain_slime(model, x, &config).unwrap();
    let conv = config.conversion_for(x).unwrap();
    let fd = surrogate_gradient_fd(model, &conv, &conv.target_surrogate().unwrap(), 1e-4).unwrap();
    rel_l2(e.coefficients(), &fd)
}

pub fn slime_converges_to_the_gradient(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            any::<u64>(),
            2usize..=6,
            proptest::bool::ANY,
            proptest::bool::ANY,
        ),
        |(seed, dim, mlp, tabular)| {
            let mut rng = srng::seeded(seed);
            let model = if mlp {
                BlackBox::mlp(random_mlp(&mut rng, dim, 8))
            } else {
                BlackBox::logistic(random_logistic(&mut rng, dim, 1.5))
            };
            let x = uniform_vec(&mut rng, dim, 0.5, 2.0);
            let base = if tabular {
                ExplainConfig::slime_tabular()
            } else {
                ExplainConfig::slime_segmented()
            };
            let config = base.with_k(dim).with_seed(seed);
            let coarse = gradient_error(&model, &x, &config, 1e-3, 10_000);
            let fine = gradient_error(&model, &x, &config, 5e-4, 40_000);
            prop_assert!(coarse < 0.05, "error {}", coarse);
            prop_assert!(fine < coarse, "{} then {}", coarse, fine);
            Ok(())
        },
    )
}

pub fn flat_kernel_equals_unit_weights(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 2usize..=20), |(seed, dim)| {
        let mut rng = srng::seeded(seed);
        let model = BlackBox::logistic(random_logistic(&mut rng, dim, 1.0));
        let x = uniform_vec(&mut rng, dim, 0.5, 2.0);
        let k = rng.random_range(1..=dim);
        let config = ExplainConfig::lime()
            .with_sigma(1e6)
            .with_n(300)
            .with_k(k)
            .with_seed(seed);
        let hood = pipeline::build_neighborhood(&model, &x, &config).unwrap();
        let e = pipeline::fit_neighborhood(&model, &hood, &config).unwrap();
        let unit = fit_k_sparse(
            &NeighborhoodSample::unweighted(hood.points.clone(), hood.labels.clone()).unwrap(),
            k,
            0.0,
        )
        .unwrap();
        prop_assert_eq!(e.surrogate.selected(), unit.selected());
        prop_assert!((e.surrogate.intercept() - unit.intercept()).abs() < 1e-9);
        prop_assert!(max_abs_diff(e.coefficients(), unit.coefficients()) < 1e-9);
        Ok(())
    })
}

pub fn lime_degeneracy_is_monotone(cases: u32) -> Result<(), String> {
    let grid = pipeline::log_grid(1e-2, 1e2, 20).unwrap();
    check(cases, (any::<u64>(), 6usize..=13), move |(seed, dim)| {
        let mut rng = srng::seeded(seed);
        let (data, model) = random_forest(&mut rng, dim, seed);
        let x = data
            .features()
            .row(rng.random_range(0..data.len()))
            .to_vec();
        let flags: Vec<bool> = grid
            .iter()
            .map(|&s| {
                let config = ExplainConfig::lime()
                    .with_sigma(s)
                    .with_n(500)
                    .with_k(4.min(dim))
                    .with_seed(seed);
                pipeline::explain_lime(&model, &x, &config)
                    .unwrap()
                    .degenerate
            })
            .collect();
        for i in 0..grid.len() {
            for j in 0..i {
                if flags[i] && grid[j] < grid[i] / 2.0 {
                    prop_assert!(
                        flags[j],
                        "degenerate at σ={} but not at σ={}",
                        grid[i],
                        grid[j]
                    );
                }
            }
        }
        Ok(())
    })
}

pub fn all() -> Vec<Property> {
    vec![
        Property {
            name: "fit: label scale equivariance",
            run: label_scale_equivariance,
        },
        Property {
            name: "fit: weight rescaling invariance",
            run: weight_rescaling_invariance,
        },
        Property {
            name: "fit: k = d equals the dense fit",
            run: full_k_matches_dense_fit,
        },
        Property {
            name: "fit: affine labels recovered",
            run: affine_labels_are_recovered,
        },
        Property {
            name: "fit: bitwise determinism",
            run: fits_are_deterministic,
        },
        Property {
            name: "neighborhoods: kernel weight shape",
            run: kernel_weight_shape,
        },
        Property {
            name: "neighborhoods: binary weights concentrate",
            run: binary_weights_concentrate,
        },
        Property {
            name: "neighborhoods: samplers follow the seed",
            run: samplers_follow_the_seed,
        },
        Property {
            name: "neighborhoods: target converts to itself",
            run: target_converts_to_itself,
        },
        Property {
            name: "neighborhoods: segmented output bracketed",
            run: segmented_output_is_bracketed,
        },
        Property {
            name: "blackbox: bounded deterministic predictors",
            run: built_in_models_are_bounded,
        },
        Property {
            name: "blackbox: finite differences are O(h²)",
            run: finite_differences_are_second_order,
        },
        Property {
            name: "blackbox: logistic recovers its generator",
            run: logistic_training_recovers_the_generator,
        },
        Property {
            name: "metrics: R² ignores weight scale",
            run: r2_ignores_weight_scale,
        },
        Property {
            name: "metrics: set metrics bounded and symmetric",
            run: set_metrics_are_bounded_and_symmetric,
        },
        Property {
            name: "metrics: R² at most one",
            run: r2_never_exceeds_one,
        },
        Property {
            name: "oracle: reweighted distribution normalized",
            run: reweighted_distribution_is_normalized,
        },
        Property {
            name: "oracle: reweighting preserves the minimizer",
            run: reweighting_preserves_the_minimizer,
        },
        Property {
            name: "oracle: matches weighted least squares",
            run: oracle_matches_the_fitting_routine,
        },
        Property {
            name: "pipeline: affine models explained exactly",
            run: affine_models_are_explained_exactly,
        },
        Property {
            name: "pipeline: s-LIME converges to the gradient",
            run: slime_converges_to_the_gradient,
        },
        Property {
            name: "pipeline: flat kernel equals unit weights",
            run: flat_kernel_equals_unit_weights,
        },
        Property {
            name: "pipeline: LIME degeneracy monotone in σ",
            run: lime_degeneracy_is_monotone,
        },
    ]
}
