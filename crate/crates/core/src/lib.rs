//! Local surrogate explanations of black-box classifiers.
//!
//! The crate fits sparse linear surrogates around a target instance in two
//! ways:
//!
//! * [`explain_lime`] toggles interpretable features off, weights every
//!   neighbor with the kernel `exp(−D²/σ²)` and fits a weighted k-sparse
//!   least-squares model;
//! * [`explain_slime`] draws neighbors from a distribution of width σ
//!   around the target and fits with unit weights. As σ shrinks its
//!   coefficients approach the gradient of the black box along the
//!   surrogate space.
//!
//! The [`oracle`] module solves the expected losses of both methods exactly
//! on small binary spaces, and [`blackbox::surrogate_gradient_fd`] provides
//! the finite-difference gradient that s-LIME should converge to.
//!
//! ```
//! use slime::{explain_slime, fixtures, ExplainConfig};
//!
//! let (data, model) = fixtures::logistic()?;
//! let target = data.features().row(0).to_vec();
//! let config = ExplainConfig::slime_tabular().with_sigma(0.01).with_n(2000).with_k(4);
//! let explanation = explain_slime(&model, &target, &config)?;
//! assert_eq!(explanation.surrogate.selected(), model.gold_features().unwrap());
//! # Ok::<(), slime::Error>(())
//! ```

pub mod blackbox;
mod error;
pub mod fixtures;
mod linalg;
pub mod metrics;
pub mod neighborhoods;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod surrogate;

pub use blackbox::{predict_batch, surrogate_gradient_fd, BlackBox, Dataset, Smoothness};
pub use error::{Error, Result};
pub use metrics::{coverage, r2_score, recall_precision, FidelityReport};
pub use neighborhoods::{
    ConversionKind, ConversionSpec, KernelSpec, SamplerKind, SamplerSpec, Segmentation,
};
pub use oracle::{
    exact_weighted_minimizer, lemma1_distribution, verify_lemma1, DiscreteDistribution,
};
pub use pipeline::{
    explain, explain_lime, explain_slime, select_best_sigma, sweep_sigma, ExplainConfig,
    Explanation, Method,
};
pub use surrogate::{
    fit_k_sparse, fit_weighted_least_squares, LinearSurrogate, NeighborhoodSample,
};

/// Runs the snippets of the book and the README as doc-tests.
#[cfg(doctest)]
mod book {
    macro_rules! chapters {
        ($($name:ident => $file:literal),* $(,)?) => {
            $(
                #[doc = include_str!(concat!("../../../book/src/", $file))]
                pub struct $name;
            )*
        };
    }

    chapters!(
        Introduction => "introduction.md",
        Surrogates => "surrogates.md",
        Neighborhoods => "neighborhoods.md",
        BlackBoxes => "blackboxes.md",
        Bandwidth => "bandwidth.md",
        Slime => "slime.md",
        Oracle => "oracle.md",
        Cli => "cli.md",
        Testing => "testing.md",
    );

    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
}
