//! Naive Bayes (Bernoulli) mixtures over binary records: moment estimation
//! with diagonal completion, spectral parameter recovery, EM refinement,
//! synthetic sampling and real-vs-synthetic evaluation.

// Index loops mirror the maths; `!(x > y)` comparisons deliberately reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod em;
pub mod error;
pub mod evaluate;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod pipeline;
pub mod rng;
pub mod spectral;

pub use dataset::BinaryDataset;
pub use em::{em_refine, EmOptions, EmReport};
pub use error::{Error, Result};
pub use evaluate::{classifier_two_sample_test, mmd_unbiased, Bandwidth, EvalReport, ForestSettings};
pub use model::{BaselineModel, NaiveBayesModel};
pub use moments::{complete_low_rank, estimate_moments, MomentSet};
pub use pipeline::{fit_model, FitOptions};
pub use spectral::fit_spectral;
