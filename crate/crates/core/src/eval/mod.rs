//! Downstream evaluation of selected features and the multi-seed benchmark.

mod classifiers;
mod harness;
mod masks;

pub use classifiers::{accuracy, knn_classify, logistic_classify, mean_stderr, Classifier, LogisticConfig};
pub use harness::{run_benchmark, BenchmarkReport, CellFailure, EvalResult, Harness, RESULTS_HEADER};
pub use masks::{central_fraction, pgm_mask, write_pgm_mask, CENTRAL_WINDOW};
