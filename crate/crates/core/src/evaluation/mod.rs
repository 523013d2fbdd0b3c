//! Error metrics, synthetic data and the benchmark harness.

pub mod benchmark;
pub mod metrics;
pub mod synthetic;

pub use benchmark::{run_benchmark, BenchmarkCase, BenchmarkReport, PairRow, RecallCurves};
pub use metrics::{
    rotation_error, rotation_loss_gradient, translation_error, translation_loss, translation_loss_gradient,
    PairMetrics, SuccessThresholds,
};
pub use synthetic::{generate_pair, SyntheticPair, SyntheticPairSpec};
