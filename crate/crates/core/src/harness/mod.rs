//! Desk-scale validation: rank correlation, synthetic datasets, a small
//! gradient-descent oracle trainer, exact two-dimensional region counting
//! and ingestion of external architecture-accuracy tables.

mod bench;
mod dataset;
mod kendall;
mod regions2d;
mod study;
mod trainer;

pub use bench::{ingest_benchmark, ingest_benchmark_str, train_test_tau, BenchmarkTable, IngestReport};
pub use dataset::{make_dataset, Dataset, DatasetKind};
pub use kendall::kendall_tau;
pub use regions2d::exact_regions_2d;
pub use study::{
    correlation_study, correlation_with_benchmark, CorrelationReport, StudyConfig, StudyRow,
};
pub use trainer::{train_network, train_oracle, TrainConfig, TrainResult};
