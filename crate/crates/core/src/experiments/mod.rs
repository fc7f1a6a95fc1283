//! End-to-end study pipeline behind the command-line tool.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod store;

pub use commands::Layout;
pub use config::{Algorithm, ExperimentConfig};
pub use pipeline::{
    best_models, build_datasets, compare_bundles, evaluate_models, flakiness, generate_corpus, run_corpus,
    search_bundle, train_models, Corpus, Datasets, PolicyInputs, Records, SearchBundle, Setup,
};
pub use store::{CachedExecutor, RunLogStore};
