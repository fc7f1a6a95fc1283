//! Flakiness classifiers and their datasets.

pub mod cv;
pub mod dataset;
pub mod forest;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod schema;
pub mod smote;
pub mod tree;

pub use cv::{
    cross_validate, cross_validate_mtec, evaluate, evaluate_baseline, stratified_split, CvConfig, EvalReport,
};
pub use dataset::{build_dmtec, build_dstec, mtec_union, DataPoint, Dataset, LabelContext, Partition};
pub use metrics::{Confusion, Metrics};
pub use model::{train, Hyperparams, Model, ModelKind, Prediction};
pub use schema::{FeatureSchema, FeatureSubset, FitnessFeatures};
pub use smote::smote;
