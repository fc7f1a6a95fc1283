//! Stratified folds and cross-validated evaluation.

use super::dataset::{Dataset, Partition, MTEC_RUNS};
use super::metrics::{Confusion, Metrics};
use super::model::{train, Hyperparams, Model, ModelKind};
use super::schema::{FeatureSubset, FitnessFeatures};
use super::smote::smote;
use crate::error::{Error, Result};
use crate::flakiness::FlakinessCorpusStats;
use crate::search::baseline_flaky;
use crate::sim::space::derive_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Assigns each label a fold in `0..folds` so every fold holds each class in
/// proportion, within one member.
pub fn stratified_split(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config("at least two folds are required".into()));
    }
    for class in [true, false] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < folds {
            return Err(Error::ClassTooSmall {
                label: class,
                count,
                folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assign[i] = next % folds;
            next += 1;
        }
    }
    Ok(assign)
}

pub fn evaluate(model: &Model, test: &Dataset) -> Result<Metrics> {
    let mut c = Confusion::default();
    for p in &test.points {
        c.add(model.predict(&p.features)?.flaky, p.label);
    }
    Ok(c.metrics())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub partition: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    /// `None` for the threshold baseline.
    pub kind: Option<ModelKind>,
    pub subset: FeatureSubset,
    pub fitness_features: FitnessFeatures,
    pub folds: Vec<Metrics>,
    /// Pooled over all held-out predictions.
    pub aggregate: Metrics,
    /// Multi-execution reports: pooled metrics per prefix partition.
    pub partitions: Vec<PartitionMetrics>,
    /// Folds whose training side could not be oversampled.
    pub smote_fallbacks: usize,
}

impl EvalReport {
    pub fn partition(&self, i: usize) -> Option<&Metrics> {
        self.partitions.iter().find(|p| p.partition == i).map(|p| &p.metrics)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    pub smote_k: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            smote_k: super::smote::DEFAULT_K,
            seed: 0,
        }
    }
}

/// Oversamples `train`, falling back to the data as-is when the minority is too small.
fn balance(train: &Dataset, k: usize, seed: u64) -> (Dataset, bool) {
    match smote(train, k, seed) {
        Ok(d) => (d, false),
        Err(e) => {
            log::warn!("training fold left unbalanced: {e}");
            (train.clone(), true)
        }
    }
}

/// Stratified k-fold evaluation of single-execution classifiers.
pub fn cross_validate(data: &Dataset, kind: ModelKind, hyper: &Hyperparams, cv: &CvConfig) -> Result<EvalReport> {
    let labels = data.labels();
    let assign = stratified_split(&labels, cv.folds, cv.seed)?;
    let folds: Vec<(Confusion, bool)> = (0..cv.folds)
        .into_par_iter()
        .map(|f| -> Result<(Confusion, bool)> {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| assign[i] != f).collect();
            let test_idx: Vec<usize> = (0..data.len()).filter(|&i| assign[i] == f).collect();
            let fold_seed = derive_seed(cv.seed, f as u64);
            let (train_set, fallback) = balance(&data.subset(&train_idx), cv.smote_k, fold_seed);
            let model = train(kind, &train_set, hyper, fold_seed)?;
            Ok((evaluate(&model, &data.subset(&test_idx))?.confusion, fallback))
        })
        .collect::<Result<_>>()?;
    let mut pooled = Confusion::default();
    for (c, _) in &folds {
        pooled.merge(c);
    }
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: Some(kind),
        subset: data.schema.subset,
        fitness_features: data.schema.fitness_features,
        folds: folds.iter().map(|(c, _)| c.metrics()).collect(),
        aggregate: pooled.metrics(),
        partitions: Vec::new(),
        smote_fallbacks: folds.iter().filter(|(_, f)| *f).count(),
    })
}

/// Per-input view of the prefix partitions.
struct Inputs {
    order: Vec<String>,
    labels: Vec<bool>,
}

fn inputs_of(parts: &[Dataset]) -> Inputs {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut labels = Vec::new();
    for p in parts.iter().flat_map(|d| &d.points) {
        if !index.contains_key(p.input_hash.as_str()) {
            index.insert(&p.input_hash, order.len());
            order.push(p.input_hash.clone());
            labels.push(p.label);
        }
    }
    Inputs { order, labels }
}

/// Evaluates multi-execution classifiers: folds split by input, training on
/// the deduplicated union of all prefix rows of the training inputs, testing
/// on each partition `D^2 ..= D^9` of the held-out inputs.
pub fn cross_validate_mtec(
    parts: &[Dataset],
    kind: ModelKind,
    hyper: &Hyperparams,
    cv: &CvConfig,
) -> Result<EvalReport> {
    let first = parts.first().ok_or(Error::EmptyInput("no partitions"))?;
    let inputs = inputs_of(parts);
    let assign = stratified_split(&inputs.labels, cv.folds, cv.seed)?;
    let fold_of: HashMap<&str, usize> = inputs
        .order
        .iter()
        .map(String::as_str)
        .zip(assign.iter().copied())
        .collect();
    let tested: Vec<&Dataset> = parts
        .iter()
        .filter(|d| matches!(d.partition, Partition::Prefix(i) if i < MTEC_RUNS))
        .collect();

    let per_fold: Vec<(Vec<Confusion>, Confusion, bool)> = (0..cv.folds)
        .into_par_iter()
        .map(|f| -> Result<_> {
            let mut train_set = Dataset {
                schema: first.schema.clone(),
                partition: Partition::Union,
                points: parts
                    .iter()
                    .flat_map(|d| &d.points)
                    .filter(|p| fold_of[p.input_hash.as_str()] != f)
                    .cloned()
                    .collect(),
            };
            train_set.dedup();
            let fold_seed = derive_seed(cv.seed, f as u64);
            let (train_set, fallback) = balance(&train_set, cv.smote_k, fold_seed);
            let model = train(kind, &train_set, hyper, fold_seed)?;
            let mut per_part = Vec::with_capacity(tested.len());
            let mut all = Confusion::default();
            for d in &tested {
                let mut c = Confusion::default();
                for p in d.points.iter().filter(|p| fold_of[p.input_hash.as_str()] == f) {
                    c.add(model.predict(&p.features)?.flaky, p.label);
                }
                all.merge(&c);
                per_part.push(c);
            }
            Ok((per_part, all, fallback))
        })
        .collect::<Result<_>>()?;

    let mut pooled = Confusion::default();
    let mut by_part = vec![Confusion::default(); tested.len()];
    for (parts_c, all, _) in &per_fold {
        pooled.merge(all);
        for (acc, c) in by_part.iter_mut().zip(parts_c) {
            acc.merge(c);
        }
    }
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: Some(kind),
        subset: first.schema.subset,
        fitness_features: first.schema.fitness_features,
        folds: per_fold.iter().map(|(_, c, _)| c.metrics()).collect(),
        aggregate: pooled.metrics(),
        partitions: tested
            .iter()
            .zip(&by_part)
            .map(|(d, c)| PartitionMetrics {
                partition: match d.partition {
                    Partition::Prefix(i) => i,
                    _ => unreachable!("filtered to prefixes"),
                },
                metrics: c.metrics(),
            })
            .collect(),
        smote_fallbacks: per_fold.iter().filter(|(_, _, f)| *f).count(),
    })
}

/// The threshold baseline on every partition `D^2 ..= D^9`.
pub fn evaluate_baseline(parts: &[Dataset], stats: &FlakinessCorpusStats, tau: f64) -> Result<EvalReport> {
    let first = parts.first().ok_or(Error::EmptyInput("no partitions"))?;
    let target = first.schema.target;
    let mut pooled = Confusion::default();
    let mut partitions = Vec::new();
    let mut by_index: BTreeMap<usize, Confusion> = BTreeMap::new();
    for d in parts {
        let Partition::Prefix(i) = d.partition else {
            continue;
        };
        if i >= MTEC_RUNS {
            continue;
        }
        let c = by_index.entry(i).or_default();
        for p in &d.points {
            let delta = *p.features.last().expect("delta feature");
            c.add(baseline_flaky(delta, stats, tau, target), p.label);
        }
    }
    for (i, c) in by_index {
        pooled.merge(&c);
        partitions.push(PartitionMetrics {
            partition: i,
            metrics: c.metrics(),
        });
    }
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: None,
        subset: first.schema.subset,
        fitness_features: first.schema.fitness_features,
        folds: Vec::new(),
        aggregate: pooled.metrics(),
        partitions,
        smote_fallbacks: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_strata() {
        let labels: Vec<bool> = (0..100).map(|i| i < 20).collect();
        let a = stratified_split(&labels, 5, 9).unwrap();
        for f in 0..5 {
            let pos = (0..100).filter(|&i| a[i] == f && labels[i]).count();
            let neg = (0..100).filter(|&i| a[i] == f && !labels[i]).count();
            assert_eq!((pos, neg), (4, 16));
        }
        assert_eq!(a, stratified_split(&labels, 5, 9).unwrap());
    }

    #[test]
    fn too_small_class() {
        let labels = [true, true, false, false, false, false, false];
        assert!(matches!(
            stratified_split(&labels, 5, 0),
            Err(Error::ClassTooSmall {
                label: true,
                count: 2,
                folds: 5
            })
        ));
    }
}
