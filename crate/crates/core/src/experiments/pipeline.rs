//! The study pipeline as pure functions over in-memory artifacts.

use super::config::{Algorithm, ExperimentConfig};
use super::store::{CachedExecutor, RunLogStore};
use crate::error::{Error, Result};
use crate::fitness::FitnessId;
use crate::flakiness::{flakiness_table, FlakinessCorpusStats, FlakinessTable, RerunRecord, Run};
use crate::ml::cv::{cross_validate, cross_validate_mtec, evaluate_baseline, EvalReport};
use crate::ml::{
    build_dmtec, build_dstec, mtec_union, smote, train, Dataset, FeatureSubset, LabelContext, Model, ModelKind,
};
use crate::search::{
    input_hash, random_search, BaselinePolicy, ModelPolicy, RerunPolicy, SearchRun, SimExecutor, Strategy,
    MAX_DRAWS_PER_CANDIDATE,
};
use crate::sim::space::derive_seed;
use crate::sim::{diversity_filter, TestInput};
use crate::stats::{compare, Alternative, ComparisonResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;
pub const RECORDS_SCHEMA_VERSION: u32 = 1;
pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
pub const COMPARISON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub input_hash: String,
    pub draw_index: u64,
    pub input: TestInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub schema_version: u32,
    pub corpus_id: String,
    pub entries: Vec<CorpusEntry>,
}

/// Samples `config.corpus.size` mutually diverse inputs.
pub fn generate_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    let space = config.space.clone().with_seed(config.corpus_seed());
    space.validate()?;
    let size = config.corpus.size;
    let mut accepted: Vec<TestInput> = Vec::with_capacity(size);
    let mut entries = Vec::with_capacity(size);
    let mut draw = 0u64;
    let mut misses = 0;
    while accepted.len() < size {
        let mut input = space.sample(draw)?;
        input.id = format!("i{}", accepted.len());
        if diversity_filter(&space, &input, &accepted, config.corpus.diversity_epsilon) {
            entries.push(CorpusEntry {
                id: input.id.clone(),
                input_hash: input_hash(&input),
                draw_index: draw,
                input: input.clone(),
            });
            accepted.push(input);
            misses = 0;
        } else {
            misses += 1;
            if misses == MAX_DRAWS_PER_CANDIDATE {
                return Err(Error::UnsatisfiableSpace {
                    reason: format!(
                        "{MAX_DRAWS_PER_CANDIDATE} consecutive draws within {} of an accepted input",
                        config.corpus.diversity_epsilon
                    ),
                    achieved: accepted.len(),
                    requested: size,
                });
            }
        }
        draw += 1;
    }
    Ok(Corpus {
        schema_version: CORPUS_SCHEMA_VERSION,
        corpus_id: format!("seed{}-n{size}", config.seed),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Records {
    pub schema_version: u32,
    pub corpus_id: String,
    pub reruns: usize,
    /// Executions requested, cached or not.
    pub total_simulations: usize,
    pub records: Vec<RerunRecord>,
}

/// Executes `reruns` runs of every corpus input through the cache.
pub fn run_corpus(config: &ExperimentConfig, corpus: &Corpus, store: &RunLogStore, reruns: usize) -> Records {
    let exec = CachedExecutor::new(store, SimExecutor::new(config.noise, config.specs));
    let records: Vec<RerunRecord> = corpus
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let base = config.rerun_seed(i);
            let runs = (0..reruns as u64)
                .map(|j| {
                    let seed = base.wrapping_add(j);
                    Run {
                        seed,
                        fitness: crate::search::Executor::execute(&exec, &e.input, seed),
                    }
                })
                .collect();
            RerunRecord {
                input: e.input.clone(),
                runs,
            }
        })
        .collect();
    Records {
        schema_version: RECORDS_SCHEMA_VERSION,
        corpus_id: corpus.corpus_id.clone(),
        reruns,
        total_simulations: corpus.entries.len() * reruns,
        records,
    }
}

pub fn flakiness(config: &ExperimentConfig, records: &Records) -> Result<(FlakinessCorpusStats, FlakinessTable)> {
    let stats = FlakinessCorpusStats::compute(&records.corpus_id, &records.records, &config.specs)?;
    let table = flakiness_table(&records.records, &stats, &config.specs)?;
    Ok((stats, table))
}

/// Prefix partitions of one multi-execution setup.
#[derive(Debug, Clone, PartialEq)]
pub struct MtecData {
    pub target: FitnessId,
    pub subset: FeatureSubset,
    pub parts: Vec<Dataset>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Datasets {
    pub stec: Vec<Dataset>,
    pub mtec: Vec<MtecData>,
}

impl Datasets {
    pub fn stec(&self, subset: FeatureSubset) -> Option<&Dataset> {
        self.stec.iter().find(|d| d.schema.subset == subset)
    }

    pub fn mtec(&self, target: FitnessId, subset: FeatureSubset) -> Option<&MtecData> {
        self.mtec.iter().find(|m| m.target == target && m.subset == subset)
    }
}

pub fn build_datasets(config: &ExperimentConfig, records: &Records, stats: &FlakinessCorpusStats) -> Result<Datasets> {
    let ctx = LabelContext {
        stats,
        specs: &config.specs,
        space: &config.space,
        tau: config.tau,
    };
    let stec = config
        .ml
        .subsets
        .iter()
        .map(|&s| build_dstec(&records.records, ctx, s))
        .collect::<Result<_>>()?;
    let mut mtec = Vec::new();
    for &target in &config.ml.mtec_targets {
        for &subset in &config.ml.subsets {
            mtec.push(MtecData {
                target,
                subset,
                parts: build_dmtec(&records.records, ctx, subset, target)?,
            });
        }
    }
    Ok(Datasets { stec, mtec })
}

/// Which classifier family a model or report belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "setup", rename_all = "snake_case")]
pub enum Setup {
    Stec,
    Mtec { target: FitnessId },
}

impl Setup {
    pub fn file_stem(self, kind: &str, subset: FeatureSubset) -> String {
        match self {
            Setup::Stec => format!("stec_{kind}_{}", subset.name()),
            Setup::Mtec { target } => format!("mtec_{}_{kind}_{}", target.name(), subset.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub setup: Setup,
    pub model: Model,
}

impl NamedModel {
    pub fn file_stem(&self) -> String {
        self.setup.file_stem(self.model.kind.name(), self.model.schema.subset)
    }
}

fn train_balanced(kind: ModelKind, data: &Dataset, config: &ExperimentConfig, seed: u64) -> Result<Model> {
    let balanced = match smote(data, config.ml.smote_k, seed) {
        Ok(d) => d,
        Err(Error::DegenerateMinority(n)) => {
            log::warn!(
                "{}: minority class has {n} members, training unbalanced",
                data.partition
            );
            data.clone()
        }
        Err(e) => return Err(e),
    };
    train(kind, &balanced, &config.ml.hyper, seed)
}

/// Trains the configured grid on all available data.
pub fn train_models(config: &ExperimentConfig, data: &Datasets) -> Result<Vec<NamedModel>> {
    let mut jobs: Vec<(Setup, ModelKind, Dataset)> = Vec::new();
    for &kind in &config.ml.kinds {
        for d in &data.stec {
            jobs.push((Setup::Stec, kind, d.clone()));
        }
        for m in &data.mtec {
            jobs.push((Setup::Mtec { target: m.target }, kind, mtec_union(&m.parts)?));
        }
    }
    let root = config.training_seed();
    jobs.into_par_iter()
        .enumerate()
        .map(|(i, (setup, kind, d))| {
            Ok(NamedModel {
                setup,
                model: train_balanced(kind, &d, config, derive_seed(root, i as u64))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub setup: Setup,
    pub report: EvalReport,
}

impl NamedReport {
    pub fn file_stem(&self) -> String {
        let kind = self.report.kind.map_or("baseline", ModelKind::name);
        self.setup.file_stem(kind, self.report.subset)
    }
}

/// Cross-validates the grid and evaluates the threshold baseline.
pub fn evaluate_models(
    config: &ExperimentConfig,
    data: &Datasets,
    stats: &FlakinessCorpusStats,
) -> Result<Vec<NamedReport>> {
    let cv = config.cv_config();
    let mut jobs: Vec<(Setup, Option<ModelKind>, usize)> = Vec::new();
    for &kind in &config.ml.kinds {
        jobs.extend((0..data.stec.len()).map(|i| (Setup::Stec, Some(kind), i)));
    }
    for (i, m) in data.mtec.iter().enumerate() {
        let setup = Setup::Mtec { target: m.target };
        for &kind in &config.ml.kinds {
            jobs.push((setup, Some(kind), i));
        }
        // one baseline per target; it ignores input variables
        if m.subset == config.ml.subsets[0] {
            jobs.push((setup, None, i));
        }
    }
    jobs.into_par_iter()
        .map(|(setup, kind, i)| {
            let report = match (setup, kind) {
                (Setup::Stec, Some(k)) => cross_validate(&data.stec[i], k, &config.ml.hyper, &cv)?,
                (Setup::Mtec { .. }, Some(k)) => cross_validate_mtec(&data.mtec[i].parts, k, &config.ml.hyper, &cv)?,
                (Setup::Mtec { .. }, None) => evaluate_baseline(&data.mtec[i].parts, stats, config.tau)?,
                (Setup::Stec, None) => unreachable!("no single-execution baseline"),
            };
            Ok(NamedReport { setup, report })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub setup: Setup,
    pub kind: ModelKind,
    pub subset: FeatureSubset,
    pub f1: f64,
}

/// Highest pooled F1 per setup; ties go to the earlier grid entry.
pub fn best_models(reports: &[NamedReport]) -> Vec<BestModel> {
    let mut best: Vec<BestModel> = Vec::new();
    for r in reports {
        let Some(kind) = r.report.kind else { continue };
        let f1 = r.report.aggregate.f1;
        match best.iter_mut().find(|b| b.setup == r.setup) {
            Some(b) if b.f1 >= f1 => {}
            Some(b) => {
                *b = BestModel {
                    setup: r.setup,
                    kind,
                    subset: r.report.subset,
                    f1,
                }
            }
            None => best.push(BestModel {
                setup: r.setup,
                kind,
                subset: r.report.subset,
                f1,
            }),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub repeat: usize,
    pub f_opt: Vec<f64>,
    pub best: usize,
    pub best_input_hash: String,
    pub final_best: f64,
    pub simulations: usize,
    pub failures: [usize; 4],
}

impl From<&SearchRun> for RunSummary {
    fn from(r: &SearchRun) -> Self {
        RunSummary {
            repeat: r.repeat,
            f_opt: r.f_opt.clone(),
            best: r.best,
            best_input_hash: r.candidates[r.best].input_hash.clone(),
            final_best: r.final_best(),
            simulations: r.simulations,
            failures: r.failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub total_simulations: usize,
    pub total_failures: [usize; 4],
    pub runs: Vec<RunSummary>,
}

impl AlgorithmResult {
    pub fn final_bests(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_best).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBundle {
    pub schema_version: u32,
    pub target: FitnessId,
    pub iterations: usize,
    pub repeats: usize,
    pub rerun_budget: usize,
    pub results: Vec<AlgorithmResult>,
}

impl SearchBundle {
    pub fn result(&self, a: Algorithm) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.algorithm == a)
    }
}

/// What the adaptive algorithms need beyond the configuration.
#[derive(Default)]
pub struct PolicyInputs<'a> {
    pub stats: Option<&'a FlakinessCorpusStats>,
    /// Single- and multi-execution models for the target.
    pub models: Option<(&'a Model, &'a Model)>,
}

/// Runs every configured algorithm on the same candidate streams for `target`.
pub fn search_bundle(
    config: &ExperimentConfig,
    target: FitnessId,
    store: &RunLogStore,
    inputs: &PolicyInputs<'_>,
) -> Result<SearchBundle> {
    let sc = config.search_config(target);
    let exec = CachedExecutor::new(store, SimExecutor::new(config.noise, config.specs));
    let baseline = match config.search.algorithms.contains(&Algorithm::RsB) {
        true => {
            let stats = inputs
                .stats
                .ok_or_else(|| Error::MissingModels("the baseline search needs flakiness stats".into()))?;
            let mut p = BaselinePolicy::new(stats.clone(), config.specs, target);
            p.tau = config.tau;
            Some(p)
        }
        false => None,
    };
    let model_policy = match config.search.algorithms.contains(&Algorithm::RsMl) {
        true => {
            let (stec, mtec) = inputs
                .models
                .ok_or_else(|| Error::MissingModels(format!("no classifiers supplied for target {target}")))?;
            if mtec.schema.target != target {
                return Err(Error::SchemaMismatch(format!(
                    "multi-execution model targets {}, search targets {target}",
                    mtec.schema.target
                )));
            }
            Some(ModelPolicy::new(
                stec.clone(),
                mtec.clone(),
                config.space.clone(),
                config.specs,
            )?)
        }
        false => None,
    };
    let per_repeat: Vec<Vec<SearchRun>> = (0..sc.repeats)
        .into_par_iter()
        .map(|repeat| {
            config
                .search
                .algorithms
                .iter()
                .map(|&a| {
                    let strategy = match a {
                        Algorithm::Rs1 => Strategy::Fixed(1),
                        Algorithm::RsN => Strategy::Fixed(sc.rerun_budget),
                        Algorithm::RsMl => {
                            Strategy::Adaptive(model_policy.as_ref().expect("built above") as &dyn RerunPolicy)
                        }
                        Algorithm::RsB => {
                            Strategy::Adaptive(baseline.as_ref().expect("built above") as &dyn RerunPolicy)
                        }
                    };
                    random_search(a.name(), &sc, repeat, &config.space, &config.specs, &strategy, &exec)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let results = config
        .search
        .algorithms
        .iter()
        .enumerate()
        .map(|(k, &algorithm)| {
            let runs: Vec<RunSummary> = per_repeat.iter().map(|rs| RunSummary::from(&rs[k])).collect();
            let mut total_failures = [0; 4];
            for r in &runs {
                for (t, f) in total_failures.iter_mut().zip(r.failures) {
                    *t += f;
                }
            }
            AlgorithmResult {
                algorithm,
                total_simulations: runs.iter().map(|r| r.simulations).sum(),
                total_failures,
                runs,
            }
        })
        .collect();
    Ok(SearchBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        target,
        iterations: sc.iterations,
        repeats: sc.repeats,
        rerun_budget: sc.rerun_budget,
        results,
    })
}

/// The pairs compared in every bundle: the first algorithm is tested for
/// lower final fitness than the second.
pub const COMPARED_PAIRS: [(Algorithm, Algorithm); 5] = [
    (Algorithm::RsN, Algorithm::Rs1),
    (Algorithm::RsMl, Algorithm::Rs1),
    (Algorithm::RsB, Algorithm::Rs1),
    (Algorithm::RsMl, Algorithm::RsB),
    (Algorithm::RsMl, Algorithm::RsN),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target: FitnessId,
    pub first: Algorithm,
    pub second: Algorithm,
    pub first_simulations: usize,
    pub second_simulations: usize,
    pub first_failures: usize,
    pub second_failures: usize,
    #[serde(flatten)]
    pub result: ComparisonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparisons {
    pub schema_version: u32,
    pub comparisons: Vec<Comparison>,
}

pub fn compare_bundles(bundles: &[SearchBundle]) -> Comparisons {
    let mut comparisons = Vec::new();
    for b in bundles {
        for (first, second) in COMPARED_PAIRS {
            let (Some(x), Some(y)) = (b.result(first), b.result(second)) else {
                continue;
            };
            let t = b.target.index();
            comparisons.push(Comparison {
                target: b.target,
                first,
                second,
                first_simulations: x.total_simulations,
                second_simulations: y.total_simulations,
                first_failures: x.total_failures[t],
                second_failures: y.total_failures[t],
                result: compare(&x.final_bests(), &y.final_bests(), Alternative::Less),
            });
        }
    }
    Comparisons {
        schema_version: COMPARISON_SCHEMA_VERSION,
        comparisons,
    }
}
