//! The CLI subcommands: each reads its inputs from and writes its artifacts to
//! the output directory.

use super::config::{Algorithm, ExperimentConfig};
use super::pipeline::*;
use super::store::RunLogStore;
use crate::error::{Error, Result};
use crate::fitness::FitnessId;
use crate::flakiness::FlakinessCorpusStats;
use crate::ml::dataset::DATASET_SCHEMA_VERSION;
use crate::ml::{Dataset, FeatureSchema, FeatureSubset, Model, ModelKind, Partition};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const ACCOUNTING_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// File locations under the output directory. Everything except `cache/` is
/// a deterministic function of the configuration.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.json")
    }
    pub fn records(&self) -> PathBuf {
        self.root.join("runs/records.json")
    }
    pub fn run_log_csv(&self) -> PathBuf {
        self.root.join("runs/runs.csv")
    }
    pub fn stats(&self) -> PathBuf {
        self.root.join("flakiness/stats.json")
    }
    pub fn datasets(&self) -> PathBuf {
        self.root.join("datasets")
    }
    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn search(&self) -> PathBuf {
        self.root.join("search")
    }
    pub fn compare(&self) -> PathBuf {
        self.root.join("compare")
    }
    pub fn run_log(&self) -> PathBuf {
        self.root.join("cache/runlog.jsonl")
    }
    pub fn accounting(&self) -> PathBuf {
        self.root.join("cache/accounting.json")
    }
    pub fn bundle(&self, target: FitnessId) -> PathBuf {
        self.search().join(format!("bundle_{}.json", target.name()))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, &s)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read(path)?)?)
}

fn check_version(what: &str, found: u32, expected: u32) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::SchemaVersion {
            what: what.into(),
            found,
            expected,
        })
    }
}

/// The serde name of a unit enum value.
fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => panic!("not a unit variant: {other:?}"),
    }
}

fn csv_text(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Simulation accounting of the last command that executed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    pub schema_version: u32,
    pub command: String,
    /// Executions requested by the command.
    pub requested: usize,
    /// Executions that missed the cache and were simulated.
    pub simulated: usize,
    pub cache_entries: usize,
}

fn finish_store(layout: &Layout, store: &RunLogStore, command: &str, requested: usize) -> Result<Accounting> {
    let simulated = store.flush()?;
    let acc = Accounting {
        schema_version: ACCOUNTING_SCHEMA_VERSION,
        command: command.into(),
        requested,
        simulated,
        cache_entries: store.len(),
    };
    write_json(&layout.accounting(), &acc)?;
    Ok(acc)
}

pub fn load_corpus(layout: &Layout) -> Result<Corpus> {
    let c: Corpus = read_json(&layout.corpus())?;
    check_version("corpus", c.schema_version, CORPUS_SCHEMA_VERSION)?;
    Ok(c)
}

pub fn load_records(layout: &Layout) -> Result<Records> {
    let r: Records = read_json(&layout.records())?;
    check_version("records", r.schema_version, RECORDS_SCHEMA_VERSION)?;
    Ok(r)
}

pub fn load_stats(layout: &Layout) -> Result<FlakinessCorpusStats> {
    FlakinessCorpusStats::from_json(&read(&layout.stats())?)
}

pub fn cmd_generate(config: &ExperimentConfig, layout: &Layout) -> Result<String> {
    let corpus = generate_corpus(config)?;
    write_json(&layout.corpus(), &corpus)?;
    Ok(format!(
        "generated {} inputs into {}",
        corpus.entries.len(),
        layout.corpus().display()
    ))
}

pub fn cmd_run(config: &ExperimentConfig, layout: &Layout, reruns: Option<usize>) -> Result<String> {
    let corpus = load_corpus(layout)?;
    let n = reruns.unwrap_or(config.corpus.reruns);
    if n == 0 {
        return Err(Error::Config("the number of reruns must be at least 1".into()));
    }
    let store = RunLogStore::open(&layout.run_log())?;
    let records = run_corpus(config, &corpus, &store, n);
    let acc = finish_store(layout, &store, "run", records.total_simulations)?;

    let mut rows = vec![[
        "schema_version",
        "input_id",
        "input_hash",
        "run",
        "seed",
        "f1",
        "f2",
        "f3",
        "f4",
        "f1_score",
        "f2_score",
        "f3_score",
        "f4_score",
    ]
    .map(String::from)
    .to_vec()];
    for (e, r) in corpus.entries.iter().zip(&records.records) {
        for (j, run) in r.runs.iter().enumerate() {
            let mut row = vec![
                RECORDS_SCHEMA_VERSION.to_string(),
                e.id.clone(),
                e.input_hash.clone(),
                j.to_string(),
                run.seed.to_string(),
            ];
            row.extend(run.fitness.to_array().map(num));
            row.extend(run.fitness.scores(&config.specs)?.map(num));
            rows.push(row);
        }
    }
    write(&layout.run_log_csv(), &csv_text(rows)?)?;
    write_json(&layout.records(), &records)?;
    Ok(format!(
        "{} runs of {} inputs ({} simulated, {} from cache)",
        records.total_simulations,
        corpus.entries.len(),
        acc.simulated,
        acc.requested - acc.simulated
    ))
}

pub fn cmd_flakiness(config: &ExperimentConfig, layout: &Layout) -> Result<String> {
    let records = load_records(layout)?;
    let (stats, table) = flakiness(config, &records)?;
    write(&layout.stats(), &stats.to_json())?;
    write(&layout.root.join("flakiness/table.csv"), &table.to_csv()?)?;
    write_json(&layout.root.join("flakiness/table.json"), &table)?;
    let hf: Vec<String> = table
        .functions
        .iter()
        .map(|r| format!("{}={}", r.function, r.hard_flaky))
        .collect();
    Ok(format!("hard-flaky inputs: {}", hf.join(" ")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub file: String,
    pub partition: Partition,
    pub schema: FeatureSchema,
    pub rows: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub dataset_schema_version: u32,
    pub entries: Vec<DatasetEntry>,
}

fn dataset_file(d: &Dataset) -> String {
    let s = &d.schema;
    match d.partition {
        Partition::Stec => format!("dstec_{}.csv", s.subset.name()),
        p => format!("dmtec_{}_{}_{p}.csv", s.target.name(), s.subset.name()),
    }
}

pub fn cmd_dataset(config: &ExperimentConfig, layout: &Layout) -> Result<String> {
    let records = load_records(layout)?;
    let stats = load_stats(layout)?;
    let data = build_datasets(config, &records, &stats)?;
    let mut entries = Vec::new();
    let all = data.stec.iter().chain(data.mtec.iter().flat_map(|m| &m.parts));
    for d in all {
        let file = dataset_file(d);
        write(&layout.datasets().join(&file), &d.to_csv()?)?;
        entries.push(DatasetEntry {
            file,
            partition: d.partition,
            schema: d.schema.clone(),
            rows: d.len(),
            positives: d.positives(),
        });
    }
    let n = entries.len();
    write_json(
        &layout.datasets().join("manifest.json"),
        &DatasetManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            dataset_schema_version: DATASET_SCHEMA_VERSION,
            entries,
        },
    )?;
    Ok(format!("wrote {n} datasets"))
}

pub fn load_datasets(config: &ExperimentConfig, layout: &Layout) -> Result<Datasets> {
    let m: DatasetManifest = read_json(&layout.datasets().join("manifest.json"))?;
    check_version("dataset manifest", m.schema_version, MANIFEST_SCHEMA_VERSION)?;
    check_version("dataset", m.dataset_schema_version, DATASET_SCHEMA_VERSION)?;
    let mut stec = Vec::new();
    let mut mtec: Vec<MtecData> = Vec::new();
    for e in m.entries {
        let d = Dataset::from_csv(e.schema, e.partition, &read(&layout.datasets().join(&e.file))?)?;
        match d.partition {
            Partition::Stec => stec.push(d),
            _ => {
                let (target, subset) = (d.schema.target, d.schema.subset);
                match mtec.iter_mut().find(|x| x.target == target && x.subset == subset) {
                    Some(x) => x.parts.push(d),
                    None => mtec.push(MtecData {
                        target,
                        subset,
                        parts: vec![d],
                    }),
                }
            }
        }
    }
    // keep only what the configuration asks for
    stec.retain(|d| config.ml.subsets.contains(&d.schema.subset));
    mtec.retain(|x| config.ml.subsets.contains(&x.subset) && config.ml.mtec_targets.contains(&x.target));
    Ok(Datasets { stec, mtec })
}

pub fn cmd_train(config: &ExperimentConfig, layout: &Layout) -> Result<String> {
    let data = load_datasets(config, layout)?;
    let models = train_models(config, &data)?;
    for m in &models {
        write(
            &layout.models().join(format!("{}.json", m.file_stem())),
            &m.model.to_json(),
        )?;
    }
    Ok(format!("trained {} models", models.len()))
}

fn model_path(layout: &Layout, setup: Setup, kind: ModelKind, subset: FeatureSubset) -> PathBuf {
    layout
        .models()
        .join(format!("{}.json", setup.file_stem(kind.name(), subset)))
}

pub fn load_model(layout: &Layout, setup: Setup, kind: ModelKind, subset: FeatureSubset) -> Result<Model> {
    let path = model_path(layout, setup, kind, subset);
    if !path.exists() {
        return Err(Error::MissingModels(format!("{} not found", path.display())));
    }
    Model::from_json(&read(&path)?)
}

pub fn cmd_eval(config: &ExperimentConfig, layout: &Layout) -> Result<String> {
    let data = load_datasets(config, layout)?;
    let stats = load_stats(layout)?;
    let reports = evaluate_models(config, &data, &stats)?;
    let mut rows = vec![[
        "schema_version",
        "setup",
        "target",
        "kind",
        "subset",
        "partition",
        "precision",
        "recall",
        "f1",
        "tp",
        "fp",
        "tn",
        "fn",
    ]
    .map(String::from)
    .to_vec()];
    for r in &reports {
        write_json(
            &layout.reports().join(format!("eval/{}.json", r.file_stem())),
            &r.report,
        )?;
        let (setup, target) = match r.setup {
            Setup::Stec => ("stec", String::new()),
            Setup::Mtec { target } => ("mtec", target.name().to_string()),
        };
        let kind = r.report.kind.map_or("baseline", ModelKind::name);
        let parts = std::iter::once(("all".to_string(), &r.report.aggregate)).chain(
            r.report
                .partitions
                .iter()
                .map(|p| (format!("d{}", p.partition), &p.metrics)),
        );
        for (part, m) in parts {
            let c = m.confusion;
            rows.push(vec![
                crate::ml::cv::REPORT_SCHEMA_VERSION.to_string(),
                setup.into(),
                target.clone(),
                kind.into(),
                r.report.subset.name().into(),
                part,
                num(m.precision),
                num(m.recall),
                num(m.f1),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
            ]);
        }
    }
    write(&layout.reports().join("eval_summary.csv"), &csv_text(rows)?)?;
    let best = best_models(&reports);
    write_json(
        &layout.reports().join("best_models.json"),
        &BestModels {
            schema_version: crate::ml::cv::REPORT_SCHEMA_VERSION,
            best: best.clone(),
        },
    )?;
    let lines: Vec<String> = best
        .iter()
        .map(|b| {
            let setup = match b.setup {
                Setup::Stec => "stec".to_string(),
                Setup::Mtec { target } => format!("mtec/{target}"),
            };
            format!("{setup} {} {} f1={:.3}", b.kind.name(), b.subset.name(), b.f1)
        })
        .collect();
    Ok(format!(
        "evaluated {} configurations; best: {}",
        reports.len(),
        lines.join("; ")
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModels {
    pub schema_version: u32,
    pub best: Vec<BestModel>,
}

pub fn load_bundle(layout: &Layout, target: FitnessId) -> Result<SearchBundle> {
    let b: SearchBundle = read_json(&layout.bundle(target))?;
    check_version("search bundle", b.schema_version, BUNDLE_SCHEMA_VERSION)?;
    Ok(b)
}

pub fn cmd_search(config: &ExperimentConfig, layout: &Layout) -> Result<String> {
    let algorithms = &config.search.algorithms;
    let stats = match algorithms.contains(&Algorithm::RsB) {
        true => Some(load_stats(layout)?),
        false => None,
    };
    let store = RunLogStore::open(&layout.run_log())?;
    let mut bundles = Vec::new();
    for &target in &config.search.targets {
        let models = match algorithms.contains(&Algorithm::RsMl) {
            true => {
                let (kind, subset) = (config.ml.policy_kind, config.ml.policy_subset);
                Some((
                    load_model(layout, Setup::Stec, kind, subset)?,
                    load_model(layout, Setup::Mtec { target }, kind, subset)?,
                ))
            }
            false => None,
        };
        let inputs = PolicyInputs {
            stats: stats.as_ref(),
            models: models.as_ref().map(|(s, m)| (s, m)),
        };
        bundles.push(search_bundle(config, target, &store, &inputs)?);
    }
    let requested = bundles
        .iter()
        .flat_map(|b| &b.results)
        .map(|r| r.total_simulations)
        .sum();
    let acc = finish_store(layout, &store, "search", requested)?;

    let mut traj = vec![
        ["schema_version", "target", "algorithm", "repeat", "iteration", "f_opt"]
            .map(String::from)
            .to_vec(),
    ];
    let mut summary = vec![[
        "schema_version",
        "target",
        "algorithm",
        "total_simulations",
        "failures_f1",
        "failures_f2",
        "failures_f3",
        "failures_f4",
        "mean_final_best",
    ]
    .map(String::from)
    .to_vec()];
    for b in &bundles {
        write_json(&layout.bundle(b.target), b)?;
        for r in &b.results {
            for run in &r.runs {
                for (k, v) in run.f_opt.iter().enumerate() {
                    traj.push(vec![
                        BUNDLE_SCHEMA_VERSION.to_string(),
                        b.target.name().into(),
                        r.algorithm.name().into(),
                        run.repeat.to_string(),
                        k.to_string(),
                        num(*v),
                    ]);
                }
            }
            let finals = r.final_bests();
            let mut row = vec![
                BUNDLE_SCHEMA_VERSION.to_string(),
                b.target.name().into(),
                r.algorithm.name().into(),
                r.total_simulations.to_string(),
            ];
            row.extend(r.total_failures.map(|f| f.to_string()));
            row.push(num(finals.iter().sum::<f64>() / finals.len() as f64));
            summary.push(row);
        }
    }
    write(&layout.search().join("trajectories.csv"), &csv_text(traj)?)?;
    write(&layout.search().join("summary.csv"), &csv_text(summary)?)?;
    Ok(format!(
        "{} search bundles, {requested} runs ({} simulated)",
        bundles.len(),
        acc.simulated
    ))
}

pub fn cmd_compare(config: &ExperimentConfig, layout: &Layout) -> Result<String> {
    let bundles = config
        .search
        .targets
        .iter()
        .map(|&t| load_bundle(layout, t))
        .collect::<Result<Vec<_>>>()?;
    let comparisons = compare_bundles(&bundles);
    write_json(&layout.compare().join("comparisons.json"), &comparisons)?;
    let mut rows = vec![[
        "schema_version",
        "target",
        "first",
        "second",
        "p_value",
        "a12",
        "magnitude",
        "nonzero_pairs",
        "first_simulations",
        "second_simulations",
        "first_failures",
        "second_failures",
    ]
    .map(String::from)
    .to_vec()];
    let mut significant = 0;
    for c in &comparisons.comparisons {
        significant += usize::from(c.result.p_value < 0.05);
        rows.push(vec![
            COMPARISON_SCHEMA_VERSION.to_string(),
            c.target.name().into(),
            c.first.name().into(),
            c.second.name().into(),
            num(c.result.p_value),
            num(c.result.a12),
            tag(&c.result.magnitude),
            c.result.nonzero_pairs.to_string(),
            c.first_simulations.to_string(),
            c.second_simulations.to_string(),
            c.first_failures.to_string(),
            c.second_failures.to_string(),
        ]);
    }
    write(&layout.compare().join("comparisons.csv"), &csv_text(rows)?)?;
    Ok(format!(
        "{} comparisons, {significant} with p < 0.05",
        comparisons.comparisons.len()
    ))
}
