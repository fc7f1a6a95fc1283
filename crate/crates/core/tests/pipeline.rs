use flakesim::experiments::{
    build_datasets, evaluate_models, flakiness, generate_corpus, run_corpus, train_models, ExperimentConfig,
    RunLogStore, Setup,
};
use flakesim::fitness::FitnessId;
use flakesim::ml::{FeatureSubset, ModelKind};
use flakesim::search::{Executor, SimExecutor};
use flakesim::Error;
use std::collections::HashSet;

fn small(size: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        seed: 5,
        ..ExperimentConfig::default()
    };
    c.corpus.size = size;
    c.ml.hyper.forest.trees = 5;
    c.ml.hyper.mlp.epochs = 20;
    c.ml.folds = 3;
    c
}

#[test]
fn corpus_hashes_are_unique_and_reproducible() {
    let c = small(1000);
    let a = generate_corpus(&c).unwrap();
    let hashes: HashSet<&str> = a.entries.iter().map(|e| e.input_hash.as_str()).collect();
    assert_eq!(hashes.len(), 1000);
    let b = generate_corpus(&c).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn crowded_corpus_reports_how_far_it_got() {
    let mut c = small(50);
    c.corpus.diversity_epsilon = 1.5;
    match generate_corpus(&c) {
        Err(Error::UnsatisfiableSpace {
            achieved, requested, ..
        }) => {
            assert!((1..50).contains(&achieved));
            assert_eq!(requested, 50);
        }
        other => panic!("expected an unsatisfiable space, got {other:?}"),
    }
}

#[test]
fn warm_cache_simulates_nothing() {
    let c = small(100);
    let corpus = generate_corpus(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runlog.jsonl");
    let store = RunLogStore::open(&log).unwrap();
    let cold = run_corpus(&c, &corpus, &store, 10);
    assert_eq!(store.flush().unwrap(), 1000);
    let store = RunLogStore::open(&log).unwrap();
    let warm = run_corpus(&c, &corpus, &store, 10);
    assert_eq!(store.pending(), 0);
    assert_eq!(warm, cold);
    let fresh = SimExecutor::new(c.noise, c.specs);
    for r in cold.records.iter().take(10) {
        for run in &r.runs {
            assert_eq!(fresh.execute(&r.input, run.seed), run.fitness);
        }
    }
}

fn sorted_lines(path: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    v.sort();
    v
}

#[test]
fn interleaved_runs_fill_the_same_store() {
    let c = small(30);
    let corpus = generate_corpus(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let once = dir.path().join("once.jsonl");
    let store = RunLogStore::open(&once).unwrap();
    let full = run_corpus(&c, &corpus, &store, 10);
    store.flush().unwrap();

    let pieces = dir.path().join("pieces.jsonl");
    let mut head = corpus.clone();
    head.entries.truncate(12);
    for (part, reruns) in [(&head, 3), (&corpus, 5), (&head, 10), (&corpus, 10)] {
        let store = RunLogStore::open(&pieces).unwrap();
        run_corpus(&c, part, &store, reruns);
        store.flush().unwrap();
    }
    assert_eq!(sorted_lines(&once), sorted_lines(&pieces));
    let store = RunLogStore::open(&pieces).unwrap();
    assert_eq!(run_corpus(&c, &corpus, &store, 10), full);
    assert_eq!(store.pending(), 0);
}

#[test]
fn training_grid_and_baseline_law() {
    let mut c = small(80);
    c.ml.mtec_targets = vec![FitnessId::F2];
    let corpus = generate_corpus(&c).unwrap();
    let records = run_corpus(&c, &corpus, &RunLogStore::in_memory(), 10);
    let (stats, _) = flakiness(&c, &records).unwrap();
    let data = build_datasets(&c, &records, &stats).unwrap();
    let models = train_models(&c, &data).unwrap();
    let stec = models.iter().filter(|m| m.setup == Setup::Stec).count();
    assert_eq!(stec, ModelKind::ALL.len() * FeatureSubset::ALL.len());
    assert_eq!(models.len(), 2 * stec);
    let reports = evaluate_models(&c, &data, &stats).unwrap();
    let baseline = reports
        .iter()
        .find(|r| r.report.kind.is_none())
        .expect("baseline report");
    for i in 2..=9 {
        let m = baseline.report.partition(i).unwrap();
        assert_eq!(m.confusion.fp, 0, "D{i}: {m:?}");
        if m.confusion.tp > 0 {
            assert_eq!(m.precision, 1.0);
        }
    }
}
